//! Numeric verifier for the pointwise premises of the disjoint
//! hypercyclicity criterion on pointed metric spaces, plus the two packaged
//! experiments that instantiate it: backward-shift powers on the Cantor set
//! with digit-prepending right inverses, and tent-map powers on [-1,1] with
//! the halving map.
//!
//! The dense sets of the criterion are replaced by finite generator batches,
//! so a PASS certifies the premises on the tested batch only; the
//! operator-level conclusion follows by the criterion and is recorded as an
//! implication, never re-proved here.

use std::collections::BTreeSet;

use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{compose, DynMap, MapTuple};
use crate::metric_spaces::{CantorPoint, IntervalPoint, Point, Tail};
use crate::{rat, Rat};

/// How a condition's worst distance behaved at the last schedule point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionVerdict {
    /// Exactly zero, usually because the composition collapsed to the
    /// identity or the point died under a shift.
    ExactZero,
    /// Positive but at most eps.
    BelowEps,
    /// Above eps yet strictly decreasing over the last three schedule
    /// points, so the run is too short rather than divergent.
    Decaying,
    /// Above eps and not strictly decreasing over the last three points.
    Fail,
}

impl std::fmt::Display for ConditionVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ConditionVerdict::ExactZero => "EXACT_ZERO",
            ConditionVerdict::BelowEps => "BELOW_EPS",
            ConditionVerdict::Decaying => "DECAYING",
            ConditionVerdict::Fail => "FAIL",
        };
        write!(f, "{s}")
    }
}

/// Decay table and verdict for one condition: the worst distance over the
/// test batch at every schedule point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionOutcome {
    /// (n_k, worst distance at n_k), one row per schedule point.
    pub decay: Vec<(u64, Rat)>,
    pub final_worst: Rat,
    pub verdict: ConditionVerdict,
}

fn classify(decay: &[(u64, Rat)], eps: &Rat) -> ConditionOutcome {
    let final_worst = decay.last().expect("schedule is non-empty").1.clone();
    let verdict = if final_worst.is_zero() {
        ConditionVerdict::ExactZero
    } else if final_worst <= *eps {
        ConditionVerdict::BelowEps
    } else if decay.len() >= 3 {
        let tail = &decay[decay.len() - 3..];
        if tail[0].1 > tail[1].1 && tail[1].1 > tail[2].1 {
            ConditionVerdict::Decaying
        } else {
            ConditionVerdict::Fail
        }
    } else {
        ConditionVerdict::Fail
    };
    ConditionOutcome { decay: decay.to_vec(), final_worst, verdict }
}

/// A finite instance of the criterion premises: maps f_1..f_N, a strictly
/// increasing schedule n_1 < ... < n_K, right-inverse candidates g_{i,k},
/// and finite test batches M_0..M_N standing in for the dense sets.
#[derive(Debug, Clone)]
pub struct CriterionInstance {
    tuple: MapTuple,
    test_sets: Vec<Vec<Point>>,
    inverses: Vec<Vec<DynMap>>,
    schedule: Vec<u64>,
    eps: Rat,
}

impl CriterionInstance {
    pub fn new(
        tuple: MapTuple,
        test_sets: Vec<Vec<Point>>,
        inverses: Vec<Vec<DynMap>>,
        schedule: Vec<u64>,
        eps: Rat,
    ) -> Result<Self> {
        let n = tuple.len();
        if test_sets.len() != n + 1 {
            return Err(Error::DomainError(format!(
                "expected {} test batches for {n} maps, got {}",
                n + 1,
                test_sets.len()
            )));
        }
        if test_sets.iter().any(|s| s.is_empty()) {
            return Err(Error::DomainError("every test batch must be non-empty".into()));
        }
        for set in &test_sets {
            for p in set {
                if !tuple.space().contains(p) {
                    return Err(Error::WrongSpace);
                }
            }
        }
        if schedule.is_empty() {
            return Err(Error::BadHorizon);
        }
        if schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::DomainError(
                "the schedule must be strictly increasing".into(),
            ));
        }
        if inverses.len() != n || inverses.iter().any(|row| row.len() != schedule.len()) {
            return Err(Error::DomainError(format!(
                "inverse schedule must be {n} rows of {} maps",
                schedule.len()
            )));
        }
        for row in &inverses {
            for g in row {
                if g.space() != tuple.space() {
                    return Err(Error::WrongSpace);
                }
            }
        }
        if eps <= Rat::zero() {
            return Err(Error::BadThreshold);
        }
        Ok(CriterionInstance { tuple, test_sets, inverses, schedule, eps })
    }

    pub fn tuple(&self) -> &MapTuple {
        &self.tuple
    }

    pub fn schedule(&self) -> &[u64] {
        &self.schedule
    }

    pub fn eps(&self) -> &Rat {
        &self.eps
    }
}

/// Verdicts and decay tables for the three premises. The mixed condition
/// is additionally split into its diagonal part, where compositions often
/// collapse to the identity and the distance is literally zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub schedule: Vec<u64>,
    pub eps: Rat,
    /// Sizes of the finite batches standing in for the dense sets.
    pub batch_sizes: Vec<usize>,
    /// d(f_i^{n_k} x, 0) over x in M_0.
    pub cond_orbit: ConditionOutcome,
    /// d(g_{i,k} x, 0) over x in M_i.
    pub cond_inverse: ConditionOutcome,
    /// d((f_i^{n_k} . g_{j,k}) x, [j = i] x) over x in M_i and all pairs.
    pub cond_mixed: ConditionOutcome,
    /// The j = i rows of the mixed condition alone.
    pub cond_mixed_diag: ConditionOutcome,
    pub pass: bool,
    /// What a PASS does and does not certify.
    pub conclusion: String,
}

fn max_assign(worst: &mut Rat, candidate: Rat) {
    if candidate > *worst {
        *worst = candidate;
    }
}

/// Evaluates the three premises exactly at every schedule point over the
/// whole test grid. Compositions go through the collapse tables first, so
/// identities are recognized symbolically and their distances are exact
/// zeros rather than small numbers.
pub fn verify_criterion(instance: &CriterionInstance) -> Result<CriterionReport> {
    let space = instance.tuple.space();
    let base = space.basepoint();
    let n_maps = instance.tuple.len();

    struct Row {
        orbit: Rat,
        inverse: Rat,
        mixed: Rat,
        diag: Rat,
    }

    let rows: Vec<Row> = instance
        .schedule
        .par_iter()
        .enumerate()
        .map(|(kidx, &nk)| {
            let mut row = Row {
                orbit: Rat::zero(),
                inverse: Rat::zero(),
                mixed: Rat::zero(),
                diag: Rat::zero(),
            };
            let iterates: Vec<DynMap> = instance
                .tuple
                .maps()
                .iter()
                .map(|f| f.pow(nk))
                .collect::<Result<_>>()?;
            for f_nk in &iterates {
                for x0 in &instance.test_sets[0] {
                    let image = f_nk.apply(x0)?;
                    max_assign(&mut row.orbit, space.norm(&image)?);
                }
            }
            for (i, row_g) in instance.inverses.iter().enumerate() {
                let g = &row_g[kidx];
                for x in &instance.test_sets[i + 1] {
                    let image = g.apply(x)?;
                    max_assign(&mut row.inverse, space.norm(&image)?);
                }
            }
            for (i, f_nk) in iterates.iter().enumerate() {
                for j in 0..n_maps {
                    let composed = compose(f_nk, &instance.inverses[j][kidx])?;
                    for x in &instance.test_sets[i + 1] {
                        let image = composed.apply(x)?;
                        let target = if j == i { x } else { &base };
                        let d = space.distance(&image, target)?;
                        if j == i {
                            max_assign(&mut row.diag, d.clone());
                        }
                        max_assign(&mut row.mixed, d);
                    }
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let table = |pick: fn(&Row) -> &Rat| -> Vec<(u64, Rat)> {
        instance
            .schedule
            .iter()
            .zip(&rows)
            .map(|(&nk, r)| (nk, pick(r).clone()))
            .collect()
    };
    let cond_orbit = classify(&table(|r| &r.orbit), &instance.eps);
    let cond_inverse = classify(&table(|r| &r.inverse), &instance.eps);
    let cond_mixed = classify(&table(|r| &r.mixed), &instance.eps);
    let cond_mixed_diag = classify(&table(|r| &r.diag), &instance.eps);
    let pass = [&cond_orbit, &cond_inverse, &cond_mixed]
        .iter()
        .all(|c| c.verdict != ConditionVerdict::Fail);
    Ok(CriterionReport {
        schedule: instance.schedule.clone(),
        eps: instance.eps.clone(),
        batch_sizes: instance.test_sets.iter().map(|s| s.len()).collect(),
        cond_orbit,
        cond_inverse,
        cond_mixed,
        cond_mixed_diag,
        pass,
        conclusion: "PASS certifies the pointwise premises on the finite test batches only; \
                     the disjoint-mixing conclusion for the lifted operators follows by the \
                     criterion and is not re-checked here."
            .into(),
    })
}

fn validate_powers(powers: &[u64]) -> Result<()> {
    if powers.len() < 2 {
        return Err(Error::DomainError("need at least two powers".into()));
    }
    if powers[0] == 0 || powers.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::NotDistinct);
    }
    Ok(())
}

/// Default tolerance 10^-9.
pub fn default_eps() -> Rat {
    rat(1, 1_000_000_000)
}

/// The schedule n_k = 2k used by both packaged experiments; any strictly
/// increasing schedule works for the shift and tent instances, and this one
/// drives every surviving distance below the default tolerance by k = 20.
fn double_schedule(big_k: u64) -> Result<Vec<u64>> {
    if big_k == 0 {
        return Err(Error::BadHorizon);
    }
    Ok((1..=big_k).map(|k| 2 * k).collect())
}

/// Every Cantor point whose expansion terminates within `max_len` digits,
/// deduplicated through canonical form.
pub fn finite_prefix_points(max_len: usize) -> Vec<Point> {
    let mut out = BTreeSet::new();
    for len in 0..=max_len {
        for word in 0u64..(1u64 << len) {
            let digits: Vec<u8> = (0..len)
                .map(|b| if (word >> b) & 1 == 0 { 0u8 } else { 2u8 })
                .collect();
            out.insert(CantorPoint::new(digits, Tail::AllZero).expect("digits are 0/2"));
        }
    }
    out.into_iter().map(Point::Cantor).collect()
}

/// The dyadic batch r/2^q for |r| <= 2^q.
pub fn dyadic_points(q: u32) -> Vec<Point> {
    let denom = 1i64 << q;
    (-denom..=denom)
        .map(|r| Point::Interval(IntervalPoint::new(rat(r, denom)).expect("|r/2^q| <= 1")))
        .collect()
}

/// The canonical shift instance: sigma^{m_1}, ..., sigma^{m_N} with the
/// digit-prepending inverses g_{i,k} = w^{m_i n_k} and terminating test
/// points of length at most 5.
pub fn shift_powers_instance(powers: &[u64], big_k: u64, eps: Rat) -> Result<CriterionInstance> {
    validate_powers(powers)?;
    let schedule = double_schedule(big_k)?;
    let tuple = MapTuple::new(powers.iter().map(|&m| DynMap::sigma_pow(m)).collect())?;
    let batch = finite_prefix_points(5);
    let test_sets = vec![batch; powers.len() + 1];
    let inverses = powers
        .iter()
        .map(|&m| schedule.iter().map(|&nk| DynMap::w_pow(m * nk)).collect())
        .collect();
    CriterionInstance::new(tuple, test_sets, inverses, schedule, eps)
}

/// Shift powers at the default tolerance. The mixed condition collapses
/// symbolically on the diagonal.
pub fn shift_powers_experiment(powers: &[u64], big_k: u64) -> Result<CriterionReport> {
    verify_criterion(&shift_powers_instance(powers, big_k, default_eps())?)
}

/// The canonical tent instance: f^{m_1}, ..., f^{m_N} with the halving
/// inverses g_{i,k} = halve^{m_i n_k} and dyadic test points r/2^5.
pub fn tent_powers_instance(powers: &[u64], big_k: u64, eps: Rat) -> Result<CriterionInstance> {
    validate_powers(powers)?;
    let schedule = double_schedule(big_k)?;
    let tuple = MapTuple::new(powers.iter().map(|&m| DynMap::tent_pow(m)).collect())?;
    let batch = dyadic_points(5);
    let test_sets = vec![batch; powers.len() + 1];
    let inverses = powers
        .iter()
        .map(|&m| schedule.iter().map(|&nk| DynMap::halve_pow(m * nk)).collect())
        .collect();
    CriterionInstance::new(tuple, test_sets, inverses, schedule, eps)
}

/// Tent powers at the default tolerance. Dyadics die under high tent
/// iterates, so the orbit condition ends exactly at zero.
pub fn tent_powers_experiment(powers: &[u64], big_k: u64) -> Result<CriterionReport> {
    verify_criterion(&tent_powers_instance(powers, big_k, default_eps())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric_spaces::PointedSpace;
    use crate::{half_pow, rat_int};

    #[test]
    fn shift_experiment_passes_with_exact_diagonal() {
        let report = shift_powers_experiment(&[1, 2], 20).unwrap();
        assert!(report.pass);
        assert_eq!(report.cond_orbit.verdict, ConditionVerdict::ExactZero);
        assert_eq!(report.cond_inverse.verdict, ConditionVerdict::BelowEps);
        assert_eq!(report.cond_mixed_diag.verdict, ConditionVerdict::ExactZero);
        assert!(report.cond_mixed_diag.final_worst.is_zero());
        // The diagonal is zero at every k, not only in the limit: the
        // composition collapses to the identity symbolically.
        assert!(report.cond_mixed_diag.decay.iter().all(|(_, d)| d.is_zero()));
        assert_ne!(report.cond_mixed.verdict, ConditionVerdict::Fail);
    }

    #[test]
    fn shift_experiment_handles_three_powers() {
        let report = shift_powers_experiment(&[2, 3, 5], 20).unwrap();
        assert!(report.pass);
        assert_eq!(report.cond_mixed_diag.verdict, ConditionVerdict::ExactZero);
        assert_eq!(report.batch_sizes, vec![32; 4]);
    }

    #[test]
    fn tent_experiment_passes_with_closed_form_decay() {
        let report = tent_powers_experiment(&[1, 2], 20).unwrap();
        assert!(report.pass);
        assert_eq!(report.cond_orbit.verdict, ConditionVerdict::ExactZero);
        assert_eq!(report.cond_inverse.verdict, ConditionVerdict::BelowEps);
        assert_eq!(report.cond_mixed_diag.verdict, ConditionVerdict::ExactZero);
        // Worst inverse distance is exactly max|x| / 2^{m_1 n_k} = 2^{-n_k}.
        for (nk, worst) in &report.cond_inverse.decay {
            assert_eq!(*worst, half_pow(*nk as u32));
        }
        // Once every dyadic has died under the faster map (n_k > 5), the
        // worst mixed distance is the off-diagonal halving tail 2^{-n_k}.
        for (nk, worst) in &report.cond_mixed.decay {
            if *nk > 5 {
                assert_eq!(*worst, half_pow(*nk as u32));
            }
        }
        // Decay tables never increase.
        for table in [&report.cond_inverse.decay, &report.cond_mixed.decay] {
            for pair in table.windows(2) {
                assert!(pair[0].1 >= pair[1].1);
            }
        }
    }

    #[test]
    fn tent_experiment_cross_gap_controls_the_tail() {
        let report = tent_powers_experiment(&[1, 3], 20).unwrap();
        assert!(report.pass);
        // The off-diagonal gap m_2 - m_1 = 2 gives a 2^{-2 n_k} tail.
        for (nk, worst) in &report.cond_mixed.decay {
            if *nk > 5 {
                assert_eq!(*worst, half_pow(2 * *nk as u32));
            }
        }
    }

    #[test]
    fn bad_power_lists_are_rejected() {
        assert!(matches!(shift_powers_experiment(&[1, 1], 20), Err(Error::NotDistinct)));
        assert!(matches!(tent_powers_experiment(&[2, 2], 20), Err(Error::NotDistinct)));
        assert!(matches!(shift_powers_experiment(&[3, 2], 20), Err(Error::NotDistinct)));
        assert!(shift_powers_experiment(&[4], 20).is_err());
        assert!(matches!(shift_powers_experiment(&[1, 2], 0), Err(Error::BadHorizon)));
    }

    #[test]
    fn identity_inverses_fail_the_inverse_condition() {
        let schedule: Vec<u64> = (1..=10).map(|k| 2 * k).collect();
        let tuple = MapTuple::new(vec![DynMap::sigma_pow(1), DynMap::sigma_pow(2)]).unwrap();
        let batch = finite_prefix_points(5);
        let inverses = vec![
            vec![DynMap::identity(PointedSpace::Cantor); schedule.len()];
            2
        ];
        let instance = CriterionInstance::new(
            tuple,
            vec![batch; 3],
            inverses,
            schedule,
            default_eps(),
        )
        .unwrap();
        let report = verify_criterion(&instance).unwrap();
        assert_eq!(report.cond_inverse.verdict, ConditionVerdict::Fail);
        assert!(!report.pass);
        // The sabotaged inverse condition sits constant at the largest
        // test point norm instead of decaying.
        let worst = &report.cond_inverse.final_worst;
        assert!(*worst > rat_int(0));
        assert!(report.cond_inverse.decay.iter().all(|(_, d)| d == worst));
    }

    #[test]
    fn instance_validation_catches_shape_errors() {
        let tuple = MapTuple::new(vec![DynMap::sigma_pow(1)]).unwrap();
        let batch = finite_prefix_points(2);
        let schedule = vec![1, 2, 3];
        let gs = vec![vec![DynMap::w_pow(1); 3]];
        assert!(CriterionInstance::new(
            tuple.clone(),
            vec![batch.clone()],
            gs.clone(),
            schedule.clone(),
            default_eps()
        )
        .is_err());
        assert!(CriterionInstance::new(
            tuple.clone(),
            vec![batch.clone(); 2],
            gs.clone(),
            vec![3, 2, 1],
            default_eps()
        )
        .is_err());
        assert!(matches!(
            CriterionInstance::new(
                tuple.clone(),
                vec![batch.clone(); 2],
                gs.clone(),
                schedule.clone(),
                rat_int(0)
            ),
            Err(Error::BadThreshold)
        ));
        let wrong_space = vec![vec![DynMap::halve_pow(1); 3]];
        assert!(matches!(
            CriterionInstance::new(tuple, vec![batch; 2], wrong_space, schedule, default_eps()),
            Err(Error::WrongSpace)
        ));
    }

    #[test]
    fn finite_batches_are_canonical_and_deduplicated() {
        let batch = finite_prefix_points(5);
        assert_eq!(batch.len(), 32);
        assert!(batch.contains(&Point::Cantor(CantorPoint::zero())));
        let dy = dyadic_points(5);
        assert_eq!(dy.len(), 65);
    }
}
