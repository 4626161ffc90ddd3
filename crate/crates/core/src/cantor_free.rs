//! The ell_1 model of the Lipschitz-free space over the Cantor set.
//!
//! The complement of the Cantor set in [0,1] is a binary heap of open gaps
//! I_n = ]a_n, b_n[ with I_1 = ]1/3, 2/3[ and the two children of I_n
//! obtained by prepending a ternary digit. Sending the n-th unit vector e_n
//! to the molecule m_{b_n,a_n} extends to a linear onto isometry from ell_1,
//! and under this identification the backward shift on digits becomes an
//! explicit infinite matrix S with S e_n = 3 e_{floor(n/2)} for n >= 2 and
//! S e_1 = v*, a fixed vector with infinite support. This module keeps all
//! of that arithmetic exact: vectors are stored as a finite sparse part plus
//! a rational multiple of v*, so S, the lift W of the right inverse, norms,
//! truncated delta expansions and ball-membership witnesses all evaluate
//! without rounding.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::free_space::{molecule, FreeVector};
use crate::metric_spaces::{CantorPoint, Point, PointedSpace, Tail};
use crate::{fmt_rat, parse_rat, rat, rat_int, third_pow, Rat};

/// Heap level of a gap index: indices 1, 2..3, 4..7, ... sit at levels
/// 1, 2, 3, ... and the gap at level i has length 3^{-i}.
pub fn level(n: u64) -> u32 {
    assert!(n >= 1, "gap indices start at 1");
    64 - n.leading_zeros()
}

/// A connected component ]a_n, b_n[ of the complement of the Cantor set in
/// [0,1]. Both endpoints are Cantor points: b_n has a finite digit string
/// and a_n the same string with its last digit lowered and an all-twos tail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gap {
    n: u64,
    a: CantorPoint,
    b: CantorPoint,
}

impl Gap {
    pub fn index(&self) -> u64 {
        self.n
    }

    pub fn a(&self) -> &CantorPoint {
        &self.a
    }

    pub fn b(&self) -> &CantorPoint {
        &self.b
    }

    pub fn a_value(&self) -> Rat {
        self.a.value()
    }

    pub fn b_value(&self) -> Rat {
        self.b.value()
    }

    pub fn level(&self) -> u32 {
        level(self.n)
    }

    /// Gap length d_n = b_n - a_n = 3^{-level(n)}.
    pub fn d(&self) -> Rat {
        third_pow(self.level())
    }
}

/// The n-th gap under the heap enumeration: gap 1 is ]1/3, 2/3[ and the
/// children 2n, 2n+1 of gap n live in the left and right thirds, so the
/// endpoints of gap n are read off the binary digits of n below its leading
/// bit. This is the unique enumeration compatible with the digit shift:
/// dropping the leading ternary digit sends gap n onto gap floor(n/2).
pub fn gap(n: u64) -> Result<Gap> {
    if n == 0 {
        return Err(Error::BadIndex("gap indices start at 1".into()));
    }
    let mut a = CantorPoint::new(vec![0], Tail::AllTwo).expect("valid digits");
    let mut b = CantorPoint::new(vec![2], Tail::AllZero).expect("valid digits");
    for i in (0..level(n) - 1).rev() {
        let digit = if (n >> i) & 1 == 0 { 0u8 } else { 2u8 };
        a = a.prepend(&[digit]);
        b = b.prepend(&[digit]);
    }
    Ok(Gap { n, a, b })
}

/// Index of the gap the digit shift sends gap n onto, for n >= 2. The
/// identity sigma(a_n) = a_{floor(n/2)}, sigma(b_n) = b_{floor(n/2)} is
/// re-verified pointwise on the endpoints before returning.
pub fn shift_action_on_gaps(n: u64) -> Result<u64> {
    if n < 2 {
        return Err(Error::BadIndex(
            "the shift action on gap indices needs n >= 2".into(),
        ));
    }
    let child = gap(n)?;
    let parent = gap(n / 2)?;
    assert_eq!(child.a.shift_left(1), parent.a, "heap recurrence violated");
    assert_eq!(child.b.shift_left(1), parent.b, "heap recurrence violated");
    Ok(n / 2)
}

/// A vector in the ell_1 model: a finite sparse part sum c_n e_n plus a
/// rational multiple lambda of the fixed vector v* = -3 sum d_n e_n. The
/// sparse map never stores zero coefficients, so the pair (sparse, lambda)
/// is a canonical form. Since sum d_n = 1, the norm of v* is exactly 3 and
/// the full ell_1 norm stays a finite computation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct L1Vector {
    sparse: BTreeMap<u64, Rat>,
    star: Rat,
}

impl L1Vector {
    pub fn new(sparse: impl IntoIterator<Item = (u64, Rat)>, star: Rat) -> Result<Self> {
        let mut map: BTreeMap<u64, Rat> = BTreeMap::new();
        for (n, c) in sparse {
            if n == 0 {
                return Err(Error::BadIndex("coordinate indices start at 1".into()));
            }
            *map.entry(n).or_insert_with(Rat::zero) += c;
        }
        map.retain(|_, c| !c.is_zero());
        Ok(L1Vector { sparse: map, star })
    }

    pub fn zero() -> Self {
        L1Vector::default()
    }

    /// The unit vector e_n.
    pub fn e(n: u64) -> Result<Self> {
        L1Vector::new([(n, rat_int(1))], Rat::zero())
    }

    /// The fixed vector v* itself (sparse part empty, multiplier 1).
    pub fn star_vector() -> Self {
        L1Vector { sparse: BTreeMap::new(), star: rat_int(1) }
    }

    pub fn is_zero(&self) -> bool {
        self.sparse.is_empty() && self.star.is_zero()
    }

    pub fn star(&self) -> &Rat {
        &self.star
    }

    pub fn sparse_iter(&self) -> impl Iterator<Item = (&u64, &Rat)> {
        self.sparse.iter()
    }

    pub fn support_len(&self) -> usize {
        self.sparse.len()
    }

    /// Largest heap level carrying a sparse coefficient (0 for an empty
    /// sparse part).
    pub fn max_level(&self) -> u32 {
        self.sparse.keys().next_back().map_or(0, |&n| level(n))
    }

    /// The full coefficient of e_n, star contribution included: the
    /// coordinate of v* at n is -3 d_n.
    pub fn coeff(&self, n: u64) -> Rat {
        let sparse = self.sparse.get(&n).cloned().unwrap_or_else(Rat::zero);
        if self.star.is_zero() {
            sparse
        } else {
            sparse - &self.star * rat_int(3) * third_pow(level(n))
        }
    }

    pub fn add(&self, other: &L1Vector) -> L1Vector {
        let mut sparse = self.sparse.clone();
        for (n, c) in &other.sparse {
            let entry = sparse.entry(*n).or_insert_with(Rat::zero);
            *entry += c;
            if entry.is_zero() {
                sparse.remove(n);
            }
        }
        L1Vector { sparse, star: &self.star + &other.star }
    }

    pub fn sub(&self, other: &L1Vector) -> L1Vector {
        self.add(&other.scale(&rat_int(-1)))
    }

    pub fn scale(&self, c: &Rat) -> L1Vector {
        if c.is_zero() {
            return L1Vector::zero();
        }
        L1Vector {
            sparse: self.sparse.iter().map(|(n, a)| (*n, a * c)).collect(),
            star: &self.star * c,
        }
    }

    /// Exact ell_1 norm. On the sparse support the coefficient is
    /// c_n - 3 lambda d_n; off it the vector agrees with lambda v*, and that
    /// remainder has norm |lambda| (3 - sum_{supp} 3 d_n) by the geometric
    /// identity sum d_n = 1.
    pub fn norm1(&self) -> Rat {
        let mut total = Rat::zero();
        let mut covered = Rat::zero();
        for (&n, c) in &self.sparse {
            let weight = rat_int(3) * third_pow(level(n));
            total += (c - &self.star * &weight).abs();
            covered += weight;
        }
        if !self.star.is_zero() {
            total += self.star.abs() * (rat_int(3) - covered);
        }
        total
    }
}

impl fmt::Display for L1Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut parts: Vec<String> = self
            .sparse
            .iter()
            .map(|(n, c)| format!("e{}:{}", n, fmt_rat(c)))
            .collect();
        if !self.star.is_zero() {
            parts.push(format!("star:{}", fmt_rat(&self.star)));
        }
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for L1Vector {
    type Err = Error;

    /// Parses the Display form: comma-separated `e<n>:<fraction>` terms with
    /// an optional `star:<fraction>`, or the literal `0`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "0" {
            return Ok(L1Vector::zero());
        }
        let mut sparse = Vec::new();
        let mut star = Rat::zero();
        for part in s.split(',') {
            let part = part.trim();
            let (key, val) = part
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("bad vector term `{part}`")))?;
            let c = parse_rat(val.trim())?;
            let key = key.trim();
            if key == "star" {
                star += c;
            } else {
                let idx = key
                    .strip_prefix('e')
                    .unwrap_or(key)
                    .parse::<u64>()
                    .map_err(|_| Error::Parse(format!("bad coordinate index `{key}`")))?;
                sparse.push((idx, c));
            }
        }
        L1Vector::new(sparse, star)
    }
}

/// The image of a vector under the conjugated shift S: sparse e_n with
/// n >= 2 maps to 3 e_{floor(n/2)}, the e_1 coefficient moves into the
/// fixed-vector multiplier (S e_1 = v*), and the multiplier itself is
/// preserved (S v* = v*).
pub fn s_sigma_apply(v: &L1Vector) -> L1Vector {
    let mut sparse: BTreeMap<u64, Rat> = BTreeMap::new();
    let mut star = v.star.clone();
    for (&n, c) in &v.sparse {
        if n == 1 {
            star += c;
        } else {
            let entry = sparse.entry(n / 2).or_insert_with(Rat::zero);
            *entry += c * rat_int(3);
        }
    }
    sparse.retain(|_, c| !c.is_zero());
    L1Vector { sparse, star }
}

/// k-fold application of S.
pub fn s_sigma_pow(v: &L1Vector, k: u64) -> L1Vector {
    let mut out = v.clone();
    for _ in 0..k {
        out = s_sigma_apply(&out);
    }
    out
}

fn w_pow_index(n: u64, k: u64) -> Result<u64> {
    if k >= 63 {
        return Err(Error::HorizonExceeded(k));
    }
    let shifted = (n as u128) << k;
    u64::try_from(shifted)
        .ok()
        .filter(|&m| m < (1u64 << 63))
        .ok_or(Error::HorizonExceeded(k))
}

/// The k-fold lift of the right inverse w (digit prepending): e_n maps to
/// 3^{-k} e_{n 2^k}, descending k steps into left children of the gap heap.
/// The fixed-vector component has no finite closed form under W, so a
/// nonzero multiplier is rejected.
pub fn w_lift_pow(v: &L1Vector, k: u64) -> Result<L1Vector> {
    if !v.star.is_zero() {
        return Err(Error::Unsupported(
            "the lift of w is only available on finitely supported vectors".into(),
        ));
    }
    if k == 0 || v.sparse.is_empty() {
        return Ok(v.clone());
    }
    if k >= 63 {
        return Err(Error::HorizonExceeded(k));
    }
    let factor = third_pow(k as u32);
    let mut sparse = BTreeMap::new();
    for (&n, c) in &v.sparse {
        sparse.insert(w_pow_index(n, k)?, c * &factor);
    }
    Ok(L1Vector { sparse, star: Rat::zero() })
}

/// Single application of the lift of w.
pub fn w_lift_apply(v: &L1Vector) -> Result<L1Vector> {
    w_lift_pow(v, 1)
}

/// The molecule m_{b_n,a_n} the transfer assigns to the basis vector e_n.
pub fn phi_basis(n: u64) -> Result<FreeVector> {
    let g = gap(n)?;
    molecule(
        &PointedSpace::Cantor,
        &Point::Cantor(g.b),
        &Point::Cantor(g.a),
    )
}

/// The isometry applied to a finitely supported vector: sum c_n m_{b_n,a_n}
/// as a free vector over the Cantor space. A nonzero fixed-vector multiplier
/// has infinite support and is rejected; truncate it first.
pub fn phi_sparse(v: &L1Vector) -> Result<FreeVector> {
    if !v.star.is_zero() {
        return Err(Error::Unsupported(
            "the isometry is only evaluated on finitely supported vectors".into(),
        ));
    }
    let mut terms = Vec::with_capacity(2 * v.sparse.len());
    for (&n, c) in &v.sparse {
        let g = gap(n)?;
        let scale = c / g.d();
        terms.push((Point::Cantor(g.b.clone()), scale.clone()));
        terms.push((Point::Cantor(g.a.clone()), -scale));
    }
    FreeVector::new(PointedSpace::Cantor, terms)
}

/// The truncated coordinate expansion of the evaluation functional delta_t:
/// the sparse part carries d_n at every index n with level(n) <= l and
/// b_n <= t, and the returned bound is the exact ell_1 mass of the discarded
/// deeper levels (always at most (2/3)^l). Applying the isometry to the
/// sparse part approximates delta_t within the bound.
pub fn delta_expansion(t: &CantorPoint, l: u32) -> (L1Vector, Rat) {
    let mut sparse = BTreeMap::new();
    for i in 1..=l {
        for n in (1u64 << (i - 1))..(1u64 << i) {
            let g = gap(n).expect("positive index");
            if g.b <= *t {
                sparse.insert(n, g.d());
            }
        }
    }
    // Exact tail: at level i the qualifying gaps are the N_{i-1} whose
    // branch prefix is lexicographically below t's first i-1 digits, plus
    // one more when the i-th digit of t is 2, where N_{i-1} is the binary
    // rank of those digits. Summing N_{i-1} 3^{-i} over i > l column by
    // column gives a geometric series per digit of t.
    let digit2 = |j: u32| -> bool {
        let j = j as usize;
        if j <= t.prefix().len() {
            t.prefix()[j - 1] == 2
        } else {
            t.tail() == Tail::AllTwo
        }
    };
    let prefix_len = t.prefix().len() as u32;
    let j_star = l.max(prefix_len);
    let all_two = t.tail() == Tail::AllTwo;
    let mut tail = Rat::zero();
    // Contribution of the [t_i = 2] column for i > l.
    for i in l + 1..=j_star {
        if digit2(i) {
            tail += third_pow(i);
        }
    }
    if all_two {
        tail += third_pow(j_star) / rat_int(2);
    }
    // Contribution of the binary ranks: digit j of t feeds every level
    // i > max(l, j) with weight 2^{i-1-j} 3^{-i}, a geometric series summing
    // to 2^{-j} (2/3)^{max(l, j)}.
    let two_thirds = rat(2, 3);
    for j in 1..=j_star {
        if digit2(j) {
            let m = l.max(j);
            tail += crate::half_pow(j) * crate::pow_rat(&two_thirds, m);
        }
    }
    if all_two {
        tail += third_pow(j_star) / rat_int(2);
    }
    let vector = L1Vector { sparse, star: Rat::zero() };
    (vector, tail)
}

/// Column n of the matrix of S in the basis (e_n), truncated to the first
/// `rows` rows: column 1 lists the coordinates -3 d_i of v*, and column
/// n >= 2 has the single entry 3 in row floor(n/2).
pub fn m_sigma_column(n: u64, rows: u64) -> Result<Vec<Rat>> {
    if n == 0 {
        return Err(Error::BadIndex("column indices start at 1".into()));
    }
    let mut col = Vec::with_capacity(rows as usize);
    for row in 1..=rows {
        col.push(if n == 1 {
            -rat_int(3) * third_pow(level(row))
        } else if row == n / 2 {
            rat_int(3)
        } else {
            Rat::zero()
        });
    }
    Ok(col)
}

/// Exact comparison between the two routes around the conjugacy square.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConjugacyResidual {
    /// Free-norm distance between the isometry image of S v truncated at
    /// level l+1 and the linearized shift applied to the isometry image
    /// of v.
    pub distance: Rat,
    /// Exact ell_1 mass of the truncated part, |lambda| 2 (2/3)^l where
    /// lambda is the fixed-vector multiplier of S v. The untruncated sides
    /// agree, so distance never exceeds this bound.
    pub tail_bound: Rat,
}

/// Checks S = phi^{-1} T_sigma phi on a finitely supported vector, exactly
/// up to the stated truncation: the support must sit within levels <= l, and
/// the image S v is materialized on levels <= l+1 before comparing free
/// norms.
pub fn conjugacy_residual(v: &L1Vector, l: u32) -> Result<ConjugacyResidual> {
    if !v.star.is_zero() {
        return Err(Error::DomainError(
            "conjugacy check expects a finitely supported vector".into(),
        ));
    }
    if v.max_level() > l {
        return Err(Error::DomainError(format!(
            "support reaches level {} but the truncation level is {}",
            v.max_level(),
            l
        )));
    }
    let image = s_sigma_apply(v);
    // Materialize the image on levels <= l+1, folding the fixed-vector
    // multiplier into explicit coordinates.
    let mut truncated = Vec::new();
    if image.star.is_zero() {
        truncated.extend(image.sparse_iter().map(|(n, c)| (*n, c.clone())));
    } else {
        for n in 1..(1u64 << (l + 1)) {
            let c = image.coeff(n);
            if !c.is_zero() {
                truncated.push((n, c));
            }
        }
    }
    let lhs = phi_sparse(&L1Vector::new(truncated, Rat::zero())?)?;
    let sigma = crate::maps::DynMap::sigma_pow(1);
    let rhs = crate::free_space::linearize_apply(&sigma, &phi_sparse(v)?)?;
    let distance = crate::free_space::free_norm(&lhs.sub(&rhs)?).value;
    let tail_bound =
        image.star.abs() * rat_int(2) * crate::pow_rat(&rat(2, 3), l);
    Ok(ConjugacyResidual { distance, tail_bound })
}

/// A target ball in the ell_1 model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BallTarget {
    pub center: L1Vector,
    pub radius: Rat,
}

/// Outcome of a witness construction. `NoWitness` is one-sided: it reports
/// that this construction failed its exact ball checks, not that the return
/// time is absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WitnessOutcome {
    Witness(L1Vector),
    NoWitness,
}

impl WitnessOutcome {
    pub fn is_witness(&self) -> bool {
        matches!(self, WitnessOutcome::Witness(_))
    }
}

/// Asymptotic fixed-vector multiplier of repeated shifts: S^k x converges
/// to (sum c_n 3^{level(n)-1}) v* once k reaches the deepest support level,
/// because S^{level(n)} e_n = 3^{level(n)-1} v* exactly.
fn death_multiplier(v: &L1Vector) -> Rat {
    let mut acc = Rat::zero();
    for (&n, c) in &v.sparse {
        acc += c * rat(3, 1).pow(level(n) as i32 - 1);
    }
    acc
}

/// Smallest index at the given level outside the occupied support.
fn fresh_index(lvl: u32, occupied: &BTreeMap<u64, Rat>) -> Option<u64> {
    if lvl == 0 || lvl > 62 {
        return None;
    }
    ((1u64 << (lvl - 1))..(1u64 << lvl)).find(|n| !occupied.contains_key(n))
}

/// Payload for one block of the witness: the block's own center plus a
/// small corrector at the deepest level the block may occupy, chosen so the
/// whole payload is annihilated exactly (not just attenuated) once the next
/// shift power passes over it.
fn corrected_payload(center: &L1Vector, window: u64) -> L1Vector {
    let death = death_multiplier(center);
    if death.is_zero() {
        return center.clone();
    }
    let lvl = u32::try_from(window).unwrap_or(0);
    match fresh_index(lvl, &center.sparse) {
        Some(idx) => {
            let gamma = -death * rat(3, 1).pow(1 - lvl as i32);
            center.add(
                &L1Vector::new([(idx, gamma)], Rat::zero()).expect("index is positive"),
            )
        }
        None => center.clone(),
    }
}

/// Attempts to certify that m is a simultaneous return time for the tuple
/// of shift powers S^{m_1}, ..., S^{m_N} from the ball around `u0_center`
/// into the target balls: it builds the candidate
/// z = u0 + sum_i W^{m_i m}(target_i + corrector_i), then verifies every
/// ball constraint by recomputing each S^{m_i m} z from scratch with exact
/// arithmetic. The correctors cancel the fixed-vector debris that repeated
/// shifts would otherwise leave behind; without them even the diagonal
/// constraints fail, since S^k does not attenuate anything.
pub fn operator_return_witness(
    powers: &[u64],
    u0_center: &L1Vector,
    u0_radius: &Rat,
    targets: &[BallTarget],
    m: u64,
) -> Result<WitnessOutcome> {
    if powers.len() != targets.len() {
        return Err(Error::DomainError(
            "one target ball per shift power is required".into(),
        ));
    }
    if !powers.windows(2).all(|w| w[0] < w[1]) || powers.first() == Some(&0) {
        return Err(Error::NotDistinct);
    }
    if !u0_radius.is_positive() || targets.iter().any(|t| !t.radius.is_positive()) {
        return Err(Error::BadRadius);
    }
    if !u0_center.star().is_zero() || targets.iter().any(|t| !t.center.star().is_zero()) {
        return Err(Error::Unsupported(
            "ball centers must be finitely supported".into(),
        ));
    }

    let big: Vec<u64> = powers
        .iter()
        .map(|p| p.checked_mul(m).ok_or(Error::HorizonExceeded(m)))
        .collect::<Result<_>>()?;

    // Assemble the candidate. Block i occupies heap levels in the window
    // between consecutive shift exponents, and every block except the last
    // gets a corrector at the bottom of its window.
    let mut z = match big.first() {
        Some(&first) => corrected_payload(u0_center, first),
        None => u0_center.clone(),
    };
    for (i, target) in targets.iter().enumerate() {
        let payload = match big.get(i + 1) {
            Some(next) => corrected_payload(&target.center, next - big[i]),
            None => target.center.clone(),
        };
        z = z.add(&w_lift_pow(&payload, big[i])?);
    }

    // Exact verification of every ball constraint, recomputing each shifted
    // image independently from the assembled candidate.
    if z.sub(u0_center).norm1() >= *u0_radius {
        return Ok(WitnessOutcome::NoWitness);
    }
    for (i, target) in targets.iter().enumerate() {
        let image = s_sigma_pow(&z, big[i]);
        if image.sub(&target.center).norm1() >= target.radius {
            return Ok(WitnessOutcome::NoWitness);
        }
    }
    Ok(WitnessOutcome::Witness(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free_space::{delta, free_norm};

    fn cpt(s: &str) -> CantorPoint {
        s.parse().unwrap()
    }

    #[test]
    fn gap_examples() {
        let g1 = gap(1).unwrap();
        assert_eq!((g1.a_value(), g1.b_value(), g1.d()), (rat(1, 3), rat(2, 3), rat(1, 3)));
        let g2 = gap(2).unwrap();
        assert_eq!((g2.a_value(), g2.b_value()), (rat(1, 9), rat(2, 9)));
        let g3 = gap(3).unwrap();
        assert_eq!((g3.a_value(), g3.b_value(), g3.d()), (rat(7, 9), rat(8, 9), rat(1, 9)));
        let g4 = gap(4).unwrap();
        assert_eq!((g4.a_value(), g4.b_value(), g4.d()), (rat(1, 27), rat(2, 27), rat(1, 27)));
        let g5 = gap(5).unwrap();
        assert_eq!((g5.a_value(), g5.b_value()), (rat(19, 27), rat(20, 27)));
        assert_eq!(g5.b(), &cpt("202"));
        assert_eq!(g5.a(), &cpt("200~2"));
        assert!(gap(0).is_err());
    }

    #[test]
    fn gap_recurrence_in_rational_form() {
        let third = rat(1, 3);
        let offset = rat(2, 3);
        for n in 1..=32u64 {
            let parent = gap(n).unwrap();
            let left = gap(2 * n).unwrap();
            let right = gap(2 * n + 1).unwrap();
            assert_eq!(left.a_value(), parent.a_value() * &third);
            assert_eq!(left.b_value(), parent.b_value() * &third);
            assert_eq!(right.a_value(), parent.a_value() * &third + &offset);
            assert_eq!(right.b_value(), parent.b_value() * &third + &offset);
        }
    }

    #[test]
    fn length_law_and_level_counts() {
        for i in 1..=6u32 {
            let count = (1..1u64 << 6).filter(|&n| level(n) == i).count() as u64;
            assert_eq!(count, 1 << (i - 1));
        }
        for n in 1..=64u64 {
            assert_eq!(gap(n).unwrap().d(), third_pow(level(n)));
        }
    }

    #[test]
    fn shift_consistency_on_endpoints() {
        for n in 2..=256u64 {
            let child = gap(n).unwrap();
            let parent = gap(n / 2).unwrap();
            assert_eq!(child.b().shift_left(1), *parent.b());
            assert_eq!(child.a().shift_left(1), *parent.a());
        }
        // The first gap's endpoints shift to the two Cantor extremes.
        let g1 = gap(1).unwrap();
        assert_eq!(g1.b().shift_left(1).value(), rat(0, 1));
        assert_eq!(g1.a().shift_left(1).value(), rat(1, 1));
    }

    #[test]
    fn shift_action_examples() {
        assert_eq!(shift_action_on_gaps(2).unwrap(), 1);
        assert_eq!(shift_action_on_gaps(3).unwrap(), 1);
        assert_eq!(shift_action_on_gaps(7).unwrap(), 3);
        assert!(shift_action_on_gaps(1).is_err());
        assert!(shift_action_on_gaps(0).is_err());
    }

    #[test]
    fn expansion_examples() {
        let (v, tail) = delta_expansion(&CantorPoint::zero(), 5);
        assert!(v.is_zero());
        assert!(tail.is_zero());

        let (v, tail) = delta_expansion(&CantorPoint::one(), 2);
        let expected = L1Vector::new(
            [(1, rat(1, 3)), (2, rat(1, 9)), (3, rat(1, 9))],
            Rat::zero(),
        )
        .unwrap();
        assert_eq!(v, expected);
        assert_eq!(tail, rat(4, 9));
        for l in 0..6 {
            let (_, tail) = delta_expansion(&CantorPoint::one(), l);
            assert_eq!(tail, crate::pow_rat(&rat(2, 3), l));
        }
    }

    #[test]
    fn expansion_mass_recovers_the_distance_to_zero() {
        for s in ["02", "2", "0~2", "202", "20~2", "~2", "00202"] {
            let t = cpt(s);
            for l in [0u32, 1, 3, 6] {
                let (v, tail) = delta_expansion(&t, l);
                assert_eq!(v.norm1() + &tail, t.value(), "t = {s}, l = {l}");
            }
        }
    }

    #[test]
    fn expansion_sparse_part_matches_direct_enumeration() {
        for s in ["0~2", "202", "20~2", "0202"] {
            let t = cpt(s);
            let (v, _) = delta_expansion(&t, 6);
            for n in 1..(1u64 << 6) {
                let g = gap(n).unwrap();
                let expected = if *g.b() <= t { g.d() } else { Rat::zero() };
                assert_eq!(v.coeff(n), expected, "t = {s}, n = {n}");
            }
        }
    }

    #[test]
    fn phi_examples() {
        let m1 = phi_basis(1).unwrap();
        assert_eq!(m1.coeff(&Point::Cantor(cpt("2"))), rat(3, 1));
        assert_eq!(m1.coeff(&Point::Cantor(cpt("0~2"))), rat(-3, 1));
        for n in 1..=16u64 {
            assert_eq!(free_norm(&phi_basis(n).unwrap()).value, rat(1, 1));
        }
    }

    #[test]
    fn phi_approximates_evaluation_functionals() {
        let t = cpt("202");
        let (v, tail) = delta_expansion(&t, 6);
        let space = PointedSpace::Cantor;
        let target = delta(&space, &Point::Cantor(t)).unwrap();
        let err = free_norm(&phi_sparse(&v).unwrap().sub(&target).unwrap()).value;
        assert!(err <= tail);
        assert!(phi_sparse(&L1Vector::star_vector()).is_err());
    }

    #[test]
    fn shift_arithmetic_examples() {
        let e5 = L1Vector::e(5).unwrap();
        assert_eq!(s_sigma_apply(&e5), L1Vector::e(2).unwrap().scale(&rat(3, 1)));

        let e1 = L1Vector::e(1).unwrap();
        assert_eq!(s_sigma_apply(&e1), L1Vector::star_vector());

        let vstar = L1Vector::star_vector();
        assert_eq!(s_sigma_apply(&vstar), vstar);
        assert_eq!(vstar.norm1(), rat(3, 1));
    }

    #[test]
    fn norm_handles_overlap_of_sparse_and_fixed_parts() {
        // 2 e_1 - v* has coordinate 2 + 1 = 3 at index 1 and mass 2 beyond.
        let v = L1Vector::e(1)
            .unwrap()
            .scale(&rat(2, 1))
            .sub(&L1Vector::star_vector());
        assert_eq!(v.coeff(1), rat(3, 1));
        assert_eq!(v.norm1(), rat(5, 1));
        // Cancellation at a single coordinate: 3 d_2 e_2 + v* vanishes there.
        let w = L1Vector::e(2)
            .unwrap()
            .scale(&rat(1, 3))
            .add(&L1Vector::star_vector());
        assert_eq!(w.coeff(2), rat(0, 1));
        assert_eq!(w.norm1(), rat(8, 3));
    }

    #[test]
    fn matrix_columns_match_the_operator() {
        assert_eq!(
            m_sigma_column(1, 3).unwrap(),
            vec![rat(-1, 1), rat(-1, 3), rat(-1, 3)]
        );
        assert_eq!(m_sigma_column(2, 3).unwrap(), vec![rat(3, 1), rat(0, 1), rat(0, 1)]);
        let col7 = m_sigma_column(7, 4).unwrap();
        assert_eq!(col7[2], rat(3, 1));
        assert_eq!(col7.iter().filter(|c| !c.is_zero()).count(), 1);

        for n in 1..=16u64 {
            let col = m_sigma_column(n, 16).unwrap();
            let image = s_sigma_apply(&L1Vector::e(n).unwrap());
            for row in 1..=16u64 {
                assert_eq!(col[row as usize - 1], image.coeff(row), "n = {n}, row = {row}");
            }
        }
    }

    #[test]
    fn conjugacy_square_commutes() {
        let zero = conjugacy_residual(&L1Vector::zero(), 3).unwrap();
        assert!(zero.distance.is_zero() && zero.tail_bound.is_zero());

        let e5 = conjugacy_residual(&L1Vector::e(5).unwrap(), 3).unwrap();
        assert!(e5.distance.is_zero() && e5.tail_bound.is_zero());

        // S e_1 = v*: the residual is exactly the truncated fixed-vector
        // tail, and stays under the documented 3 (2/3)^l envelope.
        let l = 4u32;
        let e1 = conjugacy_residual(&L1Vector::e(1).unwrap(), l).unwrap();
        let tail = rat_int(2) * crate::pow_rat(&rat(2, 3), l);
        assert_eq!(e1.distance, tail);
        assert_eq!(e1.tail_bound, tail);
        assert!(e1.distance <= rat_int(3) * crate::pow_rat(&rat(2, 3), l));

        assert!(conjugacy_residual(&L1Vector::e(20).unwrap(), 3).is_err());
        assert!(conjugacy_residual(&L1Vector::star_vector(), 3).is_err());
    }

    #[test]
    fn w_lift_examples() {
        let e3 = L1Vector::e(3).unwrap();
        assert_eq!(
            w_lift_apply(&e3).unwrap(),
            L1Vector::e(6).unwrap().scale(&rat(1, 3))
        );
        // S undoes W.
        for n in [1u64, 3, 7, 12] {
            let v = L1Vector::e(n).unwrap();
            assert_eq!(s_sigma_pow(&w_lift_pow(&v, 5).unwrap(), 5), v);
        }
        assert!(w_lift_apply(&L1Vector::star_vector()).is_err());
        assert!(w_lift_pow(&e3, 80).is_err());
    }

    fn half_e2() -> L1Vector {
        L1Vector::e(2).unwrap().scale(&rat(1, 2))
    }

    #[test]
    fn witness_found_for_shift_power_pair() {
        let target = BallTarget { center: half_e2(), radius: rat(1, 4) };
        let outcome = operator_return_witness(
            &[1, 2],
            &half_e2(),
            &rat(1, 4),
            &[target.clone(), target.clone()],
            12,
        )
        .unwrap();
        let z = match outcome {
            WitnessOutcome::Witness(z) => z,
            WitnessOutcome::NoWitness => panic!("expected a witness"),
        };
        // Re-verify the ball constraints directly.
        assert!(z.sub(&half_e2()).norm1() < rat(1, 4));
        for exp in [12u64, 24] {
            assert!(s_sigma_pow(&z, exp).sub(&half_e2()).norm1() < rat(1, 4));
        }
    }

    #[test]
    fn no_witness_at_time_zero_for_separated_balls() {
        let target = BallTarget {
            center: L1Vector::e(3).unwrap().scale(&rat(1, 2)),
            radius: rat(1, 100),
        };
        let outcome =
            operator_return_witness(&[1], &half_e2(), &rat(1, 100), &[target], 0).unwrap();
        assert_eq!(outcome, WitnessOutcome::NoWitness);
    }

    #[test]
    fn witness_sweep_is_cofinite_for_a_single_power() {
        let target = BallTarget { center: half_e2(), radius: rat(1, 4) };
        for m in 4..=30u64 {
            let outcome =
                operator_return_witness(&[1], &half_e2(), &rat(1, 4), &[target.clone()], m)
                    .unwrap();
            assert!(outcome.is_witness(), "m = {m}");
        }
    }

    #[test]
    fn witness_input_validation() {
        let target = BallTarget { center: half_e2(), radius: rat(-1, 4) };
        assert!(matches!(
            operator_return_witness(&[1], &half_e2(), &rat(1, 4), &[target], 3),
            Err(Error::BadRadius)
        ));
        let ok = BallTarget { center: half_e2(), radius: rat(1, 4) };
        assert!(matches!(
            operator_return_witness(&[2, 1], &half_e2(), &rat(1, 4), &[ok.clone(), ok.clone()], 3),
            Err(Error::NotDistinct)
        ));
        assert!(matches!(
            operator_return_witness(&[1], &half_e2(), &rat(1, 4), &[], 3),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn vector_literals_round_trip() {
        for s in ["0", "e2:1/2", "e1:3,e5:-2/7,star:1/3", "star:-1"] {
            let v: L1Vector = s.parse().unwrap();
            assert_eq!(v.to_string().parse::<L1Vector>().unwrap(), v);
        }
        assert_eq!("e2:1/2".parse::<L1Vector>().unwrap(), half_e2());
        assert!("e0:1".parse::<L1Vector>().is_err());
        assert!("2:1/2".parse::<L1Vector>().unwrap() == half_e2());
    }
}
