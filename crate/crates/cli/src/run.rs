//! Experiment registry: builds library calls from a validated config and
//! renders the outcome as verdict + tables.

use free_dyn::cantor_free::{
    conjugacy_residual, gap, m_sigma_column, operator_return_witness, s_sigma_pow, BallTarget,
    L1Vector, WitnessOutcome,
};
use free_dyn::criterion::{
    default_eps, shift_powers_instance, tent_powers_instance, verify_criterion, ConditionOutcome,
};
use free_dyn::error::{Error, Result};
use free_dyn::free_space::{free_norm, FreeVector, LpStatus};
use free_dyn::maps::{parse_map, MapTuple};
use free_dyn::metric_spaces::{CantorPoint, FiniteSpace, IntervalPoint, Point, PointedSpace};
use free_dyn::return_sets::{
    cofinite_up_to, commutator_filter_witness, disjoint_return_set, filter_inclusion_check,
    nonempty_implies_infinite_check, weakly_mixing_order_r, OpenSet,
};
use free_dyn::{fmt_rat, parse_rat, rat, Rat};

use crate::config::{ExperimentConfig, RunReport, Table};

pub fn dispatch(cfg: &ExperimentConfig) -> Result<RunReport> {
    match cfg.experiment.as_str() {
        "gaps" => run_gaps(cfg),
        "matrix" => run_matrix(cfg),
        "return-sets" => run_return_sets(cfg),
        "weak-mixing" => run_weak_mixing(cfg),
        "filter-witness" => run_filter_witness(cfg),
        "free-norm" => run_free_norm(cfg),
        "conjugacy" => run_conjugacy(cfg),
        "witness" => run_witness(cfg),
        "criterion" => run_criterion(cfg),
        other => Err(Error::Parse(format!("unknown experiment `{other}`"))),
    }
}

fn require<T: Clone>(field: &Option<T>, name: &str) -> Result<T> {
    field
        .clone()
        .ok_or_else(|| Error::Parse(format!("missing required field `{name}`")))
}

/// Parses map literals into a tuple on a common space. A first pass infers
/// the space from any non-identity literal so that plain "id" works too.
fn parse_tuple(lits: &[String]) -> Result<MapTuple> {
    if lits.is_empty() {
        return Err(Error::Parse("at least one map literal is required".into()));
    }
    let mut space = None;
    for lit in lits {
        if let Ok(m) = parse_map(lit, None) {
            space = Some(m.space().clone());
            break;
        }
    }
    let maps = lits
        .iter()
        .map(|lit| parse_map(lit, space.as_ref()).or_else(|_| parse_map(lit, None)))
        .collect::<Result<Vec<_>>>()?;
    MapTuple::new(maps)
}

fn parse_sets(lits: &[String]) -> Result<Vec<OpenSet>> {
    lits.iter().map(|s| s.parse()).collect()
}

fn parse_range(s: &str) -> Result<(u64, u64)> {
    let (lo, hi) = s
        .split_once("..")
        .ok_or_else(|| Error::Parse(format!("expected a range `lo..hi`, got `{s}`")))?;
    let lo: u64 = lo.trim().parse().map_err(|_| Error::Parse(format!("bad range start `{lo}`")))?;
    let hi: u64 = hi.trim().parse().map_err(|_| Error::Parse(format!("bad range end `{hi}`")))?;
    if lo > hi {
        return Err(Error::Parse(format!("empty range `{s}`")));
    }
    Ok((lo, hi))
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>, sep: &str) -> String {
    items
        .into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(sep)
}

fn run_gaps(cfg: &ExperimentConfig) -> Result<RunReport> {
    let upto = cfg.upto.unwrap_or(8);
    let mut table = Table::new(vec![
        "n",
        "level",
        "left_digits",
        "right_digits",
        "left",
        "right",
        "length",
    ]);
    for n in 1..=upto {
        let g = gap(n)?;
        table.push(vec![
            n.to_string(),
            g.level().to_string(),
            g.a().to_string(),
            g.b().to_string(),
            fmt_rat(&g.a_value()),
            fmt_rat(&g.b_value()),
            fmt_rat(&g.d()),
        ]);
    }
    Ok(RunReport::new(cfg, "OK").with_table("main", table))
}

fn run_matrix(cfg: &ExperimentConfig) -> Result<RunReport> {
    let rows = cfg.rows.unwrap_or(16);
    let cols = cfg.cols.unwrap_or(16);
    if rows == 0 || cols == 0 {
        return Err(Error::Parse("rows and cols must be at least 1".into()));
    }
    let columns: Vec<Vec<Rat>> = (1..=cols)
        .map(|n| m_sigma_column(n, rows))
        .collect::<Result<_>>()?;
    let mut header = vec!["row".to_string()];
    header.extend((1..=cols).map(|n| format!("e{n}")));
    let mut table = Table::new(header);
    for r in 0..rows as usize {
        let mut row = vec![(r + 1).to_string()];
        row.extend(columns.iter().map(|col| fmt_rat(&col[r])));
        table.push(row);
    }
    Ok(RunReport::new(cfg, "OK").with_table("main", table))
}

fn run_return_sets(cfg: &ExperimentConfig) -> Result<RunReport> {
    let tuple = parse_tuple(&require(&cfg.maps, "maps")?)?;
    let u0: OpenSet = require(&cfg.u0, "u0")?.parse()?;
    let u = parse_sets(&require(&cfg.u, "u")?)?;
    let horizon = cfg.horizon.unwrap_or(40);
    let min_count = cfg.min_count.unwrap_or(3);
    let sample = disjoint_return_set(&tuple, &u0, &u, horizon)?;
    let verdict = nonempty_implies_infinite_check(&sample, min_count);

    let m_min = sample
        .members()
        .iter()
        .next()
        .map_or("none".to_string(), |m| m.to_string());
    let density = rat(sample.members().len() as i64, horizon as i64 + 1);
    let cofinite_from = if sample.members().contains(&horizon) {
        let mut t = horizon;
        while t > 0 && sample.members().contains(&(t - 1)) {
            t -= 1;
        }
        debug_assert!(cofinite_up_to(&sample, t).unwrap_or(false));
        t.to_string()
    } else {
        "none".to_string()
    };

    let mut main = Table::new(vec![
        "tuple",
        "u0",
        "u",
        "m_min",
        "density",
        "cofinite_from",
        "verdict",
    ]);
    main.push(vec![
        tuple.to_string(),
        u0.to_string(),
        join(&u, ";"),
        m_min,
        fmt_rat(&density),
        cofinite_from,
        verdict.to_string(),
    ]);
    let mut members = Table::new(vec!["m"]);
    for m in sample.members() {
        members.push(vec![m.to_string()]);
    }
    Ok(RunReport::new(cfg, verdict.to_string())
        .with_table("main", main)
        .with_table("members", members))
}

fn run_weak_mixing(cfg: &ExperimentConfig) -> Result<RunReport> {
    let tuple = parse_tuple(&require(&cfg.maps, "maps")?)?;
    let family = parse_sets(&require(&cfg.family, "family")?)?;
    let r = cfg.r.unwrap_or(2);
    let horizon = cfg.horizon.unwrap_or(40);
    let report = weakly_mixing_order_r(&tuple, r, &family, horizon)?;
    let verdict = if report.pass { "PASS" } else { "FAIL" };

    let mut main = Table::new(vec![
        "tuple", "r", "horizon", "choices", "checked", "failures", "verdict",
    ]);
    main.push(vec![
        tuple.to_string(),
        report.r.to_string(),
        report.horizon.to_string(),
        report.choices.to_string(),
        report.checked.to_string(),
        report.failures.len().to_string(),
        verdict.to_string(),
    ]);
    let mut failures = Table::new(vec!["choice_indices"]);
    for combo in &report.failures {
        failures.push(vec![join(combo, "|")]);
    }
    Ok(RunReport::new(cfg, verdict)
        .with_table("main", main)
        .with_table("failures", failures)
        .with_note("choices enumerate (u0, u1..uN) assignments from the family in odometer order"))
}

fn run_filter_witness(cfg: &ExperimentConfig) -> Result<RunReport> {
    let tuple = parse_tuple(&require(&cfg.maps, "maps")?)?;
    let g = parse_map(&require(&cfg.g, "g")?, Some(tuple.space()))?;
    let u = parse_sets(&require(&cfg.u, "u")?)?;
    let v = parse_sets(&require(&cfg.v, "v")?)?;
    let search_horizon = cfg.search_horizon.unwrap_or(40);
    let horizon = cfg.horizon.unwrap_or(40);

    let mut main = Table::new(vec!["g", "m", "witness_sets", "inclusion", "verdict"]);
    match commutator_filter_witness(&tuple, &g, &u, &v, search_horizon) {
        Ok((m, w)) => {
            let inclusion = filter_inclusion_check(&tuple, &u, &v, &w, horizon)?;
            let verdict = if inclusion.pass { "PASS" } else { "FAIL" };
            main.push(vec![
                g.to_string(),
                m.to_string(),
                join(&w, ";"),
                inclusion.pass.to_string(),
                verdict.to_string(),
            ]);
            let mut members = Table::new(vec!["system", "members"]);
            members.push(vec!["w".to_string(), join(&inclusion.w_members, "|")]);
            members.push(vec![
                "u_and_v".to_string(),
                join(&inclusion.uv_intersection, "|"),
            ]);
            Ok(RunReport::new(cfg, verdict)
                .with_table("main", main)
                .with_table("members", members))
        }
        Err(Error::HorizonExceeded(h)) => {
            main.push(vec![
                g.to_string(),
                "none".to_string(),
                String::new(),
                String::new(),
                "INCONCLUSIVE".to_string(),
            ]);
            Ok(RunReport::new(cfg, "INCONCLUSIVE")
                .with_table("main", main)
                .with_note(format!("no simultaneous transfer time found within search horizon {h}")))
        }
        Err(e) => Err(e),
    }
}

fn parse_point(space: &PointedSpace, labels: Option<&[String]>, lit: &str) -> Result<Point> {
    match space {
        PointedSpace::Cantor => Ok(Point::Cantor(lit.parse::<CantorPoint>()?)),
        PointedSpace::Interval => Ok(Point::Interval(IntervalPoint::new(parse_rat(lit)?)?)),
        PointedSpace::Finite(_) => {
            let labels = labels.expect("finite space built from labels");
            let idx = labels
                .iter()
                .position(|l| l == lit)
                .ok_or_else(|| Error::Parse(format!("unknown point label `{lit}`")))?;
            Ok(Point::Finite(idx))
        }
    }
}

fn run_free_norm(cfg: &ExperimentConfig) -> Result<RunReport> {
    let space_name = require(&cfg.space, "space")?;
    let labels = cfg.labels.clone();
    let space = match space_name.as_str() {
        "cantor" => PointedSpace::Cantor,
        "interval" => PointedSpace::Interval,
        "finite" => {
            let labels = require(&cfg.labels, "labels")?;
            let dist_lits = require(&cfg.dist, "dist")?;
            let base_label = require(&cfg.basepoint, "basepoint")?;
            let dist = dist_lits
                .iter()
                .map(|row| row.iter().map(|s| parse_rat(s)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            let base = labels
                .iter()
                .position(|l| *l == base_label)
                .ok_or_else(|| Error::Parse(format!("basepoint `{base_label}` is not a label")))?;
            PointedSpace::Finite(FiniteSpace::new(labels, dist, base)?)
        }
        other => return Err(Error::Parse(format!("unknown space `{other}`"))),
    };
    let terms_lit = require(&cfg.terms, "terms")?;
    let mut terms = Vec::new();
    for pair in terms_lit.split(',') {
        let (pt, coeff) = pair
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected `point:coeff`, got `{pair}`")))?;
        terms.push((
            parse_point(&space, labels.as_deref(), pt.trim())?,
            parse_rat(coeff)?,
        ));
    }
    let vector = FreeVector::new(space, terms)?;
    let cert = free_norm(&vector);
    let status = match cert.lp_status {
        LpStatus::Optimal => "OPTIMAL",
        LpStatus::InfeasibleImpossible => "INFEASIBLE_IMPOSSIBLE",
    };

    let mut main = Table::new(vec!["space", "vector", "norm", "lp_status"]);
    main.push(vec![
        space_name,
        vector.to_string(),
        fmt_rat(&cert.value),
        status.to_string(),
    ]);
    let mut witness = Table::new(vec!["point", "g"]);
    for (p, val) in cert.witness_g.values() {
        witness.push(vec![p.to_string(), fmt_rat(val)]);
    }
    Ok(RunReport::new(cfg, "OK")
        .with_table("main", main)
        .with_table("witness", witness)
        .with_note("witness g is 1-Lipschitz on the support, vanishes at the basepoint, and pairs to the norm"))
}

fn run_conjugacy(cfg: &ExperimentConfig) -> Result<RunReport> {
    let lit = cfg.vector.clone().unwrap_or_else(|| "e1:1".to_string());
    let level = cfg.level.unwrap_or(4);
    let v: L1Vector = lit.parse()?;
    let res = conjugacy_residual(&v, level)?;
    let verdict = if res.distance <= res.tail_bound { "PASS" } else { "FAIL" };
    let mut main = Table::new(vec!["vector", "level", "distance", "tail_bound", "verdict"]);
    main.push(vec![
        lit,
        level.to_string(),
        fmt_rat(&res.distance),
        fmt_rat(&res.tail_bound),
        verdict.to_string(),
    ]);
    Ok(RunReport::new(cfg, verdict)
        .with_table("main", main)
        .with_note("distance compares the two routes around the conjugacy square after truncation; tail_bound is the exact mass truncated away"))
}

fn run_witness(cfg: &ExperimentConfig) -> Result<RunReport> {
    let powers = require(&cfg.powers, "powers")?;
    let (lo, hi) = parse_range(&cfg.m_range.clone().unwrap_or_else(|| "10..30".to_string()))?;
    let center: L1Vector = cfg
        .center
        .clone()
        .unwrap_or_else(|| "e2:1/2".to_string())
        .parse()?;
    let radius = parse_rat(&cfg.radius.clone().unwrap_or_else(|| "1/4".to_string()))?;
    let targets: Vec<BallTarget> = powers
        .iter()
        .map(|_| BallTarget { center: center.clone(), radius: radius.clone() })
        .collect();

    let mut main = Table::new(vec!["m", "status", "witness", "u0_residual", "target_residuals"]);
    let mut all_found = true;
    for m in lo..=hi {
        match operator_return_witness(&powers, &center, &radius, &targets, m)? {
            WitnessOutcome::Witness(z) => {
                let r0 = z.sub(&center).norm1();
                let residuals: Vec<String> = powers
                    .iter()
                    .map(|&p| fmt_rat(&s_sigma_pow(&z, p * m).sub(&center).norm1()))
                    .collect();
                main.push(vec![
                    m.to_string(),
                    "WITNESS".to_string(),
                    z.to_string(),
                    fmt_rat(&r0),
                    residuals.join("|"),
                ]);
            }
            WitnessOutcome::NoWitness => {
                all_found = false;
                main.push(vec![
                    m.to_string(),
                    "UNKNOWN".to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
            }
        }
    }
    let verdict = if all_found { "PASS" } else { "INCONCLUSIVE" };
    Ok(RunReport::new(cfg, verdict)
        .with_table("main", main)
        .with_note("UNKNOWN is one-sided: the construction found no witness, which does not certify absence"))
}

fn decay_table(out: &ConditionOutcome) -> Table {
    let mut t = Table::new(vec!["n_k", "worst"]);
    for (nk, worst) in &out.decay {
        t.push(vec![nk.to_string(), fmt_rat(worst)]);
    }
    t
}

fn run_criterion(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mode = require(&cfg.mode, "mode")?;
    let powers = require(&cfg.powers, "powers")?;
    let big_k = cfg.big_k.unwrap_or(20);
    let eps = match &cfg.eps {
        Some(s) => parse_rat(s)?,
        None => default_eps(),
    };
    let instance = match mode.as_str() {
        "shift" => shift_powers_instance(&powers, big_k, eps)?,
        "tent" => tent_powers_instance(&powers, big_k, eps)?,
        other => return Err(Error::Parse(format!("unknown criterion mode `{other}`"))),
    };
    let report = verify_criterion(&instance)?;
    let verdict = if report.pass { "PASS" } else { "FAIL" };

    let mut main = Table::new(vec!["condition", "final_worst", "verdict"]);
    let rows = [
        ("orbit", &report.cond_orbit),
        ("inverse", &report.cond_inverse),
        ("mixed", &report.cond_mixed),
        ("mixed_diag", &report.cond_mixed_diag),
    ];
    for (name, out) in rows {
        main.push(vec![
            name.to_string(),
            fmt_rat(&out.final_worst),
            out.verdict.to_string(),
        ]);
    }
    let mut run = RunReport::new(cfg, verdict).with_table("main", main);
    for (name, out) in rows {
        run = run.with_table(&format!("decay_{name}"), decay_table(out));
    }
    Ok(run
        .with_note(report.conclusion.clone())
        .with_note(format!(
            "test batch sizes per slot: {}",
            join(&report.batch_sizes, ",")
        )))
}
