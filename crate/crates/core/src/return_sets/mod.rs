//! Exact disjoint return sets up to a horizon, and the predicates built on
//! them: disjoint transitivity over a finite family of open sets, weak
//! mixing of order r via the product reduction, intersection products of
//! return-set families, and the commutator construction that turns return
//! sets into a filter.
//!
//! Membership of a time m in a return set is decided exactly, never sampled:
//! on the Cantor set every constraint is a block of forced ternary digits
//! and satisfiability is a position-wise conflict check; on the interval the
//! candidate set is pushed forward through the tent or zig-zag chain as a
//! union of open rational intervals. Both routes are sound and complete for
//! nonemptiness because every hit set is open.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{DynMap, MapForm, MapTuple};
use crate::metric_spaces::{Point, PointedSpace};
use crate::{parse_rat, rat_int, Rat};

/// A basic open piece: a Cantor cylinder (all points with a fixed digit
/// prefix) or an open rational interval clipped to [-1,1].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    Cylinder(Vec<u8>),
    OpenInterval(Rat, Rat),
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Cylinder(p) => {
                write!(f, "cyl:")?;
                for d in p {
                    write!(f, "{d}")?;
                }
                Ok(())
            }
            Atom::OpenInterval(lo, hi) => {
                write!(f, "ivl:{},{}", crate::fmt_rat(lo), crate::fmt_rat(hi))
            }
        }
    }
}

/// A non-empty open subset of the Cantor space or the interval, stored as a
/// finite union of basic pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenSet {
    space: PointedSpace,
    atoms: Vec<Atom>,
}

impl OpenSet {
    /// The cylinder of all Cantor points starting with the given digits
    /// (the whole space for an empty prefix).
    pub fn cylinder(prefix: &[u8]) -> Result<Self> {
        for &d in prefix {
            if d != 0 && d != 2 {
                return Err(Error::InvalidDigit(d));
            }
        }
        Ok(OpenSet {
            space: PointedSpace::Cantor,
            atoms: vec![Atom::Cylinder(prefix.to_vec())],
        })
    }

    /// The open interval ]lo, hi[ clipped to [-1,1]; empty results are
    /// rejected so every constructed set is non-empty.
    pub fn interval(lo: Rat, hi: Rat) -> Result<Self> {
        let lo = lo.max(rat_int(-1));
        let hi = hi.min(rat_int(1));
        if lo >= hi {
            return Err(Error::DomainError(
                "interval is empty after clipping to [-1,1]".into(),
            ));
        }
        Ok(OpenSet {
            space: PointedSpace::Interval,
            atoms: vec![Atom::OpenInterval(lo, hi)],
        })
    }

    /// Union of finitely many sets on a common space.
    pub fn union(sets: &[OpenSet]) -> Result<Self> {
        let first = sets
            .first()
            .ok_or_else(|| Error::DomainError("union of no sets is empty".into()))?;
        let space = first.space.clone();
        let mut atoms = Vec::new();
        for s in sets {
            if s.space != space {
                return Err(Error::WrongSpace);
            }
            atoms.extend(s.atoms.iter().cloned());
        }
        Ok(OpenSet { space, atoms })
    }

    pub fn space(&self) -> &PointedSpace {
        &self.space
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.atoms.iter().any(|a| match (a, p) {
            (Atom::Cylinder(prefix), Point::Cantor(c)) => prefix
                .iter()
                .enumerate()
                .all(|(i, &d)| c.digit(i + 1) == d),
            (Atom::OpenInterval(lo, hi), Point::Interval(x)) => {
                lo < x.value() && x.value() < hi
            }
            _ => false,
        })
    }
}

impl fmt::Display for OpenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.atoms.iter().map(|a| a.to_string()).collect();
        write!(f, "{}", parts.join("|"))
    }
}

impl FromStr for OpenSet {
    type Err = Error;

    /// Parses the literal forms "cyl:02", "ivl:1/4,1/2" and unions joined
    /// with '|'.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = Vec::new();
        for raw in s.split('|') {
            let raw = raw.trim();
            if let Some(digits) = raw.strip_prefix("cyl:") {
                let prefix: Vec<u8> = digits
                    .trim()
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(0u8),
                        '2' => Ok(2u8),
                        other => Err(Error::Parse(format!(
                            "cylinder digits are 0 and 2, got '{other}'"
                        ))),
                    })
                    .collect::<Result<_>>()?;
                parts.push(OpenSet::cylinder(&prefix)?);
            } else if let Some(body) = raw.strip_prefix("ivl:") {
                let (lo, hi) = body
                    .split_once(',')
                    .ok_or_else(|| Error::Parse(format!("bad interval literal `{raw}`")))?;
                parts.push(OpenSet::interval(parse_rat(lo)?, parse_rat(hi)?)?);
            } else {
                return Err(Error::Parse(format!("unknown set literal `{raw}`")));
            }
        }
        OpenSet::union(&parts)
    }
}

/// One digit-block constraint: the candidate's digits at positions
/// offset+1 .. offset+len must equal the given prefix.
struct DigitBlock<'a> {
    offset: u64,
    prefix: &'a [u8],
}

/// Satisfiability of a conjunction of digit blocks: merge into a single
/// position -> digit map and fail on the first conflict. Any non-conflicting
/// assignment extends to a Cantor point, so this decides nonemptiness.
fn digit_blocks_consistent(blocks: &[DigitBlock<'_>]) -> bool {
    let mut forced: BTreeMap<u64, u8> = BTreeMap::new();
    for block in blocks {
        for (i, &d) in block.prefix.iter().enumerate() {
            let pos = block.offset + i as u64 + 1;
            match forced.insert(pos, d) {
                Some(old) if old != d => return false,
                _ => {}
            }
        }
    }
    true
}

/// The digit constraint equivalent to "map^m sends the candidate into the
/// given cylinder", if one exists: sigma powers slide the block right, w
/// powers consume leading zeros of the target prefix. Returns Ok(None) when
/// the preimage is empty, Ok(Some((offset, tail))) for the constraint.
fn cantor_constraint<'a>(
    form: &MapForm,
    m: u64,
    prefix: &'a [u8],
) -> Result<Option<(u64, &'a [u8])>> {
    match form {
        MapForm::Identity => Ok(Some((0, prefix))),
        MapForm::SigmaPow(a) => {
            let shift = a
                .checked_mul(m)
                .ok_or_else(|| Error::OutOfRange("iterate count overflows".into()))?;
            Ok(Some((shift, prefix)))
        }
        MapForm::WPow(l) => {
            let shift = l
                .checked_mul(m)
                .ok_or_else(|| Error::OutOfRange("iterate count overflows".into()))?
                as usize;
            let consumed = prefix.len().min(shift);
            if prefix[..consumed].iter().any(|&d| d != 0) {
                return Ok(None);
            }
            Ok(Some((0, &prefix[consumed..])))
        }
        _ => Err(Error::Unsupported(
            "return sets on the Cantor space need shift-power maps".into(),
        )),
    }
}

fn cantor_hits(tuple: &MapTuple, u0: &OpenSet, u: &[OpenSet], m: u64) -> Result<bool> {
    // Unions are handled by trying every combination of one atom per set;
    // the odometer stays tiny for the family sizes used here.
    let atom_prefix = |a: &Atom| match a {
        Atom::Cylinder(p) => p.clone(),
        Atom::OpenInterval(..) => unreachable!("space checked by caller"),
    };
    let u0_atoms: Vec<Vec<u8>> = u0.atoms.iter().map(atom_prefix).collect();
    let per_map: Vec<Vec<Vec<u8>>> = u
        .iter()
        .map(|s| s.atoms.iter().map(atom_prefix).collect())
        .collect();
    for base in &u0_atoms {
        let mut choice = vec![0usize; per_map.len()];
        loop {
            let mut blocks = vec![DigitBlock { offset: 0, prefix: base }];
            let mut feasible = true;
            for (i, map) in tuple.maps().iter().enumerate() {
                let prefix = &per_map[i][choice[i]];
                match cantor_constraint(map.form(), m, prefix)? {
                    Some((offset, tail)) => blocks.push(DigitBlock { offset, prefix: tail }),
                    None => {
                        feasible = false;
                        break;
                    }
                }
            }
            if feasible && digit_blocks_consistent(&blocks) {
                return Ok(true);
            }
            // Advance the odometer over atom choices.
            let mut pos = 0;
            loop {
                if pos == choice.len() {
                    break;
                }
                choice[pos] += 1;
                if choice[pos] < per_map[pos].len() {
                    break;
                }
                choice[pos] = 0;
                pos += 1;
            }
            if pos == choice.len() {
                break;
            }
        }
    }
    Ok(false)
}

fn rat_floor(r: &Rat) -> BigInt {
    r.numer().div_floor(r.denom())
}

/// Value of the endless sawtooth (0 at even integers, 1 at odd) at y >= 0.
fn sawtooth(y: &Rat) -> Rat {
    let k = rat_floor(&(y / rat_int(2)));
    let r = y - Rat::from(k) * rat_int(2);
    if r <= rat_int(1) {
        r
    } else {
        rat_int(2) - r
    }
}

fn int_in_open(lo: &Rat, hi: &Rat, odd: bool) -> bool {
    // Smallest integer of the required parity strictly above lo.
    let candidate = if odd {
        let g = rat_floor(&((lo - rat_int(1)) / rat_int(2)));
        Rat::from(g * 2 + BigInt::from(3))
    } else {
        let f = rat_floor(&(lo / rat_int(2)));
        Rat::from((f + BigInt::from(1)) * 2)
    };
    candidate < *hi
}

/// Open-interval image of ]lo, hi[ (inside [0,1]) under the p-piece zig-zag
/// map. The true image is an interval squeezed between this open core and
/// its closure; tracking the open core is exact for nonemptiness because
/// hit sets are open.
fn zigzag_image_pos(p: &BigInt, lo: &Rat, hi: &Rat) -> (Rat, Rat) {
    debug_assert!(lo < hi);
    let scale = Rat::from(p.clone());
    let ylo = lo * &scale;
    let yhi = hi * &scale;
    let zlo = sawtooth(&ylo);
    let zhi = sawtooth(&yhi);
    let min = if int_in_open(&ylo, &yhi, false) {
        Rat::zero()
    } else {
        zlo.clone().min(zhi.clone())
    };
    let max = if int_in_open(&ylo, &yhi, true) {
        rat_int(1)
    } else {
        zlo.max(zhi)
    };
    (min, max)
}

/// Image of an open interval inside [-1,1] under the anti-symmetric
/// extension of the 2^e-piece zig-zag (the e-th tent iterate). The odd
/// symmetry glues the two half-images across 0, which is always attained.
fn tent_image(e: &BigInt, lo: &Rat, hi: &Rat) -> (Rat, Rat) {
    let zero = Rat::zero();
    if *lo >= zero {
        zigzag_image_pos(e, lo, hi)
    } else if *hi <= zero {
        let (min, max) = zigzag_image_pos(e, &-hi.clone(), &-lo.clone());
        (-max, -min)
    } else {
        let (_, max_pos) = zigzag_image_pos(e, &zero, hi);
        let (_, max_neg) = zigzag_image_pos(e, &zero, &-lo.clone());
        (-max_neg, max_pos)
    }
}

/// One non-injective stage of the interval engine: a piecewise-linear map
/// with total fold count `pieces`, odd-extended when `odd` is set.
struct ChainStage {
    pieces: BigInt,
    set: usize,
}

fn interval_hits(tuple: &MapTuple, u0: &OpenSet, u: &[OpenSet], m: u64) -> Result<bool> {
    let atom_bounds = |a: &Atom| match a {
        Atom::OpenInterval(lo, hi) => (lo.clone(), hi.clone()),
        Atom::Cylinder(..) => unreachable!("space checked by caller"),
    };
    // Classify each coordinate: injective constraints (identity, halving)
    // restrict the candidate set directly; folding maps (tent and zig-zag
    // powers) are applied forward in increasing fold order.
    let mut direct: Vec<Vec<(Rat, Rat)>> = vec![u0.atoms.iter().map(atom_bounds).collect()];
    let mut stages: Vec<ChainStage> = Vec::new();
    let mut any_zigzag = false;
    let exp_u32 = |v: u64| -> Result<u32> {
        u32::try_from(v).map_err(|_| Error::OutOfRange("iterate count overflows".into()))
    };
    for (i, map) in tuple.maps().iter().enumerate() {
        let atoms: Vec<(Rat, Rat)> = u[i].atoms.iter().map(atom_bounds).collect();
        match map.form() {
            MapForm::Identity => direct.push(atoms),
            MapForm::HalvePow(l) => {
                let s = l
                    .checked_mul(m)
                    .ok_or_else(|| Error::OutOfRange("iterate count overflows".into()))?;
                // g^{-s} ]lo,hi[ = ]2^s lo, 2^s hi[ clipped to the space.
                let factor = Rat::from(BigInt::from(2).pow(exp_u32(s)?));
                let scaled = atoms
                    .iter()
                    .filter_map(|(lo, hi)| {
                        let lo = (lo * &factor).max(rat_int(-1));
                        let hi = (hi * &factor).min(rat_int(1));
                        (lo < hi).then_some((lo, hi))
                    })
                    .collect::<Vec<_>>();
                if scaled.is_empty() {
                    return Ok(false);
                }
                direct.push(scaled);
            }
            MapForm::TentPow(j) => {
                let e = j
                    .checked_mul(m)
                    .ok_or_else(|| Error::OutOfRange("iterate count overflows".into()))?;
                stages.push(ChainStage {
                    pieces: BigInt::from(2).pow(exp_u32(e)?),
                    set: i,
                });
            }
            MapForm::Zigzag(p) => {
                any_zigzag = true;
                stages.push(ChainStage {
                    pieces: BigInt::from(*p).pow(exp_u32(m)?),
                    set: i,
                });
            }
            _ => {
                return Err(Error::Unsupported(
                    "return sets on the interval need tent, zig-zag, halving or identity maps"
                        .into(),
                ))
            }
        }
    }
    // Zig-zag maps are self-maps of [0,1]; candidates outside that domain
    // cannot satisfy a zig-zag constraint. At m = 0 every iterate is the
    // identity on the whole space, so no domain restriction applies.
    if any_zigzag && m > 0 {
        direct.push(vec![(Rat::zero(), rat_int(1))]);
    }

    // Candidate set before any folding map runs: intersect all direct
    // constraints (a union of opens per coordinate, distributed pairwise).
    let mut pieces: Vec<(Rat, Rat)> = vec![(rat_int(-1), rat_int(1))];
    for constraint in &direct {
        let mut next = Vec::new();
        for (alo, ahi) in &pieces {
            for (blo, bhi) in constraint {
                let lo = alo.clone().max(blo.clone());
                let hi = ahi.clone().min(bhi.clone());
                if lo < hi {
                    next.push((lo, hi));
                }
            }
        }
        if next.is_empty() {
            return Ok(false);
        }
        pieces = next;
    }

    // Push the candidate set forward through the folding chain in
    // increasing fold order; consecutive stages compose because their fold
    // counts divide (tent powers always do; mixed zig-zag bases that do not
    // form a divisibility chain are rejected).
    stages.sort_by(|a, b| a.pieces.cmp(&b.pieces));
    let mut reached = BigInt::one();
    for stage in &stages {
        let (step, rem) = stage.pieces.div_rem(&reached);
        if !rem.is_zero() {
            return Err(Error::Unsupported(
                "zig-zag fold counts must form a divisibility chain".into(),
            ));
        }
        if !step.is_one() {
            pieces = pieces
                .iter()
                .map(|(lo, hi)| {
                    if any_zigzag {
                        zigzag_image_pos(&step, lo, hi)
                    } else {
                        tent_image(&step, lo, hi)
                    }
                })
                .collect();
        }
        reached = stage.pieces.clone();
        let target: Vec<(Rat, Rat)> = u[stage.set].atoms.iter().map(atom_bounds).collect();
        let mut next = Vec::new();
        for (alo, ahi) in &pieces {
            for (blo, bhi) in &target {
                let lo = alo.clone().max(blo.clone());
                let hi = ahi.clone().min(bhi.clone());
                if lo < hi {
                    next.push((lo, hi));
                }
            }
        }
        if next.is_empty() {
            return Ok(false);
        }
        pieces = next;
    }
    Ok(true)
}

fn validate_system(tuple: &MapTuple, u0: &OpenSet, u: &[OpenSet]) -> Result<()> {
    if u.len() != tuple.len() {
        return Err(Error::DomainError(format!(
            "tuple has {} maps but {} target sets were given",
            tuple.len(),
            u.len()
        )));
    }
    if u0.space() != tuple.space() || u.iter().any(|s| s.space() != tuple.space()) {
        return Err(Error::WrongSpace);
    }
    if tuple
        .maps()
        .iter()
        .any(|m| matches!(m.form(), MapForm::Generic(_)))
    {
        return Err(Error::Unsupported(
            "return sets need maps with exact preimage forms".into(),
        ));
    }
    Ok(())
}

/// Decides whether m lies in the disjoint return set: is there a point of
/// u0 sent into every u[i] by the m-th iterate of the i-th map?
pub fn hits(tuple: &MapTuple, u0: &OpenSet, u: &[OpenSet], m: u64) -> Result<bool> {
    validate_system(tuple, u0, u)?;
    match tuple.space() {
        PointedSpace::Cantor => cantor_hits(tuple, u0, u, m),
        PointedSpace::Interval => interval_hits(tuple, u0, u, m),
        PointedSpace::Finite(_) => Err(Error::Unsupported(
            "return sets are defined on the Cantor space and the interval".into(),
        )),
    }
}

/// The exact truncation of a disjoint return set to [0, horizon].
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSetSample {
    tuple: MapTuple,
    u0: OpenSet,
    u: Vec<OpenSet>,
    horizon: u64,
    members: BTreeSet<u64>,
}

impl ReturnSetSample {
    pub fn tuple(&self) -> &MapTuple {
        &self.tuple
    }

    pub fn u0(&self) -> &OpenSet {
        &self.u0
    }

    pub fn u(&self) -> &[OpenSet] {
        &self.u
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn members(&self) -> &BTreeSet<u64> {
        &self.members
    }
}

/// Computes {m <= horizon : m in d-N(u0, u)} exactly. Times are checked in
/// parallel; the result is deterministic.
pub fn disjoint_return_set(
    tuple: &MapTuple,
    u0: &OpenSet,
    u: &[OpenSet],
    horizon: u64,
) -> Result<ReturnSetSample> {
    validate_system(tuple, u0, u)?;
    let members = (0..=horizon)
        .into_par_iter()
        .map(|m| hits(tuple, u0, u, m).map(|yes| yes.then_some(m)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(ReturnSetSample {
        tuple: tuple.clone(),
        u0: u0.clone(),
        u: u.to_vec(),
        horizon,
        members,
    })
}

/// Verdict of a truncated check of an infinite statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Violation,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Consistent => "CONSISTENT",
            Verdict::Violation => "VIOLATION",
            Verdict::Inconclusive => "INCONCLUSIVE",
        };
        write!(f, "{s}")
    }
}

/// Finite shadow of "non-empty return sets are infinite": an empty sample
/// is vacuously consistent, a well-populated one is consistent, and a
/// non-empty sample below min_count only shows the horizon was too small.
/// On spaces without isolated points a violation cannot occur, and none is
/// ever reported here.
pub fn nonempty_implies_infinite_check(sample: &ReturnSetSample, min_count: usize) -> Verdict {
    if sample.members.is_empty() || sample.members.len() >= min_count {
        Verdict::Consistent
    } else {
        Verdict::Inconclusive
    }
}

/// One (U0, U1..UN) choice from a set family, with the least return time
/// found under the horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitivityCase {
    pub u0: usize,
    pub u: Vec<usize>,
    pub first_hit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitivityReport {
    pub horizon: u64,
    pub cases: Vec<TransitivityCase>,
    pub pass: bool,
}

fn index_tuples(family_len: usize, slots: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; slots];
    loop {
        out.push(current.clone());
        let mut pos = 0;
        loop {
            if pos == slots {
                return out;
            }
            current[pos] += 1;
            if current[pos] < family_len {
                break;
            }
            current[pos] = 0;
            pos += 1;
        }
    }
}

/// Checks every (U0, U1..UN) choice from the family for a return time under
/// the horizon; PASS means every truncated return set was non-empty.
pub fn check_disjoint_transitive(
    tuple: &MapTuple,
    family: &[OpenSet],
    horizon: u64,
) -> Result<TransitivityReport> {
    if family.is_empty() {
        return Err(Error::DomainError("the set family is empty".into()));
    }
    let indices = index_tuples(family.len(), tuple.len() + 1);
    let cases = indices
        .into_par_iter()
        .map(|idx| {
            let (u0, u_idx) = (idx[0], &idx[1..]);
            let u: Vec<OpenSet> = u_idx.iter().map(|&i| family[i].clone()).collect();
            let mut first_hit = None;
            for m in 0..=horizon {
                if hits(tuple, &family[u0], &u, m)? {
                    first_hit = Some(m);
                    break;
                }
            }
            Ok(TransitivityCase { u0, u: u_idx.to_vec(), first_hit })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = cases.iter().all(|c| c.first_hit.is_some());
    Ok(TransitivityReport { horizon, cases, pass })
}

/// TRUE iff every time from threshold to the horizon is a member: the
/// truncated form of "the return set is cofinite".
pub fn cofinite_up_to(sample: &ReturnSetSample, threshold: u64) -> Result<bool> {
    if threshold > sample.horizon {
        return Err(Error::BadThreshold);
    }
    Ok((threshold..=sample.horizon).all(|m| sample.members.contains(&m)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeakMixingReport {
    pub r: u32,
    pub horizon: u64,
    /// Number of distinct (U0, U) choices the samples were computed for.
    pub choices: usize,
    /// Number of r-tuples of choices whose return sets were intersected.
    pub checked: u64,
    /// Index tuples (into the choice list) with empty intersection, capped
    /// at 100 entries.
    pub failures: Vec<Vec<usize>>,
    pub pass: bool,
}

/// Order-r weak mixing at horizon scale, via the product reduction: the
/// return set of the r-fold product tuple on a product of choices equals
/// the intersection of the r coordinate return sets, so each coordinate
/// sample is computed once and every r-tuple of choices is checked by set
/// intersection, without materializing product spaces.
pub fn weakly_mixing_order_r(
    tuple: &MapTuple,
    r: u32,
    family: &[OpenSet],
    horizon: u64,
) -> Result<WeakMixingReport> {
    if r == 0 {
        return Err(Error::OutOfRange("the order must be at least 1".into()));
    }
    if family.is_empty() {
        return Err(Error::DomainError("the set family is empty".into()));
    }
    let choice_indices = index_tuples(family.len(), tuple.len() + 1);
    let samples = choice_indices
        .par_iter()
        .map(|idx| {
            let u: Vec<OpenSet> = idx[1..].iter().map(|&i| family[i].clone()).collect();
            disjoint_return_set(tuple, &family[idx[0]], &u, horizon)
        })
        .collect::<Result<Vec<_>>>()?;
    let combos = index_tuples(samples.len(), r as usize);
    let mut failures = Vec::new();
    for combo in &combos {
        let mut intersection = samples[combo[0]].members().clone();
        for &slot in &combo[1..] {
            intersection = intersection
                .intersection(samples[slot].members())
                .copied()
                .collect();
            if intersection.is_empty() {
                break;
            }
        }
        if intersection.is_empty() && failures.len() < 100 {
            failures.push(combo.clone());
        }
    }
    Ok(WeakMixingReport {
        r,
        horizon,
        choices: samples.len(),
        checked: combos.len() as u64,
        pass: failures.is_empty(),
        failures,
    })
}

/// Intersection of two return-set samples over the same horizon: the
/// product of the generated families at horizon scale.
pub fn product_family_intersect(
    a: &ReturnSetSample,
    b: &ReturnSetSample,
) -> Result<BTreeSet<u64>> {
    if a.horizon != b.horizon {
        return Err(Error::BadHorizon);
    }
    Ok(a.members.intersection(&b.members).copied().collect())
}

/// Symbolic commutation on normal forms: powers of one generator commute,
/// the identity commutes with everything, and all mixed or generic pairs
/// are rejected (sigma and w do not commute, nor do tent and halving).
fn commutes(a: &MapForm, b: &MapForm) -> bool {
    use MapForm::*;
    matches!(
        (a, b),
        (Identity, _)
            | (_, Identity)
            | (SigmaPow(_), SigmaPow(_))
            | (WPow(_), WPow(_))
            | (TentPow(_), TentPow(_))
            | (HalvePow(_), HalvePow(_))
            | (Zigzag(_), Zigzag(_))
    )
}

/// Exact preimage of an open set under the m-th iterate of a map,
/// materialized as an open set. Sigma preimages multiply cylinders by
/// 2^{shift}, so large shifts are rejected instead of exploding.
fn exact_preimage(g: &DynMap, m: u64, set: &OpenSet) -> Result<OpenSet> {
    if set.space() != g.space() {
        return Err(Error::WrongSpace);
    }
    let mut atoms = Vec::new();
    match g.form() {
        MapForm::Identity => return Ok(set.clone()),
        MapForm::SigmaPow(a) => {
            let shift = a
                .checked_mul(m)
                .ok_or_else(|| Error::OutOfRange("iterate count overflows".into()))?;
            if shift > 16 {
                return Err(Error::Unsupported(
                    "sigma preimages beyond 2^16 cylinders are not materialized".into(),
                ));
            }
            for atom in set.atoms() {
                let Atom::Cylinder(suffix) = atom else { unreachable!() };
                for word in 0..(1u64 << shift) {
                    let mut prefix = Vec::with_capacity(shift as usize + suffix.len());
                    for bit in 0..shift {
                        prefix.push(if (word >> bit) & 1 == 0 { 0u8 } else { 2u8 });
                    }
                    prefix.extend_from_slice(suffix);
                    atoms.push(Atom::Cylinder(prefix));
                }
            }
        }
        MapForm::WPow(l) => {
            let shift = l
                .checked_mul(m)
                .ok_or_else(|| Error::OutOfRange("iterate count overflows".into()))?
                as usize;
            for atom in set.atoms() {
                let Atom::Cylinder(prefix) = atom else { unreachable!() };
                let consumed = prefix.len().min(shift);
                if prefix[..consumed].iter().all(|&d| d == 0) {
                    atoms.push(Atom::Cylinder(prefix[consumed..].to_vec()));
                }
            }
        }
        MapForm::HalvePow(l) => {
            let s = l
                .checked_mul(m)
                .ok_or_else(|| Error::OutOfRange("iterate count overflows".into()))?;
            let s = u32::try_from(s)
                .map_err(|_| Error::OutOfRange("iterate count overflows".into()))?;
            let factor = Rat::from(BigInt::from(2).pow(s));
            for atom in set.atoms() {
                let Atom::OpenInterval(lo, hi) = atom else { unreachable!() };
                let lo = (lo * &factor).max(rat_int(-1));
                let hi = (hi * &factor).min(rat_int(1));
                if lo < hi {
                    atoms.push(Atom::OpenInterval(lo, hi));
                }
            }
        }
        _ => {
            return Err(Error::Unsupported(
                "preimages of folding maps are not materialized as interval unions".into(),
            ))
        }
    }
    if atoms.is_empty() {
        return Err(Error::DomainError("the preimage is empty".into()));
    }
    Ok(OpenSet { space: set.space().clone(), atoms })
}

fn intersect_open_sets(a: &OpenSet, b: &OpenSet) -> Option<OpenSet> {
    let mut atoms = Vec::new();
    for x in a.atoms() {
        for y in b.atoms() {
            match (x, y) {
                (Atom::Cylinder(p), Atom::Cylinder(q)) => {
                    let (short, long) = if p.len() <= q.len() { (p, q) } else { (q, p) };
                    if long.starts_with(short) {
                        atoms.push(Atom::Cylinder(long.clone()));
                    }
                }
                (Atom::OpenInterval(alo, ahi), Atom::OpenInterval(blo, bhi)) => {
                    let lo = alo.clone().max(blo.clone());
                    let hi = ahi.clone().min(bhi.clone());
                    if lo < hi {
                        atoms.push(Atom::OpenInterval(lo, hi));
                    }
                }
                _ => {}
            }
        }
    }
    if atoms.is_empty() {
        None
    } else {
        Some(OpenSet { space: a.space().clone(), atoms })
    }
}

/// The filter construction: finds the least m at which a map g commuting
/// with the whole tuple sends a point of every U_i into the matching V_i,
/// and materializes the witness sets W_i = g^{-m}(V_i) intersect U_i. Any
/// return time for the W system is then a simultaneous return time for the
/// U and V systems.
pub fn commutator_filter_witness(
    tuple: &MapTuple,
    g: &DynMap,
    u: &[OpenSet],
    v: &[OpenSet],
    search_horizon: u64,
) -> Result<(u64, Vec<OpenSet>)> {
    let slots = tuple.len() + 1;
    if u.len() != slots || v.len() != slots {
        return Err(Error::DomainError(format!(
            "expected {slots} U sets and {slots} V sets for an {}-map tuple",
            tuple.len()
        )));
    }
    if g.space() != tuple.space() {
        return Err(Error::WrongSpace);
    }
    if !tuple.maps().iter().all(|f| commutes(g.form(), f.form())) {
        return Err(Error::NotCommuting);
    }
    let g_tuple = MapTuple::new(vec![g.clone()])?;
    for m in 0..=search_horizon {
        let mut all = true;
        for i in 0..slots {
            if !hits(&g_tuple, &u[i], std::slice::from_ref(&v[i]), m)? {
                all = false;
                break;
            }
        }
        if !all {
            continue;
        }
        let mut w = Vec::with_capacity(slots);
        for i in 0..slots {
            let pre = exact_preimage(g, m, &v[i])?;
            let wi = intersect_open_sets(&pre, &u[i]).ok_or_else(|| {
                Error::DomainError("materialized witness disagreed with the hit test".into())
            })?;
            w.push(wi);
        }
        return Ok((m, w));
    }
    Err(Error::HorizonExceeded(search_horizon))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterReport {
    pub w_members: BTreeSet<u64>,
    pub uv_intersection: BTreeSet<u64>,
    pub pass: bool,
}

/// Verifies the filter inclusion at horizon scale: the return set of the
/// witness system (W0, W) must be contained in the intersection of the
/// return sets of the (U0, U) and (V0, V) systems.
pub fn filter_inclusion_check(
    tuple: &MapTuple,
    u: &[OpenSet],
    v: &[OpenSet],
    w: &[OpenSet],
    horizon: u64,
) -> Result<FilterReport> {
    let slots = tuple.len() + 1;
    if u.len() != slots || v.len() != slots || w.len() != slots {
        return Err(Error::DomainError(format!(
            "expected {slots} sets per system for an {}-map tuple",
            tuple.len()
        )));
    }
    let sample = |sets: &[OpenSet]| disjoint_return_set(tuple, &sets[0], &sets[1..], horizon);
    let sw = sample(w)?;
    let su = sample(u)?;
    let sv = sample(v)?;
    let uv: BTreeSet<u64> = su.members().intersection(sv.members()).copied().collect();
    let pass = sw.members().iter().all(|m| uv.contains(m));
    Ok(FilterReport { w_members: sw.members().clone(), uv_intersection: uv, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::DynMap;
    use crate::metric_spaces::CantorPoint;
    use crate::rat;

    fn cyl(digits: &[u8]) -> OpenSet {
        OpenSet::cylinder(digits).unwrap()
    }

    fn ivl(lo: (i64, i64), hi: (i64, i64)) -> OpenSet {
        OpenSet::interval(rat(lo.0, lo.1), rat(hi.0, hi.1)).unwrap()
    }

    fn sigma_tuple(powers: &[u64]) -> MapTuple {
        MapTuple::new(powers.iter().map(|&p| DynMap::sigma_pow(p)).collect()).unwrap()
    }

    fn tent_tuple(powers: &[u64]) -> MapTuple {
        MapTuple::new(powers.iter().map(|&p| DynMap::tent_pow(p)).collect()).unwrap()
    }

    #[test]
    fn set_literals_round_trip() {
        for s in ["cyl:02", "cyl:", "ivl:1/4,1/2", "cyl:0|cyl:22", "ivl:-1,0|ivl:1/2,1"] {
            let set: OpenSet = s.parse().unwrap();
            assert_eq!(set.to_string(), s);
        }
        assert!("cyl:01".parse::<OpenSet>().is_err());
        assert!("ivl:1/2,1/4".parse::<OpenSet>().is_err());
        assert!("ivl:2,3".parse::<OpenSet>().is_err());
        assert!("box:1".parse::<OpenSet>().is_err());
    }

    #[test]
    fn membership_matches_literals() {
        let set = cyl(&[0, 2]);
        let inside: CantorPoint = "020".parse().unwrap();
        let outside: CantorPoint = "22".parse().unwrap();
        assert!(set.contains(&Point::Cantor(inside)));
        assert!(!set.contains(&Point::Cantor(outside)));

        let seg = ivl((1, 4), (1, 2));
        let mid = Point::Interval(crate::metric_spaces::IntervalPoint::new(rat(3, 8)).unwrap());
        let edge = Point::Interval(crate::metric_spaces::IntervalPoint::new(rat(1, 4)).unwrap());
        assert!(seg.contains(&mid));
        assert!(!seg.contains(&edge));
    }

    #[test]
    fn hit_examples_on_the_cantor_space() {
        let t = sigma_tuple(&[1]);
        assert!(hits(&t, &cyl(&[0]), &[cyl(&[2])], 1).unwrap());
        for u0 in [cyl(&[0]), cyl(&[2, 0]), cyl(&[])] {
            assert!(hits(&t, &u0, &[u0.clone()], 0).unwrap());
        }
        // Conflicting digit blocks at m = 0.
        assert!(!hits(&t, &cyl(&[0]), &[cyl(&[2])], 0).unwrap());
    }

    #[test]
    fn tent_map_is_not_transitive_across_signs() {
        let t = tent_tuple(&[1]);
        let u0 = ivl((1, 4), (1, 2));
        let target = ivl((-1, 2), (-1, 4));
        for m in 0..=40 {
            assert!(!hits(&t, &u0, &[target.clone()], m).unwrap(), "m = {m}");
        }
    }

    #[test]
    fn generic_maps_are_rejected() {
        let gmap = DynMap::generic(PointedSpace::Cantor, "opaque", rat(1, 1), |p| Ok(p.clone()));
        let t = MapTuple::new(vec![gmap]).unwrap();
        assert!(matches!(
            hits(&t, &cyl(&[0]), &[cyl(&[0])], 1),
            Err(Error::Unsupported(_))
        ));
        let t = sigma_tuple(&[1]);
        assert!(matches!(
            hits(&t, &ivl((0, 1), (1, 2)), &[cyl(&[0])], 1),
            Err(Error::WrongSpace)
        ));
    }

    #[test]
    fn return_set_examples() {
        let t = sigma_tuple(&[1, 2]);
        let sample =
            disjoint_return_set(&t, &cyl(&[0]), &[cyl(&[2]), cyl(&[2])], 20).unwrap();
        assert_eq!(
            sample.members().iter().copied().collect::<Vec<_>>(),
            (1..=20).collect::<Vec<_>>()
        );

        let tent = tent_tuple(&[1]);
        let empty =
            disjoint_return_set(&tent, &ivl((1, 4), (1, 2)), &[ivl((-1, 2), (-1, 4))], 40)
                .unwrap();
        assert!(empty.members().is_empty());

        let single = disjoint_return_set(&sigma_tuple(&[1]), &cyl(&[2]), &[cyl(&[2])], 0).unwrap();
        assert_eq!(single.members().iter().copied().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn infinite_shadow_verdicts() {
        let t = sigma_tuple(&[1, 2]);
        let full = disjoint_return_set(&t, &cyl(&[0]), &[cyl(&[2]), cyl(&[2])], 20).unwrap();
        assert_eq!(nonempty_implies_infinite_check(&full, 3), Verdict::Consistent);

        let tent = tent_tuple(&[1]);
        let empty =
            disjoint_return_set(&tent, &ivl((1, 4), (1, 2)), &[ivl((-1, 2), (-1, 4))], 40)
                .unwrap();
        assert_eq!(nonempty_implies_infinite_check(&empty, 3), Verdict::Consistent);

        let sparse = disjoint_return_set(&sigma_tuple(&[1]), &cyl(&[2]), &[cyl(&[2])], 0).unwrap();
        assert_eq!(nonempty_implies_infinite_check(&sparse, 3), Verdict::Inconclusive);
    }

    #[test]
    fn transitivity_reports() {
        let family: Vec<OpenSet> =
            vec![cyl(&[0]), cyl(&[2]), cyl(&[0, 0]), cyl(&[0, 2]), cyl(&[2, 0]), cyl(&[2, 2])];
        let report = check_disjoint_transitive(&sigma_tuple(&[1]), &family, 10).unwrap();
        assert!(report.pass);
        assert_eq!(report.cases.len(), 36);

        let mixed = vec![ivl((1, 4), (1, 2)), ivl((-1, 2), (-1, 4))];
        let tent_report = check_disjoint_transitive(&tent_tuple(&[1]), &mixed, 40).unwrap();
        assert!(!tent_report.pass);

        let id = MapTuple::new(vec![DynMap::identity(PointedSpace::Interval)]).unwrap();
        let disjoint = vec![ivl((1, 4), (1, 2)), ivl((-1, 2), (-1, 4))];
        assert!(!check_disjoint_transitive(&id, &disjoint, 40).unwrap().pass);
    }

    #[test]
    fn cofiniteness_checks() {
        let t = sigma_tuple(&[1, 2]);
        let sample = disjoint_return_set(&t, &cyl(&[0]), &[cyl(&[2]), cyl(&[2])], 20).unwrap();
        assert!(cofinite_up_to(&sample, 1).unwrap());
        assert!(!cofinite_up_to(&sample, 0).unwrap());
        assert!(matches!(cofinite_up_to(&sample, 21), Err(Error::BadThreshold)));

        let deep = disjoint_return_set(
            &t,
            &cyl(&[0, 0]),
            &[cyl(&[2, 2]), cyl(&[2, 2])],
            40,
        )
        .unwrap();
        assert!(cofinite_up_to(&deep, 5).unwrap());
    }

    #[test]
    fn weak_mixing_reports() {
        let fam1 = vec![cyl(&[0]), cyl(&[2])];
        let wm = weakly_mixing_order_r(&sigma_tuple(&[1]), 2, &fam1, 10).unwrap();
        assert!(wm.pass);
        assert_eq!(wm.choices, 4);
        assert_eq!(wm.checked, 16);

        let mixed = vec![ivl((1, 4), (1, 2)), ivl((-1, 2), (-1, 4))];
        assert!(!weakly_mixing_order_r(&tent_tuple(&[1]), 2, &mixed, 40).unwrap().pass);

        // Order 1 agrees with plain transitivity on the same inputs.
        let r1 = weakly_mixing_order_r(&tent_tuple(&[1]), 1, &mixed, 40).unwrap();
        let direct = check_disjoint_transitive(&tent_tuple(&[1]), &mixed, 40).unwrap();
        assert_eq!(r1.pass, direct.pass);
    }

    #[test]
    fn family_products_intersect_members() {
        let t = sigma_tuple(&[1, 2]);
        let a = disjoint_return_set(&t, &cyl(&[0]), &[cyl(&[2]), cyl(&[2])], 20).unwrap();
        let b = disjoint_return_set(&t, &cyl(&[0, 0]), &[cyl(&[2, 2]), cyl(&[2, 2])], 20).unwrap();
        let both = product_family_intersect(&a, &b).unwrap();
        assert!(both.contains(&5) && both.contains(&20));
        assert!(!both.contains(&0));

        let short = disjoint_return_set(&t, &cyl(&[0]), &[cyl(&[2]), cyl(&[2])], 10).unwrap();
        assert!(matches!(product_family_intersect(&a, &short), Err(Error::BadHorizon)));
    }

    #[test]
    fn commutator_witness_examples() {
        let t = sigma_tuple(&[1, 2]);
        let g = DynMap::sigma_pow(1);
        let u = vec![cyl(&[0]); 3];
        let v = vec![cyl(&[2]); 3];
        let (m, w) = commutator_filter_witness(&t, &g, &u, &v, 10).unwrap();
        assert_eq!(m, 1);
        for wi in &w {
            assert_eq!(wi.to_string(), "cyl:02");
        }

        let (m0, w0) = commutator_filter_witness(&t, &g, &u, &u, 10).unwrap();
        assert_eq!(m0, 0);
        assert_eq!(w0, u);

        let id = DynMap::identity(PointedSpace::Cantor);
        assert!(matches!(
            commutator_filter_witness(&t, &id, &u, &v, 10),
            Err(Error::HorizonExceeded(10))
        ));

        let w_map = DynMap::w_pow(1);
        assert!(matches!(
            commutator_filter_witness(&t, &w_map, &u, &v, 10),
            Err(Error::NotCommuting)
        ));
    }

    #[test]
    fn filter_inclusion_examples() {
        let t = sigma_tuple(&[1, 2]);
        let g = DynMap::sigma_pow(1);
        let u = vec![cyl(&[0]); 3];
        let v = vec![cyl(&[2]); 3];
        let (_, w) = commutator_filter_witness(&t, &g, &u, &v, 10).unwrap();
        assert!(filter_inclusion_check(&t, &u, &v, &w, 20).unwrap().pass);
        assert!(filter_inclusion_check(&t, &u, &u, &u, 20).unwrap().pass);

        // Negative control: a W system that is not from the construction
        // returns at m = 0 while the U system does not.
        let t1 = sigma_tuple(&[1]);
        let u_bad = vec![cyl(&[0]), cyl(&[2])];
        let w_bad = vec![cyl(&[2]), cyl(&[2])];
        let report = filter_inclusion_check(&t1, &u_bad, &u_bad, &w_bad, 20).unwrap();
        assert!(!report.pass);
    }

    #[test]
    fn halving_and_zigzag_return_sets() {
        let halve = MapTuple::new(vec![DynMap::halve_pow(1)]).unwrap();
        let sample =
            disjoint_return_set(&halve, &ivl((1, 2), (1, 1)), &[ivl((0, 1), (1, 4))], 10)
                .unwrap();
        assert_eq!(
            sample.members().iter().copied().collect::<Vec<_>>(),
            (2..=10).collect::<Vec<_>>()
        );

        let z3 = MapTuple::new(vec![DynMap::zigzag(3).unwrap()]).unwrap();
        let zs = disjoint_return_set(&z3, &ivl((0, 1), (1, 9)), &[ivl((2, 3), (1, 1))], 8)
            .unwrap();
        assert_eq!(
            zs.members().iter().copied().collect::<Vec<_>>(),
            (2..=8).collect::<Vec<_>>()
        );
    }

    #[test]
    fn tent_return_sets_reach_across_scales() {
        // f(]1/4,1/2[) = ]1/2,1[ and further iterates keep hitting it.
        let t = tent_tuple(&[1]);
        let sample =
            disjoint_return_set(&t, &ivl((1, 4), (1, 2)), &[ivl((1, 2), (1, 1))], 10).unwrap();
        assert!(sample.members().contains(&1));
        assert!(!sample.members().is_empty());

        // Negative side maps within the negative half for the odd tent.
        assert!(hits(&t, &ivl((-1, 2), (-1, 4)), &[ivl((-1, 1), (-1, 2))], 1).unwrap());
    }

    #[test]
    fn permutation_and_monotonicity_samples() {
        let t12 = sigma_tuple(&[1, 2]);
        let t21 = sigma_tuple(&[2, 1]);
        let a = disjoint_return_set(&t12, &cyl(&[0]), &[cyl(&[2]), cyl(&[0, 2])], 15).unwrap();
        let b = disjoint_return_set(&t21, &cyl(&[0]), &[cyl(&[0, 2]), cyl(&[2])], 15).unwrap();
        assert_eq!(a.members(), b.members());

        // Extending a cylinder shrinks the set and never adds members.
        let wide = disjoint_return_set(&t12, &cyl(&[0]), &[cyl(&[2]), cyl(&[2])], 15).unwrap();
        let narrow =
            disjoint_return_set(&t12, &cyl(&[0]), &[cyl(&[2, 0]), cyl(&[2])], 15).unwrap();
        assert!(narrow.members().is_subset(wide.members()));
    }
}
