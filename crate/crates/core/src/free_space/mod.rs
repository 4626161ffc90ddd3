//! Finitely supported elements of the Lipschitz-free space over a pointed
//! metric space: evaluation functionals, molecules, the pairing with
//! Lipschitz functions vanishing at the basepoint, the exact free norm via
//! Kantorovich-Rubinstein duality, and the linearization functor that turns a
//! Lipschitz map into an operator on free vectors.

pub mod simplex;

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::maps::DynMap;
use crate::metric_spaces::{Point, PointedSpace};
use crate::Rat;

/// A finitely supported vector sum a_i delta_{x_i}. The basepoint never
/// appears as a key (delta_0 = 0) and zero coefficients are dropped, so the
/// representation is canonical.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeVector {
    space: PointedSpace,
    terms: BTreeMap<Point, Rat>,
}

impl FreeVector {
    pub fn new(
        space: PointedSpace,
        terms: impl IntoIterator<Item = (Point, Rat)>,
    ) -> Result<Self> {
        let base = space.basepoint();
        let mut map: BTreeMap<Point, Rat> = BTreeMap::new();
        for (p, c) in terms {
            if !space.contains(&p) {
                return Err(Error::WrongSpace);
            }
            if p == base {
                continue;
            }
            let entry = map.entry(p).or_insert_with(Rat::zero);
            *entry += c;
        }
        map.retain(|_, c| !c.is_zero());
        Ok(FreeVector { space, terms: map })
    }

    pub fn zero(space: PointedSpace) -> Self {
        FreeVector { space, terms: BTreeMap::new() }
    }

    pub fn space(&self) -> &PointedSpace {
        &self.space
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn support_len(&self) -> usize {
        self.terms.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, &Rat)> {
        self.terms.iter()
    }

    pub fn coeff(&self, p: &Point) -> Rat {
        self.terms.get(p).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn add(&self, other: &FreeVector) -> Result<FreeVector> {
        if self.space != other.space {
            return Err(Error::WrongSpace);
        }
        FreeVector::new(
            self.space.clone(),
            self.iter()
                .chain(other.iter())
                .map(|(p, c)| (p.clone(), c.clone())),
        )
    }

    pub fn sub(&self, other: &FreeVector) -> Result<FreeVector> {
        self.add(&other.scale(&crate::rat_int(-1)))
    }

    pub fn scale(&self, c: &Rat) -> FreeVector {
        if c.is_zero() {
            return FreeVector::zero(self.space.clone());
        }
        let terms = self
            .terms
            .iter()
            .map(|(p, a)| (p.clone(), a * c))
            .collect();
        FreeVector { space: self.space.clone(), terms }
    }
}

impl fmt::Display for FreeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(p, c)| format!("{}:{}", p, crate::fmt_rat(c)))
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

/// The evaluation functional delta_x (the zero vector when x is the
/// basepoint).
pub fn delta(space: &PointedSpace, x: &Point) -> Result<FreeVector> {
    if !space.contains(x) {
        return Err(Error::WrongSpace);
    }
    FreeVector::new(space.clone(), [(x.clone(), crate::rat_int(1))])
}

/// The molecule (delta_x - delta_y) / d(x,y), a norm-one element.
pub fn molecule(space: &PointedSpace, x: &Point, y: &Point) -> Result<FreeVector> {
    if x == y {
        return Err(Error::DegenerateMolecule);
    }
    let d = space.distance(x, y)?;
    let inv = d.recip();
    FreeVector::new(
        space.clone(),
        [(x.clone(), inv.clone()), (y.clone(), -inv)],
    )
}

/// A Lipschitz function vanishing at the basepoint, stored on a finite set of
/// points. The declared bound is validated against every stored pair; values
/// at unlisted points are never needed (a McShane extension with the same
/// constant always exists).
#[derive(Debug, Clone, PartialEq)]
pub struct LipFunction {
    space: PointedSpace,
    values: BTreeMap<Point, Rat>,
    declared_lip: Rat,
}

impl LipFunction {
    pub fn new(
        space: PointedSpace,
        values: impl IntoIterator<Item = (Point, Rat)>,
        declared_lip: Rat,
    ) -> Result<Self> {
        let base = space.basepoint();
        let mut map: BTreeMap<Point, Rat> = BTreeMap::new();
        for (p, v) in values {
            if !space.contains(&p) {
                return Err(Error::WrongSpace);
            }
            if let Some(old) = map.insert(p, v) {
                let _ = old;
                return Err(Error::Parse("duplicate point in function table".into()));
            }
        }
        match map.get(&base) {
            Some(v) if !v.is_zero() => {
                return Err(Error::NotLipschitz("nonzero value at the basepoint".into()))
            }
            Some(_) => {}
            None => {
                map.insert(base, Rat::zero());
            }
        }
        let pts: Vec<&Point> = map.keys().collect();
        for (i, p) in pts.iter().enumerate() {
            for q in &pts[i + 1..] {
                let gap = (map[*p].clone() - map[*q].clone()).abs();
                let allowed = &declared_lip * space.distance(p, q)?;
                if gap > allowed {
                    return Err(Error::NotLipschitz(format!(
                        "|g({p}) - g({q})| exceeds the declared bound"
                    )));
                }
            }
        }
        Ok(LipFunction { space, values: map, declared_lip })
    }

    pub fn space(&self) -> &PointedSpace {
        &self.space
    }

    pub fn declared_lip(&self) -> &Rat {
        &self.declared_lip
    }

    pub fn eval(&self, p: &Point) -> Result<&Rat> {
        self.values.get(p).ok_or(Error::IncompleteFunction)
    }

    pub fn values(&self) -> impl Iterator<Item = (&Point, &Rat)> {
        self.values.iter()
    }
}

/// The canonical pairing <g, sum a_i delta_{x_i}> = sum a_i g(x_i).
pub fn pair(g: &LipFunction, v: &FreeVector) -> Result<Rat> {
    if g.space != *v.space() {
        return Err(Error::WrongSpace);
    }
    let mut acc = Rat::zero();
    for (p, a) in v.iter() {
        acc += a * g.eval(p)?;
    }
    Ok(acc)
}

/// Solver status marker; the free-norm dual is always feasible (g = 0) and
/// bounded (|g(x)| <= d(x,0)), so only `Optimal` ever occurs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    InfeasibleImpossible,
}

/// The exact free norm together with an optimal dual witness: a function g
/// with Lipschitz constant at most 1, vanishing at the basepoint, with
/// <g, v> equal to the norm.
#[derive(Debug, Clone, PartialEq)]
pub struct NormCertificate {
    pub value: Rat,
    pub witness_g: LipFunction,
    pub lp_status: LpStatus,
}

/// The free norm of a finitely supported vector, via the dual program
/// maximize sum a_i g(x_i) over g with g(0) = 0 and |g(x) - g(y)| <= d(x,y)
/// for x, y in support(v) union {0}. Restricting the constraints to that
/// finite set is exact: a McShane extension to the whole space keeps the
/// Lipschitz constant, so the finite optimum equals the true norm.
///
/// Spaces whose metric is the restriction of the real line (Cantor and
/// interval points) use a closed-form transshipment solution: after sorting
/// the support, only consecutive constraints bind, and the optimum is the sum
/// over gaps of gap-length times the absolute mass flowing across the gap.
/// Arbitrary finite metric spaces go through the exact simplex.
pub fn free_norm(v: &FreeVector) -> NormCertificate {
    if v.is_zero() {
        let witness =
            LipFunction::new(v.space().clone(), [], crate::rat_int(1)).expect("empty table");
        return NormCertificate {
            value: Rat::zero(),
            witness_g: witness,
            lp_status: LpStatus::Optimal,
        };
    }
    match v.space() {
        PointedSpace::Cantor | PointedSpace::Interval => line_norm(v),
        PointedSpace::Finite(_) => finite_norm(v),
    }
}

fn line_value(p: &Point) -> Rat {
    match p {
        Point::Cantor(c) => c.value(),
        Point::Interval(x) => x.value().clone(),
        Point::Finite(_) => unreachable!("line solver only sees embedded spaces"),
    }
}

fn line_norm(v: &FreeVector) -> NormCertificate {
    let space = v.space().clone();
    let base = space.basepoint();

    // Sorted support plus the basepoint with mass zero.
    let mut pts: Vec<(Rat, Point, Rat)> = v
        .iter()
        .map(|(p, a)| (line_value(p), p.clone(), a.clone()))
        .collect();
    pts.push((line_value(&base), base.clone(), Rat::zero()));
    pts.sort_by(|x, y| x.0.cmp(&y.0));
    let k = pts.len();
    let b = pts.iter().position(|(_, p, _)| *p == base).expect("basepoint inserted");

    // q_t = net mass that crosses the gap between pts[t] and pts[t+1] on its
    // way to the basepoint (sign relative to the direction away from 0).
    let mut value = Rat::zero();
    let mut step = vec![Rat::zero(); k.saturating_sub(1)];
    for t in 0..k - 1 {
        let q = if t >= b {
            pts[t + 1..].iter().map(|(_, _, m)| m).sum::<Rat>()
        } else {
            -pts[..=t].iter().map(|(_, _, m)| m).sum::<Rat>()
        };
        let delta = &pts[t + 1].0 - &pts[t].0;
        value += &delta * q.abs();
        step[t] = delta * q.signum();
    }

    // Integrate the optimal slopes outward from the basepoint.
    let mut u = vec![Rat::zero(); k];
    for t in b..k - 1 {
        u[t + 1] = &u[t] + &step[t];
    }
    for t in (0..b).rev() {
        u[t] = &u[t + 1] - &step[t];
    }
    let witness = LipFunction::new(
        space,
        pts.iter()
            .zip(u)
            .map(|((_, p, _), val)| (p.clone(), val)),
        crate::rat_int(1),
    )
    .expect("dual witness is 1-Lipschitz by construction");
    NormCertificate { value, witness_g: witness, lp_status: LpStatus::Optimal }
}

fn finite_norm(v: &FreeVector) -> NormCertificate {
    let space = v.space().clone();
    let base = space.basepoint();
    let support: Vec<Point> = v.iter().map(|(p, _)| p.clone()).collect();
    let n = support.len();

    // Variables: u_i = y_i - z_i (free variables split for the simplex),
    // u at the basepoint fixed to zero by substitution.
    let mut c = Vec::with_capacity(2 * n);
    for p in &support {
        let a = v.coeff(p);
        c.push(a.clone());
        c.push(-a);
    }
    let mut rows: Vec<Vec<Rat>> = Vec::new();
    let mut rhs: Vec<Rat> = Vec::new();
    let mut all: Vec<Point> = support.clone();
    all.push(base.clone());
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            let d = space.distance(&all[i], &all[j]).expect("support points are members");
            // u_i - u_j <= d and u_j - u_i <= d, with the basepoint's u = 0.
            for sign in [1i64, -1] {
                let mut row = vec![Rat::zero(); 2 * n];
                let s = crate::rat_int(sign);
                if i < n {
                    row[2 * i] = s.clone();
                    row[2 * i + 1] = -s.clone();
                }
                if j < n {
                    row[2 * j] = -s.clone();
                    row[2 * j + 1] = s.clone();
                }
                rows.push(row);
                rhs.push(d.clone());
            }
        }
    }
    let sol = simplex::maximize(&c, &rows, &rhs)
        .expect("free-norm dual is feasible and bounded");
    let witness = LipFunction::new(
        space,
        support.iter().enumerate().map(|(i, p)| {
            (p.clone(), &sol.solution[2 * i] - &sol.solution[2 * i + 1])
        }),
        crate::rat_int(1),
    )
    .expect("simplex solution satisfies the Lipschitz constraints");
    NormCertificate { value: sol.objective, witness_g: witness, lp_status: LpStatus::Optimal }
}

/// The linearized action T_f on a free vector: sum a_i delta_{f(x_i)}, with
/// collided images recombined and basepoint images dropped (f need not be
/// injective).
pub fn linearize_apply(f: &DynMap, v: &FreeVector) -> Result<FreeVector> {
    if f.space() != v.space() {
        return Err(Error::WrongSpace);
    }
    let mut terms = Vec::with_capacity(v.support_len());
    for (p, a) in v.iter() {
        terms.push((f.apply(p)?, a.clone()));
    }
    FreeVector::new(v.space().clone(), terms)
}

/// Max over the given pairs of the free norm of T_f applied to the pair's
/// molecule: a certified lower bound for the operator norm of T_f, never
/// exceeding the Lipschitz constant of f.
pub fn operator_norm_probe(f: &DynMap, pairs: &[(Point, Point)]) -> Result<Rat> {
    let mut best = Rat::zero();
    for (x, y) in pairs {
        let m = molecule(f.space(), x, y)?;
        let img = linearize_apply(f, &m)?;
        let norm = free_norm(&img).value;
        if norm > best {
            best = norm;
        }
    }
    Ok(best)
}
