//! The concrete Lipschitz self-maps: backward shift sigma and forward shift w
//! on the Cantor set, zig-zag maps Z_p on [0,1], the anti-symmetric tent map
//! f and the halving map g on [-1,1]. Every map carries a symbolic normal
//! form so exact evaluation, exact Lipschitz constants, closed-form powers
//! and the collapse rules for compositions are all available.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Pow, Signed};

use crate::error::{Error, Result};
use crate::metric_spaces::{Point, PointedSpace};
use crate::{rat_int, Rat};

/// An opaque map used only as an oracle/extension escape hatch; excluded from
/// exact return-set computation.
#[derive(Clone)]
pub struct GenericMap {
    pub label: String,
    pub eval: Arc<dyn Fn(&Point) -> Result<Point> + Send + Sync>,
    pub lip_bound: Rat,
}

impl fmt::Debug for GenericMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericMap")
            .field("label", &self.label)
            .field("lip_bound", &self.lip_bound)
            .finish()
    }
}

impl PartialEq for GenericMap {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label && self.lip_bound == other.lip_bound
    }
}

/// Symbolic normal form of a map.
#[derive(Debug, Clone, PartialEq)]
pub enum MapForm {
    Identity,
    /// Backward shift power sigma^m on the Cantor set (m >= 1).
    SigmaPow(u64),
    /// Forward shift power w^l on the Cantor set (l >= 1); w(t) = t/3.
    WPow(u64),
    /// Zig-zag map Z_p on [0,1] (p >= 1).
    Zigzag(u64),
    /// Tent power f^j on [-1,1] (j >= 1); f^j = Z_{2^j} on [0,1], odd on the
    /// whole interval.
    TentPow(u64),
    /// Halving power g^l on [-1,1] (l >= 1); g(x) = x/2.
    HalvePow(u64),
    Generic(GenericMap),
}

/// A Lipschitz self-map fixing the basepoint, tagged with its space.
#[derive(Debug, Clone, PartialEq)]
pub struct DynMap {
    space: PointedSpace,
    form: MapForm,
}

impl DynMap {
    pub fn identity(space: PointedSpace) -> Self {
        DynMap { space, form: MapForm::Identity }
    }

    /// sigma^m; m = 0 normalizes to the identity.
    pub fn sigma_pow(m: u64) -> Self {
        let form = if m == 0 { MapForm::Identity } else { MapForm::SigmaPow(m) };
        DynMap { space: PointedSpace::Cantor, form }
    }

    /// w^l; l = 0 normalizes to the identity.
    pub fn w_pow(l: u64) -> Self {
        let form = if l == 0 { MapForm::Identity } else { MapForm::WPow(l) };
        DynMap { space: PointedSpace::Cantor, form }
    }

    /// The p-th zig-zag map on [0,1] (Z_1 is the identity restricted to
    /// [0,1], kept in zig-zag form because of the restricted domain).
    pub fn zigzag(p: u64) -> Result<Self> {
        if p == 0 {
            return Err(Error::OutOfRange("zig-zag index must be >= 1".into()));
        }
        Ok(DynMap { space: PointedSpace::Interval, form: MapForm::Zigzag(p) })
    }

    /// f^j for the anti-symmetric tent map f; j = 0 normalizes to identity.
    pub fn tent_pow(j: u64) -> Self {
        let form = if j == 0 { MapForm::Identity } else { MapForm::TentPow(j) };
        DynMap { space: PointedSpace::Interval, form }
    }

    /// g^l for the halving map g(x) = x/2; l = 0 normalizes to identity.
    pub fn halve_pow(l: u64) -> Self {
        let form = if l == 0 { MapForm::Identity } else { MapForm::HalvePow(l) };
        DynMap { space: PointedSpace::Interval, form }
    }

    pub fn generic<F>(space: PointedSpace, label: impl Into<String>, lip_bound: Rat, eval: F) -> Self
    where
        F: Fn(&Point) -> Result<Point> + Send + Sync + 'static,
    {
        DynMap {
            space,
            form: MapForm::Generic(GenericMap {
                label: label.into(),
                eval: Arc::new(eval),
                lip_bound,
            }),
        }
    }

    pub fn space(&self) -> &PointedSpace {
        &self.space
    }

    pub fn form(&self) -> &MapForm {
        &self.form
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.form, MapForm::Identity)
    }

    pub fn is_generic(&self) -> bool {
        matches!(self.form, MapForm::Generic(_))
    }

    /// Exact image of a point.
    pub fn apply(&self, p: &Point) -> Result<Point> {
        if !self.space.contains(p) {
            return Err(Error::WrongSpace);
        }
        match (&self.form, p) {
            (MapForm::Identity, _) => Ok(p.clone()),
            (MapForm::SigmaPow(m), Point::Cantor(c)) => {
                let m = (*m).min(c.prefix().len() as u64) as usize;
                Ok(Point::Cantor(c.shift_left(m)))
            }
            (MapForm::WPow(l), Point::Cantor(c)) => {
                Ok(Point::Cantor(c.prepend_zeros(*l as usize)))
            }
            (MapForm::Zigzag(zp), Point::Interval(x)) => {
                let y = zigzag_eval_big(&BigInt::from(*zp), x.value())?;
                Ok(Point::Interval(crate::metric_spaces::IntervalPoint::new(y)?))
            }
            (MapForm::TentPow(j), Point::Interval(x)) => {
                let y = tent_pow_eval(*j, x.value())?;
                Ok(Point::Interval(crate::metric_spaces::IntervalPoint::new(y)?))
            }
            (MapForm::HalvePow(l), Point::Interval(x)) => {
                let y = x.value() / pow2_rat(*l);
                Ok(Point::Interval(crate::metric_spaces::IntervalPoint::new(y)?))
            }
            (MapForm::Generic(g), _) => {
                let out = (g.eval)(p)?;
                if !self.space.contains(&out) {
                    return Err(Error::WrongSpace);
                }
                Ok(out)
            }
            _ => Err(Error::WrongSpace),
        }
    }

    /// n-fold iteration using closed forms where the normal form provides
    /// them; generic maps fall back to n successive applications.
    pub fn iterate(&self, n: u64, p: &Point) -> Result<Point> {
        if !self.space.contains(p) {
            return Err(Error::WrongSpace);
        }
        if n == 0 {
            return Ok(p.clone());
        }
        match (&self.form, p) {
            (MapForm::Identity, _) => Ok(p.clone()),
            (MapForm::SigmaPow(m), Point::Cantor(c)) => {
                let total = (*m as u128).saturating_mul(n as u128);
                let eff = total.min(c.prefix().len() as u128) as usize;
                Ok(Point::Cantor(c.shift_left(eff)))
            }
            (MapForm::WPow(l), Point::Cantor(c)) => {
                let total = checked_exp(*l, n)?;
                Ok(Point::Cantor(c.prepend_zeros(total as usize)))
            }
            (MapForm::Zigzag(zp), Point::Interval(x)) => {
                let big = BigInt::from(*zp).pow(n);
                let y = zigzag_eval_big(&big, x.value())?;
                Ok(Point::Interval(crate::metric_spaces::IntervalPoint::new(y)?))
            }
            (MapForm::TentPow(j), Point::Interval(x)) => {
                let total = checked_exp(*j, n)?;
                let y = tent_pow_eval(total, x.value())?;
                Ok(Point::Interval(crate::metric_spaces::IntervalPoint::new(y)?))
            }
            (MapForm::HalvePow(l), Point::Interval(x)) => {
                let total = checked_exp(*l, n)?;
                let y = x.value() / pow2_rat(total);
                Ok(Point::Interval(crate::metric_spaces::IntervalPoint::new(y)?))
            }
            (MapForm::Generic(_), _) => {
                let mut cur = p.clone();
                for _ in 0..n {
                    cur = self.apply(&cur)?;
                }
                Ok(cur)
            }
            _ => Err(Error::WrongSpace),
        }
    }

    /// The n-th power as a map in normal form.
    pub fn pow(&self, n: u64) -> Result<DynMap> {
        if n == 0 {
            return Ok(DynMap::identity(self.space.clone()));
        }
        let form = match &self.form {
            MapForm::Identity => MapForm::Identity,
            MapForm::SigmaPow(m) => MapForm::SigmaPow(checked_exp(*m, n)?),
            MapForm::WPow(l) => MapForm::WPow(checked_exp(*l, n)?),
            MapForm::Zigzag(p) => {
                let mut acc: u64 = 1;
                for _ in 0..n {
                    acc = acc
                        .checked_mul(*p)
                        .ok_or_else(|| Error::OutOfRange("zig-zag power overflow".into()))?;
                }
                MapForm::Zigzag(acc)
            }
            MapForm::TentPow(j) => MapForm::TentPow(checked_exp(*j, n)?),
            MapForm::HalvePow(l) => MapForm::HalvePow(checked_exp(*l, n)?),
            MapForm::Generic(g) => {
                let inner = self.clone();
                let bound = g.lip_bound.clone();
                let mut lip = Rat::one();
                for _ in 0..n {
                    lip *= &bound;
                }
                MapForm::Generic(GenericMap {
                    label: format!("({})^{}", g.label, n),
                    eval: Arc::new(move |p: &Point| inner.iterate(n, p)),
                    lip_bound: lip,
                })
            }
        };
        Ok(DynMap { space: self.space.clone(), form })
    }

    /// Exact Lipschitz constant for the closed forms; the declared upper
    /// bound for generic maps.
    pub fn lipschitz_constant(&self) -> Rat {
        match &self.form {
            MapForm::Identity => Rat::one(),
            MapForm::SigmaPow(m) => Rat::from(BigInt::from(3).pow(*m)),
            MapForm::WPow(l) => Rat::new(BigInt::one(), BigInt::from(3).pow(*l)),
            MapForm::Zigzag(p) => rat_int(*p as i64),
            MapForm::TentPow(j) => Rat::from(BigInt::from(2).pow(*j)),
            MapForm::HalvePow(l) => Rat::new(BigInt::one(), BigInt::from(2).pow(*l)),
            MapForm::Generic(g) => g.lip_bound.clone(),
        }
    }
}

/// Composition outer . inner in normal form: the shift and tent collapse
/// tables (sigma^m . w^l and f^m . g^l reduce to a single power or the
/// identity), same-family powers add (zig-zag indices multiply), and only
/// combinations with no rule fall back to a generic composite whose declared
/// bound is the product of the factors' bounds.
pub fn compose(outer: &DynMap, inner: &DynMap) -> Result<DynMap> {
    if outer.space != inner.space {
        return Err(Error::WrongSpace);
    }
    let space = outer.space.clone();
    use MapForm::*;
    let form = match (&outer.form, &inner.form) {
        (Identity, f) => f.clone(),
        (f, Identity) => f.clone(),
        (SigmaPow(a), SigmaPow(b)) => SigmaPow(a + b),
        (WPow(a), WPow(b)) => WPow(a + b),
        (SigmaPow(m), WPow(l)) => match m.cmp(l) {
            std::cmp::Ordering::Greater => SigmaPow(m - l),
            std::cmp::Ordering::Equal => Identity,
            std::cmp::Ordering::Less => WPow(l - m),
        },
        (TentPow(a), TentPow(b)) => TentPow(a + b),
        (HalvePow(a), HalvePow(b)) => HalvePow(a + b),
        (TentPow(m), HalvePow(l)) => match m.cmp(l) {
            std::cmp::Ordering::Greater => TentPow(m - l),
            std::cmp::Ordering::Equal => Identity,
            std::cmp::Ordering::Less => HalvePow(l - m),
        },
        (Zigzag(p), Zigzag(q)) => match p.checked_mul(*q) {
            Some(pq) => Zigzag(pq),
            None => generic_composite(outer, inner),
        },
        // On the zig-zag domain [0,1] the tent power acts as Z_{2^j}, so both
        // mixed orders with a zig-zag collapse multiplicatively.
        (TentPow(j), Zigzag(p)) | (Zigzag(p), TentPow(j)) => {
            match 1u64.checked_shl(*j as u32).and_then(|t| t.checked_mul(*p)) {
                Some(pq) if *j < 64 => Zigzag(pq),
                _ => generic_composite(outer, inner),
            }
        }
        _ => generic_composite(outer, inner),
    };
    Ok(DynMap { space, form })
}

fn generic_composite(outer: &DynMap, inner: &DynMap) -> MapForm {
    let label = format!("{}.{}", outer, inner);
    let o = outer.clone();
    let i = inner.clone();
    MapForm::Generic(GenericMap {
        label,
        eval: Arc::new(move |p: &Point| o.apply(&i.apply(p)?)),
        lip_bound: outer.lipschitz_constant() * inner.lipschitz_constant(),
    })
}

/// Z_p(x) for x in [0,1]: on [2k/p, (2k+1)/p] the value is px - 2k, on
/// [(2k+1)/p, (2k+2)/p] it is -px + 2k + 2. Both pieces agree at shared
/// breakpoints, so evaluation reduces px modulo 2 and folds.
pub fn zigzag_eval(p: u64, x: &Rat) -> Result<Rat> {
    if p == 0 {
        return Err(Error::OutOfRange("zig-zag index must be >= 1".into()));
    }
    zigzag_eval_big(&BigInt::from(p), x)
}

pub(crate) fn zigzag_eval_big(p: &BigInt, x: &Rat) -> Result<Rat> {
    if x.is_negative() || *x > rat_int(1) {
        return Err(Error::DomainError(format!(
            "zig-zag input {} outside [0,1]",
            crate::fmt_rat(x)
        )));
    }
    let y = x * Rat::from(p.clone());
    let k = (&y / rat_int(2)).floor().to_integer();
    let r = y - Rat::from(k * BigInt::from(2));
    if r <= Rat::one() {
        Ok(r)
    } else {
        Ok(rat_int(2) - r)
    }
}

/// f^j(x) on [-1,1]: Z_{2^j} on [0,1], extended as an odd function.
pub(crate) fn tent_pow_eval(j: u64, x: &Rat) -> Result<Rat> {
    if x.abs() > rat_int(1) {
        return Err(Error::DomainError(format!(
            "tent input {} outside [-1,1]",
            crate::fmt_rat(x)
        )));
    }
    if j >= (1u64 << 24) {
        return Err(Error::OutOfRange("tent power exponent too large".into()));
    }
    let p = BigInt::one() << (j as usize);
    if x.is_negative() {
        Ok(-zigzag_eval_big(&p, &-x.clone())?)
    } else {
        Ok(zigzag_eval_big(&p, x)?)
    }
}

fn pow2_rat(k: u64) -> Rat {
    Rat::from(BigInt::one() << (k.min(1 << 24) as usize))
}

fn checked_exp(a: u64, b: u64) -> Result<u64> {
    a.checked_mul(b)
        .filter(|&t| t < (1u64 << 24))
        .ok_or_else(|| Error::OutOfRange("iteration exponent too large".into()))
}

impl fmt::Display for DynMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.form {
            MapForm::Identity => write!(f, "id"),
            MapForm::SigmaPow(m) => write!(f, "sigma^{m}"),
            MapForm::WPow(l) => write!(f, "w^{l}"),
            MapForm::Zigzag(p) => write!(f, "Z_{p}"),
            MapForm::TentPow(j) => write!(f, "tent^{j}"),
            MapForm::HalvePow(l) => write!(f, "halve^{l}"),
            MapForm::Generic(g) => write!(f, "{}", g.label),
        }
    }
}

/// Parses a map literal ("sigma^3", "w^2", "Z_5", "tent^2", "halve^4", "id");
/// bare names mean power 1. Shift literals imply the Cantor space and
/// interval literals imply [-1,1]; "id" takes its space from `space`, which
/// otherwise just cross-checks.
pub fn parse_map(s: &str, space: Option<&PointedSpace>) -> Result<DynMap> {
    let s = s.trim();
    let (name, power) = match s.split_once('^') {
        Some((n, p)) => {
            let pow: u64 = p
                .parse()
                .map_err(|_| Error::Parse(format!("bad power in map literal '{s}'")))?;
            (n, pow)
        }
        None => (s, 1),
    };
    let map = match name {
        "id" => match space {
            Some(sp) => DynMap::identity(sp.clone()),
            None => return Err(Error::Parse("'id' needs a space from context".into())),
        },
        "sigma" => DynMap::sigma_pow(power),
        "w" => DynMap::w_pow(power),
        "tent" => DynMap::tent_pow(power),
        "halve" => DynMap::halve_pow(power),
        _ => match name.strip_prefix("Z_").or_else(|| name.strip_prefix("z_")) {
            Some(idx) if !s.contains('^') => {
                let p: u64 = idx
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad zig-zag literal '{s}'")))?;
                DynMap::zigzag(p)?
            }
            _ => return Err(Error::Parse(format!("unknown map literal '{s}'"))),
        },
    };
    if let Some(sp) = space {
        if map.space() != sp {
            return Err(Error::WrongSpace);
        }
    }
    Ok(map)
}

/// An ordered tuple of maps on a common space; the product map is virtual
/// (the tuple is stored, never materialized).
#[derive(Debug, Clone, PartialEq)]
pub struct MapTuple {
    maps: Vec<DynMap>,
}

impl MapTuple {
    pub fn new(maps: Vec<DynMap>) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::OutOfRange("tuple needs at least one map".into()))?;
        let space = first.space().clone();
        if maps.iter().any(|m| *m.space() != space) {
            return Err(Error::WrongSpace);
        }
        Ok(MapTuple { maps })
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn maps(&self) -> &[DynMap] {
        &self.maps
    }

    pub fn space(&self) -> &PointedSpace {
        self.maps[0].space()
    }
}

impl fmt::Display for MapTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.maps.iter().map(|m| m.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}
