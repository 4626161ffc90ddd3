//! Exact pointed metric spaces: the middle-third Cantor set with basepoint 0,
//! the interval [-1,1] with basepoint 0, and arbitrary finite metric spaces
//! used as oracle substrates.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::{rat_int, third_pow, Rat};

/// The constant continuation of a Cantor point's digit sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tail {
    AllZero,
    AllTwo,
}

/// A point of the middle-third Cantor set, stored as a finite {0,2} digit
/// prefix followed by a constant tail.
///
/// Canonical form (enforced by every constructor): an `AllZero` tail never
/// follows a prefix ending in 0, and an `AllTwo` tail never follows a prefix
/// ending in 2, so each representable value has exactly one representation.
/// This class contains every finite ternary point, every endpoint of a
/// removed middle third, and the fixed points 0 and 1; it is closed under
/// both shift maps.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CantorPoint {
    prefix: Vec<u8>,
    tail: Tail,
}

impl CantorPoint {
    /// Canonicalizing constructor from an arbitrary {0,2} prefix and tail.
    pub fn new(mut prefix: Vec<u8>, tail: Tail) -> Result<Self> {
        for &d in &prefix {
            if d != 0 && d != 2 {
                return Err(Error::InvalidDigit(d));
            }
        }
        let strip = match tail {
            Tail::AllZero => 0,
            Tail::AllTwo => 2,
        };
        while prefix.last() == Some(&strip) {
            prefix.pop();
        }
        Ok(CantorPoint { prefix, tail })
    }

    /// The point with the given finite digit sequence (all later digits 0).
    pub fn from_digits(digits: &[u8]) -> Result<Self> {
        Self::new(digits.to_vec(), Tail::AllZero)
    }

    /// The basepoint 0.
    pub fn zero() -> Self {
        CantorPoint { prefix: Vec::new(), tail: Tail::AllZero }
    }

    /// The point 1 = 0.222... in ternary.
    pub fn one() -> Self {
        CantorPoint { prefix: Vec::new(), tail: Tail::AllTwo }
    }

    pub fn prefix(&self) -> &[u8] {
        &self.prefix
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    /// The n-th ternary digit (1-indexed); digits past the prefix come from
    /// the constant tail.
    pub fn digit(&self, n: usize) -> u8 {
        debug_assert!(n >= 1);
        if n <= self.prefix.len() {
            self.prefix[n - 1]
        } else {
            match self.tail {
                Tail::AllZero => 0,
                Tail::AllTwo => 2,
            }
        }
    }

    /// Exact value sum s_n / 3^n in [0,1]; the AllTwo tail is summed in
    /// closed form (a geometric series contributing 3^-len).
    pub fn value(&self) -> Rat {
        let mut acc = Rat::zero();
        for (i, &d) in self.prefix.iter().enumerate() {
            if d == 2 {
                acc += third_pow(i as u32 + 1) * rat_int(2);
            }
        }
        if self.tail == Tail::AllTwo {
            acc += third_pow(self.prefix.len() as u32);
        }
        acc
    }

    /// Drops the first `m` digits (the backward shift applied m times).
    pub fn shift_left(&self, m: usize) -> Self {
        if m >= self.prefix.len() {
            CantorPoint { prefix: Vec::new(), tail: self.tail }
        } else {
            CantorPoint { prefix: self.prefix[m..].to_vec(), tail: self.tail }
        }
    }

    /// Prepends `m` zero digits (the forward shift applied m times; divides
    /// the value by 3^m).
    pub fn prepend_zeros(&self, m: usize) -> Self {
        self.prepend(&vec![0u8; m])
    }

    /// Prepends an arbitrary {0,2} digit block.
    pub fn prepend(&self, digits: &[u8]) -> Self {
        let mut prefix = Vec::with_capacity(digits.len() + self.prefix.len());
        prefix.extend_from_slice(digits);
        prefix.extend_from_slice(&self.prefix);
        CantorPoint::new(prefix, self.tail).expect("digits validated by caller")
    }
}

/// Digit-lexicographic order, which coincides with the numeric order of the
/// values (digits are restricted to {0,2}, so a first-difference dominates
/// every later digit).
impl Ord for CantorPoint {
    fn cmp(&self, other: &Self) -> Ordering {
        let upto = self.prefix.len().max(other.prefix.len()) + 1;
        for n in 1..=upto {
            match self.digit(n).cmp(&other.digit(n)) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for CantorPoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Text form: the prefix digits, with suffix "~2" when the tail is all twos.
/// The basepoint prints as "0" and the point 1 as "~2".
impl fmt::Display for CantorPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.prefix.is_empty() && self.tail == Tail::AllZero {
            return write!(f, "0");
        }
        for &d in &self.prefix {
            write!(f, "{d}")?;
        }
        if self.tail == Tail::AllTwo {
            write!(f, "~2")?;
        }
        Ok(())
    }
}

impl FromStr for CantorPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (digits, tail) = match s.strip_suffix("~2") {
            Some(rest) => (rest, Tail::AllTwo),
            None => (s, Tail::AllZero),
        };
        let mut prefix = Vec::with_capacity(digits.len());
        for c in digits.chars() {
            match c {
                '0' => prefix.push(0),
                '2' => prefix.push(2),
                _ => {
                    return Err(Error::Parse(format!(
                        "bad Cantor point literal '{s}': digit '{c}'"
                    )))
                }
            }
        }
        CantorPoint::new(prefix, tail)
    }
}

/// A point of the interval [-1,1], an arbitrary exact rational.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IntervalPoint {
    value: Rat,
}

impl IntervalPoint {
    pub fn new(value: Rat) -> Result<Self> {
        if value.abs() > rat_int(1) {
            return Err(Error::OutOfRange(format!(
                "{} is outside [-1,1]",
                crate::fmt_rat(&value)
            )));
        }
        Ok(IntervalPoint { value })
    }

    pub fn zero() -> Self {
        IntervalPoint { value: Rat::zero() }
    }

    pub fn value(&self) -> &Rat {
        &self.value
    }

    /// Whether the denominator is a power of two (membership in the dyadic
    /// test set).
    pub fn is_dyadic(&self) -> bool {
        let mut d = self.value.denom().clone();
        let two = BigInt::from(2);
        while (&d % &two).is_zero() {
            d /= &two;
        }
        d.is_one()
    }
}

impl fmt::Display for IntervalPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::fmt_rat(&self.value))
    }
}

impl FromStr for IntervalPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IntervalPoint::new(crate::parse_rat(s)?)
    }
}

/// The dyadic point num/2^exp, the dense test set for the tent-map criterion
/// instance.
pub fn dyadic_point(num: i64, exp: u32) -> Result<IntervalPoint> {
    let den = BigInt::from(2).pow(exp);
    if BigInt::from(num).abs() > den {
        return Err(Error::OutOfRange(format!("|{num}| > 2^{exp}")));
    }
    IntervalPoint::new(Rat::new(BigInt::from(num), den))
}

/// A finite metric space given by an explicit distance matrix; the
/// construction validates symmetry, positivity and the triangle inequality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteSpace {
    labels: Vec<String>,
    dist: Vec<Vec<Rat>>,
    basepoint: usize,
}

impl FiniteSpace {
    pub fn new(labels: Vec<String>, dist: Vec<Vec<Rat>>, basepoint: usize) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::BadMetric("empty point set".into()));
        }
        if basepoint >= n {
            return Err(Error::BadIndex(format!("basepoint {basepoint} out of range")));
        }
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(Error::BadMetric("distance matrix is not square".into()));
        }
        for i in 0..n {
            if !dist[i][i].is_zero() {
                return Err(Error::BadMetric(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                if dist[i][j] != dist[j][i] {
                    return Err(Error::BadMetric(format!("asymmetry at ({i},{j})")));
                }
                if i != j && dist[i][j] <= Rat::zero() {
                    return Err(Error::BadMetric(format!("non-positive entry at ({i},{j})")));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if dist[i][j] > &dist[i][k] + &dist[k][j] {
                        return Err(Error::BadMetric(format!(
                            "triangle inequality fails: d({i},{j}) > d({i},{k}) + d({k},{j})"
                        )));
                    }
                }
            }
        }
        Ok(FiniteSpace { labels, dist, basepoint })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn basepoint_index(&self) -> usize {
        self.basepoint
    }

    pub fn dist(&self, i: usize, j: usize) -> &Rat {
        &self.dist[i][j]
    }
}

/// A point of one of the three space kinds.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Point {
    Cantor(CantorPoint),
    Interval(IntervalPoint),
    Finite(usize),
}

impl Point {
    pub fn as_cantor(&self) -> Option<&CantorPoint> {
        match self {
            Point::Cantor(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_interval(&self) -> Option<&IntervalPoint> {
        match self {
            Point::Interval(p) => Some(p),
            _ => None,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Cantor(p) => write!(f, "{p}"),
            Point::Interval(p) => write!(f, "{p}"),
            Point::Finite(i) => write!(f, "#{i}"),
        }
    }
}

impl From<CantorPoint> for Point {
    fn from(p: CantorPoint) -> Self {
        Point::Cantor(p)
    }
}

impl From<IntervalPoint> for Point {
    fn from(p: IntervalPoint) -> Self {
        Point::Interval(p)
    }
}

/// A pointed metric space: the ambient metric together with the distinguished
/// basepoint 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PointedSpace {
    Cantor,
    Interval,
    Finite(FiniteSpace),
}

impl PointedSpace {
    pub fn contains(&self, p: &Point) -> bool {
        match (self, p) {
            (PointedSpace::Cantor, Point::Cantor(_)) => true,
            (PointedSpace::Interval, Point::Interval(_)) => true,
            (PointedSpace::Finite(fs), Point::Finite(i)) => *i < fs.len(),
            _ => false,
        }
    }

    pub fn basepoint(&self) -> Point {
        match self {
            PointedSpace::Cantor => Point::Cantor(CantorPoint::zero()),
            PointedSpace::Interval => Point::Interval(IntervalPoint::zero()),
            PointedSpace::Finite(fs) => Point::Finite(fs.basepoint_index()),
        }
    }

    /// Exact distance between two member points.
    pub fn distance(&self, p: &Point, q: &Point) -> Result<Rat> {
        if !self.contains(p) || !self.contains(q) {
            return Err(Error::WrongSpace);
        }
        Ok(match (self, p, q) {
            (PointedSpace::Cantor, Point::Cantor(a), Point::Cantor(b)) => {
                (a.value() - b.value()).abs()
            }
            (PointedSpace::Interval, Point::Interval(a), Point::Interval(b)) => {
                (a.value() - b.value()).abs()
            }
            (PointedSpace::Finite(fs), Point::Finite(i), Point::Finite(j)) => {
                fs.dist(*i, *j).clone()
            }
            _ => unreachable!("membership checked above"),
        })
    }

    /// Distance to the basepoint.
    pub fn norm(&self, p: &Point) -> Result<Rat> {
        self.distance(p, &self.basepoint())
    }
}

impl fmt::Display for PointedSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointedSpace::Cantor => write!(f, "cantor"),
            PointedSpace::Interval => write!(f, "interval"),
            PointedSpace::Finite(fs) => write!(f, "finite({})", fs.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;

    #[test]
    fn digit_construction() {
        assert_eq!(CantorPoint::from_digits(&[]).unwrap().value(), rat(0, 1));
        assert_eq!(CantorPoint::from_digits(&[2]).unwrap().value(), rat(2, 3));
        assert_eq!(CantorPoint::from_digits(&[0, 2]).unwrap().value(), rat(2, 9));
        assert!(matches!(
            CantorPoint::from_digits(&[1]),
            Err(Error::InvalidDigit(1))
        ));
    }

    #[test]
    fn values_with_tails() {
        let a1 = CantorPoint::new(vec![0], Tail::AllTwo).unwrap();
        assert_eq!(a1.value(), rat(1, 3));
        assert_eq!(CantorPoint::one().value(), rat(1, 1));
        // Trailing digits matching the tail are stripped.
        let p = CantorPoint::new(vec![2, 0], Tail::AllZero).unwrap();
        assert_eq!(p.value(), rat(2, 3));
        assert_eq!(p, CantorPoint::from_digits(&[2]).unwrap());
        let q = CantorPoint::new(vec![0, 2, 2], Tail::AllTwo).unwrap();
        assert_eq!(q.prefix(), &[0]);
    }

    #[test]
    fn canonicalization_is_value_preserving() {
        // [0,2,2,2,...] equals [0]~2 = 1/3; build the long way and compare.
        let long = CantorPoint::new(vec![0, 2, 2, 2, 2], Tail::AllTwo).unwrap();
        let short = CantorPoint::new(vec![0], Tail::AllTwo).unwrap();
        assert_eq!(long, short);
        assert_eq!(long.value(), rat(1, 3));
    }

    #[test]
    fn ordering_matches_values() {
        let pts = [
            CantorPoint::zero(),
            CantorPoint::from_digits(&[0, 0, 2]).unwrap(),
            CantorPoint::new(vec![0], Tail::AllTwo).unwrap(),
            CantorPoint::from_digits(&[2]).unwrap(),
            CantorPoint::one(),
        ];
        for w in pts.windows(2) {
            assert!(w[0] < w[1], "{} < {}", w[0], w[1]);
            assert!(w[0].value() < w[1].value());
        }
    }

    #[test]
    fn cantor_distance_examples() {
        let space = PointedSpace::Cantor;
        let b1 = Point::Cantor(CantorPoint::from_digits(&[2]).unwrap());
        let a1 = Point::Cantor(CantorPoint::new(vec![0], Tail::AllTwo).unwrap());
        assert_eq!(space.distance(&b1, &a1).unwrap(), rat(1, 3));
        assert_eq!(space.distance(&b1, &b1).unwrap(), rat(0, 1));
        assert!(space
            .distance(&b1, &Point::Interval(IntervalPoint::zero()))
            .is_err());
    }

    #[test]
    fn interval_distance_examples() {
        let space = PointedSpace::Interval;
        let one = Point::Interval(IntervalPoint::new(rat(1, 1)).unwrap());
        let neg = Point::Interval(IntervalPoint::new(rat(-1, 1)).unwrap());
        assert_eq!(space.distance(&one, &one).unwrap(), rat(0, 1));
        assert_eq!(space.distance(&one, &neg).unwrap(), rat(2, 1));
    }

    #[test]
    fn dyadic_points() {
        assert_eq!(dyadic_point(1, 1).unwrap().value(), &rat(1, 2));
        assert_eq!(dyadic_point(-3, 2).unwrap().value(), &rat(-3, 4));
        assert_eq!(dyadic_point(4, 2).unwrap().value(), &rat(1, 1));
        assert!(dyadic_point(5, 2).is_err());
        assert!(dyadic_point(1, 1).unwrap().is_dyadic());
        assert!(!IntervalPoint::new(rat(1, 3)).unwrap().is_dyadic());
    }

    #[test]
    fn finite_space_validation() {
        let labels = vec!["0".into(), "A".into(), "B".into()];
        let good = vec![
            vec![rat(0, 1), rat(1, 1), rat(1, 1)],
            vec![rat(1, 1), rat(0, 1), rat(1, 1)],
            vec![rat(1, 1), rat(1, 1), rat(0, 1)],
        ];
        assert!(FiniteSpace::new(labels.clone(), good, 0).is_ok());

        // d(A,B) = 5 > d(A,0) + d(0,B) = 2 breaks the triangle inequality.
        let bad = vec![
            vec![rat(0, 1), rat(1, 1), rat(1, 1)],
            vec![rat(1, 1), rat(0, 1), rat(5, 1)],
            vec![rat(1, 1), rat(5, 1), rat(0, 1)],
        ];
        assert!(matches!(
            FiniteSpace::new(labels, bad, 0),
            Err(Error::BadMetric(_))
        ));
    }

    #[test]
    fn point_literals_round_trip() {
        for s in ["0", "2", "02", "~2", "02~2", "200"] {
            let p: CantorPoint = s.parse().unwrap();
            let printed = p.to_string();
            let q: CantorPoint = printed.parse().unwrap();
            assert_eq!(p, q);
        }
        // Canonicalization may shorten the literal but never change the value.
        let p: CantorPoint = "200".parse().unwrap();
        assert_eq!(p.to_string(), "2");
        assert!("01".parse::<CantorPoint>().is_err());
        assert_eq!("02~2".parse::<CantorPoint>().unwrap().value(), rat(1, 3));

        let x: IntervalPoint = "-3/4".parse().unwrap();
        assert_eq!(x.to_string(), "-3/4");
        assert!("5/4".parse::<IntervalPoint>().is_err());
    }

    #[test]
    fn shifts_on_digits() {
        let p = CantorPoint::new(vec![0], Tail::AllTwo).unwrap(); // 1/3
        assert_eq!(p.shift_left(1), CantorPoint::one());
        let b1 = CantorPoint::from_digits(&[2]).unwrap(); // 2/3
        assert_eq!(b1.shift_left(1), CantorPoint::zero());
        assert_eq!(b1.prepend_zeros(1).value(), rat(2, 9));
        assert_eq!(CantorPoint::zero().prepend_zeros(3), CantorPoint::zero());
    }
}
