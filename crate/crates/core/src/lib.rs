//! Exact dynamics on the middle-third Cantor set and the interval [-1,1],
//! together with the Lipschitz-free-space machinery that turns those maps
//! into operators.
//!
//! The crate is organized bottom-up:
//!
//! * [`metric_spaces`]: exact pointed metric spaces (Cantor set with ternary
//!   {0,2} digit points, the interval with rational points, and arbitrary
//!   finite metric spaces for oracle testing).
//! * [`maps`]: the concrete Lipschitz self-maps (backward/forward shifts,
//!   zig-zag maps, the anti-symmetric tent map and halving) with exact
//!   evaluation, exact Lipschitz constants and a closed-form composition
//!   algebra.
//! * [`return_sets`]: exact disjoint return sets up to a horizon, and the
//!   transitivity / weak-mixing / filter predicates built on them.
//! * [`free_space`]: finitely supported elements of the Lipschitz-free space,
//!   the free norm via exact Kantorovich-Rubinstein duality, and the
//!   linearization functor sending a map to its operator.
//! * [`cantor_free`]: the identification of the free space over the Cantor
//!   set with l1 (gap enumeration, delta expansions, the shift operator as an
//!   infinite matrix with a closed-form fixed vector, and constructive
//!   operator return-set witnesses).
//! * [`criterion`]: a numeric verifier for the Lipschitz disjoint
//!   hypercyclicity criterion, with packaged shift-power and tent-power
//!   experiments.
//!
//! All arithmetic is exact (arbitrary-precision rationals); no floating point
//! is used anywhere in the computational paths.

pub mod cantor_free;
pub mod criterion;
pub mod error;
pub mod free_space;
pub mod maps;
pub mod metric_spaces;
pub mod return_sets;

pub use error::{Error, Result};

use num_bigint::BigInt;
use num_rational::BigRational;

/// Exact rational scalar used throughout the crate.
pub type Rat = BigRational;

/// Rational from an integer numerator and denominator. Panics on zero
/// denominator.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Rational from an integer.
pub fn rat_int(n: i64) -> Rat {
    Rat::from(BigInt::from(n))
}

/// 3^(-k) as an exact rational.
pub fn third_pow(k: u32) -> Rat {
    Rat::new(BigInt::from(1), BigInt::from(3).pow(k))
}

/// 2^(-k) as an exact rational.
pub fn half_pow(k: u32) -> Rat {
    Rat::new(BigInt::from(1), BigInt::from(2).pow(k))
}

/// base^k as an exact rational.
pub fn pow_rat(base: &Rat, k: u32) -> Rat {
    Rat::new(base.numer().pow(k), base.denom().pow(k))
}

/// Formats a rational as "p/q" (or "p" when the denominator is 1), the
/// exact-fraction text form used in all emitted reports.
pub fn fmt_rat(r: &Rat) -> String {
    use num_traits::One;
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses the "p/q" text form accepted everywhere a rational can appear.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = num
        .parse()
        .map_err(|_| Error::Parse(format!("bad numerator in fraction '{s}'")))?;
    let d: BigInt = den
        .parse()
        .map_err(|_| Error::Parse(format!("bad denominator in fraction '{s}'")))?;
    if d == BigInt::from(0) {
        return Err(Error::Parse(format!("zero denominator in fraction '{s}'")));
    }
    Ok(Rat::new(n, d))
}
