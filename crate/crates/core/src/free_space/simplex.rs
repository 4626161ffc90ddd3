//! A small dense simplex solver over exact rationals, used for the free-norm
//! dual on arbitrary finite metric spaces.
//!
//! Solves: maximize c.x subject to A x <= b, x >= 0, with b >= 0 (so the
//! all-slack basis is feasible and no phase-one is needed). Bland's rule
//! guarantees termination despite degeneracy. Problem sizes here are tiny
//! (tens of variables), so a dense tableau is the simplest correct choice.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::Rat;

pub struct SimplexSolution {
    pub objective: Rat,
    /// Values of the n original (non-slack) variables.
    pub solution: Vec<Rat>,
}

pub fn maximize(c: &[Rat], a: &[Vec<Rat>], b: &[Rat]) -> Result<SimplexSolution> {
    let n = c.len();
    let m = a.len();
    assert_eq!(b.len(), m);
    for row in a {
        assert_eq!(row.len(), n);
    }
    if b.iter().any(|v| v.is_negative()) {
        return Err(Error::Unsupported("simplex needs b >= 0".into()));
    }

    // Tableau rows: m constraint rows over n structural + m slack columns,
    // with the right-hand side in the last column; the objective row keeps
    // reduced costs for the maximization.
    let width = n + m + 1;
    let mut t = vec![vec![Rat::zero(); width]; m + 1];
    for i in 0..m {
        for j in 0..n {
            t[i][j] = a[i][j].clone();
        }
        t[i][n + i] = Rat::one();
        t[i][width - 1] = b[i].clone();
    }
    for j in 0..n {
        t[m][j] = -c[j].clone();
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    loop {
        // Bland: entering column = lowest index with negative objective-row
        // entry (i.e. positive reduced cost for the maximization).
        let Some(enter) = (0..n + m).find(|&j| t[m][j].is_negative()) else {
            break;
        };
        // Ratio test, ties broken by the lowest basis variable index.
        let mut leave: Option<usize> = None;
        let mut best: Option<Rat> = None;
        for i in 0..m {
            if t[i][enter].is_positive() {
                let ratio = &t[i][width - 1] / &t[i][enter];
                let better = match &best {
                    None => true,
                    Some(cur) => {
                        ratio < *cur
                            || (ratio == *cur
                                && basis[i] < basis[leave.expect("set with best")])
                    }
                };
                if better {
                    best = Some(ratio);
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            return Err(Error::Unsupported("unbounded linear program".into()));
        };

        // Pivot.
        let pivot = t[leave][enter].clone();
        for v in t[leave].iter_mut() {
            *v /= &pivot;
        }
        for i in 0..=m {
            if i != leave && !t[i][enter].is_zero() {
                let factor = t[i][enter].clone();
                for j in 0..width {
                    let delta = &factor * &t[leave][j];
                    t[i][j] -= delta;
                }
            }
        }
        basis[leave] = enter;
    }

    let mut solution = vec![Rat::zero(); n];
    for i in 0..m {
        if basis[i] < n {
            solution[basis[i]] = t[i][width - 1].clone();
        }
    }
    Ok(SimplexSolution { objective: t[m][width - 1].clone(), solution })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;

    #[test]
    fn textbook_instance() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18: optimum 36 at (2,6).
        let c = vec![rat(3, 1), rat(5, 1)];
        let a = vec![
            vec![rat(1, 1), rat(0, 1)],
            vec![rat(0, 1), rat(2, 1)],
            vec![rat(3, 1), rat(2, 1)],
        ];
        let b = vec![rat(4, 1), rat(12, 1), rat(18, 1)];
        let sol = maximize(&c, &a, &b).unwrap();
        assert_eq!(sol.objective, rat(36, 1));
        assert_eq!(sol.solution, vec![rat(2, 1), rat(6, 1)]);
    }

    #[test]
    fn degenerate_instance_terminates() {
        // Degenerate vertex at the origin-side; Bland's rule must not cycle.
        let c = vec![rat(1, 1), rat(1, 1)];
        let a = vec![
            vec![rat(1, 1), rat(1, 1)],
            vec![rat(1, 1), rat(0, 1)],
            vec![rat(0, 1), rat(1, 1)],
        ];
        let b = vec![rat(1, 1), rat(1, 1), rat(0, 1)];
        let sol = maximize(&c, &a, &b).unwrap();
        assert_eq!(sol.objective, rat(1, 1));
    }

    #[test]
    fn unbounded_detected() {
        let c = vec![rat(1, 1)];
        let a = vec![vec![rat(-1, 1)]];
        let b = vec![rat(1, 1)];
        assert!(maximize(&c, &a, &b).is_err());
    }

    #[test]
    fn exact_fractions_survive() {
        // max x s.t. 3x <= 1 gives exactly 1/3.
        let sol = maximize(&[rat(1, 1)], &[vec![rat(3, 1)]], &[rat(1, 1)]).unwrap();
        assert_eq!(sol.objective, rat(1, 3));
    }
}
