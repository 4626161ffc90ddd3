//! Independent oracles shared by the integration suites. Both deliberately
//! avoid the library's own algorithms: the free norm is recomputed as a
//! primal min-cost flow by enumerating spanning trees, and return-set
//! membership is recomputed by scanning raw digit strings.

use free_dyn::Rat;
use num_traits::{Signed, Zero};

/// Decodes a Pruefer sequence over n labeled nodes into the tree's edges.
fn prufer_decode(n: usize, seq: &[usize]) -> Vec<(usize, usize)> {
    assert_eq!(seq.len() + 2, n);
    let mut degree = vec![1usize; n];
    for &x in seq {
        degree[x] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &x in seq {
        let leaf = (0..n).find(|&i| degree[i] == 1).expect("a leaf always remains");
        edges.push((leaf, x));
        degree[leaf] = 0;
        degree[x] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| degree[i] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Net mass on the component of `start` after deleting `cut` from the tree.
fn component_mass(
    n: usize,
    edges: &[(usize, usize)],
    cut: usize,
    start: usize,
    masses: &[Rat],
) -> Rat {
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    let mut total = Rat::zero();
    while let Some(v) = stack.pop() {
        total += &masses[v];
        for (idx, &(a, b)) in edges.iter().enumerate() {
            if idx == cut {
                continue;
            }
            let next = if a == v {
                b
            } else if b == v {
                a
            } else {
                continue;
            };
            if !seen[next] {
                seen[next] = true;
                stack.push(next);
            }
        }
    }
    total
}

/// The free norm of the signed mass distribution `masses` (which must sum
/// to zero; the basepoint's entry absorbs the imbalance of the others) on
/// the finite metric `dist`, computed as the cheapest balancing flow.
///
/// Optimal flows are supported on spanning trees, and on a tree the flow
/// across each edge is forced to the net mass of the component it cuts off;
/// minimizing the resulting cost over every Pruefer-enumerated tree is
/// therefore exact. Strong LP duality makes this equal the Lipschitz dual
/// the library maximizes, but no code is shared with it.
pub fn tree_flow_norm(dist: &[Vec<Rat>], masses: &[Rat]) -> Rat {
    let n = masses.len();
    assert!(n >= 1);
    assert!(masses.iter().sum::<Rat>().is_zero(), "masses must balance");
    if n == 1 {
        return Rat::zero();
    }
    let seq_len = n - 2;
    let mut best: Option<Rat> = None;
    let mut seq = vec![0usize; seq_len];
    loop {
        let edges = prufer_decode(n, &seq);
        let mut cost = Rat::zero();
        for (idx, &(a, b)) in edges.iter().enumerate() {
            let flow = component_mass(n, &edges, idx, a, masses);
            cost += flow.abs() * &dist[a][b];
        }
        best = Some(match best {
            Some(old) if old <= cost => old,
            _ => cost,
        });
        // Advance the sequence odometer.
        let mut pos = 0;
        loop {
            if pos == seq_len {
                return best.expect("at least one tree");
            }
            seq[pos] += 1;
            if seq[pos] < n {
                break;
            }
            seq[pos] = 0;
            pos += 1;
        }
    }
}

/// Brute-force membership of m in the return set of the shift-power tuple
/// (sigma^{a_1}, ..., sigma^{a_N}) with cylinder source `u0` and cylinder
/// targets, by scanning every {0,2}-string of `depth` digits. Bit i of the
/// scan word is digit i+1 of the string (set bit = digit 2); a string of
/// any tail extends each candidate, so `depth` must cover every constrained
/// position.
pub fn shift_return_oracle(
    powers: &[u64],
    u0: &[u8],
    targets: &[Vec<u8>],
    m: u64,
    depth: u32,
) -> bool {
    assert_eq!(powers.len(), targets.len());
    let fits = |offset: u64, len: usize| offset + len as u64 <= depth as u64;
    assert!(fits(0, u0.len()));
    for (a, t) in powers.iter().zip(targets) {
        assert!(fits(a * m, t.len()), "depth too small for the constraints");
    }
    let matches = |word: u64, offset: u64, prefix: &[u8]| {
        prefix
            .iter()
            .enumerate()
            .all(|(i, &d)| ((word >> (offset + i as u64)) & 1 == 1) == (d == 2))
    };
    for word in 0..(1u64 << depth) {
        if !matches(word, 0, u0) {
            continue;
        }
        if powers
            .iter()
            .zip(targets)
            .all(|(a, t)| matches(word, a * m, t))
        {
            return true;
        }
    }
    false
}
