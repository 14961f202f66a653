use thiserror::Error;

use crate::geometry::Displacement;

use super::{CrfNode, CrfParams, PairWeights};

/// Pivots smaller than this abort the direct solve.
pub const PIVOT_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("fixed-point system is singular (pivot {pivot:e} at column {column})")]
pub struct SingularSystem {
    pub column: usize,
    pub pivot: f64,
}

/// Solves all update equations simultaneously as a linear system, one per
/// axis, by Gaussian elimination with partial pivoting. Rows are divided
/// by their diagonal first, which leaves a strictly diagonally dominant
/// matrix whenever every `w1 > 0`.
pub fn direct_fixed_point_solve(
    nodes: &[CrfNode],
    weights: &PairWeights,
    params: &CrfParams,
) -> Result<Vec<Displacement>, SingularSystem> {
    let n = nodes.len();
    assert_eq!(weights.len(), n);
    let sign = if params.negated_speed_offset { -1.0 } else { 1.0 };
    // [A | bx by], row-major with two right-hand sides
    let cols = n + 2;
    let mut m = vec![0.0; n * cols];
    for (i, node) in nodes.iter().enumerate() {
        let pair = 1.0 - node.w1();
        let diag = node.w1() + pair * weights.row_sum(i);
        let row = &mut m[i * cols..(i + 1) * cols];
        let mut rhs = node.evidence_mean().scale(node.w1());
        for j in 0..n {
            let w = weights.get(i, j);
            if w == 0.0 {
                continue;
            }
            row[j] -= pair * w / diag;
            rhs = rhs + (node.speed() - nodes[j].speed()).scale(sign * pair * w);
        }
        row[i] += 1.0;
        if weights.row_sum(i) == 0.0 {
            // isolated node: its equation is d_i = f_i exactly
            row[n] = node.evidence_mean().dx;
            row[n + 1] = node.evidence_mean().dy;
        } else {
            row[n] = rhs.dx / diag;
            row[n + 1] = rhs.dy / diag;
        }
    }

    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| m[a * cols + col].abs().total_cmp(&m[b * cols + col].abs()))
            .expect("non-empty range");
        let pivot = m[piv * cols + col];
        if pivot.abs() < PIVOT_GUARD {
            return Err(SingularSystem { column: col, pivot });
        }
        if piv != col {
            for c in 0..cols {
                m.swap(piv * cols + c, col * cols + c);
            }
        }
        for r in col + 1..n {
            let factor = m[r * cols + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in col..cols {
                m[r * cols + c] -= factor * m[col * cols + c];
            }
        }
    }

    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    for r in (0..n).rev() {
        let mut sx = m[r * cols + n];
        let mut sy = m[r * cols + n + 1];
        for c in r + 1..n {
            sx -= m[r * cols + c] * x[c];
            sy -= m[r * cols + c] * y[c];
        }
        let p = m[r * cols + r];
        x[r] = sx / p;
        y[r] = sy / p;
    }
    Ok(x.into_iter().zip(y).map(|(dx, dy)| Displacement::new(dx, dy)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node_returns_estimate() {
        let nodes = vec![CrfNode::from_parts(1, Displacement::new(2.0, -3.0), 0.5, 0.1, Displacement::new(7.0, 7.0), 5.0, (0.0, 0.0))];
        let w = PairWeights::build(&nodes, &CrfParams::default());
        assert_eq!(direct_fixed_point_solve(&nodes, &w, &CrfParams::default()).unwrap()[0], Displacement::new(2.0, -3.0));
    }

    #[test]
    fn uniform_translation_is_the_fixed_point() {
        let v = Displacement::new(4.0, -1.5);
        let nodes: Vec<_> = (0..5)
            .map(|i| {
                CrfNode::from_parts(i, v, 0.1 * i as f64 + 0.05, 0.1 + 0.15 * i as f64, Displacement::ZERO, 10.0 + i as f64 * 30.0, (i as f64 * 10.0, 0.0))
            })
            .collect();
        let p = CrfParams::default();
        let w = PairWeights::build(&nodes, &p);
        for d in direct_fixed_point_solve(&nodes, &w, &p).unwrap() {
            assert!((d - v).max_abs() < 1e-12);
        }
    }

    #[test]
    fn guard_catches_numerically_singular_systems() {
        // w1 at the clamp floor and heavy mutual weights: the normalised
        // system is [[1, -(1-ε)], [-(1-ε), 1]] with ε ≈ 2.5e-13
        let mk = |id| CrfNode::from_parts(id, Displacement::ZERO, 0.0, 0.0, Displacement::ZERO, 1.0, (0.0, 0.0));
        let nodes = vec![mk(1), mk(2)];
        let w = PairWeights::from_matrix(2, vec![0.0, 4.0, 4.0, 0.0]);
        let err = direct_fixed_point_solve(&nodes, &w, &CrfParams::default()).unwrap_err();
        assert_eq!(err.column, 1);
    }
}
