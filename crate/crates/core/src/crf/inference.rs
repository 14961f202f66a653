use crate::geometry::Displacement;

use super::{CrfNode, CrfParams, PairWeights, PairwiseMode};

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub displacements: Vec<Displacement>,
    pub iterations: u32,
    pub converged: bool,
    /// Largest componentwise change in the final iteration.
    pub final_max_delta: f64,
}

/// `+Δs_ij`, or `−Δs_ij` when `negated_speed_offset` is set.
fn speed_offset(nodes: &[CrfNode], i: usize, j: usize, params: &CrfParams) -> Displacement {
    let ds = nodes[i].speed - nodes[j].speed;
    if params.negated_speed_offset {
        -ds
    } else {
        ds
    }
}

/// One synchronous update: every node reads only from `current`.
pub fn mean_field_step(
    current: &[Displacement],
    nodes: &[CrfNode],
    weights: &PairWeights,
    params: &CrfParams,
) -> Vec<Displacement> {
    assert_eq!(current.len(), nodes.len());
    assert_eq!(weights.len(), nodes.len());
    (0..nodes.len())
        .map(|i| {
            let node = &nodes[i];
            let mut msg = Displacement::ZERO;
            let mut mass = 0.0;
            for (j, &w) in weights.row(i).iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                msg = msg + (current[j] + speed_offset(nodes, i, j, params)).scale(w);
                mass += w;
            }
            if mass == 0.0 {
                return node.evidence_mean;
            }
            let pair = 1.0 - node.w1;
            let den = node.w1 + pair * mass;
            (node.evidence_mean.scale(node.w1) + msg.scale(pair)).scale(1.0 / den)
        })
        .collect()
}

pub fn max_abs_change(a: &[Displacement], b: &[Displacement]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x - *y).max_abs()).fold(0.0, f64::max)
}

/// Mean-field inference starting from the unary estimates.
///
/// Weights are evaluated once up front. Iterates until the largest
/// componentwise change is at most `convergence_tol` or `max_iterations`
/// steps have run. With [`PairwiseMode::None`] the unary estimates are
/// returned untouched.
pub fn infer(nodes: &[CrfNode], params: &CrfParams) -> InferenceResult {
    let mut d: Vec<Displacement> = nodes.iter().map(|n| n.evidence_mean).collect();
    if params.pairwise_mode == PairwiseMode::None || nodes.is_empty() {
        return InferenceResult { displacements: d, iterations: 0, converged: true, final_max_delta: 0.0 };
    }
    let weights = PairWeights::build(nodes, params);
    let mut iterations = 0;
    let mut delta = f64::INFINITY;
    while iterations < params.max_iterations {
        let next = mean_field_step(&d, nodes, &weights, params);
        delta = max_abs_change(&next, &d);
        d = next;
        iterations += 1;
        if delta <= params.convergence_tol {
            break;
        }
    }
    InferenceResult {
        displacements: d,
        iterations,
        converged: delta <= params.convergence_tol,
        final_max_delta: delta,
    }
}

/// Gibbs energy of a displacement assignment: unary deviations plus the
/// pairwise speed-difference penalty over all ordered pairs. Squares are
/// taken per axis and summed.
pub fn energy(displacements: &[Displacement], nodes: &[CrfNode], params: &CrfParams) -> f64 {
    assert_eq!(displacements.len(), nodes.len());
    let weights = PairWeights::build(nodes, params);
    let mut e = 0.0;
    for (i, node) in nodes.iter().enumerate() {
        e += node.w1 * (displacements[i] - node.evidence_mean).norm_sq();
        for j in 0..nodes.len() {
            let w = weights.get(i, j);
            if w == 0.0 {
                continue;
            }
            let dd = displacements[i] - displacements[j];
            let ds = node.speed - nodes[j].speed;
            e += (1.0 - node.w1) * w * (dd - ds).norm_sq();
        }
    }
    e
}
