use crate::geometry::sigmoid;

use super::{CrfNode, CrfParams, PairwiseMode};

/// Weight of the message from `sender` to `receiver` under weighting
/// function `k` (0-based).
pub fn pairwise_weight(receiver: &CrfNode, sender: &CrfNode, params: &CrfParams, k: usize) -> f64 {
    let f = &params.functions[k];
    let size = sigmoid(f.a21 * (receiver.area / sender.area).ln() + f.b21);
    let conf = sigmoid(f.a22 * (receiver.max_confidence - sender.max_confidence) + f.b22);
    size * conf
}

/// Gaussian kernel on centre distance with bandwidth `symmetric_bandwidths[k]`.
pub fn symmetric_pairwise_weight(
    receiver: &CrfNode,
    sender: &CrfNode,
    params: &CrfParams,
    k: usize,
) -> f64 {
    let a = params.symmetric_bandwidths[k];
    let dx = receiver.center.0 - sender.center.0;
    let dy = receiver.center.1 - sender.center.1;
    (-(dx * dx + dy * dy) / (2.0 * a * a)).exp()
}

/// Summed weights `W_ij = Σ_k w_ij^(k)` for every ordered pair, receiver
/// first. The diagonal is zero; pairs outside the neighbourhood are zero
/// in both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct PairWeights {
    n: usize,
    w: Vec<f64>,
}

impl PairWeights {
    /// Evaluates the weights once from previous-frame quantities; they stay
    /// fixed for the whole inference.
    pub fn build(nodes: &[CrfNode], params: &CrfParams) -> Self {
        let n = nodes.len();
        let mut w = vec![0.0; n * n];
        if params.pairwise_mode == PairwiseMode::None {
            return Self { n, w };
        }
        for (i, ri) in nodes.iter().enumerate() {
            for (j, sj) in nodes.iter().enumerate() {
                if i == j || !in_neighborhood(ri, sj, params.neighborhood_radius) {
                    continue;
                }
                w[i * n + j] = (0..params.k())
                    .map(|k| match params.pairwise_mode {
                        PairwiseMode::Asymmetric => pairwise_weight(ri, sj, params, k),
                        PairwiseMode::SymmetricGaussian => symmetric_pairwise_weight(ri, sj, params, k),
                        PairwiseMode::None => 0.0,
                    })
                    .sum();
            }
        }
        Self { n, w }
    }

    /// Row-major `n × n` table of already-summed weights.
    ///
    /// Panics on a size mismatch or a non-zero diagonal.
    pub fn from_matrix(n: usize, w: Vec<f64>) -> Self {
        assert_eq!(w.len(), n * n, "weight table must be n x n");
        assert!((0..n).all(|i| w[i * n + i] == 0.0), "self-weights must be zero");
        Self { n, w }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `W_ij`: receiver `i`, sender `j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }
}

fn in_neighborhood(a: &CrfNode, b: &CrfNode, radius: Option<f64>) -> bool {
    match radius {
        None => true,
        Some(r) => {
            let dx = a.center.0 - b.center.0;
            let dy = a.center.1 - b.center.1;
            // squared distance is symmetric bit-for-bit, so the gate is too
            dx * dx + dy * dy <= r * r
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crf::WeightingFunction;
    use crate::geometry::Displacement;

    fn node(area: f64, conf: f64, center: (f64, f64)) -> CrfNode {
        CrfNode::from_parts(0, Displacement::ZERO, conf, 0.5, Displacement::ZERO, area, center)
    }

    fn params_with(f: WeightingFunction) -> CrfParams {
        CrfParams { functions: vec![f], symmetric_bandwidths: vec![10.0], ..CrfParams::default() }
    }

    #[test]
    fn neutral_weight_is_a_quarter() {
        let p = params_with(WeightingFunction { a21: 1.0, b21: 0.0, a22: -1.0, b22: 0.0 });
        let a = node(100.0, 0.4, (0.0, 0.0));
        assert_eq!(pairwise_weight(&a, &a.clone(), &p, 0), 0.25);
    }

    #[test]
    fn size_factor_alone() {
        let p = params_with(WeightingFunction { a21: 1.0, b21: 0.0, a22: 0.0, b22: 0.0 });
        let r = node(std::f64::consts::E.powi(2) * 10.0, 0.3, (0.0, 0.0));
        let s = node(10.0, 0.9, (0.0, 0.0));
        let expected = 1.0 / (1.0 + (-2.0f64).exp()) * 0.5;
        assert!((pairwise_weight(&r, &s, &p, 0) - expected).abs() < 1e-12);
        assert!((expected - 0.4404).abs() < 1e-4);
    }

    #[test]
    fn asymmetric_direction() {
        let p = params_with(WeightingFunction::default());
        let big = node(400.0, 0.2, (0.0, 0.0));
        let small = node(100.0, 0.7, (5.0, 0.0));
        let to_big = pairwise_weight(&big, &small, &p, 0);
        let to_small = pairwise_weight(&small, &big, &p, 0);
        assert!(to_big > to_small);
    }

    #[test]
    fn symmetric_kernel() {
        let p = params_with(WeightingFunction::default());
        let a = node(1.0, 0.1, (0.0, 0.0));
        let b = node(9.0, 0.9, (6.0, 8.0));
        assert_eq!(symmetric_pairwise_weight(&a, &a, &p, 0), 1.0);
        let at_bw = node(1.0, 0.1, (10.0, 0.0));
        assert!((symmetric_pairwise_weight(&a, &at_bw, &p, 0) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((symmetric_pairwise_weight(&a, &at_bw, &p, 0) - 0.6065).abs() < 1e-4);
        assert_eq!(symmetric_pairwise_weight(&a, &b, &p, 0), symmetric_pairwise_weight(&b, &a, &p, 0));
    }

    #[test]
    fn table_respects_mode_and_gate() {
        let nodes = vec![node(100.0, 0.5, (0.0, 0.0)), node(50.0, 0.9, (30.0, 40.0)), node(80.0, 0.1, (500.0, 0.0))];
        let mut p = CrfParams::default();
        let all = PairWeights::build(&nodes, &p);
        assert!(all.get(0, 2) > 0.0 && all.get(1, 1) == 0.0);
        // two identical functions sum
        assert!((all.get(0, 1) - 2.0 * pairwise_weight(&nodes[0], &nodes[1], &p, 0)).abs() < 1e-15);
        p.neighborhood_radius = Some(50.0);
        let gated = PairWeights::build(&nodes, &p);
        assert!(gated.get(0, 1) > 0.0 && gated.get(1, 0) > 0.0);
        assert_eq!((gated.get(0, 2), gated.get(2, 0)), (0.0, 0.0));
        let none = PairWeights::build(&nodes, &p.clone().with_mode(PairwiseMode::None));
        assert!((0..3).all(|i| none.row_sum(i) == 0.0));
    }
}
