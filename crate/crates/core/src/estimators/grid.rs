//! Discretised displacement hypotheses with per-bin confidences.

use crate::geometry::{sigmoid, BoundingBox, Displacement};

use super::EstimateError;

/// Tolerance within which provider output is silently renormalised.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;
/// Tolerance on `Σ c = 1` for an already-normalised grid.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// How many bins a grid has and how far it reaches.
///
/// With no fixed range, the grid spans half the context window in each
/// direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub bins_x: usize,
    pub bins_y: usize,
    /// `(half_range_x, half_range_y)` in pixels.
    pub fixed_half_range: Option<(f64, f64)>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { bins_x: 20, bins_y: 20, fixed_half_range: None }
    }
}

impl GridSpec {
    pub fn layout_for(&self, context: &BoundingBox) -> GridLayout {
        let (rx, ry) = self
            .fixed_half_range
            .unwrap_or((context.w() / 2.0, context.h() / 2.0));
        GridLayout::new(self.bins_x, self.bins_y, rx, ry)
    }
}

/// A regular cell-centred grid over `[-rx, rx] × [-ry, ry]`.
///
/// Bin `k = iy * bins_x + ix` sits at
/// `(-rx + (ix + ½)·2rx/bins_x, -ry + (iy + ½)·2ry/bins_y)`.
/// An odd bin count puts a bin exactly on the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLayout {
    bins_x: usize,
    bins_y: usize,
    half_range_x: f64,
    half_range_y: f64,
}

impl GridLayout {
    pub fn new(bins_x: usize, bins_y: usize, half_range_x: f64, half_range_y: f64) -> Self {
        assert!(bins_x >= 1 && bins_y >= 1, "grid needs at least one bin per axis");
        assert!(
            half_range_x > 0.0 && half_range_y > 0.0,
            "grid half ranges must be positive"
        );
        Self { bins_x, bins_y, half_range_x, half_range_y }
    }

    pub fn bins_x(&self) -> usize {
        self.bins_x
    }

    pub fn bins_y(&self) -> usize {
        self.bins_y
    }

    pub fn len(&self) -> usize {
        self.bins_x * self.bins_y
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step_x(&self) -> f64 {
        2.0 * self.half_range_x / self.bins_x as f64
    }

    pub fn step_y(&self) -> f64 {
        2.0 * self.half_range_y / self.bins_y as f64
    }

    pub fn half_range(&self) -> (f64, f64) {
        (self.half_range_x, self.half_range_y)
    }

    fn coord_x(&self, ix: usize) -> f64 {
        -self.half_range_x + (ix as f64 + 0.5) * self.step_x()
    }

    fn coord_y(&self, iy: usize) -> f64 {
        -self.half_range_y + (iy as f64 + 0.5) * self.step_y()
    }

    pub fn bin_displacement(&self, k: usize) -> Displacement {
        Displacement::new(self.coord_x(k % self.bins_x), self.coord_y(k / self.bins_x))
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.bins_x + ix
    }

    /// Continuous bin coordinates of a displacement (bin centres are integers).
    pub fn fractional_index(&self, d: Displacement) -> (f64, f64) {
        (
            (d.dx + self.half_range_x) / self.step_x() - 0.5,
            (d.dy + self.half_range_y) / self.step_y() - 0.5,
        )
    }

    /// Bin whose centre is nearest to `d` (clamped to the grid).
    pub fn nearest_bin(&self, d: Displacement) -> usize {
        let (u, v) = self.fractional_index(d);
        let ix = u.round().clamp(0.0, (self.bins_x - 1) as f64) as usize;
        let iy = v.round().clamp(0.0, (self.bins_y - 1) as f64) as usize;
        self.index(ix, iy)
    }

    /// Confidences of a Gaussian bump centred at `center` with per-axis
    /// bandwidth in pixels.
    ///
    /// The centre is first spread bilinearly over its surrounding bins, then
    /// each of those bins is blurred by a discrete Gaussian of the given
    /// width. The blur is symmetric, so the grid mean stays at `center`
    /// (up to truncation at the grid border) for any bandwidth, and a zero
    /// bandwidth leaves the bilinear point mass. Centres outside the span of
    /// bin centres are clamped to it.
    pub fn gaussian_bump(&self, center: Displacement, bandwidth_px: (f64, f64)) -> Vec<f64> {
        let (u, v) = self.fractional_index(center);
        let kx = blurred_axis(u, self.bins_x, bandwidth_px.0 / self.step_x());
        let ky = blurred_axis(v, self.bins_y, bandwidth_px.1 / self.step_y());
        let mut out = Vec::with_capacity(self.len());
        for wy in &ky {
            for wx in &kx {
                out.push(wx * wy);
            }
        }
        out
    }
}

/// One axis of [`GridLayout::gaussian_bump`]: linear split of `u` between
/// its two neighbouring bins, each convolved with a normalised Gaussian of
/// width `sigma` bins.
fn blurred_axis(u: f64, bins: usize, sigma: f64) -> Vec<f64> {
    let (lo, frac) = split_axis(u, bins);
    let mut out = vec![0.0; bins];
    for (centre, weight) in [(lo, 1.0 - frac), (lo + 1, frac)] {
        if weight <= 0.0 || centre >= bins {
            continue;
        }
        if sigma <= 0.0 {
            out[centre] += weight;
            continue;
        }
        let kernel: Vec<f64> = (0..bins)
            .map(|i| {
                let e = (i as f64 - centre as f64) / sigma;
                (-0.5 * e * e).exp()
            })
            .collect();
        let sum: f64 = kernel.iter().sum();
        for (o, k) in out.iter_mut().zip(kernel) {
            *o += weight * k / sum;
        }
    }
    out
}

/// Lower bin and interpolation fraction along one axis, clamped so the
/// upper neighbour stays in range.
fn split_axis(u: f64, bins: usize) -> (usize, f64) {
    if bins == 1 {
        return (0, 0.0);
    }
    let u = u.clamp(0.0, (bins - 1) as f64);
    let lo = (u.floor() as usize).min(bins - 2);
    (lo, u - lo as f64)
}

/// A normalised confidence distribution over a [`GridLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementGrid {
    layout: GridLayout,
    confidences: Vec<f64>,
}

impl DisplacementGrid {
    /// Validates provider output. Sums within [`RENORMALIZE_TOLERANCE`] of
    /// one are rescaled; anything further off is rejected.
    pub fn new(layout: GridLayout, confidences: Vec<f64>) -> Result<Self, EstimateError> {
        if confidences.len() != layout.len() {
            return Err(EstimateError::BinCount { expected: layout.len(), got: confidences.len() });
        }
        if let Some(&bad) = confidences.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(EstimateError::InvalidConfidence(bad));
        }
        let sum: f64 = confidences.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(EstimateError::NotNormalized { sum });
        }
        let confidences = confidences.into_iter().map(|c| c / sum).collect();
        Ok(Self { layout, confidences })
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn confidences(&self) -> &[f64] {
        &self.confidences
    }

    pub fn max_confidence(&self) -> f64 {
        self.confidences.iter().copied().fold(0.0, f64::max)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &c) in self.confidences.iter().enumerate() {
            if c > self.confidences[best] {
                best = k;
            }
        }
        best
    }

    pub fn weighted_mean(&self) -> Displacement {
        mean_of(&self.layout, &self.confidences)
    }
}

fn mean_of(layout: &GridLayout, confidences: &[f64]) -> Displacement {
    let mut mx = 0.0;
    let mut my = 0.0;
    for (k, &c) in confidences.iter().enumerate() {
        if c != 0.0 {
            let p = layout.bin_displacement(k);
            mx += c * p.dx;
            my += c * p.dy;
        }
    }
    Displacement::new(mx, my)
}

/// `Σ_k c_k · p_k` over raw confidences, which must already sum to one
/// within [`SUM_TOLERANCE`].
pub fn weighted_mean_displacement(
    layout: &GridLayout,
    confidences: &[f64],
) -> Result<Displacement, EstimateError> {
    if confidences.len() != layout.len() {
        return Err(EstimateError::BinCount { expected: layout.len(), got: confidences.len() });
    }
    if let Some(&bad) = confidences.iter().find(|c| !c.is_finite() || **c < 0.0) {
        return Err(EstimateError::InvalidConfidence(bad));
    }
    let sum: f64 = confidences.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(EstimateError::NotNormalized { sum });
    }
    Ok(mean_of(layout, confidences))
}

/// A grid plus the two statistics inference needs from it.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementEvidence {
    grid: DisplacementGrid,
    mean: Displacement,
    max_confidence: f64,
}

impl DisplacementEvidence {
    pub fn from_grid(grid: DisplacementGrid) -> Self {
        let mean = grid.weighted_mean();
        let max_confidence = grid.max_confidence();
        Self { grid, mean, max_confidence }
    }

    /// Evidence concentrated at `mean` with a given peak confidence, for
    /// callers that have no grid (tests, synthetic nodes). Builds a
    /// one-bin grid so the invariants still hold.
    pub fn point(mean: Displacement, max_confidence: f64) -> Self {
        let layout = GridLayout::new(1, 1, 1.0, 1.0);
        let grid = DisplacementGrid { layout, confidences: vec![1.0] };
        Self { grid, mean, max_confidence: max_confidence.clamp(f64::MIN_POSITIVE, 1.0) }
    }

    pub fn grid(&self) -> &DisplacementGrid {
        &self.grid
    }

    pub fn mean(&self) -> Displacement {
        self.mean
    }

    pub fn max_confidence(&self) -> f64 {
        self.max_confidence
    }
}

/// Smallest distance kept between the unary weight and the ends of `(0, 1)`.
pub const WEIGHT_MARGIN: f64 = 1e-12;

/// `σ(a1 · max_confidence + b1)`, kept strictly inside `(0, 1)` even where
/// the sigmoid saturates in floating point.
pub fn unary_confidence_weight(max_confidence: f64, a1: f64, b1: f64) -> f64 {
    sigmoid(a1 * max_confidence + b1).clamp(WEIGHT_MARGIN, 1.0 - WEIGHT_MARGIN)
}
