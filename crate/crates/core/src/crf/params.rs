use std::fmt;
use std::str::FromStr;

use crate::config::{ConfigError, KvConfig, KvWriter};

/// Which inter-object term the CRF uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairwiseMode {
    /// Size- and confidence-dependent directional weights.
    Asymmetric,
    /// Gaussian kernel on centre distance, the same in both directions.
    SymmetricGaussian,
    /// No pairwise term: displacements are the unary estimates.
    None,
}

impl PairwiseMode {
    pub const ALL: [PairwiseMode; 3] =
        [PairwiseMode::Asymmetric, PairwiseMode::SymmetricGaussian, PairwiseMode::None];

    pub fn as_str(&self) -> &'static str {
        match self {
            PairwiseMode::Asymmetric => "asymmetric",
            PairwiseMode::SymmetricGaussian => "symmetric",
            PairwiseMode::None => "none",
        }
    }
}

impl fmt::Display for PairwiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairwiseMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "asymmetric" => Ok(PairwiseMode::Asymmetric),
            "symmetric" | "symmetric-gaussian" | "symmetric_gaussian" | "symmetricgaussian" => {
                Ok(PairwiseMode::SymmetricGaussian)
            }
            "none" | "unary" | "unary-only" => Ok(PairwiseMode::None),
            other => Err(format!("unknown pairwise mode {other:?} (asymmetric, symmetric, none)")),
        }
    }
}

/// Parameters of one directional weighting function: a size factor
/// `σ(a21·log(area_r/area_s) + b21)` times a confidence factor
/// `σ(a22·(conf_r − conf_s) + b22)`, where `r` receives and `s` sends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightingFunction {
    pub a21: f64,
    pub b21: f64,
    pub a22: f64,
    pub b22: f64,
}

impl Default for WeightingFunction {
    fn default() -> Self {
        Self { a21: 1.0, b21: 0.0, a22: -1.0, b22: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrfParams {
    pub a1: f64,
    pub b1: f64,
    /// One entry per weighting function; at least one.
    pub functions: Vec<WeightingFunction>,
    /// Gaussian bandwidths (pixels) for the symmetric mode, one per function.
    pub symmetric_bandwidths: Vec<f64>,
    pub max_iterations: u32,
    /// Stop once no component changes by more than this many pixels.
    pub convergence_tol: f64,
    pub pairwise_mode: PairwiseMode,
    /// Only pairs whose centres are within this distance interact.
    pub neighborhood_radius: Option<f64>,
    /// Use `d_j − Δs_ij` in the update instead of `d_j + Δs_ij`.
    pub negated_speed_offset: bool,
}

impl Default for CrfParams {
    fn default() -> Self {
        Self {
            a1: 10.0,
            b1: -2.5,
            functions: vec![WeightingFunction::default(); 2],
            symmetric_bandwidths: vec![50.0, 200.0],
            max_iterations: 10,
            convergence_tol: 1e-6,
            pairwise_mode: PairwiseMode::Asymmetric,
            neighborhood_radius: None,
            negated_speed_offset: false,
        }
    }
}

impl CrfParams {
    pub fn k(&self) -> usize {
        self.functions.len()
    }

    pub fn with_mode(mut self, mode: PairwiseMode) -> Self {
        self.pairwise_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, v: String, m: &str| Err(ConfigError::invalid(key, &v, m));
        if self.functions.is_empty() {
            return bad("a21.1", "<absent>".into(), "at least one weighting function is required");
        }
        if self.symmetric_bandwidths.len() != self.functions.len() {
            return bad(
                "symmetric_bandwidth.1",
                format!("{:?}", self.symmetric_bandwidths),
                "need one bandwidth per weighting function",
            );
        }
        if self.max_iterations < 1 {
            return bad("max_iterations", self.max_iterations.to_string(), "must be at least 1");
        }
        if self.convergence_tol.is_nan() || self.convergence_tol <= 0.0 {
            return bad("convergence_tol", self.convergence_tol.to_string(), "must be positive");
        }
        if self.pairwise_mode == PairwiseMode::SymmetricGaussian {
            for (i, bw) in self.symmetric_bandwidths.iter().enumerate() {
                if bw.is_nan() || *bw <= 0.0 {
                    return bad(&format!("symmetric_bandwidth.{}", i + 1), bw.to_string(), "must be positive");
                }
            }
        }
        if let Some(r) = self.neighborhood_radius {
            if r.is_nan() || r <= 0.0 {
                return bad("neighborhood_radius", r.to_string(), "must be positive or `unlimited`");
            }
        }
        let finite = [self.a1, self.b1]
            .into_iter()
            .chain(self.functions.iter().flat_map(|f| [f.a21, f.b21, f.a22, f.b22]));
        for v in finite {
            if !v.is_finite() {
                return bad("a1", v.to_string(), "parameters must be finite");
            }
        }
        Ok(())
    }

    /// Reads every CRF key; all are required.
    pub fn from_config(cfg: &KvConfig) -> Result<Self, ConfigError> {
        let mut functions = Vec::new();
        let mut symmetric_bandwidths = Vec::new();
        let mut k = 1;
        loop {
            if k > 1 && !cfg.contains(&format!("a21.{k}")) {
                break;
            }
            functions.push(WeightingFunction {
                a21: cfg.get(&format!("a21.{k}"))?,
                b21: cfg.get(&format!("b21.{k}"))?,
                a22: cfg.get(&format!("a22.{k}"))?,
                b22: cfg.get(&format!("b22.{k}"))?,
            });
            symmetric_bandwidths.push(cfg.get(&format!("symmetric_bandwidth.{k}"))?);
            k += 1;
        }
        let radius = cfg.raw("neighborhood_radius")?;
        let neighborhood_radius = match radius.to_ascii_lowercase().as_str() {
            "unlimited" | "none" | "inf" => None,
            _ => Some(
                radius
                    .parse::<f64>()
                    .map_err(|e| ConfigError::invalid("neighborhood_radius", radius, e.to_string()))?,
            ),
        };
        let params = Self {
            a1: cfg.get("a1")?,
            b1: cfg.get("b1")?,
            functions,
            symmetric_bandwidths,
            max_iterations: cfg.get("max_iterations")?,
            convergence_tol: cfg.get("convergence_tol")?,
            pairwise_mode: cfg.get("pairwise_mode")?,
            neighborhood_radius,
            negated_speed_offset: cfg.get("negated_speed_offset")?,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn write_config(&self, w: &mut KvWriter) {
        w.set("a1", self.a1).set("b1", self.b1);
        for (i, f) in self.functions.iter().enumerate() {
            let k = i + 1;
            w.set(&format!("a21.{k}"), f.a21)
                .set(&format!("b21.{k}"), f.b21)
                .set(&format!("a22.{k}"), f.a22)
                .set(&format!("b22.{k}"), f.b22);
        }
        for (i, bw) in self.symmetric_bandwidths.iter().enumerate() {
            w.set(&format!("symmetric_bandwidth.{}", i + 1), bw);
        }
        w.set("max_iterations", self.max_iterations)
            .set("convergence_tol", self.convergence_tol)
            .set("pairwise_mode", self.pairwise_mode)
            .set(
                "neighborhood_radius",
                self.neighborhood_radius.map_or("unlimited".to_string(), |r| r.to_string()),
            )
            .set("negated_speed_offset", self.negated_speed_offset);
    }
}
