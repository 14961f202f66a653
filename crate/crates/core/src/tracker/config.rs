use crate::config::{ConfigError, KvConfig, KvWriter};
use crate::crf::CrfParams;

/// Thresholds governing how tracklets are born, kept alive and ended.
#[derive(Debug, Clone, PartialEq)]
pub struct LifecycleConfig {
    /// Frames a candidate must be matched before promotion.
    pub k_init: u32,
    /// A tracklet ends once it has gone more than this many frames without
    /// a detection.
    pub m_term: u32,
    /// Candidate matches need IoU strictly above this...
    pub init_iou_gate: f64,
    /// ...and visual similarity strictly above this.
    pub init_visual_gate: f64,
    /// Weight of IoU against visual similarity in the matching score.
    pub lambda: f64,
    /// Emit the virtual boxes a terminated tracklet accumulated after its
    /// last detection.
    pub emit_virtual: bool,
    /// On promotion, also emit the boxes collected while a candidate.
    pub backfill_candidates: bool,
    /// Size of the search window around the last box, as multiples of its
    /// width and height.
    pub context_width_factor: f64,
    pub context_height_factor: f64,
}

impl Default for LifecycleConfig {
    fn default() -> Self {
        Self {
            k_init: 4,
            m_term: 5,
            init_iou_gate: 0.3,
            init_visual_gate: 0.8,
            lambda: 1.0,
            emit_virtual: true,
            backfill_candidates: true,
            context_width_factor: 5.0,
            context_height_factor: 2.0,
        }
    }
}

impl LifecycleConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |k: &str, v: String, m: &str| Err(ConfigError::invalid(k, &v, m));
        if self.k_init == 0 {
            return bad("k_init", self.k_init.to_string(), "must be at least 1");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda", self.lambda.to_string(), "must be a non-negative number");
        }
        for (k, v) in [("init_iou_gate", self.init_iou_gate), ("init_visual_gate", self.init_visual_gate)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(k, v.to_string(), "must lie in [0, 1]");
            }
        }
        for (k, v) in [
            ("context_width_factor", self.context_width_factor),
            ("context_height_factor", self.context_height_factor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(k, v.to_string(), "must be positive");
            }
        }
        Ok(())
    }

    pub fn from_config(cfg: &KvConfig) -> Result<Self, ConfigError> {
        let c = Self {
            k_init: cfg.get("k_init")?,
            m_term: cfg.get("m_term")?,
            init_iou_gate: cfg.get("init_iou_gate")?,
            init_visual_gate: cfg.get("init_visual_gate")?,
            lambda: cfg.get("lambda")?,
            emit_virtual: cfg.get("emit_virtual")?,
            backfill_candidates: cfg.get("backfill_candidates")?,
            context_width_factor: cfg.get("context_width_factor")?,
            context_height_factor: cfg.get("context_height_factor")?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn write_config(&self, w: &mut KvWriter) {
        w.set("k_init", self.k_init)
            .set("m_term", self.m_term)
            .set("init_iou_gate", self.init_iou_gate)
            .set("init_visual_gate", self.init_visual_gate)
            .set("lambda", self.lambda)
            .set("emit_virtual", self.emit_virtual)
            .set("backfill_candidates", self.backfill_candidates)
            .set("context_width_factor", self.context_width_factor)
            .set("context_height_factor", self.context_height_factor);
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackerConfig {
    pub crf: CrfParams,
    pub lifecycle: LifecycleConfig,
}

impl TrackerConfig {
    /// Reads the CRF and lifecycle keys. Other keys are left for the
    /// caller; use [`KvConfig::ensure_all_used`] afterwards to catch typos.
    pub fn from_config(cfg: &KvConfig) -> Result<Self, ConfigError> {
        Ok(Self { crf: CrfParams::from_config(cfg)?, lifecycle: LifecycleConfig::from_config(cfg)? })
    }

    pub fn write_config(&self, w: &mut KvWriter) {
        w.comment("inference");
        self.crf.write_config(w);
        w.comment("lifecycle");
        self.lifecycle.write_config(w);
    }
}
