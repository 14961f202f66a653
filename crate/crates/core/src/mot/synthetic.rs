//! Seeded synthetic sequences.
//!
//! Scenario file keys (all in the flat config format):
//!
//! ```text
//! name = pan                    # optional, default "synthetic"
//! frames = 120
//! frame_size = 1920,1080        # clutter area and visibility bounds
//! frame_rate = 30               # optional, default 30
//! camera.pan = 4,0              # pixels per frame added to every object
//! noise_alpha = 0.05            # center error: radial RMS = alpha · box diagonal
//! size_sigma = 0.02             # log-normal width/height jitter
//! miss_rate = 0.05
//! clutter_rate = 0.02           # per object slot and frame
//! seed = 1
//! object.1.start = 100,400,40,100   # x,y,w,h at the first frame
//! object.1.velocity = 2,0
//! object.1.appear = 1           # optional, default 1
//! object.1.disappear = 90       # optional, last frame
//! object.1.growth = 1.002       # optional per-frame size factor
//! object.1.turn.1 = 40,-1,0.5   # optional: from frame 40 on, velocity (-1, 0.5)
//! ```
//!
//! An object is present while its frame range holds and its center lies
//! inside the frame.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::SequenceBundle;
use crate::config::{ConfigError, KvConfig};
use crate::geometry::{round2, BoundingBox, Displacement};
use crate::track::{Detection, LabeledBox, LabeledFrames};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Turn {
    pub frame: u32,
    pub velocity: Displacement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTrajectory {
    pub id: u64,
    /// Box at frame `appear`.
    pub start: BoundingBox,
    pub velocity: Displacement,
    /// Velocity changes, ascending by frame.
    pub turns: Vec<Turn>,
    pub growth: f64,
    pub appear: u32,
    pub disappear: Option<u32>,
}

impl ObjectTrajectory {
    pub fn new(id: u64, start: BoundingBox, velocity: Displacement) -> Self {
        Self { id, start, velocity, turns: Vec::new(), growth: 1.0, appear: 1, disappear: None }
    }

    /// The object's own velocity during the step into `frame`.
    fn velocity_into(&self, frame: u32) -> Displacement {
        self.turns.iter().take_while(|t| t.frame <= frame).last().map_or(self.velocity, |t| t.velocity)
    }

    /// Ground-truth box at `frame` including camera motion, ignoring the
    /// frame bounds.
    pub fn box_at(&self, frame: u32, pan: Displacement) -> Option<BoundingBox> {
        if frame < self.appear || self.disappear.is_some_and(|d| frame > d) {
            return None;
        }
        let mut c = self.start.center();
        for f in self.appear + 1..=frame {
            let v = self.velocity_into(f) + pan;
            c.0 += v.dx;
            c.1 += v.dy;
        }
        let s = self.growth.powi((frame - self.appear) as i32);
        BoundingBox::from_center(c.0, c.1, self.start.w() * s, self.start.h() * s).ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScenario {
    pub name: String,
    pub frames: u32,
    pub frame_size: (f64, f64),
    pub frame_rate: f64,
    pub objects: Vec<ObjectTrajectory>,
    pub camera_pan: Displacement,
    pub noise_alpha: f64,
    pub size_sigma: f64,
    pub miss_rate: f64,
    pub clutter_rate: f64,
    pub seed: u64,
}

impl SyntheticScenario {
    /// A scenario with no noise, misses or clutter.
    pub fn clean(frames: u32, frame_size: (f64, f64), objects: Vec<ObjectTrajectory>) -> Self {
        Self {
            name: "synthetic".into(),
            frames,
            frame_size,
            frame_rate: 30.0,
            objects,
            camera_pan: Displacement::ZERO,
            noise_alpha: 0.0,
            size_sigma: 0.0,
            miss_rate: 0.0,
            clutter_rate: 0.0,
            seed: 0,
        }
    }

    pub fn from_config(cfg: &KvConfig) -> Result<Self, ConfigError> {
        let pair = |key: &str| -> Result<(f64, f64), ConfigError> {
            let v = cfg.get_list(key)?;
            match v[..] {
                [a, b] => Ok((a, b)),
                _ => Err(ConfigError::invalid(key, cfg.raw(key)?, "expected two numbers")),
            }
        };
        let mut ids: Vec<u64> = cfg
            .keys()
            .filter_map(|k| k.strip_prefix("object.")?.strip_suffix(".start")?.parse().ok())
            .collect();
        ids.sort_unstable();
        let mut objects = Vec::with_capacity(ids.len());
        for id in ids {
            let key = |s: &str| format!("object.{id}.{s}");
            let start = cfg.get_list(&key("start"))?;
            let start = match start[..] {
                [x, y, w, h] => BoundingBox::new(x, y, w, h)
                    .map_err(|e| ConfigError::invalid(&key("start"), cfg.raw(&key("start")).unwrap_or(""), e.to_string()))?,
                _ => return Err(ConfigError::invalid(&key("start"), cfg.raw(&key("start"))?, "expected x,y,w,h")),
            };
            let (vx, vy) = pair(&key("velocity"))?;
            let mut turns = Vec::new();
            let mut t = 1;
            while let Some(v) = cfg.get_list_opt(&key(&format!("turn.{t}")))? {
                let k = key(&format!("turn.{t}"));
                let [f, vx, vy] = v[..] else {
                    return Err(ConfigError::invalid(&k, cfg.raw(&k)?, "expected frame,vx,vy"));
                };
                if f < 1.0 || f.fract() != 0.0 {
                    return Err(ConfigError::invalid(&k, cfg.raw(&k)?, "frame must be a positive integer"));
                }
                turns.push(Turn { frame: f as u32, velocity: Displacement::new(vx, vy) });
                t += 1;
            }
            turns.sort_by_key(|t| t.frame);
            objects.push(ObjectTrajectory {
                id,
                start,
                velocity: Displacement::new(vx, vy),
                turns,
                growth: cfg.get_opt(&key("growth"))?.unwrap_or(1.0),
                appear: cfg.get_opt(&key("appear"))?.unwrap_or(1),
                disappear: cfg.get_opt(&key("disappear"))?,
            });
        }
        let (px, py) = pair("camera.pan")?;
        let s = Self {
            name: cfg.get_opt("name")?.unwrap_or_else(|| "synthetic".to_string()),
            frames: cfg.get("frames")?,
            frame_size: pair("frame_size")?,
            frame_rate: cfg.get_opt("frame_rate")?.unwrap_or(30.0),
            objects,
            camera_pan: Displacement::new(px, py),
            noise_alpha: cfg.get("noise_alpha")?,
            size_sigma: cfg.get("size_sigma")?,
            miss_rate: cfg.get("miss_rate")?,
            clutter_rate: cfg.get("clutter_rate")?,
            seed: cfg.get("seed")?,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |k: &str, v: f64, m: &str| Err(ConfigError::invalid(k, &v.to_string(), m));
        for (k, v) in [("noise_alpha", self.noise_alpha), ("size_sigma", self.size_sigma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(k, v, "must be non-negative");
            }
        }
        for (k, v) in [("miss_rate", self.miss_rate), ("clutter_rate", self.clutter_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(k, v, "must lie in [0, 1]");
            }
        }
        if !(self.frame_size.0 > 0.0 && self.frame_size.1 > 0.0) {
            return bad("frame_size", self.frame_size.0.min(self.frame_size.1), "must be positive");
        }
        for o in &self.objects {
            if !(o.growth > 0.0 && o.growth.is_finite()) {
                return bad(&format!("object.{}.growth", o.id), o.growth, "must be positive");
            }
        }
        Ok(())
    }

    /// Same scenario with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Noise-free boxes, rounded to file precision.
    pub fn ground_truth(&self) -> LabeledFrames {
        let mut gt = LabeledFrames::new(self.frames as usize);
        let (fw, fh) = self.frame_size;
        for f in 1..=self.frames {
            for o in &self.objects {
                let Some(b) = o.box_at(f, self.camera_pan) else { continue };
                let (cx, cy) = b.center();
                if (0.0..fw).contains(&cx) && (0.0..fh).contains(&cy) {
                    gt.push(f, LabeledBox { id: o.id, bbox: b.rounded() });
                }
            }
        }
        gt.sort();
        gt
    }
}

/// Ground truth plus noisy detections. Each true box is missed with
/// `miss_rate`; otherwise its center moves by a Gaussian with per-axis
/// standard deviation `noise_alpha · diagonal / √2` and its width and height
/// scale by independent log-normal factors. Each frame also gets, for every
/// object slot, a clutter box with probability `clutter_rate`, placed
/// uniformly in the frame with the size of a random true box. Detections
/// within a frame are shuffled; boxes and scores carry two decimals. Identical scenarios give identical bundles.
pub fn generate_scenario(s: &SyntheticScenario) -> SequenceBundle {
    let gt = s.ground_truth();
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let sizes: Vec<(f64, f64)> =
        gt.iter().flat_map(|(_, b)| b.iter().map(|lb| (lb.bbox.w(), lb.bbox.h()))).collect();
    let (fw, fh) = s.frame_size;

    let mut detections = Vec::with_capacity(s.frames as usize);
    for (f, boxes) in gt.iter() {
        let mut dets = Vec::with_capacity(boxes.len());
        for lb in boxes {
            let b = lb.bbox;
            let sigma = s.noise_alpha * b.diagonal() / std::f64::consts::SQRT_2;
            let (nx, ny) = (std_normal.sample(&mut rng), std_normal.sample(&mut rng));
            let (sw, sh) = (std_normal.sample(&mut rng), std_normal.sample(&mut rng));
            let score = round2(rng.random_range(0.5..1.0));
            if rng.random_bool(s.miss_rate) {
                continue;
            }
            let (cx, cy) = b.center();
            let w = b.w() * (s.size_sigma * sw).exp();
            let h = b.h() * (s.size_sigma * sh).exp();
            let noisy = BoundingBox::from_center(cx + sigma * nx, cy + sigma * ny, w, h).expect("positive size");
            dets.push(Detection { frame: f, bbox: noisy.rounded(), score });
        }
        if !sizes.is_empty() {
            for _ in 0..s.objects.len() {
                if rng.random_bool(s.clutter_rate) {
                    let (w, h) = sizes[rng.random_range(0..sizes.len())];
                    let b = BoundingBox::from_center(rng.random_range(0.0..fw), rng.random_range(0.0..fh), w, h)
                        .expect("positive size");
                    dets.push(Detection { frame: f, bbox: b.rounded(), score: round2(rng.random_range(0.0..0.5)) });
                }
            }
        }
        dets.shuffle(&mut rng);
        detections.push(dets);
    }
    SequenceBundle {
        name: s.name.clone(),
        frame_count: s.frames,
        detections,
        ground_truth: Some(gt),
        frame_rate: s.frame_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(id: u64, x: f64, h: f64, vx: f64) -> ObjectTrajectory {
        ObjectTrajectory::new(id, BoundingBox::new(x, 300.0, h * 0.4, h).unwrap(), Displacement::new(vx, 0.0))
    }

    #[test]
    fn clean_scenario_detections_equal_truth() {
        let s = SyntheticScenario::clean(30, (1000.0, 800.0), vec![obj(1, 100.0, 100.0, 3.0), obj(2, 700.0, 150.0, -4.0)]);
        let b = generate_scenario(&s);
        let gt = b.ground_truth.as_ref().unwrap();
        assert_eq!(b.frame_count, 30);
        for (f, boxes) in gt.iter() {
            let mut want: Vec<_> = boxes.iter().map(|lb| lb.bbox).collect();
            let mut got: Vec<_> = b.detections_at(f).iter().map(|d| d.bbox).collect();
            let key = |b: &BoundingBox| (b.x() * 100.0) as i64;
            want.sort_by_key(key);
            got.sort_by_key(key);
            assert_eq!(got, want, "frame {f}");
        }
        assert_eq!(gt.at(1)[0].bbox, BoundingBox::new(100.0, 300.0, 40.0, 100.0).unwrap());
        assert_eq!(gt.at(11)[0].bbox, BoundingBox::new(130.0, 300.0, 40.0, 100.0).unwrap());
    }

    #[test]
    fn same_seed_same_bundle() {
        let mut s = SyntheticScenario::clean(20, (1000.0, 800.0), vec![obj(1, 100.0, 100.0, 3.0)]);
        s.noise_alpha = 0.1;
        s.miss_rate = 0.2;
        s.clutter_rate = 0.5;
        s.size_sigma = 0.05;
        s.seed = 42;
        assert_eq!(generate_scenario(&s), generate_scenario(&s));
        assert_ne!(generate_scenario(&s), generate_scenario(&s.with_seed(43)));
    }

    #[test]
    fn pan_turns_growth_and_lifespan() {
        let mut o = obj(1, 100.0, 100.0, 2.0);
        o.turns = vec![Turn { frame: 4, velocity: Displacement::new(0.0, 1.0) }];
        o.growth = 1.1;
        o.appear = 2;
        o.disappear = Some(5);
        let pan = Displacement::new(1.0, 0.0);
        assert_eq!(o.box_at(1, pan), None);
        assert_eq!(o.box_at(6, pan), None);
        let c0 = o.box_at(2, pan).unwrap().center();
        let c3 = o.box_at(3, pan).unwrap().center();
        let c5 = o.box_at(5, pan).unwrap().center();
        assert_eq!((c3.0 - c0.0, c3.1 - c0.1), (3.0, 0.0));
        assert!((c5.0 - c3.0 - 2.0).abs() < 1e-12 && (c5.1 - c3.1 - 2.0).abs() < 1e-12);
        assert!((o.box_at(4, pan).unwrap().h() - 121.0).abs() < 1e-9);
    }

    #[test]
    fn leaving_the_frame_removes_the_object() {
        let s = SyntheticScenario::clean(30, (200.0, 800.0), vec![obj(1, 100.0, 100.0, 10.0)]);
        let gt = s.ground_truth();
        // center x = 120 + 10·(f−1) < 200 ⇒ f ≤ 8
        assert_eq!(gt.at(8).len(), 1);
        assert_eq!(gt.at(9).len(), 0);
    }

    #[test]
    fn noise_scales_with_box_size() {
        let mut s = SyntheticScenario::clean(
            1,
            (1e6, 1e6),
            (0..10_000).map(|i| obj(i + 1, 1000.0 + 90.0 * i as f64, 100.0, 0.0)).collect(),
        );
        s.noise_alpha = 0.1;
        let mut big = s.clone();
        for o in &mut big.objects {
            o.start = BoundingBox::new(o.start.x(), o.start.y(), 80.0, 200.0).unwrap();
        }
        let mean_dev = |s: &SyntheticScenario| {
            let b = generate_scenario(s);
            let gt = b.ground_truth.clone().unwrap();
            let mut truth: Vec<_> = gt.at(1).iter().map(|l| l.bbox.center()).collect();
            let mut det: Vec<_> = b.detections_at(1).iter().map(|d| d.bbox.center()).collect();
            truth.sort_by(|a, b| a.0.total_cmp(&b.0));
            det.sort_by(|a, b| a.0.total_cmp(&b.0));
            truth.iter().zip(&det).map(|(t, d)| ((t.0 - d.0).powi(2) + (t.1 - d.1).powi(2)).sqrt()).sum::<f64>()
                / truth.len() as f64
        };
        let ratio = mean_dev(&big) / mean_dev(&s);
        assert!((ratio - 2.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn scenario_from_config() {
        let text = "frames = 10\nframe_size = 640,480\ncamera.pan = 1,0\nnoise_alpha = 0\nsize_sigma = 0\n\
                    miss_rate = 0\nclutter_rate = 0\nseed = 3\n\
                    object.2.start = 10,10,20,50\nobject.2.velocity = 1,1\nobject.2.turn.1 = 5,0,0\n\
                    object.1.start = 100,10,20,50\nobject.1.velocity = -1,0\nobject.1.disappear = 4\n";
        let cfg = KvConfig::parse(text).unwrap();
        let s = SyntheticScenario::from_config(&cfg).unwrap();
        cfg.ensure_all_used().unwrap();
        assert_eq!(s.objects.iter().map(|o| o.id).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(s.objects[1].turns.len(), 1);
        assert_eq!(s.objects[0].disappear, Some(4));
        assert_eq!(s.name, "synthetic");
        let missing = KvConfig::parse(&text.replace("seed = 3\n", "")).unwrap();
        assert_eq!(SyntheticScenario::from_config(&missing).unwrap_err().to_string(), "missing config key `seed`");
    }
}
