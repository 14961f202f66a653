//! Pixel-space geometry shared by every stage of the tracker.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("box width and height must be positive, got w={w} h={h}")]
    NonPositiveSize { w: f64, h: f64 },
    #[error("box coordinates must be finite")]
    NonFinite,
}

/// A 2-D displacement (or velocity, in pixels per frame).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Displacement {
    pub dx: f64,
    pub dy: f64,
}

impl Displacement {
    pub const ZERO: Displacement = Displacement { dx: 0.0, dy: 0.0 };

    pub const fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite()
    }

    pub fn l1(&self) -> f64 {
        self.dx.abs() + self.dy.abs()
    }

    pub fn norm(&self) -> f64 {
        self.dx.hypot(self.dy)
    }

    pub fn norm_sq(&self) -> f64 {
        self.dx * self.dx + self.dy * self.dy
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.dx.abs().max(self.dy.abs())
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.dx * k, self.dy * k)
    }
}

impl std::ops::Add for Displacement {
    type Output = Displacement;
    fn add(self, o: Displacement) -> Displacement {
        Displacement::new(self.dx + o.dx, self.dy + o.dy)
    }
}

impl std::ops::Sub for Displacement {
    type Output = Displacement;
    fn sub(self, o: Displacement) -> Displacement {
        Displacement::new(self.dx - o.dx, self.dy - o.dy)
    }
}

impl std::ops::Neg for Displacement {
    type Output = Displacement;
    fn neg(self) -> Displacement {
        Displacement::new(-self.dx, -self.dy)
    }
}

/// Axis-aligned box in continuous pixel coordinates: `(x, y)` is the top-left corner.
///
/// Width and height are always positive; construct through [`BoundingBox::new`]
/// to have that checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(GeometryError::NonPositiveSize { w, h });
        }
        Ok(Self { x, y, w, h })
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn diagonal(&self) -> f64 {
        self.w.hypot(self.h)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    /// Same size, moved by `d`.
    pub fn translate(&self, d: Displacement) -> Self {
        Self { x: self.x + d.dx, y: self.y + d.dy, ..*self }
    }

    /// Displacement between the centers of `self` and `later`.
    pub fn center_shift_to(&self, later: &BoundingBox) -> Displacement {
        let (ax, ay) = self.center();
        let (bx, by) = later.center();
        Displacement::new(bx - ax, by - ay)
    }

    /// Center-preserving scale; used to build the context window handed to
    /// displacement providers.
    pub fn enlarge(&self, width_factor: f64, height_factor: f64) -> Self {
        debug_assert!(width_factor >= 1.0 && height_factor >= 1.0);
        let (cx, cy) = self.center();
        let w = self.w * width_factor;
        let h = self.h * height_factor;
        Self { x: cx - w / 2.0, y: cy - h / 2.0, w, h }
    }

    /// Componentwise mean of `(x, y, w, h)`.
    pub fn average(&self, other: &BoundingBox) -> Self {
        Self {
            x: (self.x + other.x) / 2.0,
            y: (self.y + other.y) / 2.0,
            w: (self.w + other.w) / 2.0,
            h: (self.h + other.h) / 2.0,
        }
    }

    /// Rounds every field to two decimals, the precision of the on-disk format.
    /// Widths that would round to zero are kept at 0.01.
    pub fn rounded(&self) -> Self {
        Self {
            x: round2(self.x),
            y: round2(self.y),
            w: round2(self.w).max(0.01),
            h: round2(self.h).max(0.01),
        }
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x, self.y, self.w, self.h)
    }
}

pub(crate) fn round2(v: f64) -> f64 {
    let r = (v * 100.0).round() / 100.0;
    // avoid emitting "-0.00"
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Intersection over union, in `[0, 1]`.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    if a == b {
        return 1.0;
    }
    let iw = a.right().min(b.right()) - a.x.max(b.x);
    let ih = a.bottom().min(b.bottom()) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
