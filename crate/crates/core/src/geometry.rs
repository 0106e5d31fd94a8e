//! Axis-aligned bounding-box algebra.
//!
//! Boxes use continuous corner coordinates and `area = width * height`, with
//! no `+1` pixel correction. Degenerate (zero-area) boxes are valid and have
//! IoU 0 against everything, themselves included.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Area below which a box is `Small` (32²).
pub const SMALL_AREA_LIMIT: f64 = 32.0 * 32.0;
/// Area below which a non-small box is `Medium` (96²).
pub const MEDIUM_AREA_LIMIT: f64 = 96.0 * 96.0;

/// Axis-aligned box in corner form, `x2 >= x1` and `y2 >= y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

impl SizeClass {
    pub const ALL: [SizeClass; 3] = [SizeClass::Small, SizeClass::Medium, SizeClass::Large];

    pub fn index(self) -> usize {
        match self {
            SizeClass::Small => 0,
            SizeClass::Medium => 1,
            SizeClass::Large => 2,
        }
    }

    pub fn from_area(area: f64) -> SizeClass {
        if area < SMALL_AREA_LIMIT {
            SizeClass::Small
        } else if area < MEDIUM_AREA_LIMIT {
            SizeClass::Medium
        } else {
            SizeClass::Large
        }
    }
}

impl BBox {
    /// Builds a box from corners, rejecting negative extents and non-finite values.
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(Error::validation(format!(
                "box [{x1}, {y1}, {x2}, {y2}] has non-finite coordinates"
            )));
        }
        if x2 < x1 || y2 < y1 {
            return Err(Error::validation(format!(
                "box [{x1}, {y1}, {x2}, {y2}] has negative extent"
            )));
        }
        Ok(BBox { x1, y1, x2, y2 })
    }

    /// Builds a box from COCO `[x, y, w, h]`.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        BBox::new(x, y, x + w, y + h)
    }

    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x1, self.y1, self.width(), self.height()]
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) * 0.5, (self.y1 + self.y2) * 0.5)
    }

    pub fn size_class(&self) -> SizeClass {
        SizeClass::from_area(self.area())
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Intersection over union; 0 when the union is empty.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        if inter <= 0.0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            return 0.0;
        }
        (inter / union).clamp(0.0, 1.0)
    }

    /// Clips the box to `[0, width] x [0, height]`.
    pub fn clip(&self, width: f64, height: f64) -> BBox {
        let x1 = self.x1.clamp(0.0, width);
        let y1 = self.y1.clamp(0.0, height);
        let x2 = self.x2.clamp(x1, width.max(x1));
        let y2 = self.y2.clamp(y1, height.max(y1));
        BBox { x1, y1, x2, y2 }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BBox {
        BBox {
            x1: self.x1 + dx,
            y1: self.y1 + dy,
            x2: self.x2 + dx,
            y2: self.y2 + dy,
        }
    }

    /// Scales about the origin; `factor` must be positive.
    pub fn scale(&self, factor: f64) -> BBox {
        BBox {
            x1: self.x1 * factor,
            y1: self.y1 * factor,
            x2: self.x2 * factor,
            y2: self.y2 * factor,
        }
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x1 && x <= self.x2 && y >= self.y1 && y <= self.y2
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

pub fn area(b: &BBox) -> f64 {
    b.area()
}

pub fn size_class(b: &BBox) -> SizeClass {
    b.size_class()
}

/// Largest IoU between `b` and any box in `others`, 0 for an empty slice.
pub fn max_iou<'a>(b: &BBox, others: impl IntoIterator<Item = &'a BBox>) -> f64 {
    others.into_iter().map(|o| b.iou(o)).fold(0.0, f64::max)
}
