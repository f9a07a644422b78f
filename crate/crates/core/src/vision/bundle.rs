//! Tag bundle layout and its plain-text file format.
//!
//! ```text
//! # tag bundle v1
//! # id size_m x_m y_m yaw_rad
//! 0 0.48 0 0 0
//! 1 0.15 0.35 0 0
//! ```

use super::VisionError;
use crate::geometry::{rotmat, yaw_quat, Vec3};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagSpec {
    pub id: u32,
    /// Black-border edge length, m.
    pub size: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl TagSpec {
    /// Corners in the landing frame, counter-clockwise seen from above,
    /// starting at the tag's (-x, -y) corner.
    pub fn corners(&self) -> [Vec3; 4] {
        let h = 0.5 * self.size;
        let r = rotmat(&yaw_quat(self.yaw));
        let c = Vec3::new(self.x, self.y, 0.0);
        [(-h, -h), (h, -h), (h, h), (-h, h)].map(|(a, b)| c + r * Vec3::new(a, b, 0.0))
    }
}

/// Calibrated coplanar tag layout; coordinates are relative to the landing point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagBundleSpec {
    pub tags: Vec<TagSpec>,
}

impl Default for TagBundleSpec {
    /// One 48 cm tag on the landing point and three 15 cm tags on a 0.35 m circle.
    fn default() -> Self {
        let mut tags = vec![TagSpec { id: 0, size: 0.48, x: 0.0, y: 0.0, yaw: 0.0 }];
        for k in 0..3 {
            let a = std::f64::consts::FRAC_PI_2 + k as f64 * 2.0 * std::f64::consts::PI / 3.0;
            tags.push(TagSpec { id: k + 1, size: 0.15, x: 0.35 * a.cos(), y: 0.35 * a.sin(), yaw: 0.0 });
        }
        Self { tags }
    }
}

impl TagBundleSpec {
    pub fn new(tags: Vec<TagSpec>) -> Result<Self, VisionError> {
        let b = Self { tags };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), VisionError> {
        let mut seen = HashSet::new();
        for t in &self.tags {
            if !seen.insert(t.id) {
                return Err(VisionError::InvalidBundle(format!("duplicate tag id {}", t.id)));
            }
            if !(t.size > 0.0 && t.size.is_finite()) {
                return Err(VisionError::InvalidBundle(format!("tag {} has non-positive size", t.id)));
            }
            if ![t.x, t.y, t.yaw].iter().all(|v| v.is_finite()) {
                return Err(VisionError::InvalidBundle(format!("tag {} pose is not finite", t.id)));
            }
        }
        Ok(())
    }

    pub fn get(&self, id: u32) -> Option<&TagSpec> {
        self.tags.iter().find(|t| t.id == id)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# tag bundle v1\n# id size_m x_m y_m yaw_rad\n");
        for t in &self.tags {
            let _ = writeln!(s, "{} {} {} {} {}", t.id, t.size, t.x, t.y, t.yaw);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, VisionError> {
        let mut tags = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| VisionError::BundleParse { line: n + 1, message: what.to_string() };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 {
                return Err(bad("expected 5 fields: id size x y yaw"));
            }
            let id = f[0].parse::<u32>().map_err(|_| bad("bad tag id"))?;
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            tags.push(TagSpec { id, size: num(f[1])?, x: num(f[2])?, y: num(f[3])?, yaw: num(f[4])? });
        }
        Self::new(tags)
    }

    pub fn load(path: &Path) -> Result<Self, VisionError> {
        let text = std::fs::read_to_string(path).map_err(|e| VisionError::Io(e.to_string()))?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), VisionError> {
        std::fs::write(path, self.to_text()).map_err(|e| VisionError::Io(e.to_string()))
    }
}
