use crate::geometry::Vec3;
use std::fs::{self, File};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

const HEADER: &str = "sortie-home v1";

/// Takeoff location remembered for the return leg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomeRecord {
    pub x: f64,
    pub y: f64,
    /// Estimated height at takeoff, m.
    pub altitude: f64,
    pub time: f64,
}

impl HomeRecord {
    pub fn from_position(p: &Vec3, time: f64) -> Self {
        Self { x: p.x, y: p.y, altitude: p.z, time }
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.altitude, self.time].iter().all(|v| v.is_finite())
    }

    fn body(&self) -> String {
        format!("{HEADER}\nx={}\ny={}\naltitude={}\ntime={}\n", self.x, self.y, self.altitude, self.time)
    }
}

#[derive(Debug, Error)]
pub enum HomeStoreError {
    #[error("home store io: {0}")]
    Io(#[from] std::io::Error),
    #[error("home record is not finite")]
    NonFinite,
    #[error("home record corrupt: {0}")]
    Corrupt(String),
}

/// Writes the record to a temporary file, syncs it and renames it over
/// `path`.
pub fn home_store_persist(path: &Path, rec: &HomeRecord) -> Result<(), HomeStoreError> {
    if !rec.is_finite() {
        return Err(HomeStoreError::NonFinite);
    }
    let body = rec.body();
    let crc = crc32fast::hash(body.as_bytes());
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        write!(f, "{body}crc32={crc:08x}\n")?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        // Directory sync makes the rename durable; not all platforms allow it.
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

pub fn home_store_load(path: &Path) -> Result<HomeRecord, HomeStoreError> {
    let text = fs::read_to_string(path)?;
    let corrupt = |m: &str| HomeStoreError::Corrupt(m.to_string());
    let (body, footer) = text.rsplit_once("crc32=").ok_or_else(|| corrupt("missing checksum"))?;
    let stored = u32::from_str_radix(footer.trim(), 16).map_err(|_| corrupt("bad checksum field"))?;
    if crc32fast::hash(body.as_bytes()) != stored {
        return Err(corrupt("checksum mismatch"));
    }
    let mut lines = body.lines();
    if lines.next() != Some(HEADER) {
        return Err(corrupt("bad header"));
    }
    let mut field = |name: &str| -> Result<f64, HomeStoreError> {
        let line = lines.next().ok_or_else(|| corrupt("truncated"))?;
        let v = line.strip_prefix(name).and_then(|r| r.strip_prefix('=')).ok_or_else(|| corrupt(name))?;
        v.parse().map_err(|_| corrupt(name))
    };
    let rec = HomeRecord { x: field("x")?, y: field("y")?, altitude: field("altitude")?, time: field("time")? };
    if !rec.is_finite() {
        return Err(HomeStoreError::NonFinite);
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(x: f64) -> HomeRecord {
        HomeRecord { x, y: -2.25, altitude: 0.15, time: 1234.5 }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("home.rec");
        home_store_persist(&p, &rec(0.1 + 0.2)).unwrap();
        assert_eq!(home_store_load(&p).unwrap(), rec(0.1 + 0.2));
    }

    #[test]
    fn newer_wins() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("home.rec");
        home_store_persist(&p, &rec(1.0)).unwrap();
        home_store_persist(&p, &rec(2.0)).unwrap();
        assert_eq!(home_store_load(&p).unwrap().x, 2.0);
        assert!(!p.with_extension("tmp").exists());
    }

    #[test]
    fn corruption_detected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("home.rec");
        home_store_persist(&p, &rec(1.0)).unwrap();
        let text = fs::read_to_string(&p).unwrap().replace("x=1", "x=7");
        fs::write(&p, text).unwrap();
        assert!(matches!(home_store_load(&p), Err(HomeStoreError::Corrupt(_))));
        fs::write(&p, "garbage").unwrap();
        assert!(home_store_load(&p).is_err());
        assert!(matches!(home_store_load(&dir.path().join("missing")), Err(HomeStoreError::Io(_))));
    }

    #[test]
    fn rejects_non_finite() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(home_store_persist(&dir.path().join("h"), &rec(f64::NAN)), Err(HomeStoreError::NonFinite)));
    }
}
