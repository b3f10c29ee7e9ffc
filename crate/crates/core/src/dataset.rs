//! Dataset manifests: `id,left,right,ref_left,ref_right,content_id,mos_depth,mos_overall`.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{load_stereo, Geometry, StereoImage};

pub const MANIFEST_HEADER: [&str; 8] = [
    "id",
    "left",
    "right",
    "ref_left",
    "ref_right",
    "content_id",
    "mos_depth",
    "mos_overall",
];

/// One manifest row. Paths are relative to the manifest's directory unless
/// absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: String,
    pub left: PathBuf,
    pub right: PathBuf,
    pub ref_left: Option<PathBuf>,
    pub ref_right: Option<PathBuf>,
    pub content_id: String,
    pub mos_depth: f64,
    pub mos_overall: Option<f64>,
}

impl DatasetEntry {
    pub fn has_reference(&self) -> bool {
        self.ref_left.is_some() && self.ref_right.is_some()
    }
}

/// How to decide the geometry of each stereo pair in a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryChoice {
    /// 2:1 images are equirectangular, everything else planar.
    #[default]
    Auto,
    Erp,
    Planar,
}

impl std::str::FromStr for GeometryChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(GeometryChoice::Auto),
            other => Ok(match other.parse::<Geometry>()? {
                Geometry::Erp => GeometryChoice::Erp,
                Geometry::Planar => GeometryChoice::Planar,
            }),
        }
    }
}

impl GeometryChoice {
    pub fn resolve(self, width: usize, height: usize) -> Geometry {
        match self {
            GeometryChoice::Erp => Geometry::Erp,
            GeometryChoice::Planar => Geometry::Planar,
            GeometryChoice::Auto if width == 2 * height => Geometry::Erp,
            GeometryChoice::Auto => Geometry::Planar,
        }
    }
}

/// Loads a stereo pair, choosing its geometry from `choice`.
pub fn load_stereo_with(left: &Path, right: &Path, choice: GeometryChoice) -> Result<StereoImage> {
    let geometry = match choice {
        GeometryChoice::Auto => {
            let (w, h) = image::image_dimensions(left).map_err(|source| Error::Decode {
                path: left.to_path_buf(),
                source,
            })?;
            choice.resolve(w as usize, h as usize)
        }
        GeometryChoice::Erp => Geometry::Erp,
        GeometryChoice::Planar => Geometry::Planar,
    };
    load_stereo(left, right, geometry)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub root: PathBuf,
    pub entries: Vec<DatasetEntry>,
}

impl Dataset {
    /// Reads a manifest and checks ids are unique and every file exists.
    pub fn load(manifest: impl AsRef<Path>) -> Result<Self> {
        let manifest = manifest.as_ref();
        let root = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(manifest)
            .map_err(|e| Error::Manifest(format!("{}: {e}", manifest.display())))?;
        let headers = reader
            .headers()
            .map_err(|e| Error::Manifest(e.to_string()))?
            .clone();
        if headers.iter().ne(MANIFEST_HEADER) {
            return Err(Error::Manifest(format!(
                "expected header '{}', got '{}'",
                MANIFEST_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut entries = Vec::new();
        for (row, record) in reader.deserialize::<DatasetEntry>().enumerate() {
            let entry = record.map_err(|e| Error::Manifest(format!("row {}: {e}", row + 2)))?;
            entries.push(entry);
        }
        let dataset = Dataset { root, entries };
        dataset.validate()?;
        Ok(dataset)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if e.id.is_empty() {
                return Err(Error::Manifest("empty id".into()));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate id '{}'", e.id)));
            }
            if !e.mos_depth.is_finite() || e.mos_overall.is_some_and(|v| !v.is_finite()) {
                return Err(Error::Manifest(format!("non-finite label for '{}'", e.id)));
            }
            if e.ref_left.is_some() != e.ref_right.is_some() {
                return Err(Error::Manifest(format!("'{}' has only one reference view", e.id)));
            }
            let paths = [Some(&e.left), Some(&e.right), e.ref_left.as_ref(), e.ref_right.as_ref()];
            for p in paths.into_iter().flatten() {
                let full = self.resolve(p);
                if !full.is_file() {
                    return Err(Error::Manifest(format!("'{}': missing file {}", e.id, full.display())));
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.root.join(path)
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load_distorted(&self, entry: &DatasetEntry, choice: GeometryChoice) -> Result<StereoImage> {
        load_stereo_with(&self.resolve(&entry.left), &self.resolve(&entry.right), choice)
    }

    pub fn load_reference(&self, entry: &DatasetEntry, choice: GeometryChoice) -> Result<StereoImage> {
        match (&entry.ref_left, &entry.ref_right) {
            (Some(l), Some(r)) => load_stereo_with(&self.resolve(l), &self.resolve(r), choice),
            _ => Err(Error::Manifest(format!("'{}' has no reference views", entry.id))),
        }
    }
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[DatasetEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Manifest(e.to_string()))?;
    for e in entries {
        writer.serialize(e).map_err(|e| Error::Manifest(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch(dir: &Path, name: &str) {
        std::fs::write(dir.join(name), b"x").unwrap();
    }

    fn entry(id: &str) -> DatasetEntry {
        DatasetEntry {
            id: id.into(),
            left: "l.png".into(),
            right: "r.png".into(),
            ref_left: None,
            ref_right: None,
            content_id: "c0".into(),
            mos_depth: 2.5,
            mos_overall: None,
        }
    }

    #[test]
    fn manifest_round_trip_with_empty_columns() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "l.png");
        touch(dir.path(), "r.png");
        let path = dir.path().join("m.csv");
        let mut b = entry("b");
        b.ref_left = Some("l.png".into());
        b.ref_right = Some("r.png".into());
        b.mos_overall = Some(4.0);
        write_manifest(&path, &[entry("a"), b.clone()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("id,left,right,ref_left,ref_right,content_id,mos_depth,mos_overall\n"));
        assert!(text.contains("a,l.png,r.png,,,c0,2.5,\n"));
        let ds = Dataset::load(&path).unwrap();
        assert_eq!(ds.entries[0], entry("a"));
        assert_eq!(ds.entries[1], b);
    }

    #[test]
    fn duplicate_ids_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "l.png");
        touch(dir.path(), "r.png");
        let path = dir.path().join("m.csv");
        write_manifest(&path, &[entry("a"), entry("a")]).unwrap();
        assert!(matches!(Dataset::load(&path), Err(Error::Manifest(m)) if m.contains("duplicate")));
        let mut e = entry("a");
        e.left = "nope.png".into();
        write_manifest(&path, &[e]).unwrap();
        assert!(matches!(Dataset::load(&path), Err(Error::Manifest(m)) if m.contains("missing")));
    }

    #[test]
    fn bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "id,left\nx,y\n").unwrap();
        assert!(matches!(Dataset::load(&path), Err(Error::Manifest(_))));
    }

    #[test]
    fn geometry_choice() {
        assert_eq!(GeometryChoice::Auto.resolve(512, 256), Geometry::Erp);
        assert_eq!(GeometryChoice::Auto.resolve(480, 360), Geometry::Planar);
        assert_eq!("planar".parse::<GeometryChoice>().unwrap(), GeometryChoice::Planar);
    }
}
