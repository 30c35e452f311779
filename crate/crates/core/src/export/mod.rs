//! Fabrication and review artifacts written from a compiled scene.
//!
//! Every exporter is a pure function of the scene, so identical scenes give
//! byte-identical files.

pub mod bom;
pub mod drill;
pub mod stl;
pub mod svg;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::baseplate::MeshingError;
use crate::layout::Scene;

pub use bom::{bom_csv, bom_rows, BomRow};
pub use drill::{drill_csv, drill_svg};
pub use stl::plate_stl;
pub use svg::{plate_svg, scene_svg};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("plate `{plate}`: {source}")]
    Mesh {
        plate: String,
        #[source]
        source: MeshingError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Stl,
    Svg,
    Bom,
    Drill,
    Scene,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown export format `{0}` (expected stl, svg, bom, drill or scene)")]
pub struct UnknownFormat(pub String);

impl FromStr for Format {
    type Err = UnknownFormat;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stl" => Ok(Format::Stl),
            "svg" => Ok(Format::Svg),
            "bom" => Ok(Format::Bom),
            "drill" => Ok(Format::Drill),
            "scene" => Ok(Format::Scene),
            _ => Err(UnknownFormat(s.to_string())),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Stl => "stl",
            Format::Svg => "svg",
            Format::Bom => "bom",
            Format::Drill => "drill",
            Format::Scene => "scene",
        })
    }
}

/// Lowercase file stem: runs of characters outside `[a-z0-9_]` become one
/// `-`, leading and trailing dashes are dropped.
pub fn slugify(name: &str) -> String {
    let mut s = String::new();
    let mut dash = false;
    for c in name.chars().flat_map(char::to_lowercase) {
        if c.is_ascii_alphanumeric() || c == '_' {
            if dash && !s.is_empty() {
                s.push('-');
            }
            dash = false;
            s.push(c);
        } else {
            dash = true;
        }
    }
    if s.is_empty() {
        "plate".to_string()
    } else {
        s
    }
}

/// One slug per plate, in plate order; clashes get `-2`, `-3`, ...
pub fn plate_slugs(scene: &Scene) -> Vec<String> {
    let mut used = BTreeSet::new();
    scene
        .plates
        .iter()
        .map(|p| {
            let base = slugify(&p.name);
            let mut slug = base.clone();
            let mut n = 2;
            while !used.insert(slug.clone()) {
                slug = format!("{base}-{n}");
                n += 1;
            }
            slug
        })
        .collect()
}

/// In-memory artifacts for one format: file name and contents.
pub fn render(scene: &Scene, format: Format) -> Result<Vec<(String, Vec<u8>)>, ExportError> {
    let slugs = plate_slugs(scene);
    let mut out = Vec::new();
    match format {
        Format::Stl => {
            for (p, slug) in scene.plates.iter().zip(&slugs) {
                let bytes = plate_stl(p).map_err(|source| ExportError::Mesh {
                    plate: p.name.clone(),
                    source,
                })?;
                out.push((format!("{slug}.stl"), bytes));
            }
        }
        Format::Svg => {
            out.push(("table.svg".to_string(), scene_svg(scene).into_bytes()));
            for (p, slug) in scene.plates.iter().zip(&slugs) {
                out.push((format!("{slug}.svg"), plate_svg(p, &scene.diagnostics).into_bytes()));
            }
        }
        Format::Bom => out.push(("bom.csv".to_string(), bom_csv(scene).into_bytes())),
        Format::Drill => {
            for (p, slug) in scene.plates.iter().zip(&slugs) {
                out.push((format!("{slug}.drill.svg"), drill_svg(p).into_bytes()));
                out.push((format!("{slug}.drill.csv"), drill_csv(p).into_bytes()));
            }
        }
        Format::Scene => out.push(("scene.json".to_string(), scene.dump().into_bytes())),
    }
    Ok(out)
}

/// Writes the artifacts of one format into `dir`, creating it if needed.
pub fn export(scene: &Scene, format: Format, dir: &Path) -> Result<Vec<PathBuf>, ExportError> {
    let io = |path: &Path, e: std::io::Error| ExportError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let files = render(scene, format)?;
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut paths = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Fixed-precision number for text artifacts, without a negative zero.
pub(crate) fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0.000".to_string()
    } else {
        s
    }
}
