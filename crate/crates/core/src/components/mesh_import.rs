//! Custom components backed by a mesh file plus user metadata.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Catalog, CatalogError, ComponentDef, DrillFeature, Footprint, OpticalCenter};
use crate::geometry::Vec2;
use crate::mesh::Mesh;

/// Information a mesh cannot provide by itself. Coordinates are in the
/// mesh's own frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshMetadata {
    pub id: String,
    pub description: String,
    pub optical_center: Vec2,
    pub optical_height: Option<f64>,
    pub aperture: f64,
    /// One of `mirror`, `splitter`, `sink`, `inert`, or `None` for a
    /// purely mechanical part.
    pub behavior: Option<String>,
    pub drill: Vec<DrillFeature>,
}

/// Reads an STL mesh, derives its footprint from the bounding box and adds
/// it to `catalog`. The datum is the centre of the planar bounding box.
pub fn register_mesh_component(
    catalog: &mut Catalog,
    path: &Path,
    metadata: Option<&MeshMetadata>,
) -> Result<String, CatalogError> {
    let err = |m: String| CatalogError::Mesh {
        path: path.display().to_string(),
        message: m,
    };
    let meta = metadata.ok_or_else(|| err("metadata is required (footprint datum, optics and drilling)".into()))?;
    let bytes = std::fs::read(path).map_err(|e| err(e.to_string()))?;
    let mesh = Mesh::from_stl(&bytes).map_err(|e| err(e.to_string()))?;
    if mesh.triangles.is_empty() {
        return Err(err("mesh has no triangles".into()));
    }
    let rep = mesh.edge_report();
    if !rep.is_watertight() {
        return Err(err(format!(
            "mesh is not watertight ({} open, {} over-shared, {} flipped edges)",
            rep.open, rep.over, rep.flipped
        )));
    }
    if let Some(b) = &meta.behavior {
        if !matches!(b.as_str(), "mirror" | "splitter" | "sink" | "inert") {
            return Err(err(format!("behavior `{b}` needs parameters; define it in a catalog file instead")));
        }
    }
    let (lo, hi) = mesh.bounds();
    let center = Vec2::new((lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0);
    let drill = meta
        .drill
        .iter()
        .cloned()
        .map(|mut d| {
            match &mut d {
                DrillFeature::Hole { at, .. } | DrillFeature::Pocket { at, .. } => *at = *at - center,
                DrillFeature::Channel { from, to, .. } => {
                    *from = *from - center;
                    *to = *to - center;
                }
            }
            d
        })
        .collect();
    let def = ComponentDef::fixed(
        &meta.id,
        &meta.description,
        &path.display().to_string(),
        Footprint::Rect {
            width: hi[1] - lo[1],
            depth: hi[0] - lo[0],
            height: hi[2] - lo[2],
        },
        OpticalCenter {
            offset: meta.optical_center - center,
            height: meta.optical_height,
        },
        meta.aperture,
        meta.behavior.as_deref(),
        drill,
    );
    catalog.insert(def)?;
    Ok(meta.id.clone())
}
