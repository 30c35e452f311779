//! Layout documents: surface syntax, typed model and the compile pipeline.

pub mod compile;
pub mod document;
pub mod syntax;

use std::path::Path;

pub use compile::{compile, compile_with, prelude_templates, LoadError, Provenance, Scene, SceneError, PRELUDE};
pub use document::{generate_grid, parse_document, GridSpec, InstanceDecl, LayoutDocument, Template};
pub use syntax::{format_document, ParseError};

use crate::components::{Catalog, CatalogError};

/// Reads a document and the catalogs it `use`s (resolved relative to the
/// document), merged over `base`.
pub fn load_document(path: &Path, base: &Catalog) -> Result<(LayoutDocument, Catalog), LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let doc = parse_document(&text).map_err(|source| LoadError::Parse {
        path: path.display().to_string(),
        source,
    })?;
    let mut catalog = base.clone();
    let dir = path.parent().unwrap_or(Path::new("."));
    for u in &doc.uses {
        let p = dir.join(u);
        let text = std::fs::read_to_string(&p).map_err(|e| {
            LoadError::Catalog(CatalogError::Io {
                path: p.display().to_string(),
                message: e.to_string(),
            })
        })?;
        catalog.merge(Catalog::parse_source(&p.display().to_string(), &text)?)?;
    }
    Ok((doc, catalog))
}
