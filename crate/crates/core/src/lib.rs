//! beamplan: a compiler for declarative optical breadboard layouts.
//!
//! Layout documents describe baseplates whose optics are placed along laser
//! beams rather than at fixed coordinates. Compiling a document traces every
//! beam, resolves element poses, checks design rules and collisions, and
//! yields a [`layout::Scene`] from which the exporters produce STL solids,
//! SVG schematics, drill drawings, bills of materials and a scene dump.

pub mod baseplate;
pub mod beam;
pub mod components;
pub mod diagnostics;
pub mod export;
pub mod expr;
pub mod geometry;
pub mod layout;
pub mod mesh;
