//! Binary STL of a plate's machined solid, in plate coordinates.

use crate::baseplate::{build_solid, mesh_solid, MeshingError, Plate};

pub fn plate_stl(plate: &Plate) -> Result<Vec<u8>, MeshingError> {
    let mesh = mesh_solid(&build_solid(plate))?;
    Ok(mesh.to_stl(&format!("beamplan plate {}", plate.name)))
}
