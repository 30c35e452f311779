//! Littrow grating mount: a wedge whose front face holds the grating at the
//! angle that retro-reflects the first diffraction order.

use serde::{Deserialize, Serialize};

use super::{Counterbore, DrillFeature, HoleDepth, Side};
use crate::beam::{littrow_angle, BeamError};
use crate::geometry::Vec2;
use crate::mesh::Mesh;

/// Parametric wedge mount description. Plan-view coordinates: the beam
/// arrives travelling along −x onto the inclined front face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GratingMount {
    pub wavelength_nm: f64,
    pub groove_density: f64,
    pub order: i32,
    /// Radians between the incoming beam and the grating normal.
    pub littrow_angle: f64,
    /// Width across the beam, mm.
    pub width: f64,
    pub height: f64,
    /// Thinnest part of the wedge, mm.
    pub min_thickness: f64,
    /// Plan outline, counter-clockwise.
    pub outline: Vec<[f64; 2]>,
    pub holes: Vec<DrillFeature>,
}

impl GratingMount {
    /// Thickness of the wedge at the far side of the grating face.
    pub fn max_thickness(&self) -> f64 {
        self.min_thickness + self.width * self.littrow_angle.abs().tan()
    }

    pub fn to_mesh(&self) -> Mesh {
        Mesh::extrude_convex(&self.outline, 0.0, self.height)
    }
}

const WIDTH: f64 = 25.0;
const HEIGHT: f64 = 25.4;
const MIN_THICKNESS: f64 = 6.0;

/// Generates the wedge mount for a grating used in Littrow configuration.
pub fn generate_grating_mount(wavelength_nm: f64, groove_density: f64, order: i32) -> Result<GratingMount, BeamError> {
    let theta = littrow_angle(wavelength_nm, groove_density, order)?;
    let rise = WIDTH * theta.abs().tan();
    let (a, b) = if theta >= 0.0 {
        (MIN_THICKNESS + rise, MIN_THICKNESS)
    } else {
        (MIN_THICKNESS, MIN_THICKNESS + rise)
    };
    let outline = vec![[0.0, 0.0], [a, 0.0], [b, WIDTH], [0.0, WIDTH]];
    let holes = vec![DrillFeature::Hole {
        at: Vec2::new(MIN_THICKNESS / 2.0, WIDTH / 2.0),
        diameter: 3.4,
        depth: HoleDepth::Through,
        counterbore: Some(Counterbore {
            diameter: 6.0,
            depth: 3.5,
            side: Side::Bottom,
        }),
        thread: None,
    }];
    Ok(GratingMount {
        wavelength_nm,
        groove_density,
        order,
        littrow_angle: theta,
        width: WIDTH,
        height: HEIGHT,
        min_thickness: MIN_THICKNESS,
        outline,
        holes,
    })
}
