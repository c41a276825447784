//! GNSS shadows: shadow directions, extruded shadow volumes, and their
//! ground-plane traces per satellite.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};

use crate::conzono::{ConZono, ConZonoError};
use crate::map::{max_building_height, Building, GroundModel, GroundPiece};
use crate::polygon::MultiPolygon2D;

#[derive(Debug, thiserror::Error)]
pub enum ShadowError {
    #[error("satellite position coincides with the building anchor")]
    CoincidentPoints,
    #[error("epsilon {epsilon} does not exceed the tallest building ({max_height} m)")]
    EpsilonTooSmall { epsilon: f64, max_height: f64 },
    #[error("shadow piece vertex at z = {z} deviates from piece height {height}")]
    NotFlat { z: f64, height: f64 },
    #[error(transparent)]
    ConZono(#[from] ConZonoError),
}

/// A satellite's ground shadow over the whole building set.
#[derive(Debug, Clone)]
pub struct SatelliteShadow {
    pub region: MultiPolygon2D,
}

/// Unit vector from the building anchor toward the satellite.
pub fn shadow_direction(b: &Building, sat_pos: &Vector3<f64>) -> Result<Vector3<f64>, ShadowError> {
    let d = sat_pos - b.anchor;
    let n = d.norm();
    if n == 0.0 {
        return Err(ShadowError::CoincidentPoints);
    }
    Ok(d / n)
}

/// The long line-segment zonotope `zono(0, eps * dir)` spanning both
/// directions; `eps` must exceed the tallest building so the extrusion
/// reaches the ground from any part.
pub fn make_direction_zono(
    dir: &Vector3<f64>,
    epsilon: f64,
    max_height: f64,
) -> Result<ConZono, ShadowError> {
    if !(epsilon > max_height) {
        return Err(ShadowError::EpsilonTooSmall {
            epsilon,
            max_height,
        });
    }
    let g = DMatrix::from_column_slice(3, 1, &[epsilon * dir.x, epsilon * dir.y, epsilon * dir.z]);
    Ok(ConZono::zono(DVector::zeros(3), g)?)
}

/// Extrude a building part along the shadow direction; adds exactly one
/// generator.
pub fn shadow_volume(part: &ConZono, dir_zono: &ConZono) -> Result<ConZono, ShadowError> {
    Ok(part.minkowski_sum(dir_zono)?)
}

/// Intersect a shadow volume with one ground piece (embedded at its height)
/// and drop back to the plane as a convex polygon.
pub fn gnss_shadow_piece(
    vol: &ConZono,
    piece: &GroundPiece,
) -> Result<MultiPolygon2D, ShadowError> {
    let embedded = GroundModel::embed_piece(piece)?;
    let cut = vol.intersect(&embedded)?;
    if cut.is_empty() {
        return Ok(MultiPolygon2D::empty());
    }
    let verts = cut.vertices_capped(64)?;
    // 1e-6 m flatness check, with a relative floor so the long direction
    // generator (scale ~ epsilon) does not trip it on enumeration roundoff.
    let flat_tol = 1e-6f64.max(1e-10 * cut.scale());
    let mut flat = Vec::with_capacity(verts.points.len());
    for p in &verts.points {
        if (p[2] - piece.height).abs() > flat_tol {
            return Err(ShadowError::NotFlat {
                z: p[2],
                height: piece.height,
            });
        }
        flat.push(Vector2::new(p[0], p[1]));
    }
    Ok(MultiPolygon2D::from_convex_points(&flat))
}

/// Union of ground shadows over every building, part and AOI piece.
pub fn satellite_shadow(
    buildings: &[Building],
    sat_pos: &Vector3<f64>,
    ground: &GroundModel,
    epsilon: f64,
) -> Result<SatelliteShadow, ShadowError> {
    let max_h = max_building_height(buildings);
    let mut region = MultiPolygon2D::empty();
    for b in buildings {
        let dir = shadow_direction(b, sat_pos)?;
        let dz = make_direction_zono(&dir, epsilon, max_h)?;
        for part in &b.parts {
            let vol = shadow_volume(part, &dz)?;
            for piece in &ground.aoi_pieces {
                let s = gnss_shadow_piece(&vol, piece)?;
                if !s.is_empty() {
                    region = MultiPolygon2D::union(&region, &s);
                }
            }
        }
    }
    Ok(SatelliteShadow { region })
}
