//! Scenario generation: ENU satellite placement and ideal-classifier NLOS
//! emulation with C/N0 assignment.

use nalgebra::{DVector, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::map::{Building, GroundModel};
use crate::runner::{classify, Visibility};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("elevation {0} deg outside (0, 90]")]
    BadElevation(f64),
    #[error("range {0} must be positive")]
    BadRange(f64),
    #[error("true position lies inside a building footprint")]
    TruthInFootprint,
    #[error("true position lies outside the area of interest")]
    TruthOutsideAoi,
}

/// C/N0 emulation parameters: open-sky and attenuated levels around the
/// classification threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmulationSpec {
    pub base_cno: f64,
    pub attenuated_cno: f64,
    pub threshold: f64,
    pub seed: u64,
    /// Optional uniform C/N0 jitter of up to ±2 dB-Hz that never crosses the
    /// threshold.
    pub jitter: bool,
}

impl Default for EmulationSpec {
    fn default() -> Self {
        EmulationSpec {
            base_cno: 45.0,
            attenuated_cno: 28.0,
            threshold: 38.0,
            seed: 0,
            jitter: false,
        }
    }
}

/// ENU position from azimuth (deg, clockwise from north), elevation (deg)
/// and range (m).
pub fn sat_position(azimuth_deg: f64, elevation_deg: f64, range_m: f64) -> Result<Vector3<f64>, ScenarioError> {
    if !(elevation_deg > 0.0 && elevation_deg <= 90.0) {
        return Err(ScenarioError::BadElevation(elevation_deg));
    }
    if !(range_m > 0.0) {
        return Err(ScenarioError::BadRange(range_m));
    }
    let az = azimuth_deg.to_radians();
    let el = elevation_deg.to_radians();
    Ok(Vector3::new(
        range_m * az.sin() * el.cos(),
        range_m * az.cos() * el.cos(),
        range_m * el.sin(),
    ))
}

/// True iff the straight segment from `from` to the satellite is blocked by
/// any building part.
pub fn occluded(from: &Vector3<f64>, sat_pos: &Vector3<f64>, buildings: &[Building]) -> bool {
    let p = DVector::from_row_slice(&[from.x, from.y, from.z]);
    let q = DVector::from_row_slice(&[sat_pos.x, sat_pos.y, sat_pos.z]);
    buildings
        .iter()
        .flat_map(|b| b.parts.iter())
        .any(|part| part.segment_hits(&p, &q))
}

/// Emulated per-satellite C/N0 values and the occlusion labels they encode.
///
/// The classifier applied to these values reproduces the labels exactly, so
/// downstream runs see an ideal classifier.
pub fn emulate(
    true_pos: [f64; 2],
    buildings: &[Building],
    satellites: &[Vector3<f64>],
    ground: &GroundModel,
    spec: &EmulationSpec,
) -> Result<Vec<(f64, Visibility)>, ScenarioError> {
    if buildings.iter().any(|b| b.footprint.point_in(true_pos)) {
        return Err(ScenarioError::TruthInFootprint);
    }
    let h = ground
        .height_at(true_pos)
        .ok_or(ScenarioError::TruthOutsideAoi)?;
    let from = Vector3::new(true_pos[0], true_pos[1], h);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(satellites.len());
    for s in satellites {
        let label = if occluded(&from, s, buildings) {
            Visibility::Nlos
        } else {
            Visibility::Los
        };
        let base = match label {
            Visibility::Los => spec.base_cno,
            Visibility::Nlos => spec.attenuated_cno,
        };
        let mut cno = base;
        if spec.jitter {
            cno += rng.random_range(-2.0..2.0);
            // Jitter must never flip the classification.
            cno = match label {
                Visibility::Los => cno.max(spec.threshold),
                Visibility::Nlos => cno.min(spec.threshold - 0.1),
            };
        }
        debug_assert_eq!(classify(cno, spec.threshold), label);
        out.push((cno, label));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{aoi_from, build_building};
    use crate::mesh::box_mesh;
    use approx::assert_relative_eq;

    fn scene() -> (Vec<Building>, GroundModel) {
        let b = build_building(
            &box_mesh(Vector3::new(20.0, -10.0, 0.0), Vector3::new(30.0, 10.0, 40.0)),
            true,
            "b0",
        )
        .unwrap();
        let ring = vec![[-50.0, -50.0], [50.0, -50.0], [50.0, 50.0], [-50.0, 50.0]];
        let g = aoi_from(&[(ring, 0.0)], false, &[]).unwrap();
        (vec![b], g)
    }

    #[test]
    fn enu_placement() {
        let z = sat_position(0.0, 90.0, 2e7).unwrap();
        assert_relative_eq!(z.z, 2e7, epsilon = 1e-3);
        let e = sat_position(90.0, 1e-6, 1.0).unwrap();
        assert_relative_eq!(e.x, 1.0, epsilon = 1e-6);
        let d = sat_position(45.0, 45.0, 1.0).unwrap();
        assert_relative_eq!(d.x, 0.5, epsilon = 1e-12);
        assert_relative_eq!(d.y, 0.5, epsilon = 1e-12);
        assert_relative_eq!(d.z, 2.0f64.sqrt() / 2.0, epsilon = 1e-12);
        assert!(sat_position(0.0, 0.0, 1.0).is_err());
        assert!(sat_position(0.0, 45.0, -1.0).is_err());
    }

    #[test]
    fn occlusion_labels() {
        let (buildings, ground) = scene();
        // Receiver west of the box; a low eastern satellite is blocked,
        // zenith and western satellites are not.
        let east_low = sat_position(90.0, 20.0, 2e7).unwrap();
        let west_low = sat_position(270.0, 20.0, 2e7).unwrap();
        let zenith = sat_position(0.0, 90.0, 2e7).unwrap();
        let sats = vec![east_low, west_low, zenith];
        let spec = EmulationSpec::default();
        let out = emulate([0.0, 0.0], &buildings, &sats, &ground, &spec).unwrap();
        assert_eq!(out[0].1, Visibility::Nlos);
        assert_eq!(out[1].1, Visibility::Los);
        assert_eq!(out[2].1, Visibility::Los);
        assert_relative_eq!(out[0].0, 28.0);
        assert_relative_eq!(out[1].0, 45.0);
    }

    #[test]
    fn jitter_preserves_labels() {
        let (buildings, ground) = scene();
        let sats = vec![
            sat_position(90.0, 20.0, 2e7).unwrap(),
            sat_position(0.0, 90.0, 2e7).unwrap(),
        ];
        let spec = EmulationSpec {
            jitter: true,
            seed: 7,
            ..EmulationSpec::default()
        };
        for seed in 0..20 {
            let s = EmulationSpec { seed, ..spec.clone() };
            let out = emulate([0.0, 0.0], &buildings, &sats, &ground, &s).unwrap();
            assert_eq!(classify(out[0].0, s.threshold), Visibility::Nlos);
            assert_eq!(classify(out[1].0, s.threshold), Visibility::Los);
        }
    }

    #[test]
    fn truth_inside_footprint_rejected() {
        let (buildings, ground) = scene();
        let sats = vec![sat_position(0.0, 90.0, 2e7).unwrap()];
        let r = emulate([25.0, 0.0], &buildings, &sats, &ground, &EmulationSpec::default());
        assert!(matches!(r, Err(ScenarioError::TruthInFootprint)));
        let r = emulate([200.0, 0.0], &buildings, &sats, &ground, &EmulationSpec::default());
        assert!(matches!(r, Err(ScenarioError::TruthOutsideAoi)));
    }
}
