//! Snapshot shadow-matching estimator: classify satellites by C/N0 and fold
//! per-satellite shadows into the set-valued position estimate.

use std::time::Instant;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::map::{Building, GroundModel};
use crate::polygon::{MultiPolygon2D, Polygon2D};
use crate::shadow::{satellite_shadow, ShadowError};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_LOS_THRESHOLD: f64 = 38.0;
pub const DEFAULT_RANGE_M: f64 = 2.0e7;

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("satellite {0}: needs either a position or azimuth/elevation")]
    UnderspecifiedSatellite(String),
    #[error("street frame must be a nonzero 2-D vector")]
    DegenerateFrame,
    #[error("area of interest is empty")]
    EmptyAoi,
    #[error("no usable satellites after elevation filtering")]
    NoSatellites,
    #[error(transparent)]
    Shadow(#[from] ShadowError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Visibility {
    Los,
    Nlos,
}

/// NLOS iff the C/N0 value is strictly below the threshold.
pub fn classify(cno: f64, threshold: f64) -> Visibility {
    if cno < threshold {
        Visibility::Nlos
    } else {
        Visibility::Los
    }
}

/// One satellite in a scenario file: an explicit ENU position, or
/// azimuth/elevation (range defaults to 2e7 m).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SatelliteRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub azimuth_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elevation_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_m: Option<f64>,
    pub cno: f64,
}

/// One constant-height AOI polygon in a scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AoiPolygon {
    pub ring: Vec<[f64; 2]>,
    #[serde(default)]
    pub height: f64,
}

/// On-disk scenario schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub satellites: Vec<SatelliteRecord>,
    #[serde(default = "default_threshold")]
    pub los_threshold: f64,
    pub street_frame: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_position: Option<[f64; 2]>,
    #[serde(default)]
    pub min_elevation_deg: f64,
    pub aoi: Vec<AoiPolygon>,
}

fn default_threshold() -> f64 {
    DEFAULT_LOS_THRESHOLD
}

#[derive(Debug, Clone)]
pub struct Satellite {
    pub id: String,
    pub position: Vector3<f64>,
    pub cno: f64,
}

/// A resolved scenario: every satellite has an ENU position and the street
/// frame is unit-norm.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub satellites: Vec<Satellite>,
    pub los_threshold: f64,
    pub street_frame: Vector2<f64>,
    pub true_position: Option<[f64; 2]>,
    pub min_elevation_deg: f64,
}

impl Scenario {
    /// Resolve a scenario file; returns the scenario and the AOI spec for
    /// [`crate::map::aoi_from`].
    pub fn resolve(file: &ScenarioFile) -> Result<(Scenario, Vec<(Vec<[f64; 2]>, f64)>), RunnerError> {
        let mut satellites = Vec::with_capacity(file.satellites.len());
        for s in &file.satellites {
            let position = if let Some(p) = s.position {
                Vector3::new(p[0], p[1], p[2])
            } else if let (Some(az), Some(el)) = (s.azimuth_deg, s.elevation_deg) {
                let r = s.range_m.unwrap_or(DEFAULT_RANGE_M);
                crate::scenario::sat_position(az, el, r)
                    .map_err(|_| RunnerError::UnderspecifiedSatellite(s.id.clone()))?
            } else {
                return Err(RunnerError::UnderspecifiedSatellite(s.id.clone()));
            };
            satellites.push(Satellite {
                id: s.id.clone(),
                position,
                cno: s.cno,
            });
        }
        let f = Vector2::new(file.street_frame[0], file.street_frame[1]);
        let n = f.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(RunnerError::DegenerateFrame);
        }
        let scenario = Scenario {
            satellites,
            los_threshold: file.los_threshold,
            street_frame: f / n,
            true_position: file.true_position,
            min_elevation_deg: file.min_elevation_deg,
        };
        let aoi = file.aoi.iter().map(|a| (a.ring.clone(), a.height)).collect();
        Ok((scenario, aoi))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentReport {
    pub centroid: [f64; 2],
    /// Axis-aligned bounding-box widths in the street frame: (cross, along).
    pub widths_cross_along: [f64; 2],
    pub area: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains_truth: Option<bool>,
    /// Truth minus centroid, expressed as (cross, along).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centroid_error_cross_along: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: MultiPolygon2D,
    pub components: Vec<ComponentReport>,
    pub offline_seconds: f64,
    pub online_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

fn elevation_deg(p: &Vector3<f64>) -> f64 {
    p.z.atan2(p.x.hypot(p.y)).to_degrees()
}

/// Signed area and area centroid over all rings of a component (holes carry
/// opposite orientation and subtract automatically).
fn component_centroid(c: &Polygon2D) -> ([f64; 2], f64) {
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for ring in std::iter::once(&c.outer).chain(c.holes.iter()) {
        let n = ring.len();
        for i in 0..n {
            let p = ring[i];
            let q = ring[(i + 1) % n];
            let w = p[0] * q[1] - q[0] * p[1];
            a2 += w;
            cx += (p[0] + q[0]) * w;
            cy += (p[1] + q[1]) * w;
        }
    }
    let area = 0.5 * a2;
    if area.abs() < 1e-300 {
        (c.outer.first().copied().unwrap_or([0.0, 0.0]), 0.0)
    } else {
        ([cx / (6.0 * area), cy / (6.0 * area)], area)
    }
}

/// Per-component street-frame metrics for an estimate.
pub fn street_metrics(
    estimate: &MultiPolygon2D,
    street_frame: &Vector2<f64>,
    true_position: Option<[f64; 2]>,
) -> Vec<ComponentReport> {
    let along = street_frame;
    let cross = Vector2::new(-street_frame.y, street_frame.x);
    let project = |p: [f64; 2]| {
        let v = Vector2::new(p[0], p[1]);
        (cross.dot(&v), along.dot(&v))
    };
    let mut out = Vec::with_capacity(estimate.components.len());
    for c in &estimate.components {
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &c.outer {
            let (x, y) = project(*p);
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
        let (centroid, area) = component_centroid(c);
        let single = MultiPolygon2D {
            components: vec![c.clone()],
        };
        let contains_truth = true_position.map(|t| single.point_in(t));
        let centroid_error_cross_along = true_position.map(|t| {
            let (tc, ta) = project(t);
            let (cc, ca) = project(centroid);
            [tc - cc, ta - ca]
        });
        out.push(ComponentReport {
            centroid,
            widths_cross_along: [hi.0 - lo.0, hi.1 - lo.1],
            area: area.abs(),
            contains_truth,
            centroid_error_cross_along,
        });
    }
    out
}

/// Fold the per-satellite shadows into the set-valued position estimate:
/// start from the AOI, then intersect (NLOS) or subtract (LOS) each
/// satellite's shadow in input order.
pub fn run_zsm(
    buildings: &[Building],
    scenario: &Scenario,
    ground: &GroundModel,
    epsilon: f64,
) -> Result<EstimateReport, RunnerError> {
    if ground.aoi.is_empty() {
        return Err(RunnerError::EmptyAoi);
    }
    let usable: Vec<&Satellite> = scenario
        .satellites
        .iter()
        .filter(|s| elevation_deg(&s.position) >= scenario.min_elevation_deg)
        .collect();
    if usable.is_empty() {
        return Err(RunnerError::NoSatellites);
    }
    let start = Instant::now();
    let mut estimate = ground.aoi.clone();
    let mut warning = None;
    for s in &usable {
        let shadow = satellite_shadow(buildings, &s.position, ground, epsilon)?;
        estimate = match classify(s.cno, scenario.los_threshold) {
            Visibility::Nlos => MultiPolygon2D::intersection(&estimate, &shadow.region),
            Visibility::Los => MultiPolygon2D::difference(&estimate, &shadow.region),
        };
        if estimate.is_empty() {
            warning = Some(format!(
                "estimate became empty after satellite {}; classifications are inconsistent",
                s.id
            ));
            log::warn!("{}", warning.as_ref().unwrap());
            break;
        }
    }
    let online_seconds = start.elapsed().as_secs_f64();
    let components = street_metrics(&estimate, &scenario.street_frame, scenario.true_position);
    Ok(EstimateReport {
        estimate,
        components,
        offline_seconds: 0.0,
        online_seconds,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{aoi_from, build_building};
    use crate::mesh::box_mesh;
    use crate::scenario::sat_position;
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

    fn scenario(sats: Vec<(Vector3<f64>, f64)>) -> Scenario {
        Scenario {
            satellites: sats
                .into_iter()
                .enumerate()
                .map(|(i, (position, cno))| Satellite {
                    id: format!("G{i:02}"),
                    position,
                    cno,
                })
                .collect(),
            los_threshold: 38.0,
            street_frame: Vector2::new(1.0, 0.0),
            true_position: None,
            min_elevation_deg: 0.0,
        }
    }

    #[test]
    fn classify_boundary() {
        assert_eq!(classify(40.0, 38.0), Visibility::Los);
        assert_eq!(classify(30.0, 38.0), Visibility::Nlos);
        assert_eq!(classify(38.0, 38.0), Visibility::Los);
        assert_eq!(classify(37.999, 38.0), Visibility::Nlos);
    }

    #[test]
    fn single_satellite_partitions_aoi() {
        let (buildings, ground) = scene();
        let sat = sat_position(90.0, 30.0, 2e7).unwrap();
        let nlos = run_zsm(&buildings, &scenario(vec![(sat, 28.0)]), &ground, 1e5).unwrap();
        let los = run_zsm(&buildings, &scenario(vec![(sat, 45.0)]), &ground, 1e5).unwrap();
        let total = nlos.estimate.area() + los.estimate.area();
        assert_relative_eq!(total, ground.aoi.area(), epsilon = 1e-3);
        assert!(nlos.estimate.area() > 0.0);
        assert!(los.estimate.area() > 0.0);
        assert!(
            MultiPolygon2D::intersection(&nlos.estimate, &los.estimate).area() < 1e-6
        );
    }

    #[test]
    fn monotone_refinement_and_order_invariance() {
        let (buildings, ground) = scene();
        let sats = vec![
            (sat_position(90.0, 25.0, 2e7).unwrap(), 28.0),
            (sat_position(180.0, 40.0, 2e7).unwrap(), 45.0),
            (sat_position(300.0, 55.0, 2e7).unwrap(), 45.0),
        ];
        let full = run_zsm(&buildings, &scenario(sats.clone()), &ground, 1e5).unwrap();
        let partial = run_zsm(&buildings, &scenario(sats[..2].to_vec()), &ground, 1e5).unwrap();
        // adding a satellite only refines
        assert!(
            MultiPolygon2D::difference(&full.estimate, &partial.estimate).area() < 1e-6
        );
        let mut rev = sats.clone();
        rev.reverse();
        let swapped = run_zsm(&buildings, &scenario(rev), &ground, 1e5).unwrap();
        assert!(
            MultiPolygon2D::sym_diff_area(&full.estimate, &swapped.estimate)
                < 1e-6 * ground.aoi.area()
        );
    }

    #[test]
    fn street_metrics_basics() {
        let square = MultiPolygon2D::from_rings(&[vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
        ]]);
        let frame = Vector2::new(1.0, 0.0);
        let m = street_metrics(&square, &frame, Some([0.5, 0.5]));
        assert_eq!(m.len(), 1);
        assert_relative_eq!(m[0].centroid[0], 0.5, epsilon = 1e-9);
        assert_relative_eq!(m[0].widths_cross_along[0], 1.0, epsilon = 1e-9);
        let e = m[0].centroid_error_cross_along.unwrap();
        assert_relative_eq!(e[0], 0.0, epsilon = 1e-9);
        assert_relative_eq!(e[1], 0.0, epsilon = 1e-9);
        assert_eq!(m[0].contains_truth, Some(true));

        // rectangle: rotating the frame by 90 degrees swaps the width tuple
        let rect = MultiPolygon2D::from_rings(&[vec![
            [0.0, 0.0],
            [3.0, 0.0],
            [3.0, 1.0],
            [0.0, 1.0],
        ]]);
        let m1 = street_metrics(&rect, &Vector2::new(1.0, 0.0), None);
        let m2 = street_metrics(&rect, &Vector2::new(0.0, 1.0), None);
        assert_relative_eq!(m1[0].widths_cross_along[0], m2[0].widths_cross_along[1], epsilon = 1e-9);
        assert_relative_eq!(m1[0].widths_cross_along[1], m2[0].widths_cross_along[0], epsilon = 1e-9);
    }

    #[test]
    fn two_component_errors() {
        let two = MultiPolygon2D::from_rings(&[
            vec![[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]],
            vec![[9.5, -0.5], [10.5, -0.5], [10.5, 0.5], [9.5, 0.5]],
        ]);
        let m = street_metrics(&two, &Vector2::new(1.0, 0.0), Some([0.0, 0.0]));
        assert_eq!(m.len(), 2);
        let mut along: Vec<f64> = m
            .iter()
            .map(|c| c.centroid_error_cross_along.unwrap()[1].abs())
            .collect();
        along.sort_by(f64::total_cmp);
        assert_relative_eq!(along[0], 0.0, epsilon = 1e-9);
        assert_relative_eq!(along[1], 10.0, epsilon = 1e-9);
        assert_eq!(m.iter().filter(|c| c.contains_truth == Some(true)).count(), 1);
    }

    #[test]
    fn scenario_file_resolution() {
        let file = ScenarioFile {
            schema_version: SCENARIO_SCHEMA_VERSION,
            satellites: vec![
                SatelliteRecord {
                    id: "G01".into(),
                    position: Some([0.0, 0.0, 2e7]),
                    azimuth_deg: None,
                    elevation_deg: None,
                    range_m: None,
                    cno: 45.0,
                },
                SatelliteRecord {
                    id: "G02".into(),
                    position: None,
                    azimuth_deg: Some(90.0),
                    elevation_deg: Some(30.0),
                    range_m: None,
                    cno: 28.0,
                },
            ],
            los_threshold: 38.0,
            street_frame: [2.0, 0.0],
            true_position: Some([1.0, 2.0]),
            min_elevation_deg: 0.0,
            aoi: vec![AoiPolygon {
                ring: vec![[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]],
                height: 0.0,
            }],
        };
        let (sc, aoi) = Scenario::resolve(&file).unwrap();
        assert_relative_eq!(sc.street_frame.norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(sc.satellites[1].position.norm(), 2e7, epsilon = 1.0);
        assert!(sc.satellites[1].position.x > 0.0);
        assert_eq!(aoi.len(), 1);

        let round = serde_json::to_string(&file).unwrap();
        let back: ScenarioFile = serde_json::from_str(&round).unwrap();
        assert_eq!(back.satellites.len(), 2);
    }

    #[test]
    fn empty_estimate_warns() {
        let (buildings, ground) = scene();
        // contradictory labels for the same satellite geometry
        let sat = sat_position(90.0, 30.0, 2e7).unwrap();
        let sats = vec![(sat, 28.0), (sat + Vector3::new(1.0, 0.0, 0.0), 45.0)];
        let rep = run_zsm(&buildings, &scenario(sats), &ground, 1e5).unwrap();
        assert!(rep.estimate.is_empty());
        assert!(rep.warning.is_some());
    }
}
