//! Urban map model: buildings as (unions of) constrained zonotopes, the
//! ground plane and the area of interest.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::conzono::{ConZono, ConZonoError};
use crate::hull::{extreme_points, hull3d};
use crate::mesh::TriangleMesh;
use crate::polygon::MultiPolygon2D;

pub type BuildingSet = Vec<Building>;

#[derive(Debug, thiserror::Error)]
pub enum MapError {
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("degenerate triangle (area below tolerance)")]
    DegenerateTriangle,
    #[error("area of interest is empty")]
    EmptyAoi,
    #[error(transparent)]
    ConZono(#[from] ConZonoError),
}

/// A building: one or more convex 3-D parts, with the vertex lists, anchor
/// point and ground footprint cached at construction time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Building {
    pub id: String,
    pub parts: Vec<ConZono>,
    /// Vertices of each part, in part order (what the anchor averages).
    pub part_vertices: Vec<Vec<Vector3<f64>>>,
    pub anchor: Vector3<f64>,
    pub footprint: MultiPolygon2D,
}

/// One convex ground-plane piece at a constant height.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundPiece {
    pub region: ConZono,
    pub height: f64,
    /// The piece's ring in the plane, kept for fast point queries.
    pub ring: Vec<[f64; 2]>,
}

/// Ground plane plus the area of interest, both as collections of convex
/// constant-height pieces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundModel {
    pub pieces: Vec<GroundPiece>,
    pub aoi: MultiPolygon2D,
    pub aoi_pieces: Vec<GroundPiece>,
}

/// A triangle as a constrained zonotope: the hull of the first two vertices,
/// then the hull of that segment with the third — two applications of the
/// pairwise convex-hull construction.
pub fn triangle_to_conzono(
    t1: &Vector3<f64>,
    t2: &Vector3<f64>,
    t3: &Vector3<f64>,
) -> Result<ConZono, MapError> {
    let area = 0.5 * (t2 - t1).cross(&(t3 - t1)).norm();
    if area <= 1e-9 {
        return Err(MapError::DegenerateTriangle);
    }
    let p = |v: &Vector3<f64>| ConZono::point(DVector::from_row_slice(&[v.x, v.y, v.z]));
    let seg = p(t1).convex_hull_pair(&p(t2))?;
    Ok(seg.convex_hull_pair(&p(t3))?)
}

fn v3_to_dv(v: &Vector3<f64>) -> DVector<f64> {
    DVector::from_row_slice(&[v.x, v.y, v.z])
}

/// Build a [`Building`] from one segmented component mesh.
///
/// With `merge` false there is one part per triangle. With `merge` true the
/// whole component becomes a single convex part — the convex hull of its
/// vertices, converted exactly from vertex representation. A warning is
/// emitted when the component is non-convex, since hulling then enlarges the
/// building (and its shadows).
pub fn build_building(mesh: &TriangleMesh, merge: bool, id: &str) -> Result<Building, MapError> {
    if mesh.triangles.is_empty() {
        return Err(MapError::EmptyMesh);
    }
    let (parts, part_vertices): (Vec<ConZono>, Vec<Vec<Vector3<f64>>>) = if merge {
        let scale = mesh
            .vertices
            .iter()
            .map(|v| v.x.abs().max(v.y.abs()).max(v.z.abs()))
            .fold(1.0f64, f64::max);
        let hull = hull3d(&mesh.vertices).map_err(|_| MapError::DegenerateTriangle)?;
        let dv: Vec<DVector<f64>> = hull.vertices.iter().map(v3_to_dv).collect();
        let keep = extreme_points(&dv, 1e-9);
        let verts: Vec<Vector3<f64>> = keep.iter().map(|&i| hull.vertices[i]).collect();
        // Non-convexity check: any mesh vertex strictly interior to the hull
        // means the hull adds volume.
        let tol = 1e-6 * scale;
        'outer: for v in &mesh.vertices {
            for f in 0..hull.facets.len() {
                let (n, off) = hull.facet_plane(f);
                if n.dot(v) > off - tol {
                    continue 'outer; // on (or numerically at) the boundary
                }
            }
            log::warn!("building {id}: non-convex component hulled into a convex part");
            break;
        }
        let part = ConZono::from_vertices(&verts.iter().map(v3_to_dv).collect::<Vec<_>>())?;
        (vec![part], vec![verts])
    } else {
        let mut parts = Vec::new();
        let mut pv = Vec::new();
        for t in &mesh.triangles {
            let (a, b, c) = (
                mesh.vertices[t[0]],
                mesh.vertices[t[1]],
                mesh.vertices[t[2]],
            );
            parts.push(triangle_to_conzono(&a, &b, &c)?);
            pv.push(vec![a, b, c]);
        }
        (parts, pv)
    };

    let anchor = anchor_of(&part_vertices);
    let footprint = footprint_of(&part_vertices);
    Ok(Building {
        id: id.to_string(),
        parts,
        part_vertices,
        anchor,
        footprint,
    })
}

/// Mean of the concatenated per-part vertex lists (duplicates across parts
/// retained as listed).
pub fn anchor_of(part_vertices: &[Vec<Vector3<f64>>]) -> Vector3<f64> {
    let mut sum = Vector3::zeros();
    let mut k = 0usize;
    for pv in part_vertices {
        for v in pv {
            sum += v;
            k += 1;
        }
    }
    sum / k.max(1) as f64
}

/// Union over parts of the drop-z projection of each part's vertex hull.
pub fn footprint_of(part_vertices: &[Vec<Vector3<f64>>]) -> MultiPolygon2D {
    let mut fp = MultiPolygon2D::empty();
    for pv in part_vertices {
        let pts: Vec<Vector2<f64>> = pv.iter().map(|v| Vector2::new(v.x, v.y)).collect();
        let poly = MultiPolygon2D::from_convex_points(&pts);
        if !poly.is_empty() {
            fp = MultiPolygon2D::union(&fp, &poly);
        }
    }
    fp
}

/// Recompute a building's footprint from its cached part vertices.
pub fn footprint(b: &Building) -> MultiPolygon2D {
    footprint_of(&b.part_vertices)
}

/// The tallest vertex over all buildings, used to validate the shadow
/// direction scaling.
pub fn max_building_height(buildings: &[Building]) -> f64 {
    buildings
        .iter()
        .flat_map(|b| b.part_vertices.iter())
        .flat_map(|pv| pv.iter())
        .map(|v| v.z)
        .fold(0.0f64, f64::max)
}

/// Ground model from constant-height polygons, without footprint exclusion.
pub fn make_ground(spec: &[(Vec<[f64; 2]>, f64)]) -> Result<GroundModel, MapError> {
    aoi_from(spec, false, &[])
}

/// Ground/AOI model: each spec polygon (at its height) is optionally reduced
/// by the building footprints, then triangulated into convex pieces, each
/// stored as a 2-D constrained zonotope.
pub fn aoi_from(
    spec: &[(Vec<[f64; 2]>, f64)],
    exclude_footprints: bool,
    buildings: &[Building],
) -> Result<GroundModel, MapError> {
    if spec.is_empty() {
        return Err(MapError::EmptyAoi);
    }
    let mut pieces = Vec::new();
    let mut aoi = MultiPolygon2D::empty();
    for (ring, height) in spec {
        let mut region = MultiPolygon2D::from_rings(&[ring.clone()]);
        if exclude_footprints {
            for b in buildings {
                region = MultiPolygon2D::difference(&region, &b.footprint);
            }
        }
        if region.is_empty() {
            continue;
        }
        for tri in region.triangulate() {
            let pts: Vec<DVector<f64>> = tri
                .iter()
                .map(|p| DVector::from_row_slice(&[p[0], p[1]]))
                .collect();
            pieces.push(GroundPiece {
                region: ConZono::from_vertices(&pts)?,
                height: *height,
                ring: tri.to_vec(),
            });
        }
        aoi = MultiPolygon2D::union(&aoi, &region);
    }
    if aoi.is_empty() || pieces.is_empty() {
        return Err(MapError::EmptyAoi);
    }
    Ok(GroundModel {
        pieces: pieces.clone(),
        aoi,
        aoi_pieces: pieces,
    })
}

impl GroundModel {
    /// Ground height under a 2-D point (first matching piece), if any.
    pub fn height_at(&self, p: [f64; 2]) -> Option<f64> {
        let inside_tri = |ring: &[[f64; 2]], q: [f64; 2]| -> bool {
            let n = ring.len();
            let mut pos = false;
            let mut neg = false;
            for i in 0..n {
                let a = ring[i];
                let b = ring[(i + 1) % n];
                let c = (b[0] - a[0]) * (q[1] - a[1]) - (b[1] - a[1]) * (q[0] - a[0]);
                if c > 1e-9 {
                    pos = true;
                }
                if c < -1e-9 {
                    neg = true;
                }
            }
            !(pos && neg)
        };
        self.pieces
            .iter()
            .find(|piece| inside_tri(&piece.ring, p))
            .map(|piece| piece.height)
    }

    /// Embed a 2-D ground piece at its height: `(x, y) -> (x, y, h)`.
    pub fn embed_piece(piece: &GroundPiece) -> Result<ConZono, ConZonoError> {
        let lift = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let off = DVector::from_row_slice(&[0.0, 0.0, piece.height]);
        piece.region.affine_map(&lift, &off)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::box_mesh;
    use approx::assert_relative_eq;

    #[test]
    fn triangle_round_trip() {
        let t = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
        ];
        let z = triangle_to_conzono(&t[0], &t[1], &t[2]).unwrap();
        assert_eq!(z.num_generators(), 4);
        assert_eq!(z.num_constraints(), 2);
        let v = z.vertices().unwrap();
        assert_eq!(v.points.len(), 3);
        for w in &t {
            assert!(v.points.iter().any(|p| (p - v3_to_dv(w)).norm() < 1e-9));
        }
        // permutation gives the same set
        let z2 = triangle_to_conzono(&t[2], &t[0], &t[1]).unwrap();
        let v2 = z2.vertices().unwrap();
        for w in &t {
            assert!(v2.points.iter().any(|p| (p - v3_to_dv(w)).norm() < 1e-9));
        }
    }

    #[test]
    fn skew_triangle_round_trip() {
        let t = [
            Vector3::new(0.3, -1.0, 2.0),
            Vector3::new(4.0, 0.5, -1.0),
            Vector3::new(-2.0, 3.0, 5.0),
        ];
        let z = triangle_to_conzono(&t[0], &t[1], &t[2]).unwrap();
        let v = z.vertices().unwrap();
        assert_eq!(v.points.len(), 3);
        for w in &t {
            assert!(v.points.iter().any(|p| (p - v3_to_dv(w)).norm() < 1e-7));
        }
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let r = triangle_to_conzono(
            &Vector3::new(0.0, 0.0, 0.0),
            &Vector3::new(1.0, 0.0, 0.0),
            &Vector3::new(2.0, 0.0, 0.0),
        );
        assert!(matches!(r, Err(MapError::DegenerateTriangle)));
    }

    #[test]
    fn merged_box_building() {
        let mesh = box_mesh(Vector3::zeros(), Vector3::new(10.0, 10.0, 20.0));
        let b = build_building(&mesh, true, "b0").unwrap();
        assert_eq!(b.parts.len(), 1);
        assert_eq!(b.part_vertices[0].len(), 8);
        assert_relative_eq!(b.anchor.x, 5.0, epsilon = 1e-9);
        assert_relative_eq!(b.anchor.z, 10.0, epsilon = 1e-9);
        assert_relative_eq!(b.footprint.area(), 100.0, epsilon = 1e-6);
        // every mesh vertex is inside the merged part
        for v in &mesh.vertices {
            assert!(b.parts[0].contains_point(&v3_to_dv(v), 1e-7));
        }
    }

    #[test]
    fn unmerged_box_has_twelve_parts() {
        let mesh = box_mesh(Vector3::zeros(), Vector3::new(1.0, 1.0, 1.0));
        let b = build_building(&mesh, false, "b0").unwrap();
        assert_eq!(b.parts.len(), 12);
        assert_relative_eq!(b.anchor.x, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn ground_pieces_and_area() {
        let ring = vec![[0.0, 0.0], [120.0, 0.0], [120.0, 120.0], [0.0, 120.0]];
        let g = make_ground(&[(ring, 0.0)]).unwrap();
        assert_eq!(g.aoi_pieces.len(), 2);
        assert_relative_eq!(g.aoi.area(), 14400.0, epsilon = 1e-6);
        assert_eq!(g.height_at([60.0, 60.0]), Some(0.0));
        assert_eq!(g.height_at([130.0, 60.0]), None);
    }

    #[test]
    fn aoi_with_footprint_exclusion() {
        let mesh = box_mesh(Vector3::new(50.0, 50.0, 0.0), Vector3::new(60.0, 60.0, 30.0));
        let b = build_building(&mesh, true, "b0").unwrap();
        let ring = vec![[0.0, 0.0], [120.0, 0.0], [120.0, 120.0], [0.0, 120.0]];
        let g = aoi_from(&[(ring, 0.0)], true, &[b]).unwrap();
        assert_relative_eq!(g.aoi.area(), 14300.0, epsilon = 1e-6);
        // piece areas cover the aoi
        let piece_area: f64 = g
            .aoi_pieces
            .iter()
            .map(|p| {
                let r = &p.ring;
                0.5 * ((r[1][0] - r[0][0]) * (r[2][1] - r[0][1])
                    - (r[1][1] - r[0][1]) * (r[2][0] - r[0][0]))
                    .abs()
            })
            .sum();
        assert_relative_eq!(piece_area, 14300.0, epsilon = 1e-6);
    }

    #[test]
    fn empty_spec_errors() {
        assert!(matches!(make_ground(&[]), Err(MapError::EmptyAoi)));
    }

    #[test]
    fn pyramid_footprint_is_base() {
        let verts = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(4.0, 0.0, 0.0),
            Vector3::new(4.0, 4.0, 0.0),
            Vector3::new(0.0, 4.0, 0.0),
            Vector3::new(2.0, 2.0, 5.0),
        ];
        let triangles = vec![
            [0, 2, 1],
            [0, 3, 2],
            [0, 1, 4],
            [1, 2, 4],
            [2, 3, 4],
            [3, 0, 4],
        ];
        let mesh = TriangleMesh {
            vertices: verts,
            triangles,
        };
        let b = build_building(&mesh, true, "pyr").unwrap();
        assert_relative_eq!(b.footprint.area(), 16.0, epsilon = 1e-6);
    }
}
