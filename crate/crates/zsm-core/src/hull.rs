//! Convex hulls in 2-D and 3-D.
//!
//! The 3-D hull is an incremental construction over deterministically
//! joggled copies of the input, which keeps the visibility predicates
//! generic on exactly coplanar data (boxes, prisms). Output indices always
//! refer to the original, unperturbed points. Callers that need an exact
//! vertex set additionally filter through [`extreme_points`].

use nalgebra::{DMatrix, DVector, Vector2, Vector3};

use crate::lp::{solve_box_lp, LpResult};

/// Counterclockwise convex hull of a 2-D point set (monotone chain).
///
/// Collinear points on the hull boundary are dropped. Degenerate inputs
/// return fewer than three points (segment endpoints or a single point).
pub fn hull2d(points: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let mut pts: Vec<Vector2<f64>> = points.to_vec();
    pts.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
    pts.dedup_by(|a, b| (*a - *b).norm() == 0.0);
    if pts.len() < 3 {
        return pts;
    }
    let scale = pts
        .iter()
        .map(|p| p.x.abs().max(p.y.abs()))
        .fold(1.0f64, f64::max);
    let eps = 1e-12 * scale * scale;
    let cross = |o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let mut lower: Vec<Vector2<f64>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= eps
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Vector2<f64>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= eps
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        // All collinear: keep the two extreme points.
        return vec![pts[0], pts[pts.len() - 1]];
    }
    lower
}

/// A triangulated 3-D convex hull. `facets` index into `vertices` and are
/// oriented outward; coplanar faces appear as multiple triangles.
#[derive(Debug, Clone)]
pub struct Hull3 {
    pub vertices: Vec<Vector3<f64>>,
    pub facets: Vec<[usize; 3]>,
}

impl Hull3 {
    /// Outward unit normal and offset of a facet: `n . x <= off` on the hull.
    pub fn facet_plane(&self, f: usize) -> (Vector3<f64>, f64) {
        let [i, j, k] = self.facets[f];
        let n = (self.vertices[j] - self.vertices[i])
            .cross(&(self.vertices[k] - self.vertices[i]));
        let norm = n.norm();
        let n = if norm > 0.0 { n / norm } else { Vector3::zeros() };
        (n, n.dot(&self.vertices[self.facets[f][0]]))
    }
}

/// Failure modes for the 3-D hull.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Hull3Error {
    #[error("point set is degenerate (affine dimension {dim} < 3)")]
    Degenerate { dim: usize },
}

/// Incremental 3-D convex hull.
///
/// Orientation tests run in exact `i128` arithmetic on deterministically
/// joggled, quantized copies of the input, so the visible region is always
/// edge-connected and the horizon a simple cycle — float predicates near
/// coplanar data would corrupt the facet topology instead. Output indices
/// refer to the original, unperturbed points.
pub fn hull3d(points: &[Vector3<f64>]) -> Result<Hull3, Hull3Error> {
    let n = points.len();
    if n < 4 {
        return Err(Hull3Error::Degenerate { dim: n.saturating_sub(1) });
    }
    let scale = points
        .iter()
        .map(|p| p.x.abs().max(p.y.abs()).max(p.z.abs()))
        .fold(1.0f64, f64::max);

    let eps = 1e-10 * scale;

    // Initial tetrahedron from extreme points. Selection and the degeneracy
    // checks run on the original coordinates: the joggle would otherwise
    // inflate exactly flat inputs past the tolerance.
    let orig = points;
    let i0 = (0..n)
        .min_by(|&a, &b| {
            (orig[a].x, orig[a].y, orig[a].z)
                .partial_cmp(&(orig[b].x, orig[b].y, orig[b].z))
                .unwrap()
        })
        .unwrap();
    let i1 = (0..n)
        .max_by(|&a, &b| {
            (orig[a] - orig[i0])
                .norm_squared()
                .partial_cmp(&(orig[b] - orig[i0]).norm_squared())
                .unwrap()
        })
        .unwrap();
    if (orig[i1] - orig[i0]).norm() <= eps {
        return Err(Hull3Error::Degenerate { dim: 0 });
    }
    let d01 = orig[i1] - orig[i0];
    let i2 = (0..n)
        .max_by(|&a, &b| {
            d01.cross(&(orig[a] - orig[i0]))
                .norm_squared()
                .partial_cmp(&d01.cross(&(orig[b] - orig[i0])).norm_squared())
                .unwrap()
        })
        .unwrap();
    if d01.cross(&(orig[i2] - orig[i0])).norm() <= eps * d01.norm() {
        return Err(Hull3Error::Degenerate { dim: 1 });
    }
    let nrm = d01.cross(&(orig[i2] - orig[i0]));
    let i3 = (0..n)
        .max_by(|&a, &b| {
            nrm.dot(&(orig[a] - orig[i0]))
                .abs()
                .partial_cmp(&nrm.dot(&(orig[b] - orig[i0])).abs())
                .unwrap()
        })
        .unwrap();
    let vol = nrm.dot(&(orig[i3] - orig[i0]));
    if vol.abs() <= eps * nrm.norm() {
        return Err(Hull3Error::Degenerate { dim: 2 });
    }
    // Quantized, joggled exact coordinates: ~1e-11 relative resolution leaves
    // plenty of i128 headroom for the 3x3 orientation determinant, and the
    // deterministic joggle (well above one quantum) keeps the input generic.
    // A failed attempt — exactly degenerate despite the joggle, or a facet
    // count violating Euler's formula — retries with a larger joggle.
    let quant = 1e11 / scale;
    let mut facets: Vec<[usize; 3]> = Vec::new();
    let mut ok = false;
    for attempt in 0..4 {
        let jog = 1e-8 * scale * 10f64.powi(attempt);
        let qpts: Vec<[i128; 3]> = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let h = |k: u64| {
                    let mut x = (i as u64)
                        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                        .wrapping_add(k.wrapping_mul(attempt as u64 + 1));
                    x ^= x >> 33;
                    x = x.wrapping_mul(0xff51_afd7_ed55_8ccd);
                    x ^= x >> 33;
                    (x as f64 / u64::MAX as f64) * 2.0 - 1.0
                };
                [
                    ((p.x + jog * h(1)) * quant).round() as i128,
                    ((p.y + jog * h(2)) * quant).round() as i128,
                    ((p.z + jog * h(3)) * quant).round() as i128,
                ]
            })
            .collect();
        if let Some(f) = exact_hull3d(&qpts, [i0, i1, i2, i3]) {
            facets = f;
            ok = true;
            break;
        }
    }
    if !ok {
        // The float checks above passed, so the set is 3-dimensional; an
        // exact-arithmetic failure after joggle escalation is not expected.
        return Err(Hull3Error::Degenerate { dim: 2 });
    }

    // Re-index to the touched vertices, reported in original coordinates.
    let mut used: Vec<usize> = facets.iter().flatten().cloned().collect();
    used.sort_unstable();
    used.dedup();
    let mut remap = vec![usize::MAX; n];
    let mut vertices = Vec::with_capacity(used.len());
    for (new_i, &old_i) in used.iter().enumerate() {
        remap[old_i] = new_i;
        vertices.push(points[old_i]);
    }
    let facets = facets
        .iter()
        .map(|f| [remap[f[0]], remap[f[1]], remap[f[2]]])
        .collect();
    Ok(Hull3 { vertices, facets })
}

/// Exact incremental hull over integer coordinates; `seed` is a spanning
/// tetrahedron. Returns outward-oriented facets, or `None` when the input is
/// exactly degenerate or the facet graph fails its closed-surface checks.
fn exact_hull3d(q: &[[i128; 3]], seed: [usize; 4]) -> Option<Vec<[usize; 3]>> {
    use std::collections::HashSet;
    let n = q.len();
    let sub = |a: &[i128; 3], b: &[i128; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    // Sign of the determinant [b-a, c-a, d-a]: positive iff `d` is on the
    // outward side of the oriented triangle (a, b, c).
    let orient = |a: usize, b: usize, c: usize, d: usize| -> i128 {
        let u = sub(&q[b], &q[a]);
        let v = sub(&q[c], &q[a]);
        let w = sub(&q[d], &q[a]);
        (u[1] * v[2] - u[2] * v[1]) * w[0]
            + (u[2] * v[0] - u[0] * v[2]) * w[1]
            + (u[0] * v[1] - u[1] * v[0]) * w[2]
    };
    let [i0, i1, i2, i3] = seed;
    let vol = orient(i0, i1, i2, i3);
    if vol == 0 {
        return None;
    }
    // Oriented facet list; facet (a,b,c) has outward normal (b-a)x(c-a).
    let mut facets: Vec<[usize; 3]> = if vol < 0 {
        vec![[i0, i1, i2], [i0, i3, i1], [i1, i3, i2], [i0, i2, i3]]
    } else {
        vec![[i0, i2, i1], [i0, i1, i3], [i1, i2, i3], [i0, i3, i2]]
    };

    // Single pass: the hull only grows, so a point inside the current hull
    // stays inside the final one. Exact predicates keep the visible region
    // edge-connected and the horizon a simple cycle.
    for idx in 0..n {
        let visible: Vec<bool> = facets
            .iter()
            .map(|f| orient(f[0], f[1], f[2], idx) > 0)
            .collect();
        if !visible.iter().any(|v| *v) {
            continue;
        }
        let mut vis_edges: HashSet<(usize, usize)> = HashSet::new();
        for (fi, f) in facets.iter().enumerate() {
            if visible[fi] {
                vis_edges.insert((f[0], f[1]));
                vis_edges.insert((f[1], f[2]));
                vis_edges.insert((f[2], f[0]));
            }
        }
        let mut horizon: Vec<(usize, usize)> = vis_edges
            .iter()
            .filter(|(a, b)| !vis_edges.contains(&(*b, *a)))
            .cloned()
            .collect();
        horizon.sort();
        let mut new_facets: Vec<[usize; 3]> = facets
            .iter()
            .zip(&visible)
            .filter(|(_, v)| !**v)
            .map(|(f, _)| *f)
            .collect();
        for (a, b) in horizon {
            new_facets.push([a, b, idx]);
        }
        facets = new_facets;
    }

    // Closed-surface sanity: every directed edge unique with its reverse
    // present, and the facet count matching Euler's formula.
    let mut dir_edges: HashSet<(usize, usize)> = HashSet::new();
    for f in &facets {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            if !dir_edges.insert((a, b)) {
                return None;
            }
        }
    }
    if dir_edges.iter().any(|&(a, b)| !dir_edges.contains(&(b, a))) {
        return None;
    }
    let mut used: Vec<usize> = facets.iter().flatten().cloned().collect();
    used.sort_unstable();
    used.dedup();
    if facets.len() != 2 * used.len() - 4 {
        return None;
    }
    Some(facets)
}

/// Indices of the points that are extreme (vertices of the convex hull),
/// decided by a small feasibility LP per point: `p` is non-extreme iff it is
/// a convex combination of the remaining points.
pub fn extreme_points(points: &[DVector<f64>], tol: f64) -> Vec<usize> {
    let n = points.len();
    if n <= 1 {
        return (0..n).collect();
    }
    let dim = points[0].len();
    let mut out = Vec::new();
    for i in 0..n {
        let others: Vec<&DVector<f64>> = points
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, p)| p)
            .collect();
        let k = others.len();
        // lambda_j = (beta_j + 1) / 2: rows are sum lambda = 1 and the
        // convex-combination equality in each coordinate.
        let mut e = DMatrix::<f64>::zeros(dim + 1, k);
        let mut f = DVector::<f64>::zeros(dim + 1);
        for j in 0..k {
            e[(0, j)] = 0.5;
        }
        f[0] = 1.0 - 0.5 * k as f64;
        for d in 0..dim {
            for j in 0..k {
                e[(d + 1, j)] = 0.5 * others[j][d];
            }
            let sum_half: f64 = others.iter().map(|q| 0.5 * q[d]).sum();
            f[d + 1] = points[i][d] - sum_half;
        }
        match solve_box_lp(None, &e, &f, tol) {
            LpResult::Optimal { .. } => {}
            LpResult::Infeasible { .. } => out.push(i),
        }
    }
    out
}
