//! Shared test utilities: independent geometric oracles and scene fixtures.
//!
//! The oracles deliberately avoid the library's support-function machinery:
//! vertex candidates come from exact combinatorial enumeration (fix free
//! box coordinates at +-1, solve the equality constraints) and set
//! comparisons use support gaps over vertex lists.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use zsm_core::conzono::ConZono;
use zsm_core::map::{aoi_from, build_building, Building, GroundModel};
use zsm_core::mesh::box_mesh;
use zsm_core::runner::{Satellite, Scenario, Visibility};
use zsm_core::scenario::{emulate, sat_position, EmulationSpec};
use nalgebra::Vector2;

// ---------------------------------------------------------------------------
// combinatorial vertex oracle
// ---------------------------------------------------------------------------

/// Row-echelon rank of a small dense matrix (independent of the library's
/// reduction).
fn rank_of(a: &DMatrix<f64>) -> usize {
    let mut m = a.clone();
    let (rows, cols) = m.shape();
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let (mut best, mut best_val) = (rank, m[(rank, col)].abs());
        for r in rank + 1..rows {
            if m[(r, col)].abs() > best_val {
                best = r;
                best_val = m[(r, col)].abs();
            }
        }
        if best_val < 1e-11 {
            continue;
        }
        m.swap_rows(rank, best);
        for r in 0..rows {
            if r != rank && m[(r, col)].abs() > 0.0 {
                let f = m[(r, col)] / m[(rank, col)];
                for c in col..cols {
                    m[(r, c)] -= f * m[(rank, c)];
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Dimension of the affine span of a point set (rank of the differences to
/// the first point).
pub fn affine_dim_of(points: &[DVector<f64>]) -> usize {
    if points.len() < 2 {
        return 0;
    }
    let dim = points[0].len();
    let mut d = DMatrix::<f64>::zeros(points.len() - 1, dim);
    for (i, p) in points.iter().skip(1).enumerate() {
        for j in 0..dim {
            d[(i, j)] = p[j] - points[0][j];
        }
    }
    rank_of(&d)
}

/// All polytope vertices of `{c + G b : |b|_inf <= 1, A b = a}` by fixing
/// every size-(m - rank) subset of coordinates at +-1 and solving for the
/// rest. Exponential; only for small m.
pub fn oracle_vertex_candidates(z: &ConZono) -> Vec<DVector<f64>> {
    let m = z.num_generators();
    if m == 0 {
        return vec![z.center().clone()];
    }
    let a = z.con_matrix();
    let b = z.con_vector();
    let r = if a.nrows() == 0 { 0 } else { rank_of(a) };
    let free = m - r;
    let mut out: Vec<DVector<f64>> = Vec::new();
    let mut push = |beta: DVector<f64>| {
        if beta.iter().all(|v| v.abs() <= 1.0 + 1e-8) {
            let resid = if a.nrows() > 0 {
                (a * &beta - b).amax()
            } else {
                0.0
            };
            if resid <= 1e-7 {
                let x = z.center() + z.generators() * beta;
                if out.iter().all(|q| (&x - q).amax() > 1e-9) {
                    out.push(x);
                }
            }
        }
    };

    // choose `free` coordinates to fix, iterate sign patterns, solve for rest
    let mut subset: Vec<usize> = (0..free).collect();
    loop {
        let fixed: Vec<usize> = subset.clone();
        let rest: Vec<usize> = (0..m).filter(|i| !fixed.contains(i)).collect();
        for signs in 0..(1u32 << free) {
            let mut beta = DVector::zeros(m);
            for (k, &i) in fixed.iter().enumerate() {
                beta[i] = if signs >> k & 1 == 1 { 1.0 } else { -1.0 };
            }
            if rest.is_empty() {
                push(beta);
                continue;
            }
            // solve A_rest * beta_rest = b - A_fixed * beta_fixed
            let mut rhs = b.clone();
            for (row, v) in rhs.iter_mut().enumerate() {
                for &i in &fixed {
                    *v -= a[(row, i)] * beta[i];
                }
            }
            let sub = DMatrix::from_fn(a.nrows(), rest.len(), |i, j| a[(i, rest[j])]);
            let svd = sub.clone().svd(true, true);
            if let Ok(sol) = svd.solve(&rhs, 1e-10) {
                for (j, &i) in rest.iter().enumerate() {
                    beta[i] = sol[j];
                }
                push(beta);
            }
        }
        // next combination
        if free == 0 {
            break;
        }
        let mut i = free;
        loop {
            if i == 0 {
                return finish(out);
            }
            i -= 1;
            if subset[i] + (free - i) < m {
                subset[i] += 1;
                for k in i + 1..free {
                    subset[k] = subset[k - 1] + 1;
                }
                break;
            }
        }
    }
    finish(out)
}

fn finish(mut out: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    // Drop candidates that are convex combinations of the others so the list
    // is the actual vertex set of the mapped polytope.
    let keep = zsm_core::hull::extreme_points(&out, 1e-9);
    let mut filtered = Vec::with_capacity(keep.len());
    for i in keep {
        filtered.push(out[i].clone());
    }
    out = filtered;
    out
}

// ---------------------------------------------------------------------------
// support-gap set comparison
// ---------------------------------------------------------------------------

fn support_of(points: &[DVector<f64>], d: &DVector<f64>) -> f64 {
    points
        .iter()
        .map(|p| p.dot(d))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Deterministic direction sample for a dimension: axes plus seeded sphere
/// points.
pub fn probe_directions(dim: usize, count: usize) -> Vec<DVector<f64>> {
    let mut dirs = Vec::new();
    for i in 0..dim {
        let mut d = DVector::zeros(dim);
        d[i] = 1.0;
        dirs.push(d.clone());
        d[i] = -1.0;
        dirs.push(d);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x0dd5_eed5);
    while dirs.len() < count {
        let d = DVector::from_fn(dim, |_, _| rng.random_range(-1.0f64..1.0));
        let n = d.norm();
        if n > 1e-3 {
            dirs.push(d / n);
        }
    }
    dirs
}

/// Max support gap over sampled directions — equals the Hausdorff distance
/// between convex hulls up to direction sampling.
pub fn support_hausdorff(a: &[DVector<f64>], b: &[DVector<f64>], dirs: &[DVector<f64>]) -> f64 {
    dirs.iter()
        .map(|d| (support_of(a, d) - support_of(b, d)).abs())
        .fold(0.0, f64::max)
}

/// Greatest distance from any point of one list to the nearest point of the
/// other (symmetric): exact vertex-set matching.
pub fn vertex_set_distance(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    let one_way = |xs: &[DVector<f64>], ys: &[DVector<f64>]| {
        xs.iter()
            .map(|x| {
                ys.iter()
                    .map(|y| (x - y).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

// ---------------------------------------------------------------------------
// halfspace-intersection oracle
// ---------------------------------------------------------------------------

/// Outward halfspaces (n, off) with n.x <= off describing the hull of a
/// vertex list (2-D edges or 3-D hull facets).
pub fn halfspaces_of(points: &[DVector<f64>]) -> Vec<(DVector<f64>, f64)> {
    let dim = points[0].len();
    let mut hs = Vec::new();
    if dim == 2 {
        let pts2: Vec<nalgebra::Vector2<f64>> = points
            .iter()
            .map(|p| nalgebra::Vector2::new(p[0], p[1]))
            .collect();
        let hull = zsm_core::hull::hull2d(&pts2);
        let k = hull.len();
        for i in 0..k {
            let p = hull[i];
            let q = hull[(i + 1) % k];
            let e = q - p;
            let n = nalgebra::Vector2::new(e.y, -e.x); // outward for ccw
            let nn = n.norm();
            if nn > 1e-12 {
                let n = n / nn;
                hs.push((DVector::from_row_slice(&[n.x, n.y]), n.dot(&p)));
            }
        }
    } else {
        let pts3: Vec<Vector3<f64>> = points
            .iter()
            .map(|p| Vector3::new(p[0], p[1], p[2]))
            .collect();
        let hull = zsm_core::hull::hull3d(&pts3).expect("full-dimensional operand");
        for f in 0..hull.facets.len() {
            let (n, off) = hull.facet_plane(f);
            if n.norm() > 0.0 {
                hs.push((DVector::from_row_slice(&[n.x, n.y, n.z]), off));
            }
        }
    }
    hs
}

/// Vertices of the intersection of two halfspace sets, by solving every
/// dim-subset of bounding hyperplanes and keeping feasible solutions.
pub fn halfspace_intersection_vertices(
    ha: &[(DVector<f64>, f64)],
    hb: &[(DVector<f64>, f64)],
) -> Vec<DVector<f64>> {
    let all: Vec<&(DVector<f64>, f64)> = ha.iter().chain(hb.iter()).collect();
    let dim = all[0].0.len();
    let k = all.len();
    let feasible = |x: &DVector<f64>| all.iter().all(|(n, off)| n.dot(x) <= off + 1e-7);
    let mut out: Vec<DVector<f64>> = Vec::new();
    let mut idx = vec![0usize; dim];
    // iterate all dim-subsets of hyperplane indices
    fn subsets(k: usize, dim: usize) -> Vec<Vec<usize>> {
        let mut all = Vec::new();
        let mut cur = Vec::new();
        fn rec(start: usize, k: usize, dim: usize, cur: &mut Vec<usize>, all: &mut Vec<Vec<usize>>) {
            if cur.len() == dim {
                all.push(cur.clone());
                return;
            }
            for i in start..k {
                cur.push(i);
                rec(i + 1, k, dim, cur, all);
                cur.pop();
            }
        }
        rec(0, k, dim, &mut cur, &mut all);
        all
    }
    let _ = &mut idx;
    for subset in subsets(k, dim) {
        let a = DMatrix::from_fn(dim, dim, |i, j| all[subset[i]].0[j]);
        let b = DVector::from_fn(dim, |i, _| all[subset[i]].1);
        let lu = a.full_piv_lu();
        if let Some(x) = lu.solve(&b) {
            if x.iter().all(|v| v.is_finite()) && feasible(&x) {
                if out.iter().all(|q| (&x - q).norm() > 1e-7) {
                    out.push(x);
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// random operands
// ---------------------------------------------------------------------------

/// Random nonempty constrained zonotope: feasibility guaranteed by deriving
/// the constraint offset from an interior box point.
pub fn random_conzono(dim: usize, max_generators: usize, rng: &mut ChaCha8Rng) -> ConZono {
    let m = rng.random_range(dim + 1..=max_generators.max(dim + 1));
    let p = rng.random_range(0..=2.min(m - dim));
    let c = DVector::from_fn(dim, |_, _| rng.random_range(-2.0f64..2.0));
    let g = DMatrix::from_fn(dim, m, |_, _| rng.random_range(-1.0f64..1.0));
    let beta0 = DVector::from_fn(m, |_, _| rng.random_range(-0.6f64..0.6));
    let a = DMatrix::from_fn(p, m, |_, _| rng.random_range(-1.0f64..1.0));
    let b = &a * &beta0;
    ConZono::new(c, g, a, b).expect("valid random operand")
}

// ---------------------------------------------------------------------------
// scene fixtures
// ---------------------------------------------------------------------------

pub const AOI_SIDE: f64 = 120.0;

pub fn aoi_ring() -> Vec<[f64; 2]> {
    vec![
        [0.0, 0.0],
        [AOI_SIDE, 0.0],
        [AOI_SIDE, AOI_SIDE],
        [0.0, AOI_SIDE],
    ]
}

pub fn box_building_at(min: [f64; 3], max: [f64; 3], id: &str) -> Building {
    build_building(
        &box_mesh(
            Vector3::new(min[0], min[1], min[2]),
            Vector3::new(max[0], max[1], max[2]),
        ),
        true,
        id,
    )
    .expect("box building")
}

pub fn ground_for(buildings: &[Building], exclude_footprints: bool) -> GroundModel {
    aoi_from(&[(aoi_ring(), 0.0)], exclude_footprints, buildings).expect("aoi")
}

/// Randomized box-building scene on a jittered lattice; boxes never overlap
/// and leave street gaps.
pub fn random_scene(n_buildings: usize, rng: &mut ChaCha8Rng) -> Vec<Building> {
    let cells = 5usize; // 5x5 grid of 24 m cells
    let cell = AOI_SIDE / cells as f64;
    let mut slots: Vec<(usize, usize)> = (0..cells * cells)
        .map(|i| (i % cells, i / cells))
        .collect();
    // shuffle slots
    for i in (1..slots.len()).rev() {
        let j = rng.random_range(0..=i);
        slots.swap(i, j);
    }
    let mut buildings = Vec::new();
    for (k, (ix, iy)) in slots.into_iter().take(n_buildings).enumerate() {
        let x0 = ix as f64 * cell + rng.random_range(2.0..5.0);
        let y0 = iy as f64 * cell + rng.random_range(2.0..5.0);
        let w = rng.random_range(8.0..cell - 8.0);
        let d = rng.random_range(8.0..cell - 8.0);
        let h = rng.random_range(10.0..50.0);
        buildings.push(box_building_at(
            [x0, y0, 0.0],
            [x0 + w, y0 + d, h],
            &format!("r{k:02}"),
        ));
    }
    buildings
}

/// A truth point inside the AOI, at least 1 m away from every footprint
/// bounding box.
pub fn random_truth(buildings: &[Building], rng: &mut ChaCha8Rng) -> [f64; 2] {
    'outer: loop {
        let p = [
            rng.random_range(2.0..AOI_SIDE - 2.0),
            rng.random_range(2.0..AOI_SIDE - 2.0),
        ];
        for b in buildings {
            if let Some((lo, hi)) = b.footprint.measures().bbox {
                if p[0] > lo[0] - 1.0 && p[0] < hi[0] + 1.0 && p[1] > lo[1] - 1.0 && p[1] < hi[1] + 1.0
                {
                    continue 'outer;
                }
            }
        }
        return p;
    }
}

pub fn random_satellites(count: usize, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    (0..count)
        .map(|_| {
            sat_position(
                rng.random_range(0.0..360.0),
                rng.random_range(15.0..80.0),
                2.0e7,
            )
            .expect("valid satellite")
        })
        .collect()
}

/// Scenario with emulated ideal-classifier C/N0 values at `truth`.
pub fn emulated_scenario(
    buildings: &[Building],
    ground: &GroundModel,
    sats: &[Vector3<f64>],
    truth: [f64; 2],
) -> Scenario {
    let labels = emulate(truth, buildings, sats, ground, &EmulationSpec::default())
        .expect("emulation fixture");
    Scenario {
        satellites: sats
            .iter()
            .zip(&labels)
            .enumerate()
            .map(|(i, (p, (cno, _)))| Satellite {
                id: format!("G{i:02}"),
                position: *p,
                cno: *cno,
            })
            .collect(),
        los_threshold: 38.0,
        street_frame: Vector2::new(0.0, 1.0),
        true_position: Some(truth),
        min_elevation_deg: 0.0,
    }
}

pub fn labels_of(scenario: &Scenario) -> Vec<Visibility> {
    scenario
        .satellites
        .iter()
        .map(|s| zsm_core::runner::classify(s.cno, scenario.los_threshold))
        .collect()
}

/// Street-canyon fixture: two building slabs flanking a north-south street,
/// nine satellites giving 4 NLOS + 5 LOS at the mid-street truth point.
pub fn two_building_scene() -> (Vec<Building>, GroundModel, Vec<Vector3<f64>>, [f64; 2]) {
    let buildings = vec![
        box_building_at([20.0, 10.0, 0.0], [50.0, 110.0, 0.0 + 45.0], "west"),
        box_building_at([70.0, 10.0, 0.0], [100.0, 110.0, 0.0 + 45.0], "east"),
    ];
    let truth = [60.0, 60.0];
    let sats = vec![
        // east of the canyon, low: blocked by the east slab
        sat_position(90.0, 25.0, 2e7).unwrap(),
        sat_position(110.0, 30.0, 2e7).unwrap(),
        // west of the canyon, low: blocked by the west slab
        sat_position(270.0, 25.0, 2e7).unwrap(),
        sat_position(250.0, 30.0, 2e7).unwrap(),
        // along-street and high: visible
        sat_position(0.0, 45.0, 2e7).unwrap(),
        sat_position(180.0, 50.0, 2e7).unwrap(),
        sat_position(5.0, 70.0, 2e7).unwrap(),
        sat_position(175.0, 65.0, 2e7).unwrap(),
        sat_position(90.0, 85.0, 2e7).unwrap(),
    ];
    let ground = ground_for(&buildings, false);
    (buildings, ground, sats, truth)
}
