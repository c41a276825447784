//! Minkowski-sum representation benchmark: constrained-zonotope sum versus a
//! vertex-representation pipeline on random 3-D polytopes.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conzono::ConZono;
use crate::hull::{extreme_points, hull3d};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRecord {
    pub trial: usize,
    pub method: String,
    pub vertices_in: usize,
    pub seconds: f64,
    /// Generator count (conzono) or vertex count (vertex-rep).
    pub output_size: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchSummary {
    pub trials: usize,
    pub conzono_median_s: f64,
    pub conzono_iqr_s: [f64; 2],
    pub vertex_rep_median_s: f64,
    pub vertex_rep_iqr_s: [f64; 2],
    pub median_ratio: f64,
    pub note: String,
}

fn v3_to_dv(v: &Vector3<f64>) -> DVector<f64> {
    DVector::from_row_slice(&[v.x, v.y, v.z])
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Hull vertices of up to `max_vertices` points sampled uniformly in the
/// unit ball.
pub fn random_polytope(max_vertices: usize, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    let k = rng.random_range(4..=max_vertices.max(4));
    let mut pts = Vec::with_capacity(k);
    while pts.len() < k {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if v.norm() <= 1.0 {
            pts.push(v);
        }
    }
    match hull3d(&pts) {
        Ok(h) => {
            let dv: Vec<DVector<f64>> = h.vertices.iter().map(v3_to_dv).collect();
            extreme_points(&dv, 1e-9)
                .into_iter()
                .map(|i| h.vertices[i])
                .collect()
        }
        // astronomically unlikely for random samples; retry with more points
        Err(_) => random_polytope(max_vertices, rng),
    }
}

fn vertex_rep_minkowski(vertices: &[Vector3<f64>], seg: &Vector3<f64>) -> Vec<Vector3<f64>> {
    let mut translated = Vec::with_capacity(2 * vertices.len());
    for v in vertices {
        translated.push(v + seg);
        translated.push(v - seg);
    }
    let h = hull3d(&translated).expect("sum with a segment cannot be degenerate here");
    let dv: Vec<DVector<f64>> = h.vertices.iter().map(v3_to_dv).collect();
    extreme_points(&dv, 1e-9)
        .into_iter()
        .map(|i| h.vertices[i])
        .collect()
}

/// Run the timing comparison. Conversion of the random polytope to a
/// constrained zonotope happens before the timer; the vertex-representation
/// pipeline (translate by both segment endpoints, re-hull) is timed end to
/// end.
pub fn bench_minkowski(trials: usize, seed: u64) -> (Vec<BenchRecord>, BenchSummary) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(2 * trials);
    // warm-up
    for _ in 0..10 {
        let poly = random_polytope(20, &mut rng);
        let dir = random_unit(&mut rng);
        let _ = vertex_rep_minkowski(&poly, &dir);
    }
    for trial in 0..trials {
        let poly = random_polytope(100, &mut rng);
        let dir = random_unit(&mut rng);
        let zc = ConZono::from_vertices(&poly.iter().map(v3_to_dv).collect::<Vec<_>>())
            .expect("vertex conversion");
        let seg = ConZono::zono(
            DVector::zeros(3),
            DMatrix::from_column_slice(3, 1, &[dir.x, dir.y, dir.z]),
        )
        .expect("segment zonotope");

        let t0 = Instant::now();
        let zsum = zc.minkowski_sum(&seg).expect("minkowski sum");
        let dt_cz = t0.elapsed().as_secs_f64();
        assert_eq!(zsum.num_generators(), zc.num_generators() + 1);
        records.push(BenchRecord {
            trial,
            method: "conzono".into(),
            vertices_in: poly.len(),
            seconds: dt_cz.max(1e-12),
            output_size: zsum.num_generators(),
        });

        let t1 = Instant::now();
        let vsum = vertex_rep_minkowski(&poly, &dir);
        let dt_v = t1.elapsed().as_secs_f64();
        records.push(BenchRecord {
            trial,
            method: "vertex-rep".into(),
            vertices_in: poly.len(),
            seconds: dt_v.max(1e-12),
            output_size: vsum.len(),
        });
    }
    let summary = summarize(&records);
    (records, summary)
}

fn quartiles(mut xs: Vec<f64>) -> (f64, [f64; 2]) {
    xs.sort_by(f64::total_cmp);
    let q = |f: f64| -> f64 {
        let idx = f * (xs.len() - 1) as f64;
        let lo = idx.floor() as usize;
        let hi = idx.ceil() as usize;
        let t = idx - lo as f64;
        xs[lo] * (1.0 - t) + xs[hi] * t
    };
    (q(0.5), [q(0.25), q(0.75)])
}

pub fn summarize(records: &[BenchRecord]) -> BenchSummary {
    let take = |m: &str| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.method == m)
            .map(|r| r.seconds)
            .collect()
    };
    let cz = take("conzono");
    let vr = take("vertex-rep");
    let trials = cz.len();
    let (cm, ciqr) = quartiles(cz);
    let (vm, viqr) = quartiles(vr);
    BenchSummary {
        trials,
        conzono_median_s: cm,
        conzono_iqr_s: ciqr,
        vertex_rep_median_s: vm,
        vertex_rep_iqr_s: viqr,
        median_ratio: vm / cm,
        note: "vertex-rep timing includes hull recomputation; conzono timing excludes \
               representation conversion"
            .into(),
    }
}

/// Box-plot-ready CSV: trial, method, vertices, seconds, output size.
pub fn records_to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from("trial,method,vertices_in,seconds,output_size\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{:.9e},{}\n",
            r.trial, r.method, r.vertices_in, r.seconds, r.output_size
        ));
    }
    out
}
