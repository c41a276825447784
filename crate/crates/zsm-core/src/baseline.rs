//! Conventional grid-based shadow matching: a uniform candidate lattice,
//! precomputed visibility, visibility scores and weighted moments.

use nalgebra::{DVector, Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::map::{Building, GroundModel};
use crate::runner::Visibility;

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("grid spacing {0} must be positive")]
    BadSpacing(f64),
    #[error("no grid candidates fall inside the area of interest")]
    EmptyGrid,
    #[error("predicted matrix shape does not match candidates/measurements")]
    ShapeMismatch,
}

/// Uniform square lattice of position candidates clipped to the AOI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateGrid {
    pub origin: [f64; 2],
    pub spacing: f64,
    pub candidates: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmReport {
    pub scores: Vec<u32>,
    /// All candidates sharing the maximal score.
    pub best: Vec<[f64; 2]>,
    pub weighted_mean: [f64; 2],
    /// Weighted empirical covariance, row-major.
    pub weighted_cov: [[f64; 2]; 2],
    /// Twice the 3-sigma bound per street-frame axis: (cross, along).
    pub bounds_cross_along: [f64; 2],
    /// Set when every score was zero and uniform weights were substituted.
    pub uniform_fallback: bool,
}

/// Cell-center lattice over the AOI bounding box, keeping candidates with
/// `point_in` true (boundary-inclusive).
pub fn make_grid(ground: &GroundModel, spacing: f64) -> Result<CandidateGrid, BaselineError> {
    if !(spacing > 0.0) {
        return Err(BaselineError::BadSpacing(spacing));
    }
    let m = ground.aoi.measures();
    let (lo, hi) = m.bbox.ok_or(BaselineError::EmptyGrid)?;
    let mut candidates = Vec::new();
    let nx = ((hi[0] - lo[0]) / spacing).ceil() as usize;
    let ny = ((hi[1] - lo[1]) / spacing).ceil() as usize;
    for j in 0..ny {
        for i in 0..nx {
            let p = [
                lo[0] + (i as f64 + 0.5) * spacing,
                lo[1] + (j as f64 + 0.5) * spacing,
            ];
            if p[0] <= hi[0] && p[1] <= hi[1] && ground.aoi.point_in(p) {
                candidates.push(p);
            }
        }
    }
    if candidates.is_empty() {
        return Err(BaselineError::EmptyGrid);
    }
    Ok(CandidateGrid {
        origin: lo,
        spacing,
        candidates,
    })
}

/// Candidate-by-satellite visibility matrix: entry true iff the segment from
/// the candidate (at ground height) to the satellite hits no building part.
pub fn predict_visibility(
    grid: &CandidateGrid,
    buildings: &[Building],
    satellites: &[Vector3<f64>],
    ground: &GroundModel,
) -> Vec<Vec<bool>> {
    grid.candidates
        .iter()
        .map(|c| {
            let h = ground.height_at(*c).unwrap_or(0.0);
            let p = DVector::from_row_slice(&[c[0], c[1], h]);
            satellites
                .iter()
                .map(|s| {
                    let q = DVector::from_row_slice(&[s.x, s.y, s.z]);
                    !buildings
                        .iter()
                        .flat_map(|b| b.parts.iter())
                        .any(|part| part.segment_hits(&p, &q))
                })
                .collect()
        })
        .collect()
}

/// Score candidates against measured labels, pick the argmax set and compute
/// score-weighted moments and street-frame bounds.
pub fn score_and_select(
    grid: &CandidateGrid,
    predicted: &[Vec<bool>],
    measured: &[Visibility],
    street_frame: &Vector2<f64>,
) -> Result<SmReport, BaselineError> {
    if predicted.len() != grid.candidates.len()
        || predicted.iter().any(|row| row.len() != measured.len())
    {
        return Err(BaselineError::ShapeMismatch);
    }
    let scores: Vec<u32> = predicted
        .iter()
        .map(|row| {
            row.iter()
                .zip(measured)
                .filter(|(vis, label)| {
                    matches!(
                        (vis, label),
                        (true, Visibility::Los) | (false, Visibility::Nlos)
                    )
                })
                .count() as u32
        })
        .collect();
    let max = *scores.iter().max().unwrap_or(&0);
    let best: Vec<[f64; 2]> = grid
        .candidates
        .iter()
        .zip(&scores)
        .filter(|(_, s)| **s == max)
        .map(|(c, _)| *c)
        .collect();

    let total: f64 = scores.iter().map(|&s| s as f64).sum();
    let uniform_fallback = total == 0.0;
    let n = grid.candidates.len() as f64;
    let weight = |s: u32| {
        if uniform_fallback {
            1.0 / n
        } else {
            s as f64 / total
        }
    };
    let mut mean = Vector2::zeros();
    for (c, &s) in grid.candidates.iter().zip(&scores) {
        mean += weight(s) * Vector2::new(c[0], c[1]);
    }
    let mut cov = Matrix2::zeros();
    for (c, &s) in grid.candidates.iter().zip(&scores) {
        let d = Vector2::new(c[0], c[1]) - mean;
        cov += weight(s) * d * d.transpose();
    }
    let along = street_frame;
    let cross = Vector2::new(-street_frame.y, street_frame.x);
    let bounds = [
        6.0 * (cross.dot(&(cov * cross))).max(0.0).sqrt(),
        6.0 * (along.dot(&(cov * along))).max(0.0).sqrt(),
    ];
    Ok(SmReport {
        scores,
        best,
        weighted_mean: [mean.x, mean.y],
        weighted_cov: [[cov[(0, 0)], cov[(0, 1)]], [cov[(1, 0)], cov[(1, 1)]]],
        bounds_cross_along: bounds,
        uniform_fallback,
    })
}
