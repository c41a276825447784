//! Constrained zonotopes and their algebra.
//!
//! A constrained zonotope is the set
//! `{ c + G b : b in [-1,1]^m, A b = a }` — any convex polytope can be
//! written this way. The closure properties used here: Minkowski sums and
//! intersections concatenate representations without any vertex computation,
//! and the pairwise convex hull has a closed-form (if large) representation.
//!
//! Vertex enumeration works in the mapped space through support-function
//! linear programs, so it stays exact for flat (degenerate) sets, which the
//! ground-plane intersections produce by design.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hull::{extreme_points, hull2d, hull3d};
use crate::linalg::{column_rank, nullspace, reduce_system, ReducedSystem};
use crate::lp::{solve_box_lp, LpResult};

/// Default generator cap for [`ConZono::vertices`].
pub const DEFAULT_VERTEX_CAP: usize = 20;

/// Relative tolerance used for feasibility and vertex dedup throughout.
pub const TOL: f64 = 1e-9;

#[derive(Debug, Clone, thiserror::Error)]
pub enum ConZonoError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("generator count {m} exceeds the vertex-enumeration cap {cap}")]
    GeneratorCapExceeded { m: usize, cap: usize },
    #[error("vertex enumeration unsupported for affine dimension {dim} in ambient dimension {n}")]
    UnsupportedDimension { dim: usize, n: usize },
}

/// Vertex representation of a polytope: a finite point set whose convex hull
/// is the set. Empty list means the empty set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VertexList {
    pub dim: usize,
    pub points: Vec<DVector<f64>>,
}

impl VertexList {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A constrained zonotope `{ center + generators*b : |b|_inf <= 1,
/// con_matrix*b = con_vector }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConZono {
    center: DVector<f64>,
    generators: DMatrix<f64>,
    con_matrix: DMatrix<f64>,
    con_vector: DVector<f64>,
}

impl ConZono {
    pub fn new(
        center: DVector<f64>,
        generators: DMatrix<f64>,
        con_matrix: DMatrix<f64>,
        con_vector: DVector<f64>,
    ) -> Result<Self, ConZonoError> {
        let n = center.len();
        let m = generators.ncols();
        if generators.nrows() != n && m > 0 {
            return Err(ConZonoError::DimensionMismatch {
                what: "generator rows",
                expected: n,
                got: generators.nrows(),
            });
        }
        let p = con_matrix.nrows();
        if p > 0 && con_matrix.ncols() != m {
            return Err(ConZonoError::DimensionMismatch {
                what: "constraint columns",
                expected: m,
                got: con_matrix.ncols(),
            });
        }
        if con_vector.len() != p {
            return Err(ConZonoError::DimensionMismatch {
                what: "constraint vector length",
                expected: p,
                got: con_vector.len(),
            });
        }
        if !center.iter().all(|v| v.is_finite()) {
            return Err(ConZonoError::NonFinite("center"));
        }
        if !generators.iter().all(|v| v.is_finite()) {
            return Err(ConZonoError::NonFinite("generators"));
        }
        if !con_matrix.iter().all(|v| v.is_finite()) {
            return Err(ConZonoError::NonFinite("con_matrix"));
        }
        if !con_vector.iter().all(|v| v.is_finite()) {
            return Err(ConZonoError::NonFinite("con_vector"));
        }
        // Normalize shapes so empty matrices are consistent.
        let generators = if m == 0 {
            DMatrix::<f64>::zeros(n, 0)
        } else {
            generators
        };
        let con_matrix = if p == 0 {
            DMatrix::<f64>::zeros(0, m)
        } else {
            con_matrix
        };
        Ok(ConZono {
            center,
            generators,
            con_matrix,
            con_vector,
        })
    }

    /// An unconstrained zonotope (p = 0).
    pub fn zono(center: DVector<f64>, generators: DMatrix<f64>) -> Result<Self, ConZonoError> {
        let m = generators.ncols();
        Self::new(
            center,
            generators,
            DMatrix::zeros(0, m),
            DVector::zeros(0),
        )
    }

    /// A singleton point (m = 0).
    pub fn point(center: DVector<f64>) -> Self {
        let n = center.len();
        ConZono {
            center,
            generators: DMatrix::zeros(n, 0),
            con_matrix: DMatrix::zeros(0, 0),
            con_vector: DVector::zeros(0),
        }
    }

    /// Exact conversion of a vertex representation: with vertices `v_1..v_N`
    /// and barycentric weights `l_i = (b_i + 1)/2`, the set is
    /// `{ sum l_i v_i : l >= 0, sum l = 1 }`, i.e. center `(1/2) sum v_i`,
    /// generators `(1/2)[v_1 .. v_N]` and one constraint `sum b_i = 2 - N`.
    pub fn from_vertices(points: &[DVector<f64>]) -> Result<Self, ConZonoError> {
        assert!(!points.is_empty(), "vertex list must be nonempty");
        let n = points[0].len();
        let big_n = points.len();
        let mut c = DVector::<f64>::zeros(n);
        let mut g = DMatrix::<f64>::zeros(n, big_n);
        for (j, v) in points.iter().enumerate() {
            c += 0.5 * v;
            g.set_column(j, &(0.5 * v));
        }
        let a = DMatrix::<f64>::from_element(1, big_n, 1.0);
        let b = DVector::from_row_slice(&[2.0 - big_n as f64]);
        Self::new(c, g, a, b)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.con_matrix.nrows()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn con_matrix(&self) -> &DMatrix<f64> {
        &self.con_matrix
    }

    pub fn con_vector(&self) -> &DVector<f64> {
        &self.con_vector
    }

    /// A magnitude scale for relative tolerances: the largest interval-hull
    /// coordinate extent, floored at one.
    pub fn scale(&self) -> f64 {
        let mut s = 1.0f64;
        for i in 0..self.dim() {
            let mut r = self.center[i].abs();
            for j in 0..self.num_generators() {
                r += self.generators[(i, j)].abs();
            }
            s = s.max(r);
        }
        s
    }

    /// Axis-aligned interval hull ignoring constraints: a cheap outer bound,
    /// valid because constraints only shrink the feasible box.
    pub fn outer_bbox(&self) -> (DVector<f64>, DVector<f64>) {
        let n = self.dim();
        let mut lo = self.center.clone();
        let mut hi = self.center.clone();
        for i in 0..n {
            let mut r = 0.0;
            for j in 0..self.num_generators() {
                r += self.generators[(i, j)].abs();
            }
            lo[i] -= r;
            hi[i] += r;
        }
        (lo, hi)
    }

    /// Minkowski sum: centers add, generators concatenate, constraints go
    /// block-diagonal. Exactly `m1 + m2` generators and `p1 + p2` constraints.
    pub fn minkowski_sum(&self, other: &ConZono) -> Result<ConZono, ConZonoError> {
        self.check_same_dim(other)?;
        let n = self.dim();
        let (m1, m2) = (self.num_generators(), other.num_generators());
        let (p1, p2) = (self.num_constraints(), other.num_constraints());
        let mut g = DMatrix::<f64>::zeros(n, m1 + m2);
        g.view_mut((0, 0), (n, m1)).copy_from(&self.generators);
        g.view_mut((0, m1), (n, m2)).copy_from(&other.generators);
        let mut a = DMatrix::<f64>::zeros(p1 + p2, m1 + m2);
        a.view_mut((0, 0), (p1, m1)).copy_from(&self.con_matrix);
        a.view_mut((p1, m1), (p2, m2)).copy_from(&other.con_matrix);
        let mut b = DVector::<f64>::zeros(p1 + p2);
        b.rows_mut(0, p1).copy_from(&self.con_vector);
        b.rows_mut(p1, p2).copy_from(&other.con_vector);
        Self::new(&self.center + &other.center, g, a, b)
    }

    /// Intersection: generators `[G1, 0]`, constraints stack the two systems
    /// plus the linking rows `G1 b1 - G2 b2 = c2 - c1`.
    pub fn intersect(&self, other: &ConZono) -> Result<ConZono, ConZonoError> {
        self.check_same_dim(other)?;
        let n = self.dim();
        let (m1, m2) = (self.num_generators(), other.num_generators());
        let (p1, p2) = (self.num_constraints(), other.num_constraints());
        let mut g = DMatrix::<f64>::zeros(n, m1 + m2);
        g.view_mut((0, 0), (n, m1)).copy_from(&self.generators);
        let rows = p1 + p2 + n;
        let mut a = DMatrix::<f64>::zeros(rows, m1 + m2);
        a.view_mut((0, 0), (p1, m1)).copy_from(&self.con_matrix);
        a.view_mut((p1, m1), (p2, m2)).copy_from(&other.con_matrix);
        a.view_mut((p1 + p2, 0), (n, m1)).copy_from(&self.generators);
        a.view_mut((p1 + p2, m1), (n, m2))
            .copy_from(&(-&other.generators));
        let mut b = DVector::<f64>::zeros(rows);
        b.rows_mut(0, p1).copy_from(&self.con_vector);
        b.rows_mut(p1, p2).copy_from(&other.con_vector);
        b.rows_mut(p1 + p2, n)
            .copy_from(&(&other.center - &self.center));
        Self::new(self.center.clone(), g, a, b)
    }

    /// Pairwise convex hull: the closed-form representation with generator
    /// block `[G1, G2, (c1-c2)/2, 0]` and the interval-splitting constraint
    /// rows that tie each original generator to the mixing generator.
    pub fn convex_hull_pair(&self, other: &ConZono) -> Result<ConZono, ConZonoError> {
        self.check_same_dim(other)?;
        let n = self.dim();
        let (m1, m2) = (self.num_generators(), other.num_generators());
        let (k1, k2) = (self.num_constraints(), other.num_constraints());
        let msum = m1 + m2;
        let m_out = msum + 1 + 2 * msum;
        let c = 0.5 * (&self.center + &other.center);
        let mut g = DMatrix::<f64>::zeros(n, m_out);
        g.view_mut((0, 0), (n, m1)).copy_from(&self.generators);
        g.view_mut((0, m1), (n, m2)).copy_from(&other.generators);
        g.set_column(msum, &(0.5 * (&self.center - &other.center)));

        let rows = k1 + k2 + 2 * msum;
        let mut a = DMatrix::<f64>::zeros(rows, m_out);
        let mut b = DVector::<f64>::zeros(rows);
        a.view_mut((0, 0), (k1, m1)).copy_from(&self.con_matrix);
        for r in 0..k1 {
            a[(r, msum)] = -0.5 * self.con_vector[r];
            b[r] = 0.5 * self.con_vector[r];
        }
        a.view_mut((k1, m1), (k2, m2)).copy_from(&other.con_matrix);
        for r in 0..k2 {
            a[(k1 + r, msum)] = 0.5 * other.con_vector[r];
            b[k1 + r] = 0.5 * other.con_vector[r];
        }
        // Third block: [A_31 A_32 A_30 I], rhs -1/2.
        let r0 = k1 + k2;
        for i in 0..m1 {
            a[(r0 + i, i)] = 1.0;
            a[(r0 + m1 + i, i)] = -1.0;
        }
        for i in 0..m2 {
            a[(r0 + 2 * m1 + i, m1 + i)] = 1.0;
            a[(r0 + 2 * m1 + m2 + i, m1 + i)] = -1.0;
        }
        for i in 0..2 * m1 {
            a[(r0 + i, msum)] = -0.5;
        }
        for i in 0..2 * m2 {
            a[(r0 + 2 * m1 + i, msum)] = 0.5;
        }
        for i in 0..2 * msum {
            a[(r0 + i, msum + 1 + i)] = 1.0;
            b[r0 + i] = -0.5;
        }
        Self::new(c, g, a, b)
    }

    /// Affine image `{ scale*x + offset : x in self }`: only the center and
    /// generators change.
    pub fn affine_map(
        &self,
        scale: &DMatrix<f64>,
        offset: &DVector<f64>,
    ) -> Result<ConZono, ConZonoError> {
        if scale.ncols() != self.dim() {
            return Err(ConZonoError::DimensionMismatch {
                what: "affine map columns",
                expected: self.dim(),
                got: scale.ncols(),
            });
        }
        if offset.len() != scale.nrows() {
            return Err(ConZonoError::DimensionMismatch {
                what: "affine offset length",
                expected: scale.nrows(),
                got: offset.len(),
            });
        }
        Self::new(
            scale * &self.center + offset,
            scale * &self.generators,
            self.con_matrix.clone(),
            self.con_vector.clone(),
        )
    }

    fn check_same_dim(&self, other: &ConZono) -> Result<(), ConZonoError> {
        if self.dim() != other.dim() {
            return Err(ConZonoError::DimensionMismatch {
                what: "operand dimension",
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }

    fn reduced(&self) -> ReducedSystem {
        reduce_system(&self.con_matrix, &self.con_vector, 1e-12)
    }

    /// True iff no feasible `b` exists (within relative tolerance).
    pub fn is_empty(&self) -> bool {
        let red = self.reduced();
        if red.inconsistent {
            return true;
        }
        !solve_box_lp(None, &red.a, &red.b, TOL).is_feasible()
    }

    /// Membership test: feasibility of `A b = a`, `G b = x - c` over the box.
    pub fn contains_point(&self, x: &DVector<f64>, tol: f64) -> bool {
        assert_eq!(x.len(), self.dim());
        let n = self.dim();
        let m = self.num_generators();
        let p = self.num_constraints();
        let mut e = DMatrix::<f64>::zeros(p + n, m);
        e.view_mut((0, 0), (p, m)).copy_from(&self.con_matrix);
        e.view_mut((p, 0), (n, m)).copy_from(&self.generators);
        let mut f = DVector::<f64>::zeros(p + n);
        f.rows_mut(0, p).copy_from(&self.con_vector);
        f.rows_mut(p, n).copy_from(&(x - &self.center));
        solve_box_lp(None, &e, &f, tol).is_feasible()
    }

    /// Whether the closed segment `p -> q` meets the set. The segment
    /// parameter is folded into the box as one extra variable.
    pub fn segment_hits(&self, p: &DVector<f64>, q: &DVector<f64>) -> bool {
        assert_eq!(p.len(), self.dim());
        assert_eq!(q.len(), self.dim());
        let n = self.dim();
        let m = self.num_generators();
        let pc = self.num_constraints();
        // x = (p+q)/2 + (tau/2)(q-p), tau in [-1,1]; solve
        // G b - ((q-p)/2) tau = (p+q)/2 - c together with A b = a.
        let mut e = DMatrix::<f64>::zeros(pc + n, m + 1);
        e.view_mut((0, 0), (pc, m)).copy_from(&self.con_matrix);
        e.view_mut((pc, 0), (n, m)).copy_from(&self.generators);
        for i in 0..n {
            e[(pc + i, m)] = -0.5 * (q[i] - p[i]);
        }
        let mut f = DVector::<f64>::zeros(pc + n);
        f.rows_mut(0, pc).copy_from(&self.con_vector);
        f.rows_mut(pc, n)
            .copy_from(&(0.5 * (p + q) - &self.center));
        solve_box_lp(None, &e, &f, TOL).is_feasible()
    }

    /// Support value `max { d.x : x in self }`, with a maximizing point.
    /// `None` when the set is empty.
    pub fn support(&self, d: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        let red = self.reduced();
        if red.inconsistent {
            return None;
        }
        let obj = self.generators.transpose() * d;
        match solve_box_lp(Some(&obj), &red.a, &red.b, TOL) {
            LpResult::Optimal { beta, value } => {
                let x = &self.center + &self.generators * beta;
                Some((value + d.dot(&self.center), x))
            }
            LpResult::Infeasible { .. } => None,
        }
    }

    /// Lexicographic support: maximize `dirs[0]`, then `dirs[1]` among the
    /// optima, and so on. With enough stages the result is a vertex.
    fn lex_support(&self, red: &ReducedSystem, dirs: &[DVector<f64>]) -> Option<DVector<f64>> {
        let m = self.num_generators();
        let mut e = red.a.clone();
        let mut f = red.b.clone();
        let mut beta_out: Option<DVector<f64>> = None;
        for d in dirs {
            let obj = self.generators.transpose() * d;
            match solve_box_lp(Some(&obj), &e, &f, TOL) {
                LpResult::Optimal { beta, value } => {
                    // Stacked optimal-face systems are exactly degenerate and
                    // can defeat the solver; a stage whose result does not
                    // satisfy the *original* constraints is discarded along
                    // with the remaining stages, keeping the last clean point.
                    let res = (&red.a * &beta - &red.b).norm();
                    let boxv = beta.iter().fold(0.0f64, |acc, v| acc.max(v.abs() - 1.0));
                    if res > 1e-7 || boxv > 1e-7 {
                        return beta_out.map(|b| &self.center + &self.generators * b);
                    }
                    let mut e2 = DMatrix::<f64>::zeros(e.nrows() + 1, m);
                    e2.view_mut((0, 0), (e.nrows(), m)).copy_from(&e);
                    for j in 0..m {
                        e2[(e.nrows(), j)] = obj[j];
                    }
                    let mut f2 = DVector::<f64>::zeros(f.len() + 1);
                    f2.rows_mut(0, f.len()).copy_from(&f);
                    f2[f.len()] = value;
                    e = e2;
                    f = f2;
                    beta_out = Some(beta);
                }
                LpResult::Infeasible { .. } => return beta_out.map(|b| &self.center + &self.generators * b),
            }
        }
        beta_out.map(|b| &self.center + &self.generators * b)
    }

    /// Vertex enumeration with the default generator cap.
    pub fn vertices(&self) -> Result<VertexList, ConZonoError> {
        self.vertices_capped(DEFAULT_VERTEX_CAP)
    }

    /// Vertex enumeration with an explicit generator cap.
    ///
    /// Works through support-function linear programs in the mapped space:
    /// detect the affine dimension of the set, then enumerate
    /// point/segment/polygon/polytope vertices accordingly. Exact for flat
    /// sets; empty sets yield an empty list.
    pub fn vertices_capped(&self, cap: usize) -> Result<VertexList, ConZonoError> {
        let n = self.dim();
        let m = self.num_generators();
        if m > cap {
            return Err(ConZonoError::GeneratorCapExceeded { m, cap });
        }
        let empty = VertexList {
            dim: n,
            points: Vec::new(),
        };
        let red = self.reduced();
        if red.inconsistent {
            return Ok(empty);
        }
        if red.had_redundant_rows {
            log::debug!("rank-deficient constraint rows reduced during vertex enumeration");
        }
        let beta0 = match solve_box_lp(None, &red.a, &red.b, TOL) {
            LpResult::Optimal { beta, .. } => beta,
            LpResult::Infeasible { .. } => return Ok(empty),
        };
        let x0 = &self.center + &self.generators * &beta0;
        let scale = self.scale();
        let tol_pos = TOL * scale;

        // Candidate span of the affine hull from the representation: the set
        // lies in x0 + range(G * null(A)). The box may pin it down further,
        // so the true affine dimension is confirmed by support probing.
        let nmat = nullspace(&red.a, 1e-12);
        let span = &self.generators * &nmat;
        if span.ncols() == 0 || column_rank(&span, 1e-12) == 0 {
            return Ok(VertexList {
                dim: n,
                points: vec![x0],
            });
        }
        let span_basis = orthonormal_columns(&span);

        // Probe supports along the candidate basis and random in-span
        // directions; the affine dimension is the rank of the collected
        // support-point differences.
        let mut probe_dirs: Vec<DVector<f64>> = Vec::new();
        for k in 0..span_basis.ncols() {
            let u: DVector<f64> = span_basis.column(k).into();
            probe_dirs.push(u.clone());
            probe_dirs.push(-u);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_2026);
        for _ in 0..2 * span_basis.ncols() + 4 {
            let mut d = DVector::<f64>::zeros(n);
            for k in 0..span_basis.ncols() {
                let w: f64 = rng.random_range(-1.0..1.0);
                d += w * DVector::from(span_basis.column(k));
            }
            if d.norm() > 1e-12 {
                probe_dirs.push(d.normalize());
            }
        }
        let mut samples: Vec<DVector<f64>> = vec![x0.clone()];
        for d in &probe_dirs {
            if let Some((_, x)) = self.support(d) {
                samples.push(x);
            }
        }
        let (aff_dim, basis) = affine_frame(&samples, tol_pos);

        match aff_dim {
            0 => Ok(VertexList {
                dim: n,
                points: vec![x0],
            }),
            1 => {
                let u: DVector<f64> = basis.column(0).into();
                let a = self.support(&u).map(|(_, x)| x);
                let b = self.support(&(-u)).map(|(_, x)| x);
                let mut pts: Vec<DVector<f64>> = a.into_iter().chain(b).collect();
                dedup_points(&mut pts, tol_pos);
                Ok(VertexList { dim: n, points: pts })
            }
            2 => {
                let pts = self.planar_vertices(&red, &basis, &x0, tol_pos);
                Ok(VertexList { dim: n, points: pts })
            }
            3 if n == 3 => {
                let pts = self.spatial_vertices(&red, tol_pos);
                Ok(VertexList { dim: n, points: pts })
            }
            d => Err(ConZonoError::UnsupportedDimension { dim: d, n }),
        }
    }

    /// Vertices of a set that is (affinely) 2-dimensional: reconstruct the
    /// convex polygon by chord refinement over support queries in the plane
    /// spanned by `basis` through `origin`.
    fn planar_vertices(
        &self,
        red: &ReducedSystem,
        basis: &DMatrix<f64>,
        origin: &DVector<f64>,
        tol_pos: f64,
    ) -> Vec<DVector<f64>> {
        let u1: DVector<f64> = basis.column(0).into();
        let u2: DVector<f64> = basis.column(1).into();
        let plane_dir = |ang: f64| -> DVector<f64> { ang.cos() * &u1 + ang.sin() * &u2 };
        // Lexicographic support: primary direction, then its in-plane
        // perpendicular, which pins down a single vertex.
        let vertex_for = |ang: f64| -> Option<DVector<f64>> {
            let d = plane_dir(ang);
            let t = plane_dir(ang + std::f64::consts::FRAC_PI_2);
            self.lex_support(red, &[d, t])
        };
        let coords = |x: &DVector<f64>| -> (f64, f64) {
            let r = x - origin;
            (u1.dot(&r), u2.dot(&r))
        };

        let mut pts: Vec<DVector<f64>> = Vec::new();
        for k in 0..4 {
            let ang = k as f64 * std::f64::consts::FRAC_PI_2;
            if let Some(x) = vertex_for(ang) {
                pts.push(x);
            }
        }
        dedup_points(&mut pts, tol_pos);
        if pts.len() < 2 {
            return pts;
        }
        // Order around the planar centroid.
        let order_key = |x: &DVector<f64>| {
            let (a, b) = coords(x);
            (a, b)
        };
        let centroid: (f64, f64) = {
            let s = pts.iter().map(order_key).fold((0.0, 0.0), |acc, c| {
                (acc.0 + c.0, acc.1 + c.1)
            });
            (s.0 / pts.len() as f64, s.1 / pts.len() as f64)
        };
        pts.sort_by(|x, y| {
            let (xa, xb) = coords(x);
            let (ya, yb) = coords(y);
            let ax = (xb - centroid.1).atan2(xa - centroid.0);
            let ay = (yb - centroid.1).atan2(ya - centroid.0);
            ax.partial_cmp(&ay).unwrap()
        });

        // Chord refinement: probe the outward normal of each hull edge; if
        // the support exceeds the chord, a vertex is missing between the two.
        let mut guard = 0usize;
        loop {
            guard += 1;
            if guard > 64 {
                log::warn!("planar vertex refinement did not converge; returning current set");
                break;
            }
            let mut inserted = false;
            let mut next: Vec<DVector<f64>> = Vec::new();
            let k = pts.len();
            for i in 0..k {
                let a = &pts[i];
                let b = &pts[(i + 1) % k];
                next.push(a.clone());
                let (ax, ay) = coords(a);
                let (bx, by) = coords(b);
                let (ex, ey) = (bx - ax, by - ay);
                let len = (ex * ex + ey * ey).sqrt();
                if len <= tol_pos {
                    continue;
                }
                // Outward normal for ccw order.
                let (nx, ny) = (ey / len, -ex / len);
                let d = nx * &u1 + ny * &u2;
                if let Some((h, _)) = self.support(&d) {
                    if h > d.dot(a) + tol_pos {
                        let t = plane_dir((ey).atan2(ex));
                        if let Some(x) = self.lex_support(red, &[d, t]) {
                            let is_new = next
                                .iter()
                                .chain(pts.iter())
                                .all(|q| (&x - q).norm() > tol_pos);
                            if is_new {
                                next.push(x);
                                inserted = true;
                            }
                        }
                    }
                }
            }
            pts = next;
            if !inserted {
                break;
            }
        }
        // Final safety: keep only genuinely extreme points, ccw-ordered.
        let idx = extreme_points(&pts, TOL);
        let mut out: Vec<DVector<f64>> = idx.into_iter().map(|i| pts[i].clone()).collect();
        out.sort_by(|x, y| {
            let (xa, xb) = coords(x);
            let (ya, yb) = coords(y);
            let ax = (xb - centroid.1).atan2(xa - centroid.0);
            let ay = (yb - centroid.1).atan2(ya - centroid.0);
            ax.partial_cmp(&ay).unwrap()
        });
        out
    }

    /// Vertices of a full-dimensional 3-D set: outer-approximation loop that
    /// alternates support queries along current hull facet normals with hull
    /// rebuilding, until no facet can be pushed outward.
    fn spatial_vertices(&self, red: &ReducedSystem, tol_pos: f64) -> Vec<DVector<f64>> {
        let lex3 = |d: &Vector3<f64>| -> Option<DVector<f64>> {
            let dv = DVector::from_row_slice(&[d.x, d.y, d.z]);
            // Complete d to an orthogonal triple for the lexicographic stages.
            let t1 = if d.x.abs() < 0.9 {
                d.cross(&Vector3::x())
            } else {
                d.cross(&Vector3::y())
            };
            let t1 = t1.normalize();
            let t2 = d.cross(&t1);
            self.lex_support(
                red,
                &[
                    dv,
                    DVector::from_row_slice(&[t1.x, t1.y, t1.z]),
                    DVector::from_row_slice(&[t2.x, t2.y, t2.z]),
                ],
            )
        };
        // Support-point dedup and facet-gap thresholds sit well above the LP
        // noise floor; without this, near-duplicate optima accumulate as
        // sliver facets and the refinement loop degrades quadratically.
        let noise_tol = (1e-7 * self.scale()).max(tol_pos);
        let mut pts: Vec<DVector<f64>> = Vec::new();
        let push_new = |pts: &mut Vec<DVector<f64>>, x: DVector<f64>| -> bool {
            if pts.iter().all(|q| (&x - q).norm() > noise_tol) {
                pts.push(x);
                true
            } else {
                false
            }
        };
        let axes = [
            Vector3::x(),
            -Vector3::x(),
            Vector3::y(),
            -Vector3::y(),
            Vector3::z(),
            -Vector3::z(),
        ];
        for d in &axes {
            if let Some(x) = lex3(d) {
                push_new(&mut pts, x);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_3031);
        while pts.len() < 4 {
            let d = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if d.norm() < 1e-6 {
                continue;
            }
            if let Some(x) = lex3(&d.normalize()) {
                if !push_new(&mut pts, x) {
                    break;
                }
            }
        }

        let mut guard = 0usize;
        loop {
            guard += 1;
            if guard > 200 {
                log::warn!("spatial vertex refinement did not converge; returning current set");
                break;
            }
            let v3: Vec<Vector3<f64>> = pts
                .iter()
                .map(|p| Vector3::new(p[0], p[1], p[2]))
                .collect();
            let hull = match hull3d(&v3) {
                Ok(h) => h,
                Err(_) => {
                    // Support points became (near) coplanar despite the
                    // affine-dimension estimate; keep seeding directions
                    // until one leaves the current plane.
                    let mut added = false;
                    for _ in 0..200 {
                        let d = Vector3::new(
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                        );
                        if d.norm() < 1e-6 {
                            continue;
                        }
                        if let Some(x) = lex3(&d.normalize()) {
                            if push_new(&mut pts, x) {
                                added = true;
                                break;
                            }
                        }
                    }
                    if !added {
                        break;
                    }
                    continue;
                }
            };
            let mut improved = false;
            for f in 0..hull.facets.len() {
                let (nrm, off) = hull.facet_plane(f);
                if nrm.norm() == 0.0 {
                    continue;
                }
                let dv = DVector::from_row_slice(&[nrm.x, nrm.y, nrm.z]);
                if let Some((h, _)) = self.support(&dv) {
                    if h > off + noise_tol {
                        if let Some(x) = lex3(&nrm) {
                            if push_new(&mut pts, x) {
                                improved = true;
                            }
                        }
                    }
                }
            }
            if !improved {
                // Robustness pass for exactly coplanar faces: tilt each facet
                // normal slightly within the facet plane and re-probe.
                'outer: for f in 0..hull.facets.len() {
                    let (nrm, _) = hull.facet_plane(f);
                    if nrm.norm() == 0.0 {
                        continue;
                    }
                    let t1 = if nrm.x.abs() < 0.9 {
                        nrm.cross(&Vector3::x()).normalize()
                    } else {
                        nrm.cross(&Vector3::y()).normalize()
                    };
                    let t2 = nrm.cross(&t1);
                    for tilt in [t1, -t1, t2, -t2] {
                        let d = (nrm + 1e-6 * tilt).normalize();
                        if let Some(x) = lex3(&d) {
                            if push_new(&mut pts, x) {
                                improved = true;
                                break 'outer;
                            }
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
        let idx = extreme_points(&pts, TOL);
        idx.into_iter().map(|i| pts[i].clone()).collect()
    }
}

/// Orthonormal basis of the column space of `a` (SVD left vectors).
fn orthonormal_columns(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("svd requested u");
    let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let thresh = 1e-12 * max_sv.max(1.0);
    let rank = svd.singular_values.iter().filter(|s| **s > thresh).count();
    u.columns(0, rank).into()
}

/// Affine dimension and an orthonormal basis of the affine hull of a point
/// sample, from the SVD of the differences against the first point.
fn affine_frame(samples: &[DVector<f64>], tol_pos: f64) -> (usize, DMatrix<f64>) {
    let n = samples[0].len();
    let k = samples.len() - 1;
    if k == 0 {
        return (0, DMatrix::zeros(n, 0));
    }
    let mut diff = DMatrix::<f64>::zeros(n, k);
    for (j, s) in samples.iter().skip(1).enumerate() {
        diff.set_column(j, &(s - &samples[0]));
    }
    let svd = diff.clone().svd(true, false);
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > tol_pos)
        .count();
    let u = svd.u.expect("svd requested u");
    (rank, u.columns(0, rank).into())
}

/// Remove near-duplicate points in place (first occurrence wins).
pub fn dedup_points(pts: &mut Vec<DVector<f64>>, tol: f64) {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(pts.len());
    for p in pts.drain(..) {
        if out.iter().all(|q| (&p - q).norm() > tol) {
            out.push(p);
        }
    }
    *pts = out;
}

/// Convenience: counterclockwise 2-D hull of a vertex list's points.
pub fn hull_of_vertexlist_2d(v: &VertexList) -> Vec<nalgebra::Vector2<f64>> {
    let pts: Vec<nalgebra::Vector2<f64>> = v
        .points
        .iter()
        .map(|p| nalgebra::Vector2::new(p[0], p[1]))
        .collect();
    hull2d(&pts)
}
