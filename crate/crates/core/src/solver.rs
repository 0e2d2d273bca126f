//! P1 finite elements on lifted surfaces and the discrete Steklov spectrum.
//!
//! The stiffness matrix is assembled from the lifted (3-D) triangles with the cotangent
//! formula. Interior degrees of freedom, which include the vertices on the chart cut
//! (natural boundary condition there), are eliminated by a sparse Cholesky factorization,
//! leaving the discrete Dirichlet-to-Neumann matrix on the prescribed boundary. Its
//! generalized eigenvalues against the boundary mass are the Steklov eigenvalues.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Par, Side};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{BoundaryMarker, LiftedSurface};
use crate::par;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("lifted triangle {triangle} has zero area")]
    DegenerateTriangle { triangle: usize },
    #[error("surface has no prescribed boundary vertices")]
    NoBoundary,
    #[error("interior stiffness block is singular: {0}")]
    SingularInterior(String),
    #[error("requested {requested} eigenvalues but the boundary has {available} vertices")]
    TooManyEigenvalues { requested: usize, available: usize },
    #[error("boundary mass is not positive definite: {0}")]
    MassNotPositive(String),
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("trial supports {first} and {second} share a triangle")]
    OverlappingTrials { first: usize, second: usize },
    #[error("trial {0} has zero boundary norm")]
    ZeroBoundaryNorm(usize),
    #[error("trial {index} has {len} entries, expected {expected}")]
    TrialLength {
        index: usize,
        len: usize,
        expected: usize,
    },
    #[error("no trial functions given")]
    NoTrials,
}

/// Compressed sparse row matrix with summed duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by_key(|a| (a.0, a.1));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in t {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Self {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        par::map_range(self.n, |i| self.row(i).map(|(j, v)| v * x[j]).sum())
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m = m.max((v - self.get(j, i)).abs());
            }
        }
        m
    }
}

/// Boundary mass variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MassKind {
    /// Half of each prescribed-boundary edge length on either endpoint.
    #[default]
    Lumped,
    /// The exact P1 edge mass `L/6 [[2, 1], [1, 2]]`.
    Consistent,
}

/// Stiffness and boundary mass of a lifted surface with its vertex partition.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub stiffness: CsrMatrix,
    pub boundary_mass: CsrMatrix,
    /// Prescribed-boundary vertices, sorted.
    pub boundary: Vec<usize>,
    /// All other vertices, sorted.
    pub interior: Vec<usize>,
    pub mass_kind: MassKind,
    pub triangles: Vec<[usize; 3]>,
    pub h: f64,
}

fn sub3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Element stiffness `K_ij = <e_i, e_j> / (4 A)` with `e_i` the edge opposite vertex `i`.
pub fn element_stiffness(p: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let e = [sub3(&p[2], &p[1]), sub3(&p[0], &p[2]), sub3(&p[1], &p[0])];
    let c = [
        e[2][1] * e[0][2] - e[2][2] * e[0][1],
        e[2][2] * e[0][0] - e[2][0] * e[0][2],
        e[2][0] * e[0][1] - e[2][1] * e[0][0],
    ];
    let area = 0.5 * dot3(&c, &c).sqrt();
    if !(area > 0.0) {
        return None;
    }
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = dot3(&e[i], &e[j]) / (4.0 * area);
        }
    }
    Some(k)
}

/// Assemble stiffness and boundary mass on a lifted surface.
pub fn assemble(surface: &LiftedSurface, mass: MassKind) -> Result<AssembledSystem, SolverError> {
    let mesh = &surface.mesh;
    let n = mesh.vertices.len();
    let locals: Vec<Option<[[f64; 3]; 3]>> = par::map(&mesh.triangles, |t| {
        element_stiffness(t.map(|i| surface.position(i)))
    });
    let mut trip = Vec::with_capacity(9 * mesh.triangles.len());
    for (ti, (t, k)) in mesh.triangles.iter().zip(&locals).enumerate() {
        let k = k.ok_or(SolverError::DegenerateTriangle { triangle: ti })?;
        for a in 0..3 {
            for b in 0..3 {
                trip.push((t[a], t[b], k[a][b]));
            }
        }
    }
    let stiffness = CsrMatrix::from_triplets(n, trip);

    let mut mtrip = Vec::new();
    for e in mesh
        .boundary
        .iter()
        .filter(|e| e.marker == BoundaryMarker::Prescribed)
    {
        let [a, b] = e.v;
        let d = sub3(&surface.position(a), &surface.position(b));
        let len = dot3(&d, &d).sqrt();
        match mass {
            MassKind::Lumped => {
                mtrip.push((a, a, 0.5 * len));
                mtrip.push((b, b, 0.5 * len));
            }
            MassKind::Consistent => {
                mtrip.push((a, a, len / 3.0));
                mtrip.push((b, b, len / 3.0));
                mtrip.push((a, b, len / 6.0));
                mtrip.push((b, a, len / 6.0));
            }
        }
    }
    let boundary_mass = CsrMatrix::from_triplets(n, mtrip);
    let boundary = mesh.prescribed_vertices();
    if boundary.is_empty() {
        return Err(SolverError::NoBoundary);
    }
    let mut is_b = vec![false; n];
    for &b in &boundary {
        is_b[b] = true;
    }
    let interior = (0..n).filter(|&i| !is_b[i]).collect();
    Ok(AssembledSystem {
        stiffness,
        boundary_mass,
        boundary,
        interior,
        mass_kind: mass,
        triangles: mesh.triangles.clone(),
        h: mesh.target_h,
    })
}

/// Boundary mass restricted to the boundary vertices.
#[derive(Debug, Clone)]
pub enum BoundaryMass {
    Diagonal(Vec<f64>),
    Dense(Mat<f64>),
}

/// The discrete Dirichlet-to-Neumann matrix and the boundary mass it pairs with.
#[derive(Debug, Clone)]
pub struct DtnOperator {
    pub lambda: Mat<f64>,
    pub mass: BoundaryMass,
    pub boundary: Vec<usize>,
    pub h: f64,
}

impl DtnOperator {
    pub fn size(&self) -> usize {
        self.boundary.len()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.lambda.norm_l2()
    }

    /// `||L - L^T||_F / ||L||_F`.
    pub fn relative_asymmetry(&self) -> f64 {
        let n = self.size();
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                s += (self.lambda[(i, j)] - self.lambda[(j, i)]).powi(2);
            }
        }
        s.sqrt() / self.frobenius_norm()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.size();
        (0..n)
            .map(|i| (0..n).map(|j| self.lambda[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn apply_mass(&self, v: &[f64]) -> Vec<f64> {
        match &self.mass {
            BoundaryMass::Diagonal(d) => d.iter().zip(v).map(|(a, b)| a * b).collect(),
            BoundaryMass::Dense(m) => {
                let n = self.size();
                (0..n)
                    .map(|i| (0..n).map(|j| m[(i, j)] * v[j]).sum())
                    .collect()
            }
        }
    }
}

/// Columns of the boundary solved together; bounds the dense right-hand side memory.
const SCHUR_CHUNK: usize = 64;

struct InteriorSolver {
    llt: Option<faer::sparse::linalg::solvers::Llt<usize, f64>>,
    pos: Vec<usize>,
    n_i: usize,
}

impl InteriorSolver {
    fn new(sys: &AssembledSystem) -> Result<Self, SolverError> {
        let n = sys.stiffness.n;
        let mut pos = vec![usize::MAX; n];
        for (k, &i) in sys.interior.iter().enumerate() {
            pos[i] = k;
        }
        let n_i = sys.interior.len();
        if n_i == 0 {
            return Ok(Self {
                llt: None,
                pos,
                n_i,
            });
        }
        let mut trip = Vec::new();
        for (k, &i) in sys.interior.iter().enumerate() {
            for (j, v) in sys.stiffness.row(i) {
                if pos[j] != usize::MAX {
                    trip.push(Triplet::new(k, pos[j], v));
                }
            }
        }
        let kii = SparseColMat::<usize, f64>::try_new_from_triplets(n_i, n_i, &trip)
            .map_err(|e| SolverError::SingularInterior(format!("{e:?}")))?;
        let llt = kii.sp_cholesky(Side::Lower).map_err(|e| {
            SolverError::SingularInterior(format!(
                "{e:?} (is an interior patch cut off from the boundary?)"
            ))
        })?;
        Ok(Self {
            llt: Some(llt),
            pos,
            n_i,
        })
    }

    fn solve(&self, rhs: &mut Mat<f64>) {
        if let Some(llt) = &self.llt {
            llt.solve_in_place(rhs.as_mut());
        }
    }
}

/// `Lambda = K_BB - K_BI K_II^-1 K_IB` together with the restricted boundary mass.
pub fn schur_dtn(sys: &AssembledSystem) -> Result<DtnOperator, SolverError> {
    let solver = InteriorSolver::new(sys)?;
    let nb = sys.boundary.len();
    let mut bpos = vec![usize::MAX; sys.stiffness.n];
    for (k, &b) in sys.boundary.iter().enumerate() {
        bpos[b] = k;
    }
    let chunks: Vec<(usize, usize)> = (0..nb)
        .step_by(SCHUR_CHUNK)
        .map(|s| (s, (s + SCHUR_CHUNK).min(nb)))
        .collect();
    let blocks: Vec<Vec<f64>> = par::map(&chunks, |&(c0, c1)| {
        let w = c1 - c0;
        // rhs = K_IB[:, c0..c1]
        let mut x = Mat::<f64>::zeros(solver.n_i, w);
        for (col, &b) in sys.boundary[c0..c1].iter().enumerate() {
            for (j, v) in sys.stiffness.row(b) {
                if solver.pos[j] != usize::MAX {
                    x[(solver.pos[j], col)] = v;
                }
            }
        }
        solver.solve(&mut x);
        let mut out = vec![0.0; nb * w];
        for (bi, &b) in sys.boundary.iter().enumerate() {
            for (j, v) in sys.stiffness.row(b) {
                if bpos[j] != usize::MAX {
                    let c = bpos[j];
                    if (c0..c1).contains(&c) {
                        out[bi * w + (c - c0)] += v;
                    }
                } else if solver.pos[j] != usize::MAX {
                    let r = solver.pos[j];
                    for col in 0..w {
                        out[bi * w + col] -= v * x[(r, col)];
                    }
                }
            }
        }
        out
    });
    let mut lambda = Mat::<f64>::zeros(nb, nb);
    for (&(c0, c1), block) in chunks.iter().zip(&blocks) {
        let w = c1 - c0;
        for bi in 0..nb {
            for col in 0..w {
                lambda[(bi, c0 + col)] = block[bi * w + col];
            }
        }
    }
    let mass = match sys.mass_kind {
        MassKind::Lumped => BoundaryMass::Diagonal(
            sys.boundary
                .iter()
                .map(|&b| sys.boundary_mass.get(b, b))
                .collect(),
        ),
        MassKind::Consistent => BoundaryMass::Dense(Mat::from_fn(nb, nb, |i, j| {
            sys.boundary_mass.get(sys.boundary[i], sys.boundary[j])
        })),
    };
    Ok(DtnOperator {
        lambda,
        mass,
        boundary: sys.boundary.clone(),
        h: sys.h,
    })
}

/// Interior values of the discrete harmonic extension of boundary data.
pub fn harmonic_extension(
    sys: &AssembledSystem,
    boundary_values: &[f64],
) -> Result<Vec<f64>, SolverError> {
    let solver = InteriorSolver::new(sys)?;
    let n = sys.stiffness.n;
    let mut u = vec![0.0; n];
    for (k, &b) in sys.boundary.iter().enumerate() {
        u[b] = boundary_values[k];
    }
    let mut rhs = Mat::<f64>::zeros(solver.n_i, 1);
    for (k, &i) in sys.interior.iter().enumerate() {
        rhs[(k, 0)] = -sys
            .stiffness
            .row(i)
            .filter(|&(j, _)| solver.pos[j] == usize::MAX)
            .map(|(j, v)| v * u[j])
            .sum::<f64>();
    }
    solver.solve(&mut rhs);
    for (k, &i) in sys.interior.iter().enumerate() {
        u[i] = rhs[(k, 0)];
    }
    Ok(u)
}

/// Steklov eigenvalues in ascending order with `M_b`-orthonormal boundary eigenvectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteklovSpectrum {
    pub h: f64,
    pub sigmas: Vec<f64>,
    /// `||Lambda v - sigma M v|| / max(||Lambda v||, 1e-8 ||Lambda||_F ||v||)` per pair.
    pub residuals: Vec<f64>,
    #[serde(skip)]
    pub boundary: Vec<usize>,
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
}

/// Lowest `m` generalized eigenpairs of `(Lambda, M_b)`.
pub fn solve_spectrum(dtn: &DtnOperator, m: usize) -> Result<SteklovSpectrum, SolverError> {
    let n = dtn.size();
    if m > n {
        return Err(SolverError::TooManyEigenvalues {
            requested: m,
            available: n,
        });
    }
    // Reduce to a standard problem A w = sigma w with A = L^-1 Lambda L^-T, M = L L^T.
    let (a, back): (Mat<f64>, Box<dyn Fn(&[f64]) -> Vec<f64>>) = match &dtn.mass {
        BoundaryMass::Diagonal(d) => {
            if let Some(i) = d.iter().position(|&x| !(x > 0.0)) {
                return Err(SolverError::MassNotPositive(format!(
                    "boundary vertex {} has mass {}",
                    dtn.boundary[i], d[i]
                )));
            }
            let s: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
            let a = Mat::from_fn(n, n, |i, j| {
                0.5 * (dtn.lambda[(i, j)] + dtn.lambda[(j, i)]) * s[i] * s[j]
            });
            (
                a,
                Box::new(move |w: &[f64]| w.iter().zip(&s).map(|(x, y)| x * y).collect()),
            )
        }
        BoundaryMass::Dense(mm) => {
            let llt = mm
                .llt(Side::Lower)
                .map_err(|e| SolverError::MassNotPositive(format!("{e:?}")))?;
            let l = llt.L().to_owned();
            let mut x = Mat::from_fn(n, n, |i, j| 0.5 * (dtn.lambda[(i, j)] + dtn.lambda[(j, i)]));
            // X = L^-1 Lambda, then A = L^-1 X^T
            faer::linalg::triangular_solve::solve_lower_triangular_in_place(
                l.as_ref(),
                x.as_mut(),
                Par::Seq,
            );
            let mut a = x.transpose().to_owned();
            faer::linalg::triangular_solve::solve_lower_triangular_in_place(
                l.as_ref(),
                a.as_mut(),
                Par::Seq,
            );
            let lt = l.clone();
            (
                a,
                Box::new(move |w: &[f64]| {
                    let mut v = Mat::from_fn(n, 1, |i, _| w[i]);
                    faer::linalg::triangular_solve::solve_upper_triangular_in_place(
                        lt.transpose(),
                        v.as_mut(),
                        Par::Seq,
                    );
                    (0..n).map(|i| v[(i, 0)]).collect()
                }),
            )
        }
    };
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| SolverError::Eigen(format!("{e:?}")))?;
    let vals = evd.S().column_vector();
    let vecs = evd.U();
    let norm = dtn.frobenius_norm();
    let mut sigmas = Vec::with_capacity(m);
    let mut residuals = Vec::with_capacity(m);
    let mut vectors = Vec::with_capacity(m);
    for k in 0..m {
        let w: Vec<f64> = (0..n).map(|i| vecs[(i, k)]).collect();
        let v = back(&w);
        let sigma = vals[k];
        let lv = dtn.apply(&v);
        let mv = dtn.apply_mass(&v);
        let r: f64 = lv
            .iter()
            .zip(&mv)
            .map(|(a, b)| (a - sigma * b).powi(2))
            .sum::<f64>()
            .sqrt();
        let lvn = lv.iter().map(|x| x * x).sum::<f64>().sqrt();
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        residuals.push(r / lvn.max(1e-8 * norm * vn));
        sigmas.push(sigma);
        vectors.push(v);
    }
    Ok(SteklovSpectrum {
        h: dtn.h,
        sigmas,
        residuals,
        boundary: dtn.boundary.clone(),
        vectors,
    })
}

/// Assemble, reduce and solve in one call.
pub fn steklov_spectrum(
    surface: &LiftedSurface,
    m: usize,
    mass: MassKind,
) -> Result<SteklovSpectrum, SolverError> {
    let sys = assemble(surface, mass)?;
    let dtn = schur_dtn(&sys)?;
    solve_spectrum(&dtn, m.min(dtn.size()))
}

/// How a trial family bounds `sigma_k` with `k + 1` trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialMode {
    /// Trials with no common triangle; the bound is the largest single Rayleigh quotient.
    Disjoint,
    /// Any trials with independent boundary traces; the bound is the largest Rayleigh
    /// quotient over their span.
    Subspace,
}

fn rayleigh(sys: &AssembledSystem, u: &[f64]) -> (f64, f64) {
    (
        sys.stiffness.bilinear(u, u),
        sys.boundary_mass.bilinear(u, u),
    )
}

/// Upper bound for `sigma_k` of the discrete problem from `k + 1` vertex functions.
pub fn trial_subspace_bound(
    sys: &AssembledSystem,
    trials: &[Vec<f64>],
    mode: TrialMode,
) -> Result<f64, SolverError> {
    if trials.is_empty() {
        return Err(SolverError::NoTrials);
    }
    let n = sys.stiffness.n;
    for (i, t) in trials.iter().enumerate() {
        if t.len() != n {
            return Err(SolverError::TrialLength {
                index: i,
                len: t.len(),
                expected: n,
            });
        }
    }
    match mode {
        TrialMode::Disjoint => {
            // triangle-level disjointness keeps both Gram matrices diagonal
            for tri in &sys.triangles {
                let mut seen: Option<usize> = None;
                for (k, t) in trials.iter().enumerate() {
                    if tri.iter().any(|&v| t[v] != 0.0) {
                        if let Some(first) = seen {
                            return Err(SolverError::OverlappingTrials { first, second: k });
                        }
                        seen = Some(k);
                    }
                }
            }
            let mut worst: f64 = 0.0;
            for (k, t) in trials.iter().enumerate() {
                let (e, b) = rayleigh(sys, t);
                if !(b > 0.0) {
                    return Err(SolverError::ZeroBoundaryNorm(k));
                }
                worst = worst.max(e / b);
            }
            Ok(worst)
        }
        TrialMode::Subspace => {
            let m = trials.len();
            let kt: Vec<Vec<f64>> = trials.iter().map(|t| sys.stiffness.matvec(t)).collect();
            let mt: Vec<Vec<f64>> = trials.iter().map(|t| sys.boundary_mass.matvec(t)).collect();
            let dotv = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let gk = Mat::from_fn(m, m, |i, j| {
                0.5 * (dotv(&trials[i], &kt[j]) + dotv(&trials[j], &kt[i]))
            });
            let gm = Mat::from_fn(m, m, |i, j| {
                0.5 * (dotv(&trials[i], &mt[j]) + dotv(&trials[j], &mt[i]))
            });
            for k in 0..m {
                if !(gm[(k, k)] > 0.0) {
                    return Err(SolverError::ZeroBoundaryNorm(k));
                }
            }
            let llt = gm.llt(Side::Lower).map_err(|e| {
                SolverError::MassNotPositive(format!("trial traces are dependent: {e:?}"))
            })?;
            let l = llt.L().to_owned();
            let mut x = gk;
            faer::linalg::triangular_solve::solve_lower_triangular_in_place(
                l.as_ref(),
                x.as_mut(),
                Par::Seq,
            );
            let mut a = x.transpose().to_owned();
            faer::linalg::triangular_solve::solve_lower_triangular_in_place(
                l.as_ref(),
                a.as_mut(),
                Par::Seq,
            );
            let a = Mat::from_fn(m, m, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
            let evd = a
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| SolverError::Eigen(format!("{e:?}")))?;
            Ok(evd.S().column_vector()[m - 1])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Deformation, DeformationParams};
    use crate::mesh::{lift_to_graph, triangulate_disk, triangulate_halfdisk, MarkerRule, TriMesh};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn flat_disk(h: f64) -> LiftedSurface {
        LiftedSurface::flat(triangulate_disk(h).unwrap())
    }

    #[test]
    fn csr_sums_duplicates() {
        let a =
            CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 0.5), (0, 1, 2.0)]);
        assert_eq!(a.get(0, 0), 1.5);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.matvec(&[1.0, 1.0]), vec![3.5, 2.0]);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn disk_assembly_oracles() {
        let s = flat_disk(0.05);
        let sys = assemble(&s, MassKind::Lumped).unwrap();
        let x: Vec<f64> = s.mesh.vertices.iter().map(|v| v[0]).collect();
        let e = sys.stiffness.bilinear(&x, &x);
        assert!((e - PI).abs() < 0.01 * PI, "{e}");
        let ones = vec![1.0; x.len()];
        let k1 = sys.stiffness.matvec(&ones);
        assert!(k1.iter().all(|v| v.abs() < 1e-12));
        let total: f64 = sys.boundary_mass.matvec(&ones).iter().sum();
        assert!((total - 2.0 * PI).abs() < 0.01 * 2.0 * PI);
        assert!(sys.stiffness.asymmetry() < 1e-15);
        let c = assemble(&s, MassKind::Consistent).unwrap();
        let total_c: f64 = c.boundary_mass.matvec(&ones).iter().sum();
        assert_relative_eq!(total_c, total, max_relative = 1e-12);
    }

    #[test]
    fn one_triangle_is_its_own_dtn() {
        let m = TriMesh::from_triangles(
            vec![[0.0, 0.0], [2.0, 0.0], [0.5, 1.5]],
            vec![[0, 1, 2]],
            1.0,
            MarkerRule::AllPrescribed,
        )
        .unwrap();
        let sys = assemble(&LiftedSurface::flat(m.clone()), MassKind::Lumped).unwrap();
        let dtn = schur_dtn(&sys).unwrap();
        // cotangent closed form: K_ij = -cot(angle opposite edge ij) / 2
        let p = &m.vertices;
        let cot = |a: usize, b: usize, c: usize| {
            let u = [p[b][0] - p[a][0], p[b][1] - p[a][1]];
            let v = [p[c][0] - p[a][0], p[c][1] - p[a][1]];
            (u[0] * v[0] + u[1] * v[1]) / (u[0] * v[1] - u[1] * v[0]).abs()
        };
        assert_relative_eq!(
            dtn.lambda[(0, 1)],
            -0.5 * cot(2, 0, 1),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            dtn.lambda[(1, 2)],
            -0.5 * cot(0, 1, 2),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            dtn.lambda[(0, 2)],
            -0.5 * cot(1, 0, 2),
            max_relative = 1e-14
        );
    }

    #[test]
    fn hand_elimination_on_a_fan() {
        // square with a centre vertex: K_II = sum of 4 cot weights, one interior dof
        let m = TriMesh::from_triangles(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]],
            vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
            1.0,
            MarkerRule::AllPrescribed,
        )
        .unwrap();
        let sys = assemble(&LiftedSurface::flat(m), MassKind::Lumped).unwrap();
        assert_eq!(sys.interior, vec![4]);
        let dtn = schur_dtn(&sys).unwrap();
        let k = &sys.stiffness;
        for i in 0..4 {
            for j in 0..4 {
                let expect = k.get(i, j) - k.get(i, 4) * k.get(4, j) / k.get(4, 4);
                assert_relative_eq!(dtn.lambda[(i, j)], expect, epsilon = 1e-15);
            }
        }
        // right isosceles triangles: centre couples with weight 1 to each corner, corners
        // do not couple through the legs, so Lambda = I - J/4
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 0.75 } else { -0.25 };
                assert_relative_eq!(dtn.lambda[(i, j)], expect, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn dtn_symmetry_and_kernel() {
        let dtn = schur_dtn(&assemble(&flat_disk(0.05), MassKind::Lumped).unwrap()).unwrap();
        assert!(
            dtn.relative_asymmetry() < 1e-12,
            "{}",
            dtn.relative_asymmetry()
        );
        let ones = vec![1.0; dtn.size()];
        let r = dtn.apply(&ones);
        let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(rn < 1e-8 * dtn.frobenius_norm());
    }

    #[test]
    fn disk_spectrum_pattern() {
        let spec = steklov_spectrum(&flat_disk(0.02), 7, MassKind::Lumped).unwrap();
        assert!(spec.sigmas[0].abs() < 1e-9);
        for (k, expect) in [1.0, 1.0, 2.0, 2.0, 3.0, 3.0].iter().enumerate() {
            let s = spec.sigmas[k + 1];
            assert!((s - expect).abs() < 0.02 * expect, "sigma_{} = {s}", k + 1);
        }
        for r in &spec.residuals[1..] {
            assert!(*r < 1e-8, "residual {r}");
        }
        // constant mode
        let v0 = &spec.vectors[0];
        let mean = v0.iter().sum::<f64>() / v0.len() as f64;
        assert!(v0.iter().all(|x| (x - mean).abs() < 1e-8 * mean.abs()));
    }

    #[test]
    fn consistent_mass_agrees_to_second_order() {
        let s = flat_disk(0.05);
        let a = steklov_spectrum(&s, 4, MassKind::Lumped).unwrap();
        let b = steklov_spectrum(&s, 4, MassKind::Consistent).unwrap();
        for k in 1..4 {
            assert!((a.sigmas[k] - b.sigmas[k]).abs() < 0.01 * a.sigmas[k]);
        }
        for r in &b.residuals[1..] {
            assert!(*r < 1e-8);
        }
    }

    #[test]
    fn eigenvectors_are_mass_orthonormal() {
        let sys = assemble(&flat_disk(0.1), MassKind::Consistent).unwrap();
        let dtn = schur_dtn(&sys).unwrap();
        let spec = solve_spectrum(&dtn, 5).unwrap();
        for i in 0..5 {
            let mv = dtn.apply_mass(&spec.vectors[i]);
            for j in 0..5 {
                let g: f64 = spec.vectors[j].iter().zip(&mv).map(|(a, b)| a * b).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn scaling_divides_the_spectrum() {
        let p = DeformationParams::schedule_with_omega(0.25, 40.0).unwrap();
        let m = triangulate_halfdisk(0.2, Some(&p)).unwrap();
        let s = lift_to_graph(&m, &Deformation::new(p)).unwrap();
        let a = steklov_spectrum(&s, 7, MassKind::Lumped).unwrap();
        let b = steklov_spectrum(&s.scaled(2.0), 7, MassKind::Lumped).unwrap();
        for k in 1..7 {
            assert_relative_eq!(b.sigmas[k], a.sigmas[k] / 2.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn half_disk_has_constant_kernel_and_positive_gap() {
        let s = LiftedSurface::flat(triangulate_halfdisk(0.1, None).unwrap());
        let spec = steklov_spectrum(&s, 3, MassKind::Lumped).unwrap();
        assert!(spec.sigmas[0].abs() < 1e-9);
        assert!(spec.sigmas[1] > 0.1);
    }

    #[test]
    fn trial_bounds() {
        let s = flat_disk(0.1);
        let sys = assemble(&s, MassKind::Lumped).unwrap();
        let dtn = schur_dtn(&sys).unwrap();
        let spec = solve_spectrum(&dtn, 6).unwrap();
        let n = s.mesh.vertices.len();
        // constant trial: bound 0
        let b0 = trial_subspace_bound(&sys, &[vec![1.0; n]], TrialMode::Disjoint).unwrap();
        assert!(b0.abs() < 1e-12);
        // harmonic extensions of the first k+1 eigenvectors attain sigma_k
        let trials: Vec<Vec<f64>> = spec.vectors[..4]
            .iter()
            .map(|v| harmonic_extension(&sys, v).unwrap())
            .collect();
        let b = trial_subspace_bound(&sys, &trials, TrialMode::Subspace).unwrap();
        assert_relative_eq!(b, spec.sigmas[3], max_relative = 1e-8);
        // disjoint bumps on the circle bound sigma_3
        let bumps: Vec<Vec<f64>> = (0..4)
            .map(|k| {
                let c = PI / 2.0 * k as f64;
                s.mesh
                    .vertices
                    .iter()
                    .map(|v| {
                        let d = (v[1].atan2(v[0]) - c + PI).rem_euclid(2.0 * PI) - PI;
                        let r = v[0].hypot(v[1]);
                        ((0.5 - d.abs()) * r).max(0.0)
                    })
                    .collect()
            })
            .collect();
        let bd = trial_subspace_bound(&sys, &bumps, TrialMode::Disjoint).unwrap();
        assert!(spec.sigmas[3] <= bd * (1.0 + 1e-8));
        let bs = trial_subspace_bound(&sys, &bumps, TrialMode::Subspace).unwrap();
        assert!(spec.sigmas[3] <= bs * (1.0 + 1e-8) && bs <= bd * (1.0 + 1e-12));
        // overlap and zero-norm rejections
        let mut wide = bumps.clone();
        wide[1] = bumps[0].iter().zip(&bumps[1]).map(|(a, b)| a + b).collect();
        assert!(matches!(
            trial_subspace_bound(&sys, &wide, TrialMode::Disjoint),
            Err(SolverError::OverlappingTrials { .. })
        ));
        let mut inner = vec![0.0; n];
        inner[sys.interior[0]] = 1.0;
        assert_eq!(
            trial_subspace_bound(&sys, &[inner], TrialMode::Disjoint),
            Err(SolverError::ZeroBoundaryNorm(0))
        );
    }

    #[test]
    fn too_many_eigenvalues_is_rejected() {
        let dtn = schur_dtn(&assemble(&flat_disk(0.4), MassKind::Lumped).unwrap()).unwrap();
        assert!(matches!(
            solve_spectrum(&dtn, dtn.size() + 1),
            Err(SolverError::TooManyEigenvalues { .. })
        ));
    }
}
