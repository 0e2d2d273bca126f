//! Dirichlet energy on graph surfaces and the region terms of the bump Rayleigh quotient.
//!
//! For a function `u` pulled back to the graph `S_f = {(x, f(x))}`, the graph metric gives
//!
//! ```text
//! |grad u_f|^2 = (|grad u|^2 + |grad u ∧ grad f|^2) / (1 + |grad f|^2)
//! ```
//!
//! and the area element is `sqrt(1 + |grad f|^2)`. The wedge term is evaluated as a sum of
//! squared 2x2 minors, so the integrand is nonnegative by construction rather than by the
//! cancellation in `|a|^2 |b|^2 - <a, b>^2`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    dot, unit_ball_volume, unit_sphere_area, Deformation, DeformationParams, GeometryError,
    ScalarField, TestFunction,
};
use crate::quadrature::{
    graded_breaks, integrate, integrate_1d, periodic_breaks, BumpPart, CellReport, Domain,
    NonConvergence, Patch, QuadratureRule,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("{what}: quadrature did not converge (last {last:.6e}, relative change {rel_change:.3e}, worst cells {worst_cells:?})")]
    NonConvergence {
        what: String,
        last: f64,
        rel_change: f64,
        worst_cells: Vec<CellReport>,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("trace support [{lo:.6}, {hi:.6}] leaves the chart boundary [-1, 1]")]
    TraceOutsideChart { lo: f64, hi: f64 },
    #[error("quasi-isometry check needs n = 2, got {0}")]
    UnsupportedDimension(usize),
    #[error("map has no certified quasi-isometry constant")]
    UncertifiedMap,
    #[error("invalid quasi-isometry constant {0}; must be >= 1")]
    InvalidConstant(f64),
}

fn converged(
    what: &str,
    r: Result<crate::quadrature::Integral, NonConvergence>,
) -> Result<f64, EnergyError> {
    r.map(|i| i.value).map_err(|e| EnergyError::NonConvergence {
        what: what.to_string(),
        last: e.last,
        rel_change: e.rel_change,
        worst_cells: e.worst_cells,
    })
}

/// `|grad u_f|^2` on the graph of `f`.
pub fn pointwise_graph_gradsq<const N: usize>(gu: &[f64; N], gf: &[f64; N]) -> f64 {
    let gu2 = dot(gu, gu);
    let gf2 = dot(gf, gf);
    (gu2 + wedge_sq(gu, gf)) / (1.0 + gf2)
}

/// `|a ∧ b|^2`, the sum of squared 2x2 minors.
fn wedge_sq<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    let mut s = 0.0;
    for i in 0..N {
        for j in (i + 1)..N {
            let m = a[i] * b[j] - a[j] * b[i];
            s += m * m;
        }
    }
    s
}

/// Energy density with respect to planar measure: `|grad u_f|^2 sqrt(1 + |grad f|^2)`.
#[inline]
pub fn energy_density<const N: usize>(gu: &[f64; N], gf: &[f64; N]) -> f64 {
    (dot(gu, gu) + wedge_sq(gu, gf)) / (1.0 + dot(gf, gf)).sqrt()
}

/// Dirichlet energy of `u` on the graph of `f` over a planar domain.
pub fn dirichlet_energy<U, F>(
    u: &U,
    f: &F,
    domain: &Domain,
    rule: &QuadratureRule,
) -> Result<f64, EnergyError>
where
    U: ScalarField<2> + ?Sized,
    F: ScalarField<2> + ?Sized,
{
    let r = integrate(
        domain,
        rule,
        |x| energy_density(&u.sample(x).grad, &f.sample(x).grad),
        Some(|x: &[f64; 2]| u.kink_distance(x).min(f.kink_distance(x))),
    );
    converged("dirichlet energy", r)
}

/// Area of the graph of `f` over `domain` minus the planar area.
pub fn area_excess<F: ScalarField<2> + ?Sized>(
    f: &F,
    domain: &Domain,
    rule: &QuadratureRule,
) -> Result<f64, EnergyError> {
    let r = integrate(
        domain,
        rule,
        |x| {
            let g = f.sample(x).grad;
            let s = dot(&g, &g);
            // sqrt(1 + s) - 1 without cancellation
            s / ((1.0 + s).sqrt() + 1.0)
        },
        Some(|x: &[f64; 2]| f.kink_distance(x)),
    );
    converged("area excess", r)
}

/// A boundary curve carrying an `L^2` trace norm.
#[derive(Debug, Clone, PartialEq)]
pub enum Trace {
    /// Segment `{x1 = 0, x2 in [lo, hi]}` with break points where `u` kinks.
    ChartEdge { lo: f64, hi: f64, breaks: Vec<f64> },
    /// Circle of the given radius around the origin.
    Circle { radius: f64 },
}

/// `∫ u^2` along a trace curve.
pub fn trace_norm<U: ScalarField<2> + ?Sized>(
    u: &U,
    trace: &Trace,
    rule: &QuadratureRule,
) -> Result<f64, EnergyError> {
    let r = match trace {
        Trace::ChartEdge { lo, hi, breaks } => {
            let mut b = breaks.clone();
            b.extend([*lo, *hi]);
            b.retain(|v| (*lo..=*hi).contains(v));
            integrate_1d(&b, rule, |t| u.value(&[0.0, t]).powi(2))
        }
        Trace::Circle { radius } => {
            let rad = *radius;
            let b = crate::quadrature::uniform_breaks(0.0, 2.0 * std::f64::consts::PI, 16);
            integrate_1d(&b, rule, move |th| {
                let (s, c) = th.sin_cos();
                u.value(&[rad * c, rad * s]).powi(2) * rad
            })
        }
    };
    converged("trace norm", r)
}

/// `∫_Σ u^2` of a bump's test function along `x1 = 0` (planar case).
pub fn boundary_trace_norm<U: ScalarField<2> + ?Sized>(
    u: &U,
    params: &DeformationParams,
    rule: &QuadratureRule,
) -> Result<f64, EnergyError> {
    let c = params.anchor[0];
    let (lo, hi) = (c - params.eps, c + params.eps);
    if lo < -1.0 || hi > 1.0 {
        return Err(EnergyError::TraceOutsideChart { lo, hi });
    }
    trace_norm(
        u,
        &Trace::ChartEdge {
            lo,
            hi,
            breaks: vec![c],
        },
        rule,
    )
}

/// Closed form of the test-function trace norm in dimension `n`:
/// `V_{n-1} eps^{n-1} 2 / (n (n+1))`, which is `2 eps / 3` for `n = 2`.
pub fn boundary_norm_closed_form(params: &DeformationParams, n: usize) -> f64 {
    let nf = n as f64;
    unit_ball_volume(n - 1) * params.eps.powi(n as i32 - 1) * 2.0 / (nf * (nf + 1.0))
}

/// Region terms of the bump test function's energy and its Rayleigh quotient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    #[serde(rename = "E_A")]
    pub e_a: f64,
    #[serde(rename = "E_B")]
    pub e_b: f64,
    #[serde(rename = "E_C")]
    pub e_c: f64,
    /// Always 0: the test function vanishes on the cutoff margin.
    #[serde(rename = "E_D")]
    pub e_d: f64,
    pub boundary_norm: f64,
    pub rayleigh: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.e_a + self.e_b + self.e_c + self.e_d
    }
}

/// `Vol(A)`: half of an `n`-ball of radius `eps`.
pub fn volume_a(params: &DeformationParams, n: usize) -> f64 {
    0.5 * unit_ball_volume(n) * params.eps.powi(n as i32)
}

/// `Vol(C)`: a cylinder of height `delta1` over an `(n-1)`-ball of radius `eps`.
pub fn volume_c(params: &DeformationParams, n: usize) -> f64 {
    params.delta1 * unit_ball_volume(n - 1) * params.eps.powi(n as i32 - 1)
}

/// `E_A = Vol(A) / (eps^2 sqrt(1 + delta2^2 omega^2))`. On `A` both gradients are radial.
pub fn e_a_closed_form(params: &DeformationParams, n: usize) -> f64 {
    let k = params.delta2 * params.omega;
    volume_a(params, n) / (params.eps.powi(2) * (1.0 + k * k).sqrt())
}

/// `E_C = Vol(C) / eps^2`. The graph is flat on `C`.
pub fn e_c_closed_form(params: &DeformationParams, n: usize) -> f64 {
    volume_c(params, n) / params.eps.powi(2)
}

/// Upper bound for `E_B` from `(1 + F^2) / sqrt(1 + F^2 + s) <= 2 / sqrt(1 + s)`:
/// `2 V_{n-1} eps^{n-3} asinh(delta2 omega) / omega`.
pub fn e_b_bound(params: &DeformationParams, n: usize) -> f64 {
    2.0 * unit_ball_volume(n - 1)
        * params.eps.powi(n as i32 - 3)
        * (params.delta2 * params.omega).asinh()
        / params.omega
}

/// `E_B` by quadrature. On `B`, `grad u` is orthogonal to `e1` and the integrand reduces to
/// `(1 + F(omega s)^2) / (eps^2 sqrt(1 + F^2 + t^2 omega^2))` with `s = |pi x - c|` and
/// `t = x1 - delta1`; the transverse ball is integrated in polar form.
pub fn e_b_quadrature(
    params: &DeformationParams,
    n: usize,
    rule: &QuadratureRule,
) -> Result<f64, EnergyError> {
    let p = *params;
    let s_breaks = periodic_breaks(0.0, p.eps, 2.0 / p.omega);
    let t_breaks = graded_breaks(0.0, p.delta2, p.omega);
    let domain = Domain {
        patches: vec![Patch::rect(s_breaks, t_breaks)],
    };
    let w = p.omega;
    let r = integrate(
        &domain,
        rule,
        move |x| {
            let (s, t) = (x[0], x[1]);
            let f = crate::geometry::sawtooth(w * s);
            let f2 = f * f;
            s.powi(n as i32 - 2) * (1.0 + f2) / (1.0 + f2 + t * t * w * w).sqrt()
        },
        crate::quadrature::NO_HINT,
    );
    Ok(unit_sphere_area(n - 2) * converged("E_B", r)? / p.eps.powi(2))
}

/// Energy terms of the bump test function on the graph of the bump deformation.
///
/// `E_A` and `E_C` are closed forms, `E_B` is integrated, `E_D = 0`. The boundary norm
/// is the exact trace norm.
pub fn region_energy_terms(
    params: &DeformationParams,
    n: usize,
    rule: &QuadratureRule,
) -> Result<EnergyBreakdown, EnergyError> {
    params.validate()?;
    if n < 2 {
        return Err(EnergyError::UnsupportedDimension(n));
    }
    let e_a = e_a_closed_form(params, n);
    let e_b = e_b_quadrature(params, n, rule)?;
    let e_c = e_c_closed_form(params, n);
    let boundary_norm = boundary_norm_closed_form(params, n);
    Ok(EnergyBreakdown {
        e_a,
        e_b,
        e_c,
        e_d: 0.0,
        boundary_norm,
        rayleigh: (e_a + e_b + e_c) / boundary_norm,
    })
}

/// Extra graph area of a planar bump over its cutoff margin `D`.
///
/// Not part of the energy. At `omega = eps^-3` it costs far more than the other terms.
pub fn d_area_excess(
    params: &DeformationParams,
    rule: &QuadratureRule,
) -> Result<f64, EnergyError> {
    area_excess(
        &Deformation::new(*params),
        &Domain::bump(params, BumpPart::D),
        rule,
    )
}

/// Generic 2-D quadrature of the test-function energy over one part of the bump support.
pub fn region_energy_brute_force(
    params: &DeformationParams,
    part: BumpPart,
    rule: &QuadratureRule,
) -> Result<f64, EnergyError> {
    dirichlet_energy(
        &TestFunction::new(*params),
        &Deformation::new(*params),
        &Domain::bump(params, part),
        rule,
    )
}

/// The scheduled constants for `eps` and the Rayleigh quotient of the bump test function.
pub fn rayleigh_bound_schedule(
    eps: f64,
    n: usize,
    rule: &QuadratureRule,
) -> Result<(DeformationParams, EnergyBreakdown), EnergyError> {
    let params = DeformationParams::schedule(eps)?;
    let terms = region_energy_terms(&params, n, rule)?;
    Ok((params, terms))
}

// ---------------------------------------------------------------------------
// Quasi-isometries

/// A planar diffeomorphism with a certified quasi-isometry constant: squared lengths of
/// tangent vectors change by at most a factor `C` either way.
pub trait QuasiIsometry: Sync {
    fn jacobian(&self, x: &[f64; 2]) -> [[f64; 2]; 2];
    fn certified_constant(&self) -> Option<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMap {
    pub a: [[f64; 2]; 2],
    pub certified: bool,
}

impl LinearMap {
    pub fn identity() -> Self {
        Self::new([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn scaling(s: f64) -> Self {
        Self::new([[s, 0.0], [0.0, s]])
    }

    /// `(x, y) -> (x + k y, y)`.
    pub fn shear(k: f64) -> Self {
        Self::new([[1.0, k], [0.0, 1.0]])
    }

    pub fn new(a: [[f64; 2]; 2]) -> Self {
        Self { a, certified: true }
    }

    pub fn uncertified(a: [[f64; 2]; 2]) -> Self {
        Self {
            a,
            certified: false,
        }
    }

    /// Squared singular values, largest first.
    pub fn singular_values_sq(&self) -> (f64, f64) {
        let [[a, b], [c, d]] = self.a;
        // eigenvalues of A^T A
        let p = a * a + c * c;
        let q = a * b + c * d;
        let r = b * b + d * d;
        let mean = 0.5 * (p + r);
        let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
        (mean + rad, (mean - rad).max(0.0))
    }

    /// `max(s_max^2, 1 / s_min^2)`.
    pub fn operator_constant(&self) -> f64 {
        let (hi, lo) = self.singular_values_sq();
        hi.max(1.0 / lo)
    }
}

impl QuasiIsometry for LinearMap {
    fn jacobian(&self, _x: &[f64; 2]) -> [[f64; 2]; 2] {
        self.a
    }

    fn certified_constant(&self) -> Option<f64> {
        self.certified.then(|| self.operator_constant())
    }
}

/// Energy ratio `E(u ∘ phi^-1 on phi(domain)) / E(u on domain)` for flat metrics,
/// computed by change of variables: `∫ |J^-T grad u|^2 |det J| dx`.
pub fn qi_energy_ratio<M: QuasiIsometry + ?Sized, U: ScalarField<2> + ?Sized>(
    map: &M,
    u: &U,
    domain: &Domain,
    rule: &QuadratureRule,
) -> Result<f64, EnergyError> {
    let base = integrate(
        domain,
        rule,
        |x| {
            let g = u.sample(x).grad;
            dot(&g, &g)
        },
        Some(|x: &[f64; 2]| u.kink_distance(x)),
    );
    let base = converged("reference energy", base)?;
    let mapped = integrate(
        domain,
        rule,
        |x| {
            let g = u.sample(x).grad;
            let [[a, b], [c, d]] = map.jacobian(x);
            let det = a * d - b * c;
            // J^-T g = (1/det) [[d, -c], [-b, a]] g
            let v = [(d * g[0] - c * g[1]) / det, (-b * g[0] + a * g[1]) / det];
            dot(&v, &v) * det.abs()
        },
        Some(|x: &[f64; 2]| u.kink_distance(x)),
    );
    Ok(converged("mapped energy", mapped)? / base)
}

/// Whether the energy ratio under `map` lies in `[C^-(n/2+1), C^(n/2+1)]`.
pub fn qi_energy_ratio_check<M: QuasiIsometry + ?Sized, U: ScalarField<2> + ?Sized>(
    c_qi: f64,
    n: usize,
    map: &M,
    u: &U,
    domain: &Domain,
    rule: &QuadratureRule,
) -> Result<bool, EnergyError> {
    if n != 2 {
        return Err(EnergyError::UnsupportedDimension(n));
    }
    if !(c_qi >= 1.0) {
        return Err(EnergyError::InvalidConstant(c_qi));
    }
    if map.certified_constant().is_none() {
        return Err(EnergyError::UncertifiedMap);
    }
    let ratio = qi_energy_ratio(map, u, domain, rule)?;
    let bound = c_qi.powf(n as f64 / 2.0 + 1.0);
    Ok(ratio >= 1.0 / bound && ratio <= bound)
}
