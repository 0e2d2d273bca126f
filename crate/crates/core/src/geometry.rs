//! Flat chart, cutoffs, regions and the wrinkle deformation.
//!
//! Chart coordinates are `x = (x1, ..., xn)` with the prescribed boundary on `x1 = 0`
//! and the chart domain the half-ball `U = {|x| < 1, x1 >= 0}`. A wrinkle bump is
//! anchored at a point `c` of the boundary plane. Everything below is expressed
//! through the distance `r(x)` from `x` to the bump's core segment
//! `{c + t e1 : 0 <= t <= delta}`:
//!
//! - for `x1 < delta`, `r = |pi x - c|` (distance to the axis through `c`),
//! - for `x1 >= delta`, `r = |x - q|` with apex `q = c + delta e1`.
//!
//! With that, `Omega = A ∪ B ∪ C = {r <= eps}`, `D = {eps < r <= eps + rho}` and
//! `d(x, Omega) = max(0, r - eps)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point {0:?} lies outside the chart half-ball")]
    OutsideChart(Vec<f64>),
    #[error("{what} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("invalid deformation parameters: {0}")]
    InvalidParams(String),
    #[error(
        "bump supports {first} and {second} overlap: anchor distance {distance:.6} < {required:.6}"
    )]
    OverlappingSupports {
        first: usize,
        second: usize,
        distance: f64,
        required: f64,
    },
    #[error("wrinkle count n must be at least 1")]
    ZeroFrequency,
}

pub type PlanarPoint<const N: usize> = [f64; N];

/// Slack used when testing membership of points that were generated on the closure
/// of the chart (mesh vertices on the unit arc).
const CHART_TOL: f64 = 1e-12;

/// The chart half-ball `U`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChartDomain;

impl ChartDomain {
    /// Membership in the closure of `U` (up to rounding).
    pub fn contains<const N: usize>(&self, x: &PlanarPoint<N>) -> bool {
        x.iter().all(|v| v.is_finite()) && x[0] >= 0.0 && norm(x) <= 1.0 + CHART_TOL
    }

    /// The prescribed boundary trace `{x1 = 0, |x| <= 1}`.
    pub fn on_boundary_trace<const N: usize>(&self, x: &PlanarPoint<N>) -> bool {
        x[0] == 0.0 && norm(x) <= 1.0 + CHART_TOL
    }

    pub fn check<const N: usize>(&self, x: &PlanarPoint<N>) -> Result<(), GeometryError> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(GeometryError::OutsideChart(x.to_vec()))
        }
    }
}

pub(crate) fn norm<const N: usize>(x: &[f64; N]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// One-dimensional building blocks

/// `eta(t) = max(0, 1 - t)`.
#[inline]
pub fn eta(t: f64) -> f64 {
    (1.0 - t).max(0.0)
}

pub fn eval_eta(t: f64) -> Result<f64, GeometryError> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(GeometryError::OutOfRange {
            what: "eta argument",
            value: t,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    Ok(eta(t))
}

/// The 4-periodic sawtooth: `1 - t` on `[0, 2]`, `t - 3` on `[2, 4]`.
#[inline]
pub fn sawtooth(t: f64) -> f64 {
    let s = t.rem_euclid(4.0);
    if s <= 2.0 {
        1.0 - s
    } else {
        s - 3.0
    }
}

/// Right derivative of [`sawtooth`]; always `±1`.
#[inline]
pub fn sawtooth_slope(t: f64) -> f64 {
    if t.rem_euclid(4.0) < 2.0 {
        -1.0
    } else {
        1.0
    }
}

pub fn eval_sawtooth(t: f64) -> Result<f64, GeometryError> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(GeometryError::OutOfRange {
            what: "sawtooth argument",
            value: t,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    Ok(sawtooth(t))
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// Surface measure of the unit sphere `S^k` in `R^(k+1)`.
pub fn unit_sphere_area(k: usize) -> f64 {
    (k + 1) as f64 * unit_ball_volume(k + 1)
}

// ---------------------------------------------------------------------------
// Parameters and regions

/// Constants of one wrinkle bump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformationParams {
    /// Bump radius.
    pub eps: f64,
    /// Height of the flat collar next to the boundary.
    pub delta1: f64,
    /// Height of the ramp where the wrinkles grow.
    pub delta2: f64,
    /// Width of the cutoff margin `D`.
    pub rho: f64,
    /// Wrinkle frequency.
    pub omega: f64,
    /// Anchor `c` on the boundary plane, as coordinates `(x2, x3)`; `x3` is ignored
    /// in the plane.
    pub anchor: [f64; 2],
}

impl DeformationParams {
    pub fn new(
        eps: f64,
        delta1: f64,
        delta2: f64,
        rho: f64,
        omega: f64,
    ) -> Result<Self, GeometryError> {
        let p = Self {
            eps,
            delta1,
            delta2,
            rho,
            omega,
            anchor: [0.0, 0.0],
        };
        p.validate()?;
        Ok(p)
    }

    /// The constants schedule `delta1 = eps^3`, `delta2 = eps^(3/2)`, `omega = eps^-3`,
    /// with `rho = eps`.
    pub fn schedule(eps: f64) -> Result<Self, GeometryError> {
        Self::new(eps, eps.powi(3), eps.powf(1.5), eps, eps.powi(-3))
    }

    /// The schedule for `delta1`, `delta2` and `rho`, with an independent frequency.
    pub fn schedule_with_omega(eps: f64, omega: f64) -> Result<Self, GeometryError> {
        Self::new(eps, eps.powi(3), eps.powf(1.5), eps, omega)
    }

    pub fn with_anchor(mut self, anchor: [f64; 2]) -> Result<Self, GeometryError> {
        self.anchor = anchor;
        self.validate()?;
        Ok(self)
    }

    pub fn delta(&self) -> f64 {
        self.delta1 + self.delta2
    }

    /// Radius of the support `Omega ∪ D` around the core segment.
    pub fn support_radius(&self) -> f64 {
        self.eps + self.rho
    }

    /// Radius of a ball around the anchor containing the whole support.
    pub fn enclosing_radius(&self) -> f64 {
        self.delta() + self.eps + self.rho
    }

    fn anchor_norm(&self) -> f64 {
        self.anchor[0].hypot(self.anchor[1])
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let positive = [
            ("eps", self.eps),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("rho", self.rho),
            ("omega", self.omega),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(GeometryError::InvalidParams(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.delta2 >= 1.0 {
            return Err(GeometryError::InvalidParams(format!(
                "delta2 = {} must stay below 1 so the graph fits the cylinder",
                self.delta2
            )));
        }
        let reach = self.enclosing_radius();
        let room = 1.0 - self.anchor_norm();
        if reach >= room {
            return Err(GeometryError::InvalidParams(format!(
                "support does not fit the chart: delta + eps + rho = {reach:.6} >= 1 - |c| = {room:.6}"
            )));
        }
        Ok(())
    }

    /// Core-segment geometry at `x`.
    fn local<const N: usize>(&self, x: &[f64; N]) -> Local<N> {
        let delta = self.delta();
        let mut v = [0.0; N];
        if x[0] >= delta {
            v[0] = x[0] - delta;
        }
        for i in 1..N {
            let c = if i <= 2 { self.anchor[i - 1] } else { 0.0 };
            v[i] = x[i] - c;
        }
        let r = norm(&v);
        let mut grad_r = [0.0; N];
        if r > 0.0 {
            for i in 0..N {
                grad_r[i] = v[i] / r;
            }
        }
        Local { r, grad_r }
    }

    /// Distance from `x` to the core segment.
    pub fn core_distance<const N: usize>(&self, x: &[f64; N]) -> f64 {
        self.local(x).r
    }

    /// Region tag, with priority `A > B > C > D` on shared faces.
    pub fn region_of<const N: usize>(&self, x: &[f64; N]) -> Region {
        let r = self.local(x).r;
        let x1 = x[0];
        if r <= self.eps {
            if x1 >= self.delta() {
                Region::A
            } else if x1 >= self.delta1 {
                Region::B
            } else {
                Region::C
            }
        } else if r <= self.eps + self.rho {
            Region::D
        } else {
            Region::Outside
        }
    }
}

struct Local<const N: usize> {
    r: f64,
    grad_r: [f64; N],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    A,
    B,
    C,
    D,
    Outside,
}

pub fn classify_region<const N: usize>(
    x: &PlanarPoint<N>,
    params: &DeformationParams,
) -> Result<Region, GeometryError> {
    ChartDomain.check(x)?;
    Ok(params.region_of(x))
}

/// `gamma(x1)`: zero on the collar `[0, delta1]`, then `x1 - delta1` up to `delta`.
pub fn eval_gamma(x1: f64, params: &DeformationParams) -> Result<f64, GeometryError> {
    let delta = params.delta();
    if !(0.0..=delta).contains(&x1) {
        return Err(GeometryError::OutOfRange {
            what: "gamma argument",
            value: x1,
            lo: 0.0,
            hi: delta,
        });
    }
    Ok((x1 - params.delta1).max(0.0))
}

// ---------------------------------------------------------------------------
// Scalar fields

/// Value and almost-everywhere gradient of a field at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<const N: usize> {
    pub value: f64,
    pub grad: [f64; N],
}

impl<const N: usize> Sample<N> {
    pub const ZERO: Self = Self {
        value: 0.0,
        grad: [0.0; N],
    };
}

/// A pure map from chart points to value and a.e. gradient.
pub trait ScalarField<const N: usize>: Send + Sync {
    fn sample(&self, x: &[f64; N]) -> Sample<N>;

    fn value(&self, x: &[f64; N]) -> f64 {
        self.sample(x).value
    }

    /// Distance from `x` to the nearest locus where the field is not smooth.
    fn kink_distance(&self, _x: &[f64; N]) -> f64 {
        f64::INFINITY
    }
}

impl<const N: usize, T: ScalarField<N> + ?Sized> ScalarField<N> for &T {
    fn sample(&self, x: &[f64; N]) -> Sample<N> {
        (**self).sample(x)
    }
    fn kink_distance(&self, x: &[f64; N]) -> f64 {
        (**self).kink_distance(x)
    }
}

impl<const N: usize, T: ScalarField<N> + ?Sized> ScalarField<N> for Box<T> {
    fn sample(&self, x: &[f64; N]) -> Sample<N> {
        (**self).sample(x)
    }
    fn kink_distance(&self, x: &[f64; N]) -> f64 {
        (**self).kink_distance(x)
    }
}

/// The zero field.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl<const N: usize> ScalarField<N> for ZeroField {
    fn sample(&self, _x: &[f64; N]) -> Sample<N> {
        Sample::ZERO
    }
}

/// `x ↦ <a, x> + b`.
#[derive(Debug, Clone, Copy)]
pub struct AffineField<const N: usize> {
    pub slope: [f64; N],
    pub offset: f64,
}

impl<const N: usize> AffineField<N> {
    /// The coordinate function `x ↦ x_i`.
    pub fn coordinate(i: usize) -> Self {
        let mut slope = [0.0; N];
        slope[i] = 1.0;
        Self { slope, offset: 0.0 }
    }
}

impl<const N: usize> ScalarField<N> for AffineField<N> {
    fn sample(&self, x: &[f64; N]) -> Sample<N> {
        Sample {
            value: dot(&self.slope, x) + self.offset,
            grad: self.slope,
        }
    }
}

/// Wraps a closure returning value and gradient; handy for tests and experiments.
pub struct FnField<F>(pub F);

impl<const N: usize, F> ScalarField<N> for FnField<F>
where
    F: Fn(&[f64; N]) -> Sample<N> + Send + Sync,
{
    fn sample(&self, x: &[f64; N]) -> Sample<N> {
        (self.0)(x)
    }
}

/// The wrinkle deformation `f` of one bump.
#[derive(Debug, Clone, Copy)]
pub struct Deformation {
    pub params: DeformationParams,
}

impl Deformation {
    pub fn new(params: DeformationParams) -> Self {
        Self { params }
    }
}

impl<const N: usize> ScalarField<N> for Deformation {
    fn sample(&self, x: &[f64; N]) -> Sample<N> {
        let p = &self.params;
        let Local { r, grad_r } = p.local(x);
        if r > p.eps + p.rho {
            return Sample::ZERO;
        }
        let delta = p.delta();
        let x1 = x[0];
        let gamma = (x1.min(delta) - p.delta1).max(0.0);
        // Interface priorities: B over C at x1 = delta1, A over B at x1 = delta.
        let dgamma = if x1 >= p.delta1 && x1 < delta {
            1.0
        } else {
            0.0
        };
        let saw = sawtooth(p.omega * r);
        let dsaw = p.omega * sawtooth_slope(p.omega * r);
        let (cut, dcut) = if r > p.eps {
            (eta((r - p.eps) / p.rho), -1.0 / p.rho)
        } else {
            (1.0, 0.0)
        };
        let value = cut * gamma * saw;
        let radial = dcut * gamma * saw + cut * gamma * dsaw;
        let mut grad = [0.0; N];
        for i in 0..N {
            grad[i] = radial * grad_r[i];
        }
        grad[0] += cut * dgamma * saw;
        Sample { value, grad }
    }

    fn kink_distance(&self, x: &[f64; N]) -> f64 {
        let p = &self.params;
        let r = p.local(x).r;
        let period = 2.0 / p.omega;
        let mut d = (r - (r / period).round() * period).abs();
        d = d.min((r - p.eps).abs()).min((r - p.eps - p.rho).abs());
        if r <= p.eps + p.rho + d {
            d = d.min((x[0] - p.delta1).abs()).min((x[0] - p.delta()).abs());
        }
        d
    }
}

/// The test function `u = 1 - r/eps` on `Omega`, zero elsewhere.
#[derive(Debug, Clone, Copy)]
pub struct TestFunction {
    pub params: DeformationParams,
}

impl TestFunction {
    pub fn new(params: DeformationParams) -> Self {
        Self { params }
    }
}

impl<const N: usize> ScalarField<N> for TestFunction {
    fn sample(&self, x: &[f64; N]) -> Sample<N> {
        let p = &self.params;
        let Local { r, grad_r } = p.local(x);
        if r > p.eps {
            return Sample::ZERO;
        }
        let mut grad = [0.0; N];
        for i in 0..N {
            grad[i] = -grad_r[i] / p.eps;
        }
        Sample {
            value: 1.0 - r / p.eps,
            grad,
        }
    }

    fn kink_distance(&self, x: &[f64; N]) -> f64 {
        let p = &self.params;
        let r = p.local(x).r;
        r.min((r - p.eps).abs()).min((x[0] - p.delta()).abs())
    }
}

/// `f(x) = sum_i f_i(x)` for bumps with pairwise disjoint supports.
#[derive(Debug, Clone)]
pub struct BumpSum {
    pub bumps: Vec<Deformation>,
}

impl<const N: usize> ScalarField<N> for BumpSum {
    fn sample(&self, x: &[f64; N]) -> Sample<N> {
        let mut out = Sample::ZERO;
        for b in &self.bumps {
            let s = ScalarField::<N>::sample(b, x);
            out.value += s.value;
            for i in 0..N {
                out.grad[i] += s.grad[i];
            }
        }
        out
    }

    fn kink_distance(&self, x: &[f64; N]) -> f64 {
        self.bumps
            .iter()
            .map(|b| ScalarField::<N>::kink_distance(b, x))
            .fold(f64::INFINITY, f64::min)
    }
}

fn sample_checked<const N: usize, F: ScalarField<N>>(
    field: &F,
    x: &PlanarPoint<N>,
    params: &DeformationParams,
) -> Result<Sample<N>, GeometryError> {
    ChartDomain.check(x)?;
    params.validate()?;
    Ok(field.sample(x))
}

pub fn eval_deformation<const N: usize>(
    x: &PlanarPoint<N>,
    params: &DeformationParams,
) -> Result<Sample<N>, GeometryError> {
    sample_checked(&Deformation::new(*params), x, params)
}

pub fn eval_test_function<const N: usize>(
    x: &PlanarPoint<N>,
    params: &DeformationParams,
) -> Result<Sample<N>, GeometryError> {
    sample_checked(&TestFunction::new(*params), x, params)
}

/// `f_n(x, y) = sin(n x) (1 - x^2 - y^2)` on the unit disk.
#[derive(Debug, Clone, Copy)]
pub struct Example1Field {
    pub n: u32,
}

impl ScalarField<2> for Example1Field {
    fn sample(&self, x: &[f64; 2]) -> Sample<2> {
        let n = self.n as f64;
        let (s, c) = (n * x[0]).sin_cos();
        let phi = 1.0 - x[0] * x[0] - x[1] * x[1];
        Sample {
            value: s * phi,
            grad: [n * c * phi - 2.0 * x[0] * s, -2.0 * x[1] * s],
        }
    }
}

pub fn example1_field(n: u32) -> Result<Example1Field, GeometryError> {
    if n == 0 {
        return Err(GeometryError::ZeroFrequency);
    }
    Ok(Example1Field { n })
}

/// Sum of bump deformations together with one test function per bump.
pub fn multibump_compose(
    bumps: &[DeformationParams],
) -> Result<(BumpSum, Vec<TestFunction>), GeometryError> {
    for b in bumps {
        b.validate()?;
    }
    for i in 0..bumps.len() {
        for j in (i + 1)..bumps.len() {
            let (a, b) = (&bumps[i], &bumps[j]);
            let distance = (a.anchor[0] - b.anchor[0]).hypot(a.anchor[1] - b.anchor[1]);
            let required = a.enclosing_radius() + b.enclosing_radius();
            if distance < required {
                return Err(GeometryError::OverlappingSupports {
                    first: i,
                    second: j,
                    distance,
                    required,
                });
            }
        }
    }
    let f = BumpSum {
        bumps: bumps.iter().copied().map(Deformation::new).collect(),
    };
    let trials = bumps.iter().copied().map(TestFunction::new).collect();
    Ok((f, trials))
}
