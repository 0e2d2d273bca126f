//! Product Gauss quadrature on patches split at kink loci.
//!
//! A [`Domain`] is a list of patches, each a parameter rectangle with break points in
//! both directions. Break points are where integrands may lose smoothness, so inside
//! every cell a tensor Gauss–Legendre rule keeps its full order. The integral is
//! recomputed with every break interval halved until two successive levels agree.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::DeformationParams;
use crate::par;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// How a [`Domain`] is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    /// Gauss nodes per direction in each cell.
    pub order: usize,
    /// Halvings of the break intervals before giving up.
    pub max_level: u32,
    /// Accepted relative change between successive levels.
    pub rel_tol: f64,
    /// Extra quadtree splits of cells that a kink hint says are straddling a kink.
    pub kink_depth: u32,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self {
            order: 6,
            max_level: 6,
            rel_tol: 1e-4,
            kink_depth: 4,
        }
    }
}

impl QuadratureRule {
    pub fn with_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn with_max_level(mut self, max_level: u32) -> Self {
        self.max_level = max_level;
        self
    }
}

/// How parameter coordinates map to the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PatchMap {
    /// Identity: `(s, t)` are Cartesian coordinates.
    Cartesian,
    /// `(s, t) = (r, theta)` around `center`, `theta` measured from `e1`.
    Polar { center: [f64; 2] },
}

/// A parameter rectangle with break points.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub map: PatchMap,
    pub s_breaks: Vec<f64>,
    pub t_breaks: Vec<f64>,
}

impl Patch {
    pub fn rect(s_breaks: Vec<f64>, t_breaks: Vec<f64>) -> Self {
        Self {
            map: PatchMap::Cartesian,
            s_breaks: normalize_breaks(s_breaks),
            t_breaks: normalize_breaks(t_breaks),
        }
    }

    pub fn polar(center: [f64; 2], r_breaks: Vec<f64>, theta_breaks: Vec<f64>) -> Self {
        Self {
            map: PatchMap::Polar { center },
            s_breaks: normalize_breaks(r_breaks),
            t_breaks: normalize_breaks(theta_breaks),
        }
    }

    #[inline]
    fn point_and_jacobian(&self, s: f64, t: f64) -> ([f64; 2], f64) {
        match self.map {
            PatchMap::Cartesian => ([s, t], 1.0),
            PatchMap::Polar { center } => {
                let (sn, cs) = t.sin_cos();
                ([center[0] + s * cs, center[1] + s * sn], s)
            }
        }
    }

    /// Planar radius of the cell image, used against kink hints.
    fn cell_radius(&self, s0: f64, s1: f64, t0: f64, t1: f64) -> f64 {
        match self.map {
            PatchMap::Cartesian => 0.5 * (s1 - s0).hypot(t1 - t0),
            PatchMap::Polar { .. } => 0.5 * (s1 - s0).hypot(s1 * (t1 - t0)),
        }
    }
}

/// Sorted, deduplicated break points; breaks closer than `1e-13` relative merge.
pub fn normalize_breaks(mut b: Vec<f64>) -> Vec<f64> {
    b.retain(|v| v.is_finite());
    b.sort_by(|a, c| a.partial_cmp(c).unwrap());
    let span = match (b.first(), b.last()) {
        (Some(a), Some(c)) => (c - a).abs().max(1e-300),
        _ => return b,
    };
    let mut out: Vec<f64> = Vec::with_capacity(b.len());
    for v in b {
        if out.last().is_none_or(|&l| v - l > 1e-13 * span) {
            out.push(v);
        } else if let Some(l) = out.last_mut() {
            // keep the outermost endpoint exact
            *l = l.max(v);
        }
    }
    out
}

/// Integration region made of patches with disjoint interiors.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub patches: Vec<Patch>,
}

/// Breaks `0, step, 2 step, ...` strictly below `end`, then `end`.
pub fn uniform_breaks(start: f64, end: f64, pieces: usize) -> Vec<f64> {
    (0..=pieces)
        .map(|i| start + (end - start) * i as f64 / pieces as f64)
        .collect()
}

/// Multiples of `period` inside `(lo, hi)` plus the endpoints.
pub fn periodic_breaks(lo: f64, hi: f64, period: f64) -> Vec<f64> {
    let mut b = vec![lo, hi];
    let mut k = (lo / period).floor() as i64 + 1;
    loop {
        let v = k as f64 * period;
        if v >= hi {
            break;
        }
        b.push(v);
        k += 1;
    }
    b
}

/// Breaks at `start + 2^j / scale` (geometric grading away from `start`).
pub fn graded_breaks(start: f64, end: f64, scale: f64) -> Vec<f64> {
    let mut b = vec![start, end];
    let mut step = 1.0 / scale;
    while start + step < end {
        b.push(start + step);
        step *= 2.0;
    }
    b
}

/// Which part of a bump's support to cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BumpPart {
    A,
    B,
    C,
    /// `Omega = A ∪ B ∪ C`.
    Omega,
    D,
    /// `Omega ∪ D`, the whole support of the deformation.
    Support,
}

impl Domain {
    pub fn disk(radius: f64) -> Self {
        Self {
            patches: vec![Patch::polar(
                [0.0, 0.0],
                uniform_breaks(0.0, radius, 4),
                uniform_breaks(0.0, 2.0 * PI, 16),
            )],
        }
    }

    /// The chart half-disk `U`.
    pub fn half_disk() -> Self {
        Self {
            patches: vec![Patch::polar(
                [0.0, 0.0],
                uniform_breaks(0.0, 1.0, 4),
                uniform_breaks(-0.5 * PI, 0.5 * PI, 8),
            )],
        }
    }

    pub fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self {
            patches: vec![Patch::rect(vec![x0, x1], vec![y0, y1])],
        }
    }

    /// Part of a planar bump support, split at every kink of the deformation and test
    /// function: sawtooth radii `2m/omega`, `eps`, `eps + rho`, `x1 = delta1, delta`,
    /// with geometric grading of `x1` above `delta1`.
    pub fn bump(params: &DeformationParams, part: BumpPart) -> Self {
        let p = params;
        let c = p.anchor[0];
        let q = [p.delta(), c];
        let period = 2.0 / p.omega;
        let (r_lo, r_hi) = match part {
            BumpPart::D => (p.eps, p.eps + p.rho),
            BumpPart::Support => (0.0, p.eps + p.rho),
            _ => (0.0, p.eps),
        };
        let mut r_breaks = periodic_breaks(r_lo, r_hi, period);
        r_breaks.extend(
            [p.eps, p.eps + p.rho]
                .into_iter()
                .filter(|&v| v > r_lo && v < r_hi),
        );
        let theta = uniform_breaks(-0.5 * PI, 0.5 * PI, 4);
        let mut x1_breaks = graded_breaks(p.delta1, p.delta(), p.omega);
        x1_breaks.push(0.0);
        let x1_collar = vec![0.0, p.delta1];
        let x1_ramp = graded_breaks(p.delta1, p.delta(), p.omega);
        // Transverse breaks for legs (x1 <= delta): both sides of the axis.
        let side = |lo: f64, hi: f64| -> Vec<f64> {
            let mut v: Vec<f64> = Vec::new();
            for b in periodic_breaks(lo, hi, period) {
                v.push(c + b);
                v.push(c - b);
            }
            for extra in [p.eps, p.eps + p.rho] {
                if extra > lo && extra < hi {
                    v.push(c + extra);
                    v.push(c - extra);
                }
            }
            v
        };
        let mut patches = Vec::new();
        let leg = |x1b: Vec<f64>, patches: &mut Vec<Patch>| {
            if r_lo == 0.0 {
                let mut t = side(0.0, r_hi);
                t.push(c);
                patches.push(Patch::rect(x1b, t));
            } else {
                // two strips |x2 - c| in [r_lo, r_hi]
                let t = side(r_lo, r_hi);
                let upper: Vec<f64> = t.iter().copied().filter(|&v| v >= c + r_lo).collect();
                let lower: Vec<f64> = t.iter().copied().filter(|&v| v <= c - r_lo).collect();
                patches.push(Patch::rect(x1b.clone(), upper));
                patches.push(Patch::rect(x1b, lower));
            }
        };
        match part {
            BumpPart::A => patches.push(Patch::polar(q, r_breaks, theta)),
            BumpPart::B => leg(x1_ramp, &mut patches),
            BumpPart::C => leg(x1_collar, &mut patches),
            BumpPart::Omega | BumpPart::D | BumpPart::Support => {
                leg(x1_breaks, &mut patches);
                patches.push(Patch::polar(q, r_breaks, theta));
            }
        }
        Self { patches }
    }
}

/// Result of a converged integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Refinement level at which the result was accepted.
    pub level: u32,
    /// Relative change between the last two levels.
    pub rel_change: f64,
}

/// A cell whose estimate still moved at the last level.
#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub patch: usize,
    pub s: (f64, f64),
    pub t: (f64, f64),
    pub change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonConvergence {
    pub last: f64,
    pub rel_change: f64,
    pub worst_cells: Vec<CellReport>,
}

#[derive(Clone, Copy)]
struct Cell {
    patch: usize,
    s0: f64,
    s1: f64,
    t0: f64,
    t1: f64,
}

fn cells_at_level(domain: &Domain, level: u32) -> Vec<Cell> {
    let split = 1usize << level;
    let mut cells = Vec::new();
    for (pi, p) in domain.patches.iter().enumerate() {
        for sw in p.s_breaks.windows(2) {
            for i in 0..split {
                let s0 = sw[0] + (sw[1] - sw[0]) * i as f64 / split as f64;
                let s1 = sw[0] + (sw[1] - sw[0]) * (i + 1) as f64 / split as f64;
                for tw in p.t_breaks.windows(2) {
                    for j in 0..split {
                        let t0 = tw[0] + (tw[1] - tw[0]) * j as f64 / split as f64;
                        let t1 = tw[0] + (tw[1] - tw[0]) * (j + 1) as f64 / split as f64;
                        cells.push(Cell {
                            patch: pi,
                            s0,
                            s1,
                            t0,
                            t1,
                        });
                    }
                }
            }
        }
    }
    cells
}

struct Rule1d {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn cell_sum<F, H>(
    domain: &Domain,
    rule: &Rule1d,
    cell: Cell,
    f: &F,
    hint: &Option<H>,
    depth_left: u32,
) -> f64
where
    F: Fn(&[f64; 2]) -> f64 + Sync,
    H: Fn(&[f64; 2]) -> f64 + Sync,
{
    let patch = &domain.patches[cell.patch];
    if depth_left > 0 {
        if let Some(h) = hint {
            let (mid, _) =
                patch.point_and_jacobian(0.5 * (cell.s0 + cell.s1), 0.5 * (cell.t0 + cell.t1));
            if h(&mid) < patch.cell_radius(cell.s0, cell.s1, cell.t0, cell.t1) {
                let sm = 0.5 * (cell.s0 + cell.s1);
                let tm = 0.5 * (cell.t0 + cell.t1);
                let mut acc = 0.0;
                for (a, b) in [(cell.s0, sm), (sm, cell.s1)] {
                    for (c, d) in [(cell.t0, tm), (tm, cell.t1)] {
                        let sub = Cell {
                            patch: cell.patch,
                            s0: a,
                            s1: b,
                            t0: c,
                            t1: d,
                        };
                        acc += cell_sum(domain, rule, sub, f, hint, depth_left - 1);
                    }
                }
                return acc;
            }
        }
    }
    let hs = 0.5 * (cell.s1 - cell.s0);
    let ht = 0.5 * (cell.t1 - cell.t0);
    let cs = 0.5 * (cell.s1 + cell.s0);
    let ct = 0.5 * (cell.t1 + cell.t0);
    let mut acc = 0.0;
    for (ns, ws) in rule.nodes.iter().zip(&rule.weights) {
        let s = cs + hs * ns;
        let mut row = 0.0;
        for (nt, wt) in rule.nodes.iter().zip(&rule.weights) {
            let (x, jac) = patch.point_and_jacobian(s, ct + ht * nt);
            row += wt * f(&x) * jac;
        }
        acc += ws * row;
    }
    acc * hs * ht
}

fn level_values<F, H>(
    domain: &Domain,
    rule: &Rule1d,
    level: u32,
    f: &F,
    hint: &Option<H>,
    depth: u32,
) -> (Vec<Cell>, Vec<f64>)
where
    F: Fn(&[f64; 2]) -> f64 + Sync + Send,
    H: Fn(&[f64; 2]) -> f64 + Sync + Send,
{
    let cells = cells_at_level(domain, level);
    let vals = par::map(&cells, |c| cell_sum(domain, rule, *c, f, hint, depth));
    (cells, vals)
}

/// Integrate `f` over `domain`, halving every break interval until the result moves
/// by less than `rule.rel_tol` (relative). `hint`, when given, is a kink-distance
/// function: cells it reports as straddling a kink are split further.
pub fn integrate<F, H>(
    domain: &Domain,
    rule: &QuadratureRule,
    f: F,
    hint: Option<H>,
) -> Result<Integral, NonConvergence>
where
    F: Fn(&[f64; 2]) -> f64 + Sync + Send,
    H: Fn(&[f64; 2]) -> f64 + Sync + Send,
{
    let (nodes, weights) = gauss_legendre(rule.order);
    let r1 = Rule1d { nodes, weights };
    let (mut prev_cells, mut prev_vals) = level_values(domain, &r1, 0, &f, &hint, rule.kink_depth);
    let mut prev: f64 = prev_vals.iter().sum();
    let mut change = f64::INFINITY;
    for level in 1..=rule.max_level {
        let (cells, vals) = level_values(domain, &r1, level, &f, &hint, rule.kink_depth);
        let cur: f64 = vals.iter().sum();
        change = (cur - prev).abs() / cur.abs().max(1e-300);
        if (cur - prev).abs() <= rule.rel_tol * cur.abs() + 1e-15 {
            return Ok(Integral {
                value: cur,
                level,
                rel_change: change,
            });
        }
        if level == rule.max_level {
            return Err(NonConvergence {
                last: cur,
                rel_change: change,
                worst_cells: worst_cells(&prev_cells, &prev_vals, &cells, &vals),
            });
        }
        prev = cur;
        prev_cells = cells;
        prev_vals = vals;
    }
    Err(NonConvergence {
        last: prev,
        rel_change: change,
        worst_cells: Vec::new(),
    })
}

/// Cells of the coarser level whose children moved the most.
fn worst_cells(
    coarse: &[Cell],
    coarse_vals: &[f64],
    fine: &[Cell],
    fine_vals: &[f64],
) -> Vec<CellReport> {
    let mut reports: Vec<CellReport> = coarse
        .iter()
        .zip(coarse_vals)
        .map(|(c, &v)| {
            let children: f64 = fine
                .iter()
                .zip(fine_vals)
                .filter(|(f, _)| {
                    f.patch == c.patch
                        && f.s0 >= c.s0 - 1e-15
                        && f.s1 <= c.s1 + 1e-15
                        && f.t0 >= c.t0 - 1e-15
                        && f.t1 <= c.t1 + 1e-15
                })
                .map(|(_, &v)| v)
                .sum();
            CellReport {
                patch: c.patch,
                s: (c.s0, c.s1),
                t: (c.t0, c.t1),
                change: (children - v).abs(),
            }
        })
        .collect();
    reports.sort_by(|a, b| b.change.partial_cmp(&a.change).unwrap());
    reports.truncate(5);
    reports
}

/// Integrate a smooth-per-piece function of one variable over break intervals, halving
/// them until successive sums agree.
pub fn integrate_1d<F>(
    breaks: &[f64],
    rule: &QuadratureRule,
    f: F,
) -> Result<Integral, NonConvergence>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let breaks = normalize_breaks(breaks.to_vec());
    let (nodes, weights) = gauss_legendre(rule.order);
    let eval = |level: u32| -> f64 {
        let split = 1usize << level;
        let pieces: Vec<(f64, f64)> = breaks
            .windows(2)
            .flat_map(|w| {
                (0..split).map(move |i| {
                    let a = w[0] + (w[1] - w[0]) * i as f64 / split as f64;
                    let b = w[0] + (w[1] - w[0]) * (i + 1) as f64 / split as f64;
                    (a, b)
                })
            })
            .collect();
        par::map(&pieces, |&(a, b)| {
            let h = 0.5 * (b - a);
            let m = 0.5 * (a + b);
            nodes
                .iter()
                .zip(&weights)
                .map(|(x, w)| w * f(m + h * x))
                .sum::<f64>()
                * h
        })
        .into_iter()
        .sum()
    };
    let mut prev = eval(0);
    let mut change = f64::INFINITY;
    for level in 1..=rule.max_level {
        let cur = eval(level);
        change = (cur - prev).abs() / cur.abs().max(1e-300);
        if (cur - prev).abs() <= rule.rel_tol * cur.abs() + 1e-15 {
            return Ok(Integral {
                value: cur,
                level,
                rel_change: change,
            });
        }
        prev = cur;
    }
    Err(NonConvergence {
        last: prev,
        rel_change: change,
        worst_cells: Vec::new(),
    })
}

/// No kink hint.
pub const NO_HINT: Option<fn(&[f64; 2]) -> f64> = None;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn polynomial_on_rect_is_exact_at_level_zero() {
        let rule = QuadratureRule::default();
        let dom = Domain::rect(0.0, 2.0, -1.0, 1.0);
        let r = integrate(&dom, &rule, |x| x[0].powi(3) * x[1] * x[1], NO_HINT).unwrap();
        // int_0^2 x^3 dx * int_-1^1 y^2 dy = 4 * 2/3
        assert_relative_eq!(r.value, 8.0 / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn disk_and_half_disk_areas() {
        let rule = QuadratureRule::default();
        let a = integrate(&Domain::disk(1.0), &rule, |_| 1.0, NO_HINT).unwrap();
        assert_relative_eq!(a.value, PI, max_relative = 1e-13);
        let h = integrate(&Domain::half_disk(), &rule, |_| 1.0, NO_HINT).unwrap();
        assert_relative_eq!(h.value, PI / 2.0, max_relative = 1e-13);
        let m = integrate(&Domain::disk(1.0), &rule, |x| x[0] * x[0], NO_HINT).unwrap();
        assert_relative_eq!(m.value, PI / 4.0, max_relative = 1e-13);
    }

    #[test]
    fn kink_hint_splits_straddling_cells() {
        // |x - 0.3| on [0,1]^2 with no break at 0.3: the hint restores accuracy.
        let rule = QuadratureRule::default().with_tol(1e-10).with_max_level(3);
        let dom = Domain::rect(0.0, 1.0, 0.0, 1.0);
        let exact = 0.5 * (0.3f64.powi(2) + 0.7f64.powi(2));
        let plain = integrate(&dom, &rule, |x| (x[0] - 0.3).abs(), NO_HINT);
        let plain_val = match plain {
            Ok(v) => v.value,
            Err(e) => e.last,
        };
        let hinted = integrate(
            &dom,
            &QuadratureRule {
                kink_depth: 12,
                ..rule
            },
            |x| (x[0] - 0.3).abs(),
            Some(|x: &[f64; 2]| (x[0] - 0.3).abs()),
        );
        let hinted_val = match hinted {
            Ok(v) => v.value,
            Err(e) => e.last,
        };
        assert!((hinted_val - exact).abs() < (plain_val - exact).abs());
        assert!((hinted_val - exact).abs() < 1e-7);
    }

    #[test]
    fn non_convergence_reports_worst_cells() {
        let rule = QuadratureRule::default()
            .with_tol(1e-14)
            .with_max_level(2)
            .with_order(2);
        let dom = Domain::rect(0.0, 1.0, 0.0, 1.0);
        let err = integrate(&dom, &rule, |x| (40.0 * x[0]).sin().abs(), NO_HINT).unwrap_err();
        assert!(!err.worst_cells.is_empty());
        assert!(err.worst_cells[0].change >= err.worst_cells.last().unwrap().change);
    }

    #[test]
    fn bump_parts_have_expected_areas() {
        let p = DeformationParams::schedule_with_omega(0.2, 40.0).unwrap();
        let rule = QuadratureRule::default();
        let area = |part| {
            integrate(&Domain::bump(&p, part), &rule, |_| 1.0, NO_HINT)
                .unwrap()
                .value
        };
        assert_relative_eq!(
            area(BumpPart::A),
            PI * p.eps * p.eps / 2.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            area(BumpPart::B),
            2.0 * p.eps * p.delta2,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            area(BumpPart::C),
            2.0 * p.eps * p.delta1,
            max_relative = 1e-12
        );
        let r = p.eps + p.rho;
        let support = PI * r * r / 2.0 + 2.0 * r * p.delta();
        assert_relative_eq!(area(BumpPart::Support), support, max_relative = 1e-12);
        assert_relative_eq!(
            area(BumpPart::Omega) + area(BumpPart::D),
            support,
            max_relative = 1e-12
        );
    }

    #[test]
    fn one_dimensional_rule() {
        let rule = QuadratureRule::default();
        let r = integrate_1d(&[0.0, 0.5, 1.0], &rule, |x| (x - 0.5).abs()).unwrap();
        assert_relative_eq!(r.value, 0.25, max_relative = 1e-13);
    }
}
