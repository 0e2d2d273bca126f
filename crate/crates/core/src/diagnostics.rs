//! Volume, intrinsic diameter and boundary-collar checks for lifted surfaces.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{area_excess, EnergyError};
use crate::geometry::{Deformation, DeformationParams, Region, ScalarField};
use crate::mesh::LiftedSurface;
use crate::par;
use crate::quadrature::{BumpPart, Domain, QuadratureRule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("surface is disconnected: {reached} of {total} vertices reachable")]
    Disconnected { reached: usize, total: usize },
    #[error("surface has no vertices")]
    Empty,
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Sum of lifted triangle areas.
pub fn surface_volume(surface: &LiftedSurface) -> f64 {
    surface.total_area()
}

/// Source selection for the graph diameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiameterOptions {
    /// Boundary vertices beyond this count are strided.
    pub max_boundary_sources: usize,
    /// Strided interior vertices added as sources.
    pub interior_sources: usize,
}

impl Default for DiameterOptions {
    fn default() -> Self {
        Self {
            max_boundary_sources: 512,
            interior_sources: 64,
        }
    }
}

/// Edge graph of a surface in CSR form. Besides mesh edges it carries, for every pair of
/// triangles sharing an edge, the straight segment between the two opposite vertices in
/// the unfolded pair whenever that segment crosses the shared edge. Both kinds of edges
/// are true surface paths, so graph distances stay upper bounds of geodesic distances;
/// the unfolded edges cut the direction bias of a pure edge graph.
struct Graph {
    indptr: Vec<usize>,
    adj: Vec<(usize, f64)>,
}

fn len3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Length of the unfolded segment `c -> d` across edge `a b`, if it crosses the edge.
fn unfolded(a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3]) -> Option<f64> {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let l = len3(&a, &b);
    let e = [ab[0] / l, ab[1] / l, ab[2] / l];
    let local = |p: [f64; 3]| {
        let v = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
        let x = v[0] * e[0] + v[1] * e[1] + v[2] * e[2];
        let y = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] - x * x)
            .max(0.0)
            .sqrt();
        (x, y)
    };
    let (xc, yc) = local(c);
    let (xd, yd) = local(d);
    let yd = -yd;
    if yc <= 0.0 || yd >= 0.0 {
        return None;
    }
    let xcross = xc + (xd - xc) * yc / (yc - yd);
    (xcross > 0.0 && xcross < l).then(|| (xc - xd).hypot(yc - yd))
}

impl Graph {
    fn new(s: &LiftedSurface) -> Self {
        let n = s.mesh.vertices.len();
        let mut opposite: Vec<((usize, usize), usize)> = s
            .mesh
            .triangles
            .iter()
            .flat_map(|t| {
                (0..3).map(move |k| {
                    let (a, b) = (t[k], t[(k + 1) % 3]);
                    ((a.min(b), a.max(b)), t[(k + 2) % 3])
                })
            })
            .collect();
        opposite.sort_unstable();
        let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(3 * opposite.len());
        let mut i = 0;
        while i < opposite.len() {
            let ((a, b), c) = opposite[i];
            let (pa, pb) = (s.position(a), s.position(b));
            let w = len3(&pa, &pb);
            edges.push((a, b, w));
            edges.push((b, a, w));
            if i + 1 < opposite.len() && opposite[i + 1].0 == (a, b) {
                let d = opposite[i + 1].1;
                if let Some(w) = unfolded(pa, pb, s.position(c), s.position(d)) {
                    edges.push((c, d, w));
                    edges.push((d, c, w));
                }
                i += 2;
            } else {
                i += 1;
            }
        }
        edges.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)).then(x.2.total_cmp(&y.2)));
        edges.dedup_by(|x, y| x.0 == y.0 && x.1 == y.1);
        let mut indptr = vec![0usize; n + 1];
        for &(a, _, _) in &edges {
            indptr[a + 1] += 1;
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        let adj = edges.iter().map(|&(_, b, w)| (b, w)).collect();
        Self { indptr, adj }
    }

    fn n(&self) -> usize {
        self.indptr.len() - 1
    }

    fn dijkstra(&self, src: usize) -> Vec<f64> {
        #[derive(PartialEq)]
        struct Item(f64, usize);
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Item {
            fn cmp(&self, o: &Self) -> Ordering {
                o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
            }
        }
        let mut dist = vec![f64::INFINITY; self.n()];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(Item(0.0, src));
        while let Some(Item(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adj[self.indptr[u]..self.indptr[u + 1]] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Item(nd, v));
                }
            }
        }
        dist
    }
}

fn strided(v: &[usize], max: usize) -> Vec<usize> {
    if v.len() <= max || max == 0 {
        return v.to_vec();
    }
    let step = v.len() as f64 / max as f64;
    (0..max).map(|k| v[(k as f64 * step) as usize]).collect()
}

/// Largest edge-graph distance from a set of boundary and interior sources: an upper
/// approximation of the geodesic diameter.
pub fn intrinsic_diameter(surface: &LiftedSurface) -> Result<f64, DiagnosticsError> {
    intrinsic_diameter_with(surface, DiameterOptions::default())
}

pub fn intrinsic_diameter_with(
    surface: &LiftedSurface,
    opts: DiameterOptions,
) -> Result<f64, DiagnosticsError> {
    let g = Graph::new(surface);
    let n = g.n();
    if n == 0 {
        return Err(DiagnosticsError::Empty);
    }
    let loop_vertices: Vec<usize> = surface.mesh.boundary.iter().map(|e| e.v[0]).collect();
    let mut sources = strided(&loop_vertices, opts.max_boundary_sources);
    // vertices where the boundary marker changes (half-disk corners)
    let b = &surface.mesh.boundary;
    for k in 0..b.len() {
        if b[k].marker != b[(k + 1) % b.len()].marker {
            sources.push(b[k].v[1]);
        }
    }
    let mut on_boundary = vec![false; n];
    for &v in &loop_vertices {
        on_boundary[v] = true;
    }
    let interior: Vec<usize> = (0..n).filter(|&v| !on_boundary[v]).collect();
    sources.extend(strided(&interior, opts.interior_sources));
    if sources.is_empty() {
        sources.push(0);
    }
    sources.sort_unstable();
    sources.dedup();
    let ecc: Vec<Result<f64, DiagnosticsError>> = par::map(&sources, |&s| {
        let d = g.dijkstra(s);
        let reached = d.iter().filter(|x| x.is_finite()).count();
        if reached < n {
            return Err(DiagnosticsError::Disconnected { reached, total: n });
        }
        Ok(d.into_iter().fold(0.0, f64::max))
    });
    let mut best: f64 = 0.0;
    for e in ecc {
        best = best.max(e?);
    }
    Ok(best)
}

/// Whether `f` and its gradient vanish exactly at random points of the collar
/// `{x1 <= min delta1}` and of the chart outside every bump support.
pub fn collar_invariance_check<F: ScalarField<2> + ?Sized>(
    f: &F,
    bumps: &[DeformationParams],
    samples: usize,
    seed: u64,
) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let collar = bumps.iter().map(|b| b.delta1).fold(f64::INFINITY, f64::min);
    let collar = if collar.is_finite() { collar } else { 0.0 };
    let vanishes = |x: &[f64; 2]| {
        let s = f.sample(x);
        s.value == 0.0 && s.grad == [0.0, 0.0]
    };
    for _ in 0..samples {
        let x1 = collar * rng.gen::<f64>();
        let half = (1.0 - x1 * x1).max(0.0).sqrt();
        let x = [x1, rng.gen_range(-half..=half)];
        if !vanishes(&x) {
            return false;
        }
    }
    let mut checked = 0;
    let mut tries = 0;
    while checked < samples && tries < 100 * samples {
        tries += 1;
        let x = [rng.gen::<f64>(), rng.gen_range(-1.0..1.0)];
        if x[0] * x[0] + x[1] * x[1] >= 1.0 {
            continue;
        }
        if bumps.iter().any(|b| b.region_of(&x) != Region::Outside) {
            continue;
        }
        checked += 1;
        if !vanishes(&x) {
            return false;
        }
    }
    true
}

/// `∫ (sqrt(1 + |grad f|^2) - 1)` over the support of one bump.
pub fn analytic_volume_difference(
    params: &DeformationParams,
    rule: &QuadratureRule,
) -> Result<f64, DiagnosticsError> {
    Ok(area_excess(
        &Deformation::new(*params),
        &Domain::bump(params, BumpPart::Support),
        rule,
    )?)
}

/// Per-surface diagnostics against the flat reference on the same mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub volume: f64,
    pub flat_volume: f64,
    pub vol_diff: f64,
    pub diameter: f64,
    pub flat_diameter: f64,
    pub diam_diff: f64,
    pub collar_ok: bool,
}

pub fn diagnose<F: ScalarField<2> + ?Sized>(
    surface: &LiftedSurface,
    f: &F,
    bumps: &[DeformationParams],
) -> Result<DiagnosticsRecord, DiagnosticsError> {
    let flat = LiftedSurface::flat(surface.mesh.clone());
    let volume = surface_volume(surface);
    let flat_volume = surface_volume(&flat);
    let diameter = intrinsic_diameter(surface)?;
    let flat_diameter = intrinsic_diameter(&flat)?;
    Ok(DiagnosticsRecord {
        volume,
        flat_volume,
        vol_diff: volume - flat_volume,
        diameter,
        flat_diameter,
        diam_diff: diameter - flat_diameter,
        collar_ok: collar_invariance_check(f, bumps, 10_000, 0),
    })
}
