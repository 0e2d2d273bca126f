//! Layered, kink-aligned triangulations of the chart half-disk and the unit disk.
//!
//! Vertices are placed on level curves of the bump core distance `r` (U-shaped curves
//! made of two legs and a half circle around the apex). Inside the bump support the
//! levels include every sawtooth kink radius `2m/omega` together with `eps` and
//! `eps + rho`, so the piecewise-linear interpolant of the deformation has its kinks on
//! mesh edges. Outside the support the level spacing grows geometrically to the coarse
//! size. The point set is then triangulated by a constrained Delaunay triangulation with
//! the kink curves as constraints.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};
use thiserror::Error;

use crate::geometry::{DeformationParams, ScalarField};

/// Default cap on the number of triangles of a generated mesh.
pub const DEFAULT_MESH_CAP: usize = 2_000_000;

/// Ratio between the target size `h` and the spacing of vertices along level curves.
const COARSE_FACTOR: f64 = 0.8;
/// Fine spacing is `min(h, 1/(4 omega)) / FINE_DIVISOR`, leaving room for the diagonals.
const FINE_DIVISOR: f64 = 1.6;
/// Level-gap growth per layer outside the bump support.
const GROWTH: f64 = 1.25;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("target size h = {h} must lie in (0, {max})")]
    InvalidSize { h: f64, max: f64 },
    #[error("estimated {estimate} triangles exceed the mesh cap {cap}")]
    TooLarge { estimate: usize, cap: usize },
    #[error("triangulation failed: {0}")]
    Triangulation(String),
    #[error("triangle {triangle} has zero area")]
    Degenerate { triangle: usize },
    #[error("|f| = {value} >= 1 at vertex {vertex}; the graph leaves the cylinder")]
    LiftOutOfCylinder { vertex: usize, value: f64 },
    #[error("invalid deformation: {0}")]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("OFF parse error: {0}")]
    Off(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryMarker {
    /// On the prescribed boundary `x1 = 0` (all of the circle for the disk).
    Prescribed,
    /// On the artificial cut of the chart (the unit arc of the half-disk).
    ChartCut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub marker: BoundaryMarker,
}

/// How boundary edges of a triangle soup are marked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerRule {
    AllPrescribed,
    /// Prescribed when both endpoints lie on `x1 = 0`.
    ChartEdge,
}

/// Planar triangulation with counterclockwise triangles and an ordered boundary loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    pub target_h: f64,
}

fn sub(a: &[f64; 2], b: &[f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Interior angles of a triangle in 2-D or 3-D, in degrees.
fn angles_deg<const N: usize>(p: [&[f64; N]; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
        let mut u = [0.0; N];
        let mut v = [0.0; N];
        for i in 0..N {
            u[i] = b[i] - a[i];
            v[i] = c[i] - a[i];
        }
        let d: f64 = (0..N).map(|i| u[i] * v[i]).sum();
        let nu: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        out[k] = (d / (nu * nv)).clamp(-1.0, 1.0).acos().to_degrees();
    }
    out
}

impl TriMesh {
    /// Build a mesh from vertices and triangles; orientation is fixed to counterclockwise
    /// and the boundary loop is extracted and marked.
    pub fn from_triangles(
        vertices: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        target_h: f64,
        rule: MarkerRule,
    ) -> Result<Self, MeshError> {
        for (i, t) in triangles.iter_mut().enumerate() {
            let a = cross2(
                &sub(&vertices[t[1]], &vertices[t[0]]),
                &sub(&vertices[t[2]], &vertices[t[0]]),
            );
            if a == 0.0 {
                return Err(MeshError::Degenerate { triangle: i });
            }
            if a < 0.0 {
                t.swap(1, 2);
            }
        }
        let boundary = boundary_loop(&vertices, &triangles, rule)?;
        Ok(Self {
            vertices,
            triangles,
            boundary,
            target_h,
        })
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * cross2(
            &sub(&self.vertices[b], &self.vertices[a]),
            &sub(&self.vertices[c], &self.vertices[a]),
        )
    }

    pub fn planar_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    /// Length of the boundary edges with the given marker (all edges for `None`).
    pub fn boundary_length(&self, marker: Option<BoundaryMarker>) -> f64 {
        self.boundary
            .iter()
            .filter(|e| marker.is_none_or(|m| e.marker == m))
            .map(|e| dist(&self.vertices[e.v[0]], &self.vertices[e.v[1]]))
            .sum()
    }

    /// Sorted indices of vertices on prescribed-boundary edges.
    pub fn prescribed_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary
            .iter()
            .filter(|e| e.marker == BoundaryMarker::Prescribed)
            .flat_map(|e| e.v)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn edge_count(&self) -> usize {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]))))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }

    /// `V - E + F`; 1 for a disk.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }

    pub fn min_angle_deg(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| {
                angles_deg([
                    &self.vertices[t[0]],
                    &self.vertices[t[1]],
                    &self.vertices[t[2]],
                ])
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Copy with every coordinate multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| [v[0] * s, v[1] * s]).collect(),
            triangles: self.triangles.clone(),
            boundary: self.boundary.clone(),
            target_h: self.target_h * s,
        }
    }

    /// Longest edge among triangles whose vertices all satisfy `inside`.
    pub fn max_edge_where(&self, inside: impl Fn(&[f64; 2]) -> bool) -> f64 {
        let mut m: f64 = 0.0;
        for t in &self.triangles {
            if t.iter().all(|&i| inside(&self.vertices[i])) {
                for k in 0..3 {
                    m = m.max(dist(&self.vertices[t[k]], &self.vertices[t[(k + 1) % 3]]));
                }
            }
        }
        m
    }

    /// ASCII OFF with `z = 0`.
    pub fn to_off(&self) -> String {
        write_off(
            self.vertices.iter().map(|v| [v[0], v[1], 0.0]),
            &self.triangles,
        )
    }

    /// Read a planar mesh from OFF (the `z` column is ignored).
    pub fn from_off(text: &str, target_h: f64, rule: MarkerRule) -> Result<Self, MeshError> {
        let (v, t) = read_off(text)?;
        Self::from_triangles(
            v.into_iter().map(|p| [p[0], p[1]]).collect(),
            t,
            target_h,
            rule,
        )
    }
}

fn boundary_loop(
    vertices: &[[f64; 2]],
    triangles: &[[usize; 3]],
    rule: MarkerRule,
) -> Result<Vec<BoundaryEdge>, MeshError> {
    let mut count: HashMap<(usize, usize), u32> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    if let Some((e, c)) = count.iter().find(|(_, &c)| c > 2) {
        return Err(MeshError::Triangulation(format!(
            "edge {e:?} shared by {c} triangles"
        )));
    }
    // directed boundary edges in triangle orientation
    let mut next: HashMap<usize, usize> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if count[&(a.min(b), a.max(b))] == 1 && next.insert(a, b).is_some() {
                return Err(MeshError::Triangulation(format!(
                    "vertex {a} is pinched on the boundary"
                )));
            }
        }
    }
    if next.is_empty() {
        return Ok(Vec::new());
    }
    // start at the lowest vertex of the boundary edge x1 = 0 (or the smallest index)
    let start = *next
        .keys()
        .min_by(|&&a, &&b| {
            let (pa, pb) = (vertices[a], vertices[b]);
            (pa[0].abs(), pa[1], a)
                .partial_cmp(&(pb[0].abs(), pb[1], b))
                .unwrap()
        })
        .unwrap();
    let mut loop_edges = Vec::with_capacity(next.len());
    let mut cur = start;
    loop {
        let nxt = next[&cur];
        let marker = match rule {
            MarkerRule::AllPrescribed => BoundaryMarker::Prescribed,
            MarkerRule::ChartEdge if vertices[cur][0] == 0.0 && vertices[nxt][0] == 0.0 => {
                BoundaryMarker::Prescribed
            }
            MarkerRule::ChartEdge => BoundaryMarker::ChartCut,
        };
        loop_edges.push(BoundaryEdge {
            v: [cur, nxt],
            marker,
        });
        cur = nxt;
        if cur == start {
            break;
        }
        if loop_edges.len() > next.len() {
            return Err(MeshError::Triangulation(
                "boundary is not a single loop".into(),
            ));
        }
    }
    if loop_edges.len() != next.len() {
        return Err(MeshError::Triangulation(format!(
            "boundary has several loops ({} of {} edges in the first)",
            loop_edges.len(),
            next.len()
        )));
    }
    Ok(loop_edges)
}

fn write_off(verts: impl ExactSizeIterator<Item = [f64; 3]>, tris: &[[usize; 3]]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "OFF\n{} {} 0", verts.len(), tris.len());
    for v in verts {
        let _ = writeln!(s, "{} {} {}", v[0], v[1], v[2]);
    }
    for t in tris {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

/// Parse an ASCII OFF file of triangles.
pub fn read_off(text: &str) -> Result<(Vec<[f64; 3]>, Vec<[usize; 3]>), MeshError> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    let bad = |m: &str| MeshError::Off(m.to_string());
    if tokens.next() != Some("OFF") {
        return Err(bad("missing OFF header"));
    }
    let mut num = |what: &str| -> Result<usize, MeshError> {
        tokens
            .next()
            .ok_or_else(|| bad(&format!("missing {what}")))?
            .parse::<usize>()
            .map_err(|e| bad(&format!("{what}: {e}")))
    };
    let nv = num("vertex count")?;
    let nf = num("face count")?;
    let _ne = num("edge count")?;
    let mut v = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut p = [0.0; 3];
        for c in &mut p {
            *c = tokens
                .next()
                .ok_or_else(|| bad("truncated vertex list"))?
                .parse()
                .map_err(|e| bad(&format!("coordinate: {e}")))?;
        }
        v.push(p);
    }
    let mut f = Vec::with_capacity(nf);
    for _ in 0..nf {
        let k: usize = tokens
            .next()
            .ok_or_else(|| bad("truncated face list"))?
            .parse()
            .map_err(|e| bad(&format!("face size: {e}")))?;
        if k != 3 {
            return Err(bad("only triangles are supported"));
        }
        let mut t = [0usize; 3];
        for c in &mut t {
            *c = tokens
                .next()
                .ok_or_else(|| bad("truncated face"))?
                .parse()
                .map_err(|e| bad(&format!("index: {e}")))?;
            if *c >= nv {
                return Err(bad("face index out of range"));
            }
        }
        f.push(t);
    }
    Ok((v, f))
}

// ---------------------------------------------------------------------------
// Layered point generation

/// Level curves of one bump's core distance.
struct Layering {
    c: f64,
    delta: f64,
    delta1: f64,
    /// Increasing levels, starting at 0.
    levels: Vec<f64>,
    /// Spacing used on each level.
    spacing: Vec<f64>,
    /// Levels that carry kinks of the deformation.
    kinks: Vec<bool>,
}

impl Layering {
    fn new(p: Option<&DeformationParams>, h: f64, r_max: f64) -> Self {
        let coarse = COARSE_FACTOR * h;
        let mut levels = vec![0.0];
        let mut spacing = vec![coarse];
        let mut kinks = vec![false];
        let (c, delta, delta1, mut r, mut gap) = match p {
            None => (0.0, 0.0, 0.0, 0.0, coarse),
            Some(p) => {
                let fine = h.min(0.25 / p.omega) / FINE_DIVISOR;
                let top = p.support_radius();
                let mut req: Vec<(f64, bool)> = Vec::new();
                let period = 2.0 / p.omega;
                let mut m = 1;
                while m as f64 * period < top {
                    req.push((m as f64 * period, true));
                    m += 1;
                }
                req.push((p.eps, true));
                req.push((top, true));
                req.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                req.dedup_by(|a, b| (a.0 - b.0).abs() < 0.3 * fine);
                spacing[0] = fine;
                let mut prev = 0.0;
                for (lv, k) in req {
                    let pieces = ((lv - prev) / fine).ceil().max(1.0) as usize;
                    for i in 1..=pieces {
                        levels.push(prev + (lv - prev) * i as f64 / pieces as f64);
                        spacing.push(fine);
                        kinks.push(k && i == pieces);
                    }
                    prev = lv;
                }
                (p.anchor[0], p.delta(), p.delta1, top, fine)
            }
        };
        while r < r_max {
            gap = (gap * if p.is_some() { GROWTH } else { 1.0 }).min(coarse);
            r += gap;
            levels.push(r);
            spacing.push(gap);
            kinks.push(false);
        }
        Self {
            c,
            delta,
            delta1,
            levels,
            spacing,
            kinks,
        }
    }

    fn core_distance(&self, x: &[f64; 2]) -> f64 {
        let dx = (x[0] - self.delta).max(0.0);
        dx.hypot(x[1] - self.c)
    }

    /// Spacing of the level band containing core distance `r`.
    fn size_at(&self, r: f64) -> f64 {
        let i = self.levels.partition_point(|&l| l < r);
        self.spacing[i.min(self.spacing.len() - 1)]
    }

    /// Points of level `i` in curve order; `x1 = 0` endpoints first and last.
    fn curve(&self, i: usize) -> Vec<[f64; 2]> {
        let r = self.levels[i];
        let s = self.spacing[i];
        let (c, delta) = (self.c, self.delta);
        // x1 stations along a leg
        let mut x1s = vec![0.0];
        if delta >= 0.5 * s {
            let mut breaks = vec![];
            if self.delta1 >= 0.5 * s && delta - self.delta1 >= 0.5 * s {
                breaks.push(self.delta1);
            }
            breaks.push(delta);
            let mut prev = 0.0;
            for b in breaks {
                let pieces = ((b - prev) / s).ceil().max(1.0) as usize;
                for k in 1..=pieces {
                    x1s.push(prev + (b - prev) * k as f64 / pieces as f64);
                }
                prev = b;
            }
        }
        if r == 0.0 {
            return x1s.into_iter().map(|x1| [x1, c]).collect();
        }
        let mut pts: Vec<[f64; 2]> = x1s.iter().map(|&x1| [x1, c - r]).collect();
        let arc_n = ((PI * r) / s).ceil().max(2.0) as usize;
        // The arc ends coincide with the leg ends, or sit within delta < s/2 of the
        // boundary points, so they are left out.
        for k in 1..arc_n {
            let th = -0.5 * PI + PI * k as f64 / arc_n as f64;
            pts.push([delta + r * th.cos(), c + r * th.sin()]);
        }
        pts.extend(x1s.iter().rev().map(|&x1| [x1, c + r]));
        pts
    }
}

/// Builder for half-disk meshes with any number of refined bumps.
#[derive(Debug, Clone)]
pub struct HalfDiskMesher {
    pub h: f64,
    pub bumps: Vec<DeformationParams>,
    pub cap: usize,
}

impl HalfDiskMesher {
    pub fn new(h: f64) -> Self {
        Self {
            h,
            bumps: Vec::new(),
            cap: DEFAULT_MESH_CAP,
        }
    }

    pub fn with_bump(mut self, p: DeformationParams) -> Self {
        self.bumps.push(p);
        self
    }

    pub fn with_bumps(mut self, ps: &[DeformationParams]) -> Self {
        self.bumps.extend_from_slice(ps);
        self
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    fn layerings(&self) -> Vec<Layering> {
        if self.bumps.is_empty() {
            vec![Layering::new(None, self.h, 1.0)]
        } else {
            self.bumps
                .iter()
                .map(|p| {
                    let r_max = 1.0 + p.anchor[0].abs() + p.delta();
                    Layering::new(Some(p), self.h, r_max)
                })
                .collect()
        }
    }

    /// Rough triangle count from curve lengths and spacings.
    fn estimate(&self, lays: &[Layering]) -> usize {
        let mut verts = 0.0;
        for l in lays {
            for (r, s) in l.levels.iter().zip(&l.spacing) {
                // curve length clipped to the chart, shared among bumps roughly
                let len = (PI * r.min(1.0) + 2.0 * l.delta) / lays.len().max(1) as f64;
                verts += len / s + 1.0;
            }
        }
        (2.0 * verts) as usize
    }

    pub fn build(&self) -> Result<TriMesh, MeshError> {
        check_h(self.h)?;
        for b in &self.bumps {
            b.validate()?;
        }
        if self.bumps.len() > 1 {
            crate::geometry::multibump_compose(&self.bumps)?;
        }
        let lays = self.layerings();
        let estimate = self.estimate(&lays);
        if estimate > self.cap {
            return Err(MeshError::TooLarge {
                estimate,
                cap: self.cap,
            });
        }
        let size = |x: &[f64; 2]| -> f64 {
            lays.iter()
                .map(|l| l.size_at(l.core_distance(x)))
                .fold(COARSE_FACTOR * self.h, f64::min)
        };
        let owner = |x: &[f64; 2]| -> usize {
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for (i, l) in lays.iter().enumerate() {
                let d = l.core_distance(x);
                if d < bd {
                    bd = d;
                    best = i;
                }
            }
            best
        };

        // unit arc, equidistributed against the size field
        let mut points: Vec<[f64; 2]> = Vec::new();
        let mut constraints: Vec<[usize; 2]> = Vec::new();
        let samples = 20_000;
        let mut cum = vec![0.0; samples + 1];
        for k in 0..samples {
            let mid = -0.5 * PI + PI * (k as f64 + 0.5) / samples as f64;
            let x = [mid.cos(), mid.sin()];
            cum[k + 1] = cum[k] + (PI / samples as f64) / size(&x);
        }
        let n_arc = cum[samples].ceil().max(4.0) as usize;
        let mut arc_idx = Vec::with_capacity(n_arc + 1);
        for j in 0..=n_arc {
            let target = cum[samples] * j as f64 / n_arc as f64;
            let p = if j == 0 {
                [0.0, -1.0]
            } else if j == n_arc {
                [0.0, 1.0]
            } else {
                let k = cum.partition_point(|&c| c < target).clamp(1, samples);
                let frac = (target - cum[k - 1]) / (cum[k] - cum[k - 1]);
                let th = -0.5 * PI + PI * (k as f64 - 1.0 + frac) / samples as f64;
                [th.cos(), th.sin()]
            };
            arc_idx.push(points.len());
            points.push(p);
        }
        for w in arc_idx.windows(2) {
            constraints.push([w[0], w[1]]);
        }

        // level curves
        let mut owners: Vec<usize> = vec![usize::MAX; points.len()];
        for (li, l) in lays.iter().enumerate() {
            for i in 0..l.levels.len() {
                let curve = l.curve(i);
                let mut prev: Option<usize> = None;
                for p in curve {
                    let keep = p[0] >= 0.0
                        && p[0].hypot(p[1]) < 1.0 - 0.5 * size(&p)
                        && (lays.len() == 1 || owner(&p) == li);
                    if !keep {
                        prev = None;
                        continue;
                    }
                    let idx = points.len();
                    points.push(p);
                    owners.push(li);
                    if l.kinks[i] {
                        if let Some(q) = prev {
                            constraints.push([q, idx]);
                        }
                    }
                    prev = Some(idx);
                }
            }
        }

        // drop points crowding a neighbour of another owner near Voronoi seams
        let keep = if lays.len() > 1 {
            seam_filter(&points, &owners, |x| 0.6 * size(x), COARSE_FACTOR * self.h)
        } else {
            vec![true; points.len()]
        };
        let mut remap = vec![usize::MAX; points.len()];
        let mut kept = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if keep[i] {
                remap[i] = kept.len();
                kept.push(*p);
            }
        }
        let constraints: Vec<[usize; 2]> = constraints
            .into_iter()
            .filter(|e| keep[e[0]] && keep[e[1]])
            .map(|e| [remap[e[0]], remap[e[1]]])
            .collect();
        triangulate(kept, constraints, self.h, MarkerRule::ChartEdge)
    }
}

/// Greedy filter: a point is dropped when a kept point of another owner lies closer than
/// `radius(x)`.
fn seam_filter(
    points: &[[f64; 2]],
    owners: &[usize],
    radius: impl Fn(&[f64; 2]) -> f64,
    cell: f64,
) -> Vec<bool> {
    let key = |p: &[f64; 2]| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut keep = vec![true; points.len()];
    for (i, p) in points.iter().enumerate() {
        let rad = radius(p);
        let (kx, ky) = key(p);
        let mut crowded = false;
        if owners[i] != usize::MAX {
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(list) = grid.get(&(kx + dx, ky + dy)) {
                        for &j in list {
                            if owners[j] != owners[i]
                                && owners[j] != usize::MAX
                                && dist(p, &points[j]) < rad
                            {
                                crowded = true;
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        if crowded {
            keep[i] = false;
        } else {
            grid.entry((kx, ky)).or_default().push(i);
        }
    }
    keep
}

fn triangulate(
    points: Vec<[f64; 2]>,
    constraints: Vec<[usize; 2]>,
    h: f64,
    rule: MarkerRule,
) -> Result<TriMesh, MeshError> {
    let n = points.len();
    let verts: Vec<Point2<f64>> = points.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let mut conflicts = 0usize;
    let cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::try_bulk_load_cdt(verts, constraints, |_| conflicts += 1)
            .map_err(|e| MeshError::Triangulation(format!("{e:?}")))?;
    if conflicts > 0 {
        log::warn!("{conflicts} conflicting constraint edges skipped");
    }
    if cdt.num_vertices() != n {
        return Err(MeshError::Triangulation(format!(
            "{} duplicate vertices",
            n - cdt.num_vertices()
        )));
    }
    let triangles: Vec<[usize; 3]> = cdt
        .inner_faces()
        .map(|f| {
            let v = f.vertices();
            [v[0].fix().index(), v[1].fix().index(), v[2].fix().index()]
        })
        .collect();
    let vertices: Vec<[f64; 2]> = cdt
        .vertices()
        .map(|v| [v.position().x, v.position().y])
        .collect();
    TriMesh::from_triangles(vertices, triangles, h, rule)
}

fn check_h(h: f64) -> Result<(), MeshError> {
    if !(h > 0.0 && h < 0.5) {
        return Err(MeshError::InvalidSize { h, max: 0.5 });
    }
    Ok(())
}

/// Mesh of the chart half-disk, refined around the bump when `params` is given.
pub fn triangulate_halfdisk(
    h: f64,
    params: Option<&DeformationParams>,
) -> Result<TriMesh, MeshError> {
    let mut m = HalfDiskMesher::new(h);
    if let Some(p) = params {
        m = m.with_bump(*p);
    }
    m.build()
}

/// Mesh of the closed unit disk by staggered concentric rings.
pub fn triangulate_disk(h: f64) -> Result<TriMesh, MeshError> {
    triangulate_disk_capped(h, DEFAULT_MESH_CAP)
}

pub fn triangulate_disk_capped(h: f64, cap: usize) -> Result<TriMesh, MeshError> {
    check_h(h)?;
    let s = COARSE_FACTOR * h;
    let rings = (1.0 / s).ceil() as usize;
    let estimate = (2.0 * PI / (3f64.sqrt() / 2.0 * s * s)) as usize;
    if estimate > cap {
        return Err(MeshError::TooLarge { estimate, cap });
    }
    let mut pts = vec![[0.0, 0.0]];
    let mut constraints = Vec::new();
    for k in 1..=rings {
        let r = k as f64 / rings as f64;
        let m = ((2.0 * PI * k as f64).round() as usize).max(6);
        let shift = if k % 2 == 1 { 0.5 } else { 0.0 };
        let first = pts.len();
        for j in 0..m {
            let th = 2.0 * PI * (j as f64 + shift) / m as f64;
            pts.push([r * th.cos(), r * th.sin()]);
        }
        if k == rings {
            for j in 0..m {
                constraints.push([first + j, first + (j + 1) % m]);
            }
        }
    }
    triangulate(pts, constraints, h, MarkerRule::AllPrescribed)
}

// ---------------------------------------------------------------------------
// Lifted surfaces

/// The graph `x -> (x, f(x))` of a piecewise-linear height field over a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedSurface {
    pub mesh: TriMesh,
    pub heights: Vec<f64>,
    /// Area of each lifted triangle.
    pub areas: Vec<f64>,
    /// First fundamental form `[E, F, G]` per triangle in planar coordinates.
    pub metrics: Vec<[f64; 3]>,
}

impl LiftedSurface {
    pub fn flat(mesh: TriMesh) -> Self {
        let n = mesh.vertices.len();
        Self::from_heights(mesh, vec![0.0; n])
    }

    fn from_heights(mesh: TriMesh, heights: Vec<f64>) -> Self {
        let mut areas = Vec::with_capacity(mesh.triangles.len());
        let mut metrics = Vec::with_capacity(mesh.triangles.len());
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let a = mesh.triangle_area(t);
            let [p0, p1, p2] = tri.map(|i| mesh.vertices[i]);
            let (e1, e2) = (sub(&p1, &p0), sub(&p2, &p0));
            let (d1, d2) = (
                heights[tri[1]] - heights[tri[0]],
                heights[tri[2]] - heights[tri[0]],
            );
            // solve [e1; e2] g = [d1; d2]
            let det = 2.0 * a;
            let gx = (d1 * e2[1] - d2 * e1[1]) / det;
            let gy = (e1[0] * d2 - e2[0] * d1) / det;
            metrics.push([1.0 + gx * gx, gx * gy, 1.0 + gy * gy]);
            let u = [e1[0], e1[1], d1];
            let v = [e2[0], e2[1], d2];
            let c = [
                u[1] * v[2] - u[2] * v[1],
                u[2] * v[0] - u[0] * v[2],
                u[0] * v[1] - u[1] * v[0],
            ];
            areas.push(0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt());
        }
        Self {
            mesh,
            heights,
            areas,
            metrics,
        }
    }

    pub fn position(&self, i: usize) -> [f64; 3] {
        let v = self.mesh.vertices[i];
        [v[0], v[1], self.heights[i]]
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn to_off(&self) -> String {
        write_off(
            (0..self.heights.len()).map(|i| self.position(i)),
            &self.mesh.triangles,
        )
    }

    /// Copy with all three coordinates scaled by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self::from_heights(
            self.mesh.scaled(s),
            self.heights.iter().map(|z| z * s).collect(),
        )
    }
}

/// Lift a planar mesh to the graph of `f`, interpolating `f` at the vertices.
pub fn lift_to_graph<F: ScalarField<2> + ?Sized>(
    mesh: &TriMesh,
    f: &F,
) -> Result<LiftedSurface, MeshError> {
    let heights: Vec<f64> = crate::par::map(&mesh.vertices, |v| f.value(v));
    if let Some((vertex, &value)) = heights.iter().enumerate().find(|(_, z)| !(z.abs() < 1.0)) {
        return Err(MeshError::LiftOutOfCylinder { vertex, value });
    }
    Ok(LiftedSurface::from_heights(mesh.clone(), heights))
}

/// Size and quality figures of a mesh or lifted surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshStats {
    pub vertices: usize,
    pub triangles: usize,
    pub boundary_edges: usize,
    pub prescribed_edges: usize,
    pub min_angle_deg: f64,
    pub max_angle_deg: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub area: f64,
}

fn stats_of<const N: usize>(
    mesh: &TriMesh,
    pos: impl Fn(usize) -> [f64; N],
    area: f64,
) -> MeshStats {
    let (mut amin, mut amax) = (f64::INFINITY, 0.0f64);
    let (mut hmin, mut hmax) = (f64::INFINITY, 0.0f64);
    for t in &mesh.triangles {
        let p = t.map(&pos);
        for a in angles_deg([&p[0], &p[1], &p[2]]) {
            amin = amin.min(a);
            amax = amax.max(a);
        }
        for k in 0..3 {
            let l: f64 = (0..N)
                .map(|i| (p[k][i] - p[(k + 1) % 3][i]).powi(2))
                .sum::<f64>()
                .sqrt();
            hmin = hmin.min(l);
            hmax = hmax.max(l);
        }
    }
    MeshStats {
        vertices: mesh.vertices.len(),
        triangles: mesh.triangles.len(),
        boundary_edges: mesh.boundary.len(),
        prescribed_edges: mesh
            .boundary
            .iter()
            .filter(|e| e.marker == BoundaryMarker::Prescribed)
            .count(),
        min_angle_deg: amin,
        max_angle_deg: amax,
        h_min: hmin,
        h_max: hmax,
        area,
    }
}

pub fn mesh_stats(mesh: &TriMesh) -> MeshStats {
    stats_of(mesh, |i| mesh.vertices[i], mesh.planar_area())
}

pub fn surface_stats(s: &LiftedSurface) -> MeshStats {
    stats_of(&s.mesh, |i| s.position(i), s.total_area())
}
