//! Named experiments and their artifacts.
//!
//! Each experiment returns an [`ExperimentReport`]: one [`SweepRecord`] per parameter
//! point plus the pass/fail checks it is meant to establish. [`write_artifacts`] writes
//! `<name>.csv` and `<name>.json` (and OFF meshes on request). With timing disabled the
//! artifacts of a rerun are byte-identical.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{analytic_volume_difference, collar_invariance_check, intrinsic_diameter};
use crate::energy::{
    dirichlet_energy, e_b_bound, rayleigh_bound_schedule, trace_norm, EnergyBreakdown, Trace,
};
use crate::geometry::{
    example1_field, multibump_compose, AffineField, DeformationParams, ScalarField,
};
use crate::mesh::{lift_to_graph, triangulate_disk_capped, HalfDiskMesher, LiftedSurface};
use crate::par;
use crate::quadrature::{Domain, QuadratureRule};
use crate::solver::{
    assemble, schur_dtn, solve_spectrum, trial_subspace_bound, MassKind, TrialMode,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{requested} bumps (k = {k}) do not fit the chart at eps = {eps}: at most {max_bumps} disjoint bumps fit (max k = {max_k})")]
    InfeasiblePacking {
        k: usize,
        requested: usize,
        eps: f64,
        max_bumps: usize,
        max_k: i64,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Energy(#[from] crate::energy::EnergyError),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
    #[error(transparent)]
    Diagnostics(#[from] crate::diagnostics::DiagnosticsError),
}

type Result<T> = std::result::Result<T, HarnessError>;

/// How the geometry experiment picks the wrinkle frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OmegaPolicy {
    /// The analytic schedule `omega = eps^-3`.
    Schedule,
    /// A fixed, mesh-tractable frequency.
    Fixed(f64),
}

impl OmegaPolicy {
    pub fn omega(&self, eps: f64) -> f64 {
        match *self {
            Self::Schedule => eps.powi(-3),
            Self::Fixed(w) => w,
        }
    }
}

/// Experiment configuration: a flat TOML document with `schema = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub schema: u32,
    pub mesh_cap: usize,
    pub mass: MassKind,
    pub disk_h_ladder: Vec<f64>,
    pub example1_n: Vec<u32>,
    pub example1_h: f64,
    /// Pinned upper bound for `E_32 / E_4` from the reference quadrature.
    pub example1_ratio_threshold: f64,
    pub sweep_eps: Vec<f64>,
    pub multibump_k: usize,
    pub multibump_eps: f64,
    pub multibump_omega: f64,
    pub multibump_h: f64,
    pub geometry_eps: Vec<f64>,
    /// `"fixed"` or `"schedule"`.
    pub geometry_omega_policy: String,
    pub geometry_omega: f64,
    pub geometry_h: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            schema: 1,
            mesh_cap: crate::mesh::DEFAULT_MESH_CAP,
            mass: MassKind::Lumped,
            disk_h_ladder: vec![0.08, 0.04, 0.02],
            example1_n: vec![4, 8, 16, 32],
            example1_h: 0.02,
            example1_ratio_threshold: 0.4367,
            sweep_eps: vec![0.02, 0.05, 0.1, 0.2],
            multibump_k: 3,
            multibump_eps: 0.25,
            multibump_omega: 40.0,
            multibump_h: 0.05,
            geometry_eps: vec![0.3, 0.2, 0.15, 0.1],
            geometry_omega_policy: "fixed".into(),
            geometry_omega: 40.0,
            geometry_h: 0.05,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != 1 {
            return Err(HarnessError::Config(format!(
                "unsupported schema {}",
                self.schema
            )));
        }
        self.omega_policy()?;
        Ok(())
    }

    pub fn omega_policy(&self) -> Result<OmegaPolicy> {
        match self.geometry_omega_policy.as_str() {
            "fixed" => Ok(OmegaPolicy::Fixed(self.geometry_omega)),
            "schedule" => Ok(OmegaPolicy::Schedule),
            other => Err(HarnessError::Config(format!(
                "geometry_omega_policy must be \"fixed\" or \"schedule\", got {other:?}"
            ))),
        }
    }
}

/// Output handling shared by all experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub dump_mesh: bool,
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out: None,
            dump_mesh: false,
            timing: true,
        }
    }
}

/// One experiment row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub experiment: String,
    pub eps: Option<f64>,
    pub omega: Option<f64>,
    pub n: Option<u32>,
    pub k: Option<usize>,
    pub h: Option<f64>,
    pub energy: Option<EnergyBreakdown>,
    /// Head of the Steklov spectrum.
    pub sigmas: Vec<f64>,
    pub vol_diff: Option<f64>,
    pub diam_diff: Option<f64>,
    pub collar_ok: Option<bool>,
    pub wall_ms: Option<u64>,
    /// Experiment-specific values (bounds, reference spectra, files).
    pub extra: BTreeMap<String, f64>,
    pub files: Vec<String>,
}

impl SweepRecord {
    fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.into(),
            eps: None,
            omega: None,
            n: None,
            k: None,
            h: None,
            energy: None,
            sigmas: Vec::new(),
            vol_diff: None,
            diam_diff: None,
            collar_ok: None,
            wall_ms: None,
            extra: BTreeMap::new(),
            files: Vec::new(),
        }
    }
}

pub const CSV_HEADER: [&str; 22] = [
    "experiment",
    "eps",
    "omega",
    "n",
    "k",
    "h",
    "E_A",
    "E_B",
    "E_C",
    "boundary_norm",
    "rayleigh",
    "sigma0",
    "sigma1",
    "sigma2",
    "sigma3",
    "sigma4",
    "sigma5",
    "sigma6",
    "vol_diff",
    "diam_diff",
    "collar_ok",
    "wall_ms",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_row(r: &SweepRecord) -> Vec<String> {
    let e = r.energy.as_ref();
    let mut row = vec![
        r.experiment.clone(),
        opt(r.eps),
        opt(r.omega),
        opt(r.n),
        opt(r.k),
        opt(r.h),
        opt(e.map(|e| e.e_a)),
        opt(e.map(|e| e.e_b)),
        opt(e.map(|e| e.e_c)),
        opt(e.map(|e| e.boundary_norm)),
        opt(e.map(|e| e.rayleigh)),
    ];
    for i in 0..7 {
        row.push(opt(r.sigmas.get(i)));
    }
    row.push(opt(r.vol_diff));
    row.push(opt(r.diam_diff));
    row.push(opt(r.collar_ok));
    row.push(opt(r.wall_ms));
    row
}

/// A named pass/fail assertion of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub records: Vec<SweepRecord>,
    pub checks: Vec<Check>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            w.write_record(csv_row(r))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| HarnessError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Write `<out>/<experiment>.csv` and `.json`; returns the paths written.
pub fn write_artifacts(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", report.experiment));
    fs::write(&csv_path, report.to_csv()?)?;
    let json_path = dir.join(format!("{}.json", report.experiment));
    fs::write(&json_path, serde_json::to_string_pretty(report)? + "\n")?;
    Ok(vec![csv_path, json_path])
}

struct Timer(Option<Instant>);

impl Timer {
    fn start(on: bool) -> Self {
        Self(on.then(Instant::now))
    }

    fn ms(&self) -> Option<u64> {
        self.0.map(|t| t.elapsed().as_millis() as u64)
    }
}

fn dump(opts: &RunOptions, name: &str, text: impl FnOnce() -> String) -> Result<Option<String>> {
    match (&opts.out, opts.dump_mesh) {
        (Some(dir), true) => {
            let d = dir.join("meshes");
            fs::create_dir_all(&d)?;
            let file = format!("{name}.off");
            fs::write(d.join(&file), text())?;
            Ok(Some(format!("meshes/{file}")))
        }
        _ => Ok(None),
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

/// Largest relative deviation of `sigmas[1..]` from the disk pattern `1, 1, 2, 2, 3, 3`.
pub fn disk_pattern_error(sigmas: &[f64]) -> f64 {
    let pattern = [1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
    pattern
        .iter()
        .zip(sigmas.iter().skip(1))
        .map(|(p, s)| (s - p).abs() / p)
        .fold(0.0, f64::max)
}

struct Solved {
    sigmas: Vec<f64>,
    residuals: Vec<f64>,
    kernel_const: bool,
    system: crate::solver::AssembledSystem,
}

fn solve(surface: &LiftedSurface, m: usize, mass: MassKind) -> Result<Solved> {
    let system = assemble(surface, mass)?;
    let dtn = schur_dtn(&system)?;
    let spec = solve_spectrum(&dtn, m.min(dtn.size()))?;
    let v0 = &spec.vectors[0];
    let mean = v0.iter().sum::<f64>() / v0.len() as f64;
    let kernel_const = spec.sigmas[0].abs()
        <= 1e-6 * spec.sigmas.get(1).copied().unwrap_or(1.0).max(1.0)
        && v0.iter().all(|x| (x - mean).abs() <= 1e-6 * mean.abs());
    Ok(Solved {
        sigmas: spec.sigmas,
        residuals: spec.residuals,
        kernel_const,
        system,
    })
}

// ---------------------------------------------------------------------------
// Experiments

/// Flat unit disk against the separation-of-variables pattern `0, 1, 1, 2, 2, 3, 3`.
pub fn run_disk_validation(
    h_ladder: &[f64],
    cfg: &Config,
    opts: &RunOptions,
) -> Result<ExperimentReport> {
    if h_ladder.is_empty() || !strictly_decreasing(h_ladder) {
        return Err(HarnessError::Config(format!(
            "h ladder must be non-empty and decreasing, got {h_ladder:?}"
        )));
    }
    let mut records = Vec::new();
    let mut checks = Vec::new();
    let mut errors = Vec::new();
    let mut sigma1 = Vec::new();
    let mut all_const = true;
    for &h in h_ladder {
        let t = Timer::start(opts.timing);
        let mesh = triangulate_disk_capped(h, cfg.mesh_cap)?;
        let s = LiftedSurface::flat(mesh);
        let sol = solve(&s, 7, cfg.mass)?;
        let mut r = SweepRecord::new("validate");
        r.h = Some(h);
        r.sigmas = sol.sigmas.clone();
        r.wall_ms = t.ms();
        let err = disk_pattern_error(&sol.sigmas);
        r.extra.insert("pattern_error".into(), err);
        r.extra.insert(
            "max_residual".into(),
            sol.residuals[1..].iter().copied().fold(0.0, f64::max),
        );
        r.extra
            .insert("vertices".into(), s.mesh.vertices.len() as f64);
        if let Some(f) = dump(opts, &format!("validate_h{h}"), || s.mesh.to_off())? {
            r.files.push(f);
        }
        all_const &= sol.kernel_const;
        errors.push(err);
        sigma1.push(sol.sigmas[1]);
        records.push(r);
    }
    let last = *errors.last().unwrap_or(&f64::INFINITY);
    checks.push(Check::new(
        "disk_pattern",
        last < 0.02,
        format!("max relative error of sigma_1..sigma_6 at finest h: {last:.3e}"),
    ));
    checks.push(Check::new(
        "constant_kernel",
        all_const,
        "sigma_0 ~ 0 with constant eigenvector".into(),
    ));
    if h_ladder.len() >= 2 {
        let n = sigma1.len();
        let change = (sigma1[n - 1] - sigma1[n - 2]).abs() / sigma1[n - 1];
        checks.push(Check::new(
            "refinement_sigma1",
            change < 0.01,
            format!("sigma_1 change between the two finest meshes: {change:.3e}"),
        ));
        let slope = loglog_slope(h_ladder, &errors);
        for r in &mut records {
            r.extra.insert("refinement_slope".into(), slope);
        }
        checks.push(Check::new(
            "refinement_slope",
            slope > 1.5,
            format!("log-log slope of the pattern error in h: {slope:.3}"),
        ));
    }
    // exact homogeneity on the coarsest mesh
    let h0 = h_ladder.first().copied().unwrap_or(0.1);
    let s = LiftedSurface::flat(triangulate_disk_capped(h0, cfg.mesh_cap)?);
    let a = solve(&s, 7, cfg.mass)?;
    let b = solve(&s.scaled(2.0), 7, cfg.mass)?;
    let dev = (1..a.sigmas.len())
        .map(|k| (b.sigmas[k] * 2.0 - a.sigmas[k]).abs() / a.sigmas[k])
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "scaling_homogeneity",
        dev < 1e-9,
        format!("max relative deviation of 2 sigma_k(2M) from sigma_k(M): {dev:.3e}"),
    ));
    Ok(ExperimentReport {
        experiment: "validate".into(),
        records,
        checks,
    })
}

/// Oscillating graphs `sin(n x1)(1 - |x|^2)` over the unit disk.
pub fn run_example1(
    n_list: &[u32],
    h: f64,
    cfg: &Config,
    opts: &RunOptions,
) -> Result<ExperimentReport> {
    let rule = QuadratureRule::default();
    let x = AffineField::<2>::coordinate(0);
    let trace = trace_norm(&x, &Trace::Circle { radius: 1.0 }, &rule)?;
    let mut records = Vec::new();
    let (mut bounds, mut sig, mut energies) = (Vec::new(), Vec::new(), Vec::new());
    let mut minmax_ok = true;
    let mut analytic_ok = true;
    let mut offsets_ok = true;
    let mut worst_res: f64 = 0.0;
    let mut all_const = true;
    for &n in n_list {
        let hn = h.min(1.0 / (4.0 * n as f64));
        let t = Timer::start(opts.timing);
        let f = example1_field(n)?;
        let e = dirichlet_energy(&x, &f, &Domain::disk(1.0), &rule)?;
        let bound = e / trace;
        let mesh = match triangulate_disk_capped(hn, cfg.mesh_cap) {
            Ok(m) => m,
            Err(e @ crate::mesh::MeshError::TooLarge { .. }) => {
                log::warn!("example1: skipping n = {n}: {e}");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let s = lift_to_graph(&mesh, &f)?;
        let boundary_offset = mesh
            .prescribed_vertices()
            .iter()
            .map(|&v| s.heights[v].abs())
            .fold(0.0, f64::max);
        offsets_ok &= boundary_offset < 1e-12;
        let sol = solve(&s, 3, cfg.mass)?;
        all_const &= sol.kernel_const;
        worst_res = worst_res.max(sol.residuals[1]);
        // discrete min-max bound for sigma_1 from span{1, x}
        let ones = vec![1.0; mesh.vertices.len()];
        let xs: Vec<f64> = mesh.vertices.iter().map(|v| v[0]).collect();
        let discrete = trial_subspace_bound(&sol.system, &[ones, xs], TrialMode::Subspace)?;
        let s1 = sol.sigmas[1];
        minmax_ok &= s1 <= discrete * (1.0 + 1e-8);
        analytic_ok &= s1 <= bound;
        let mut r = SweepRecord::new("example1");
        r.n = Some(n);
        r.h = Some(hn);
        r.sigmas = sol.sigmas.clone();
        r.wall_ms = t.ms();
        r.extra.insert("energy".into(), e);
        r.extra.insert("analytic_bound".into(), bound);
        r.extra.insert("discrete_trial_bound".into(), discrete);
        r.extra.insert("boundary_offset".into(), boundary_offset);
        if let Some(file) = dump(opts, &format!("example1_n{n}"), || s.to_off())? {
            r.files.push(file);
        }
        bounds.push(bound);
        sig.push(s1);
        energies.push(e);
        records.push(r);
    }
    let mut checks = vec![
        Check::new(
            "bounds_decreasing",
            strictly_decreasing(&bounds),
            format!("E_n/pi = {bounds:?}"),
        ),
        Check::new(
            "sigma1_decreasing",
            strictly_decreasing(&sig),
            format!("FEM sigma_1 = {sig:?}"),
        ),
        Check::new(
            "discrete_minmax",
            minmax_ok,
            "FEM sigma_1 <= Rayleigh bound of span{1, x} on the same mesh".into(),
        ),
        Check::new(
            "analytic_bound",
            analytic_ok,
            "FEM sigma_1 <= E_n/pi".into(),
        ),
        Check::new(
            "boundary_offsets",
            offsets_ok,
            "f_n = 0 at every boundary vertex".into(),
        ),
        Check::new(
            "constant_kernel",
            all_const,
            "sigma_0 ~ 0 with constant eigenvector".into(),
        ),
        Check::new(
            "residuals",
            worst_res < 1e-8,
            format!("largest sigma_1 residual {worst_res:.3e}"),
        ),
    ];
    // the pinned threshold belongs to the ratio E_32 / E_4
    let pinned = records.first().and_then(|r| r.n) == Some(4)
        && records.last().and_then(|r| r.n) == Some(32);
    if let (true, Some(&first), Some(&last)) = (pinned, energies.first(), energies.last()) {
        let ratio = last / first;
        checks.push(Check::new(
            "energy_ratio",
            ratio <= cfg.example1_ratio_threshold,
            format!(
                "E_32/E_4 = {ratio:.5} (threshold {})",
                cfg.example1_ratio_threshold
            ),
        ));
    }
    Ok(ExperimentReport {
        experiment: "example1".into(),
        records,
        checks,
    })
}

/// Analytic Rayleigh quotient of the bump test function along the constants schedule.
pub fn run_wrinkle_sweep(eps_list: &[f64], opts: &RunOptions) -> Result<ExperimentReport> {
    let rule = QuadratureRule::default();
    let rows: Vec<Result<(SweepRecord, f64)>> = par::map(eps_list, |&eps| {
        let t = Timer::start(true);
        let (p, terms) = rayleigh_bound_schedule(eps, 2, &rule)?;
        let secs = t.ms().unwrap_or(0) as f64 / 1000.0;
        let mut r = SweepRecord::new("sweep");
        r.eps = Some(eps);
        r.omega = Some(p.omega);
        r.energy = Some(terms);
        r.wall_ms = if opts.timing { t.ms() } else { None };
        r.extra.insert("delta1".into(), p.delta1);
        r.extra.insert("delta2".into(), p.delta2);
        r.extra.insert("e_b_bound".into(), e_b_bound(&p, 2));
        Ok((r, secs))
    });
    let mut records = Vec::new();
    let mut secs = Vec::new();
    for row in rows {
        let (r, s) = row?;
        records.push(r);
        secs.push(s);
    }
    let rs: Vec<f64> = records.iter().map(|r| r.energy.unwrap().rayleigh).collect();
    let slope = loglog_slope(eps_list, &rs);
    for r in &mut records {
        r.extra.insert("slope".into(), slope);
    }
    let bound_ok = records
        .iter()
        .all(|r| r.energy.unwrap().e_b <= r.extra["e_b_bound"] * 1.01);
    // R should fall as eps falls
    let mut order: Vec<usize> = (0..eps_list.len()).collect();
    order.sort_by(|&a, &b| eps_list[b].partial_cmp(&eps_list[a]).unwrap());
    let by_eps_desc: Vec<f64> = order.iter().map(|&i| rs[i]).collect();
    let slowest = secs.iter().copied().fold(0.0, f64::max);
    let mut checks = Vec::new();
    if eps_list.len() >= 2 {
        checks.push(Check::new(
            "slope",
            (0.35..=0.75).contains(&slope),
            format!("log-log slope of R(u_f) in eps: {slope:.4}"),
        ));
    }
    checks.extend([
        Check::new(
            "decreasing",
            strictly_decreasing(&by_eps_desc),
            format!("R = {rs:?}"),
        ),
        Check::new(
            "b_bound",
            bound_ok,
            "E_B <= 1.01 x closed-form bound".into(),
        ),
        Check::new(
            "runtime",
            slowest < 10.0,
            if opts.timing {
                format!("slowest point {slowest:.2} s")
            } else {
                "every point under 10 s".into()
            },
        ),
    ]);
    Ok(ExperimentReport {
        experiment: "sweep".into(),
        records,
        checks,
    })
}

/// Anchors of `count` equal bumps spaced by twice the enclosing radius along `x1 = 0`,
/// or the packing error with the largest count that fits.
pub fn pack_bumps(count: usize, base: &DeformationParams) -> Result<Vec<DeformationParams>> {
    let r = base.enclosing_radius();
    // half-spacing, padded so tangent supports survive rounding
    let a = r * (1.0 + 1e-9);
    let fits = |m: usize| m >= 1 && (m as f64 - 1.0) * a + r < 1.0;
    let mut max_bumps = 0;
    while fits(max_bumps + 1) {
        max_bumps += 1;
    }
    if count > max_bumps || count == 0 {
        return Err(HarnessError::InfeasiblePacking {
            k: count.saturating_sub(1),
            requested: count,
            eps: base.eps,
            max_bumps,
            max_k: max_bumps as i64 - 1,
        });
    }
    (0..count)
        .map(|i| {
            let c = (2.0 * i as f64 - (count as f64 - 1.0)) * a;
            Ok(base.with_anchor([c, 0.0])?)
        })
        .collect()
}

/// `k + 1` bumps on the half-disk: FEM `sigma_k` against the disjoint-trial bound and
/// against the flat chart.
pub fn run_multibump(
    k: usize,
    eps: f64,
    omega: f64,
    h: f64,
    cfg: &Config,
    opts: &RunOptions,
) -> Result<ExperimentReport> {
    let t = Timer::start(opts.timing);
    let base = DeformationParams::schedule_with_omega(eps, omega)?;
    let bumps = pack_bumps(k + 1, &base)?;
    let (f, trials) = multibump_compose(&bumps)?;
    let mesh = HalfDiskMesher::new(h)
        .with_bumps(&bumps)
        .with_cap(cfg.mesh_cap)
        .build()?;
    let s = lift_to_graph(&mesh, &f)?;
    let m = (k + 2).max(7);
    let sol = solve(&s, m, cfg.mass)?;
    let flat = solve(&LiftedSurface::flat(mesh.clone()), m, cfg.mass)?;
    let trial_vecs: Vec<Vec<f64>> = trials
        .iter()
        .map(|u| mesh.vertices.iter().map(|v| u.value(v)).collect())
        .collect();
    let bound = trial_subspace_bound(&sol.system, &trial_vecs, TrialMode::Disjoint)?;
    let sk = sol.sigmas[k];
    let flat_k = flat.sigmas[k];
    let collar_ok = collar_invariance_check(&f, &bumps, 10_000, 0);
    let mut r = SweepRecord::new("multibump");
    r.eps = Some(eps);
    r.omega = Some(omega);
    r.k = Some(k);
    r.h = Some(h);
    r.sigmas = sol.sigmas.clone();
    r.collar_ok = Some(collar_ok);
    r.extra.insert("trial_bound".into(), bound);
    r.extra.insert("flat_sigma_k".into(), flat_k);
    if k > 0 {
        r.extra.insert("ratio_to_flat".into(), sk / flat_k);
    }
    r.extra.insert("flat_sigma_next".into(), flat.sigmas[k + 1]);
    r.extra.insert(
        "ratio_to_flat_next".into(),
        sol.sigmas[k + 1] / flat.sigmas[k + 1],
    );
    r.extra
        .insert("vertices".into(), mesh.vertices.len() as f64);
    for (i, b) in bumps.iter().enumerate() {
        r.extra.insert(format!("anchor_{i}"), b.anchor[0]);
    }
    if let Some(file) = dump(opts, &format!("multibump_k{k}"), || s.to_off())? {
        r.files.push(file);
    }
    r.wall_ms = t.ms();
    let checks = vec![
        Check::new(
            "minmax",
            sk <= bound * (1.0 + 1e-8),
            format!("sigma_{k} = {sk:.6} vs trial bound {bound:.6}"),
        ),
        Check::new(
            "collar",
            collar_ok,
            "f and grad f vanish on the collar and outside the bumps".into(),
        ),
        Check::new(
            "constant_kernel",
            sol.kernel_const && flat.kernel_const,
            "sigma_0 ~ 0 with constant eigenvector".into(),
        ),
    ];
    Ok(ExperimentReport {
        experiment: "multibump".into(),
        records: vec![r],
        checks,
    })
}

/// Volume and diameter differences and collar checks along decreasing `eps`.
pub fn run_geometry(
    eps_list: &[f64],
    policy: OmegaPolicy,
    h: f64,
    cfg: &Config,
    opts: &RunOptions,
) -> Result<ExperimentReport> {
    let rule = QuadratureRule::default();
    let flat_mesh = HalfDiskMesher::new(h).with_cap(cfg.mesh_cap).build()?;
    let flat_diameter = intrinsic_diameter(&LiftedSurface::flat(flat_mesh))?;
    let flat_volume = PI / 2.0;
    let rows: Vec<Result<SweepRecord>> = par::map(eps_list, |&eps| {
        let t = Timer::start(opts.timing);
        let p = DeformationParams::schedule_with_omega(eps, policy.omega(eps))?;
        let f = crate::geometry::Deformation::new(p);
        let vol = analytic_volume_difference(&p, &rule)?;
        let mesh = HalfDiskMesher::new(h)
            .with_bump(p)
            .with_cap(cfg.mesh_cap)
            .build()?;
        let s = lift_to_graph(&mesh, &f)?;
        let d = intrinsic_diameter(&s)?;
        let d0 = intrinsic_diameter(&LiftedSurface::flat(mesh.clone()))?;
        let mut r = SweepRecord::new("geometry");
        r.eps = Some(eps);
        r.omega = Some(p.omega);
        r.h = Some(h);
        r.vol_diff = Some(vol);
        r.diam_diff = Some(d - d0);
        r.collar_ok = Some(collar_invariance_check(&f, &[p], 10_000, 0));
        r.extra
            .insert("mesh_vol_diff".into(), s.total_area() - mesh.planar_area());
        r.extra.insert("diameter".into(), d);
        r.extra.insert("flat_diameter_same_mesh".into(), d0);
        if let Some(file) = dump(opts, &format!("geometry_eps{eps}"), || s.to_off())? {
            r.files.push(file);
        }
        r.wall_ms = t.ms();
        Ok(r)
    });
    let records: Vec<SweepRecord> = rows.into_iter().collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..eps_list.len()).collect();
    order.sort_by(|&a, &b| eps_list[b].partial_cmp(&eps_list[a]).unwrap());
    let vols: Vec<f64> = order
        .iter()
        .map(|&i| records[i].vol_diff.unwrap())
        .collect();
    let diams: Vec<f64> = order
        .iter()
        .map(|&i| records[i].diam_diff.unwrap())
        .collect();
    let collar = records.iter().all(|r| r.collar_ok == Some(true));
    let eps_sorted: Vec<f64> = order.iter().map(|&i| eps_list[i]).collect();
    let vol_slope = loglog_slope(&eps_sorted, &vols);
    let diam_slope = if diams.iter().all(|&d| d > 0.0) {
        loglog_slope(&eps_sorted, &diams)
    } else {
        f64::NAN
    };
    let last_vol = *vols.last().unwrap_or(&f64::INFINITY);
    let last_diam = *diams.last().unwrap_or(&f64::INFINITY);
    let mut records = records;
    for r in &mut records {
        r.extra.insert("vol_slope".into(), vol_slope);
        if diam_slope.is_finite() {
            r.extra.insert("diam_slope".into(), diam_slope);
        }
        r.extra.insert("flat_volume".into(), flat_volume);
        r.extra.insert("flat_diameter".into(), flat_diameter);
    }
    let checks = vec![
        Check::new("collar", collar, "collar invariance at every eps".into()),
        Check::new(
            "volume_decreasing",
            strictly_decreasing(&vols) && last_vol < 0.1 * flat_volume,
            format!("vol_diff by decreasing eps = {vols:?}; last / flat = {:.4}; log-log slope {vol_slope:.3}", last_vol / flat_volume),
        ),
        Check::new(
            "diameter_decreasing",
            strictly_decreasing(&diams) && last_diam.abs() < 0.1 * flat_diameter,
            format!("diam_diff by decreasing eps = {diams:?}; flat diameter {flat_diameter:.4}; log-log slope {diam_slope:.3}"),
        ),
    ];
    Ok(ExperimentReport {
        experiment: "geometry".into(),
        records,
        checks,
    })
}

/// Text summary of the `*.json` reports found in `dir`.
pub fn report(dir: &Path) -> Result<(String, bool)> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    let mut out = String::new();
    let mut ok = true;
    for p in names {
        let rep: ExperimentReport = match serde_json::from_str(&fs::read_to_string(&p)?) {
            Ok(r) => r,
            Err(_) => continue,
        };
        out.push_str(&format!(
            "{} ({} records)\n",
            rep.experiment,
            rep.records.len()
        ));
        for c in &rep.checks {
            out.push_str(&format!(
                "  [{}] {}: {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            ));
            ok &= c.passed;
        }
    }
    if out.is_empty() {
        return Err(HarnessError::Config(format!(
            "no experiment reports in {}",
            dir.display()
        )));
    }
    Ok((out, ok))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_validation() {
        let c = Config::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(Config::from_toml(&text).unwrap(), c);
        let partial = Config::from_toml("schema = 1\nexample1_n = [2, 4]\n").unwrap();
        assert_eq!(partial.example1_n, vec![2, 4]);
        assert_eq!(partial.sweep_eps, c.sweep_eps);
        assert!(Config::from_toml("schema = 2\n").is_err());
        assert!(Config::from_toml("schema = 1\nbogus = 3\n").is_err());
        assert!(Config::from_toml("schema = 1\ngeometry_omega_policy = \"wild\"\n").is_err());
        assert_eq!(
            Config::from_toml("schema = 1\ngeometry_omega_policy = \"schedule\"\n")
                .unwrap()
                .omega_policy()
                .unwrap(),
            OmegaPolicy::Schedule
        );
    }

    #[test]
    fn csv_has_exact_columns() {
        let mut r = SweepRecord::new("sweep");
        r.eps = Some(0.1);
        r.sigmas = vec![0.0, 1.5];
        r.collar_ok = Some(true);
        let rep = ExperimentReport {
            experiment: "sweep".into(),
            records: vec![r],
            checks: vec![],
        };
        let csv = rep.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "experiment,eps,omega,n,k,h,E_A,E_B,E_C,boundary_norm,rayleigh,sigma0,sigma1,sigma2,sigma3,sigma4,sigma5,sigma6,vol_diff,diam_diff,collar_ok,wall_ms"
        );
        assert_eq!(
            lines.next().unwrap(),
            "sweep,0.1,,,,,,,,,,0,1.5,,,,,,,,true,"
        );
    }

    #[test]
    fn packing() {
        let base = DeformationParams::schedule_with_omega(0.1, 40.0).unwrap();
        let b = pack_bumps(4, &base).unwrap();
        assert_eq!(b.len(), 4);
        multibump_compose(&b).unwrap();
        let big = DeformationParams::schedule_with_omega(0.25, 40.0).unwrap();
        match pack_bumps(4, &big) {
            Err(HarnessError::InfeasiblePacking {
                max_bumps, max_k, ..
            }) => {
                assert_eq!(max_bumps, 1);
                assert_eq!(max_k, 0);
            }
            other => panic!("expected packing error, got {other:?}"),
        }
    }

    #[test]
    fn slope_fit() {
        let x = [1.0, 2.0, 4.0];
        let y = [3.0, 12.0, 48.0];
        assert!((loglog_slope(&x, &y) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn disk_pattern_error_is_relative() {
        assert_eq!(
            disk_pattern_error(&[0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0]),
            0.0
        );
        assert!((disk_pattern_error(&[0.0, 1.01, 1.0, 2.0, 2.0, 3.0, 2.97]) - 0.01).abs() < 1e-12);
    }
}
