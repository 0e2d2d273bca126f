use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use steklov_core::harness::{self, Config, ExperimentReport, OmegaPolicy, RunOptions};

/// Steklov eigenvalue experiments on wrinkled graph hypersurfaces.
#[derive(Parser, Debug)]
#[command(name = "steklov", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct Common {
    /// Output directory for CSV, JSON and mesh files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Target mesh size (overrides the experiment default).
    #[arg(long, global = true)]
    h: Option<f64>,
    /// TOML configuration file (schema = 1).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Maximum number of mesh vertices.
    #[arg(long, global = true)]
    mesh_cap: Option<usize>,
    /// Print the report as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Write lifted meshes as OFF files under <out>/meshes.
    #[arg(long, global = true)]
    dump_mesh: bool,
    /// Leave wall_ms empty so reruns are byte-identical.
    #[arg(long, global = true)]
    no_timing: bool,
    /// Force the sequential code path.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Flat unit disk against the known spectrum.
    Validate {
        /// Mesh sizes, coarse to fine.
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<f64>>,
    },
    /// Oscillating graphs over the disk.
    Example1 {
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<u32>>,
    },
    /// Analytic Rayleigh quotients along the constants schedule.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// k + 1 disjoint bumps on the half-disk.
    Multibump {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        omega: Option<f64>,
    },
    /// Volume, diameter and collar diagnostics.
    Geometry {
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        /// `schedule` or a fixed frequency such as `40`.
        #[arg(long)]
        omega: Option<String>,
    },
    /// Summarize the reports in the output directory.
    Report,
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => Config::default(),
    };
    if let Some(cap) = c.mesh_cap {
        cfg.mesh_cap = cap;
    }
    if c.sequential {
        steklov_core::par::set_sequential(true);
    }
    let opts = RunOptions {
        out: Some(c.out.clone()),
        dump_mesh: c.dump_mesh,
        timing: !c.no_timing,
    };
    let report: ExperimentReport = match &cli.cmd {
        Cmd::Validate { ladder } => {
            let ladder = match (ladder, c.h) {
                (Some(l), _) => l.clone(),
                (None, Some(h)) => vec![2.0 * h, h],
                (None, None) => cfg.disk_h_ladder.clone(),
            };
            harness::run_disk_validation(&ladder, &cfg, &opts)?
        }
        Cmd::Example1 { n } => {
            let n = n.clone().unwrap_or_else(|| cfg.example1_n.clone());
            harness::run_example1(&n, c.h.unwrap_or(cfg.example1_h), &cfg, &opts)?
        }
        Cmd::Sweep { eps } => {
            let eps = eps.clone().unwrap_or_else(|| cfg.sweep_eps.clone());
            harness::run_wrinkle_sweep(&eps, &opts)?
        }
        Cmd::Multibump { k, eps, omega } => harness::run_multibump(
            k.unwrap_or(cfg.multibump_k),
            eps.unwrap_or(cfg.multibump_eps),
            omega.unwrap_or(cfg.multibump_omega),
            c.h.unwrap_or(cfg.multibump_h),
            &cfg,
            &opts,
        )?,
        Cmd::Geometry { eps, omega } => {
            let eps = eps.clone().unwrap_or_else(|| cfg.geometry_eps.clone());
            let policy = match omega.as_deref() {
                None => cfg.omega_policy()?,
                Some("schedule") => OmegaPolicy::Schedule,
                Some(w) => OmegaPolicy::Fixed(
                    w.parse()
                        .context("--omega must be `schedule` or a number")?,
                ),
            };
            harness::run_geometry(&eps, policy, c.h.unwrap_or(cfg.geometry_h), &cfg, &opts)?
        }
        Cmd::Report => {
            let (text, ok) = harness::report(&c.out)?;
            print!("{text}");
            return Ok(ok);
        }
    };
    let written = harness::write_artifacts(&report, &c.out)?;
    if c.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        for ch in &report.checks {
            println!(
                "[{}] {}: {}",
                if ch.passed { "PASS" } else { "FAIL" },
                ch.name,
                ch.detail
            );
        }
        for p in written {
            log::info!("wrote {}", p.display());
        }
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
