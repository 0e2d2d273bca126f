//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines reach the test log. A criterion
//! listed in `UNATTAINABLE` is expected to fail for a documented reason; the run still
//! fails if it starts passing, so the list cannot go stale.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use steklov_core::energy::{
    e_a_closed_form, e_b_bound, e_b_quadrature, e_c_closed_form, energy_density,
    qi_energy_ratio_check, region_energy_brute_force, LinearMap,
};
use steklov_core::geometry::{example1_field, DeformationParams, FnField, Region, Sample};
use steklov_core::harness::{
    self, Config, ExperimentReport, HarnessError, OmegaPolicy, RunOptions,
};
use steklov_core::mesh::{lift_to_graph, triangulate_disk, HalfDiskMesher, LiftedSurface};
use steklov_core::quadrature::{BumpPart, Domain, QuadratureRule};
use steklov_core::solver::{steklov_spectrum, MassKind};

/// Criteria that cannot be met as stated, with the reason recorded in the notes.
const UNATTAINABLE: &[u32] = &[6];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn failed_checks(r: &ExperimentReport) -> String {
    let bad: Vec<String> = r
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} ({})", c.name, c.detail))
        .collect();
    if bad.is_empty() {
        "all checks pass".into()
    } else {
        bad.join("; ")
    }
}

fn opts() -> RunOptions {
    RunOptions {
        out: None,
        dump_mesh: false,
        timing: true,
    }
}

fn criterion_1(cfg: &Config, kernels: &mut Vec<bool>) -> Outcome {
    let t = Instant::now();
    let r = harness::run_disk_validation(&[0.02], cfg, &opts()).expect("disk validation runs");
    let secs = t.elapsed().as_secs_f64();
    let pattern = r.check("disk_pattern").unwrap();
    kernels.push(r.check("constant_kernel").unwrap().passed);
    outcome(
        pattern.passed && secs < 60.0,
        format!("{}; runtime {secs:.1} s", pattern.detail),
    )
}

fn criterion_2(kernels: &mut Vec<bool>) -> Outcome {
    let disk = LiftedSurface::flat(triangulate_disk(0.04).unwrap());
    let wrinkled = lift_to_graph(
        &triangulate_disk(0.04).unwrap(),
        &example1_field(8).unwrap(),
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for s in [disk, wrinkled] {
        let a = steklov_spectrum(&s, 7, MassKind::Lumped).unwrap();
        let b = steklov_spectrum(&s.scaled(2.0), 7, MassKind::Lumped).unwrap();
        kernels.push(a.sigmas[0].abs() < 1e-8 && b.sigmas[0].abs() < 1e-8);
        for k in 1..7 {
            worst = worst.max((2.0 * b.sigmas[k] - a.sigmas[k]).abs() / a.sigmas[k]);
        }
    }
    outcome(
        worst <= 1e-9,
        format!("max relative deviation {worst:.2e} (flat disk and n = 8 graph)"),
    )
}

fn criterion_3(cfg: &Config, kernels: &mut Vec<bool>) -> Outcome {
    let r = harness::run_example1(&[4, 8, 16, 32], cfg.example1_h, cfg, &opts())
        .expect("example 1 runs");
    kernels.push(r.check("constant_kernel").unwrap().passed);
    let bounds: Vec<String> = r
        .records
        .iter()
        .map(|x| format!("{:.4}/{:.4}", x.sigmas[1], x.extra["analytic_bound"]))
        .collect();
    outcome(
        r.passed(),
        format!(
            "sigma_1/bound = [{}]; {}",
            bounds.join(", "),
            failed_checks(&r)
        ),
    )
}

fn criterion_4() -> Outcome {
    let r = harness::run_wrinkle_sweep(&[0.02, 0.05, 0.1, 0.2], &opts()).expect("sweep runs");
    let ok = ["slope", "runtime"]
        .iter()
        .all(|n| r.check(n).unwrap().passed);
    outcome(
        ok,
        format!(
            "{}; {}",
            r.check("slope").unwrap().detail,
            r.check("runtime").unwrap().detail
        ),
    )
}

fn criterion_5() -> Outcome {
    let rule = QuadratureRule::default();
    let mut notes = Vec::new();
    let mut ok = true;
    for p in [
        DeformationParams::schedule(0.2).unwrap(),
        DeformationParams::schedule_with_omega(0.2, 40.0).unwrap(),
        DeformationParams::schedule_with_omega(0.25, 40.0).unwrap(),
    ] {
        let a = region_energy_brute_force(&p, BumpPart::A, &rule).unwrap();
        let c = region_energy_brute_force(&p, BumpPart::C, &rule).unwrap();
        let ea = (a - e_a_closed_form(&p, 2)).abs() / e_a_closed_form(&p, 2);
        let ec = (c - e_c_closed_form(&p, 2)).abs() / e_c_closed_form(&p, 2);
        ok &= ea < 1e-3 && ec < 1e-6;
        notes.push(format!(
            "eps {} omega {}: A {ea:.1e}, C {ec:.1e}",
            p.eps, p.omega
        ));
    }
    let mut worst_b: f64 = 0.0;
    for eps in [0.02, 0.05, 0.1, 0.2] {
        let p = DeformationParams::schedule(eps).unwrap();
        worst_b = worst_b.max(e_b_quadrature(&p, 2, &rule).unwrap() / e_b_bound(&p, 2));
    }
    ok &= worst_b <= 1.01;
    notes.push(format!("max E_B/bound {worst_b:.3}"));
    outcome(ok, notes.join("; "))
}

fn criterion_6(cfg: &Config, kernels: &mut Vec<bool>, collars: &mut Vec<bool>) -> Outcome {
    let t = Instant::now();
    let stated = harness::run_multibump(3, 0.25, 40.0, 0.05, cfg, &opts());
    let half = |r: &ExperimentReport| r.records[0].extra["ratio_to_flat"] <= 0.5;
    let mut detail = match &stated {
        Ok(r) => {
            collars.push(r.check("collar").unwrap().passed);
            kernels.push(r.check("constant_kernel").unwrap().passed);
            format!(
                "eps 0.25: {}; sigma_3/flat {:.4}",
                failed_checks(r),
                r.records[0].extra["ratio_to_flat"]
            )
        }
        Err(e) => format!("eps 0.25: {e}"),
    };
    let passed = matches!(&stated, Ok(r) if r.passed() && half(r)) && t.elapsed().as_secs() < 600;
    // largest round eps at which four disjoint bumps fit, for reference
    if let Ok(r) = harness::run_multibump(3, 0.1, 40.0, 0.05, cfg, &opts()) {
        collars.push(r.check("collar").unwrap().passed);
        kernels.push(r.check("constant_kernel").unwrap().passed);
        let rec = &r.records[0];
        detail.push_str(&format!(
            "; eps 0.1 reference: sigma_3 {:.4} <= trial bound {:.4}: {}, sigma_3/flat {:.4}",
            rec.sigmas[3],
            rec.extra["trial_bound"],
            r.check("minmax").unwrap().passed,
            rec.extra["ratio_to_flat"]
        ));
    }
    if let Err(HarnessError::InfeasiblePacking { .. }) = stated {
        detail.push_str(" [packing infeasible as stated]");
    }
    outcome(passed, detail)
}

fn criterion_7(cfg: &Config, collars: &mut [bool]) -> Outcome {
    let r = harness::run_geometry(
        &[0.3, 0.2, 0.15, 0.1],
        OmegaPolicy::Fixed(40.0),
        cfg.geometry_h,
        cfg,
        &opts(),
    )
    .expect("geometry runs");
    let collar_all = r.check("collar").unwrap().passed && collars.iter().all(|&c| c);
    outcome(
        r.passed() && collar_all,
        format!(
            "{}; {}",
            r.check("volume_decreasing").unwrap().detail,
            r.check("diameter_decreasing").unwrap().detail
        ),
    )
}

fn criterion_8(kernels: &mut Vec<bool>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut notes = Vec::new();

    // pointwise identity: wedge form against the expanded form, never negative
    let mut cs_ok = true;
    for _ in 0..100_000 {
        let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
        let gu: [f64; 2] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let gf: [f64; 2] = [
            scale * rng.gen_range(-1.0..1.0),
            scale * rng.gen_range(-1.0..1.0),
        ];
        let d = energy_density(&gu, &gf);
        let (uu, ff, uf) = (
            gu[0] * gu[0] + gu[1] * gu[1],
            gf[0] * gf[0] + gf[1] * gf[1],
            gu[0] * gf[0] + gu[1] * gf[1],
        );
        let expanded = (uu + uu * ff - uf * uf) / (1.0 + ff).sqrt();
        cs_ok &= d >= 0.0
            && uu * ff - uf * uf >= -1e-12 * uu * ff
            && (d - expanded).abs() <= 1e-9 * (1.0 + expanded);
    }
    notes.push(format!("Cauchy-Schwarz on 1e5 pairs: {cs_ok}"));

    // quasi-isometry energy ratios on the unit disk
    let rule = QuadratureRule::default();
    let u = FnField(|x: &[f64; 2]| Sample {
        value: x[0] * x[1] + x[0],
        grad: [x[1] + 1.0, x[0]],
    });
    let dom = Domain::disk(1.0);
    let mut qi_ok = true;
    for (name, m) in [
        ("identity", LinearMap::identity()),
        ("scaling", LinearMap::scaling(2.0)),
        ("shear", LinearMap::shear(0.5)),
    ] {
        let c = m.operator_constant();
        let ok = qi_energy_ratio_check(c, 2, &m, &u, &dom, &rule).unwrap();
        qi_ok &= ok;
        notes.push(format!("QI {name} (C = {c:.3}): {ok}"));
    }

    // constant kernel on a bumped half-disk and its flat chart
    let p = DeformationParams::schedule_with_omega(0.2, 40.0).unwrap();
    let mesh = HalfDiskMesher::new(0.05).with_bump(p).build().unwrap();
    let f = steklov_core::geometry::Deformation::new(p);
    for s in [
        lift_to_graph(&mesh, &f).unwrap(),
        LiftedSurface::flat(mesh.clone()),
    ] {
        let sp = steklov_spectrum(&s, 3, MassKind::Consistent).unwrap();
        let v = &sp.vectors[0];
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        kernels.push(
            sp.sigmas[0].abs() < 1e-8 && v.iter().all(|x| (x - mean).abs() < 1e-6 * mean.abs()),
        );
    }
    let kernel_ok = kernels.iter().all(|&k| k);
    notes.push(format!(
        "sigma_0 ~ 0 with constant eigenvector on {} surfaces: {kernel_ok}",
        kernels.len()
    ));

    // partition totality against an independent classification
    let mut part_ok = true;
    let mut counts = [0usize; 5];
    let q = DeformationParams::schedule_with_omega(0.2, 40.0)
        .unwrap()
        .with_anchor([0.1, 0.0])
        .unwrap();
    for _ in 0..100_000 {
        let x: [f64; 2] = loop {
            let x = [rng.gen_range(0.0..1.0), rng.gen_range(-1.0..1.0)];
            if x[0] * x[0] + x[1] * x[1] <= 1.0 {
                break x;
            }
        };
        let c = q.anchor[0];
        let t = x[0].clamp(0.0, q.delta1 + q.delta2);
        let r = ((x[0] - t).powi(2) + (x[1] - c).powi(2)).sqrt();
        let expected = if r <= q.eps {
            if x[0] >= q.delta1 + q.delta2 {
                Region::A
            } else if x[0] >= q.delta1 {
                Region::B
            } else {
                Region::C
            }
        } else if r <= q.eps + q.rho {
            Region::D
        } else {
            Region::Outside
        };
        let got = steklov_core::geometry::classify_region(&x, &q).unwrap();
        part_ok &= got == expected;
        counts[match got {
            Region::A => 0,
            Region::B => 1,
            Region::C => 2,
            Region::D => 3,
            Region::Outside => 4,
        }] += 1;
    }
    notes.push(format!(
        "partition on 1e5 points: {part_ok} (A/B/C/D/outside counts {counts:?})"
    ));
    outcome(cs_ok && qi_ok && kernel_ok && part_ok, notes.join("; "))
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters pass arguments; honour the listing request.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let cfg = Config::default();
    let mut kernels = Vec::new();
    let mut collars = Vec::new();
    let results = vec![
        (
            1,
            "solver validation on the flat disk",
            criterion_1(&cfg, &mut kernels),
        ),
        (
            2,
            "exact homogeneity under scaling",
            criterion_2(&mut kernels),
        ),
        (
            3,
            "oscillating graphs over the disk",
            criterion_3(&cfg, &mut kernels),
        ),
        (4, "wrinkle schedule slope", criterion_4()),
        (5, "region closed forms", criterion_5()),
        (
            6,
            "k + 1 bumps at eps = 0.25",
            criterion_6(&cfg, &mut kernels, &mut collars),
        ),
        (
            7,
            "volume, diameter and collar",
            criterion_7(&cfg, &mut collars),
        ),
        (8, "property suites", criterion_8(&mut kernels)),
    ];
    let mut unexpected = 0;
    for (n, name, o) in &results {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        let known = UNATTAINABLE.contains(n);
        let note = match (o.passed, known) {
            (false, true) => " (known unattainable, see notes)",
            (true, true) => " (listed as unattainable but passed: update the list)",
            _ => "",
        };
        println!("criterion {n} [{tag}] {name}{note}: {}", o.detail);
        if o.passed == known {
            unexpected += 1;
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
