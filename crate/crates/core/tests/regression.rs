//! Values recorded from the first verified runs, plus independent oracles.

use approx::assert_relative_eq;
use steklov_core::harness::{self, Config, RunOptions};

fn opts() -> RunOptions {
    RunOptions {
        timing: false,
        ..RunOptions::default()
    }
}

#[test]
fn example1_recorded_values() {
    let r = harness::run_example1(&[4, 8], 0.02, &Config::default(), &opts()).unwrap();
    assert!(r.passed());
    let s: Vec<f64> = r.records.iter().map(|x| x.sigmas[1]).collect();
    assert_relative_eq!(s[0], 0.7089641627582612, max_relative = 1e-8);
    assert_relative_eq!(s[1], 0.5015417938701469, max_relative = 1e-8);
    // energies against the independent quadrature oracle
    assert_relative_eq!(
        r.records[0].extra["energy"],
        2.5965811514243806,
        max_relative = 1e-6
    );
    assert_relative_eq!(
        r.records[1].extra["energy"],
        2.0694638062619255,
        max_relative = 1e-6
    );
}

#[test]
fn single_bump_against_flat_chart() {
    let r = harness::run_multibump(0, 0.25, 40.0, 0.05, &Config::default(), &opts()).unwrap();
    assert!(r.passed());
    let rec = &r.records[0];
    // flat half-disk sloshing values, confirmed by a harmonic-polynomial Ritz computation
    assert_relative_eq!(rec.extra["flat_sigma_next"], 1.35573, max_relative = 1e-3);
    // the central bump lifts sigma_1 and lowers sigma_2
    assert_relative_eq!(rec.sigmas[1], 1.4473964771393937, max_relative = 1e-8);
    assert_relative_eq!(rec.sigmas[2], 2.3627890703676604, max_relative = 1e-8);
    assert!(rec.sigmas[2] < 0.8 * 3.0331);
}

#[test]
fn wrinkle_schedule_recorded_values() {
    let r = harness::run_wrinkle_sweep(&[0.02, 0.05, 0.1, 0.2], &opts()).unwrap();
    let expected = [
        0.9056344995085451,
        1.6829981789422528,
        2.6412959675375993,
        4.012854403786566,
    ];
    for (rec, want) in r.records.iter().zip(expected) {
        assert_relative_eq!(rec.energy.unwrap().rayleigh, want, max_relative = 1e-6);
    }
    assert_relative_eq!(r.records[0].extra["slope"], 0.6479, max_relative = 1e-3);
}

#[test]
fn disk_ladder_must_decrease() {
    let cfg = Config::default();
    assert!(harness::run_disk_validation(&[0.04, 0.08], &cfg, &opts()).is_err());
    assert!(harness::run_disk_validation(&[], &cfg, &opts()).is_err());
}
