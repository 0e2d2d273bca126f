//! The parallel and sequential paths give bitwise-identical results.

use steklov_core::diagnostics::intrinsic_diameter;
use steklov_core::energy::{rayleigh_bound_schedule, region_energy_brute_force};
use steklov_core::geometry::{example1_field, DeformationParams};
use steklov_core::mesh::{lift_to_graph, triangulate_disk};
use steklov_core::par;
use steklov_core::quadrature::{BumpPart, QuadratureRule};
use steklov_core::solver::{steklov_spectrum, MassKind};

#[test]
fn paths_agree_bitwise() {
    let rule = QuadratureRule::default();
    let p = DeformationParams::schedule_with_omega(0.2, 40.0).unwrap();
    let s = lift_to_graph(
        &triangulate_disk(0.08).unwrap(),
        &example1_field(4).unwrap(),
    )
    .unwrap();
    let run = || {
        (
            region_energy_brute_force(&p, BumpPart::Support, &rule).unwrap(),
            rayleigh_bound_schedule(0.1, 2, &rule).unwrap().1,
            steklov_spectrum(&s, 5, MassKind::Consistent)
                .unwrap()
                .sigmas,
            intrinsic_diameter(&s).unwrap(),
        )
    };
    let parallel = run();
    let sequential = par::with_sequential(run);
    assert_eq!(parallel.0.to_bits(), sequential.0.to_bits());
    assert_eq!(parallel.1, sequential.1);
    assert_eq!(parallel.2, sequential.2);
    assert_eq!(parallel.3.to_bits(), sequential.3.to_bits());
}
