use perichannel::analysis::{energy_balance, mirror_symmetry_defect, norms_and_flux};
use perichannel::{solve_navier_stokes, solve_stokes, ChannelGeometry, Discretization, FieldSolution, SolveOptions};

fn h1_distance(disc: &Discretization, a: &FieldSolution, b: &FieldSolution) -> f64 {
    let mut diff = a.clone();
    diff.velocity.iter_mut().zip(&b.velocity).for_each(|(x, y)| *x -= y);
    norms_and_flux(disc, &diff).velocity_h1
}

#[test]
fn straight_channel_is_stokes_flow() {
    let disc = Discretization::new(&ChannelGeometry::straight(), 6, 6).unwrap();
    let opts = SolveOptions::default();
    for lambda in [0.0, 1.0, 7.0] {
        let ns = solve_navier_stokes(&disc, lambda, &opts).unwrap();
        let st = solve_stokes(&disc, lambda, &opts).unwrap();
        assert_eq!(ns.diagnostics.iterations, 1, "lambda {lambda}");
        assert!(h1_distance(&disc, &ns, &st) <= 1e-9 * (1.0 + lambda));
        let (n_ns, n_st) = (norms_and_flux(&disc, &ns), norms_and_flux(&disc, &st));
        assert!(n_ns.velocity_h1_semi <= n_st.velocity_h1_semi * (1.0 + 1e-6) + 1e-15);
    }
}

#[test]
fn wavy_solution_keeps_energy_and_symmetry() {
    let disc = Discretization::new(&ChannelGeometry::cosine(0.25, 1).unwrap(), 12, 8).unwrap();
    let sol = solve_navier_stokes(&disc, 20.0, &SolveOptions::default()).unwrap();
    assert!(sol.diagnostics.iterations > 1);
    assert!(energy_balance(&disc, &sol).relative_error() < 1e-8);
    assert!(mirror_symmetry_defect(&disc, &sol).unwrap() < 1e-8);
    let norms = norms_and_flux(&disc, &sol);
    assert!(norms.divergence_residual <= 1e-10 * norms.velocity_h1);
}

#[test]
fn inertial_correction_is_quadratic_in_lambda() {
    let disc = Discretization::new(&ChannelGeometry::cosine(0.25, 1).unwrap(), 8, 8).unwrap();
    let opts = SolveOptions::default();
    let scaled = |lambda: f64| {
        let ns = solve_navier_stokes(&disc, lambda, &opts).unwrap();
        let st = solve_stokes(&disc, lambda, &opts).unwrap();
        h1_distance(&disc, &ns, &st) / lambda.powi(2)
    };
    let (a, b) = (scaled(0.02), scaled(0.01));
    assert!(a > 0.0 && (a / b - 1.0).abs() < 0.25, "{a:e} {b:e}");
}

#[test]
fn picard_alone_converges() {
    let disc = Discretization::new(&ChannelGeometry::cosine(0.2, 1).unwrap(), 8, 8).unwrap();
    let picard = SolveOptions {
        newton_switch: None,
        ..SolveOptions::default()
    };
    let a = solve_navier_stokes(&disc, 10.0, &picard).unwrap();
    let b = solve_navier_stokes(&disc, 10.0, &SolveOptions::default()).unwrap();
    assert_eq!(a.diagnostics.newton_steps, 0);
    assert!(b.diagnostics.iterations <= a.diagnostics.iterations);
    assert!(h1_distance(&disc, &a, &b) <= 1e-8 * norms_and_flux(&disc, &b).velocity_h1);
}
