mod common;

use fraccond::forms::{b_gamma, energy, liouville_residual, Conductivity};
use fraccond::grid::{GridFunction, GridSpec};
use fraccond::sample;
use fraccond::solve::{dirichlet_solve, DirichletProblem, SolveOptions, SolverMethod};
use proptest::prelude::*;

fn grid(dim: usize) -> GridSpec {
    if dim == 1 {
        GridSpec::new(1, 1.0, 40).unwrap()
    } else {
        GridSpec::new(2, 1.0, 12).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn form_symmetric_and_energy_nonnegative(seed in any::<u64>(), dim in 1usize..=2, s in 0.1f64..0.9) {
        let spec = grid(dim);
        let w = common::weights(&spec, s);
        let mut rng = sample::rng(seed);
        let cond = sample::random_elliptic(spec, 0.3, 3.0, &mut rng).unwrap();
        let u = sample::random_function(spec, &mut rng);
        let v = sample::random_function(spec, &mut rng);
        let uv = b_gamma(&w, &cond, &u, &v).unwrap();
        let vu = b_gamma(&w, &cond, &v, &u).unwrap();
        prop_assert!((uv - vu).abs() <= 1e-13 * (1.0 + uv.abs()));
        prop_assert!(energy(&w, &cond, &u).unwrap() > 0.0);
    }

    #[test]
    fn liouville_identity_exact(seed in any::<u64>(), dim in 1usize..=2, s in 0.1f64..0.5) {
        let spec = grid(dim);
        let w = common::weights(&spec, s);
        let mut rng = sample::rng(seed);
        let cond = sample::random_smooth(spec, 3, 0.6, 0.1, &mut rng).unwrap();
        let u = sample::random_function(spec, &mut rng);
        let phi = sample::random_function(spec, &mut rng);
        prop_assert!(liouville_residual(&w, &cond, &u, &phi).unwrap() <= 1e-12);
    }

    #[test]
    fn solution_map_linear(seed in any::<u64>()) {
        let spec = GridSpec::new(1, 1.0, 48).unwrap();
        let w = common::weights(&spec, 0.35);
        let layout = common::layout_1d(&spec);
        let mut rng = sample::rng(seed);
        let cond = sample::random_elliptic(spec, 0.5, 2.0, &mut rng).unwrap();
        let f = sample::random_supported(spec, layout.w1(), &mut rng);
        let g = sample::random_supported(spec, layout.w2(), &mut rng);
        let fg = &f + &g;
        let opts = SolveOptions::default();
        let solve = |d: &GridFunction| dirichlet_solve(&w, &DirichletProblem::conductivity(&cond, &layout, d), &opts).unwrap().u;
        let sum = &solve(&f) + &solve(&g);
        prop_assert!(solve(&fg).max_abs_diff(&sum) <= 1e-10);
    }
}

#[test]
fn solves_agree_across_methods_and_guesses() {
    let spec = GridSpec::new(2, 1.0, 16).unwrap();
    let w = common::weights(&spec, 0.5);
    let layout = common::layout_2d(&spec);
    let mut rng = sample::rng(5);
    let cond = sample::random_smooth(spec, 2, 0.5, 0.1, &mut rng).unwrap();
    let f = sample::random_supported(spec, layout.w1(), &mut rng);
    let p = DirichletProblem::conductivity(&cond, &layout, &f);
    let direct = dirichlet_solve(&w, &p, &SolveOptions::default()).unwrap();
    let cg_opts = SolveOptions::default().method(SolverMethod::ConjugateGradient);
    let guess: Vec<f64> = (0..layout.omega().len())
        .map(|k| (k as f64 * 0.37).sin())
        .collect();
    let cg = fraccond::solve::dirichlet_solve_from(&w, &p, &cg_opts, &guess).unwrap();
    assert!(direct.u.max_abs_diff(&cg.u) <= 1e-10);
    assert!(cg.diagnostics.relative_residual <= 1e-12);
}

#[test]
fn poincare_constant_stable_under_refinement() {
    let value = |n: usize| {
        let spec = GridSpec::new(1, 1.0, n).unwrap();
        let w = common::weights(&spec, 0.5);
        fraccond::solve::poincare_constant(&w, &common::layout_1d(&spec)).unwrap()
    };
    let (a, b) = (value(128), value(256));
    assert!((a - b).abs() <= 5e-3 * b, "{a} vs {b}");
}

#[test]
fn estimate_ratio_bounded_under_refinement() {
    let mut ratios = Vec::new();
    for n in [32, 64, 128] {
        let spec = GridSpec::new(1, 1.0, n).unwrap();
        let w = common::weights(&spec, 0.5);
        let layout = common::layout_1d(&spec);
        let cond = common::from_deviation(&common::plateau(spec, 0.0, 0.7, 0.4));
        let f = GridFunction::from_fn(spec, |p| {
            common::smooth_step((p[0] + 0.95) / 0.1) * common::smooth_step((-0.6 - p[0]) / 0.1)
        });
        let p = DirichletProblem::conductivity(&cond, &layout, &f);
        let sol = dirichlet_solve(&w, &p, &SolveOptions::default()).unwrap();
        ratios.push(
            fraccond::solve::elliptic_estimate_check(&w, &p, &sol)
                .unwrap()
                .ratio,
        );
    }
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
    assert!(hi <= 1.5 * lo, "{ratios:?}");
}

#[test]
fn schrodinger_solution_is_rescaled_conductivity_solution() {
    let mut rng = sample::rng(9);
    for dim in [1, 2] {
        let spec = grid(dim);
        let w = common::weights(&spec, 0.3);
        let layout = if dim == 1 {
            common::layout_1d(&spec)
        } else {
            common::layout_2d(&spec)
        };
        let cond = sample::random_smooth(spec, 3, 0.5, 0.1, &mut rng).unwrap();
        let g = sample::random_supported(spec, layout.w1(), &mut rng);
        let rep =
            fraccond::liouville::reduce(&w, &cond, &layout, &g, &SolveOptions::default()).unwrap();
        assert!(rep.correspondence_residual <= 1e-10, "{rep:?}");
        assert!(rep.q_form.nodal_consistency <= 1e-12);
    }
}

#[test]
fn conductivity_rejects_ring_violation() {
    let spec = GridSpec::new(1, 1.0, 16).unwrap();
    let bad = GridFunction::constant(spec, 2.0);
    assert!(Conductivity::new(bad).is_err());
}
