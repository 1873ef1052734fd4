//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Registered with `harness = false`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::dense::{dense, small_grids};
use fraccond::counterex::{
    build_counterexample, verify_nonuniqueness, CounterexampleParams, CutoffMode, MIN_CONTRAST,
};
use fraccond::dnmap::{alessandrini_gap, assemble_dn, assemble_dn_block};
use fraccond::extdet::{build_sequence, reconstruction_trace, stability_compare};
use fraccond::forms::{b_gamma, liouville_residual, Conductivity};
use fraccond::grid::{GridFunction, GridSpec};
use fraccond::kernel::apply_frac_laplacian;
use fraccond::liouville::{reduce, relation_of_solutions_check};
use fraccond::sample;
use fraccond::solve::SolveOptions;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion = (&'static str, fn() -> Outcome, u64);

fn liouville_identity() -> Outcome {
    let mut rng = sample::rng(101);
    let mut worst: f64 = 0.0;
    for (dim, n) in [(1, 64), (2, 32)] {
        let spec = GridSpec::new(dim, 1.0, n)?;
        for k in 0..50 {
            let s = [0.2, 0.35, 0.45][k % 3];
            let w = common::weights(&spec, s);
            let cond = sample::random_smooth(spec, 3, 0.6, 0.1, &mut rng)?;
            let u = sample::random_function(spec, &mut rng);
            let phi = sample::random_function(spec, &mut rng);
            worst = worst.max(liouville_residual(&w, &cond, &u, &phi)?);
        }
    }
    Ok((
        worst <= 1e-12,
        format!("max relative residual {worst:.2e} over 2x50 samples"),
    ))
}

fn solution_correspondence() -> Outcome {
    let mut rng = sample::rng(202);
    let opts = SolveOptions::with_tol(1e-12);
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let (spec, layout, s) = if k < 5 {
            let spec = GridSpec::new(1, 1.0, 64)?;
            (spec, common::layout_1d(&spec), 0.3)
        } else {
            let spec = GridSpec::new(2, 1.0, 24)?;
            (spec, common::layout_2d(&spec), 0.5)
        };
        let w = common::weights(&spec, s);
        let cond = sample::random_elliptic(spec, 0.5, 2.0, &mut rng)?;
        let g = sample::random_supported(spec, layout.w1(), &mut rng);
        worst = worst.max(reduce(&w, &cond, &layout, &g, &opts)?.correspondence_residual);
    }
    Ok((
        worst <= 1e-10,
        format!("max correspondence residual {worst:.2e} over 10 conductivities"),
    ))
}

fn dn_symmetry_and_alessandrini() -> Outcome {
    let spec = GridSpec::new(1, 1.0, 32)?;
    let layout = common::layout_1d(&spec);
    let opts = SolveOptions::default();
    let mut rng = sample::rng(303);
    let (mut sym, mut gap): (f64, f64) = (0.0, 0.0);
    for s in [0.25, 0.5, 0.75] {
        let w = common::weights(&spec, s);
        let c1 = sample::random_elliptic(spec, 0.5, 2.0, &mut rng)?;
        let c2 = sample::random_elliptic(spec, 0.5, 2.0, &mut rng)?;
        let d1 = assemble_dn(&w, &c1, &layout, &opts)?;
        let d2 = assemble_dn(&w, &c2, &layout, &opts)?;
        sym = sym.max(d1.symmetry_defect().unwrap_or(f64::INFINITY));
        sym = sym.max(d2.symmetry_defect().unwrap_or(f64::INFINITY));
        for _ in 0..3 {
            let f = sample::random_supported(spec, layout.w1(), &mut rng);
            let g = sample::random_supported(spec, layout.exterior(), &mut rng);
            gap = gap.max(alessandrini_gap(&w, &c1, &c2, &layout, &d1, &d2, &f, &g, &opts)?.gap);
        }
    }
    Ok((
        sym <= 1e-10 && gap <= 1e-10,
        format!("symmetry defect {sym:.2e}, identity gap {gap:.2e}"),
    ))
}

fn counterexample() -> Outcome {
    let opts = SolveOptions::default();
    let mut ok = true;
    let mut parts = Vec::new();
    let cases = [
        (1, 128, 0.3),
        (1, 128, 0.45),
        (2, 48, 0.3),
        (2, 48, 0.5),
        (2, 48, 0.75),
    ];
    for (dim, n, s) in cases {
        let spec = GridSpec::new(dim, 1.0, n)?;
        let w = common::weights(&spec, s);
        let layout = common::counterexample_layout(&spec);
        let params = CounterexampleParams {
            epsilon: 1.5 * spec.spacing(),
            mode: CutoffMode::Tight,
        };
        let pair = build_counterexample(&w, &layout, &params, &opts)?;
        let r = verify_nonuniqueness(&pair, &w, &layout, &opts)?;
        ok &= r.r_dn <= 1e-8 && r.d_gamma >= MIN_CONTRAST && r.same_window_relative >= 1e-4;
        parts.push(format!(
            "{dim}D s={s}: dGamma {:.3} rDN {:.1e} W1W1 {:.1e}",
            r.d_gamma, r.r_dn, r.same_window_relative
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn relation_of_solutions() -> Outcome {
    let spec = GridSpec::new(1, 1.0, 128)?;
    let w = common::weights(&spec, 0.3);
    let layout = common::counterexample_layout(&spec);
    let opts = SolveOptions::default();
    let params = CounterexampleParams {
        epsilon: 1.5 * spec.spacing(),
        mode: CutoffMode::Tight,
    };
    let pair = build_counterexample(&w, &layout, &params, &opts)?;
    let w1 = layout.w1();
    let mut worst: f64 = 0.0;
    for k in 0..5 {
        let node = w1[k * (w1.len() - 1) / 4];
        let f = GridFunction::basis(spec, node);
        worst = worst.max(relation_of_solutions_check(
            &w,
            &pair.cond1,
            &pair.cond2,
            &layout,
            &f,
            &opts,
        )?);
    }
    Ok((
        worst <= 1e-8,
        format!("max relation residual {worst:.2e} over 5 basis functions"),
    ))
}

fn exterior_reconstruction() -> Outcome {
    let spec = GridSpec::new(1, 1.0, 256)?;
    let w = common::weights(&spec, 0.5);
    let layout = common::window_layout(&spec);
    // m = 1 near x₀ = 0.5, so γ(x₀) = 4
    let cond = common::from_deviation(&common::plateau(spec, 0.5, 0.45, 1.0));
    let x0 = common::nearest_node(&spec, [0.5, 0.0]);
    let target = cond.gamma().values()[x0];
    let dn = assemble_dn_block(
        &w,
        &cond,
        &layout,
        layout.w1(),
        layout.w1(),
        &SolveOptions::default(),
    )?;
    let seq = build_sequence(&w, layout.w1(), x0, 0.35, 3)?;
    let trace = reconstruction_trace(&dn, &seq, &w, &cond)?;
    let errs: Vec<f64> = trace.iter().map(|r| (r.value - target).abs()).collect();
    let last = errs.last().copied().unwrap_or(f64::INFINITY);
    let tail = &errs[errs.len().saturating_sub(3)..];
    let monotone = tail.len() == 3 && tail.windows(2).all(|p| p[1] <= p[0]);
    let values: Vec<String> = trace.iter().map(|r| format!("{:.3}", r.value)).collect();
    Ok((
        (target - 4.0).abs() <= 1e-12 && last / target <= 0.10 && monotone,
        format!(
            "g_N = [{}], final relative error {:.3}",
            values.join(", "),
            last / target
        ),
    ))
}

fn stability() -> Outcome {
    let opts = SolveOptions::default();
    let mut ok = true;
    let mut parts = Vec::new();
    let mut reports = Vec::new();
    for n in [64, 128] {
        let spec = GridSpec::new(1, 1.0, n)?;
        let w = common::weights(&spec, 0.5);
        let layout = common::window_layout(&spec);
        let g1 = common::from_deviation(&common::plateau(spec, 0.5, 0.4, 0.3));
        let chi = common::plateau(spec, 0.5, 0.45, 1.0);
        let g1s = Conductivity::new(g1.gamma().zip_with(&chi, |g, c| g * (1.0 + 0.2 * c)))?;
        let pairs = [
            (g1.clone(), Conductivity::one(spec)),
            (g1, g1s),
            (
                common::from_deviation(&common::plateau(spec, 0.4, 0.25, 0.3)),
                common::from_deviation(&common::plateau(spec, 0.6, 0.25, -0.2)),
            ),
        ];
        reports.clear();
        for (a, b) in &pairs {
            let d1 = assemble_dn_block(&w, a, &layout, layout.w1(), layout.w1(), &opts)?;
            let d2 = assemble_dn_block(&w, b, &layout, layout.w1(), layout.w1(), &opts)?;
            reports.push(stability_compare(&d1, &d2, a, b, &w)?);
        }
    }
    // judged on the finer grid
    for r in &reports {
        ok &= r.holds;
        parts.push(format!("{:.4} <= {:.4}", r.lhs, r.rhs));
    }
    Ok((ok, format!("N=128: {}", parts.join(", "))))
}

fn getoor_profile() -> Outcome {
    let mut errs = Vec::new();
    for n in [64, 128, 256, 512] {
        let spec = GridSpec::new(1, 2.0, n)?;
        let w = common::weights(&spec, 0.5);
        let u = GridFunction::from_fn(spec, |p| (1.0 - p[0] * p[0]).max(0.0).sqrt());
        let lu = apply_frac_laplacian(&w, &u)?;
        errs.push(
            spec.nodes()
                .filter(|&i| spec.point(i)[0].abs() < 0.9)
                .map(|i| (lu.values()[i] - 1.0).abs())
                .fold(0.0, f64::max),
        );
    }
    let monotone = errs.windows(2).all(|p| p[1] < p[0]);
    let text: Vec<String> = errs.iter().map(|e| format!("{e:.4}")).collect();
    Ok((
        monotone && errs[3] <= 0.05,
        format!("max error [{}] at N = 64..512", text.join(", ")),
    ))
}

fn brute_force() -> Outcome {
    let mut rng = sample::rng(909);
    let mut worst: f64 = 0.0;
    let mut grids = 0;
    for spec in small_grids() {
        grids += 1;
        for s in [0.25, 0.5, 0.75] {
            let w = common::weights(&spec, s);
            let d = dense(&w);
            let cond = sample::random_elliptic(spec, 0.5, 2.0, &mut rng)?;
            let u = sample::random_function(spec, &mut rng);
            let v = sample::random_function(spec, &mut rng);
            let lu = apply_frac_laplacian(&w, &u)?;
            for i in spec.nodes() {
                let (val, scale) = d.laplacian(u.values(), i);
                worst = worst.max((lu.values()[i] - val).abs() / scale);
            }
            let (bg, sg) = d.form(cond.sqrt_gamma().values(), u.values(), v.values());
            worst = worst.max((b_gamma(&w, &cond, &u, &v)? - bg).abs() / sg);
        }
    }
    Ok((
        worst <= 1e-12,
        format!("max scaled deviation {worst:.2e} on {grids} grids x 3 orders"),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("liouville identity", liouville_identity, 30),
        ("solution correspondence", solution_correspondence, 60),
        (
            "dn symmetry and alessandrini identity",
            dn_symmetry_and_alessandrini,
            60,
        ),
        ("counterexample", counterexample, 180),
        ("relation of solutions", relation_of_solutions, 60),
        ("exterior reconstruction", exterior_reconstruction, 300),
        ("stability inequality", stability, 300),
        ("getoor kernel oracle", getoor_profile, 300),
        ("brute-force equivalence", brute_force, 300),
    ];
    let mut failures = 0;
    for (k, (name, run, budget)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let outcome = run();
        let elapsed = t.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (pass && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!pass);
        println!(
            "criterion {} {} {name}: {detail} ({:.2}s of {budget}s)",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
