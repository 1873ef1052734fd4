//! The named experiments. Each one reads the config, writes its artifacts
//! into the output directory and records criteria in [`Findings`].

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use fraccond::counterex::{
    build_counterexample, verify_nonuniqueness, CounterexampleParams, CounterexampleRecord,
};
use fraccond::dnmap::{alessandrini_gap, assemble_dn, assemble_dn_block};
use fraccond::extdet::{
    build_sequence, reconstruction_trace, stability_compare, write_trace_csv, STABILITY_SLACK,
};
use fraccond::forms::{liouville_residual, Conductivity};
use fraccond::grid::{GridFunction, GridSpec, RegionLayout};
use fraccond::io::{read_grid_binary, read_grid_csv, write_grid_binary, write_grid_csv};
use fraccond::kernel::{apply_frac_laplacian, getoor_value, FracParams, KernelWeights};
use fraccond::liouville::reduce;
use fraccond::sample;
use fraccond::solve::{
    dirichlet_solve, elliptic_estimate_check, poincare_constant, DirichletProblem,
};
use rand_chacha::ChaCha8Rng;

use crate::config::{Config, DefaultGeometry, Recipe};
use crate::report::Findings;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Solve,
    Dn,
    Verify,
    Reconstruct,
    Stability,
    Counterexample,
    Converge,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Solve => "forward-solve",
            Experiment::Dn => "dn-assemble",
            Experiment::Verify => "verify-identities",
            Experiment::Reconstruct => "reconstruct",
            Experiment::Stability => "stability",
            Experiment::Counterexample => "counterexample",
            Experiment::Converge => "convergence-study",
        }
    }
}

pub fn run(experiment: Experiment, cfg: &Config, out: &Path, found: &mut Findings) -> Result<()> {
    let mut rng = sample::rng(cfg.seed);
    match experiment {
        Experiment::Solve => forward_solve(cfg, out, &mut rng, found),
        Experiment::Dn => dn_assemble(cfg, out, &mut rng, found),
        Experiment::Verify => verify_identities(cfg, &mut rng, found),
        Experiment::Reconstruct => reconstruct(cfg, out, &mut rng, found),
        Experiment::Stability => stability(cfg, out, &mut rng, found),
        Experiment::Counterexample => counterexample(cfg, out, found),
        Experiment::Converge => converge(cfg, out, found),
    }
}

fn weights(spec: &GridSpec, s: f64) -> Result<KernelWeights> {
    Ok(KernelWeights::build(
        spec,
        &FracParams::new(spec.dim(), s)?,
    )?)
}

fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

fn conductivity(recipe: &Recipe, spec: GridSpec, rng: &mut ChaCha8Rng) -> Result<Conductivity> {
    let cond = match recipe {
        Recipe::Constant { value } => Conductivity::new(GridFunction::constant(spec, *value))?,
        Recipe::SmoothBump {
            center,
            radius,
            amplitude,
        } => {
            let c = [center[0], center.get(1).copied().unwrap_or(0.0)];
            let m = GridFunction::from_fn(spec, |p| {
                let d = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt();
                amplitude * smooth_step((radius - d) / (0.5 * radius))
            });
            Conductivity::from_deviation(&m)?
        }
        Recipe::RandomSmooth {
            bumps,
            amplitude,
            margin,
        } => sample::random_smooth(spec, *bumps, *amplitude, *margin, rng)?,
        Recipe::RandomElliptic { lo, hi } => sample::random_elliptic(spec, *lo, *hi, rng)?,
        Recipe::Counterexample { path, which } => {
            let rec = CounterexampleRecord::read_json(path)
                .with_context(|| format!("reading {}", path.display()))?;
            ensure!(
                rec.spec == spec,
                "{} was built on a different grid",
                path.display()
            );
            let (c1, c2) = rec.conductivities()?;
            if *which == 1 {
                c1
            } else {
                c2
            }
        }
        Recipe::File { path } => {
            let g = if path.extension().is_some_and(|e| e == "bin") {
                read_grid_binary(path)
            } else {
                read_grid_csv(path)
            }
            .with_context(|| format!("reading {}", path.display()))?;
            ensure!(
                *g.spec() == spec,
                "{} holds a function on a different grid",
                path.display()
            );
            Conductivity::new(g)?
        }
    };
    Ok(cond)
}

fn layout(cfg: &Config, spec: &GridSpec, fallback: DefaultGeometry) -> Result<RegionLayout> {
    RegionLayout::new(spec, &cfg.region_boxes(fallback)).context("rasterizing regions")
}

fn forward_solve(
    cfg: &Config,
    out: &Path,
    rng: &mut ChaCha8Rng,
    found: &mut Findings,
) -> Result<()> {
    let spec = cfg.spec()?;
    let w = weights(&spec, cfg.s)?;
    let layout = layout(cfg, &spec, DefaultGeometry::TwoWindows)?;
    let cond = conductivity(&cfg.conductivity, spec, rng)?;
    let support = if layout.w1().is_empty() {
        layout.exterior()
    } else {
        layout.w1()
    };
    let f = sample::random_supported(spec, support, rng);
    let problem = DirichletProblem::conductivity(&cond, &layout, &f);
    let sol = dirichlet_solve(&w, &problem, &cfg.solver.options())?;
    let d = &sol.diagnostics;
    found.metric("unknowns", d.unknowns as f64);
    found.metric("iterations", d.iterations as f64);
    found.metric("solve_time_s", d.wall_time_s);
    found.at_most(
        "relative_residual",
        d.relative_residual,
        cfg.tolerances.residual,
    );
    match elliptic_estimate_check(&w, &problem, &sol) {
        Ok(est) => {
            found.metric("estimate_lhs", est.lhs);
            found.metric("estimate_ratio", est.ratio);
        }
        Err(e) => found.note(format!("elliptic estimate skipped: {e}")),
    }
    found.metric("poincare_constant", poincare_constant(&w, &layout)?);
    write_grid_csv(&sol.u, &found.artifact(out.join("u.csv")))?;
    write_grid_binary(&sol.u, &found.artifact(out.join("u.bin")))?;
    write_grid_csv(&f, &found.artifact(out.join("data.csv")))?;
    write_grid_csv(cond.gamma(), &found.artifact(out.join("gamma.csv")))?;
    Ok(())
}

fn dn_assemble(cfg: &Config, out: &Path, rng: &mut ChaCha8Rng, found: &mut Findings) -> Result<()> {
    let spec = cfg.spec()?;
    let w = weights(&spec, cfg.s)?;
    let layout = layout(cfg, &spec, DefaultGeometry::TwoWindows)?;
    let cond = conductivity(&cfg.conductivity, spec, rng)?;
    let dn = assemble_dn(&w, &cond, &layout, &cfg.solver.options())?;
    found.metric("exterior_nodes", dn.rows().len() as f64);
    found.metric("max_abs", dn.max_abs());
    found.at_most(
        "symmetry_defect",
        dn.symmetry_defect().unwrap_or(f64::INFINITY),
        cfg.tolerances.symmetry,
    );
    dn.write_csv(&found.artifact(out.join("dn.csv")))?;
    write_grid_csv(cond.gamma(), &found.artifact(out.join("gamma.csv")))?;
    Ok(())
}

fn verify_identities(cfg: &Config, rng: &mut ChaCha8Rng, found: &mut Findings) -> Result<()> {
    let spec = cfg.spec()?;
    let w = weights(&spec, cfg.s)?;
    let layout = layout(cfg, &spec, DefaultGeometry::TwoWindows)?;
    let opts = cfg.solver.options();
    let tol = &cfg.tolerances;
    let c1 = conductivity(&cfg.conductivity, spec, rng)?;
    let c2 = conductivity(&cfg.conductivity2, spec, rng)?;
    let samples = cfg.verify.samples.max(1);

    let mut liouville: f64 = 0.0;
    for _ in 0..samples {
        let u = sample::random_function(spec, rng);
        let phi = sample::random_function(spec, rng);
        liouville = liouville.max(liouville_residual(&w, &c1, &u, &phi)?);
    }
    found.at_most("liouville_residual", liouville, tol.liouville);

    if let Err(e) = w.params().require_reduction_range() {
        found.note(format!("solution correspondence skipped: {e}"));
    } else {
        let support = if layout.w1().is_empty() {
            layout.exterior()
        } else {
            layout.w1()
        };
        let mut corr: f64 = 0.0;
        for _ in 0..samples {
            let g = sample::random_supported(spec, support, rng);
            corr = corr.max(reduce(&w, &c1, &layout, &g, &opts)?.correspondence_residual);
        }
        found.at_most("correspondence_residual", corr, tol.correspondence);
    }

    let d1 = assemble_dn(&w, &c1, &layout, &opts)?;
    let d2 = assemble_dn(&w, &c2, &layout, &opts)?;
    let sym = d1
        .symmetry_defect()
        .unwrap_or(f64::INFINITY)
        .max(d2.symmetry_defect().unwrap_or(f64::INFINITY));
    found.at_most("dn_symmetry_defect", sym, tol.symmetry);

    let mut gap: f64 = 0.0;
    for _ in 0..samples {
        let f = sample::random_supported(spec, layout.exterior(), rng);
        let g = sample::random_supported(spec, layout.exterior(), rng);
        gap = gap.max(alessandrini_gap(&w, &c1, &c2, &layout, &d1, &d2, &f, &g, &opts)?.gap);
    }
    found.at_most("alessandrini_gap", gap, tol.alessandrini);
    Ok(())
}

fn nearest(spec: &GridSpec, nodes: &[usize], x: [f64; 2]) -> usize {
    let d = |i: usize| {
        let p = spec.point(i);
        (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)
    };
    nodes
        .iter()
        .copied()
        .min_by(|&a, &b| d(a).total_cmp(&d(b)))
        .expect("nonempty node set")
}

fn reconstruct(cfg: &Config, out: &Path, rng: &mut ChaCha8Rng, found: &mut Findings) -> Result<()> {
    let spec = cfg.spec()?;
    let w = weights(&spec, cfg.s)?;
    let layout = layout(cfg, &spec, DefaultGeometry::SingleWindow)?;
    let window = layout.w1();
    if window.is_empty() {
        bail!("reconstruction needs a W1 window");
    }
    let cond = conductivity(&cfg.conductivity, spec, rng)?;
    let rc = &cfg.reconstruct;

    let dim = spec.dim();
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for &k in window {
        let p = spec.point(k);
        for a in 0..dim {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let x0 = match &rc.x0 {
        Some(x) => [x[0], x.get(1).copied().unwrap_or(0.0)],
        None => [
            0.5 * (lo[0] + hi[0]),
            if dim == 2 { 0.5 * (lo[1] + hi[1]) } else { 0.0 },
        ],
    };
    let center = nearest(&spec, window, x0);
    let extent = (0..dim)
        .map(|a| hi[a] - lo[a] + spec.spacing())
        .fold(f64::INFINITY, f64::min);
    let r0 = rc.r0.unwrap_or(0.45 * extent);

    let dn = assemble_dn_block(&w, &cond, &layout, window, window, &cfg.solver.options())?;
    let seq = build_sequence(&w, window, center, r0, rc.levels)?;
    let trace = reconstruction_trace(&dn, &seq, &w, &cond)?;
    write_trace_csv(&trace, &found.artifact(out.join("trace.csv")))?;

    let target = rc.expected.unwrap_or(cond.gamma().values()[center]);
    let errs: Vec<f64> = trace.iter().map(|r| (r.value - target).abs()).collect();
    let last = *errs.last().expect("at least one level");
    let tail = &errs[errs.len().saturating_sub(3)..];
    let increases = tail.windows(2).filter(|p| p[1] > p[0]).count();
    found.metric("gamma_x0", target);
    found.metric(
        "final_value",
        trace.last().expect("at least one level").value,
    );
    found.metric(
        "finest_radius",
        *seq.radii().last().expect("at least one level"),
    );
    found.at_most(
        "relative_error",
        last / target.abs(),
        cfg.tolerances.reconstruction,
    );
    found.at_most("tail_increases", increases as f64, 0.0);
    Ok(())
}

fn stability(cfg: &Config, out: &Path, rng: &mut ChaCha8Rng, found: &mut Findings) -> Result<()> {
    let spec = cfg.spec()?;
    let w = weights(&spec, cfg.s)?;
    let layout = layout(cfg, &spec, DefaultGeometry::SingleWindow)?;
    let window = layout.w1();
    if window.is_empty() {
        bail!("the stability comparison needs a W1 window");
    }
    let c1 = conductivity(&cfg.conductivity, spec, rng)?;
    let c2 = conductivity(&cfg.conductivity2, spec, rng)?;
    let opts = cfg.solver.options();
    let d1 = assemble_dn_block(&w, &c1, &layout, window, window, &opts)?;
    let d2 = assemble_dn_block(&w, &c2, &layout, window, window, &opts)?;
    let rep = stability_compare(&d1, &d2, &c1, &c2, &w)?;
    found.metric("gamma_difference", rep.lhs);
    found.metric("scaled_dn_norm", rep.rhs);
    found.at_most("stability_ratio", rep.lhs / rep.rhs, 1.0 + STABILITY_SLACK);
    d1.difference(&d2)?
        .write_csv(&found.artifact(out.join("dn_difference.csv")))?;
    Ok(())
}

fn counterexample(cfg: &Config, out: &Path, found: &mut Findings) -> Result<()> {
    let spec = cfg.spec()?;
    let w = weights(&spec, cfg.s)?;
    let layout = layout(cfg, &spec, DefaultGeometry::Counterexample)?;
    let opts = cfg.solver.options();
    let params = CounterexampleParams {
        epsilon: cfg.counterexample.epsilon_cells * spec.spacing(),
        mode: cfg.counterexample.mode,
    };
    let pair = build_counterexample(&w, &layout, &params, &opts)?;
    let rep = verify_nonuniqueness(&pair, &w, &layout, &opts)?;
    let tol = &cfg.tolerances;
    found.metric("scale", pair.scale);
    found.metric("harmonic_residual", rep.harmonic_residual);
    found.metric("same_window_diff", rep.same_window_diff);
    found.at_most("r_dn", rep.r_dn, tol.partial_data);
    found.at_most("r_sol", rep.r_sol, tol.relation);
    found.at_least("d_gamma", rep.d_gamma, tol.contrast);
    found.at_least(
        "same_window_relative",
        rep.same_window_relative,
        tol.same_window,
    );
    CounterexampleRecord::new(&pair, &w, Some(rep))
        .write_json(&found.artifact(out.join("counterexample.json")))?;
    write_grid_csv(pair.cond1.gamma(), &found.artifact(out.join("gamma1.csv")))?;
    write_grid_csv(&pair.m1, &found.artifact(out.join("m1.csv")))?;
    write_grid_csv(&pair.eta, &found.artifact(out.join("eta.csv")))?;
    Ok(())
}

fn converge(cfg: &Config, out: &Path, found: &mut Findings) -> Result<()> {
    let (dim, l, s) = (cfg.grid.dim, cfg.grid.half_width, cfg.s);
    if l <= 1.0 {
        bail!("field `grid.half_width`: the convergence study needs L > 1, got {l}");
    }
    let sizes = match (&cfg.converge.sizes[..], dim) {
        ([], 1) => vec![64, 128, 256, 512],
        ([], _) => vec![16, 24, 32, 48],
        (given, _) => given.to_vec(),
    };
    let exact = getoor_value(dim, s)?;
    let radius = cfg.converge.radius;
    let mut csv = String::from("nodes,spacing,max_error\n");
    let mut errs = Vec::new();
    for &n in &sizes {
        let spec = GridSpec::new(dim, l, n)?;
        let w = weights(&spec, s)?;
        let u = GridFunction::from_fn(spec, |p| (1.0 - p[0] * p[0] - p[1] * p[1]).max(0.0).powf(s));
        let lu = apply_frac_laplacian(&w, &u)?;
        let err = spec
            .nodes()
            .filter(|&i| {
                let p = spec.point(i);
                p[0] * p[0] + p[1] * p[1] < radius * radius
            })
            .map(|i| (lu.values()[i] - exact).abs() / exact)
            .fold(0.0, f64::max);
        writeln!(csv, "{n},{},{err}", spec.spacing())?;
        found.metric(&format!("error_n{n}"), err);
        errs.push(err);
    }
    std::fs::write(found.artifact(out.join("converge.csv")), csv)?;
    let increases = errs.windows(2).filter(|p| p[1] >= p[0]).count();
    found.at_most(
        "finest_relative_error",
        *errs.last().expect("nonempty sizes"),
        cfg.tolerances.kernel,
    );
    found.at_most("non_decreasing_steps", increases as f64, 0.0);
    Ok(())
}
