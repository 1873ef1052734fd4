//! Conductivity ↔ Schrödinger correspondence as whole-problem checks.

use serde::{Deserialize, Serialize};

use crate::dnmap::{assemble_dn_block, DnMatrix};
use crate::error::{Error, Result};
use crate::forms::{b_one, liouville_residual, potential, q_form, Conductivity};
use crate::grid::{GridFunction, RegionLayout};
use crate::kernel::KernelWeights;
use crate::solve::{dirichlet_solve, DirichletProblem, SolveDiagnostics, SolveOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QFormDiagnostics {
    /// `max_Ω |q|`
    pub potential_max_abs: f64,
    /// `min_Ω q`
    pub potential_min: f64,
    /// `|Q_γ(v, v) − Σ q_i v_i²|` for the Schrödinger solution `v`.
    pub nodal_consistency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub identity_residual: f64,
    /// `‖γ^{1/2} u_g − v_{γ^{1/2} g}‖_∞`
    pub correspondence_residual: f64,
    pub q_form: QFormDiagnostics,
    pub conductivity_solve: SolveDiagnostics,
    pub schrodinger_solve: SolveDiagnostics,
}

/// Solves the conductivity problem with data `g` and the Schrödinger
/// problem with data `γ^{1/2} g`, then compares `γ^{1/2} u_g` with `v`.
pub fn reduce(
    weights: &KernelWeights,
    cond: &Conductivity,
    layout: &RegionLayout,
    g: &GridFunction,
    opts: &SolveOptions,
) -> Result<ReductionReport> {
    let cs = dirichlet_solve(
        weights,
        &DirichletProblem::conductivity(cond, layout, g),
        opts,
    )?;
    let f = cond.sqrt_gamma().hadamard(g);
    let ss = dirichlet_solve(
        weights,
        &DirichletProblem::schrodinger(cond, layout, &f),
        opts,
    )?;
    let correspondence_residual = cond.sqrt_gamma().hadamard(&cs.u).max_abs_diff(&ss.u);

    let spec = *weights.spec();
    let batch = [
        cs.u.clone(),
        g.clone(),
        GridFunction::indicator(spec, layout.omega()),
    ];
    let mut identity_residual: f64 = 0.0;
    for phi in &batch {
        identity_residual = identity_residual.max(liouville_residual(weights, cond, &cs.u, phi)?);
    }

    let q = potential(weights, cond)?;
    let q_omega = layout.omega().iter().map(|&i| q.values()[i]);
    let nodal: f64 = q
        .values()
        .iter()
        .zip(ss.u.values())
        .map(|(qi, v)| qi * v * v)
        .sum();
    let q_form = QFormDiagnostics {
        potential_max_abs: q_omega.clone().fold(0.0, |m, v| m.max(v.abs())),
        potential_min: q_omega.fold(f64::INFINITY, f64::min),
        nodal_consistency: (q_form(weights, cond, &ss.u, &ss.u)? - nodal).abs(),
    };
    Ok(ReductionReport {
        identity_residual,
        correspondence_residual,
        q_form,
        conductivity_solve: cs.diagnostics,
        schrodinger_solve: ss.diagnostics,
    })
}

/// `‖γ₁^{1/2} u¹_f − γ₂^{1/2} u²_f‖_∞` for data `f` supported in W₁.
///
/// The agreement of the W₁ → W₂ data is the caller's responsibility; see
/// [`partial_data_mismatch`] and [`checked_relation_of_solutions`].
pub fn relation_of_solutions_check(
    weights: &KernelWeights,
    cond1: &Conductivity,
    cond2: &Conductivity,
    layout: &RegionLayout,
    f: &GridFunction,
    opts: &SolveOptions,
) -> Result<f64> {
    f.ensure_supported_in(layout.w1(), "W1")?;
    let u1 = dirichlet_solve(
        weights,
        &DirichletProblem::conductivity(cond1, layout, f),
        opts,
    )?
    .u;
    let u2 = dirichlet_solve(
        weights,
        &DirichletProblem::conductivity(cond2, layout, f),
        opts,
    )?
    .u;
    Ok(cond1
        .sqrt_gamma()
        .hadamard(&u1)
        .max_abs_diff(&cond2.sqrt_gamma().hadamard(&u2)))
}

/// `‖(Λ₁ − Λ₂)|_{W₁→W₂}‖_max / ‖Λ₁|_{W₁→W₂}‖_max`
pub fn partial_data_mismatch(
    weights: &KernelWeights,
    cond1: &Conductivity,
    cond2: &Conductivity,
    layout: &RegionLayout,
    opts: &SolveOptions,
) -> Result<f64> {
    let w1 = layout.require(crate::grid::Region::W1)?;
    let w2 = layout.require(crate::grid::Region::W2)?;
    let d1 = assemble_dn_block(weights, cond1, layout, w1, w2, opts)?;
    let d2 = assemble_dn_block(weights, cond2, layout, w1, w2, opts)?;
    relative_block_difference(&d1, &d2)
}

/// `‖D₁ − D₂‖_max / ‖D₁‖_max`, or the plain difference when `D₁ = 0`.
pub fn relative_block_difference(d1: &DnMatrix, d2: &DnMatrix) -> Result<f64> {
    let diff = d1.difference(d2)?.max_abs();
    let scale = d1.max_abs();
    Ok(if scale == 0.0 { diff } else { diff / scale })
}

/// [`relation_of_solutions_check`] behind the partial-data hypothesis:
/// fails with a precondition error if the W₁ → W₂ blocks differ by more
/// than `mismatch_tol` (relative) or if γ₁ ≠ γ₂ somewhere on W₂.
#[allow(clippy::too_many_arguments)]
pub fn checked_relation_of_solutions(
    weights: &KernelWeights,
    cond1: &Conductivity,
    cond2: &Conductivity,
    layout: &RegionLayout,
    f: &GridFunction,
    mismatch_tol: f64,
    opts: &SolveOptions,
) -> Result<f64> {
    if let Some(&k) = layout
        .w2()
        .iter()
        .find(|&&k| cond1.gamma().values()[k] != cond2.gamma().values()[k])
    {
        return Err(Error::Precondition(format!(
            "conductivities differ on W2 at node {k}"
        )));
    }
    let mismatch = partial_data_mismatch(weights, cond1, cond2, layout, opts)?;
    if mismatch > mismatch_tol {
        return Err(Error::Precondition(format!(
            "W1 -> W2 data differ by {mismatch:e} (relative), above {mismatch_tol:e}"
        )));
    }
    relation_of_solutions_check(weights, cond1, cond2, layout, f, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    /// `⟨(Λ₁ − Λ₂) f, f⟩` from the DN matrices.
    pub lhs: f64,
    /// `B₁(a₁u¹ − a₂u², a₁f) − B₁(m₁ − m₂, a₁f²)`
    pub rhs: f64,
    pub residual: f64,
}

/// Checks the energy decomposition of the DN difference. Requires
/// `γ₁ = γ₂` on the support of `f`.
#[allow(clippy::too_many_arguments)]
pub fn alessandrini_decomposition(
    weights: &KernelWeights,
    cond1: &Conductivity,
    cond2: &Conductivity,
    layout: &RegionLayout,
    dn1: &DnMatrix,
    dn2: &DnMatrix,
    f: &GridFunction,
    opts: &SolveOptions,
) -> Result<DecompositionReport> {
    if let Some(k) = f
        .support()
        .into_iter()
        .find(|&k| cond1.gamma().values()[k] != cond2.gamma().values()[k])
    {
        return Err(Error::Precondition(format!(
            "conductivities differ at data node {k}"
        )));
    }
    let lhs = dn1.difference(dn2)?.pairing(f, f)?;
    let u1 = dirichlet_solve(
        weights,
        &DirichletProblem::conductivity(cond1, layout, f),
        opts,
    )?
    .u;
    let u2 = dirichlet_solve(
        weights,
        &DirichletProblem::conductivity(cond2, layout, f),
        opts,
    )?
    .u;
    let a1 = cond1.sqrt_gamma();
    let v = &a1.hadamard(&u1) - &cond2.sqrt_gamma().hadamard(&u2);
    let dm = cond1.deviation() - cond2.deviation();
    let a1f = a1.hadamard(f);
    let a1f2 = a1f.hadamard(f);
    let rhs = b_one(weights, &v, &a1f)? - b_one(weights, &dm, &a1f2)?;
    Ok(DecompositionReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

/// Given `f` and a cutoff `φ` equal to 1 on `supp f`, returns `g = φ − f`
/// together with `max |f² − g² − (2f − φ²)|`.
pub fn polarization_pair(f: &GridFunction, phi: &GridFunction) -> Result<(GridFunction, f64)> {
    f.spec().ensure_same(phi.spec())?;
    if let Some(k) = f.support().into_iter().find(|&k| phi.values()[k] != 1.0) {
        return Err(Error::Precondition(format!(
            "cutoff is not 1 at data node {k}"
        )));
    }
    let g = phi - f;
    let lhs = &f.hadamard(f) - &g.hadamard(&g);
    let rhs = &(2.0 * f) - &phi.hadamard(phi);
    let residual = lhs.max_abs_diff(&rhs);
    Ok((g, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dnmap::assemble_dn;
    use crate::grid::{AxisBox, GridSpec, RegionBoxes};
    use crate::kernel::FracParams;

    fn setup(n: usize) -> (KernelWeights, RegionLayout) {
        let spec = GridSpec::new(1, 1.0, n).unwrap();
        let w = KernelWeights::build(&spec, &FracParams::new(1, 0.4).unwrap()).unwrap();
        let layout = RegionLayout::new(
            &spec,
            &RegionBoxes {
                omega: AxisBox::interval(-0.5, 0.5),
                w1: Some(AxisBox::interval(-0.9, -0.6)),
                w2: Some(AxisBox::interval(0.6, 0.9)),
                omega_small: None,
            },
        )
        .unwrap();
        (w, layout)
    }

    fn interior_bump(spec: GridSpec, amp: f64) -> Conductivity {
        let m = GridFunction::from_fn(spec, |p| {
            let t = (p[0] / 0.4).powi(2);
            if t < 1.0 {
                amp * (1.0 - t).powi(3)
            } else {
                0.0
            }
        });
        Conductivity::from_deviation(&m).unwrap()
    }

    #[test]
    fn trivial_conductivity_reduces_exactly() {
        let (w, layout) = setup(48);
        let one = Conductivity::one(*w.spec());
        let g = GridFunction::indicator(*w.spec(), layout.w1());
        let rep = reduce(&w, &one, &layout, &g, &SolveOptions::default()).unwrap();
        assert!(rep.correspondence_residual <= 1e-12);
        assert!(rep.identity_residual <= 1e-14);
        assert_eq!(rep.q_form.potential_max_abs, 0.0);
    }

    #[test]
    fn reduction_is_deterministic() {
        let (w, layout) = setup(48);
        let cond = interior_bump(*w.spec(), 0.3);
        let g = GridFunction::indicator(*w.spec(), layout.w2());
        let opts = SolveOptions::default();
        let mut a = reduce(&w, &cond, &layout, &g, &opts).unwrap();
        let mut b = reduce(&w, &cond, &layout, &g, &opts).unwrap();
        assert!(a.correspondence_residual <= 1e-10);
        a.conductivity_solve.wall_time_s = 0.0;
        a.schrodinger_solve.wall_time_s = 0.0;
        b.conductivity_solve.wall_time_s = 0.0;
        b.schrodinger_solve.wall_time_s = 0.0;
        assert_eq!(a, b);
    }

    #[test]
    fn relation_identical_and_hypothesis_failure() {
        let (w, layout) = setup(48);
        let opts = SolveOptions::default();
        let c1 = interior_bump(*w.spec(), 0.3);
        let f = GridFunction::basis(*w.spec(), layout.w1()[2]);
        assert!(relation_of_solutions_check(&w, &c1, &c1, &layout, &f, &opts).unwrap() <= 1e-12);

        let c2 = interior_bump(*w.spec(), -0.3);
        let res = relation_of_solutions_check(&w, &c1, &c2, &layout, &f, &opts).unwrap();
        assert!(res > 1e-3, "{res}");
        let err = checked_relation_of_solutions(&w, &c1, &c2, &layout, &f, 1e-8, &opts);
        assert!(matches!(err, Err(Error::Precondition(_))));

        let outside = GridFunction::basis(*w.spec(), layout.w2()[0]);
        assert!(relation_of_solutions_check(&w, &c1, &c1, &layout, &outside, &opts).is_err());
    }

    #[test]
    fn decomposition_holds_for_interior_perturbation() {
        let (w, layout) = setup(40);
        let opts = SolveOptions::default();
        let c1 = interior_bump(*w.spec(), 0.25);
        let c2 = interior_bump(*w.spec(), -0.15);
        let d1 = assemble_dn(&w, &c1, &layout, &opts).unwrap();
        let d2 = assemble_dn(&w, &c2, &layout, &opts).unwrap();
        let f = GridFunction::from_fn(*w.spec(), |p| {
            if p[0] < -0.6 && p[0] > -0.9 {
                (5.0 * p[0]).sin()
            } else {
                0.0
            }
        });
        let rep = alessandrini_decomposition(&w, &c1, &c2, &layout, &d1, &d2, &f, &opts).unwrap();
        assert!(rep.lhs.abs() > 1e-6);
        assert!(rep.residual <= 1e-10 * (1.0 + rep.lhs.abs()), "{rep:?}");
    }

    #[test]
    fn polarization_identity() {
        let spec = GridSpec::new(1, 1.0, 32).unwrap();
        let phi = GridFunction::from_fn(spec, |p| if p[0].abs() < 0.5 { 1.0 } else { 0.0 });
        let f = GridFunction::from_fn(spec, |p| if p[0].abs() < 0.3 { p[0].cos() } else { 0.0 });
        let (g, r) = polarization_pair(&f, &phi).unwrap();
        assert!(r <= 1e-15);
        assert!(g.max_abs_diff(&(&phi - &f)) == 0.0);
        let wide = GridFunction::constant(spec, 0.5);
        assert!(polarization_pair(&wide, &phi).is_err());
    }
}
