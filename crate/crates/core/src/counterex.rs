//! Counterexample to partial-data uniqueness: γ₁ = (1 + m₁)² with m₁
//! s-harmonic in Ω and vanishing on W₁ ∪ W₂, against γ₂ ≡ 1.
//!
//! Discretely the mechanism is exact: `v = γ₁^{1/2} u¹` solves the γ₂
//! problem whenever `A₁ m₁ = 0` on Ω, so the W₁ → W₂ blocks agree up to
//! solver error.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dnmap::{dn_block_with_responses, gamma_hash, layout_hash, DnMatrix};
use crate::error::{invalid, Error, Result};
use crate::forms::{potential, Conductivity, FormOperator};
use crate::grid::{lattice_gap, GridFunction, GridSpec, Region, RegionLayout};
use crate::kernel::{mollify, KernelWeights};
use crate::linalg::DenseMatrix;
use crate::solve::{dirichlet_solve, DirichletProblem, SolveOptions};

/// Smallest admissible `max_Ω |γ₁ − γ₂|`.
pub const MIN_CONTRAST: f64 = 0.05;
/// Target sup norm of `m₁`.
pub const DEVIATION_BOUND: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffMode {
    /// `η = 1` on ω, supported within `2ε` of ω.
    #[default]
    Tight,
    /// `η = 1` within `2ε` of ω, supported within `3ε`.
    Collar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleParams {
    /// Cutoff length ε (physical units, at least one cell).
    pub epsilon: f64,
    #[serde(default)]
    pub mode: CutoffMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexamplePair {
    pub cond1: Conductivity,
    pub cond2: Conductivity,
    /// `m₁ = γ₁^{1/2} − 1`
    pub m1: GridFunction,
    pub eta: GridFunction,
    pub params: CounterexampleParams,
    /// `c` in `m₁ = c m̃`.
    pub scale: f64,
}

fn dilate(spec: &GridSpec, nodes: &[usize], radius: f64) -> Vec<usize> {
    spec.nodes()
        .filter(|&i| nodes.iter().any(|&j| spec.distance(i, j) <= radius))
        .collect()
}

/// Smooth cutoff around ω for the configured mode.
pub fn cutoff(
    spec: &GridSpec,
    omega_small: &[usize],
    params: &CounterexampleParams,
) -> Result<GridFunction> {
    let eps = params.epsilon;
    if !(eps >= spec.spacing()) {
        return Err(invalid(
            "epsilon",
            format!("must be at least h = {}, got {eps}", spec.spacing()),
        ));
    }
    let (grow, radius, plateau) = match params.mode {
        CutoffMode::Tight => (eps, eps, omega_small.to_vec()),
        CutoffMode::Collar => (2.5 * eps, 0.5 * eps, dilate(spec, omega_small, 2.0 * eps)),
    };
    let mut eta = mollify(
        spec,
        &GridFunction::indicator(*spec, &dilate(spec, omega_small, grow)),
        radius,
    )?;
    // the plateau is 1 mathematically; remove rounding from the stencil sum
    for &i in &plateau {
        eta.values_mut()[i] = 1.0;
    }
    Ok(eta)
}

/// `max_Ω |(A₁ m)_i + q_i m_i| / (‖m‖_∞ · max_i (A₁)_ii)`, 0 for `m ≡ 0`.
fn weak_residual(
    weights: &KernelWeights,
    layout: &RegionLayout,
    m: &GridFunction,
    q: Option<&GridFunction>,
) -> f64 {
    let scale = m.linf_norm();
    if scale == 0.0 {
        return 0.0;
    }
    let op = FormOperator::fractional(weights);
    let omega = layout.omega();
    let am = op.apply_block(
        omega,
        &m.support(),
        &m.support()
            .iter()
            .map(|&k| m.values()[k])
            .collect::<Vec<_>>(),
    );
    let diag_max = (0..op.len()).map(|i| op.entry(i, i)).fold(0.0, f64::max);
    omega
        .iter()
        .zip(&am)
        .map(|(&i, a)| (a + q.map_or(0.0, |q| q.values()[i] * m.values()[i])).abs())
        .fold(0.0, f64::max)
        / (scale * diag_max)
}

/// Builds the pair. ω is the layout's `omega_small` region.
pub fn build_counterexample(
    weights: &KernelWeights,
    layout: &RegionLayout,
    params: &CounterexampleParams,
    opts: &SolveOptions,
) -> Result<CounterexamplePair> {
    let spec = *weights.spec();
    spec.ensure_same(layout.spec())?;
    let omega_small = layout.require(Region::OmegaSmall)?;
    layout.require(Region::W1)?;
    layout.require(Region::W2)?;

    let eta = cutoff(&spec, omega_small, params)?;
    let support = eta.support();
    if let Some(&k) = support.iter().find(|&&k| layout.is_omega(k)) {
        return Err(Error::SupportViolation {
            node: k,
            region: "cutoff reaches into omega",
        });
    }
    if let Some(&k) = support.iter().find(|&&k| spec.is_ring(k)) {
        return Err(Error::SupportViolation {
            node: k,
            region: "cutoff reaches the outermost ring",
        });
    }
    let windows: Vec<usize> = layout.w1().iter().chain(layout.w2()).copied().collect();
    let gap = lattice_gap(&spec, &support, &windows);
    if gap < 1 {
        return Err(Error::InsufficientGap {
            a: "cutoff",
            b: "W1 ∪ W2",
            gap,
            required: 1,
        });
    }

    let one = Conductivity::one(spec);
    let harmonic = dirichlet_solve(
        weights,
        &DirichletProblem::conductivity(&one, layout, &eta),
        opts,
    )?
    .u;
    let scale = DEVIATION_BOUND / harmonic.linf_norm();
    let m1 = scale * &harmonic;
    let pair = CounterexamplePair {
        cond1: Conductivity::from_deviation(&m1)?,
        cond2: one,
        m1,
        eta,
        params: *params,
        scale,
    };
    let contrast = pair.contrast(layout);
    if contrast < MIN_CONTRAST {
        return Err(Error::Precondition(format!(
            "max over omega of |γ1 − γ2| is {contrast:.4}, below {MIN_CONTRAST}; move ω closer to Ω"
        )));
    }
    Ok(pair)
}

impl CounterexamplePair {
    /// `max_Ω |γ₁ − γ₂|`
    pub fn contrast(&self, layout: &RegionLayout) -> f64 {
        layout
            .omega()
            .iter()
            .map(|&i| (self.cond1.gamma().values()[i] - self.cond2.gamma().values()[i]).abs())
            .fold(0.0, f64::max)
    }

    /// Same pair with `m₁` replaced, e.g. to break s-harmonicity.
    pub fn with_deviation(&self, m1: GridFunction) -> Result<Self> {
        Ok(Self {
            cond1: Conductivity::from_deviation(&m1)?,
            m1,
            ..self.clone()
        })
    }

    /// Interior residual of `(−Δ)^s m₁ = 0` in Ω, normalized as in
    /// [`invariance_of_data_residual`].
    pub fn harmonic_residual(&self, weights: &KernelWeights, layout: &RegionLayout) -> f64 {
        weak_residual(weights, layout, &self.m1, None)
    }
}

/// Normalized weak residual of `(−Δ)^s m + q_{γ₂} m = 0` in Ω for
/// `m = m₁ − m₂`.
pub fn invariance_of_data_residual(
    pair: &CounterexamplePair,
    weights: &KernelWeights,
    layout: &RegionLayout,
) -> Result<f64> {
    let m = pair.cond1.deviation() - pair.cond2.deviation();
    let q = if pair.cond2.is_one() {
        None
    } else {
        Some(potential(weights, &pair.cond2)?)
    };
    Ok(weak_residual(weights, layout, &m, q.as_ref()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonuniquenessReport {
    /// Relative max-norm of the W₁ → W₂ block difference.
    pub r_dn: f64,
    /// `max_f ‖γ₁^{1/2} u¹_f − γ₂^{1/2} u²_f‖_∞` over the W₁ nodal basis.
    pub r_sol: f64,
    /// `max_Ω |γ₁ − γ₂|`
    pub d_gamma: f64,
    /// Max-norm of the W₁ → W₁ block difference.
    pub same_window_diff: f64,
    /// The same, relative to `‖Λ₁|_{W₁→W₁}‖_max`.
    pub same_window_relative: f64,
    pub harmonic_residual: f64,
    pub tol: f64,
    pub passed: bool,
}

struct PairData {
    dn: DnMatrix,
    responses: DenseMatrix,
}

fn pair_data(
    weights: &KernelWeights,
    cond: &Conductivity,
    layout: &RegionLayout,
    targets: &[usize],
    opts: &SolveOptions,
) -> Result<PairData> {
    let w1 = layout.w1();
    let op = FormOperator::conductivity(weights, cond)?;
    let (data, responses) = dn_block_with_responses(op, layout, w1, targets, opts)?;
    Ok(PairData {
        dn: DnMatrix::from_parts(
            *weights.spec(),
            weights.s(),
            targets,
            w1,
            data,
            layout_hash(layout),
            gamma_hash(cond),
        )?,
        responses,
    })
}

/// Assembles the W₁ → (W₁ ∪ W₂) data of both conductivities and checks
/// agreement on W₂ together with the relation of solutions.
pub fn verify_nonuniqueness(
    pair: &CounterexamplePair,
    weights: &KernelWeights,
    layout: &RegionLayout,
    opts: &SolveOptions,
) -> Result<NonuniquenessReport> {
    let w1 = layout.require(Region::W1)?;
    let w2 = layout.require(Region::W2)?;
    let targets: Vec<usize> = w1.iter().chain(w2).copied().collect();
    let p1 = pair_data(weights, &pair.cond1, layout, &targets, opts)?;
    let p2 = pair_data(weights, &pair.cond2, layout, &targets, opts)?;

    let cross = |d: &DnMatrix| d.restrict(w1, w2);
    let same = |d: &DnMatrix| d.restrict(w1, w1);
    let relative = |a: &DnMatrix, b: &DnMatrix| -> Result<(f64, f64)> {
        let diff = a.difference(b)?.max_abs();
        Ok((diff, diff / a.max_abs()))
    };
    let (_, r_dn) = relative(&cross(&p1.dn)?, &cross(&p2.dn)?)?;
    let (same_window_diff, same_window_relative) = relative(&same(&p1.dn)?, &same(&p2.dn)?)?;

    // γ₁^{1/2} u¹_f − γ₂^{1/2} u²_f: Ω part from the responses, exterior
    // part only at the source node
    let a1 = pair.cond1.sqrt_gamma().values();
    let a2 = pair.cond2.sqrt_gamma().values();
    let omega = layout.omega();
    let mut r_sol: f64 = 0.0;
    for (c, &k) in w1.iter().enumerate() {
        r_sol = r_sol.max((a1[k] - a2[k]).abs());
        for (r, &i) in omega.iter().enumerate() {
            r_sol = r_sol.max((a1[i] * p1.responses[(r, c)] - a2[i] * p2.responses[(r, c)]).abs());
        }
    }

    let d_gamma = pair.contrast(layout);
    let bound = 100.0 * opts.tol;
    Ok(NonuniquenessReport {
        r_dn,
        r_sol,
        d_gamma,
        same_window_diff,
        same_window_relative,
        harmonic_residual: pair.harmonic_residual(weights, layout),
        tol: opts.tol,
        passed: r_dn <= bound && r_sol <= bound && d_gamma >= MIN_CONTRAST,
    })
}

/// Replayable snapshot of a pair and its verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleRecord {
    pub spec: GridSpec,
    pub s: f64,
    pub params: CounterexampleParams,
    pub scale: f64,
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub m1: Vec<f64>,
    pub report: Option<NonuniquenessReport>,
}

impl CounterexampleRecord {
    pub fn new(
        pair: &CounterexamplePair,
        weights: &KernelWeights,
        report: Option<NonuniquenessReport>,
    ) -> Self {
        Self {
            spec: *weights.spec(),
            s: weights.s(),
            params: pair.params,
            scale: pair.scale,
            gamma1: pair.cond1.gamma().values().to_vec(),
            gamma2: pair.cond2.gamma().values().to_vec(),
            m1: pair.m1.values().to_vec(),
            report,
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }

    /// Rebuilds the conductivities from the stored values.
    pub fn conductivities(&self) -> Result<(Conductivity, Conductivity)> {
        Ok((
            Conductivity::new(GridFunction::new(self.spec, self.gamma1.clone())?)?,
            Conductivity::new(GridFunction::new(self.spec, self.gamma2.clone())?)?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{AxisBox, RegionBoxes};
    use crate::kernel::FracParams;

    fn setup(n: usize, s: f64) -> (KernelWeights, RegionLayout) {
        let spec = GridSpec::new(1, 1.0, n).unwrap();
        let w = KernelWeights::build(&spec, &FracParams::new(1, s).unwrap()).unwrap();
        let layout = RegionLayout::new(
            &spec,
            &RegionBoxes {
                omega: AxisBox::interval(-0.5, 0.5),
                w1: Some(AxisBox::interval(-0.95, -0.75)),
                w2: Some(AxisBox::interval(0.75, 0.95)),
                omega_small: Some(AxisBox::interval(0.57, 0.63)),
            },
        )
        .unwrap();
        (w, layout)
    }

    fn params(w: &KernelWeights) -> CounterexampleParams {
        CounterexampleParams {
            epsilon: 1.5 * w.spec().spacing(),
            mode: CutoffMode::Tight,
        }
    }

    #[test]
    fn construction_invariants() {
        let (w, layout) = setup(64, 0.3);
        let pair =
            build_counterexample(&w, &layout, &params(&w), &SolveOptions::default()).unwrap();
        assert!((pair.m1.linf_norm() - 0.5).abs() <= 1e-15);
        for &k in layout.w1().iter().chain(layout.w2()) {
            assert_eq!(pair.cond1.gamma().values()[k], 1.0);
        }
        assert!(pair.harmonic_residual(&w, &layout) <= 1e-10);
        assert!(pair.contrast(&layout) >= MIN_CONTRAST);
        for &g in pair.cond1.gamma().values() {
            assert!((0.25..=2.25).contains(&g));
        }
        for &k in layout.omega_small() {
            assert_eq!(pair.eta.values()[k], 1.0);
        }
    }

    #[test]
    fn invariance_residual_cases() {
        let (w, layout) = setup(64, 0.3);
        let pair =
            build_counterexample(&w, &layout, &params(&w), &SolveOptions::default()).unwrap();
        assert!(invariance_of_data_residual(&pair, &w, &layout).unwrap() <= 1e-10);
        let mut m = pair.m1.clone();
        m.values_mut()[layout.omega()[10]] += 0.01;
        let bumped = pair.with_deviation(m).unwrap();
        assert!(invariance_of_data_residual(&bumped, &w, &layout).unwrap() > 1e-4);
        let trivial = pair.with_deviation(GridFunction::zeros(*w.spec())).unwrap();
        assert_eq!(
            invariance_of_data_residual(&trivial, &w, &layout).unwrap(),
            0.0
        );
    }

    #[test]
    fn rejects_cutoff_touching_window() {
        let (w, layout) = setup(64, 0.3);
        let wide = CounterexampleParams {
            epsilon: 0.06,
            mode: CutoffMode::Collar,
        };
        assert!(build_counterexample(&w, &layout, &wide, &SolveOptions::default()).is_err());
        let tiny = CounterexampleParams {
            epsilon: 0.5 * w.spec().spacing(),
            mode: CutoffMode::Tight,
        };
        assert!(build_counterexample(&w, &layout, &tiny, &SolveOptions::default()).is_err());
    }

    #[test]
    fn record_round_trip() {
        let (w, layout) = setup(64, 0.3);
        let pair =
            build_counterexample(&w, &layout, &params(&w), &SolveOptions::default()).unwrap();
        let rec = CounterexampleRecord::new(&pair, &w, None);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pair.json");
        rec.write_json(&path).unwrap();
        let back = CounterexampleRecord::read_json(&path).unwrap();
        assert_eq!(back, rec);
        let (c1, c2) = back.conductivities().unwrap();
        assert_eq!(c1.gamma(), pair.cond1.gamma());
        assert!(c2.is_one());
    }
}
