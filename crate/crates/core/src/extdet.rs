//! Exterior determination: concentrating bumps in a window, the pointwise
//! trace `⟨Λ_γ φ_N, φ_N⟩ → γ(x₀)`, and the stability comparison.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dnmap::{dn_operator_norm, DnMatrix};
use crate::error::{invalid, Error, Result};
use crate::forms::{b_one, energy, Conductivity};
use crate::grid::GridFunction;
use crate::kernel::KernelWeights;

/// Smallest admissible radius in cells.
pub const MIN_RADIUS_CELLS: f64 = 4.0;

/// Bumps `φ_N = c_N exp(−1/(1 − |x−x₀|²/r_N²))` with `r_N = r₀ 2^{−N}`,
/// each scaled so that `‖φ_N‖²_{L²} + B₁(φ_N, φ_N) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentratingSequence {
    center: usize,
    radii: Vec<f64>,
    bumps: Vec<GridFunction>,
}

/// `exp(−1/(1 − t))` for `t = |x−x₀|²/r² < 1`, zero otherwise.
fn profile(t: f64) -> f64 {
    if t < 1.0 {
        (-1.0 / (1.0 - t)).exp()
    } else {
        0.0
    }
}

/// Builds `φ_0, …, φ_{n_max}` centred at node `center`. Every node of the
/// ball of radius `r0` must lie in `window`.
pub fn build_sequence(
    weights: &KernelWeights,
    window: &[usize],
    center: usize,
    r0: f64,
    n_max: usize,
) -> Result<ConcentratingSequence> {
    let spec = *weights.spec();
    if center >= spec.len() || !window.contains(&center) {
        return Err(invalid("center", "must be a node of the window"));
    }
    if !(r0 > 0.0) {
        return Err(invalid("r0", format!("must be positive, got {r0}")));
    }
    let finest = r0 / 2f64.powi(n_max as i32);
    if finest < MIN_RADIUS_CELLS * spec.spacing() {
        return Err(invalid(
            "n_max",
            format!(
                "finest radius {finest} is below {MIN_RADIUS_CELLS} cells (h = {})",
                spec.spacing()
            ),
        ));
    }
    if let Some(k) = spec
        .nodes()
        .find(|&i| spec.distance(i, center) < r0 && !window.contains(&i))
    {
        return Err(Error::SupportViolation {
            node: k,
            region: "ball escapes the window",
        });
    }
    let radii: Vec<f64> = (0..=n_max).map(|n| r0 / 2f64.powi(n as i32)).collect();
    let bumps = radii
        .par_iter()
        .map(|&r| {
            let psi = GridFunction::new(
                spec,
                spec.nodes()
                    .map(|i| profile((spec.distance(i, center) / r).powi(2)))
                    .collect(),
            )?;
            let norm2 = psi.l2_norm().powi(2) + b_one(weights, &psi, &psi)?;
            Ok((1.0 / norm2.sqrt()) * &psi)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConcentratingSequence {
        center,
        radii,
        bumps,
    })
}

impl ConcentratingSequence {
    pub fn center(&self) -> usize {
        self.center
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn bumps(&self) -> &[GridFunction] {
        &self.bumps
    }

    pub fn len(&self) -> usize {
        self.bumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bumps.is_empty()
    }
}

/// `g_N = ⟨Λ_γ φ_N, φ_N⟩` for every member of the sequence.
pub fn reconstruct_point(dn: &DnMatrix, seq: &ConcentratingSequence) -> Result<Vec<f64>> {
    seq.bumps.iter().map(|phi| dn.pairing(phi, phi)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub level: usize,
    pub radius: f64,
    pub value: f64,
    /// `E_γ(φ_N)`
    pub energy: f64,
    pub gamma_x0: f64,
}

/// Reconstruction trace together with the energies `E_γ(φ_N)`.
pub fn reconstruction_trace(
    dn: &DnMatrix,
    seq: &ConcentratingSequence,
    weights: &KernelWeights,
    cond: &Conductivity,
) -> Result<Vec<TraceRow>> {
    let values = reconstruct_point(dn, seq)?;
    let gamma_x0 = cond.gamma().values()[seq.center];
    seq.bumps
        .iter()
        .zip(&values)
        .enumerate()
        .map(|(level, (phi, &value))| {
            Ok(TraceRow {
                level,
                radius: seq.radii[level],
                value,
                energy: energy(weights, cond, phi)?,
                gamma_x0,
            })
        })
        .collect()
}

pub fn write_trace_csv(rows: &[TraceRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `max_W |γ₁ − γ₂|`
    pub lhs: f64,
    /// `2^s ‖Λ₁ − Λ₂‖_{X→X*}`
    pub rhs: f64,
    pub holds: bool,
}

/// Slack allowed in [`stability_compare`].
pub const STABILITY_SLACK: f64 = 0.05;

/// Compares `max_W |γ₁ − γ₂|` with `2^s ‖Λ₁ − Λ₂‖` on the common window of
/// two square DN matrices.
pub fn stability_compare(
    dn1: &DnMatrix,
    dn2: &DnMatrix,
    cond1: &Conductivity,
    cond2: &Conductivity,
    weights: &KernelWeights,
) -> Result<StabilityReport> {
    if dn1.rows() != dn1.cols() {
        return Err(Error::Precondition(
            "stability needs a square DN window".into(),
        ));
    }
    let diff = dn1.difference(dn2)?;
    let lhs = dn1
        .rows()
        .iter()
        .map(|&k| (cond1.gamma().values()[k] - cond2.gamma().values()[k]).abs())
        .fold(0.0, f64::max);
    let rhs = 2f64.powf(weights.s()) * dn_operator_norm(&diff, weights)?;
    Ok(StabilityReport {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + STABILITY_SLACK),
    })
}
