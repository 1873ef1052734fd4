//! Conductivities and the nonlocal bilinear forms built on [`KernelWeights`].
//!
//! With `a = γ^{1/2}` the conductivity form is
//!
//! ```text
//! B_γ(u, v) = Σ_{i<j} 2 w_ij a_i a_j (u_i − u_j)(v_i − v_j) + Σ_i τ_i a_i u_i v_i
//! ```
//!
//! where the tail term assumes `γ ≡ 1` and `u ≡ 0` outside the box. `B₁` is
//! the same form with `a ≡ 1`. The potential form is
//! `Q_γ(a, b) = −B₁(m, γ^{−1/2} a b)` and the Schrödinger form is `B₁ + Q_γ`.
//! All products are nodal, which makes the reduction identity
//! `B_γ(u, φ) = B₁(a u, a φ) + Q_γ(a u, a φ)` hold pair by pair.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::kernel::KernelWeights;
use crate::linalg::DenseMatrix;

/// Tolerance for the unit frame on the outermost cell ring.
const FRAME_TOL: f64 = 1e-12;

/// Nodal conductivity with its derived fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conductivity {
    gamma: GridFunction,
    sqrt_gamma: GridFunction,
    inv_sqrt_gamma: GridFunction,
    m: GridFunction,
    gamma0: f64,
    gamma_max: f64,
}

impl Conductivity {
    /// Validates positivity and the unit frame on the outermost ring.
    pub fn new(gamma: GridFunction) -> Result<Self> {
        let spec = *gamma.spec();
        if let Some(node) = spec
            .nodes()
            .find(|&i| spec.is_ring(i) && (gamma.values()[i] - 1.0).abs() > FRAME_TOL)
        {
            return Err(Error::UnframedConductivity {
                node,
                value: gamma.values()[node],
            });
        }
        Self::new_unframed(gamma)
    }

    /// Skips the unit-frame check. Only meaningful together with tail-free
    /// weights (see [`KernelWeights::without_tail`]).
    pub fn new_unframed(gamma: GridFunction) -> Result<Self> {
        if let Some(node) = gamma.values().iter().position(|&g| !(g > 0.0)) {
            return Err(Error::NonPositiveConductivity {
                node,
                value: gamma.values()[node],
            });
        }
        let sqrt_gamma = gamma.map(f64::sqrt);
        Ok(Self::assemble(gamma, sqrt_gamma))
    }

    /// `γ = (1 + m)²` from a background deviation with `1 + m > 0`.
    pub fn from_deviation(m: &GridFunction) -> Result<Self> {
        let sqrt_gamma = m.map(|v| 1.0 + v);
        let gamma = sqrt_gamma.map(|a| a * a);
        if let Some(node) = sqrt_gamma.values().iter().position(|&a| !(a > 0.0)) {
            return Err(Error::NonPositiveConductivity {
                node,
                value: gamma.values()[node],
            });
        }
        let c = Self::assemble(gamma, sqrt_gamma);
        Self::new(c.gamma.clone())?;
        Ok(c)
    }

    pub fn one(spec: GridSpec) -> Self {
        Self::assemble(
            GridFunction::constant(spec, 1.0),
            GridFunction::constant(spec, 1.0),
        )
    }

    fn assemble(gamma: GridFunction, sqrt_gamma: GridFunction) -> Self {
        let inv_sqrt_gamma = sqrt_gamma.map(|a| 1.0 / a);
        let m = sqrt_gamma.map(|a| a - 1.0);
        let gamma0 = gamma.values().iter().copied().fold(f64::INFINITY, f64::min);
        let gamma_max = gamma.values().iter().copied().fold(0.0, f64::max);
        Self {
            gamma,
            sqrt_gamma,
            inv_sqrt_gamma,
            m,
            gamma0,
            gamma_max,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        self.gamma.spec()
    }

    pub fn gamma(&self) -> &GridFunction {
        &self.gamma
    }

    pub fn sqrt_gamma(&self) -> &GridFunction {
        &self.sqrt_gamma
    }

    pub fn inv_sqrt_gamma(&self) -> &GridFunction {
        &self.inv_sqrt_gamma
    }

    /// Background deviation `m = γ^{1/2} − 1`.
    pub fn deviation(&self) -> &GridFunction {
        &self.m
    }

    /// Certified lower bound (the nodal minimum).
    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn gamma_max(&self) -> f64 {
        self.gamma_max
    }

    pub fn is_one(&self) -> bool {
        self.m.values().iter().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    /// `B_γ`
    Conductivity,
    /// `B₁`
    Fractional,
    /// `B₁ + Q_γ`, or `B₁` plus an explicit nodal potential.
    Schrodinger,
}

/// Matrix-free view of one form: `B(u, v) = uᵀ A v` with
/// `A_ij = −2 w_ij a_i a_j` off the diagonal.
#[derive(Debug, Clone)]
pub struct FormOperator<'w> {
    weights: &'w KernelWeights,
    kind: FormKind,
    coeff: Option<Vec<f64>>,
    diag: Vec<f64>,
}

impl<'w> FormOperator<'w> {
    pub fn conductivity(weights: &'w KernelWeights, cond: &Conductivity) -> Result<Self> {
        weights.spec().ensure_same(cond.spec())?;
        let a = cond.sqrt_gamma().values().to_vec();
        let spec = *weights.spec();
        let diag = (0..spec.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for (j, aj) in a.iter().enumerate() {
                    acc += 2.0 * weights.pair(i, j) * aj;
                }
                a[i] * acc + weights.tau()[i] * a[i]
            })
            .collect();
        Ok(Self {
            weights,
            kind: FormKind::Conductivity,
            coeff: Some(a),
            diag,
        })
    }

    pub fn fractional(weights: &'w KernelWeights) -> Self {
        let diag = weights
            .row_sums()
            .iter()
            .zip(weights.tau())
            .map(|(r, t)| r + t)
            .collect();
        Self {
            weights,
            kind: FormKind::Fractional,
            coeff: None,
            diag,
        }
    }

    /// `B₁ + Q_γ`, i.e. `B₁` plus the nodal potential of [`potential`].
    pub fn schrodinger(weights: &'w KernelWeights, cond: &Conductivity) -> Result<Self> {
        let q = potential(weights, cond)?;
        Ok(Self::with_potential(weights, q.values()))
    }

    /// `B₁(u, v) + Σ_i q_i u_i v_i` for an arbitrary nodal potential.
    pub fn with_potential(weights: &'w KernelWeights, q: &[f64]) -> Self {
        let mut op = Self::fractional(weights);
        assert_eq!(q.len(), op.diag.len());
        for (d, qi) in op.diag.iter_mut().zip(q) {
            *d += qi;
        }
        op.kind = FormKind::Schrodinger;
        op
    }

    pub fn kind(&self) -> FormKind {
        self.kind
    }

    pub fn weights(&self) -> &KernelWeights {
        self.weights
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        let w = -2.0 * self.weights.pair(i, j);
        match &self.coeff {
            Some(a) => w * a[i] * a[j],
            None => w,
        }
    }

    /// `(A x)_r` for `r ∈ rows`, with `x` given on the node list `cols`.
    pub fn apply_block(&self, rows: &[usize], cols: &[usize], x: &[f64]) -> Vec<f64> {
        assert_eq!(cols.len(), x.len());
        rows.par_iter()
            .map(|&i| {
                cols.iter()
                    .zip(x)
                    .map(|(&j, xj)| self.entry(i, j) * xj)
                    .sum()
            })
            .collect()
    }

    /// Full matrix-vector product over all nodes.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.apply_block(&all, &all, x)
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DenseMatrix {
        DenseMatrix::from_fn(rows.len(), cols.len(), |r, c| self.entry(rows[r], cols[c]))
    }

    /// `uᵀ A v` through the matrix. The pair-sum routes below are the
    /// reference evaluations; this one exists for cross-checks.
    pub fn bilinear(&self, u: &GridFunction, v: &GridFunction) -> f64 {
        let au = self.apply(u.values());
        au.iter().zip(v.values()).map(|(a, b)| a * b).sum()
    }
}

/// Pair-sum evaluation shared by all forms; `coeff = None` means `a ≡ 1`.
fn pair_form(weights: &KernelWeights, coeff: Option<&[f64]>, u: &[f64], v: &[f64]) -> f64 {
    let n = u.len();
    let a = |i: usize| coeff.map_or(1.0, |c| c[i]);
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ai = a(i);
            let mut acc = weights.tau()[i] * ai * u[i] * v[i];
            for j in (i + 1)..n {
                acc += 2.0 * weights.pair(i, j) * ai * a(j) * (u[i] - u[j]) * (v[i] - v[j]);
            }
            acc
        })
        .collect();
    // fixed summation order, independent of the thread count
    rows.iter().sum()
}

fn check_grids(weights: &KernelWeights, fs: &[&GridFunction]) -> Result<()> {
    for f in fs {
        weights.spec().ensure_same(f.spec())?;
    }
    Ok(())
}

/// `B_γ(u, v)`
pub fn b_gamma(
    weights: &KernelWeights,
    cond: &Conductivity,
    u: &GridFunction,
    v: &GridFunction,
) -> Result<f64> {
    check_grids(weights, &[cond.gamma(), u, v])?;
    Ok(pair_form(
        weights,
        Some(cond.sqrt_gamma().values()),
        u.values(),
        v.values(),
    ))
}

/// `B₁(u, v)`, the discrete `⟨(−Δ)^{s/2} u, (−Δ)^{s/2} v⟩`.
pub fn b_one(weights: &KernelWeights, u: &GridFunction, v: &GridFunction) -> Result<f64> {
    check_grids(weights, &[u, v])?;
    Ok(pair_form(weights, None, u.values(), v.values()))
}

/// `Q_γ(a, b) = −B₁(m, ψ)` with `ψ = γ^{−1/2} a b`.
pub fn q_form(
    weights: &KernelWeights,
    cond: &Conductivity,
    a: &GridFunction,
    b: &GridFunction,
) -> Result<f64> {
    check_grids(weights, &[cond.gamma(), a, b])?;
    let psi = cond.inv_sqrt_gamma().hadamard(a).hadamard(b);
    Ok(-pair_form(
        weights,
        None,
        cond.deviation().values(),
        psi.values(),
    ))
}

/// `B_q(a, b) = B₁(a, b) + Q_γ(a, b)`
pub fn schrodinger_form(
    weights: &KernelWeights,
    cond: &Conductivity,
    a: &GridFunction,
    b: &GridFunction,
) -> Result<f64> {
    Ok(b_one(weights, a, b)? + q_form(weights, cond, a, b)?)
}

/// `E_γ(u) = B_γ(u, u)`
pub fn energy(weights: &KernelWeights, cond: &Conductivity, u: &GridFunction) -> Result<f64> {
    b_gamma(weights, cond, u, u)
}

/// Nodal potential `q_i = −(A₁ m)_i / γ_i^{1/2}`, where `A₁` is the matrix
/// of `B₁`; then `Q_γ(a, b) = Σ_i q_i a_i b_i`.
pub fn potential(weights: &KernelWeights, cond: &Conductivity) -> Result<GridFunction> {
    weights.spec().ensure_same(cond.spec())?;
    let a1m = FormOperator::fractional(weights).apply(cond.deviation().values());
    let q = a1m
        .iter()
        .zip(cond.inv_sqrt_gamma().values())
        .map(|(am, inv)| -am * inv)
        .collect();
    GridFunction::new(*weights.spec(), q)
}

/// Relative defect of the reduction identity
/// `|B_γ(u,φ) − B₁(a u, a φ) − Q_γ(a u, a φ)| / (1 + |B_γ(u,φ)|)`, `a = γ^{1/2}`.
pub fn liouville_residual(
    weights: &KernelWeights,
    cond: &Conductivity,
    u: &GridFunction,
    phi: &GridFunction,
) -> Result<f64> {
    let lhs = b_gamma(weights, cond, u, phi)?;
    let au = cond.sqrt_gamma().hadamard(u);
    let aphi = cond.sqrt_gamma().hadamard(phi);
    let rhs = b_one(weights, &au, &aphi)? + q_form(weights, cond, &au, &aphi)?;
    Ok((lhs - rhs).abs() / (1.0 + lhs.abs()))
}
