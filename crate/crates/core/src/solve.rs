//! Exterior-value Dirichlet problems for the conductivity and Schrödinger
//! forms, the interior energy estimate, and the discrete Poincaré constant.
//!
//! Exterior values are imposed nodally: `u = f` on every node outside Ω and
//! the Ω values solve `A_ΩΩ u_Ω = −A_Ω,ext f_ext`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::forms::{b_one, Conductivity, FormKind, FormOperator};
use crate::grid::{lattice_gap, GridFunction, RegionLayout};
use crate::kernel::KernelWeights;
use crate::linalg::{conjugate_gradient, norm2, power_iteration, Cholesky, DenseMatrix};

/// Above this many unknowns the solver switches from Cholesky to CG.
pub const CHOLESKY_LIMIT: usize = 5000;
pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    /// Cholesky up to [`CHOLESKY_LIMIT`] unknowns, CG above.
    #[default]
    Auto,
    Cholesky,
    ConjugateGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub method: SolverMethod,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            method: SolverMethod::Auto,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn method(mut self, method: SolverMethod) -> Self {
        self.method = method;
        self
    }
}

/// One exterior-value problem.
#[derive(Debug, Clone, Copy)]
pub struct DirichletProblem<'a> {
    pub form: FormKind,
    pub cond: &'a Conductivity,
    pub layout: &'a RegionLayout,
    pub exterior: &'a GridFunction,
}

impl<'a> DirichletProblem<'a> {
    pub fn conductivity(
        cond: &'a Conductivity,
        layout: &'a RegionLayout,
        exterior: &'a GridFunction,
    ) -> Self {
        Self {
            form: FormKind::Conductivity,
            cond,
            layout,
            exterior,
        }
    }

    pub fn schrodinger(
        cond: &'a Conductivity,
        layout: &'a RegionLayout,
        exterior: &'a GridFunction,
    ) -> Self {
        Self {
            form: FormKind::Schrodinger,
            cond,
            layout,
            exterior,
        }
    }

    fn operator<'w>(&self, weights: &'w KernelWeights) -> Result<FormOperator<'w>> {
        match self.form {
            FormKind::Conductivity => FormOperator::conductivity(weights, self.cond),
            FormKind::Fractional => Ok(FormOperator::fractional(weights)),
            FormKind::Schrodinger => FormOperator::schrodinger(weights, self.cond),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsedMethod {
    Cholesky,
    ConjugateGradient,
}

/// Per-solve record, serialized as one JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub method: UsedMethod,
    pub unknowns: usize,
    pub iterations: usize,
    pub relative_residual: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub u: GridFunction,
    pub diagnostics: SolveDiagnostics,
}

/// Interior block of one form on one layout, factored once and reused for
/// many exterior data.
pub struct InteriorSystem<'w> {
    op: FormOperator<'w>,
    omega: Vec<usize>,
    method: UsedMethod,
    factor: Option<Cholesky>,
    tol: f64,
}

impl<'w> InteriorSystem<'w> {
    pub fn new(op: FormOperator<'w>, layout: &RegionLayout, opts: &SolveOptions) -> Result<Self> {
        op.weights().spec().ensure_same(layout.spec())?;
        if !(opts.tol > 0.0) {
            return Err(invalid(
                "tol",
                format!("must be positive, got {}", opts.tol),
            ));
        }
        let omega = layout.require(crate::grid::Region::Omega)?.to_vec();
        let method = match opts.method {
            SolverMethod::Cholesky => UsedMethod::Cholesky,
            SolverMethod::ConjugateGradient => UsedMethod::ConjugateGradient,
            SolverMethod::Auto if omega.len() <= CHOLESKY_LIMIT => UsedMethod::Cholesky,
            SolverMethod::Auto => UsedMethod::ConjugateGradient,
        };
        let factor = match method {
            UsedMethod::Cholesky => Some(Cholesky::factor(&op.submatrix(&omega, &omega))?),
            UsedMethod::ConjugateGradient => None,
        };
        Ok(Self {
            op,
            omega,
            method,
            factor,
            tol: opts.tol,
        })
    }

    pub fn operator(&self) -> &FormOperator<'w> {
        &self.op
    }

    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    /// Interior values of the solutions for unit data at each node of
    /// `sources`, as the columns of an `|Ω| × |sources|` matrix.
    pub fn responses(&self, sources: &[usize]) -> Result<DenseMatrix> {
        if let Some(&node) = sources.iter().find(|&&k| self.omega.contains(&k)) {
            return Err(Error::SupportViolation {
                node,
                region: "exterior",
            });
        }
        let coupling = self.op.submatrix(&self.omega, sources);
        let columns: Vec<Result<Vec<f64>>> = (0..sources.len())
            .into_par_iter()
            .map(|c| {
                let rhs: Vec<f64> = (0..self.omega.len()).map(|r| -coupling[(r, c)]).collect();
                match &self.factor {
                    Some(chol) => Ok(chol.solve(&rhs)),
                    None => {
                        let mut x = vec![0.0; rhs.len()];
                        let max_iter = (20.0 * (rhs.len() as f64).sqrt()).ceil() as usize;
                        conjugate_gradient(
                            |v| self.op.apply_block(&self.omega, &self.omega, v),
                            &rhs,
                            &mut x,
                            self.tol,
                            max_iter,
                        )?;
                        Ok(x)
                    }
                }
            })
            .collect();
        let mut out = DenseMatrix::zeros(self.omega.len(), sources.len());
        for (c, col) in columns.into_iter().enumerate() {
            for (r, v) in col?.into_iter().enumerate() {
                out[(r, c)] = v;
            }
        }
        Ok(out)
    }

    /// Solves with exterior data `f` (which must vanish on Ω). `guess` gives
    /// the CG starting values on Ω nodes; the direct path ignores it.
    pub fn solve(&self, f: &GridFunction, guess: Option<&[f64]>) -> Result<Solution> {
        let start = Instant::now();
        let spec = *self.op.weights().spec();
        spec.ensure_same(f.spec())?;
        if let Some(&node) = self.omega.iter().find(|&&i| f.values()[i] != 0.0) {
            return Err(Error::SupportViolation {
                node,
                region: "exterior",
            });
        }
        let support = f.support();
        let fvals: Vec<f64> = support.iter().map(|&i| f.values()[i]).collect();
        let coupling = self.op.apply_block(&self.omega, &support, &fvals);
        let rhs: Vec<f64> = coupling.iter().map(|v| -v).collect();

        let (x, iterations) = match self.method {
            UsedMethod::Cholesky => (self.factor.as_ref().unwrap().solve(&rhs), 0),
            UsedMethod::ConjugateGradient => {
                let mut x = match guess {
                    Some(g) => {
                        if g.len() != self.omega.len() {
                            return Err(invalid(
                                "guess",
                                "length must match the number of Ω nodes",
                            ));
                        }
                        g.to_vec()
                    }
                    None => vec![0.0; self.omega.len()],
                };
                let max_iter = (20.0 * (self.omega.len() as f64).sqrt()).ceil() as usize;
                let out = conjugate_gradient(
                    |v| self.op.apply_block(&self.omega, &self.omega, v),
                    &rhs,
                    &mut x,
                    self.tol,
                    max_iter,
                )?;
                (x, out.iterations)
            }
        };

        let ax = self.op.apply_block(&self.omega, &self.omega, &x);
        let scale = norm2(&coupling);
        let residual: Vec<f64> = ax.iter().zip(&coupling).map(|(a, c)| a + c).collect();
        let relative_residual = if scale == 0.0 {
            norm2(&residual)
        } else {
            norm2(&residual) / scale
        };

        let mut u = f.clone();
        for (&i, xi) in self.omega.iter().zip(&x) {
            u.values_mut()[i] = *xi;
        }
        Ok(Solution {
            u: GridFunction::new(spec, u.into_values())?,
            diagnostics: SolveDiagnostics {
                method: self.method,
                unknowns: self.omega.len(),
                iterations,
                relative_residual,
                wall_time_s: start.elapsed().as_secs_f64(),
            },
        })
    }
}

/// Solves the exterior-value problem described by `problem`.
pub fn dirichlet_solve(
    weights: &KernelWeights,
    problem: &DirichletProblem<'_>,
    opts: &SolveOptions,
) -> Result<Solution> {
    weights.spec().ensure_same(problem.cond.spec())?;
    let op = problem.operator(weights)?;
    InteriorSystem::new(op, problem.layout, opts)?.solve(problem.exterior, None)
}

/// Same as [`dirichlet_solve`] with a CG starting guess on Ω nodes.
pub fn dirichlet_solve_from(
    weights: &KernelWeights,
    problem: &DirichletProblem<'_>,
    opts: &SolveOptions,
    guess: &[f64],
) -> Result<Solution> {
    let op = problem.operator(weights)?;
    InteriorSystem::new(op, problem.layout, opts)?.solve(problem.exterior, Some(guess))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    /// `(‖u − f‖²_{L²} + B₁(u − f, u − f))^{1/2}`
    pub lhs: f64,
    /// `‖f‖_{L²}`
    pub rhs_scale: f64,
    /// `lhs / rhs_scale`, reported as 0 when `f ≡ 0`.
    pub ratio: f64,
}

/// Measures the interior response to exterior data held at positive
/// distance from Ω.
pub fn elliptic_estimate_check(
    weights: &KernelWeights,
    problem: &DirichletProblem<'_>,
    solution: &Solution,
) -> Result<EstimateReport> {
    let spec = weights.spec();
    let support = problem.exterior.support();
    if !support.is_empty() {
        let gap = lattice_gap(spec, &support, problem.layout.omega());
        if gap < 1 {
            return Err(Error::InsufficientGap {
                a: "exterior data",
                b: "omega",
                gap,
                required: 1,
            });
        }
    }
    let diff = &solution.u - problem.exterior;
    let lhs = (diff.l2_norm().powi(2) + b_one(weights, &diff, &diff)?).sqrt();
    let rhs_scale = problem.exterior.l2_norm();
    let ratio = if rhs_scale == 0.0 {
        0.0
    } else {
        lhs / rhs_scale
    };
    Ok(EstimateReport {
        lhs,
        rhs_scale,
        ratio,
    })
}

/// `max ‖u‖_{L²} / B₁(u, u)^{1/2}` over functions supported in Ω, i.e.
/// `(h^n / λ_min)^{1/2}` for the interior block of `B₁`.
pub fn poincare_constant(weights: &KernelWeights, layout: &RegionLayout) -> Result<f64> {
    weights.spec().ensure_same(layout.spec())?;
    let omega = layout.require(crate::grid::Region::Omega)?;
    let op = FormOperator::fractional(weights);
    let chol = Cholesky::factor(&op.submatrix(omega, omega))?;
    let mu = power_iteration(|x| chol.solve(x), omega.len(), 1e-8, 100_000)?;
    Ok((weights.spec().cell_volume() * mu).sqrt())
}
