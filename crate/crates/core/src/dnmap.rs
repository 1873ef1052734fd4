//! Discrete exterior DN maps as Schur complements of the form matrix.
//!
//! The entry `(g, f)` is `B_γ(u_f, e_g)`: the response tested at exterior
//! node `g` to unit data at exterior node `f`. Exterior functions are
//! represented by their nodal values, one per quotient class.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forms::{b_gamma, Conductivity, FormOperator};
use crate::grid::{GridFunction, GridSpec, RegionLayout};
use crate::kernel::KernelWeights;
use crate::linalg::{power_iteration, Cholesky, DenseMatrix};
use crate::solve::{dirichlet_solve, DirichletProblem, InteriorSystem, SolveOptions};

/// Tolerance of the singular-value iteration in [`dn_operator_norm`].
pub const NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct DnMatrix {
    spec: GridSpec,
    s: f64,
    /// Test nodes `g`.
    rows: Vec<usize>,
    /// Data nodes `f`.
    cols: Vec<usize>,
    data: DenseMatrix,
    layout_hash: String,
    gamma_hash: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn spec_bytes(spec: &GridSpec) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(spec.dim() as u64).to_le_bytes());
    out.extend_from_slice(&spec.half_width().to_bits().to_le_bytes());
    out.extend_from_slice(&(spec.nodes_per_axis() as u64).to_le_bytes());
    out
}

/// Short content hash of the region assignment.
pub fn layout_hash(layout: &RegionLayout) -> String {
    let mut h = Sha256::new();
    h.update(spec_bytes(layout.spec()));
    for i in layout.spec().nodes() {
        h.update([layout.region_of(i) as u8]);
    }
    hex(&h.finalize()[..8])
}

/// Short content hash of the conductivity values (bit patterns).
pub fn gamma_hash(cond: &Conductivity) -> String {
    let mut h = Sha256::new();
    h.update(spec_bytes(cond.spec()));
    for v in cond.gamma().values() {
        h.update(v.to_bits().to_le_bytes());
    }
    hex(&h.finalize()[..8])
}

fn check_exterior(layout: &RegionLayout, nodes: &[usize], what: &str) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::Precondition(format!("{what} window is empty")));
    }
    match nodes
        .iter()
        .find(|&&k| k >= layout.spec().len() || layout.is_omega(k))
    {
        Some(k) => Err(Error::Precondition(format!(
            "{what} node {k} is not an exterior node"
        ))),
        None => Ok(()),
    }
}

/// DN block of an arbitrary form operator: `A_TS − A_TΩ A_ΩΩ⁻¹ A_ΩS`.
pub fn dn_block_for_operator(
    op: FormOperator<'_>,
    layout: &RegionLayout,
    sources: &[usize],
    targets: &[usize],
    opts: &SolveOptions,
) -> Result<DenseMatrix> {
    Ok(dn_block_with_responses(op, layout, sources, targets, opts)?.0)
}

/// [`dn_block_for_operator`] that also returns the interior responses
/// (`|Ω| × |sources|`, see [`InteriorSystem::responses`]).
pub fn dn_block_with_responses(
    op: FormOperator<'_>,
    layout: &RegionLayout,
    sources: &[usize],
    targets: &[usize],
    opts: &SolveOptions,
) -> Result<(DenseMatrix, DenseMatrix)> {
    check_exterior(layout, sources, "source")?;
    check_exterior(layout, targets, "target")?;
    let direct = op.submatrix(targets, sources);
    let through = op.submatrix(targets, layout.omega());
    let sys = InteriorSystem::new(op, layout, opts)?;
    let x = sys.responses(sources)?;
    let mut out = through.matmul(&x);
    for r in 0..targets.len() {
        for c in 0..sources.len() {
            out[(r, c)] += direct[(r, c)];
        }
    }
    Ok((out, x))
}

/// Full exterior DN matrix of `γ`.
pub fn assemble_dn(
    weights: &KernelWeights,
    cond: &Conductivity,
    layout: &RegionLayout,
    opts: &SolveOptions,
) -> Result<DnMatrix> {
    let ext = layout.exterior().to_vec();
    assemble_dn_block(weights, cond, layout, &ext, &ext, opts)
}

/// DN block for data on `sources`, tested on `targets`.
pub fn assemble_dn_block(
    weights: &KernelWeights,
    cond: &Conductivity,
    layout: &RegionLayout,
    sources: &[usize],
    targets: &[usize],
    opts: &SolveOptions,
) -> Result<DnMatrix> {
    weights.spec().ensure_same(layout.spec())?;
    let op = FormOperator::conductivity(weights, cond)?;
    let data = dn_block_for_operator(op, layout, sources, targets, opts)?;
    Ok(DnMatrix {
        spec: *weights.spec(),
        s: weights.s(),
        rows: targets.to_vec(),
        cols: sources.to_vec(),
        data,
        layout_hash: layout_hash(layout),
        gamma_hash: gamma_hash(cond),
    })
}

fn positions(all: &[usize], wanted: &[usize], what: &str) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|k| {
            all.iter().position(|x| x == k).ok_or_else(|| {
                Error::Precondition(format!("{what} node {k} is outside the DN window"))
            })
        })
        .collect()
}

impl DnMatrix {
    /// Wraps an assembled block; `data` is `|targets| × |sources|`.
    pub fn from_parts(
        spec: GridSpec,
        s: f64,
        targets: &[usize],
        sources: &[usize],
        data: DenseMatrix,
        layout_hash: String,
        gamma_hash: String,
    ) -> Result<Self> {
        if data.rows() != targets.len() || data.cols() != sources.len() {
            return Err(Error::Precondition(
                "DN block shape does not match its windows".into(),
            ));
        }
        Ok(Self {
            spec,
            s,
            rows: targets.to_vec(),
            cols: sources.to_vec(),
            data,
            layout_hash,
            gamma_hash,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.data
    }

    pub fn layout_hash(&self) -> &str {
        &self.layout_hash
    }

    pub fn gamma_hash(&self) -> &str {
        &self.gamma_hash
    }

    /// Entry `(g, f)` by node index.
    pub fn get(&self, g: usize, f: usize) -> Option<f64> {
        let r = self.rows.iter().position(|&x| x == g)?;
        let c = self.cols.iter().position(|&x| x == f)?;
        Some(self.data[(r, c)])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.max_abs()
    }

    /// `max |D − Dᵀ| / max |D|`; `None` unless rows and columns coincide.
    pub fn symmetry_defect(&self) -> Option<f64> {
        (self.rows == self.cols).then(|| self.data.symmetry_defect())
    }

    /// The `(to, from)` block: data in `from`, tested in `to`.
    pub fn restrict(&self, from: &[usize], to: &[usize]) -> Result<Self> {
        let cs = positions(&self.cols, from, "source")?;
        let rs = positions(&self.rows, to, "target")?;
        if from.is_empty() || to.is_empty() {
            return Err(Error::Precondition("restriction window is empty".into()));
        }
        Ok(Self {
            data: DenseMatrix::from_fn(rs.len(), cs.len(), |r, c| self.data[(rs[r], cs[c])]),
            rows: to.to_vec(),
            cols: from.to_vec(),
            ..self.clone()
        })
    }

    /// `self − other` on identical windows and layouts.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.spec != other.spec || self.rows != other.rows || self.cols != other.cols {
            return Err(Error::LayoutMismatch(
                "DN matrices cover different windows".into(),
            ));
        }
        if self.layout_hash != other.layout_hash {
            return Err(Error::LayoutMismatch(
                "DN matrices come from different layouts".into(),
            ));
        }
        Ok(Self {
            data: self.data.sub(&other.data),
            gamma_hash: format!("{}-{}", self.gamma_hash, other.gamma_hash),
            ..self.clone()
        })
    }

    /// `⟨Λ f, g⟩ = Σ g_r D_rc f_c` with `f` on the columns and `g` on the rows.
    pub fn pairing(&self, f: &GridFunction, g: &GridFunction) -> Result<f64> {
        self.spec.ensure_same(f.spec())?;
        self.spec.ensure_same(g.spec())?;
        f.ensure_supported_in(&self.cols, "DN source window")?;
        g.ensure_supported_in(&self.rows, "DN target window")?;
        let fv: Vec<f64> = self.cols.iter().map(|&k| f.values()[k]).collect();
        let df = self.data.matvec(&fv);
        Ok(self
            .rows
            .iter()
            .zip(&df)
            .map(|(&k, d)| g.values()[k] * d)
            .sum())
    }

    /// Long-format CSV (`target,source,value`) after one `#` metadata line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = File::create(path)?;
        writeln!(
            file,
            "# dim={},L={},N={},s={},layout={},gamma={}",
            self.spec.dim(),
            self.spec.half_width(),
            self.spec.nodes_per_axis(),
            self.s,
            self.layout_hash,
            self.gamma_hash
        )?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["target", "source", "value"])?;
        for (r, &g) in self.rows.iter().enumerate() {
            for (c, &f) in self.cols.iter().enumerate() {
                w.write_record([
                    g.to_string(),
                    f.to_string(),
                    format!("{:e}", self.data[(r, c)]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads back what [`DnMatrix::write_csv`] produced.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = BufReader::new(File::open(path)?);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let meta = header
            .trim()
            .strip_prefix("# ")
            .ok_or_else(|| Error::Format("missing metadata line".into()))?;
        let field = |key: &str| -> Result<&str> {
            meta.split(',')
                .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| Error::Format(format!("metadata lacks `{key}`")))
        };
        let num = |key: &str| -> Result<f64> {
            field(key)?
                .parse()
                .map_err(|e| Error::Format(format!("metadata `{key}`: {e}")))
        };
        let spec = GridSpec::new(num("dim")? as usize, num("L")?, num("N")? as usize)?;
        let s = num("s")?;
        let layout_hash = field("layout")?.to_string();
        let gamma_hash = field("gamma")?.to_string();

        let mut entries = Vec::new();
        for rec in csv::Reader::from_reader(reader).deserialize() {
            let (g, f, v): (usize, usize, f64) = rec?;
            entries.push((g, f, v));
        }
        let mut rows: Vec<usize> = Vec::new();
        let mut cols: Vec<usize> = Vec::new();
        for &(g, f, _) in &entries {
            if !rows.contains(&g) {
                rows.push(g);
            }
            if !cols.contains(&f) {
                cols.push(f);
            }
        }
        if entries.len() != rows.len() * cols.len() {
            return Err(Error::Format("DN entries do not form a full block".into()));
        }
        let data = DenseMatrix::from_row_major(
            rows.len(),
            cols.len(),
            entries.iter().map(|e| e.2).collect(),
        );
        Ok(Self {
            spec,
            s,
            rows,
            cols,
            data,
            layout_hash,
            gamma_hash,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlessandriniReport {
    /// `⟨(Λ₁ − Λ₂) f, g⟩`
    pub lhs: f64,
    /// `(B_γ₁ − B_γ₂)(u¹_f, u²_g)`
    pub rhs: f64,
    pub gap: f64,
}

/// Compares both sides of `⟨(Λ₁−Λ₂)f, g⟩ = (B_γ₁ − B_γ₂)(u¹_f, u²_g)`.
#[allow(clippy::too_many_arguments)]
pub fn alessandrini_gap(
    weights: &KernelWeights,
    cond1: &Conductivity,
    cond2: &Conductivity,
    layout: &RegionLayout,
    dn1: &DnMatrix,
    dn2: &DnMatrix,
    f: &GridFunction,
    g: &GridFunction,
    opts: &SolveOptions,
) -> Result<AlessandriniReport> {
    let lhs = dn1.difference(dn2)?.pairing(f, g)?;
    let u1 = dirichlet_solve(
        weights,
        &DirichletProblem::conductivity(cond1, layout, f),
        opts,
    )?
    .u;
    let u2 = dirichlet_solve(
        weights,
        &DirichletProblem::conductivity(cond2, layout, g),
        opts,
    )?
    .u;
    let rhs = b_gamma(weights, cond1, &u1, &u2)? - b_gamma(weights, cond2, &u1, &u2)?;
    Ok(AlessandriniReport {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

/// `σ_max(L_r⁻¹ M L_c⁻ᵀ)` where `G_r = L_r L_rᵀ` and `G_c = L_c L_cᵀ` are the
/// Gram matrices of the row and column spaces.
pub fn gram_operator_norm(
    m: &DenseMatrix,
    g_rows: &DenseMatrix,
    g_cols: &DenseMatrix,
) -> Result<f64> {
    if g_rows.rows() != m.rows() || g_cols.rows() != m.cols() {
        return Err(Error::Precondition(
            "Gram matrices do not match the operator shape".into(),
        ));
    }
    if m.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let lr = Cholesky::factor(g_rows)?;
    let lc = Cholesky::factor(g_cols)?;
    // B = L_r⁻¹ M L_c⁻ᵀ, applied matrix-free; BᵀB = L_c⁻¹ Mᵀ G_r⁻¹ M L_c⁻ᵀ
    let btb = |x: &[f64]| {
        let y = m.matvec(&lc.solve_upper(x));
        let z = m.matvec_transpose(&lr.solve(&y));
        lc.solve_lower(&z)
    };
    let lambda = power_iteration(btb, m.cols(), NORM_TOL, 200_000)?;
    Ok(lambda.max(0.0).sqrt())
}

/// Discrete `X → X*` norm with `X` carrying `G = h^n I + A₁|ext`, the `H^s`
/// Gram matrix of zero-extended exterior functions.
pub fn dn_operator_norm(diff: &DnMatrix, weights: &KernelWeights) -> Result<f64> {
    weights.spec().ensure_same(diff.spec())?;
    let op = FormOperator::fractional(weights);
    let hn = weights.spec().cell_volume();
    let gram = |nodes: &[usize]| {
        let mut g = op.submatrix(nodes, nodes);
        for k in 0..nodes.len() {
            g[(k, k)] += hn;
        }
        g
    };
    gram_operator_norm(diff.matrix(), &gram(diff.rows()), &gram(diff.cols()))
}
