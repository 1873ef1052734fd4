//! Experiment configuration: a TOML file with top-level keys and
//! per-experiment sections. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fraccond::counterex::CutoffMode;
use fraccond::grid::{AxisBox, GridSpec, RegionBoxes};
use fraccond::solve::{SolveOptions, SolverMethod};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub name: String,
    pub s: f64,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<RegionsConfig>,
    #[serde(default)]
    pub conductivity: Recipe,
    /// Second conductivity for comparisons; defaults to γ ≡ 1.
    #[serde(default)]
    pub conductivity2: Recipe,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Output directory, relative to the config file. `--out` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub reconstruct: ReconstructConfig,
    #[serde(default)]
    pub counterexample: CounterexampleConfig,
    #[serde(default)]
    pub converge: ConvergeConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    #[serde(default = "one")]
    pub half_width: f64,
    pub nodes: usize,
}

/// Boxes as one `[lo, hi]` pair per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsConfig {
    pub omega: Vec<[f64; 2]>,
    #[serde(default)]
    pub w1: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub w2: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub omega_small: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Recipe {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    /// `γ = (1 + m)²` with `m` a flat-top radial bump.
    SmoothBump {
        center: Vec<f64>,
        radius: f64,
        amplitude: f64,
    },
    RandomSmooth {
        #[serde(default = "three")]
        bumps: usize,
        amplitude: f64,
        #[serde(default = "tenth")]
        margin: f64,
    },
    RandomElliptic {
        lo: f64,
        hi: f64,
    },
    /// γ₁ (or γ₂ with `which = 2`) of a saved counterexample record.
    Counterexample {
        path: PathBuf,
        #[serde(default = "one_usize")]
        which: usize,
    },
    /// Grid-function CSV or binary dump, chosen by the `.bin` extension.
    File {
        path: PathBuf,
    },
}

impl Default for Recipe {
    fn default() -> Self {
        Recipe::Constant { value: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "solver_tol")]
    pub tol: f64,
    #[serde(default)]
    pub method: SolverMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: solver_tol(),
            method: SolverMethod::Auto,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolveOptions {
        SolveOptions::with_tol(self.tol).method(self.method)
    }
}

/// Pass thresholds. Every criterion compares one metric with one of these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub residual: f64,
    pub liouville: f64,
    pub correspondence: f64,
    pub symmetry: f64,
    pub alessandrini: f64,
    pub reconstruction: f64,
    pub partial_data: f64,
    pub relation: f64,
    pub contrast: f64,
    pub same_window: f64,
    pub kernel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: 1e-10,
            liouville: 1e-12,
            correspondence: 1e-10,
            symmetry: 1e-10,
            alessandrini: 1e-10,
            reconstruction: 0.10,
            partial_data: 1e-8,
            relation: 1e-8,
            contrast: 0.05,
            same_window: 1e-4,
            kernel: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { samples: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructConfig {
    /// Reconstruction point; the node nearest the W₁ centroid when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Largest bump radius; 0.45 of the narrowest W₁ extent when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    pub levels: usize,
    /// Value γ(x₀) is compared against; the nodal value when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            x0: None,
            r0: None,
            levels: 3,
            expected: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterexampleConfig {
    /// Cutoff length in cells.
    pub epsilon_cells: f64,
    pub mode: CutoffMode,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self {
            epsilon_cells: 1.5,
            mode: CutoffMode::Tight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeConfig {
    /// Grid sizes; 64..512 in 1D and 16..48 in 2D when empty.
    pub sizes: Vec<usize>,
    /// Error is measured on `|x| < radius`.
    pub radius: f64,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        Self {
            sizes: Vec::new(),
            radius: 0.9,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn three() -> usize {
    3
}

fn tenth() -> f64 {
    0.1
}

fn solver_tol() -> f64 {
    fraccond::solve::DEFAULT_TOL
}

/// Which window geometry an experiment falls back to without `[regions]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefaultGeometry {
    TwoWindows,
    SingleWindow,
    Counterexample,
}

impl Config {
    /// Parses and validates; relative paths are resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Config =
            toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()
            .with_context(|| format!("invalid config {}", path.display()))?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for recipe in [&mut self.conductivity, &mut self.conductivity2] {
            if let Recipe::Counterexample { path, .. } | Recipe::File { path } = recipe {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        if let Some(out) = &mut self.output {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.dim != 1 && g.dim != 2 {
            bail!("field `grid.dim`: must be 1 or 2, got {}", g.dim);
        }
        let max_nodes = if g.dim == 1 { 4096 } else { 96 };
        if g.nodes < 4 || g.nodes > max_nodes {
            bail!(
                "field `grid.nodes`: must lie in [4, {max_nodes}] for dim {}, got {}",
                g.dim,
                g.nodes
            );
        }
        if !(g.half_width.is_finite() && g.half_width > 0.0) {
            bail!(
                "field `grid.half_width`: must be positive, got {}",
                g.half_width
            );
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            bail!("field `s`: must lie in (0, 1), got {}", self.s);
        }
        if !(self.solver.tol > 0.0 && self.solver.tol < 1.0) {
            bail!(
                "field `solver.tol`: must lie in (0, 1), got {}",
                self.solver.tol
            );
        }
        if let Some(r) = &self.regions {
            let boxes = [
                ("regions.omega", Some(&r.omega)),
                ("regions.w1", r.w1.as_ref()),
                ("regions.w2", r.w2.as_ref()),
                ("regions.omega_small", r.omega_small.as_ref()),
            ];
            for (name, b) in boxes {
                let Some(b) = b else { continue };
                if b.len() != g.dim {
                    bail!(
                        "field `{name}`: needs {} [lo, hi] pairs, got {}",
                        g.dim,
                        b.len()
                    );
                }
                if let Some([lo, hi]) = b.iter().find(|[lo, hi]| !(lo < hi)) {
                    bail!("field `{name}`: empty interval [{lo}, {hi}]");
                }
            }
        }
        for (field, recipe) in [
            ("conductivity", &self.conductivity),
            ("conductivity2", &self.conductivity2),
        ] {
            match recipe {
                Recipe::Counterexample { path, which } => {
                    if *which != 1 && *which != 2 {
                        bail!("field `{field}.which`: must be 1 or 2, got {which}");
                    }
                    if !path.exists() {
                        bail!("field `{field}.path`: {} does not exist", path.display());
                    }
                }
                Recipe::File { path } if !path.exists() => {
                    bail!("field `{field}.path`: {} does not exist", path.display());
                }
                Recipe::SmoothBump {
                    center,
                    radius,
                    amplitude,
                } => {
                    if center.len() != g.dim {
                        bail!(
                            "field `{field}.center`: needs {} coordinates, got {}",
                            g.dim,
                            center.len()
                        );
                    }
                    if !(*radius > 0.0) {
                        bail!("field `{field}.radius`: must be positive, got {radius}");
                    }
                    if !(*amplitude > -1.0) {
                        bail!("field `{field}.amplitude`: must exceed -1, got {amplitude}");
                    }
                }
                _ => {}
            }
        }
        if self.reconstruct.levels == 0 {
            bail!("field `reconstruct.levels`: must be at least 1");
        }
        if let Some(x0) = &self.reconstruct.x0 {
            if x0.len() != g.dim {
                bail!(
                    "field `reconstruct.x0`: needs {} coordinates, got {}",
                    g.dim,
                    x0.len()
                );
            }
        }
        if !(self.counterexample.epsilon_cells >= 1.0) {
            bail!(
                "field `counterexample.epsilon_cells`: must be at least 1, got {}",
                self.counterexample.epsilon_cells
            );
        }
        if !(self.converge.radius > 0.0 && self.converge.radius < 1.0) {
            bail!(
                "field `converge.radius`: must lie in (0, 1), got {}",
                self.converge.radius
            );
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(
            self.grid.dim,
            self.grid.half_width,
            self.grid.nodes,
        )?)
    }

    /// Region boxes from `[regions]`, or the stock geometry for `fallback`
    /// scaled to the box half-width.
    pub fn region_boxes(&self, fallback: DefaultGeometry) -> RegionBoxes {
        let to_box = |b: &Vec<[f64; 2]>| AxisBox {
            bounds: b.iter().map(|&[lo, hi]| (lo, hi)).collect(),
        };
        if let Some(r) = &self.regions {
            return RegionBoxes {
                omega: to_box(&r.omega),
                w1: r.w1.as_ref().map(to_box),
                w2: r.w2.as_ref().map(to_box),
                omega_small: r.omega_small.as_ref().map(to_box),
            };
        }
        let l = self.grid.half_width;
        let iv = |lo: f64, hi: f64, full: (f64, f64)| {
            if self.grid.dim == 1 {
                AxisBox::interval(lo * l, hi * l)
            } else {
                AxisBox::rect((lo * l, hi * l), (full.0 * l, full.1 * l))
            }
        };
        let tall = (-0.95, 0.95);
        match fallback {
            DefaultGeometry::TwoWindows => RegionBoxes {
                omega: iv(-0.5, 0.5, (-0.5, 0.5)),
                w1: Some(iv(-0.95, -0.65, tall)),
                w2: Some(iv(0.65, 0.95, tall)),
                omega_small: None,
            },
            DefaultGeometry::SingleWindow => RegionBoxes {
                omega: iv(-0.9, 0.0, (-0.9, 0.9)),
                w1: Some(iv(0.1, 0.9, (-0.9, 0.9))),
                w2: None,
                omega_small: None,
            },
            DefaultGeometry::Counterexample if self.grid.dim == 1 => RegionBoxes {
                omega: iv(-0.5, 0.5, (0.0, 0.0)),
                w1: Some(iv(-0.95, -0.75, tall)),
                w2: Some(iv(0.75, 0.95, tall)),
                omega_small: Some(iv(0.57, 0.63, tall)),
            },
            DefaultGeometry::Counterexample => RegionBoxes {
                omega: iv(-0.5, 0.5, (-0.5, 0.5)),
                w1: Some(iv(-0.95, -0.7, tall)),
                w2: Some(iv(0.7, 0.95, tall)),
                omega_small: Some(AxisBox::rect((-0.4 * l, 0.4 * l), (0.58 * l, 0.66 * l))),
            },
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn params_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
