//! Singular-kernel quadrature for the fractional Laplacian.
//!
//! All nonlocal forms are built from two ingredients:
//!
//! * pair weights `w_ij ≈ (C_{n,s}/2) h^{2n} |x_i − x_j|^{−(n+2s)}`, where the
//!   eight (2D) or two (1D) lattice neighbours use an accurate cell integral of
//!   the kernel instead of the midpoint value;
//! * tail weights `τ_i = C_{n,s} h^n ∫_{ℝⁿ∖box} |x_i − y|^{−(n+2s)} dy`, which
//!   close the form for functions vanishing outside the box.
//!
//! The discrete operator is
//! `(A u)_i = h^{−n} [ Σ_{j≠i} 2 w_ij (u_i − u_j) + τ_i u_i ]`.
//!
//! Weights only depend on the lattice offset, so they are stored as an offset
//! table.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::grid::{GridFunction, GridSpec};

/// `C_{n,s} = 4^s Γ(n/2 + s) / (π^{n/2} |Γ(−s)|)`.
pub fn frac_constant(n: usize, s: f64) -> Result<f64> {
    if n != 1 && n != 2 {
        return Err(invalid("n", format!("must be 1 or 2, got {n}")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid("s", format!("must lie in (0, 1), got {s}")));
    }
    let nh = n as f64 / 2.0;
    // |Γ(−s)| = Γ(1 − s) / s on (0, 1)
    let abs_gamma_neg_s = gamma(1.0 - s) / s;
    Ok(4f64.powf(s) * gamma(nh + s) / (PI.powf(nh) * abs_gamma_neg_s))
}

/// Constant value of `(−Δ)^s (1 − |x|²)_+^s` inside the unit ball:
/// `4^s Γ(1 + s) Γ(n/2 + s) / Γ(n/2)`.
pub fn getoor_value(n: usize, s: f64) -> Result<f64> {
    frac_constant(n, s)?;
    let nh = n as f64 / 2.0;
    Ok(4f64.powf(s) * gamma(1.0 + s) * gamma(nh + s) / gamma(nh))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    dim: usize,
    s: f64,
    c_ns: f64,
}

impl FracParams {
    pub fn new(dim: usize, s: f64) -> Result<Self> {
        let c_ns = frac_constant(dim, s)?;
        Ok(Self { dim, s, c_ns })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn c_ns(&self) -> f64 {
        self.c_ns
    }

    /// Rejects `s ∉ (0, min(1, n/2))`, the range needed by the reduction to
    /// a Schrödinger problem and by the counterexample construction.
    pub fn require_reduction_range(&self) -> Result<()> {
        let upper = (self.dim as f64 / 2.0).min(1.0);
        if self.s < upper {
            Ok(())
        } else {
            Err(invalid(
                "s",
                format!(
                    "must be below min(1, n/2) = {upper} in dimension {}, got {}",
                    self.dim, self.s
                ),
            ))
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(z), p0 = P_{n-1}(z)
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss rule on `[a, b]` with panels no wider than `max_panel`.
fn composite_gauss(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    max_panel: f64,
    rule: &(Vec<f64>, Vec<f64>),
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let panels = ((b - a) / max_panel).ceil().max(1.0) as usize;
    let width = (b - a) / panels as f64;
    let (xs, ws) = rule;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        let half = 0.5 * width;
        total += half
            * xs.iter()
                .zip(ws)
                .map(|(x, w)| w * f(mid + half * x))
                .sum::<f64>();
    }
    total
}

/// `∫_{cell} |z|^{−(2+2s)} dz` over the unit cell centered at integer offset
/// `(dx, dy)`, by tensor Gauss on a uniform sub-panel grid.
fn unit_cell_integral_2d(dx: f64, dy: f64, s: f64) -> f64 {
    const PANELS: usize = 16;
    let (xs, ws) = gauss_legendre(8);
    let width = 1.0 / PANELS as f64;
    let half = 0.5 * width;
    let mut total = 0.0;
    for px in 0..PANELS {
        let cx = dx - 0.5 + (px as f64 + 0.5) * width;
        for py in 0..PANELS {
            let cy = dy - 0.5 + (py as f64 + 0.5) * width;
            for (a, wa) in xs.iter().zip(&ws) {
                let x = cx + half * a;
                for (b, wb) in xs.iter().zip(&ws) {
                    let y = cy + half * b;
                    total += wa * wb * (x * x + y * y).powf(-1.0 - s);
                }
            }
        }
    }
    total * half * half
}

/// `∫_{ℝ²∖[-L,L]²} |x − y|^{−(2+2s)} dy`, integrated exactly in the radial
/// direction and by quadrature in the angle, one edge at a time.
fn exterior_integral_2d(p: [f64; 2], half_width: f64, s: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let [x, y] = p;
    let l = half_width;
    // (distance to edge, along-edge offsets of the two corners)
    let edges = [
        (l - x, -l - y, l - y),
        (l + x, -l - y, l - y),
        (l - y, -l - x, l - x),
        (l + y, -l - x, l - x),
    ];
    let sech_pow = |u: f64| u.cosh().powf(-1.0 - 2.0 * s);
    edges
        .iter()
        .map(|&(d, a, b)| {
            let ua = (a / d).asinh();
            let ub = (b / d).asinh();
            d.powf(-2.0 * s) * composite_gauss(sech_pow, ua, ub, 0.5, rule)
        })
        .sum::<f64>()
        / (2.0 * s)
}

/// Precomputed pair and tail weights for one `(grid, s)` combination.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeights {
    spec: GridSpec,
    params: FracParams,
    /// `w` by absolute offset; index `dy * N + dx` (just `dx` in 1D).
    offsets: Vec<f64>,
    tau: Vec<f64>,
    /// `Σ_{j≠i} 2 w_ij`
    row_sums: Vec<f64>,
}

impl KernelWeights {
    pub fn build(spec: &GridSpec, params: &FracParams) -> Result<Self> {
        if spec.dim() != params.dim() {
            return Err(invalid(
                "params",
                format!(
                    "dimension {} does not match grid dimension {}",
                    params.dim(),
                    spec.dim()
                ),
            ));
        }
        let n = spec.nodes_per_axis();
        let h = spec.spacing();
        let s = params.s();
        let c = params.c_ns();
        let (offsets, tau) = match spec.dim() {
            1 => {
                let mut w = vec![0.0; n];
                for (d, wd) in w.iter_mut().enumerate().skip(1) {
                    *wd = if d == 1 {
                        let cell =
                            ((0.5 * h).powf(-2.0 * s) - (1.5 * h).powf(-2.0 * s)) / (2.0 * s);
                        0.5 * c * h * cell
                    } else {
                        0.5 * c * h * h * (d as f64 * h).powf(-1.0 - 2.0 * s)
                    };
                }
                let l = spec.half_width();
                let tau = spec
                    .nodes()
                    .map(|i| {
                        let x = spec.point(i)[0];
                        c * h * ((l - x).powf(-2.0 * s) + (l + x).powf(-2.0 * s)) / (2.0 * s)
                    })
                    .collect();
                (w, tau)
            }
            _ => {
                let h2 = h * h;
                let side = unit_cell_integral_2d(1.0, 0.0, s) * h.powf(-2.0 * s);
                let corner = unit_cell_integral_2d(1.0, 1.0, s) * h.powf(-2.0 * s);
                let mut w = vec![0.0; n * n];
                for dy in 0..n {
                    for dx in 0..n {
                        w[dy * n + dx] = match (dx, dy) {
                            (0, 0) => 0.0,
                            (1, 0) | (0, 1) => 0.5 * c * h2 * side,
                            (1, 1) => 0.5 * c * h2 * corner,
                            _ => {
                                let r2 = ((dx * dx + dy * dy) as f64) * h2;
                                0.5 * c * h2 * h2 * r2.powf(-1.0 - s)
                            }
                        };
                    }
                }
                let rule = gauss_legendre(16);
                let l = spec.half_width();
                let tau = spec
                    .nodes()
                    .collect::<Vec<_>>()
                    .par_iter()
                    .map(|&i| c * h2 * exterior_integral_2d(spec.point(i), l, s, &rule))
                    .collect();
                (w, tau)
            }
        };
        Ok(Self::from_parts(*spec, *params, offsets, tau))
    }

    fn from_parts(spec: GridSpec, params: FracParams, offsets: Vec<f64>, tau: Vec<f64>) -> Self {
        let mut out = Self {
            spec,
            params,
            offsets,
            tau,
            row_sums: Vec::new(),
        };
        out.row_sums = (0..spec.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for j in spec.nodes() {
                    acc += 2.0 * out.pair(i, j);
                }
                acc
            })
            .collect();
        out
    }

    /// Copy with every tail weight set to zero (a tail-free synthetic form).
    pub fn without_tail(&self) -> Self {
        Self {
            tau: vec![0.0; self.tau.len()],
            ..self.clone()
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn params(&self) -> &FracParams {
        &self.params
    }

    pub fn s(&self) -> f64 {
        self.params.s()
    }

    /// Pair weight `w_ij`; zero on the diagonal.
    #[inline]
    pub fn pair(&self, i: usize, j: usize) -> f64 {
        let [dx, dy] = self.spec.offset(i, j);
        self.offsets[dy * self.spec.nodes_per_axis() + dx]
    }

    /// Weight for an absolute lattice offset.
    pub fn offset_weight(&self, dx: usize, dy: usize) -> f64 {
        self.offsets[dy * self.spec.nodes_per_axis() + dx]
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// `Σ_{j≠i} 2 w_ij` for every node.
    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    /// Quadratic form `Σ_{i<j} 2 w_ij (u_i − u_j)² + Σ_i τ_i u_i²`.
    pub fn quadratic_form(&self, u: &GridFunction) -> Result<f64> {
        self.spec.ensure_same(u.spec())?;
        let v = u.values();
        let rows: Vec<f64> = (0..v.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = self.tau[i] * v[i] * v[i];
                for j in (i + 1)..v.len() {
                    let d = v[i] - v[j];
                    acc += 2.0 * self.pair(i, j) * d * d;
                }
                acc
            })
            .collect();
        Ok(rows.iter().sum())
    }
}

/// `(A u)_i = h^{−n} [ Σ_{j≠i} 2 w_ij (u_i − u_j) + τ_i u_i ]`.
pub fn apply_frac_laplacian(weights: &KernelWeights, u: &GridFunction) -> Result<GridFunction> {
    let spec = weights.spec;
    spec.ensure_same(u.spec())?;
    let v = u.values();
    let inv_vol = 1.0 / spec.cell_volume();
    let out: Vec<f64> = (0..v.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = weights.tau[i] * v[i];
            for (j, vj) in v.iter().enumerate() {
                if j != i {
                    acc += 2.0 * weights.pair(i, j) * (v[i] - vj);
                }
            }
            acc * inv_vol
        })
        .collect();
    GridFunction::new(spec, out)
}

/// Normalized smooth bump stencil `exp(−1/(1 − r²/R²))` over offsets with
/// `|d| h < radius`, returned as `(dx, dy, weight)` with signed offsets.
pub fn mollifier_stencil(spec: &GridSpec, radius: f64) -> Result<Vec<(isize, isize, f64)>> {
    let h = spec.spacing();
    if !(radius >= h) {
        return Err(invalid(
            "radius",
            format!("must be at least h = {h}, got {radius}"),
        ));
    }
    let reach = (radius / h).ceil() as isize;
    let ys = if spec.dim() == 1 {
        0..=0
    } else {
        -reach..=reach
    };
    let mut stencil = Vec::new();
    for dy in ys {
        for dx in -reach..=reach {
            let r = h * ((dx * dx + dy * dy) as f64).sqrt();
            if r < radius {
                let t = r / radius;
                stencil.push((dx, dy, (-1.0 / (1.0 - t * t)).exp()));
            }
        }
    }
    let total: f64 = stencil.iter().map(|e| e.2).sum();
    for e in &mut stencil {
        e.2 /= total;
    }
    Ok(stencil)
}

/// Discrete convolution with the normalized bump of the given radius; values
/// beyond the box are taken as zero.
pub fn mollify(spec: &GridSpec, u: &GridFunction, radius: f64) -> Result<GridFunction> {
    spec.ensure_same(u.spec())?;
    let stencil = mollifier_stencil(spec, radius)?;
    let n = spec.nodes_per_axis() as isize;
    let v = u.values();
    let out: Vec<f64> = spec
        .nodes()
        .map(|i| {
            let [ix, iy] = spec.axis_indices(i);
            let mut acc = 0.0;
            for &(dx, dy, k) in &stencil {
                let jx = ix as isize + dx;
                let jy = iy as isize + dy;
                if (0..n).contains(&jx) && (0..n).contains(&jy) {
                    acc += k * v[spec.flat_index(jx as usize, jy as usize)];
                }
            }
            acc
        })
        .collect();
    GridFunction::new(*spec, out)
}

const CACHE_MAGIC: &[u8; 4] = b"FCKW";
const CACHE_VERSION: u32 = 1;

/// File name under which weights for `(spec, params)` are cached; parameters
/// are encoded by their bit patterns so distinct values never collide.
pub fn cache_file_name(spec: &GridSpec, params: &FracParams) -> String {
    format!(
        "weights_v{CACHE_VERSION}_d{}_L{:016x}_N{}_s{:016x}.bin",
        spec.dim(),
        spec.half_width().to_bits(),
        spec.nodes_per_axis(),
        params.s().to_bits()
    )
}

impl KernelWeights {
    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&(self.spec.dim() as u32).to_le_bytes())?;
        w.write_all(&self.spec.half_width().to_le_bytes())?;
        w.write_all(&(self.spec.nodes_per_axis() as u64).to_le_bytes())?;
        w.write_all(&self.params.s().to_le_bytes())?;
        for block in [&self.offsets, &self.tau] {
            w.write_all(&(block.len() as u64).to_le_bytes())?;
            for v in block.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_cache(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Format("not a weight cache file".into()));
        }
        let version = read_u32(&mut r)?;
        if version != CACHE_VERSION {
            return Err(Error::Format(format!(
                "unsupported cache version {version}"
            )));
        }
        let dim = read_u32(&mut r)? as usize;
        let half_width = read_f64(&mut r)?;
        let n = read_u64(&mut r)? as usize;
        let s = read_f64(&mut r)?;
        let spec = GridSpec::new(dim, half_width, n)?;
        let params = FracParams::new(dim, s)?;
        let mut blocks = Vec::with_capacity(2);
        for _ in 0..2 {
            let len = read_u64(&mut r)? as usize;
            let mut block = Vec::with_capacity(len);
            for _ in 0..len {
                block.push(read_f64(&mut r)?);
            }
            blocks.push(block);
        }
        let tau = blocks.pop().unwrap();
        let offsets = blocks.pop().unwrap();
        if offsets.len() != n.pow(dim as u32) || tau.len() != spec.len() {
            return Err(Error::Format(
                "weight cache has inconsistent lengths".into(),
            ));
        }
        Ok(Self::from_parts(spec, params, offsets, tau))
    }

    /// Reads cached weights from `dir` if present, otherwise builds and
    /// stores them.
    pub fn load_or_build(
        dir: &Path,
        spec: &GridSpec,
        params: &FracParams,
    ) -> Result<(Self, PathBuf)> {
        let path = dir.join(cache_file_name(spec, params));
        if path.exists() {
            return Ok((Self::read_cache(&path)?, path));
        }
        let weights = Self::build(spec, params)?;
        std::fs::create_dir_all(dir)?;
        weights.write_cache(&path)?;
        Ok((weights, path))
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((q - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn frac_constant_hand_values() {
        assert!((frac_constant(1, 0.5).unwrap() - 1.0 / PI).abs() < 1e-14);
        assert!((frac_constant(2, 0.5).unwrap() - 0.5 / PI).abs() < 1e-14);
        assert!(frac_constant(1, 0.0).is_err());
        assert!(frac_constant(1, 1.0).is_err());
        assert!(frac_constant(3, 0.5).is_err());
    }

    #[test]
    fn getoor_hand_values() {
        assert!((getoor_value(1, 0.5).unwrap() - 1.0).abs() < 1e-14);
        // 2 Γ(3/2)² / Γ(1)
        assert!((getoor_value(2, 0.5).unwrap() - PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn reduction_range() {
        assert!(FracParams::new(1, 0.45)
            .unwrap()
            .require_reduction_range()
            .is_ok());
        assert!(FracParams::new(1, 0.5)
            .unwrap()
            .require_reduction_range()
            .is_err());
        assert!(FracParams::new(2, 0.75)
            .unwrap()
            .require_reduction_range()
            .is_ok());
    }

    #[test]
    fn midpoint_pair_weight_h1() {
        // h = 1 requires L = N/2
        let spec = GridSpec::new(1, 4.0, 8).unwrap();
        let w = KernelWeights::build(&spec, &FracParams::new(1, 0.5).unwrap()).unwrap();
        assert!((w.pair(2, 4) - 1.0 / (8.0 * PI)).abs() < 1e-15);
        assert_eq!(w.pair(3, 3), 0.0);
    }

    #[test]
    fn pair_weights_symmetric_positive() {
        let spec = GridSpec::new(2, 1.0, 12).unwrap();
        let w = KernelWeights::build(&spec, &FracParams::new(2, 0.3).unwrap()).unwrap();
        let mut state = 12345u64;
        for _ in 0..100 {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let i = (state >> 33) as usize % spec.len();
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % spec.len();
            assert_eq!(w.pair(i, j), w.pair(j, i));
            if i != j {
                assert!(w.pair(i, j) > 0.0);
            }
        }
        assert!(w.tau().iter().all(|&t| t > 0.0));
    }

    #[test]
    fn tail_grows_toward_boundary() {
        let spec = GridSpec::new(1, 1.0, 32).unwrap();
        let w = KernelWeights::build(&spec, &FracParams::new(1, 0.5).unwrap()).unwrap();
        assert!(w.tau()[0] > w.tau()[16]);
        for i in 16..31 {
            assert!(w.tau()[i + 1] > w.tau()[i]);
        }
        let spec = GridSpec::new(2, 1.0, 16).unwrap();
        let w = KernelWeights::build(&spec, &FracParams::new(2, 0.5).unwrap()).unwrap();
        let center = spec.flat_index(8, 8);
        let edge = spec.flat_index(15, 8);
        let corner = spec.flat_index(15, 15);
        assert!(w.tau()[edge] > w.tau()[center]);
        assert!(w.tau()[corner] > w.tau()[edge]);
    }

    #[test]
    fn apply_zero_and_linearity() {
        let spec = GridSpec::new(1, 1.0, 32).unwrap();
        let w = KernelWeights::build(&spec, &FracParams::new(1, 0.4).unwrap()).unwrap();
        let zero = apply_frac_laplacian(&w, &GridFunction::zeros(spec)).unwrap();
        assert_eq!(zero.linf_norm(), 0.0);
        let u = GridFunction::from_fn(spec, |p| (3.0 * p[0]).sin());
        let v = GridFunction::from_fn(spec, |p| p[0] * p[0]);
        let lhs = apply_frac_laplacian(&w, &(&(2.0 * &u) + &v)).unwrap();
        let au = apply_frac_laplacian(&w, &u).unwrap();
        let av = apply_frac_laplacian(&w, &v).unwrap();
        let rhs = &(2.0 * &au) + &av;
        assert!(lhs.max_abs_diff(&rhs) <= 1e-12 * rhs.linf_norm());
    }

    #[test]
    fn apply_rejects_grid_mismatch() {
        let spec = GridSpec::new(1, 1.0, 32).unwrap();
        let other = GridSpec::new(1, 1.0, 16).unwrap();
        let w = KernelWeights::build(&spec, &FracParams::new(1, 0.4).unwrap()).unwrap();
        assert!(matches!(
            apply_frac_laplacian(&w, &GridFunction::zeros(other)),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn mollify_properties() {
        let spec = GridSpec::new(1, 1.0, 64).unwrap();
        let h = spec.spacing();
        let c = GridFunction::constant(spec, 2.5);
        let m = mollify(&spec, &c, 4.0 * h).unwrap();
        for i in 4..60 {
            assert!((m.values()[i] - 2.5).abs() < 1e-14);
        }
        let u = GridFunction::from_fn(spec, |p| (7.0 * p[0]).cos());
        assert!(mollify(&spec, &u, 3.0 * h).unwrap().linf_norm() <= u.linf_norm());

        let point = GridFunction::basis(spec, 32);
        let bump = mollify(&spec, &point, 4.0 * h).unwrap();
        let mass: f64 = bump.values().iter().sum();
        assert!((mass - 1.0).abs() < 1e-12);
        for d in 1..4 {
            assert_eq!(bump.values()[32 - d], bump.values()[32 + d]);
        }
        assert!(mollify(&spec, &u, 0.5 * h).is_err());
    }

    #[test]
    fn mollify_2d_mass() {
        let spec = GridSpec::new(2, 1.0, 32).unwrap();
        let point = GridFunction::basis(spec, spec.flat_index(16, 16));
        let bump = mollify(&spec, &point, 4.0 * spec.spacing()).unwrap();
        assert!((bump.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cache_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GridSpec::new(2, 1.0, 10).unwrap();
        let params = FracParams::new(2, 0.35).unwrap();
        let (built, path) = KernelWeights::load_or_build(dir.path(), &spec, &params).unwrap();
        assert!(path.exists());
        let (cached, _) = KernelWeights::load_or_build(dir.path(), &spec, &params).unwrap();
        assert_eq!(built, cached);
        assert_eq!(cached, KernelWeights::build(&spec, &params).unwrap());
    }
}
