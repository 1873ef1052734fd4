//! Dense double-loop oracle built from the defining formulas.

use fraccond::grid::GridSpec;
use fraccond::kernel::KernelWeights;

/// Dense pair weights from the defining formulas. For the adjacent 2D
/// cells the library value is used; it is checked separately against
/// a Richardson midpoint rule in the oracle tests.
pub fn oracle_pair(w: &KernelWeights, i: usize, j: usize) -> f64 {
    let spec = w.spec();
    let (s, c, h) = (w.s(), w.params().c_ns(), spec.spacing());
    let n = spec.dim() as i32;
    let pi = spec.point(i);
    let pj = spec.point(j);
    let dx = ((pi[0] - pj[0]) / h).round().abs();
    let dy = ((pi[1] - pj[1]) / h).round().abs();
    if dx.max(dy) == 0.0 {
        return 0.0;
    }
    if dx.max(dy) >= 2.0 {
        let r = h * (dx * dx + dy * dy).sqrt();
        return 0.5 * c * h.powi(2 * n) * r.powf(-(n as f64) - 2.0 * s);
    }
    if n == 1 {
        return 0.5 * c * h * ((0.5 * h).powf(-2.0 * s) - (1.5 * h).powf(-2.0 * s)) / (2.0 * s);
    }
    w.pair(i, j)
}

pub fn oracle_tau_1d(spec: &GridSpec, c: f64, s: f64, i: usize) -> f64 {
    // ∫_{|y|>L} |x − y|^{−1−2s} dy
    let (l, x, h) = (spec.half_width(), spec.point(i)[0], spec.spacing());
    c * h * ((l - x).powf(-2.0 * s) + (l + x).powf(-2.0 * s)) / (2.0 * s)
}

pub struct Dense {
    pub w: Vec<Vec<f64>>,
    pub tau: Vec<f64>,
    pub hn: f64,
}

pub fn dense(w: &KernelWeights) -> Dense {
    let spec = w.spec();
    let n = spec.len();
    let tau = if spec.dim() == 1 {
        spec.nodes()
            .map(|i| oracle_tau_1d(spec, w.params().c_ns(), w.s(), i))
            .collect()
    } else {
        w.tau().to_vec()
    };
    Dense {
        w: (0..n)
            .map(|i| (0..n).map(|j| oracle_pair(w, i, j)).collect())
            .collect(),
        tau,
        hn: spec.cell_volume(),
    }
}

impl Dense {
    /// `(value, Σ|terms|)` of `(−Δ)^s u` at node `i`.
    pub fn laplacian(&self, u: &[f64], i: usize) -> (f64, f64) {
        let mut v = self.tau[i] * u[i];
        let mut a = v.abs();
        for j in 0..u.len() {
            let t = 2.0 * self.w[i][j] * (u[i] - u[j]);
            v += t;
            a += t.abs();
        }
        (v / self.hn, a / self.hn)
    }

    /// `(value, Σ|terms|)` of `B_γ(u, v)` with `a = γ^{1/2}` (`a ≡ 1` for B₁).
    pub fn form(&self, a: &[f64], u: &[f64], v: &[f64]) -> (f64, f64) {
        let mut val = 0.0;
        let mut abs = 0.0;
        for i in 0..u.len() {
            let t = self.tau[i] * a[i] * u[i] * v[i];
            val += t;
            abs += t.abs();
            for j in 0..u.len() {
                if i != j {
                    let t = self.w[i][j] * a[i] * a[j] * (u[i] - u[j]) * (v[i] - v[j]);
                    val += t;
                    abs += t.abs();
                }
            }
        }
        (val, abs)
    }
}

pub fn small_grids() -> Vec<GridSpec> {
    let mut out: Vec<GridSpec> = [8, 16, 33, 64, 128, 200]
        .into_iter()
        .map(|n| GridSpec::new(1, 1.0, n).unwrap())
        .collect();
    out.extend(
        [8, 10, 12, 14]
            .into_iter()
            .map(|n| GridSpec::new(2, 1.0, n).unwrap()),
    );
    out
}
