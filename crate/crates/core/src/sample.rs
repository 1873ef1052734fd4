//! Seeded random conductivities and test functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::forms::Conductivity;
use crate::grid::{GridFunction, GridSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nodewise `γ_i ~ U[lo, hi]` off the outermost ring, 1 on it.
pub fn random_elliptic(
    spec: GridSpec,
    lo: f64,
    hi: f64,
    rng: &mut impl Rng,
) -> Result<Conductivity> {
    if !(0.0 < lo && lo <= hi) {
        return Err(invalid(
            "range",
            format!("need 0 < lo <= hi, got [{lo}, {hi}]"),
        ));
    }
    let values = spec
        .nodes()
        .map(|i| {
            if spec.is_ring(i) {
                1.0
            } else {
                rng.random_range(lo..=hi)
            }
        })
        .collect();
    Conductivity::new(GridFunction::new(spec, values)?)
}

/// `γ = (1 + m)²` with `m` a sum of `bumps` smooth bumps of random centre,
/// radius and sign, scaled to `‖m‖_∞ = amplitude` and vanishing within
/// `margin` of the box boundary.
pub fn random_smooth(
    spec: GridSpec,
    bumps: usize,
    amplitude: f64,
    margin: f64,
    rng: &mut impl Rng,
) -> Result<Conductivity> {
    if !(0.0 < amplitude && amplitude < 1.0) {
        return Err(invalid(
            "amplitude",
            format!("must lie in (0, 1), got {amplitude}"),
        ));
    }
    let l = spec.half_width();
    if !(margin >= 0.0 && margin < 0.5 * l) {
        return Err(invalid(
            "margin",
            format!("must lie in [0, L/2), got {margin}"),
        ));
    }
    let inner = l - margin;
    let mut specs = Vec::with_capacity(bumps);
    for _ in 0..bumps {
        let r = rng.random_range(0.15 * inner..0.5 * inner);
        let mut c = [0.0; 2];
        for x in c.iter_mut().take(spec.dim()) {
            *x = rng.random_range(-(inner - r)..(inner - r));
        }
        let a = rng.random_range(0.3..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        specs.push((c, r, a));
    }
    let m = GridFunction::from_fn(spec, |p| {
        specs
            .iter()
            .map(|&(c, r, a)| {
                let t = ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)) / (r * r);
                if t < 1.0 {
                    a * (-t / (1.0 - t)).exp()
                } else {
                    0.0
                }
            })
            .sum()
    });
    let peak = m.linf_norm();
    let m = if peak > 0.0 {
        (amplitude / peak) * &m
    } else {
        m
    };
    Conductivity::from_deviation(&m)
}

/// Values `U[−1, 1]` on every node.
pub fn random_function(spec: GridSpec, rng: &mut impl Rng) -> GridFunction {
    let values = spec.nodes().map(|_| rng.random_range(-1.0..=1.0)).collect();
    GridFunction::new(spec, values).expect("finite samples")
}

/// Values `U[−1, 1]` on `nodes`, zero elsewhere.
pub fn random_supported(spec: GridSpec, nodes: &[usize], rng: &mut impl Rng) -> GridFunction {
    let mut f = GridFunction::zeros(spec);
    for &k in nodes {
        f.values_mut()[k] = rng.random_range(-1.0..=1.0);
    }
    f
}
