#![allow(dead_code)]

pub mod dense;

use fraccond::forms::Conductivity;
use fraccond::grid::{AxisBox, GridFunction, GridSpec, RegionBoxes, RegionLayout};
use fraccond::kernel::{FracParams, KernelWeights};

pub fn weights(spec: &GridSpec, s: f64) -> KernelWeights {
    KernelWeights::build(spec, &FracParams::new(spec.dim(), s).unwrap()).unwrap()
}

/// Ω = (−0.5, 0.5) with two windows on either side.
pub fn layout_1d(spec: &GridSpec) -> RegionLayout {
    RegionLayout::new(
        spec,
        &RegionBoxes {
            omega: AxisBox::interval(-0.5, 0.5),
            w1: Some(AxisBox::interval(-0.95, -0.6)),
            w2: Some(AxisBox::interval(0.6, 0.95)),
            omega_small: None,
        },
    )
    .unwrap()
}

pub fn layout_2d(spec: &GridSpec) -> RegionLayout {
    RegionLayout::new(
        spec,
        &RegionBoxes {
            omega: AxisBox::rect((-0.5, 0.5), (-0.5, 0.5)),
            w1: Some(AxisBox::rect((-0.95, -0.65), (-0.95, 0.95))),
            w2: Some(AxisBox::rect((0.65, 0.95), (-0.95, 0.95))),
            omega_small: None,
        },
    )
    .unwrap()
}

/// Counterexample geometry: ω sits between Ω and W₂.
pub fn counterexample_layout(spec: &GridSpec) -> RegionLayout {
    let boxes = if spec.dim() == 1 {
        RegionBoxes {
            omega: AxisBox::interval(-0.5, 0.5),
            w1: Some(AxisBox::interval(-0.95, -0.75)),
            w2: Some(AxisBox::interval(0.75, 0.95)),
            omega_small: Some(AxisBox::interval(0.57, 0.63)),
        }
    } else {
        RegionBoxes {
            omega: AxisBox::rect((-0.5, 0.5), (-0.5, 0.5)),
            w1: Some(AxisBox::rect((-0.95, -0.7), (-0.95, 0.95))),
            w2: Some(AxisBox::rect((0.7, 0.95), (-0.95, 0.95))),
            omega_small: Some(AxisBox::rect((-0.4, 0.4), (0.58, 0.66))),
        }
    };
    RegionLayout::new(spec, &boxes).unwrap()
}

/// Ω on the left half, one wide window W₁ = (0.1, 0.9) on the right.
pub fn window_layout(spec: &GridSpec) -> RegionLayout {
    RegionLayout::new(
        spec,
        &RegionBoxes {
            omega: AxisBox::interval(-0.9, 0.0),
            w1: Some(AxisBox::interval(0.1, 0.9)),
            w2: None,
            omega_small: None,
        },
    )
    .unwrap()
}

/// C^∞ step: 0 for t ≤ 0, 1 for t ≥ 1.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// Flat-top bump: `amp` within `0.5 r` of `c`, zero beyond `r` (1D).
pub fn plateau(spec: GridSpec, c: f64, r: f64, amp: f64) -> GridFunction {
    GridFunction::from_fn(spec, move |p| {
        amp * smooth_step((r - (p[0] - c).abs()) / (0.5 * r))
    })
}

pub fn from_deviation(m: &GridFunction) -> Conductivity {
    Conductivity::from_deviation(m).unwrap()
}

pub fn nearest_node(spec: &GridSpec, x: [f64; 2]) -> usize {
    let d = |i: usize| {
        let p = spec.point(i);
        (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)
    };
    spec.nodes().min_by(|&a, &b| d(a).total_cmp(&d(b))).unwrap()
}
