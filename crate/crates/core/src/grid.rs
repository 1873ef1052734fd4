//! Truncated computational box, cell-centered lattice, region masks and
//! grid functions.
//!
//! Nodes are cell centers `x_i = -L + (i + 1/2) h` per axis with `h = 2L/N`.
//! In two dimensions the flat index is `iy * N + ix`. Every grid function is
//! implicitly zero outside the box.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Smallest admissible number of nodes per axis.
pub const MIN_NODES_PER_AXIS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    half_width: f64,
    nodes_per_axis: usize,
}

impl GridSpec {
    /// Builds the lattice for `dim ∈ {1, 2}`, half-width `L > 0` and
    /// `N ≥ 8` nodes per axis.
    pub fn new(dim: usize, half_width: f64, nodes_per_axis: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(invalid("dim", format!("must be 1 or 2, got {dim}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(invalid(
                "half_width",
                format!("must be positive, got {half_width}"),
            ));
        }
        if nodes_per_axis < MIN_NODES_PER_AXIS {
            return Err(invalid(
                "nodes_per_axis",
                format!("must be at least {MIN_NODES_PER_AXIS}, got {nodes_per_axis}"),
            ));
        }
        Ok(Self {
            dim,
            half_width,
            nodes_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.nodes_per_axis as f64
    }

    /// `h^n`, the measure of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of nodes, `N^dim`.
    pub fn len(&self) -> usize {
        self.nodes_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of the `k`-th node along one axis.
    #[inline]
    pub fn axis_coord(&self, k: usize) -> f64 {
        -self.half_width + (k as f64 + 0.5) * self.spacing()
    }

    /// Per-axis indices of flat node `i`; the second entry is 0 in 1D.
    #[inline]
    pub fn axis_indices(&self, i: usize) -> [usize; 2] {
        match self.dim {
            1 => [i, 0],
            _ => [i % self.nodes_per_axis, i / self.nodes_per_axis],
        }
    }

    #[inline]
    pub fn flat_index(&self, ix: usize, iy: usize) -> usize {
        match self.dim {
            1 => ix,
            _ => iy * self.nodes_per_axis + ix,
        }
    }

    /// Coordinates of node `i`; the second entry is 0 in 1D.
    #[inline]
    pub fn point(&self, i: usize) -> [f64; 2] {
        let [ix, iy] = self.axis_indices(i);
        match self.dim {
            1 => [self.axis_coord(ix), 0.0],
            _ => [self.axis_coord(ix), self.axis_coord(iy)],
        }
    }

    /// Absolute per-axis index offset between two nodes.
    #[inline]
    pub fn offset(&self, i: usize, j: usize) -> [usize; 2] {
        let [ax, ay] = self.axis_indices(i);
        let [bx, by] = self.axis_indices(j);
        [ax.abs_diff(bx), ay.abs_diff(by)]
    }

    /// Chebyshev distance between two nodes, in cells.
    #[inline]
    pub fn lattice_distance(&self, i: usize, j: usize) -> usize {
        let [dx, dy] = self.offset(i, j);
        dx.max(dy)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let [dx, dy] = self.offset(i, j);
        self.spacing() * ((dx * dx + dy * dy) as f64).sqrt()
    }

    /// True for nodes on the outermost cell ring of the box.
    pub fn is_ring(&self, i: usize) -> bool {
        let last = self.nodes_per_axis - 1;
        let [ix, iy] = self.axis_indices(i);
        match self.dim {
            1 => ix == 0 || ix == last,
            _ => ix == 0 || ix == last || iy == 0 || iy == last,
        }
    }

    pub fn nodes(&self) -> std::ops::Range<usize> {
        0..self.len()
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Open axis-aligned box; `bounds[k] = (lo, hi)` along axis `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub bounds: Vec<(f64, f64)>,
}

impl AxisBox {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Self {
            bounds: vec![(lo, hi)],
        }
    }

    pub fn rect(x: (f64, f64), y: (f64, f64)) -> Self {
        Self { bounds: vec![x, y] }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.bounds
            .iter()
            .zip(p)
            .all(|(&(lo, hi), x)| lo < x && x < hi)
    }

    fn rasterize(&self, spec: &GridSpec, name: &'static str) -> Result<Vec<usize>> {
        if self.bounds.len() != spec.dim() {
            return Err(invalid(
                "region",
                format!(
                    "box `{name}` has {} axes but the grid has dimension {}",
                    self.bounds.len(),
                    spec.dim()
                ),
            ));
        }
        let nodes: Vec<usize> = spec
            .nodes()
            .filter(|&i| self.contains(spec.point(i)))
            .collect();
        if nodes.is_empty() {
            return Err(Error::EmptyRegion(name));
        }
        Ok(nodes)
    }
}

/// Boxes from which a [`RegionLayout`] is rasterized. Only `omega` is
/// mandatory; windows not needed by an experiment may be left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBoxes {
    pub omega: AxisBox,
    pub w1: Option<AxisBox>,
    pub w2: Option<AxisBox>,
    pub omega_small: Option<AxisBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Omega,
    W1,
    W2,
    OmegaSmall,
    /// Exterior node outside every named window.
    Exterior,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::Omega => "omega",
            Region::W1 => "w1",
            Region::W2 => "w2",
            Region::OmegaSmall => "omega_small",
            Region::Exterior => "exterior",
        }
    }
}

/// Disjoint index masks for the domain, the measurement windows and the
/// counterexample set, all sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionLayout {
    spec: GridSpec,
    tags: Vec<Region>,
    omega: Vec<usize>,
    w1: Vec<usize>,
    w2: Vec<usize>,
    omega_small: Vec<usize>,
    exterior: Vec<usize>,
}

impl RegionLayout {
    /// Rasterizes the boxes onto the lattice. Fails on empty boxes, on
    /// overlaps, or when `omega_small` touches `w1 ∪ w2`.
    pub fn new(spec: &GridSpec, boxes: &RegionBoxes) -> Result<Self> {
        let omega = boxes.omega.rasterize(spec, "omega")?;
        let raster = |b: &Option<AxisBox>, name| match b {
            Some(b) => b.rasterize(spec, name),
            None => Ok(Vec::new()),
        };
        let w1 = raster(&boxes.w1, "w1")?;
        let w2 = raster(&boxes.w2, "w2")?;
        let omega_small = raster(&boxes.omega_small, "omega_small")?;
        Self::from_masks(spec, omega, w1, w2, omega_small)
    }

    /// Builds a layout from explicit node sets.
    pub fn from_masks(
        spec: &GridSpec,
        omega: Vec<usize>,
        w1: Vec<usize>,
        w2: Vec<usize>,
        omega_small: Vec<usize>,
    ) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::EmptyRegion("omega"));
        }
        let mut tags = vec![Region::Exterior; spec.len()];
        for (nodes, region) in [
            (&omega, Region::Omega),
            (&w1, Region::W1),
            (&w2, Region::W2),
            (&omega_small, Region::OmegaSmall),
        ] {
            for &i in nodes {
                if i >= spec.len() {
                    return Err(invalid("region", format!("node {i} is outside the grid")));
                }
                if tags[i] != Region::Exterior {
                    return Err(Error::RegionOverlap(tags[i].name(), region.name()));
                }
                tags[i] = region;
            }
        }
        let collect =
            |r: Region| -> Vec<usize> { spec.nodes().filter(|&i| tags[i] == r).collect() };
        let layout = Self {
            spec: *spec,
            omega: collect(Region::Omega),
            w1: collect(Region::W1),
            w2: collect(Region::W2),
            omega_small: collect(Region::OmegaSmall),
            exterior: spec.nodes().filter(|&i| tags[i] != Region::Omega).collect(),
            tags,
        };
        if !layout.omega_small.is_empty() {
            let windows: Vec<usize> = layout.w1.iter().chain(&layout.w2).copied().collect();
            let gap = lattice_gap(spec, &layout.omega_small, &windows);
            if gap < 1 {
                return Err(Error::InsufficientGap {
                    a: "omega_small",
                    b: "w1 ∪ w2",
                    gap,
                    required: 1,
                });
            }
        }
        Ok(layout)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn region_of(&self, i: usize) -> Region {
        self.tags[i]
    }

    pub fn is_omega(&self, i: usize) -> bool {
        self.tags[i] == Region::Omega
    }

    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    pub fn w1(&self) -> &[usize] {
        &self.w1
    }

    pub fn w2(&self) -> &[usize] {
        &self.w2
    }

    pub fn omega_small(&self) -> &[usize] {
        &self.omega_small
    }

    pub fn exterior(&self) -> &[usize] {
        &self.exterior
    }

    pub fn nodes_of(&self, region: Region) -> &[usize] {
        match region {
            Region::Omega => &self.omega,
            Region::W1 => &self.w1,
            Region::W2 => &self.w2,
            Region::OmegaSmall => &self.omega_small,
            Region::Exterior => &self.exterior,
        }
    }

    /// The named region, or [`Error::EmptyRegion`] if it was not configured.
    pub fn require(&self, region: Region) -> Result<&[usize]> {
        let nodes = self.nodes_of(region);
        if nodes.is_empty() {
            Err(Error::EmptyRegion(region.name()))
        } else {
            Ok(nodes)
        }
    }

    /// Same windows, different domain. Used to compare nested domains.
    pub fn with_omega(&self, omega: Vec<usize>) -> Result<Self> {
        Self::from_masks(
            &self.spec,
            omega,
            self.w1.clone(),
            self.w2.clone(),
            self.omega_small.clone(),
        )
    }
}

/// Number of whole cells strictly between two node sets (Chebyshev metric).
/// Returns `usize::MAX` if either set is empty.
pub fn lattice_gap(spec: &GridSpec, a: &[usize], b: &[usize]) -> usize {
    a.iter()
        .flat_map(|&i| b.iter().map(move |&j| spec.lattice_distance(i, j)))
        .min()
        .map_or(usize::MAX, |d| d.saturating_sub(1))
}

/// Nodal real values on the lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    spec: GridSpec,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l2: f64,
    pub linf: f64,
}

impl GridFunction {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(invalid(
                "values",
                format!("expected {} nodal values, got {}", spec.len(), values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            values: vec![0.0; spec.len()],
        }
    }

    pub fn constant(spec: GridSpec, c: f64) -> Self {
        Self {
            spec,
            values: vec![c; spec.len()],
        }
    }

    /// Samples `f` at every node. Panics if `f` returns a non-finite value.
    pub fn from_fn(spec: GridSpec, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values: Vec<f64> = spec.nodes().map(|i| f(spec.point(i))).collect();
        assert!(values.iter().all(|v| v.is_finite()), "non-finite sample");
        Self { spec, values }
    }

    /// Nodal basis function `e_i`.
    pub fn basis(spec: GridSpec, i: usize) -> Self {
        let mut u = Self::zeros(spec);
        u.values[i] = 1.0;
        u
    }

    pub fn indicator(spec: GridSpec, nodes: &[usize]) -> Self {
        let mut u = Self::zeros(spec);
        for &i in nodes {
            u.values[i] = 1.0;
        }
        u
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norms(&self) -> Norms {
        Norms {
            l2: self.l2_norm(),
            linf: self.linf_norm(),
        }
    }

    /// `(h^n Σ u_i²)^{1/2}`
    pub fn l2_norm(&self) -> f64 {
        (self.spec.cell_volume() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete L² inner product `h^n Σ u_i v_i`.
    pub fn l2_dot(&self, other: &Self) -> Result<f64> {
        self.spec.ensure_same(&other.spec)?;
        Ok(self.spec.cell_volume()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>())
    }

    /// Pointwise product.
    pub fn hadamard(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Applies `f` pointwise. Panics on grid mismatch.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.spec, other.spec, "grid mismatch");
        Self {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Copy that keeps only the values on `nodes`.
    pub fn restricted_to(&self, nodes: &[usize]) -> Self {
        let mut out = Self::zeros(self.spec);
        for &i in nodes {
            out.values[i] = self.values[i];
        }
        out
    }

    /// Nodes carrying a nonzero value.
    pub fn support(&self) -> Vec<usize> {
        self.spec
            .nodes()
            .filter(|&i| self.values[i] != 0.0)
            .collect()
    }

    /// Fails with the first node outside `allowed` that carries a nonzero value.
    pub fn ensure_supported_in(&self, allowed: &[usize], region: &'static str) -> Result<()> {
        let mut mask = vec![false; self.len()];
        for &i in allowed {
            mask[i] = true;
        }
        match self
            .spec
            .nodes()
            .find(|&i| !mask[i] && self.values[i] != 0.0)
        {
            Some(node) => Err(Error::SupportViolation { node, region }),
            None => Ok(()),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.spec, other.spec, "grid mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Add for &GridFunction {
    type Output = GridFunction;
    fn add(self, rhs: Self) -> GridFunction {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;
    fn sub(self, rhs: Self) -> GridFunction {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<&GridFunction> for f64 {
    type Output = GridFunction;
    fn mul(self, rhs: &GridFunction) -> GridFunction {
        rhs.map(|v| self * v)
    }
}
