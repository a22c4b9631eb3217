//! Population strategy distributions on `[0, 1]`: cell grids with boundary
//! atoms, parametric initial laws, moments and the Wasserstein-1 metric.

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::policy_from_logit;

/// Tolerance on total mass for every [`Density`].
pub const MASS_TOL: f64 = 1e-10;

/// Uniform partition of `[0, 1]` into `n_cells` cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grid {
    n_cells: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { n_cells: 200 }
    }
}

impl Grid {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::config(format!("grid needs at least 2 cells, got {n_cells}")));
        }
        Ok(Grid { n_cells })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn width(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.n_cells as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    /// Left face of cell `i` (`i = n_cells` gives the right boundary).
    pub fn face(&self, i: usize) -> f64 {
        i as f64 / self.n_cells as f64
    }

    /// Index of the cell containing `x`; the right boundary maps to the last cell.
    pub fn cell_of(&self, x: f64) -> usize {
        let i = (x * self.n_cells as f64).floor();
        if i <= 0.0 {
            0
        } else {
            (i as usize).min(self.n_cells - 1)
        }
    }
}

/// Moments `mu_1..mu_L` of a law on `[0, 1]`.
///
/// `mu_0 = 1` is stored alongside so that polynomial contractions can index
/// moments directly.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector {
    raw: Vec<f64>,
}

impl MomentVector {
    /// From `[mu_1, ..., mu_L]`.
    pub fn new(mu: &[f64]) -> Self {
        let mut raw = Vec::with_capacity(mu.len() + 1);
        raw.push(1.0);
        raw.extend_from_slice(mu);
        MomentVector { raw }
    }

    /// Highest available moment order `L`.
    pub fn order(&self) -> usize {
        self.raw.len() - 1
    }

    /// `mu_l`, with `mu_0 = 1`. Panics if `l > L`.
    pub fn get(&self, l: usize) -> f64 {
        self.raw[l]
    }

    /// `[mu_1, ..., mu_L]`.
    pub fn as_slice(&self) -> &[f64] {
        &self.raw[1..]
    }

    pub fn mean(&self) -> f64 {
        self.raw[1]
    }

    pub fn variance(&self) -> f64 {
        (self.raw[2] - self.raw[1] * self.raw[1]).max(0.0)
    }

    pub fn require(&self, order: usize) -> Result<()> {
        if self.order() < order {
            return Err(Error::MomentOrder {
                required: order,
                available: self.order(),
            });
        }
        Ok(())
    }

    /// Moments of the reflected law `1 - Y`.
    pub fn reflected(&self) -> MomentVector {
        let n = self.order();
        let mut raw = vec![0.0; n + 1];
        for (l, out) in raw.iter_mut().enumerate() {
            // E[(1 - Y)^l] = sum_i C(l, i) (-1)^i mu_i
            let mut binom = 1.0;
            let mut acc = 0.0;
            for i in 0..=l {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * binom * self.raw[i];
                binom = binom * (l - i) as f64 / (i + 1) as f64;
            }
            *out = acc;
        }
        raw[0] = 1.0;
        MomentVector { raw }
    }

    /// Exact moments of Beta(a, b): `mu_l = prod_{r<l} (a + r) / (a + b + r)`.
    pub fn of_beta(a: f64, b: f64, order: usize) -> MomentVector {
        let mut mu = Vec::with_capacity(order);
        let mut m = 1.0;
        for r in 0..order {
            m *= (a + r as f64) / (a + b + r as f64);
            mu.push(m);
        }
        MomentVector::new(&mu)
    }

    /// Moments of a discrete law with the given support points and weights
    /// (weights are normalized).
    pub fn of_points(points: &[f64], weights: &[f64], order: usize) -> MomentVector {
        let total: f64 = weights.iter().sum();
        let mut mu = vec![0.0; order];
        for (&y, &w) in points.iter().zip(weights) {
            let mut p = 1.0;
            for m in mu.iter_mut() {
                p *= y;
                *m += w * p / total;
            }
        }
        MomentVector::new(&mu)
    }

    /// Empirical moments of a sample.
    pub fn of_sample(sample: &[f64], order: usize) -> MomentVector {
        let w = vec![1.0; sample.len()];
        MomentVector::of_points(sample, &w, order)
    }

    /// Monotone moments and non-negative variance, up to `tol`.
    pub fn is_feasible(&self, tol: f64) -> bool {
        let mu = &self.raw;
        if mu[1] > 1.0 + tol || mu[mu.len() - 1] < -tol {
            return false;
        }
        if mu.windows(2).any(|w| w[1] > w[0] + tol) {
            return false;
        }
        self.order() < 2 || mu[2] + tol >= mu[1] * mu[1]
    }
}

/// Initial strategy law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitSpec {
    Beta { a: f64, b: f64 },
    Uniform,
    Dirac { p: f64 },
}

impl InitSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InitSpec::Beta { a, b } if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) => {
                Err(Error::config(format!("Beta shape parameters must be positive, got ({a}, {b})")))
            }
            InitSpec::Dirac { p } if !(0.0..=1.0).contains(&p) => {
                Err(Error::config(format!("Dirac location must lie in [0, 1], got {p}")))
            }
            _ => Ok(()),
        }
    }

    /// Closed-form moments, used as the oracle for grid quadrature.
    pub fn exact_moments(&self, order: usize) -> MomentVector {
        match *self {
            InitSpec::Beta { a, b } => MomentVector::of_beta(a, b, order),
            InitSpec::Uniform => MomentVector::of_beta(1.0, 1.0, order),
            InitSpec::Dirac { p } => MomentVector::of_points(&[p], &[1.0], order),
        }
    }

    /// Draws one cooperation probability.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InitSpec::Beta { a, b } => BetaDist::new(a, b)
                .expect("validated Beta parameters")
                .sample(rng),
            InitSpec::Uniform => rng.random::<f64>(),
            InitSpec::Dirac { p } => p,
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match *self {
            InitSpec::Beta { a, b } => x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0),
            InitSpec::Uniform => 1.0,
            InitSpec::Dirac { .. } => unreachable!("Dirac has no density"),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            InitSpec::Beta { a, b } => format!("beta({a},{b})"),
            InitSpec::Uniform => "uniform".to_string(),
            InitSpec::Dirac { p } => format!("dirac({p})"),
        }
    }
}

/// Probability law on `[0, 1]` as cell masses plus point masses at the two
/// boundaries.
#[derive(Clone, Debug, PartialEq)]
pub struct Density {
    grid: Grid,
    cell_mass: Vec<f64>,
    left_atom: f64,
    right_atom: f64,
}

impl Density {
    /// Builds a density whose parts must already sum to one.
    pub fn from_parts(grid: Grid, cell_mass: Vec<f64>, left_atom: f64, right_atom: f64) -> Result<Self> {
        let d = Density::unchecked(grid, cell_mass, left_atom, right_atom)?;
        let total = d.total_mass();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::numerical(format!("density mass {total} differs from 1")));
        }
        Ok(d)
    }

    /// Builds a density from non-negative weights, normalizing them.
    pub fn from_weights(grid: Grid, weights: Vec<f64>, left_atom: f64, right_atom: f64) -> Result<Self> {
        let mut d = Density::unchecked(grid, weights, left_atom, right_atom)?;
        let total = d.total_mass();
        if !(total > 0.0) {
            return Err(Error::numerical("cannot normalize a zero-mass density"));
        }
        d.cell_mass.iter_mut().for_each(|m| *m /= total);
        d.left_atom /= total;
        d.right_atom /= total;
        Ok(d)
    }

    fn unchecked(grid: Grid, cell_mass: Vec<f64>, left_atom: f64, right_atom: f64) -> Result<Self> {
        if cell_mass.len() != grid.n_cells() {
            return Err(Error::GridMismatch(cell_mass.len(), grid.n_cells()));
        }
        let ok = |m: f64| m.is_finite() && m >= 0.0;
        if !cell_mass.iter().all(|&m| ok(m)) || !ok(left_atom) || !ok(right_atom) {
            return Err(Error::numerical("density has negative or non-finite mass"));
        }
        Ok(Density {
            grid,
            cell_mass,
            left_atom,
            right_atom,
        })
    }

    pub fn uniform(grid: Grid) -> Self {
        let n = grid.n_cells();
        Density {
            grid,
            cell_mass: vec![1.0 / n as f64; n],
            left_atom: 0.0,
            right_atom: 0.0,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn cell_mass(&self) -> &[f64] {
        &self.cell_mass
    }

    pub fn left_atom(&self) -> f64 {
        self.left_atom
    }

    pub fn right_atom(&self) -> f64 {
        self.right_atom
    }

    pub fn total_mass(&self) -> f64 {
        self.cell_mass.iter().sum::<f64>() + self.left_atom + self.right_atom
    }

    /// Cell masses divided by the cell width (atoms excluded).
    pub fn density_values(&self) -> Vec<f64> {
        let n = self.grid.n_cells() as f64;
        self.cell_mass.iter().map(|m| m * n).collect()
    }

    /// `mu_1..mu_order` by midpoint quadrature; the left atom contributes 0.
    pub fn moments(&self, order: usize) -> MomentVector {
        let mut mu = vec![self.right_atom; order];
        for (i, &m) in self.cell_mass.iter().enumerate() {
            let y = self.grid.center(i);
            let mut p = 1.0;
            for acc in mu.iter_mut() {
                p *= y;
                *acc += m * p;
            }
        }
        MomentVector::new(&mu)
    }

    pub fn mean(&self) -> f64 {
        self.moments(1).get(1)
    }

    pub fn variance(&self) -> f64 {
        self.moments(2).variance()
    }

    /// `E[f(Y)]` with cell masses placed at the centers.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        let interior: f64 = self
            .cell_mass
            .iter()
            .enumerate()
            .map(|(i, &m)| m * f(self.grid.center(i)))
            .sum();
        interior + self.left_atom * f(0.0) + self.right_atom * f(1.0)
    }

    /// Mass of cells whose centers lie in `[lo, hi]`, plus any atom inside.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        let mut total = 0.0;
        if lo <= 0.0 {
            total += self.left_atom;
        }
        if hi >= 1.0 {
            total += self.right_atom;
        }
        for (i, &m) in self.cell_mass.iter().enumerate() {
            let y = self.grid.center(i);
            if y >= lo && y <= hi {
                total += m;
            }
        }
        total
    }

    /// Mass within `frac` of either boundary (atoms included).
    pub fn boundary_fraction(&self, frac: f64) -> f64 {
        self.mass_in(0.0, frac) + self.mass_in(1.0 - frac, 1.0)
    }

    /// Convex combination `(1 - lambda) self + lambda other`.
    pub fn mix(&self, other: &Density, lambda: f64) -> Result<Density> {
        self.check_grid(other)?;
        let cell_mass = self
            .cell_mass
            .iter()
            .zip(&other.cell_mass)
            .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
            .collect();
        Density::from_weights(
            self.grid,
            cell_mass,
            (1.0 - lambda) * self.left_atom + lambda * other.left_atom,
            (1.0 - lambda) * self.right_atom + lambda * other.right_atom,
        )
    }

    /// Cell-wise average of densities on a common grid.
    pub fn average(densities: &[Density]) -> Result<Density> {
        let first = densities
            .first()
            .ok_or_else(|| Error::config("cannot average an empty set of densities"))?;
        let n = densities.len() as f64;
        let mut cells = vec![0.0; first.grid.n_cells()];
        let (mut left, mut right) = (0.0, 0.0);
        for d in densities {
            first.check_grid(d)?;
            for (acc, m) in cells.iter_mut().zip(&d.cell_mass) {
                *acc += m / n;
            }
            left += d.left_atom / n;
            right += d.right_atom / n;
        }
        Density::from_weights(first.grid, cells, left, right)
    }

    /// Reflection `y -> 1 - y`.
    pub fn reflected(&self) -> Density {
        let mut cell_mass = self.cell_mass.clone();
        cell_mass.reverse();
        Density {
            grid: self.grid,
            cell_mass,
            left_atom: self.right_atom,
            right_atom: self.left_atom,
        }
    }

    /// Same law re-binned onto a coarser (or equal) grid by cell centers.
    pub fn rebin(&self, grid: Grid) -> Density {
        let mut cells = vec![0.0; grid.n_cells()];
        for (i, &m) in self.cell_mass.iter().enumerate() {
            cells[grid.cell_of(self.grid.center(i))] += m;
        }
        Density {
            grid,
            cell_mass: cells,
            left_atom: self.left_atom,
            right_atom: self.right_atom,
        }
    }

    fn check_grid(&self, other: &Density) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(self.grid.n_cells(), other.grid.n_cells()));
        }
        Ok(())
    }
}

/// Discretizes an initial law onto `grid` (midpoint rule for smooth laws).
pub fn init_density(spec: &InitSpec, grid: Grid) -> Result<Density> {
    spec.validate()?;
    let n = grid.n_cells();
    match *spec {
        InitSpec::Dirac { p } if p == 0.0 => Density::from_parts(grid, vec![0.0; n], 1.0, 0.0),
        InitSpec::Dirac { p } if p == 1.0 => Density::from_parts(grid, vec![0.0; n], 0.0, 1.0),
        InitSpec::Dirac { p } => {
            let mut cells = vec![0.0; n];
            cells[grid.cell_of(p)] = 1.0;
            Density::from_parts(grid, cells, 0.0, 0.0)
        }
        _ => {
            let weights = (0..n).map(|i| spec.pdf(grid.center(i))).collect();
            Density::from_weights(grid, weights, 0.0, 0.0)
        }
    }
}

/// Wasserstein-1 distance: the L1 distance between the two CDFs, with cell
/// masses at centers and atoms at the endpoints.
pub fn wasserstein1(d1: &Density, d2: &Density) -> Result<f64> {
    d1.check_grid(d2)?;
    let grid = d1.grid;
    let n = grid.n_cells();
    // Support points: 0, centers..., 1. CDF difference is constant between them.
    let mut diff = d1.left_atom - d2.left_atom;
    let mut prev = 0.0;
    let mut total = 0.0;
    for i in 0..n {
        let x = grid.center(i);
        total += diff.abs() * (x - prev);
        diff += d1.cell_mass[i] - d2.cell_mass[i];
        prev = x;
    }
    total += diff.abs() * (1.0 - prev);
    Ok(total)
}

/// Histogram of agent policies `x = sigmoid(z)` on `grid`.
pub fn empirical_histogram(logits: &[f64], grid: Grid) -> Result<Density> {
    if logits.is_empty() {
        return Err(Error::config("empirical histogram of an empty population"));
    }
    let policies: Vec<f64> = logits.iter().map(|&z| policy_from_logit(z)).collect();
    histogram_of_policies(&policies, grid)
}

/// Histogram of cooperation probabilities on `grid`; exact 0 and 1 go to the atoms.
pub fn histogram_of_policies(policies: &[f64], grid: Grid) -> Result<Density> {
    if policies.is_empty() {
        return Err(Error::config("empirical histogram of an empty population"));
    }
    let mut cells = vec![0.0; grid.n_cells()];
    let (mut left, mut right) = (0.0, 0.0);
    for &x in policies {
        if x <= 0.0 {
            left += 1.0;
        } else if x >= 1.0 {
            right += 1.0;
        } else {
            cells[grid.cell_of(x)] += 1.0;
        }
    }
    Density::from_weights(grid, cells, left, right)
}
