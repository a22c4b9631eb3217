use std::ops::{Add, Mul, Sub};

use crate::error::Result;
use crate::population::MomentVector;

/// Polynomial in the opponent type `y`; `coeffs[j]` multiplies `y^j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyInY {
    coeffs: Vec<f64>,
}

impl PolyInY {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = PolyInY { coeffs };
        if p.coeffs.is_empty() {
            p.coeffs.push(0.0);
        }
        p
    }

    pub fn constant(c: f64) -> Self {
        PolyInY { coeffs: vec![c] }
    }

    /// `y`.
    pub fn identity() -> Self {
        PolyInY { coeffs: vec![0.0, 1.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * y + c)
    }

    /// `y * p(y)`.
    pub fn times_y(&self) -> PolyInY {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(0.0);
        coeffs.extend_from_slice(&self.coeffs);
        PolyInY { coeffs }
    }

    pub fn scale(&self, s: f64) -> PolyInY {
        PolyInY {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn plus_const(&self, c: f64) -> PolyInY {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    /// `E[Y^shift p(Y)]` under the law with moments `m`.
    pub fn expect_shifted(&self, m: &MomentVector, shift: usize) -> Result<f64> {
        m.require(self.degree() + shift)?;
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, &c)| c * m.get(j + shift))
            .sum())
    }

    /// `E[p(Y)]`.
    pub fn expect(&self, m: &MomentVector) -> Result<f64> {
        self.expect_shifted(m, 0)
    }

    /// `E[Y p(Y)]`, the opponent's mean cooperation when `p` is a relative density.
    pub fn expect_y(&self, m: &MomentVector) -> Result<f64> {
        self.expect_shifted(m, 1)
    }
}

impl Add for &PolyInY {
    type Output = PolyInY;

    fn add(self, rhs: &PolyInY) -> PolyInY {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let coeffs = (0..n)
            .map(|j| self.coeffs.get(j).unwrap_or(&0.0) + rhs.coeffs.get(j).unwrap_or(&0.0))
            .collect();
        PolyInY { coeffs }
    }
}

impl Sub for &PolyInY {
    type Output = PolyInY;

    fn sub(self, rhs: &PolyInY) -> PolyInY {
        self + &rhs.scale(-1.0)
    }
}

impl Mul for &PolyInY {
    type Output = PolyInY;

    fn mul(self, rhs: &PolyInY) -> PolyInY {
        let mut coeffs = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        PolyInY { coeffs }
    }
}
