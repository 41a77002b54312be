//! Square matrices of jets tagged with a homogeneity degree in the
//! cotangent variable.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DtnError, Result};
use crate::jet::{Jet, JetSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolMatrix {
    dim: usize,
    degree: i32,
    entries: Vec<Jet>,
}

impl SymbolMatrix {
    pub fn zeros(space: &Arc<JetSpace>, dim: usize, degree: i32) -> SymbolMatrix {
        SymbolMatrix {
            dim,
            degree,
            entries: vec![Jet::zero(space); dim * dim],
        }
    }

    pub fn identity(space: &Arc<JetSpace>, dim: usize) -> SymbolMatrix {
        let mut m = SymbolMatrix::zeros(space, dim, 0);
        for j in 0..dim {
            m.set(j, j, Jet::constant(space, 1.0));
        }
        m
    }

    /// Builds a matrix from a row-major closure.
    pub fn from_fn(
        dim: usize,
        degree: i32,
        mut f: impl FnMut(usize, usize) -> Jet,
    ) -> SymbolMatrix {
        let mut entries = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                entries.push(f(r, c));
            }
        }
        SymbolMatrix {
            dim,
            degree,
            entries,
        }
    }

    /// Diagonal matrix with the given jets.
    pub fn diagonal(diag: &[Jet], degree: i32) -> SymbolMatrix {
        let space = diag[0].space().clone();
        let mut m = SymbolMatrix::zeros(&space, diag.len(), degree);
        for (j, d) in diag.iter().enumerate() {
            m.set(j, j, d.clone());
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> i32 {
        self.degree
    }

    pub fn with_degree(mut self, degree: i32) -> SymbolMatrix {
        self.degree = degree;
        self
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        self.entries[0].space()
    }

    pub fn get(&self, r: usize, c: usize) -> &Jet {
        &self.entries[r * self.dim + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: Jet) {
        self.entries[r * self.dim + c] = value;
    }

    pub fn entries(&self) -> &[Jet] {
        &self.entries
    }

    /// Smallest usable order among the entries.
    pub fn order(&self) -> i32 {
        self.entries.iter().map(Jet::order).min().unwrap_or(0)
    }

    fn check_dim(&self, other: &SymbolMatrix) -> Result<()> {
        if self.dim != other.dim {
            return Err(DtnError::InvalidInput(format!(
                "symbol matrix dimensions differ: {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &SymbolMatrix) -> Result<SymbolMatrix> {
        self.check_dim(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.try_add(b))
            .collect::<Result<_>>()?;
        Ok(SymbolMatrix {
            dim: self.dim,
            degree: self.degree,
            entries,
        })
    }

    pub fn try_sub(&self, other: &SymbolMatrix) -> Result<SymbolMatrix> {
        self.check_dim(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.try_sub(b))
            .collect::<Result<_>>()?;
        Ok(SymbolMatrix {
            dim: self.dim,
            degree: self.degree,
            entries,
        })
    }

    /// Matrix product; degrees add.
    pub fn try_matmul(&self, other: &SymbolMatrix) -> Result<SymbolMatrix> {
        self.check_dim(other)?;
        let n = self.dim;
        let mut entries = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                let mut acc: Option<Jet> = None;
                for k in 0..n {
                    let a = self.get(r, k);
                    let b = other.get(k, c);
                    let t = a.try_mul(b)?;
                    acc = Some(match acc {
                        None => t,
                        Some(s) => s.try_add(&t)?,
                    });
                }
                entries.push(acc.expect("dimension is positive"));
            }
        }
        Ok(SymbolMatrix {
            dim: n,
            degree: self.degree + other.degree,
            entries,
        })
    }

    pub fn add(&self, other: &SymbolMatrix) -> SymbolMatrix {
        self.try_add(other)
            .expect("symbol matrices must share a shape")
    }

    pub fn sub(&self, other: &SymbolMatrix) -> SymbolMatrix {
        self.try_sub(other)
            .expect("symbol matrices must share a shape")
    }

    pub fn matmul(&self, other: &SymbolMatrix) -> SymbolMatrix {
        self.try_matmul(other)
            .expect("symbol matrices must share a shape")
    }

    pub fn scale(&self, factor: impl Into<Complex64>) -> SymbolMatrix {
        let f = factor.into();
        self.map(|j| j.scale(f))
    }

    /// Entrywise multiplication by a scalar jet; degrees add.
    pub fn scale_jet(&self, factor: &Jet, factor_degree: i32) -> SymbolMatrix {
        let mut m = self.map(|j| j * factor);
        m.degree += factor_degree;
        m
    }

    pub fn map(&self, f: impl Fn(&Jet) -> Jet) -> SymbolMatrix {
        SymbolMatrix {
            dim: self.dim,
            degree: self.degree,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    /// Entrywise partial derivative. A cotangent derivative lowers the
    /// degree; pass `degree_shift = -1` for those, `0` for spatial ones.
    pub fn partial(&self, var: usize, degree_shift: i32) -> SymbolMatrix {
        let mut m = self.map(|j| j.partial(var));
        m.degree += degree_shift;
        m
    }

    pub fn fix_vars(&self, vars: &[usize]) -> SymbolMatrix {
        self.map(|j| j.fix_vars(vars))
    }

    pub fn transpose(&self) -> SymbolMatrix {
        SymbolMatrix::from_fn(self.dim, self.degree, |r, c| self.get(c, r).clone())
    }

    /// Largest coefficient modulus over all entries.
    pub fn max_norm(&self) -> f64 {
        self.entries.iter().map(Jet::max_norm).fold(0.0, f64::max)
    }

    /// Max-norm distance to another matrix.
    pub fn distance(&self, other: &SymbolMatrix) -> f64 {
        self.sub(other).max_norm()
    }

    /// Values at the base point.
    pub fn value(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim, self.dim, |r, c| self.get(r, c).value())
    }

    pub fn report(&self) -> SymbolReport {
        let v = self.value();
        SymbolReport {
            degree: self.degree,
            dim: self.dim,
            entries: (0..self.dim)
                .flat_map(|r| (0..self.dim).map(move |c| (r, c)))
                .map(|(r, c)| [v[(r, c)].re, v[(r, c)].im])
                .collect(),
        }
    }
}

/// Serializable base-point value of a symbol matrix: row-major entries as
/// `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolReport {
    pub degree: i32,
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

/// Inverse of a symbol matrix by jet Gauss-Jordan elimination.
pub fn invert(m: &SymbolMatrix, quantity: &str) -> Result<SymbolMatrix> {
    let rows: Vec<Vec<Jet>> = (0..m.dim)
        .map(|r| (0..m.dim).map(|c| m.get(r, c).clone()).collect())
        .collect();
    let inv = crate::geometry::invert_jet_matrix(&rows, quantity)?;
    Ok(SymbolMatrix::from_fn(m.dim, -m.degree, |r, c| {
        inv[r][c].clone()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_inverse() {
        let s = JetSpace::get(2, 3);
        let x = Jet::variable(&s, 0, 0.0);
        let one = Jet::constant(&s, 1.0);
        let m = SymbolMatrix::from_fn(2, 0, |r, c| match (r, c) {
            (0, 0) => one.add_scalar(1.0),
            (0, 1) => x.clone(),
            (1, 0) => x.scale(2.0),
            _ => one.add_scalar(2.0),
        });
        let inv = invert(&m, "m").unwrap();
        let id = m.matmul(&inv);
        assert!(id.distance(&SymbolMatrix::identity(&s, 2)) < 1e-14);
        assert_eq!(m.transpose().get(0, 1), m.get(1, 0));
    }
}
