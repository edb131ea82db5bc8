use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// `M(y) = constant + Σ_j y_j·coeff_j` over symmetric blocks of one order.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineSymMap {
    constant: SymMatrix,
    coeffs: Vec<SymMatrix>,
}

impl AffineSymMap {
    pub fn new(constant: SymMatrix, coeffs: Vec<SymMatrix>) -> Result<Self> {
        let d = constant.order();
        if let Some(bad) = coeffs.iter().find(|c| c.order() != d) {
            return Err(Error::dim(d, bad.order()));
        }
        Ok(AffineSymMap { constant, coeffs })
    }

    /// A map with the given order and variable count, all blocks zero.
    pub fn zeros(order: usize, num_vars: usize) -> Self {
        AffineSymMap {
            constant: SymMatrix::zeros(order),
            coeffs: vec![SymMatrix::zeros(order); num_vars],
        }
    }

    pub fn order(&self) -> usize {
        self.constant.order()
    }

    pub fn num_vars(&self) -> usize {
        self.coeffs.len()
    }

    pub fn constant(&self) -> &SymMatrix {
        &self.constant
    }

    pub fn coeff(&self, j: usize) -> &SymMatrix {
        &self.coeffs[j]
    }

    pub fn coeffs(&self) -> &[SymMatrix] {
        &self.coeffs
    }

    pub fn set_constant(&mut self, m: SymMatrix) {
        assert_eq!(m.order(), self.order());
        self.constant = m;
    }

    pub fn set_coeff(&mut self, j: usize, m: SymMatrix) {
        assert_eq!(m.order(), self.order());
        self.coeffs[j] = m;
    }

    pub fn eval(&self, y: &[f64]) -> Result<SymMatrix> {
        if y.len() != self.coeffs.len() {
            return Err(Error::dim(self.coeffs.len(), y.len()));
        }
        let mut m = self.constant.as_matrix().clone();
        for (c, &v) in self.coeffs.iter().zip(y) {
            if v != 0.0 {
                m += c.as_matrix() * v;
            }
        }
        Ok(SymMatrix::from_upper(m).expect("blocks share one order"))
    }

    /// Every block multiplied by `gamma`.
    pub fn scaled(&self, gamma: f64) -> Self {
        AffineSymMap {
            constant: self.constant.scale(gamma),
            coeffs: self.coeffs.iter().map(|c| c.scale(gamma)).collect(),
        }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    /// Appends `extra` variables with zero coefficient blocks.
    pub fn padded(&self, extra: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.extend(std::iter::repeat_n(SymMatrix::zeros(self.order()), extra));
        AffineSymMap {
            constant: self.constant.clone(),
            coeffs,
        }
    }

    /// Indices of variables whose coefficient block is not identically zero.
    pub(crate) fn active_vars(&self) -> Vec<usize> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.iter().any(|v| *v != 0.0))
            .map(|(j, _)| j)
            .collect()
    }
}

/// Block-matrix builder for assembling structured LMIs entry by entry.
pub(crate) struct BlockBuilder {
    map: AffineSymMap,
}

impl BlockBuilder {
    pub fn new(order: usize, num_vars: usize) -> Self {
        BlockBuilder {
            map: AffineSymMap::zeros(order, num_vars),
        }
    }

    /// Adds `scale·m` at rows `r..`, cols `c..` of the constant block and its
    /// transpose at the mirrored position when off the diagonal block.
    pub fn add_constant(&mut self, r: usize, c: usize, m: &DMatrix<f64>) {
        let mut k = self.map.constant.as_matrix().clone();
        add_sym(&mut k, r, c, m);
        self.map.constant = SymMatrix::from_upper(k).expect("square");
    }

    pub fn add_coeff(&mut self, var: usize, r: usize, c: usize, m: &DMatrix<f64>) {
        let mut k = self.map.coeffs[var].as_matrix().clone();
        add_sym(&mut k, r, c, m);
        self.map.coeffs[var] = SymMatrix::from_upper(k).expect("square");
    }

    pub fn finish(self) -> AffineSymMap {
        self.map
    }
}

fn add_sym(k: &mut DMatrix<f64>, r: usize, c: usize, m: &DMatrix<f64>) {
    let (p, q) = m.shape();
    if r == c {
        let mut view = k.view_mut((r, c), (p, q));
        view += m;
    } else {
        {
            let mut view = k.view_mut((r, c), (p, q));
            view += m;
        }
        let mut view = k.view_mut((c, r), (q, p));
        view += m.transpose();
    }
}
