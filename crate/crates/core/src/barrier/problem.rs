use crate::error::{Error, Result};
use crate::linalg::{sym_basis, sym_dim, SymMatrix};

use super::map::{AffineSymMap, BlockBuilder};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    /// `M(y) ⪯ 0`
    NegSemidefinite,
    /// `M(y) ⪰ 0`
    PosSemidefinite,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LmiConstraint {
    pub map: AffineSymMap,
    pub sense: Sense,
}

impl LmiConstraint {
    /// The slack `S(y)` that must stay positive definite in the interior.
    pub fn slack_map(&self) -> AffineSymMap {
        match self.sense {
            Sense::PosSemidefinite => self.map.clone(),
            Sense::NegSemidefinite => self.map.negated(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Objective {
    /// `cᵀy`
    Linear(Vec<f64>),
    /// `−log det S_k(y)` for the slack of constraint `k`.
    NegLogDet { constraint: usize },
    /// `trace(S_k(y)⁻¹)` for the slack of constraint `k`.
    TraceInverse { constraint: usize },
}

/// Minimize an objective over `y` subject to LMIs and `y_j ≥ 0` on a
/// subset of coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct LmiProblem {
    num_vars: usize,
    objective: Objective,
    constraints: Vec<LmiConstraint>,
    nonneg: Vec<usize>,
}

impl LmiProblem {
    pub fn new(num_vars: usize, objective: Objective) -> Self {
        LmiProblem {
            num_vars,
            objective,
            constraints: Vec::new(),
            nonneg: Vec::new(),
        }
    }

    /// Adds `map(y) ⪯ 0` and returns its index.
    pub fn nsd(&mut self, map: AffineSymMap) -> usize {
        self.push(map, Sense::NegSemidefinite)
    }

    /// Adds `map(y) ⪰ 0` and returns its index.
    pub fn psd(&mut self, map: AffineSymMap) -> usize {
        self.push(map, Sense::PosSemidefinite)
    }

    fn push(&mut self, map: AffineSymMap, sense: Sense) -> usize {
        self.constraints.push(LmiConstraint { map, sense });
        self.constraints.len() - 1
    }

    pub fn nonneg(&mut self, vars: impl IntoIterator<Item = usize>) {
        self.nonneg.extend(vars);
        self.nonneg.sort_unstable();
        self.nonneg.dedup();
    }

    pub fn set_objective(&mut self, objective: Objective) {
        self.objective = objective;
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn constraints(&self) -> &[LmiConstraint] {
        &self.constraints
    }

    pub fn constraints_mut(&mut self) -> &mut [LmiConstraint] {
        &mut self.constraints
    }

    pub fn nonneg_vars(&self) -> &[usize] {
        &self.nonneg
    }

    pub fn validate(&self) -> Result<()> {
        if self.constraints.is_empty() && self.nonneg.is_empty() {
            return Err(Error::InvalidProblem("no constraints".into()));
        }
        for c in &self.constraints {
            if c.map.num_vars() != self.num_vars {
                return Err(Error::dim(self.num_vars, c.map.num_vars()));
            }
        }
        if let Some(&j) = self.nonneg.iter().find(|&&j| j >= self.num_vars) {
            return Err(Error::InvalidProblem(format!("nonnegative index {j} out of range")));
        }
        match &self.objective {
            Objective::Linear(c) if c.len() != self.num_vars => {
                Err(Error::dim(self.num_vars, c.len()))
            }
            Objective::NegLogDet { constraint } | Objective::TraceInverse { constraint }
                if *constraint >= self.constraints.len() =>
            {
                Err(Error::InvalidProblem(format!(
                    "objective refers to undeclared constraint {constraint}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Slack of constraint `k` evaluated at `y`.
    pub fn slack(&self, k: usize, y: &[f64]) -> Result<SymMatrix> {
        self.constraints[k].slack_map().eval(&y[..self.num_vars])
    }

    /// Replaces a `trace(S⁻¹)` objective by `trace(Z)` with the epigraph
    /// LMI `[[Z, I], [I, S(y)]] ⪰ 0`; `Z` is appended in scaled
    /// upper-triangle coordinates. Other problems are returned unchanged.
    pub(crate) fn lower_trace_inverse(&self) -> LmiProblem {
        let Objective::TraceInverse { constraint } = self.objective else {
            return self.clone();
        };
        let slack = self.constraints[constraint].slack_map();
        let d = slack.order();
        let extra = sym_dim(d);
        let total = self.num_vars + extra;

        let mut lowered = LmiProblem::new(total, Objective::Linear(vec![0.0; total]));
        for c in &self.constraints {
            lowered.push(c.map.padded(extra), c.sense);
        }
        lowered.nonneg = self.nonneg.clone();

        let mut b = BlockBuilder::new(2 * d, total);
        let eye = nalgebra::DMatrix::identity(d, d);
        b.add_constant(0, d, &eye);
        b.add_constant(d, d, slack.constant());
        for j in 0..self.num_vars {
            b.add_coeff(j, d, d, slack.coeff(j));
        }
        let mut cost = vec![0.0; total];
        for (k, basis) in sym_basis(d).into_iter().enumerate() {
            b.add_coeff(self.num_vars + k, 0, 0, &basis);
            cost[self.num_vars + k] = basis.trace();
        }
        lowered.psd(b.finish());
        lowered.objective = Objective::Linear(cost);
        lowered
    }
}
