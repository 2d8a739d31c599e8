//! User-facing problem and solution types.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ConicError, Result};
use crate::sym::SymCoef;

/// A variable block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    /// Real symmetric PSD matrix of order `dim`. With `complex = true` the block
    /// holds the embedding of an `dim/2` Hermitian matrix and iterates stay in
    /// that subspace.
    Psd { dim: usize, complex: bool },
    Nonneg(usize),
    /// `x0 ≥ ‖x[1..]‖`.
    Soc(usize),
    Free(usize),
}

impl Block {
    pub fn is_matrix(&self) -> bool {
        matches!(self, Block::Psd { .. })
    }

    pub fn len(&self) -> usize {
        match *self {
            Block::Psd { dim, .. } => dim,
            Block::Nonneg(n) | Block::Soc(n) | Block::Free(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Coefficient of an affine function on one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Coef {
    Sym(SymCoef),
    /// Sparse `(index, value)` pairs on a vector block.
    Vec(Vec<(usize, f64)>),
}

/// `constant + Σ ⟨coef_b, x_b⟩`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub constant: f64,
    pub terms: Vec<(usize, Coef)>,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Affine { constant: c, terms: Vec::new() }
    }

    pub fn add_sym(mut self, block: usize, s: SymCoef) -> Self {
        self.terms.push((block, Coef::Sym(s)));
        self
    }

    pub fn add_entry(mut self, block: usize, idx: usize, v: f64) -> Self {
        self.terms.push((block, Coef::Vec(vec![(idx, v)])));
        self
    }

    pub fn add_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(&self, a: f64) -> Affine {
        Affine {
            constant: self.constant * a,
            terms: self
                .terms
                .iter()
                .map(|(b, c)| {
                    let c = match c {
                        Coef::Sym(s) => Coef::Sym(s.scaled(a)),
                        Coef::Vec(v) => Coef::Vec(v.iter().map(|&(i, x)| (i, x * a)).collect()),
                    };
                    (*b, c)
                })
                .collect(),
        }
    }

    pub fn plus(mut self, other: &Affine) -> Affine {
        self.constant += other.constant;
        self.terms.extend(other.terms.iter().cloned());
        self
    }

    pub fn eval(&self, x: &[BlockValue]) -> f64 {
        let mut acc = self.constant;
        for (b, c) in &self.terms {
            acc += match (c, &x[*b]) {
                (Coef::Sym(s), BlockValue::Mat(m)) => s.dot(m),
                (Coef::Vec(v), BlockValue::Vec(xv)) => v.iter().map(|&(i, a)| a * xv[i]).sum(),
                _ => f64::NAN,
            };
        }
        acc
    }
}

/// Objective term `−weight · ln(arg)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogTerm {
    pub weight: f64,
    pub arg: Affine,
}

/// minimize `objective − Σ wⱼ ln(argⱼ)` subject to `eqs = 0`, `ineqs ≥ 0`,
/// each entry of `socs` in the second-order cone, and every block in its cone.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub blocks: Vec<Block>,
    pub objective: Affine,
    pub logs: Vec<LogTerm>,
    pub eqs: Vec<Affine>,
    pub ineqs: Vec<Affine>,
    /// `[a0, a1, …]` meaning `‖(a1, …)‖ ≤ a0`.
    pub socs: Vec<Vec<Affine>>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, b: Block) -> usize {
        self.blocks.push(b);
        self.blocks.len() - 1
    }

    pub fn objective_value(&self, x: &[BlockValue]) -> f64 {
        self.objective.eval(x) - self.logs.iter().map(|l| l.weight * l.arg.eval(x).ln()).sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(ConicError::InvalidProgram("no variable blocks".into()));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.is_empty() {
                return Err(ConicError::InvalidProgram(format!("block {i} is empty")));
            }
            if let Block::Psd { dim, complex: true } = b {
                if dim % 2 != 0 {
                    return Err(ConicError::InvalidProgram(format!("complex block {i} has odd order {dim}")));
                }
            }
        }
        let check = |a: &Affine, what: &str| -> Result<()> {
            if !a.constant.is_finite() {
                return Err(ConicError::InvalidProgram(format!("{what}: non-finite constant")));
            }
            for (b, c) in &a.terms {
                let blk = self
                    .blocks
                    .get(*b)
                    .ok_or_else(|| ConicError::InvalidProgram(format!("{what}: unknown block {b}")))?;
                match (blk, c) {
                    (Block::Psd { dim, .. }, Coef::Sym(s)) => {
                        if !s.dim_ok(*dim) {
                            return Err(ConicError::Dimension(format!("{what}: coefficient order differs from block {b}")));
                        }
                        if !s.is_finite() {
                            return Err(ConicError::InvalidProgram(format!("{what}: non-finite coefficient")));
                        }
                    }
                    (Block::Psd { .. }, Coef::Vec(_)) => {
                        return Err(ConicError::InvalidProgram(format!("{what}: vector coefficient on matrix block {b}")))
                    }
                    (_, Coef::Sym(_)) => {
                        return Err(ConicError::InvalidProgram(format!("{what}: matrix coefficient on vector block {b}")))
                    }
                    (blk, Coef::Vec(v)) => {
                        for &(i, x) in v {
                            if i >= blk.len() {
                                return Err(ConicError::Dimension(format!("{what}: index {i} out of range for block {b}")));
                            }
                            if !x.is_finite() {
                                return Err(ConicError::InvalidProgram(format!("{what}: non-finite coefficient")));
                            }
                        }
                    }
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (j, l) in self.logs.iter().enumerate() {
            if !(l.weight > 0.0 && l.weight.is_finite()) {
                return Err(ConicError::InvalidProgram(format!("log term {j}: weight must be positive")));
            }
            check(&l.arg, &format!("log term {j}"))?;
        }
        for (i, a) in self.eqs.iter().enumerate() {
            check(a, &format!("equality {i}"))?;
        }
        for (i, a) in self.ineqs.iter().enumerate() {
            check(a, &format!("inequality {i}"))?;
        }
        for (i, s) in self.socs.iter().enumerate() {
            if s.len() < 2 {
                return Err(ConicError::InvalidProgram(format!("cone constraint {i} needs at least two entries")));
            }
            for a in s {
                check(a, &format!("cone constraint {i}"))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BlockValue {
    Mat(DMatrix<f64>),
    Vec(DVector<f64>),
}

impl BlockValue {
    pub fn mat(&self) -> &DMatrix<f64> {
        match self {
            BlockValue::Mat(m) => m,
            BlockValue::Vec(_) => panic!("vector block accessed as matrix"),
        }
    }

    pub fn vec(&self) -> &DVector<f64> {
        match self {
            BlockValue::Vec(v) => v,
            BlockValue::Mat(_) => panic!("matrix block accessed as vector"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSet {
    /// Relative primal and dual feasibility.
    pub feas: f64,
    /// Relative duality gap at termination.
    pub gap: f64,
    /// Centering (outer) iterations.
    pub max_iters: usize,
    /// Total Newton steps across both phases.
    pub max_newton: usize,
}

impl Default for ToleranceSet {
    fn default() -> Self {
        ToleranceSet { feas: 1e-7, gap: 1e-7, max_iters: 200, max_newton: 3000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub primal_rel: f64,
    pub dual_rel: f64,
    pub gap_rel: f64,
}

impl KktResiduals {
    pub fn within(&self, tol: f64) -> bool {
        self.primal_rel <= tol && self.dual_rel <= tol && self.gap_rel <= tol
    }
}

/// Primal-dual answer. Row multipliers follow the program's constraint order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: Status,
    pub x: Vec<BlockValue>,
    /// Values of the inequality expressions.
    pub ineq_slack: DVector<f64>,
    /// Values of the cone-constraint expressions.
    pub soc_slack: Vec<DVector<f64>>,
    /// Values of the log arguments.
    pub log_args: DVector<f64>,
    /// Dual cone elements for the variable blocks.
    pub z: Vec<BlockValue>,
    pub eq_dual: DVector<f64>,
    pub ineq_dual: DVector<f64>,
    pub soc_dual: Vec<DVector<f64>>,
    pub log_dual: DVector<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub residuals: KktResiduals,
    pub iterations: usize,
    pub newton_steps: usize,
    /// For infeasible status: lower bound on the fraction of the initial
    /// residual that no point in the cone can remove.
    pub certificate: Option<f64>,
}
