//! Lowering to standard form `min cᵀx − Σ wⱼ ln zⱼ  s.t.  Ax = b, x ∈ K`.
//!
//! Inequalities get a nonnegative slack, cone constraints a second-order-cone
//! block, and log arguments a nonnegative auxiliary entry. Coefficients on
//! complex-structured blocks are projected onto the structured subspace.

use nalgebra::DVector;

use crate::embed::project_coef;
use crate::program::{Affine, Block, BlockValue, Coef, ConicProgram};
use crate::sym::SymCoef;

#[derive(Debug, Clone)]
pub(crate) struct StdForm {
    pub cones: Vec<Block>,
    pub c: Vec<Option<Coef>>,
    /// Log weights on nonnegative blocks (only the log-aux block has them).
    pub logw: Vec<Option<DVector<f64>>>,
    pub rows: Vec<Vec<(usize, Coef)>>,
    pub b: DVector<f64>,
    pub obj_const: f64,
    /// Rows touching each block: `(row, position in row)`.
    pub touching: Vec<Vec<(usize, usize)>>,
    pub layout: Layout,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Layout {
    pub n_user: usize,
    pub n_eq: usize,
    pub n_ineq: usize,
    pub soc_lens: Vec<usize>,
    pub n_log: usize,
    pub slack_block: Option<usize>,
    pub soc_blocks: Vec<usize>,
    pub log_block: Option<usize>,
}

impl Layout {
    pub fn ineq_row(&self, i: usize) -> usize {
        self.n_eq + i
    }

    pub fn soc_row(&self, j: usize, r: usize) -> usize {
        self.n_eq + self.n_ineq + self.soc_lens[..j].iter().sum::<usize>() + r
    }

    pub fn log_row(&self, j: usize) -> usize {
        self.n_eq + self.n_ineq + self.soc_lens.iter().sum::<usize>() + j
    }
}

fn merge_terms(cones: &[Block], terms: &[(usize, Coef)]) -> Vec<(usize, Coef)> {
    let mut out: Vec<(usize, Coef)> = Vec::new();
    for (b, c) in terms {
        let c = match (cones[*b], c) {
            (Block::Psd { complex: true, .. }, Coef::Sym(s)) => Coef::Sym(project_coef(s.clone())),
            _ => c.clone(),
        };
        if let Some(pos) = out.iter().position(|(ob, _)| ob == b) {
            let old = std::mem::replace(&mut out[pos].1, Coef::Vec(Vec::new()));
            out[pos].1 = match (old, c) {
                (Coef::Sym(a), Coef::Sym(s)) => Coef::Sym(a.merged(s, cones[*b].len())),
                (Coef::Vec(mut a), Coef::Vec(v)) => {
                    a.extend(v);
                    Coef::Vec(a)
                }
                _ => unreachable!("validated program"),
            };
        } else {
            out.push((*b, c));
        }
    }
    out
}

impl StdForm {
    pub fn lower(p: &ConicProgram) -> StdForm {
        let mut cones = p.blocks.clone();
        let mut layout = Layout {
            n_user: p.blocks.len(),
            n_eq: p.eqs.len(),
            n_ineq: p.ineqs.len(),
            soc_lens: p.socs.iter().map(|s| s.len()).collect(),
            n_log: p.logs.len(),
            ..Default::default()
        };
        if !p.ineqs.is_empty() {
            layout.slack_block = Some(cones.len());
            cones.push(Block::Nonneg(p.ineqs.len()));
        }
        for s in &p.socs {
            layout.soc_blocks.push(cones.len());
            cones.push(Block::Soc(s.len()));
        }
        if !p.logs.is_empty() {
            layout.log_block = Some(cones.len());
            cones.push(Block::Nonneg(p.logs.len()));
        }

        let mut rows = Vec::new();
        let mut b = Vec::new();
        let mut push_row = |a: &Affine, extra: Option<(usize, usize)>| {
            let mut terms = merge_terms(&cones, &a.terms);
            if let Some((blk, idx)) = extra {
                terms.push((blk, Coef::Vec(vec![(idx, -1.0)])));
            }
            rows.push(terms);
            b.push(-a.constant);
        };
        for a in &p.eqs {
            push_row(a, None);
        }
        for (i, a) in p.ineqs.iter().enumerate() {
            push_row(a, Some((layout.slack_block.unwrap(), i)));
        }
        for (j, s) in p.socs.iter().enumerate() {
            for (r, a) in s.iter().enumerate() {
                push_row(a, Some((layout.soc_blocks[j], r)));
            }
        }
        for (j, l) in p.logs.iter().enumerate() {
            push_row(&l.arg, Some((layout.log_block.unwrap(), j)));
        }

        let mut c = vec![None; cones.len()];
        for (blk, coef) in merge_terms(&cones, &p.objective.terms) {
            c[blk] = Some(coef);
        }
        let mut logw = vec![None; cones.len()];
        if let Some(lb) = layout.log_block {
            logw[lb] = Some(DVector::from_iterator(p.logs.len(), p.logs.iter().map(|l| l.weight)));
        }
        let mut std = StdForm {
            cones,
            c,
            logw,
            rows,
            b: DVector::from_vec(b),
            obj_const: p.objective.constant,
            touching: Vec::new(),
            layout,
        };
        std.index();
        std
    }

    pub fn index(&mut self) {
        let mut touching = vec![Vec::new(); self.cones.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for (pos, (blk, _)) in row.iter().enumerate() {
                touching[*blk].push((i, pos));
            }
        }
        self.touching = touching;
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// Barrier parameter of the cone.
    pub fn degree(&self) -> f64 {
        self.cones
            .iter()
            .map(|c| match *c {
                Block::Psd { dim, .. } => dim as f64,
                Block::Nonneg(n) => n as f64,
                Block::Soc(_) => 2.0,
                Block::Free(_) => 0.0,
            })
            .sum()
    }

    /// Cone identity (zero on free blocks).
    pub fn identity(&self) -> Vec<BlockValue> {
        self.cones
            .iter()
            .map(|c| match *c {
                Block::Psd { dim, .. } => BlockValue::Mat(nalgebra::DMatrix::identity(dim, dim)),
                Block::Nonneg(n) => BlockValue::Vec(DVector::from_element(n, 1.0)),
                Block::Soc(n) => {
                    let mut v = DVector::zeros(n);
                    v[0] = 1.0;
                    BlockValue::Vec(v)
                }
                Block::Free(n) => BlockValue::Vec(DVector::zeros(n)),
            })
            .collect()
    }

    pub fn apply(&self, x: &[BlockValue]) -> DVector<f64> {
        DVector::from_iterator(self.m(), self.rows.iter().map(|row| row_dot(row, x)))
    }
}

pub(crate) fn coef_dot(c: &Coef, x: &BlockValue) -> f64 {
    match (c, x) {
        (Coef::Sym(s), BlockValue::Mat(m)) => s.dot(m),
        (Coef::Vec(v), BlockValue::Vec(xv)) => v.iter().map(|&(i, a)| a * xv[i]).sum(),
        _ => unreachable!("coefficient kind matches block kind"),
    }
}

pub(crate) fn row_dot(row: &[(usize, Coef)], x: &[BlockValue]) -> f64 {
    row.iter().map(|(blk, c)| coef_dot(c, &x[*blk])).sum()
}

/// Dense vector form of a sparse coefficient.
pub(crate) fn dense_vec(v: &[(usize, f64)], n: usize) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    for &(i, a) in v {
        out[i] += a;
    }
    out
}

pub(crate) fn sym(c: &Coef) -> &SymCoef {
    match c {
        Coef::Sym(s) => s,
        Coef::Vec(_) => unreachable!("matrix block has matrix coefficient"),
    }
}
