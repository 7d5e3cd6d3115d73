//! Standard-form conic programs over products of PSD, nonnegative and zero cones,
//! and a dense primal-dual interior-point solver for them.
//!
//! Primal: `min <C, X>  s.t.  <A_k, X> = b_k,  X in K`
//! Dual:   `max b'y     s.t.  Z = C - sum_k y_k A_k in K*`
//!
//! `K` is a product of blocks. A `Psd` block is a symmetric matrix, a `Nonneg`
//! block a nonnegative vector, and a `Zero` block a vector whose primal part is
//! free and whose dual slack is pinned to zero, i.e. it carries linear
//! equalities on `y`.

mod io;
mod report;
mod solver;

pub use io::{read_program, read_program_text, write_program, write_sdpa};
pub use report::{duality_report, psd_project_check, DualityReport};
pub use solver::solve;

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("entry refers to block {block}, but the program has {nblocks} blocks")]
    BlockIndex { block: usize, nblocks: usize },
    #[error("entry ({row}, {col}) is outside block {block} of size {size}")]
    EntryIndex {
        block: usize,
        row: usize,
        col: usize,
        size: usize,
    },
    #[error("off-diagonal entry ({row}, {col}) in non-matrix block {block}")]
    OffDiagonal {
        block: usize,
        row: usize,
        col: usize,
    },
    #[error("non-finite data in {0}")]
    NonFinite(String),
    #[error("{a} constraint matrices but {b} right-hand side values")]
    ConstraintCount { a: usize, b: usize },
    #[error("invalid solver option: {0}")]
    Options(String),
    #[error("program has no conic blocks")]
    NoCone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Psd,
    Nonneg,
    Zero,
}

impl BlockKind {
    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Psd => "psd",
            BlockKind::Nonneg => "nonneg",
            BlockKind::Zero => "zero",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "psd" => Some(BlockKind::Psd),
            "nonneg" => Some(BlockKind::Nonneg),
            "zero" => Some(BlockKind::Zero),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub kind: BlockKind,
    pub size: usize,
}

/// One nonzero of a block-structured symmetric matrix, stored with `row <= col`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Sparse block-diagonal symmetric matrix (upper triangle only).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlockSparse {
    pub entries: Vec<Entry>,
}

impl BlockSparse {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add `value` at `(row, col)` of `block`; the symmetric partner is implied.
    pub fn push(&mut self, block: usize, row: usize, col: usize, value: f64) {
        if value != 0.0 {
            let (row, col) = if row <= col { (row, col) } else { (col, row) };
            self.entries.push(Entry {
                block,
                row,
                col,
                value,
            });
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Merge duplicate positions and drop zeros; entries end up sorted.
    pub fn canonicalize(&mut self) {
        self.entries
            .sort_by(|a, b| (a.block, a.row, a.col).cmp(&(b.block, b.row, b.col)));
        let mut out: Vec<Entry> = Vec::with_capacity(self.entries.len());
        for e in self.entries.drain(..) {
            match out.last_mut() {
                Some(last) if (last.block, last.row, last.col) == (e.block, e.row, e.col) => {
                    last.value += e.value;
                }
                _ => out.push(e),
            }
        }
        out.retain(|e| e.value != 0.0);
        self.entries = out;
    }

    /// Squared Frobenius norm of the full symmetric matrix.
    pub fn norm_sq(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                let m = if e.row == e.col { 1.0 } else { 2.0 };
                m * e.value * e.value
            })
            .sum()
    }

    /// `<self, X>` against a dense block value.
    pub fn inner(&self, x: &BlockValues) -> f64 {
        self.entries
            .iter()
            .map(|e| match &x.blocks[e.block] {
                BlockValue::Matrix(m) => {
                    if e.row == e.col {
                        e.value * m[(e.row, e.col)]
                    } else {
                        e.value * (m[(e.row, e.col)] + m[(e.col, e.row)])
                    }
                }
                BlockValue::Vector(v) => e.value * v[e.row],
            })
            .sum()
    }
}

/// Dense value of one block: a symmetric matrix or a vector.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockValue {
    Matrix(DMatrix<f64>),
    Vector(Vec<f64>),
}

impl BlockValue {
    pub fn as_matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            BlockValue::Matrix(m) => Some(m),
            BlockValue::Vector(_) => None,
        }
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            BlockValue::Vector(v) => Some(v),
            BlockValue::Matrix(_) => None,
        }
    }
}

/// Dense block-diagonal value (one entry per program block).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockValues {
    pub blocks: Vec<BlockValue>,
}

impl BlockValues {
    pub fn block(&self, i: usize) -> &BlockValue {
        &self.blocks[i]
    }
}

/// Standard-form conic program data.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub blocks: Vec<Block>,
    /// One sparse matrix per equality constraint.
    pub a: Vec<BlockSparse>,
    pub b: Vec<f64>,
    pub c: BlockSparse,
}

impl ConicProgram {
    pub fn new(blocks: Vec<Block>) -> Self {
        ConicProgram {
            blocks,
            a: Vec::new(),
            b: Vec::new(),
            c: BlockSparse::new(),
        }
    }

    /// Number of equality constraints (length of the dual vector `y`).
    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn add_constraint(&mut self, a: BlockSparse, b: f64) -> usize {
        self.a.push(a);
        self.b.push(b);
        self.b.len() - 1
    }

    /// Check indices, symmetry storage and finiteness; canonicalizes entries.
    pub fn validate(&mut self) -> Result<(), SdpError> {
        if self.a.len() != self.b.len() {
            return Err(SdpError::ConstraintCount {
                a: self.a.len(),
                b: self.b.len(),
            });
        }
        if self
            .blocks
            .iter()
            .all(|b| b.kind == BlockKind::Zero || b.size == 0)
        {
            return Err(SdpError::NoCone);
        }
        if let Some(k) = self.b.iter().position(|v| !v.is_finite()) {
            return Err(SdpError::NonFinite(format!("b[{k}]")));
        }
        let nblocks = self.blocks.len();
        let blocks = self.blocks.clone();
        let check = |m: &mut BlockSparse, what: &str| -> Result<(), SdpError> {
            for e in &m.entries {
                let Some(bl) = blocks.get(e.block) else {
                    return Err(SdpError::BlockIndex {
                        block: e.block,
                        nblocks,
                    });
                };
                if e.row >= bl.size || e.col >= bl.size {
                    return Err(SdpError::EntryIndex {
                        block: e.block,
                        row: e.row,
                        col: e.col,
                        size: bl.size,
                    });
                }
                if bl.kind != BlockKind::Psd && e.row != e.col {
                    return Err(SdpError::OffDiagonal {
                        block: e.block,
                        row: e.row,
                        col: e.col,
                    });
                }
                if !e.value.is_finite() {
                    return Err(SdpError::NonFinite(what.to_string()));
                }
            }
            m.canonicalize();
            Ok(())
        };
        check(&mut self.c, "C")?;
        for (k, a) in self.a.iter_mut().enumerate() {
            check(a, &format!("A_{}", k + 1))?;
        }
        Ok(())
    }

    /// Dense zero value with this program's block structure.
    pub fn zero_values(&self) -> BlockValues {
        BlockValues {
            blocks: self
                .blocks
                .iter()
                .map(|b| match b.kind {
                    BlockKind::Psd => BlockValue::Matrix(DMatrix::zeros(b.size, b.size)),
                    _ => BlockValue::Vector(vec![0.0; b.size]),
                })
                .collect(),
        }
    }

    /// Dual slack `C - sum_k y_k A_k`.
    pub fn dual_slack(&self, y: &[f64]) -> BlockValues {
        let mut z = self.zero_values();
        let mut add = |m: &BlockSparse, s: f64| {
            for e in &m.entries {
                match &mut z.blocks[e.block] {
                    BlockValue::Matrix(mm) => {
                        mm[(e.row, e.col)] += s * e.value;
                        if e.row != e.col {
                            mm[(e.col, e.row)] += s * e.value;
                        }
                    }
                    BlockValue::Vector(v) => v[e.row] += s * e.value,
                }
            }
        };
        add(&self.c, 1.0);
        for (k, a) in self.a.iter().enumerate() {
            add(a, -y[k]);
        }
        z
    }
}

/// Interior-point options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
    pub step_fraction: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            gap_tol: 1e-9,
            feas_tol: 1e-9,
            max_iter: 200,
            step_fraction: 0.98,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), SdpError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.gap_tol) {
            return Err(SdpError::Options("gap_tol must be positive".into()));
        }
        if !pos(self.feas_tol) {
            return Err(SdpError::Options("feas_tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(SdpError::Options("max_iter must be positive".into()));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return Err(SdpError::Options("step_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SdpStatus {
    Optimal,
    /// The primal problem is infeasible (the dual objective diverges).
    Infeasible,
    /// The primal problem is unbounded (the dual is infeasible).
    Unbounded,
    MaxIter,
    NumericalFailure,
}

impl SdpStatus {
    pub fn name(self) -> &'static str {
        match self {
            SdpStatus::Optimal => "optimal",
            SdpStatus::Infeasible => "infeasible",
            SdpStatus::Unbounded => "unbounded",
            SdpStatus::MaxIter => "max_iter",
            SdpStatus::NumericalFailure => "numerical_failure",
        }
    }
}

/// Final iterate of a solve together with its convergence measures.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Block layout of `x` and `z`, copied from the program.
    pub blocks: Vec<Block>,
    pub x: BlockValues,
    pub y: Vec<f64>,
    pub z: BlockValues,
    pub primal_obj: f64,
    pub dual_obj: f64,
    /// `primal_obj - dual_obj`
    pub gap: f64,
    /// `||b - A(X)|| / (1 + ||b||)`
    pub primal_residual: f64,
    /// `||C - A*(y) - Z|| / (1 + ||C||)`
    pub dual_residual: f64,
    pub iterations: usize,
    pub mu_final: f64,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}
