use std::fmt;

use crate::params::ParamViolation;

/// The five register-file and issue-port limits a micro schedule must honor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HwConstraint {
    /// At most eight accumulators live at once.
    AccumulatorCount,
    /// Operand strips must fit in the 32 vector registers left over.
    OperandRegisters,
    /// At most two outer-product issues per cycle.
    DualIssue,
    /// Four cycles between issues to the same accumulator.
    IssueLatency,
    /// Each accumulator is assembled and disassembled exactly once.
    AccumulatorSpill,
}

impl HwConstraint {
    pub fn number(self) -> u8 {
        match self {
            HwConstraint::AccumulatorCount => 1,
            HwConstraint::OperandRegisters => 2,
            HwConstraint::DualIssue => 3,
            HwConstraint::IssueLatency => 4,
            HwConstraint::AccumulatorSpill => 5,
        }
    }
}

impl fmt::Display for HwConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self {
            HwConstraint::AccumulatorCount => "at most 8 accumulators",
            HwConstraint::OperandRegisters => "at most 32 operand registers",
            HwConstraint::DualIssue => "at most 2 issues per cycle",
            HwConstraint::IssueLatency => "4-cycle issue-to-issue latency per accumulator",
            HwConstraint::AccumulatorSpill => "single assemble/disassemble per accumulator",
        };
        write!(f, "#{} ({})", self.number(), what)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid matrix layout: {0}")]
    InvalidLayout(String),
    #[error("out of bounds: {0}")]
    OutOfBounds(String),
    #[error("length mismatch: expected {expected} elements, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("infeasible cache configuration: {0}")]
    InfeasibleConfig(String),
    #[error("infeasible accumulator grid: constraint {constraint} violated: {detail}")]
    InfeasibleGrid {
        constraint: HwConstraint,
        detail: String,
    },
    #[error("incompatible micro-kernel shape: {0}")]
    IncompatibleShape(String),
    #[error("invalid blocking parameters: {}", fmt_violations(.0))]
    InvalidParams(Vec<ParamViolation>),
    #[error("element type mismatch: plan is for {plan}, operands are {operands}")]
    ElementTypeMismatch { plan: String, operands: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn fmt_violations(v: &[ParamViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
