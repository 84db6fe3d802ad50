//! A small expression language for offline candidate programs.
//!
//! Programs are trees over constants, task-declared variables, arithmetic,
//! `exp`/`log`/`sqrt`/`abs`, `min`/`max` and the four-way conditional
//! `if_le(a, b, c, d)` (`c` when `a <= b`, else `d`). Evaluation is
//! elementwise over vectors and total: domain errors produce NaN instead
//! of aborting.

mod ast;
mod gen;
mod interp;
mod parse;

pub use ast::{BinaryOp, Expr, UnaryOp};
pub use gen::{random_leaf, random_tree};
pub use interp::{interpret, Binding, CompiledExpr, InterpretError};
pub use parse::{parse, ParseError};

/// Depth limit applied by the offline mutator.
pub const DEFAULT_MAX_DEPTH: usize = 6;
