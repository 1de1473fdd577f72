//! Relational algebra with bag semantics over incomplete databases, evaluated
//! under pluggable many-valued logics, with translations between logics.

pub mod algebra;
pub mod analyze;
pub mod data;
pub mod env;
pub mod error;
pub mod eval;
pub mod fuzz;
pub mod harness;
pub mod kernel;
pub mod sql;
pub mod translate;
pub mod value;

pub use algebra::{Condition, Expression, Term};
pub use data::{Bag, Database, Schema};
pub use env::Environment;
pub use error::{Error, KernelError, Result};
pub use eval::{eval, eval_condition, EvalConfig};
pub use kernel::{LogicKernel, TruthValue};
pub use value::{Name, Value};
