use thiserror::Error;

/// Errors raised by kernel construction and validation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("{table} is not commutative: {a} {table} {b} differs from {b} {table} {a}")]
    NotCommutative { table: &'static str, a: String, b: String },
    #[error("{table} is not associative on ({a}, {b}, {c})")]
    NotAssociative { table: &'static str, a: String, b: String, c: String },
    #[error("{table} does not follow Boolean logic on ({a}, {b})")]
    NotBoolean { table: &'static str, a: String, b: String },
    #[error("malformed table {table}: {message}")]
    Malformed { table: &'static str, message: String },
    #[error("missing template for {op} at value {value}")]
    MissingTemplate { op: String, value: String },
    #[error("template for {op} at {case} is invalid: {message}")]
    BadTemplate { op: String, case: String, message: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("arity error: {0}")]
    Arity(String),
    #[error("type error in {node}: {message}")]
    Type { node: String, message: String },
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("duplicate output name `{0}`")]
    DuplicateName(String),
    #[error("unbound name `{0}`")]
    Unbound(String),
    #[error("recursion cap of {0} iterations exceeded")]
    RecursionCap(usize),
    #[error("multiplicity overflow")]
    Overflow,
    #[error("invalid value: {0}")]
    Value(String),
    #[error("invalid database: {0}")]
    Database(String),
    #[error("invalid kernel: {0}")]
    Kernel(#[from] KernelError),
    #[error("translation error: {0}")]
    Translate(String),
    #[error("SQL syntax error at line {line}, column {column}: {message}")]
    SqlSyntax { line: usize, column: usize, message: String },
    #[error("unsupported SQL feature: {0}")]
    Unsupported(String),
    #[error("unresolved column `{0}`")]
    UnresolvedColumn(String),
    #[error("cannot emit SQL: {0}")]
    Emit(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn ty(node: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Type { node: node.into(), message: message.into() }
    }
}
