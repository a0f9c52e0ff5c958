use thiserror::Error;

#[derive(Debug, Error)]
pub enum PddlError {
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: u32, col: u32, msg: String },
    #[error("unsupported requirement '{flag}' at line {line}, column {col}")]
    UnsupportedRequirement { flag: String, line: u32, col: u32 },
    #[error("semantic error: {0}")]
    Semantic(String),
    #[error("grounding error: {0}")]
    Ground(String),
}
