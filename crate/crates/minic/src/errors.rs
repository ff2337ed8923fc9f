//! Shared frontend error types.

use thiserror::Error;

/// Lexer or parser failure at a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{column}: expected {expected}")]
pub struct SyntaxError {
    pub line: u32,
    pub column: u32,
    pub expected: String,
}

impl SyntaxError {
    pub fn new(line: u32, column: u32, expected: impl Into<String>) -> SyntaxError {
        SyntaxError { line, column, expected: expected.into() }
    }
}

/// Scope or type resolution failure.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyzeError {
    #[error("line {line}: undeclared identifier {name:?}")]
    UndeclaredIdentifier { name: String, line: u32 },
    #[error("line {line}: type mismatch: {msg}")]
    TypeMismatch { msg: String, line: u32 },
    #[error("line {line}: duplicate declaration of {name:?} in the same scope")]
    DuplicateDeclarationInScope { name: String, line: u32 },
}
