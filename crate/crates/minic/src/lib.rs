//! MiniC: a self-contained C subset with a tracing interpreter.
//!
//! The crate covers the language side of the bug-injection pipeline:
//!
//! * [`parser`] turns `.mc` source into a [`ast::SourceUnit`] with stable,
//!   densely numbered nodes,
//! * [`analyze`] resolves scopes and types into an [`analyze::AnalyzedProgram`]
//!   and answers the static queries the template precondition language needs
//!   (`in_scope_vars`, `declarable`, `containing_function`),
//! * [`pretty`] prints canonical source (4-space indent, one statement per
//!   line, fixed brace style) and reports the line span of every node,
//! * [`interp`] executes programs on concrete inputs with a deterministic
//!   memory model and runtime fault detection,
//! * [`trace`] runs an instrumented program and emits one [`trace::TracePoint`]
//!   immediately before each executed full statement.
//!
//! Pointers are (object id, byte offset) pairs rather than machine addresses,
//! so traces are bit-identical across runs and platforms.

pub mod analyze;
pub mod ast;
pub mod errors;
pub mod interp;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod snippet;
pub mod trace;
pub mod types;

pub use analyze::{analyze, AnalyzedProgram, FuncInfo, QueryError, VarInfo, VarKind};
pub use ast::{NodeId, SourceUnit, Span};
pub use errors::{AnalyzeError, SyntaxError};
pub use interp::{
    run_hooked, run_plain, run_plain_limited, FaultKind, HookAction, HookCtx, Limits,
    ProgramInput, RunError, RunOutcome, DEFAULT_STEP_BUDGET, EXIT_BUDGET_EXHAUSTED,
};
pub use parser::parse;
pub use pretty::{pretty_print, pretty_print_spans, Printed};
pub use snippet::{
    free_idents_items, free_idents_stmts, parse_snippet, Snippet, SnippetAt, SnippetBody,
    SnippetError,
};
pub use trace::{
    instrument, run_traced, run_traced_limited, InstrumentedProgram, TracePoint, VarSnapshot,
};
pub use types::{Base, Type};

/// Names reserved for the runtime builtins; they cannot be redeclared.
pub const BUILTINS: [&str; 10] = [
    "malloc",
    "free",
    "memcpy",
    "strlen",
    "strcpy",
    "print_int",
    "print_str",
    "argc",
    "arg_int",
    "arg_str",
];

/// True if `name` is one of the runtime builtins.
pub fn is_builtin(name: &str) -> bool {
    BUILTINS.contains(&name)
}
