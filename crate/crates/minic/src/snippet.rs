//! Parsing of code fragments against an existing program.
//!
//! A snippet is either a statement sequence (to splice into a function) or
//! a run of top-level definitions. Identifiers the fragment does not bind
//! itself and that the surrounding program cannot resolve come back as the
//! snippet's free-identifier set.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::analyze::{AnalyzedProgram, QueryError};
use crate::ast::*;
use crate::errors::SyntaxError;
use crate::parser::{parse_items, parse_statements};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SnippetError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("top-level definitions are not allowed in statement context")]
    TopLevelInStatementContext,
    #[error(transparent)]
    Query(#[from] QueryError),
}

/// Where the snippet will live, which decides both the accepted grammar and
/// the names the host program contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnippetAt {
    TopLevel,
    /// Immediately before this full statement.
    Stmt(NodeId),
}

#[derive(Debug, Clone)]
pub enum SnippetBody {
    Stmts(Vec<Stmt>),
    Items(Vec<Item>),
}

#[derive(Debug, Clone)]
pub struct Snippet {
    pub body: SnippetBody,
    /// Identifiers resolvable neither in the snippet nor the host context.
    pub free: BTreeSet<String>,
    /// First unused node id after the snippet's own nodes.
    pub next_id: u32,
}

/// Parse `text` for insertion into `ctx` at `at`. Node ids start at
/// `first_id` so the snippet can be grafted into an existing tree.
pub fn parse_snippet(
    text: &str,
    ctx: &AnalyzedProgram,
    at: SnippetAt,
    first_id: u32,
) -> Result<Snippet, SnippetError> {
    let (body, next_id) = match at {
        SnippetAt::TopLevel => {
            let (items, next_id) = parse_items(text, first_id)?;
            (SnippetBody::Items(items), next_id)
        }
        SnippetAt::Stmt(_) => match parse_statements(text, first_id) {
            Ok((stmts, next_id)) => (SnippetBody::Stmts(stmts), next_id),
            Err(e) => {
                // A fragment that only parses as definitions was aimed at
                // the wrong context; anything else is a plain syntax error.
                if parse_items(text, first_id).is_ok() {
                    return Err(SnippetError::TopLevelInStatementContext);
                }
                return Err(SnippetError::Syntax(e));
            }
        },
    };
    let raw = match &body {
        SnippetBody::Stmts(stmts) => free_idents_stmts(stmts),
        SnippetBody::Items(items) => free_idents_items(items),
    };
    let mut resolvable: BTreeSet<&str> = crate::BUILTINS.iter().copied().collect();
    resolvable.extend(ctx.funcs.keys().map(|s| s.as_str()));
    match at {
        SnippetAt::TopLevel => {
            resolvable.extend(ctx.globals.iter().map(|v| v.name.as_str()));
        }
        SnippetAt::Stmt(at) => {
            resolvable.extend(ctx.in_scope_vars(at)?.iter().map(|v| v.name.as_str()));
        }
    }
    let free = raw.into_iter().filter(|n| !resolvable.contains(n.as_str())).collect();
    Ok(Snippet { body, free, next_id })
}

/// Identifiers a statement sequence uses without declaring, callees
/// included. Declarations bind from their own point on, and an initializer
/// may still refer to an outer variable of the same name.
pub fn free_idents_stmts(stmts: &[Stmt]) -> BTreeSet<String> {
    let mut w = Walker::new();
    for s in stmts {
        w.stmt(s);
    }
    w.free
}

/// Identifiers a top-level fragment uses without declaring.
pub fn free_idents_items(items: &[Item]) -> BTreeSet<String> {
    let mut w = Walker::new();
    for item in items {
        match item {
            Item::Global(d) => {
                if let Some(init) = &d.init {
                    w.expr(init);
                }
                w.bind(&d.name);
            }
            Item::Func(f) => {
                w.bind(&f.name);
                w.push();
                for p in &f.params {
                    w.bind(&p.name);
                }
                for s in &f.body.stmts {
                    w.stmt(s);
                }
                w.pop();
            }
            Item::Comment { .. } => {}
        }
    }
    w.free
}

struct Walker {
    scopes: Vec<BTreeSet<String>>,
    free: BTreeSet<String>,
}

impl Walker {
    fn new() -> Walker {
        Walker { scopes: vec![BTreeSet::new()], free: BTreeSet::new() }
    }

    fn push(&mut self) {
        self.scopes.push(BTreeSet::new());
    }

    fn pop(&mut self) {
        self.scopes.pop();
    }

    fn bind(&mut self, name: &str) {
        self.scopes.last_mut().expect("never empty").insert(name.to_string());
    }

    fn touch(&mut self, name: &str) {
        if !self.scopes.iter().any(|s| s.contains(name)) {
            self.free.insert(name.to_string());
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::Decl(d) => {
                if let Some(init) = &d.init {
                    self.expr(init);
                }
                self.bind(&d.name);
            }
            Stmt::Assign { target, value, .. } => {
                self.expr(target);
                self.expr(value);
            }
            Stmt::Expr { expr, .. } => self.expr(expr),
            Stmt::If { cond, then_blk, else_blk, .. } => {
                self.expr(cond);
                self.block(then_blk);
                if let Some(b) = else_blk {
                    self.block(b);
                }
            }
            Stmt::While { cond, body, .. } => {
                self.expr(cond);
                self.block(body);
            }
            Stmt::For { init, cond, step, body, .. } => {
                self.push();
                if let Some(i) = init {
                    self.stmt(i);
                }
                if let Some(c) = cond {
                    self.expr(c);
                }
                if let Some(st) = step {
                    self.stmt(st);
                }
                self.block(body);
                self.pop();
            }
            Stmt::Return { value, .. } => {
                if let Some(v) = value {
                    self.expr(v);
                }
            }
            Stmt::Block(b) => self.block(b),
            Stmt::Comment { .. } => {}
        }
    }

    fn block(&mut self, b: &Block) {
        self.push();
        for s in &b.stmts {
            self.stmt(s);
        }
        self.pop();
    }

    fn expr(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Int(_) | ExprKind::Char(_) | ExprKind::Str(_) => {}
            ExprKind::Ident(n) => self.touch(n),
            ExprKind::Unary(_, x) | ExprKind::Cast(_, x) => self.expr(x),
            ExprKind::Binary(_, l, r) | ExprKind::Index(l, r) => {
                self.expr(l);
                self.expr(r);
            }
            ExprKind::Call(n, args) => {
                self.touch(n);
                for a in args {
                    self.expr(a);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyze::analyze;
    use crate::parser::parse;

    fn host() -> AnalyzedProgram {
        analyze(
            parse(
                "host.mc",
                "int counter; char *label = \"x\"; \
                 int bump(int k) { counter = counter + k; return counter; } \
                 int main() { int local = 3; local = bump(local); return local; }",
            )
            .unwrap(),
        )
        .unwrap()
    }

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn free_identifiers_skip_snippet_locals_and_ctx() {
        let h = host();
        let at = SnippetAt::Stmt(h.full_stmts[1]);
        let s = parse_snippet("memcpy(dst + 0, src, num);", &h, at, 1000).unwrap();
        assert_eq!(s.free, set(&["dst", "src", "num"]));
        let SnippetBody::Stmts(stmts) = &s.body else { panic!("statement snippet") };
        assert_eq!(stmts.len(), 1);
    }

    #[test]
    fn ctx_variables_resolve_by_scope() {
        let h = host();
        // inside main past its declaration, `local` resolves; at top level
        // it does not
        let in_main = h.full_stmts[3];
        let s = parse_snippet("print_int(local + counter);", &h, SnippetAt::Stmt(in_main), 1000)
            .unwrap();
        assert_eq!(s.free, set(&[]));
        let s = parse_snippet("int shadow = local;", &h, SnippetAt::TopLevel, 1000).unwrap();
        assert_eq!(s.free, set(&["local"]));
    }

    #[test]
    fn local_declarations_bind_from_their_point() {
        let h = host();
        let at = SnippetAt::Stmt(h.full_stmts[1]);
        let s = parse_snippet("int tmp = seed; tmp = tmp + seed2;", &h, at, 1000).unwrap();
        assert_eq!(s.free, set(&["seed", "seed2"]), "tmp binds after its declaration");
        let s = parse_snippet("int v = v;", &h, at, 1000).unwrap();
        assert_eq!(s.free, set(&["v"]), "initializer sees only the outer name");
    }

    #[test]
    fn block_scopes_do_not_leak() {
        let raw = free_idents_stmts(
            &crate::parser::parse_statements(
                "if (flag) { int inner = 1; inner = inner + 1; } inner = 2;",
                1,
            )
            .unwrap()
            .0,
        );
        assert_eq!(raw, set(&["flag", "inner"]));
    }

    #[test]
    fn for_header_names_stay_inside_the_loop() {
        let raw = free_idents_stmts(
            &crate::parser::parse_statements(
                "for (int i = 0; i < n; i = i + 1) { total = total + i; } i = 9;",
                1,
            )
            .unwrap()
            .0,
        );
        assert_eq!(raw, set(&["n", "total", "i"]));
    }

    #[test]
    fn top_level_snippets_parse_definitions() {
        let h = host();
        let s = parse_snippet("static int A[10];", &h, SnippetAt::TopLevel, 1000).unwrap();
        let SnippetBody::Items(items) = &s.body else { panic!("item snippet") };
        assert_eq!(items.len(), 1);
        assert!(s.free.is_empty());
        assert!(matches!(items[0], Item::Global(_)));
    }

    #[test]
    fn empty_snippet_is_empty() {
        let h = host();
        let s = parse_snippet("", &h, SnippetAt::Stmt(h.full_stmts[0]), 1000).unwrap();
        let SnippetBody::Stmts(stmts) = &s.body else { panic!() };
        assert!(stmts.is_empty());
        assert!(s.free.is_empty());
        assert_eq!(s.next_id, 1000);
    }

    #[test]
    fn definitions_in_statement_context_are_rejected() {
        let h = host();
        let at = SnippetAt::Stmt(h.full_stmts[0]);
        let err = parse_snippet("static int A[10];", &h, at, 1000).unwrap_err();
        assert_eq!(err, SnippetError::TopLevelInStatementContext);
        let err = parse_snippet("int f() { return 1; }", &h, at, 1000).unwrap_err();
        assert_eq!(err, SnippetError::TopLevelInStatementContext);
        let err = parse_snippet("int x = ;", &h, at, 1000).unwrap_err();
        assert!(matches!(err, SnippetError::Syntax(_)), "plain syntax errors pass through");
    }

    #[test]
    fn function_items_bind_params_and_recursion() {
        let (items, _) = crate::parser::parse_items(
            "int twice(int v) { return v + v + twice(0) * helper(v); }",
            1,
        )
        .unwrap();
        assert_eq!(free_idents_items(&items), set(&["helper"]));
    }

    #[test]
    fn node_ids_continue_from_first_id() {
        let h = host();
        let at = SnippetAt::Stmt(h.full_stmts[0]);
        let s = parse_snippet("int a = 1; a = a + 2;", &h, at, 500).unwrap();
        let SnippetBody::Stmts(stmts) = &s.body else { panic!() };
        assert!(s.next_id > 500);
        let mut ids = Vec::new();
        for s in stmts {
            ids.push(s.id().0);
        }
        assert!(ids.iter().all(|&i| (500..s.next_id).contains(&i)));
    }
}
