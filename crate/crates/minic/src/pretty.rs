//! Canonical source formatting.
//!
//! One statement per line, 4-space indent, `{` on the header line, `} else`
//! continuation, no blank lines. The formatting is idempotent: printing a
//! parse of the printed text reproduces it byte for byte. Keeping every
//! statement on its own line also makes line-based diffing of two prints
//! line up with inserted statements exactly.

use std::collections::HashMap;

use crate::ast::*;
use crate::types::Type;

/// Pretty-printed text plus the 1-based (first, last) line of every node.
#[derive(Debug, Clone)]
pub struct Printed {
    pub text: String,
    pub lines: HashMap<NodeId, (u32, u32)>,
}

pub fn pretty_print(unit: &SourceUnit) -> String {
    pretty_print_spans(unit).text
}

pub fn pretty_print_spans(unit: &SourceUnit) -> Printed {
    let mut p = Printer { out: String::new(), line: 1, indent: 0, lines: HashMap::new() };
    for item in &unit.items {
        p.item(item);
    }
    Printed { text: p.out, lines: p.lines }
}

struct Printer {
    out: String,
    line: u32,
    indent: usize,
    lines: HashMap<NodeId, (u32, u32)>,
}

impl Printer {
    fn nl(&mut self) {
        self.out.push('\n');
        self.line += 1;
    }

    fn pad(&mut self) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
    }

    /// Record a node's first and last content line. Call with
    /// `self.line - 1` after a trailing newline, `self.line` otherwise.
    fn mark(&mut self, id: NodeId, start: u32, end: u32) {
        self.lines.insert(id, (start, end));
    }

    fn item(&mut self, item: &Item) {
        let start = self.line;
        match item {
            Item::Global(d) => {
                self.pad();
                let s = decl_text(d);
                self.out.push_str(&s);
                self.out.push(';');
                self.nl();
            }
            Item::Func(f) => {
                self.pad();
                if f.is_static {
                    self.out.push_str("static ");
                }
                match &f.ret {
                    None => self.out.push_str("void "),
                    Some(t) => {
                        self.out.push_str(t.base.name());
                        self.out.push(' ');
                        for _ in 0..t.stars {
                            self.out.push('*');
                        }
                    }
                }
                self.out.push_str(&f.name);
                self.out.push('(');
                for (i, param) in f.params.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    if param.is_const {
                        self.out.push_str("const ");
                    }
                    self.out.push_str(param.ty.base.name());
                    self.out.push(' ');
                    for _ in 0..param.ty.stars {
                        self.out.push('*');
                    }
                    self.out.push_str(&param.name);
                }
                self.out.push_str(") {");
                self.nl();
                let body_start = start;
                self.indent += 1;
                for s in &f.body.stmts {
                    self.stmt(s);
                }
                self.indent -= 1;
                self.pad();
                self.out.push('}');
                self.nl();
                let end = self.line - 1;
                self.mark(f.body.id, body_start, end);
            }
            Item::Comment { text, .. } => {
                self.pad();
                self.out.push_str("/*");
                self.out.push_str(text);
                self.out.push_str("*/");
                self.nl();
            }
        }
        let end = self.line - 1;
        self.mark(item.id(), start, end);
    }

    fn block_body(&mut self, b: &Block, start: u32) {
        self.indent += 1;
        for s in &b.stmts {
            self.stmt(s);
        }
        self.indent -= 1;
        self.pad();
        self.out.push('}');
        let end = self.line;
        self.mark(b.id, start, end);
    }

    fn stmt(&mut self, s: &Stmt) {
        let start = self.line;
        match s {
            Stmt::Decl(d) => {
                self.pad();
                let t = decl_text(d);
                self.out.push_str(&t);
                self.out.push(';');
                self.nl();
            }
            Stmt::Assign { target, value, .. } => {
                self.pad();
                let t = expr_text(target, 0);
                let v = expr_text(value, 0);
                self.out.push_str(&t);
                self.out.push_str(" = ");
                self.out.push_str(&v);
                self.out.push(';');
                self.nl();
            }
            Stmt::Expr { expr, .. } => {
                self.pad();
                let t = expr_text(expr, 0);
                self.out.push_str(&t);
                self.out.push(';');
                self.nl();
            }
            Stmt::If { .. } => {
                self.pad();
                self.if_chain(s);
                self.nl();
            }
            Stmt::While { cond, body, .. } => {
                self.pad();
                let c = expr_text(cond, 0);
                self.out.push_str("while (");
                self.out.push_str(&c);
                self.out.push_str(") {");
                self.nl();
                self.block_body(body, start);
                self.nl();
            }
            Stmt::For { init, cond, step, body, .. } => {
                self.pad();
                self.out.push_str("for (");
                if let Some(init) = init {
                    let t = inline_stmt_text(init);
                    self.out.push_str(&t);
                }
                self.out.push(';');
                if let Some(cond) = cond {
                    self.out.push(' ');
                    let c = expr_text(cond, 0);
                    self.out.push_str(&c);
                }
                self.out.push(';');
                if let Some(step) = step {
                    self.out.push(' ');
                    let t = inline_stmt_text(step);
                    self.out.push_str(&t);
                }
                self.out.push_str(") {");
                self.nl();
                self.block_body(body, start);
                self.nl();
            }
            Stmt::Return { value, .. } => {
                self.pad();
                match value {
                    None => self.out.push_str("return;"),
                    Some(v) => {
                        let t = expr_text(v, 0);
                        self.out.push_str("return ");
                        self.out.push_str(&t);
                        self.out.push(';');
                    }
                }
                self.nl();
            }
            Stmt::Block(b) => {
                self.pad();
                self.out.push('{');
                self.nl();
                self.block_body(b, start);
                self.nl();
            }
            Stmt::Comment { text, .. } => {
                self.pad();
                self.out.push_str("/*");
                self.out.push_str(text);
                self.out.push_str("*/");
                self.nl();
            }
        }
        let end = self.line - 1;
        self.mark(s.id(), start, end);
    }

    /// `if (c) { ... }` with any else-branch holding a single `if` folded
    /// into an `else if` header on the closing-brace line.
    fn if_chain(&mut self, s: &Stmt) {
        let Stmt::If { id, cond, then_blk, else_blk, .. } = s else { unreachable!() };
        let start = self.line;
        let c = expr_text(cond, 0);
        self.out.push_str("if (");
        self.out.push_str(&c);
        self.out.push_str(") {");
        self.nl();
        self.block_body(then_blk, start);
        if let Some(els) = else_blk {
            let els_start = self.line;
            self.out.push_str(" else ");
            if els.stmts.len() == 1 {
                if let nested @ Stmt::If { .. } = &els.stmts[0] {
                    self.if_chain(nested);
                    let end = self.line;
                    self.mark(nested.id(), els_start, end);
                    self.mark(els.id, els_start, end);
                    self.mark(*id, start, end);
                    return;
                }
            }
            self.out.push('{');
            self.nl();
            self.block_body(els, els_start);
        }
        let end = self.line;
        self.mark(*id, start, end);
    }
}

/// Declaration text without the trailing semicolon (shared with for-inits).
fn decl_text(d: &Decl) -> String {
    let mut s = String::new();
    if d.is_static {
        s.push_str("static ");
    }
    if d.is_const {
        s.push_str("const ");
    }
    s.push_str(d.ty.base.name());
    s.push(' ');
    for _ in 0..d.ty.stars {
        s.push('*');
    }
    s.push_str(&d.name);
    for dim in &d.ty.dims {
        s.push('[');
        s.push_str(&dim.to_string());
        s.push(']');
    }
    if let Some(init) = &d.init {
        s.push_str(" = ");
        s.push_str(&expr_text(init, 0));
    }
    s
}

/// For-header statement text: an assignment or expression, no semicolon.
fn inline_stmt_text(s: &Stmt) -> String {
    match s {
        Stmt::Decl(d) => decl_text(d),
        Stmt::Assign { target, value, .. } => {
            format!("{} = {}", expr_text(target, 0), expr_text(value, 0))
        }
        Stmt::Expr { expr, .. } => expr_text(expr, 0),
        _ => unreachable!("only decl, assign, and expr appear in for headers"),
    }
}

fn cast_type_text(t: &Type) -> String {
    let mut s = String::from(t.base.name());
    if t.stars > 0 {
        s.push(' ');
        for _ in 0..t.stars {
            s.push('*');
        }
    }
    s
}

fn expr_prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary(op, ..) => op.precedence(),
        ExprKind::Unary(..) | ExprKind::Cast(..) => 7,
        _ => 8,
    }
}

/// Render with the fewest parentheses that preserve the tree.
fn expr_text(e: &Expr, min_prec: u8) -> String {
    let body = match &e.kind {
        ExprKind::Int(v) => v.to_string(),
        ExprKind::Char(c) => format!("'{}'", escape_byte(*c, b'\'')),
        ExprKind::Str(bytes) => {
            let mut s = String::from("\"");
            for &b in bytes {
                s.push_str(&escape_byte(b, b'"'));
            }
            s.push('"');
            s
        }
        ExprKind::Ident(name) => name.clone(),
        ExprKind::Unary(op, x) => format!("{}{}", op.token(), expr_text(x, 7)),
        ExprKind::Binary(op, l, r) => {
            let p = op.precedence();
            format!("{} {} {}", expr_text(l, p), op.token(), expr_text(r, p + 1))
        }
        ExprKind::Index(base, idx) => {
            format!("{}[{}]", expr_text(base, 8), expr_text(idx, 0))
        }
        ExprKind::Call(name, args) => {
            let args: Vec<String> = args.iter().map(|a| expr_text(a, 0)).collect();
            format!("{}({})", name, args.join(", "))
        }
        ExprKind::Cast(t, x) => format!("({}){}", cast_type_text(t), expr_text(x, 7)),
    };
    if expr_prec(e) < min_prec {
        format!("({body})")
    } else {
        body
    }
}

fn escape_byte(b: u8, quote: u8) -> String {
    match b {
        b'\n' => "\\n".into(),
        b'\t' => "\\t".into(),
        b'\r' => "\\r".into(),
        0 => "\\0".into(),
        b'\\' => "\\\\".into(),
        _ if b == quote => format!("\\{}", quote as char),
        _ => (b as char).to_string(),
    }
}
