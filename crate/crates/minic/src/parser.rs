//! Recursive-descent parser.
//!
//! Node ids are assigned deterministically in parse order, so identical text
//! always yields identical trees. The entry points take a starting id so that
//! statements or items parsed later (for splicing into an existing unit) get
//! ids that continue where that unit left off.

use crate::ast::*;
use crate::errors::SyntaxError;
use crate::lexer::{lex, Tok, Token};
use crate::types::{Base, Type};

pub const KEYWORDS: [&str; 10] =
    ["int", "char", "void", "const", "static", "if", "else", "while", "for", "return"];

pub fn is_keyword(name: &str) -> bool {
    KEYWORDS.contains(&name)
}

/// Parse a whole source unit.
pub fn parse(path: &str, text: &str) -> Result<SourceUnit, SyntaxError> {
    let (items, node_count) = parse_items(text, 0)?;
    Ok(SourceUnit { path: path.to_string(), items, node_count })
}

/// Parse a sequence of top-level items, numbering nodes from `first_id`.
/// Returns the items and the next unused id.
pub fn parse_items(text: &str, first_id: u32) -> Result<(Vec<Item>, u32), SyntaxError> {
    let mut p = Parser::new(lex(text)?, first_id);
    let mut items = Vec::new();
    while p.more() {
        items.push(p.parse_item()?);
    }
    Ok((items, p.next_id))
}

/// Parse a sequence of statements, numbering nodes from `first_id`.
/// Returns the statements and the next unused id.
pub fn parse_statements(text: &str, first_id: u32) -> Result<(Vec<Stmt>, u32), SyntaxError> {
    let mut p = Parser::new(lex(text)?, first_id);
    let mut stmts = Vec::new();
    while p.more() {
        stmts.push(p.parse_stmt()?);
    }
    Ok((stmts, p.next_id))
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    next_id: u32,
}

impl Parser {
    fn new(toks: Vec<Token>, first_id: u32) -> Parser {
        Parser { toks, pos: 0, next_id: first_id }
    }

    fn fresh(&mut self) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        id
    }

    fn more(&self) -> bool {
        self.pos < self.toks.len()
    }

    /// Current token without comment skipping.
    fn cur_raw(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    /// Drop comment tokens at the cursor. Callers that want to preserve a
    /// comment must look at `cur_raw` before anything calls this.
    fn skip_comments(&mut self) {
        while matches!(self.cur_raw(), Some(Token { tok: Tok::Comment(_), .. })) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<&Tok> {
        self.skip_comments();
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    /// Non-comment token `n` places ahead of the cursor (0 = current).
    fn peek_ahead(&self, n: usize) -> Option<&Tok> {
        let mut seen = 0;
        for t in &self.toks[self.pos.min(self.toks.len())..] {
            if matches!(t.tok, Tok::Comment(_)) {
                continue;
            }
            if seen == n {
                return Some(&t.tok);
            }
            seen += 1;
        }
        None
    }

    /// Position for an error at the cursor (or just past the last token).
    fn here(&mut self) -> (u32, u32) {
        self.skip_comments();
        match self.toks.get(self.pos) {
            Some(t) => (t.line, t.col),
            None => match self.toks.last() {
                Some(t) => (t.line, t.col + 1),
                None => (1, 1),
            },
        }
    }

    fn err(&mut self, expected: &str) -> SyntaxError {
        let (line, column) = self.here();
        SyntaxError::new(line, column, expected)
    }

    fn at(&mut self, t: &Tok) -> bool {
        self.peek() == Some(t)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.at(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, expected: &str) -> Result<Span, SyntaxError> {
        if self.at(t) {
            let tok = &self.toks[self.pos];
            let sp = Span::new(tok.line, tok.col);
            self.pos += 1;
            Ok(sp)
        } else {
            Err(self.err(expected))
        }
    }

    fn at_kw(&mut self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// A non-keyword identifier.
    fn expect_name(&mut self, expected: &str) -> Result<(String, Span), SyntaxError> {
        match self.peek() {
            Some(Tok::Ident(s)) if !is_keyword(s) => {
                let s = s.clone();
                let tok = &self.toks[self.pos];
                let sp = Span::new(tok.line, tok.col);
                self.pos += 1;
                Ok((s, sp))
            }
            _ => Err(self.err(expected)),
        }
    }

    fn base_kw(tok: Option<&Tok>) -> Option<Base> {
        match tok {
            Some(Tok::Ident(s)) if s == "int" => Some(Base::Int),
            Some(Tok::Ident(s)) if s == "char" => Some(Base::Char),
            Some(Tok::Ident(s)) if s == "void" => Some(Base::Void),
            _ => None,
        }
    }

    /// True when the cursor sits on the start of a declaration.
    fn at_decl_start(&mut self) -> bool {
        self.at_kw("const") || Self::base_kw(self.peek()).is_some()
    }

    /// `base '*'*` — the part of a declaration's type before the name.
    fn parse_type_prefix(&mut self) -> Result<(Base, u8), SyntaxError> {
        let base = match Self::base_kw(self.peek()) {
            Some(b) => {
                self.pos += 1;
                b
            }
            None => return Err(self.err("type name")),
        };
        let mut stars: u8 = 0;
        while self.eat(&Tok::Star) {
            stars = stars.checked_add(1).ok_or_else(|| self.err("identifier"))?;
        }
        Ok((base, stars))
    }

    /// Array dimensions after a declarator name: `('[' INT ']')*`.
    fn parse_dims(&mut self) -> Result<Vec<u32>, SyntaxError> {
        let mut dims = Vec::new();
        while self.eat(&Tok::LBracket) {
            let n = match self.peek() {
                Some(&Tok::Int(v)) if v >= 1 && v <= u32::MAX as i64 => {
                    self.pos += 1;
                    v as u32
                }
                _ => return Err(self.err("array size")),
            };
            self.expect(&Tok::RBracket, "']'")?;
            dims.push(n);
        }
        Ok(dims)
    }

    /// `[const] base '*'* name dims ['=' expr]` — no leading `static`, no
    /// trailing semicolon; shared by locals, globals, and for-headers.
    fn parse_decl_core(&mut self, is_static: bool, span: Span) -> Result<Decl, SyntaxError> {
        let is_const = self.eat_kw("const");
        let (base, stars) = self.parse_type_prefix()?;
        let (name, _) = self.expect_name("identifier")?;
        let dims = self.parse_dims()?;
        let init = if self.at(&Tok::Assign) {
            if !dims.is_empty() {
                // Arrays have no initializer syntax.
                return Err(self.err("';'"));
            }
            self.pos += 1;
            Some(self.parse_expr()?)
        } else {
            None
        };
        let ty = Type { dims, stars, base };
        Ok(Decl { id: self.fresh(), span, is_static, is_const, ty, name, init })
    }

    fn parse_item(&mut self) -> Result<Item, SyntaxError> {
        if let Some(Token { tok: Tok::Comment(text), line, col }) = self.cur_raw() {
            let (text, span) = (text.clone(), Span::new(*line, *col));
            self.pos += 1;
            return Ok(Item::Comment { id: self.fresh(), span, text });
        }
        let (line, col) = self.here();
        let span = Span::new(line, col);
        let is_static = self.eat_kw("static");
        if !self.at_decl_start() {
            return Err(self.err("declaration or function definition"));
        }
        // A function definition is `[const]`-free and has '(' after the name.
        if !self.at_kw("const") && matches!(self.peek_ahead(0), Some(Tok::Ident(_))) {
            let mut n = 1; // past the base keyword
            while matches!(self.peek_ahead(n), Some(Tok::Star)) {
                n += 1;
            }
            let is_func = matches!(self.peek_ahead(n), Some(Tok::Ident(s)) if !is_keyword(s))
                && matches!(self.peek_ahead(n + 1), Some(Tok::LParen));
            if is_func {
                return self.parse_func(is_static, span).map(Item::Func);
            }
        }
        let decl = self.parse_decl_core(is_static, span)?;
        self.expect(&Tok::Semi, "';'")?;
        Ok(Item::Global(decl))
    }

    fn parse_func(&mut self, is_static: bool, span: Span) -> Result<FuncDef, SyntaxError> {
        let (base, stars) = self.parse_type_prefix()?;
        let ret = if base == Base::Void && stars == 0 {
            None
        } else {
            Some(Type { dims: Vec::new(), stars, base })
        };
        let (name, _) = self.expect_name("function name")?;
        let id = self.fresh();
        self.expect(&Tok::LParen, "'('")?;
        let mut params = Vec::new();
        if !self.eat(&Tok::RParen) {
            if self.at_kw("void") && self.peek_ahead(1) == Some(&Tok::RParen) {
                self.pos += 1;
                self.pos += 1;
            } else {
                loop {
                    let (pline, pcol) = self.here();
                    let pspan = Span::new(pline, pcol);
                    let is_const = self.eat_kw("const");
                    let (base, stars) = self.parse_type_prefix()?;
                    let (pname, _) = self.expect_name("parameter name")?;
                    if self.at(&Tok::LBracket) {
                        // No array parameters; pass a pointer instead.
                        return Err(self.err("',' or ')'"));
                    }
                    params.push(Param {
                        id: self.fresh(),
                        span: pspan,
                        is_const,
                        ty: Type { dims: Vec::new(), stars, base },
                        name: pname,
                    });
                    if self.eat(&Tok::Comma) {
                        continue;
                    }
                    self.expect(&Tok::RParen, "',' or ')'")?;
                    break;
                }
            }
        }
        let body = self.parse_block()?;
        Ok(FuncDef { id, span, is_static, ret, name, params, body })
    }

    fn parse_block(&mut self) -> Result<Block, SyntaxError> {
        let span = self.expect(&Tok::LBrace, "'{'")?;
        let id = self.fresh();
        let mut stmts = Vec::new();
        loop {
            if matches!(self.cur_raw(), Some(Token { tok: Tok::Comment(_), .. })) {
                stmts.push(self.parse_stmt()?);
                continue;
            }
            match self.peek() {
                Some(Tok::RBrace) => {
                    self.pos += 1;
                    break;
                }
                Some(_) => stmts.push(self.parse_stmt()?),
                None => return Err(self.err("'}'")),
            }
        }
        Ok(Block { id, span, stmts })
    }

    /// Wrap a non-block body in a synthetic one-statement block.
    fn as_block(&mut self, s: Stmt) -> Block {
        match s {
            Stmt::Block(b) => b,
            other => Block { id: self.fresh(), span: other.span(), stmts: vec![other] },
        }
    }

    /// Control-structure body: comments between the header and the body are
    /// trivia, the body itself is normalized to a block.
    fn parse_body(&mut self) -> Result<Block, SyntaxError> {
        self.skip_comments();
        let s = self.parse_stmt()?;
        Ok(self.as_block(s))
    }

    fn parse_stmt(&mut self) -> Result<Stmt, SyntaxError> {
        if let Some(Token { tok: Tok::Comment(text), line, col }) = self.cur_raw() {
            let (text, span) = (text.clone(), Span::new(*line, *col));
            self.pos += 1;
            return Ok(Stmt::Comment { id: self.fresh(), span, text });
        }
        let (line, col) = self.here();
        let span = Span::new(line, col);
        match self.peek().cloned() {
            Some(Tok::LBrace) => Ok(Stmt::Block(self.parse_block()?)),
            Some(Tok::Ident(s)) if s == "static" => {
                // `static` locals are not part of the language.
                Err(self.err("statement"))
            }
            Some(Tok::Ident(s)) if s == "if" => {
                self.pos += 1;
                self.expect(&Tok::LParen, "'('")?;
                let cond = self.parse_expr()?;
                self.expect(&Tok::RParen, "')'")?;
                let id = self.fresh();
                let then_blk = self.parse_body()?;
                let else_blk = if self.eat_kw("else") {
                    Some(self.parse_body()?)
                } else {
                    None
                };
                Ok(Stmt::If { id, span, cond, then_blk, else_blk })
            }
            Some(Tok::Ident(s)) if s == "while" => {
                self.pos += 1;
                self.expect(&Tok::LParen, "'('")?;
                let cond = self.parse_expr()?;
                self.expect(&Tok::RParen, "')'")?;
                let id = self.fresh();
                let body = self.parse_body()?;
                Ok(Stmt::While { id, span, cond, body })
            }
            Some(Tok::Ident(s)) if s == "for" => {
                self.pos += 1;
                self.expect(&Tok::LParen, "'('")?;
                let init = if self.eat(&Tok::Semi) {
                    None
                } else {
                    let (iline, icol) = self.here();
                    let s = if self.at_decl_start() {
                        Stmt::Decl(self.parse_decl_core(false, Span::new(iline, icol))?)
                    } else {
                        self.parse_assign_or_expr()?
                    };
                    self.expect(&Tok::Semi, "';'")?;
                    Some(Box::new(s))
                };
                let cond = if self.at(&Tok::Semi) {
                    None
                } else {
                    Some(self.parse_expr()?)
                };
                self.expect(&Tok::Semi, "';'")?;
                let step = if self.at(&Tok::RParen) {
                    None
                } else {
                    Some(Box::new(self.parse_assign_or_expr()?))
                };
                self.expect(&Tok::RParen, "')'")?;
                let id = self.fresh();
                let body = self.parse_body()?;
                Ok(Stmt::For { id, span, init, cond, step, body })
            }
            Some(Tok::Ident(s)) if s == "return" => {
                self.pos += 1;
                let value = if self.at(&Tok::Semi) {
                    None
                } else {
                    Some(self.parse_expr()?)
                };
                self.expect(&Tok::Semi, "';'")?;
                Ok(Stmt::Return { id: self.fresh(), span, value })
            }
            Some(Tok::Ident(s)) if s == "else" => Err(self.err("statement")),
            _ if self.at_decl_start() => {
                let d = self.parse_decl_core(false, span)?;
                self.expect(&Tok::Semi, "';'")?;
                Ok(Stmt::Decl(d))
            }
            Some(_) => {
                let s = self.parse_assign_or_expr()?;
                self.expect(&Tok::Semi, "';'")?;
                Ok(s)
            }
            None => Err(self.err("statement")),
        }
    }

    /// Assignment or expression statement, not consuming any semicolon.
    fn parse_assign_or_expr(&mut self) -> Result<Stmt, SyntaxError> {
        let e = self.parse_expr()?;
        if self.at(&Tok::Assign) {
            if !matches!(
                e.kind,
                ExprKind::Ident(_) | ExprKind::Unary(UnOp::Deref, _) | ExprKind::Index(..)
            ) {
                let (line, column) = (e.span.line, e.span.col);
                return Err(SyntaxError::new(line, column, "assignable target"));
            }
            self.pos += 1;
            let value = self.parse_expr()?;
            let span = e.span;
            Ok(Stmt::Assign { id: self.fresh(), span, target: e, value })
        } else {
            let span = e.span;
            Ok(Stmt::Expr { id: self.fresh(), span, expr: e })
        }
    }

    pub(crate) fn parse_expr(&mut self) -> Result<Expr, SyntaxError> {
        self.parse_bin(1)
    }

    fn parse_bin(&mut self, min_prec: u8) -> Result<Expr, SyntaxError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                Some(Tok::Percent) => BinOp::Rem,
                Some(Tok::EqEq) => BinOp::Eq,
                Some(Tok::NotEq) => BinOp::Ne,
                Some(Tok::Lt) => BinOp::Lt,
                Some(Tok::Le) => BinOp::Le,
                Some(Tok::Gt) => BinOp::Gt,
                Some(Tok::Ge) => BinOp::Ge,
                Some(Tok::AndAnd) => BinOp::And,
                Some(Tok::OrOr) => BinOp::Or,
                _ => break,
            };
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.parse_bin(prec + 1)?;
            let span = lhs.span;
            lhs = Expr {
                id: self.fresh(),
                span,
                kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)),
            };
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, SyntaxError> {
        let (line, col) = self.here();
        let span = Span::new(line, col);
        let op = match self.peek() {
            Some(Tok::Minus) => Some(UnOp::Neg),
            Some(Tok::Bang) => Some(UnOp::Not),
            Some(Tok::Star) => Some(UnOp::Deref),
            Some(Tok::Amp) => Some(UnOp::Addr),
            _ => None,
        };
        if let Some(op) = op {
            self.pos += 1;
            let operand = self.parse_unary()?;
            return Ok(Expr {
                id: self.fresh(),
                span,
                kind: ExprKind::Unary(op, Box::new(operand)),
            });
        }
        // Cast: '(' type ')' begins with '(' followed by a type keyword.
        if self.at(&Tok::LParen) && Self::base_kw(self.peek_ahead(1)).is_some() {
            self.pos += 1;
            let (base, stars) = self.parse_type_prefix()?;
            self.expect(&Tok::RParen, "')'")?;
            let ty = Type { dims: Vec::new(), stars, base };
            let operand = self.parse_unary()?;
            return Ok(Expr {
                id: self.fresh(),
                span,
                kind: ExprKind::Cast(ty, Box::new(operand)),
            });
        }
        self.parse_postfix()
    }

    fn parse_postfix(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.parse_primary()?;
        while self.eat(&Tok::LBracket) {
            let idx = self.parse_expr()?;
            self.expect(&Tok::RBracket, "']'")?;
            let span = e.span;
            e = Expr {
                id: self.fresh(),
                span,
                kind: ExprKind::Index(Box::new(e), Box::new(idx)),
            };
        }
        Ok(e)
    }

    fn parse_primary(&mut self) -> Result<Expr, SyntaxError> {
        let (line, col) = self.here();
        let span = Span::new(line, col);
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                Ok(Expr { id: self.fresh(), span, kind: ExprKind::Int(v) })
            }
            Some(Tok::CharLit(c)) => {
                self.pos += 1;
                Ok(Expr { id: self.fresh(), span, kind: ExprKind::Char(c) })
            }
            Some(Tok::StrLit(bytes)) => {
                self.pos += 1;
                Ok(Expr { id: self.fresh(), span, kind: ExprKind::Str(bytes) })
            }
            Some(Tok::Ident(name)) if !is_keyword(&name) => {
                self.pos += 1;
                if self.eat(&Tok::LParen) {
                    let mut args = Vec::new();
                    if !self.eat(&Tok::RParen) {
                        loop {
                            args.push(self.parse_expr()?);
                            if self.eat(&Tok::Comma) {
                                continue;
                            }
                            self.expect(&Tok::RParen, "',' or ')'")?;
                            break;
                        }
                    }
                    Ok(Expr { id: self.fresh(), span, kind: ExprKind::Call(name, args) })
                } else {
                    Ok(Expr { id: self.fresh(), span, kind: ExprKind::Ident(name) })
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.parse_expr()?;
                self.expect(&Tok::RParen, "')'")?;
                Ok(e)
            }
            _ => Err(self.err("expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(src: &str) -> SourceUnit {
        parse("t.mc", src).unwrap()
    }

    #[test]
    fn smallest_program() {
        let u = unit("int main(){return 0;}");
        assert_eq!(u.items.len(), 1);
        let Item::Func(f) = &u.items[0] else { panic!() };
        assert_eq!(f.name, "main");
        assert_eq!(f.body.stmts.len(), 1);
        assert!(f.ret.is_some());
    }

    #[test]
    fn static_pointer_global() {
        let u = unit("static char *lastout;");
        let Item::Global(d) = &u.items[0] else { panic!() };
        assert!(d.is_static);
        assert_eq!(d.name, "lastout");
        assert_eq!(d.ty.to_string(), "*char");
    }

    #[test]
    fn malformed_initializer_is_rejected_at_line_one() {
        let e = parse("t.mc", "int x = ;").unwrap_err();
        assert_eq!(e.line, 1);
    }

    #[test]
    fn bodies_are_normalized_to_blocks() {
        let u = unit("int main(){ if (1) return 1; else if (0) return 2; return 0; }");
        let Item::Func(f) = &u.items[0] else { panic!() };
        let Stmt::If { then_blk, else_blk, .. } = &f.body.stmts[0] else { panic!() };
        assert_eq!(then_blk.stmts.len(), 1);
        let els = else_blk.as_ref().unwrap();
        assert_eq!(els.stmts.len(), 1);
        assert!(matches!(els.stmts[0], Stmt::If { .. }));
    }

    #[test]
    fn statement_position_comments_are_kept() {
        let u = unit("int main(){ /* note */ return 0; }");
        let Item::Func(f) = &u.items[0] else { panic!() };
        assert!(matches!(&f.body.stmts[0], Stmt::Comment { text, .. } if text == " note "));
        assert_eq!(f.body.stmts.len(), 2);
    }

    #[test]
    fn mid_expression_comments_are_trivia() {
        let u = unit("int main(){ return /* x */ 0; }");
        let Item::Func(f) = &u.items[0] else { panic!() };
        assert_eq!(f.body.stmts.len(), 1);
        assert!(matches!(&f.body.stmts[0], Stmt::Return { value: Some(_), .. }));
    }

    #[test]
    fn static_locals_are_rejected() {
        assert!(parse("t.mc", "int main(){ static int x; return 0; }").is_err());
    }

    #[test]
    fn array_initializers_are_rejected() {
        assert!(parse("t.mc", "int main(){ int a[3] = 0; return 0; }").is_err());
        assert!(parse("t.mc", "int g[3] = 0;").is_err());
    }

    #[test]
    fn casts_and_precedence() {
        let u = unit("int main(){ int x = (int)(char *)0 + 2 * 3; return x; }");
        let Item::Func(f) = &u.items[0] else { panic!() };
        let Stmt::Decl(d) = &f.body.stmts[0] else { panic!() };
        let ExprKind::Binary(BinOp::Add, l, r) = &d.init.as_ref().unwrap().kind else { panic!() };
        assert!(matches!(l.kind, ExprKind::Cast(..)));
        assert!(matches!(r.kind, ExprKind::Binary(BinOp::Mul, ..)));
    }

    #[test]
    fn assignment_targets_are_shape_checked() {
        assert!(parse("t.mc", "int main(){ int x; x + 1 = 2; return 0; }").is_err());
        assert!(parse("t.mc", "int main(){ int x; x = 2; return 0; }").is_ok());
    }

    #[test]
    fn for_header_variants() {
        assert!(parse("t.mc", "int main(){ for (;;) { return 0; } }").is_ok());
        assert!(parse("t.mc", "int main(){ for (int i = 0; i < 9; i = i + 1) { } return 0; }")
            .is_ok());
        assert!(parse("t.mc", "int main(){ int i; for (i = 0; i < 9; i = i + 1) { } return 0; }")
            .is_ok());
    }

    #[test]
    fn id_assignment_is_deterministic() {
        let a = unit("int f(int a){ return a; } int main(){ return f(1); }");
        let b = unit("int f(int a){ return a; } int main(){ return f(1); }");
        assert_eq!(a, b);
        assert!(a.node_count > 0);
    }

    #[test]
    fn statement_fragments_continue_ids() {
        let (stmts, next) = parse_statements("x = x + 1; print_int(x);", 100).unwrap();
        assert_eq!(stmts.len(), 2);
        assert!(next > 100);
        assert!(stmts.iter().all(|s| s.id().0 >= 100));
    }

    #[test]
    fn param_arrays_are_rejected() {
        assert!(parse("t.mc", "void f(int a[3]){} int main(){ return 0; }").is_err());
    }
}
