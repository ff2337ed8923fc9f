//! Syntax tree for MiniC source units.
//!
//! Every expression, statement, declaration, block, and comment node carries a
//! [`NodeId`] unique within its [`SourceUnit`] and a [`Span`] pointing at its
//! first token. Ids are dense: a freshly parsed unit uses `0..node_count`, and
//! snippets spliced in later continue from wherever the caller says.

use crate::types::Type;

/// Unique node identifier within one source unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// 1-based source position of a node's first token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Span {
        Span { line, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    /// `-expr`
    Neg,
    /// `!expr`
    Not,
    /// `*expr`
    Deref,
    /// `&expr`
    Addr,
}

impl UnOp {
    pub fn token(self) -> &'static str {
        match self {
            UnOp::Neg => "-",
            UnOp::Not => "!",
            UnOp::Deref => "*",
            UnOp::Addr => "&",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn token(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    /// Character literal; stored as its byte.
    Char(u8),
    /// String literal bytes, unescaped, without the terminating NUL.
    Str(Vec<u8>),
    Ident(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// `base[index]`
    Index(Box<Expr>, Box<Expr>),
    /// Callee is always a plain identifier.
    Call(String, Vec<Expr>),
    /// C-style cast `(type)expr`.
    Cast(Type, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub id: NodeId,
    pub span: Span,
    pub kind: ExprKind,
}

/// One variable declaration (exactly one declarator per statement).
#[derive(Debug, Clone, PartialEq)]
pub struct Decl {
    pub id: NodeId,
    pub span: Span,
    pub is_static: bool,
    pub is_const: bool,
    pub ty: Type,
    pub name: String,
    pub init: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: NodeId,
    pub span: Span,
    pub stmts: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Decl(Decl),
    /// `target = value;` where target is an identifier, deref, or index.
    Assign {
        id: NodeId,
        span: Span,
        target: Expr,
        value: Expr,
    },
    Expr {
        id: NodeId,
        span: Span,
        expr: Expr,
    },
    If {
        id: NodeId,
        span: Span,
        cond: Expr,
        then_blk: Block,
        else_blk: Option<Block>,
    },
    While {
        id: NodeId,
        span: Span,
        cond: Expr,
        body: Block,
    },
    For {
        id: NodeId,
        span: Span,
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        step: Option<Box<Stmt>>,
        body: Block,
    },
    Return {
        id: NodeId,
        span: Span,
        value: Option<Expr>,
    },
    Block(Block),
    /// A whole-line comment preserved in statement position. Not executed,
    /// not traced, and excluded from the full-statement list.
    Comment {
        id: NodeId,
        span: Span,
        /// Body text between the delimiters.
        text: String,
    },
}

impl Stmt {
    pub fn id(&self) -> NodeId {
        match self {
            Stmt::Decl(d) => d.id,
            Stmt::Assign { id, .. }
            | Stmt::Expr { id, .. }
            | Stmt::If { id, .. }
            | Stmt::While { id, .. }
            | Stmt::For { id, .. }
            | Stmt::Return { id, .. }
            | Stmt::Comment { id, .. } => *id,
            Stmt::Block(b) => b.id,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Stmt::Decl(d) => d.span,
            Stmt::Assign { span, .. }
            | Stmt::Expr { span, .. }
            | Stmt::If { span, .. }
            | Stmt::While { span, .. }
            | Stmt::For { span, .. }
            | Stmt::Return { span, .. }
            | Stmt::Comment { span, .. } => *span,
            Stmt::Block(b) => b.span,
        }
    }

    pub fn is_comment(&self) -> bool {
        matches!(self, Stmt::Comment { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub id: NodeId,
    pub span: Span,
    pub is_const: bool,
    pub ty: Type,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuncDef {
    pub id: NodeId,
    pub span: Span,
    pub is_static: bool,
    /// `None` means a `void` return type.
    pub ret: Option<Type>,
    pub name: String,
    pub params: Vec<Param>,
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Global(Decl),
    Func(FuncDef),
    /// Whole-line comment at top level.
    Comment { id: NodeId, span: Span, text: String },
}

impl Item {
    pub fn id(&self) -> NodeId {
        match self {
            Item::Global(d) => d.id,
            Item::Func(f) => f.id,
            Item::Comment { id, .. } => *id,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Item::Global(d) => d.span,
            Item::Func(f) => f.span,
            Item::Comment { span, .. } => *span,
        }
    }

    pub fn is_comment(&self) -> bool {
        matches!(self, Item::Comment { .. })
    }
}

/// A parsed translation unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceUnit {
    /// Display name used in diagnostics; not read from disk again.
    pub path: String,
    pub items: Vec<Item>,
    /// One past the highest node id in use; the next fresh id.
    pub node_count: u32,
}
