//! Scope and type resolution.
//!
//! `analyze` walks a parsed unit once and produces an [`AnalyzedProgram`]:
//! per-statement symbol tables (snapshotted before each statement), per-node
//! expression types, variable slot assignment for the interpreter, constant
//! folding of global initializers, and the ordered list of full statements.
//!
//! A full statement is a direct element of some block's statement list
//! (comments excluded). Control headers (for-init, for-step) are statements
//! with symbol tables of their own but are not full statements.

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use crate::ast::*;
use crate::errors::AnalyzeError;
use crate::is_builtin;
use crate::parser::is_keyword;
use crate::pretty::pretty_print;
use crate::types::{Base, Type};

/// Largest array or heap allocation, in bytes.
pub const MAX_OBJECT_BYTES: u64 = 16 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Global,
    Param,
    Local,
}

/// One resolved variable.
#[derive(Debug, Clone, PartialEq)]
pub struct VarInfo {
    pub name: String,
    pub ty: Type,
    pub is_const: bool,
    pub kind: VarKind,
    /// Declaring node (decl or param).
    pub decl: NodeId,
    /// Storage index: globals index globals, params/locals index the frame.
    pub slot: u32,
}

/// Resolved function signature and frame layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FuncInfo {
    pub name: String,
    /// `None` is a void return.
    pub ret: Option<Type>,
    pub params: Vec<VarInfo>,
    /// FuncDef node id.
    pub def: NodeId,
    /// Index of the definition in `unit.items`.
    pub item_index: usize,
    /// Total frame slots (params first, then locals in visit order).
    pub frame_slots: u32,
    /// Declared type of every frame slot, indexed by slot.
    pub slot_tys: Vec<Type>,
}

impl FuncInfo {
    pub fn is_void(&self) -> bool {
        self.ret.is_none()
    }
}

/// Constant-folded global initializer.
#[derive(Debug, Clone, PartialEq)]
pub enum GlobalInit {
    /// Integer, char, or null-pointer constant.
    Int(i64),
    /// Pointer to the string literal with this node id.
    Str(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("no statement with that id")]
    UnknownStmtId,
    #[error("position is not inside a function")]
    NotInFunction,
}

#[derive(Debug, Clone)]
pub struct AnalyzedProgram {
    pub unit: SourceUnit,
    pub funcs: BTreeMap<String, FuncInfo>,
    /// Globals in declaration order; slot equals index.
    pub globals: Vec<VarInfo>,
    /// Parallel to `globals`.
    pub globals_init: Vec<Option<GlobalInit>>,
    /// In-scope variables snapshotted before each statement.
    pub stmt_vars: HashMap<NodeId, Vec<VarInfo>>,
    /// Full statements in source order.
    pub full_stmts: Vec<NodeId>,
    /// Rank of each full statement in `full_stmts`.
    pub stmt_pos: HashMap<NodeId, usize>,
    /// Containing function of every statement.
    pub stmt_func: HashMap<NodeId, String>,
    /// Type of every expression node (arrays not decayed).
    pub expr_types: HashMap<NodeId, Type>,
    /// Variable resolution of every identifier expression.
    pub ident_slots: HashMap<NodeId, (VarKind, u32)>,
    /// Frame slot of every local declaration (for-inits included).
    pub decl_slots: HashMap<NodeId, u32>,
    /// Every string literal in the unit, in node-id order.
    pub str_lits: Vec<(NodeId, Vec<u8>)>,
    /// Ids of top-level items (for NotInFunction answers).
    top_ids: HashSet<NodeId>,
}

impl AnalyzedProgram {
    /// Variables visible just before `at`, outermost first, shadowed names
    /// replaced in place by the inner declaration.
    pub fn in_scope_vars(&self, at: NodeId) -> Result<&[VarInfo], QueryError> {
        self.stmt_vars.get(&at).map(|v| v.as_slice()).ok_or(QueryError::UnknownStmtId)
    }

    /// True when declaring `name` just before `at` cannot collide: the name
    /// is not reserved, not in scope, and not declared anywhere in the
    /// enclosing function (so nothing later in the body re-declares it).
    pub fn declarable(&self, at: NodeId, name: &str) -> Result<bool, QueryError> {
        let vars = self.in_scope_vars(at)?;
        if is_builtin(name) || is_keyword(name) {
            return Ok(false);
        }
        if vars.iter().any(|v| v.name == name) {
            return Ok(false);
        }
        let func = &self.stmt_func[&at];
        let names = declared_names(&self.funcs[func], &self.unit);
        Ok(!names.contains(name))
    }

    /// Declarability at top level: `name` collides with no global, function,
    /// or reserved name.
    pub fn declarable_top(&self, name: &str) -> bool {
        !is_builtin(name)
            && !is_keyword(name)
            && !self.funcs.contains_key(name)
            && !self.globals.iter().any(|g| g.name == name)
    }

    /// Innermost function containing the statement `at`.
    pub fn containing_function(&self, at: NodeId) -> Result<&FuncInfo, QueryError> {
        if let Some(name) = self.stmt_func.get(&at) {
            return Ok(&self.funcs[name]);
        }
        if self.top_ids.contains(&at) {
            return Err(QueryError::NotInFunction);
        }
        Err(QueryError::UnknownStmtId)
    }

    /// Canonically formatted source; two programs are identical iff their
    /// canonical sources are byte-equal.
    pub fn canonical_source(&self) -> String {
        pretty_print(&self.unit)
    }

    pub fn expr_type(&self, id: NodeId) -> Option<&Type> {
        self.expr_types.get(&id)
    }

    pub fn is_full_stmt(&self, id: NodeId) -> bool {
        self.stmt_pos.contains_key(&id)
    }
}

/// Every name declared anywhere in a function body, params included.
fn declared_names(f: &FuncInfo, unit: &SourceUnit) -> HashSet<String> {
    let mut names: HashSet<String> = f.params.iter().map(|p| p.name.clone()).collect();
    let Item::Func(def) = &unit.items[f.item_index] else { unreachable!() };
    fn walk_block(b: &Block, names: &mut HashSet<String>) {
        for s in &b.stmts {
            walk_stmt(s, names);
        }
    }
    fn walk_stmt(s: &Stmt, names: &mut HashSet<String>) {
        match s {
            Stmt::Decl(d) => {
                names.insert(d.name.clone());
            }
            Stmt::If { then_blk, else_blk, .. } => {
                walk_block(then_blk, names);
                if let Some(e) = else_blk {
                    walk_block(e, names);
                }
            }
            Stmt::While { body, .. } => walk_block(body, names),
            Stmt::For { init, body, .. } => {
                if let Some(i) = init {
                    walk_stmt(i, names);
                }
                walk_block(body, names);
            }
            Stmt::Block(b) => walk_block(b, names),
            _ => {}
        }
    }
    walk_block(&def.body, &mut names);
    names
}

pub fn analyze(unit: SourceUnit) -> Result<AnalyzedProgram, AnalyzeError> {
    let mut cx = Cx {
        unit: &unit,
        funcs: BTreeMap::new(),
        globals: Vec::new(),
        globals_init: Vec::new(),
        stmt_vars: HashMap::new(),
        full_stmts: Vec::new(),
        stmt_pos: HashMap::new(),
        stmt_func: HashMap::new(),
        expr_types: HashMap::new(),
        ident_slots: HashMap::new(),
        decl_slots: HashMap::new(),
        visible: Vec::new(),
        scope_names: Vec::new(),
        cur_fn: String::new(),
        cur_ret: None,
        next_slot: 0,
        slot_tys: Vec::new(),
    };
    cx.collect_toplevel()?;
    cx.check_main()?;
    let mut top_ids = HashSet::new();
    for item in &unit.items {
        top_ids.insert(item.id());
    }
    for (idx, item) in unit.items.iter().enumerate() {
        if let Item::Func(f) = item {
            cx.walk_func(f, idx)?;
        }
    }
    let str_lits = collect_strings(&unit);
    Ok(AnalyzedProgram {
        funcs: cx.funcs,
        globals: cx.globals,
        globals_init: cx.globals_init,
        stmt_vars: cx.stmt_vars,
        full_stmts: cx.full_stmts,
        stmt_pos: cx.stmt_pos,
        stmt_func: cx.stmt_func,
        expr_types: cx.expr_types,
        ident_slots: cx.ident_slots,
        decl_slots: cx.decl_slots,
        str_lits,
        top_ids,
        unit,
    })
}

struct Cx<'u> {
    unit: &'u SourceUnit,
    funcs: BTreeMap<String, FuncInfo>,
    globals: Vec<VarInfo>,
    globals_init: Vec<Option<GlobalInit>>,
    stmt_vars: HashMap<NodeId, Vec<VarInfo>>,
    full_stmts: Vec<NodeId>,
    stmt_pos: HashMap<NodeId, usize>,
    stmt_func: HashMap<NodeId, String>,
    expr_types: HashMap<NodeId, Type>,
    ident_slots: HashMap<NodeId, (VarKind, u32)>,
    decl_slots: HashMap<NodeId, u32>,
    /// Variables visible at the cursor, outermost first.
    visible: Vec<VarInfo>,
    /// Names declared per open scope, innermost last.
    scope_names: Vec<HashSet<String>>,
    cur_fn: String,
    cur_ret: Option<Type>,
    next_slot: u32,
    slot_tys: Vec<Type>,
}

fn err_type(msg: impl Into<String>, line: u32) -> AnalyzeError {
    AnalyzeError::TypeMismatch { msg: msg.into(), line }
}

impl<'u> Cx<'u> {
    /// Pass 0: register every global and function signature so top-level
    /// names resolve independent of item order.
    fn collect_toplevel(&mut self) -> Result<(), AnalyzeError> {
        let mut taken: HashSet<String> = HashSet::new();
        for (idx, item) in self.unit.items.iter().enumerate() {
            match item {
                Item::Global(d) => {
                    self.check_var_name(&d.name, d.span.line)?;
                    if !taken.insert(d.name.clone()) {
                        return Err(AnalyzeError::DuplicateDeclarationInScope {
                            name: d.name.clone(),
                            line: d.span.line,
                        });
                    }
                    self.check_var_type(&d.ty, d.span.line)?;
                    let slot = self.globals.len() as u32;
                    let init = match &d.init {
                        None => None,
                        Some(e) => Some(fold_global_init(e, &d.ty)?),
                    };
                    self.globals.push(VarInfo {
                        name: d.name.clone(),
                        ty: d.ty.clone(),
                        is_const: d.is_const,
                        kind: VarKind::Global,
                        decl: d.id,
                        slot,
                    });
                    self.globals_init.push(init);
                }
                Item::Func(f) => {
                    self.check_var_name(&f.name, f.span.line)?;
                    if !taken.insert(f.name.clone()) {
                        return Err(AnalyzeError::DuplicateDeclarationInScope {
                            name: f.name.clone(),
                            line: f.span.line,
                        });
                    }
                    if let Some(ret) = &f.ret {
                        if ret.is_void_unit() {
                            return Err(err_type("invalid return type", f.span.line));
                        }
                    }
                    let mut params = Vec::new();
                    let mut seen = HashSet::new();
                    for (i, p) in f.params.iter().enumerate() {
                        self.check_var_name(&p.name, p.span.line)?;
                        if !seen.insert(p.name.clone()) {
                            return Err(AnalyzeError::DuplicateDeclarationInScope {
                                name: p.name.clone(),
                                line: p.span.line,
                            });
                        }
                        if p.ty.is_void_unit() {
                            return Err(err_type(
                                format!("parameter {:?} has type void", p.name),
                                p.span.line,
                            ));
                        }
                        params.push(VarInfo {
                            name: p.name.clone(),
                            ty: p.ty.clone(),
                            is_const: p.is_const,
                            kind: VarKind::Param,
                            decl: p.id,
                            slot: i as u32,
                        });
                    }
                    self.funcs.insert(
                        f.name.clone(),
                        FuncInfo {
                            name: f.name.clone(),
                            ret: f.ret.clone(),
                            params,
                            def: f.id,
                            item_index: idx,
                            frame_slots: 0,
                            slot_tys: Vec::new(),
                        },
                    );
                }
                Item::Comment { .. } => {}
            }
        }
        Ok(())
    }

    fn check_main(&self) -> Result<(), AnalyzeError> {
        if let Some(m) = self.funcs.get("main") {
            let line = self.unit.items[m.item_index].span().line;
            if m.ret != Some(Type::base(Base::Int)) || !m.params.is_empty() {
                return Err(err_type("main must be declared as int main()", line));
            }
        }
        Ok(())
    }

    fn check_var_name(&self, name: &str, line: u32) -> Result<(), AnalyzeError> {
        if is_builtin(name) {
            return Err(err_type(format!("{name:?} is a reserved builtin name"), line));
        }
        Ok(())
    }

    fn check_var_type(&self, ty: &Type, line: u32) -> Result<(), AnalyzeError> {
        if !ty.is_well_formed() || ty.is_void_unit() {
            return Err(err_type(format!("invalid variable type {ty}"), line));
        }
        if ty.is_array() {
            match ty.size_in_bytes() {
                Some(n) if n <= MAX_OBJECT_BYTES => {}
                _ => return Err(err_type(format!("array type {ty} is too large"), line)),
            }
        }
        Ok(())
    }

    fn walk_func(&mut self, f: &FuncDef, item_index: usize) -> Result<(), AnalyzeError> {
        self.visible = self.globals.clone();
        self.scope_names = vec![HashSet::new()];
        self.cur_fn = f.name.clone();
        self.cur_ret = f.ret.clone();
        self.next_slot = 0;
        self.slot_tys = Vec::new();
        let params = self.funcs[&f.name].params.clone();
        for p in &params {
            self.scope_names.last_mut().unwrap().insert(p.name.clone());
            self.slot_tys.push(p.ty.clone());
            self.next_slot += 1;
            self.bind(p.clone());
        }
        // The body block shares the parameter scope, as in C.
        self.walk_block(&f.body, false)?;
        let info = self.funcs.get_mut(&f.name).unwrap();
        info.frame_slots = self.next_slot;
        info.slot_tys = std::mem::take(&mut self.slot_tys);
        let _ = item_index;
        Ok(())
    }

    fn bind(&mut self, v: VarInfo) {
        self.visible.retain(|x| x.name != v.name);
        self.visible.push(v);
    }

    fn enter_scope(&mut self) -> Vec<VarInfo> {
        self.scope_names.push(HashSet::new());
        self.visible.clone()
    }

    fn exit_scope(&mut self, saved: Vec<VarInfo>) {
        self.scope_names.pop();
        self.visible = saved;
    }

    /// Symbol-table snapshot taken before a statement is processed.
    fn record(&mut self, s: &Stmt, full: bool) {
        self.stmt_vars.insert(s.id(), self.visible.clone());
        self.stmt_func.insert(s.id(), self.cur_fn.clone());
        if full && !s.is_comment() {
            self.stmt_pos.insert(s.id(), self.full_stmts.len());
            self.full_stmts.push(s.id());
        }
    }

    fn walk_block(&mut self, b: &Block, new_scope: bool) -> Result<(), AnalyzeError> {
        let saved = if new_scope { Some(self.enter_scope()) } else { None };
        for s in &b.stmts {
            self.record(s, true);
            self.walk_stmt(s)?;
        }
        if let Some(saved) = saved {
            self.exit_scope(saved);
        }
        Ok(())
    }

    fn walk_stmt(&mut self, s: &Stmt) -> Result<(), AnalyzeError> {
        match s {
            Stmt::Decl(d) => self.walk_decl(d),
            Stmt::Assign { target, value, span, .. } => {
                let tty = self.type_expr(target)?;
                match &target.kind {
                    ExprKind::Ident(name) => {
                        let v = self.lookup(name).expect("typed ident resolves");
                        if v.is_const {
                            return Err(err_type(
                                format!("assignment to const {name:?}"),
                                span.line,
                            ));
                        }
                    }
                    ExprKind::Unary(UnOp::Deref, _) | ExprKind::Index(..) => {}
                    _ => unreachable!("parser checks target shape"),
                }
                if tty.is_array() {
                    return Err(err_type("cannot assign to an array", span.line));
                }
                let vty = self.type_expr(value)?;
                self.require_assignable(&tty, &vty, value, span.line)
            }
            Stmt::Expr { expr, .. } => {
                self.type_expr(expr)?;
                Ok(())
            }
            Stmt::If { cond, then_blk, else_blk, .. } => {
                self.require_scalar_cond(cond)?;
                self.walk_block(then_blk, true)?;
                if let Some(e) = else_blk {
                    self.walk_block(e, true)?;
                }
                Ok(())
            }
            Stmt::While { cond, body, .. } => {
                self.require_scalar_cond(cond)?;
                self.walk_block(body, true)
            }
            Stmt::For { init, cond, step, body, .. } => {
                let saved = self.enter_scope();
                if let Some(init) = init {
                    self.record_aux(init);
                    self.walk_stmt(init)?;
                }
                if let Some(cond) = cond {
                    self.require_scalar_cond(cond)?;
                }
                if let Some(step) = step {
                    self.record_aux(step);
                    self.walk_stmt(step)?;
                }
                self.walk_block(body, true)?;
                self.exit_scope(saved);
                Ok(())
            }
            Stmt::Return { value, span, .. } => match (&self.cur_ret.clone(), value) {
                (None, None) => Ok(()),
                (None, Some(_)) => {
                    Err(err_type("void function returns a value", span.line))
                }
                (Some(_), None) => {
                    Err(err_type("non-void function returns no value", span.line))
                }
                (Some(ret), Some(v)) => {
                    let vty = self.type_expr(v)?;
                    self.require_assignable(ret, &vty, v, span.line)
                }
            },
            Stmt::Block(b) => self.walk_block(b, true),
            Stmt::Comment { .. } => Ok(()),
        }
    }

    /// Statement in a control header: gets a symbol table but is not a full
    /// statement.
    fn record_aux(&mut self, s: &Stmt) {
        self.record(s, false);
    }

    fn walk_decl(&mut self, d: &Decl) -> Result<(), AnalyzeError> {
        self.check_var_name(&d.name, d.span.line)?;
        self.check_var_type(&d.ty, d.span.line)?;
        // Initializer is resolved without the new variable in scope.
        if let Some(init) = &d.init {
            let ity = self.type_expr(init)?;
            self.require_assignable(&d.ty, &ity, init, d.span.line)?;
        }
        if !self.scope_names.last_mut().unwrap().insert(d.name.clone()) {
            return Err(AnalyzeError::DuplicateDeclarationInScope {
                name: d.name.clone(),
                line: d.span.line,
            });
        }
        let slot = self.next_slot;
        self.next_slot += 1;
        self.slot_tys.push(d.ty.clone());
        self.decl_slots.insert(d.id, slot);
        self.bind(VarInfo {
            name: d.name.clone(),
            ty: d.ty.clone(),
            is_const: d.is_const,
            kind: VarKind::Local,
            decl: d.id,
            slot,
        });
        Ok(())
    }

    fn lookup(&self, name: &str) -> Option<&VarInfo> {
        self.visible.iter().rev().find(|v| v.name == name)
    }

    fn require_scalar_cond(&mut self, e: &Expr) -> Result<(), AnalyzeError> {
        let ty = self.type_expr(e)?;
        let d = ty.decayed().unwrap_or(ty.clone());
        if d.is_scalar() {
            Ok(())
        } else {
            Err(err_type(format!("condition has non-scalar type {ty}"), e.span.line))
        }
    }

    /// Assignment compatibility: int-likes mix freely; pointers need the same
    /// type, a `*void` on either side, or a literal 0 on the right.
    fn require_assignable(
        &self,
        target: &Type,
        value: &Type,
        value_expr: &Expr,
        line: u32,
    ) -> Result<(), AnalyzeError> {
        let value = value.decayed().unwrap_or(value.clone());
        let ok = if target.is_int_like() {
            value.is_int_like()
        } else if target.is_pointer() {
            value == *target
                || value.is_void_ptr()
                || (target.is_void_ptr() && value.is_pointer())
                || matches!(value_expr.kind, ExprKind::Int(0))
        } else {
            false
        };
        if ok {
            Ok(())
        } else {
            Err(err_type(format!("cannot assign {value} to {target}"), line))
        }
    }

    fn type_expr(&mut self, e: &Expr) -> Result<Type, AnalyzeError> {
        let ty = self.type_expr_inner(e)?;
        self.expr_types.insert(e.id, ty.clone());
        Ok(ty)
    }

    fn type_expr_inner(&mut self, e: &Expr) -> Result<Type, AnalyzeError> {
        let line = e.span.line;
        match &e.kind {
            ExprKind::Int(_) => Ok(Type::base(Base::Int)),
            ExprKind::Char(_) => Ok(Type::base(Base::Char)),
            ExprKind::Str(_) => Ok(Type::ptr(Base::Char, 1)),
            ExprKind::Ident(name) => {
                match self.lookup(name).map(|v| (v.kind, v.slot, v.ty.clone())) {
                    Some((kind, slot, ty)) => {
                        self.ident_slots.insert(e.id, (kind, slot));
                        Ok(ty)
                    }
                    None if self.funcs.contains_key(name.as_str()) => {
                        Err(err_type(format!("function {name:?} used as a value"), line))
                    }
                    None => Err(AnalyzeError::UndeclaredIdentifier { name: name.clone(), line }),
                }
            }
            ExprKind::Unary(op, x) => {
                let xty = self.type_expr(x)?;
                let xd = xty.decayed().unwrap_or(xty.clone());
                match op {
                    UnOp::Neg => {
                        if xd.is_int_like() {
                            Ok(Type::base(Base::Int))
                        } else {
                            Err(err_type(format!("cannot negate {xty}"), line))
                        }
                    }
                    UnOp::Not => {
                        if xd.is_scalar() {
                            Ok(Type::base(Base::Int))
                        } else {
                            Err(err_type(format!("cannot apply ! to {xty}"), line))
                        }
                    }
                    UnOp::Deref => {
                        if !xd.is_pointer() {
                            return Err(err_type(format!("cannot dereference {xty}"), line));
                        }
                        let elem = xd.elem().expect("pointer has element type");
                        if elem.is_void_unit() {
                            return Err(err_type("cannot dereference *void", line));
                        }
                        Ok(elem)
                    }
                    UnOp::Addr => {
                        if !matches!(
                            x.kind,
                            ExprKind::Index(..) | ExprKind::Unary(UnOp::Deref, _)
                        ) {
                            return Err(err_type(
                                "& applies only to indexed or dereferenced places",
                                line,
                            ));
                        }
                        if !xty.is_scalar() {
                            return Err(err_type(
                                format!("cannot take the address of a {xty} element"),
                                line,
                            ));
                        }
                        Ok(Type { dims: Vec::new(), stars: xty.stars + 1, base: xty.base })
                    }
                }
            }
            ExprKind::Binary(op, l, r) => {
                let lt = self.type_expr(l)?;
                let rt = self.type_expr(r)?;
                let ld = lt.decayed().unwrap_or(lt.clone());
                let rd = rt.decayed().unwrap_or(rt.clone());
                let int = Type::base(Base::Int);
                match op {
                    BinOp::Add | BinOp::Sub => {
                        if ld.is_pointer() {
                            if ld.is_void_ptr() {
                                return Err(err_type("arithmetic on *void", line));
                            }
                            if !rd.is_int_like() {
                                return Err(err_type(
                                    format!("cannot offset pointer by {rt}"),
                                    line,
                                ));
                            }
                            Ok(ld)
                        } else if ld.is_int_like() && rd.is_int_like() {
                            Ok(int)
                        } else {
                            Err(err_type(
                                format!("cannot apply {} to {lt} and {rt}", op.token()),
                                line,
                            ))
                        }
                    }
                    BinOp::Mul | BinOp::Div | BinOp::Rem => {
                        if ld.is_int_like() && rd.is_int_like() {
                            Ok(int)
                        } else {
                            Err(err_type(
                                format!("cannot apply {} to {lt} and {rt}", op.token()),
                                line,
                            ))
                        }
                    }
                    BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        let ok = (ld.is_int_like() && rd.is_int_like())
                            || (ld.is_pointer()
                                && rd.is_pointer()
                                && (ld == rd || ld.is_void_ptr() || rd.is_void_ptr()))
                            || (ld.is_pointer() && matches!(r.kind, ExprKind::Int(0)))
                            || (rd.is_pointer() && matches!(l.kind, ExprKind::Int(0)));
                        if ok {
                            Ok(int)
                        } else {
                            Err(err_type(
                                format!("cannot compare {lt} with {rt}"),
                                line,
                            ))
                        }
                    }
                    BinOp::And | BinOp::Or => {
                        if ld.is_scalar() && rd.is_scalar() {
                            Ok(int)
                        } else {
                            Err(err_type(
                                format!("cannot apply {} to {lt} and {rt}", op.token()),
                                line,
                            ))
                        }
                    }
                }
            }
            ExprKind::Index(base, idx) => {
                let bty = self.type_expr(base)?;
                let ity = self.type_expr(idx)?;
                if !ity.is_int_like() {
                    return Err(err_type(format!("index has type {ity}"), line));
                }
                let elem = match bty.elem() {
                    Some(t) if !t.is_void_unit() => t,
                    _ => return Err(err_type(format!("cannot index {bty}"), line)),
                };
                Ok(elem)
            }
            ExprKind::Call(name, args) => self.type_call(name, args, line),
            ExprKind::Cast(t, x) => {
                let xty = self.type_expr(x)?;
                let xd = xty.decayed().unwrap_or(xty.clone());
                if t.is_void_unit() || !t.is_well_formed() {
                    return Err(err_type(format!("cannot cast to {t}"), line));
                }
                if t.is_int_like() {
                    if xd.is_scalar() {
                        Ok(t.clone())
                    } else {
                        Err(err_type(format!("cannot cast {xty} to {t}"), line))
                    }
                } else {
                    // Pointer target: another pointer or the literal 0.
                    if xd.is_pointer() || matches!(x.kind, ExprKind::Int(0)) {
                        Ok(t.clone())
                    } else {
                        Err(err_type(format!("cannot cast {xty} to {t}"), line))
                    }
                }
            }
        }
    }

    fn type_call(&mut self, name: &str, args: &[Expr], line: u32) -> Result<Type, AnalyzeError> {
        if let Some(sig) = builtin_sig(name) {
            if args.len() != sig.params.len() {
                return Err(err_type(
                    format!("{name} takes {} argument(s), got {}", sig.params.len(), args.len()),
                    line,
                ));
            }
            for (cls, a) in sig.params.iter().zip(args) {
                let aty = self.type_expr(a)?;
                let ad = aty.decayed().unwrap_or(aty.clone());
                let ok = match cls {
                    ParamClass::IntLike => ad.is_int_like(),
                    ParamClass::AnyPtr => {
                        ad.is_pointer() || matches!(a.kind, ExprKind::Int(0))
                    }
                    ParamClass::Exact(t) => {
                        ad == *t
                            || ad.is_void_ptr()
                            || matches!(a.kind, ExprKind::Int(0))
                    }
                };
                if !ok {
                    return Err(err_type(
                        format!("argument of type {aty} does not fit {name}"),
                        a.span.line,
                    ));
                }
            }
            return Ok(sig.ret.clone());
        }
        let Some(f) = self.funcs.get(name).cloned() else {
            if self.lookup(name).is_some() {
                return Err(err_type(format!("{name:?} is not a function"), line));
            }
            return Err(AnalyzeError::UndeclaredIdentifier { name: name.to_string(), line });
        };
        if args.len() != f.params.len() {
            return Err(err_type(
                format!("{name} takes {} argument(s), got {}", f.params.len(), args.len()),
                line,
            ));
        }
        for (p, a) in f.params.iter().zip(args) {
            let aty = self.type_expr(a)?;
            self.require_assignable(&p.ty, &aty, a, a.span.line)?;
        }
        Ok(f.ret.clone().unwrap_or_else(Type::void))
    }
}

enum ParamClass {
    IntLike,
    AnyPtr,
    Exact(Type),
}

struct BuiltinSig {
    params: Vec<ParamClass>,
    ret: Type,
}

fn builtin_sig(name: &str) -> Option<BuiltinSig> {
    use ParamClass::*;
    let char_ptr = Type::ptr(Base::Char, 1);
    let void_ptr = Type::ptr(Base::Void, 1);
    let int = Type::base(Base::Int);
    let sig = match name {
        "malloc" => BuiltinSig { params: vec![IntLike], ret: void_ptr },
        "free" => BuiltinSig { params: vec![AnyPtr], ret: Type::void() },
        "memcpy" => BuiltinSig { params: vec![AnyPtr, AnyPtr, IntLike], ret: void_ptr },
        "strlen" => BuiltinSig { params: vec![Exact(char_ptr.clone())], ret: int },
        "strcpy" => BuiltinSig {
            params: vec![Exact(char_ptr.clone()), Exact(char_ptr.clone())],
            ret: char_ptr.clone(),
        },
        "print_int" => BuiltinSig { params: vec![IntLike], ret: Type::void() },
        "print_str" => BuiltinSig { params: vec![Exact(char_ptr.clone())], ret: Type::void() },
        "argc" => BuiltinSig { params: vec![], ret: int },
        "arg_int" => BuiltinSig { params: vec![IntLike], ret: int },
        "arg_str" => BuiltinSig { params: vec![IntLike], ret: char_ptr },
        _ => return None,
    };
    Some(sig)
}

/// Fold a global initializer to a constant; only literal arithmetic is
/// allowed at top level.
fn fold_global_init(e: &Expr, target: &Type) -> Result<GlobalInit, AnalyzeError> {
    let line = e.span.line;
    if target.is_array() {
        return Err(err_type("arrays cannot be initialized", line));
    }
    if let ExprKind::Str(_) = &e.kind {
        if *target == Type::ptr(Base::Char, 1) {
            return Ok(GlobalInit::Str(e.id));
        }
        return Err(err_type(format!("cannot assign *char to {target}"), line));
    }
    let v = fold_const_int(e)?;
    if target.is_int_like() {
        let v = if target.base == Base::Char && target.stars == 0 { v as i8 as i64 } else { v };
        Ok(GlobalInit::Int(v))
    } else if target.is_pointer() && v == 0 {
        Ok(GlobalInit::Int(0))
    } else {
        Err(err_type(format!("global initializer {v} does not fit {target}"), line))
    }
}

fn fold_const_int(e: &Expr) -> Result<i64, AnalyzeError> {
    let line = e.span.line;
    match &e.kind {
        ExprKind::Int(v) => Ok(*v),
        ExprKind::Char(c) => Ok(*c as i8 as i64),
        ExprKind::Unary(UnOp::Neg, x) => Ok(fold_const_int(x)?.wrapping_neg()),
        ExprKind::Unary(UnOp::Not, x) => Ok((fold_const_int(x)? == 0) as i64),
        ExprKind::Binary(op, l, r) => {
            let a = fold_const_int(l)?;
            let b = fold_const_int(r)?;
            let v = match op {
                BinOp::Add => a.wrapping_add(b),
                BinOp::Sub => a.wrapping_sub(b),
                BinOp::Mul => a.wrapping_mul(b),
                BinOp::Div => {
                    if b == 0 {
                        return Err(err_type("division by zero in constant", line));
                    }
                    a.wrapping_div(b)
                }
                BinOp::Rem => {
                    if b == 0 {
                        return Err(err_type("division by zero in constant", line));
                    }
                    a.wrapping_rem(b)
                }
                BinOp::Eq => (a == b) as i64,
                BinOp::Ne => (a != b) as i64,
                BinOp::Lt => (a < b) as i64,
                BinOp::Le => (a <= b) as i64,
                BinOp::Gt => (a > b) as i64,
                BinOp::Ge => (a >= b) as i64,
                BinOp::And => (a != 0 && b != 0) as i64,
                BinOp::Or => (a != 0 || b != 0) as i64,
            };
            Ok(v)
        }
        ExprKind::Cast(t, x) if t.is_int_like() => {
            let v = fold_const_int(x)?;
            Ok(if t.base == Base::Char && t.stars == 0 { v as i8 as i64 } else { v })
        }
        _ => Err(err_type("global initializer must be a constant", line)),
    }
}

/// Every string literal in the unit, in node-id order.
fn collect_strings(unit: &SourceUnit) -> Vec<(NodeId, Vec<u8>)> {
    let mut out = Vec::new();
    fn expr(e: &Expr, out: &mut Vec<(NodeId, Vec<u8>)>) {
        match &e.kind {
            ExprKind::Str(bytes) => out.push((e.id, bytes.clone())),
            ExprKind::Unary(_, x) | ExprKind::Cast(_, x) => expr(x, out),
            ExprKind::Binary(_, l, r) => {
                expr(l, out);
                expr(r, out);
            }
            ExprKind::Index(b, i) => {
                expr(b, out);
                expr(i, out);
            }
            ExprKind::Call(_, args) => {
                for a in args {
                    expr(a, out);
                }
            }
            ExprKind::Int(_) | ExprKind::Char(_) | ExprKind::Ident(_) => {}
        }
    }
    fn stmt(s: &Stmt, out: &mut Vec<(NodeId, Vec<u8>)>) {
        match s {
            Stmt::Decl(d) => {
                if let Some(i) = &d.init {
                    expr(i, out);
                }
            }
            Stmt::Assign { target, value, .. } => {
                expr(target, out);
                expr(value, out);
            }
            Stmt::Expr { expr: e, .. } => expr(e, out),
            Stmt::If { cond, then_blk, else_blk, .. } => {
                expr(cond, out);
                block(then_blk, out);
                if let Some(e) = else_blk {
                    block(e, out);
                }
            }
            Stmt::While { cond, body, .. } => {
                expr(cond, out);
                block(body, out);
            }
            Stmt::For { init, cond, step, body, .. } => {
                if let Some(i) = init {
                    stmt(i, out);
                }
                if let Some(c) = cond {
                    expr(c, out);
                }
                if let Some(st) = step {
                    stmt(st, out);
                }
                block(body, out);
            }
            Stmt::Return { value: Some(v), .. } => expr(v, out),
            Stmt::Return { value: None, .. } | Stmt::Comment { .. } | Stmt::Block(_) => {
                if let Stmt::Block(b) = s {
                    block(b, out);
                }
            }
        }
    }
    fn block(b: &Block, out: &mut Vec<(NodeId, Vec<u8>)>) {
        for s in &b.stmts {
            stmt(s, out);
        }
    }
    for item in &unit.items {
        match item {
            Item::Global(d) => {
                if let Some(i) = &d.init {
                    expr(i, &mut out);
                }
            }
            Item::Func(f) => block(&f.body, &mut out),
            Item::Comment { .. } => {}
        }
    }
    out.sort_by_key(|(id, _)| *id);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn ap(src: &str) -> AnalyzedProgram {
        analyze(parse("t.mc", src).unwrap()).unwrap()
    }

    fn ap_err(src: &str) -> AnalyzeError {
        analyze(parse("t.mc", src).unwrap()).unwrap_err()
    }

    #[test]
    fn globals_appear_in_every_function_scope() {
        let p = ap("static char *lastout; char *prog; int out_byte; \
                    void f() { out_byte = 1; } int main() { f(); return 0; }");
        for &at in &p.full_stmts {
            let names: Vec<&str> =
                p.in_scope_vars(at).unwrap().iter().map(|v| v.name.as_str()).collect();
            assert!(names.contains(&"lastout"), "{names:?}");
            assert!(names.contains(&"prog"));
            assert!(names.contains(&"out_byte"));
        }
    }

    #[test]
    fn empty_unit_is_fine() {
        let p = ap("");
        assert!(p.full_stmts.is_empty());
        assert!(p.funcs.is_empty());
    }

    #[test]
    fn unknown_callee_is_undeclared() {
        let e = ap_err("int f(){ return g(); }");
        assert_eq!(
            e,
            AnalyzeError::UndeclaredIdentifier { name: "g".into(), line: 1 }
        );
    }

    #[test]
    fn const_propagates_into_scope_listings() {
        let p = ap("int main() { const char *s = \"x\"; s; return 0; }");
        let at = p.full_stmts[1];
        let v = p.in_scope_vars(at).unwrap().iter().find(|v| v.name == "s").unwrap();
        assert!(v.is_const);
        assert_eq!(v.ty.to_string(), "*char");
    }

    #[test]
    fn declarable_rules() {
        let p = ap("int used; int main() { int x = 0; x = later(); return x; } \
                    int later() { int y = 1; return y; }");
        let Some(&at) = p.full_stmts.first() else { panic!() };
        assert!(p.declarable(at, "zz_fresh").unwrap());
        assert!(!p.declarable(at, "used").unwrap(), "global blocks");
        assert!(!p.declarable(at, "x").unwrap(), "declared later in function blocks");
        assert!(!p.declarable(at, "malloc").unwrap(), "builtin blocks");
        // y is local to later(), so it is declarable inside main
        assert!(p.declarable(at, "y").unwrap());
        assert!(p.declarable_top("zz_fresh"));
        assert!(!p.declarable_top("used"));
        assert!(!p.declarable_top("main"));
    }

    #[test]
    fn containing_function_facts() {
        let p = ap("int g; void f(int n) { n = n + 1; } int *h() { return 0; } \
                    int main() { f(1); h(); return 0; }");
        let at = p
            .full_stmts
            .iter()
            .find(|&&s| p.stmt_func[&s] == "f")
            .copied()
            .unwrap();
        let fi = p.containing_function(at).unwrap();
        assert!(fi.is_void());
        let at = p
            .full_stmts
            .iter()
            .find(|&&s| p.stmt_func[&s] == "h")
            .copied()
            .unwrap();
        let fi = p.containing_function(at).unwrap();
        assert_eq!(fi.ret.as_ref().unwrap().to_string(), "*int");
        let top = p.unit.items[0].id();
        assert_eq!(p.containing_function(top).unwrap_err(), QueryError::NotInFunction);
        assert_eq!(
            p.containing_function(NodeId(9999)).unwrap_err(),
            QueryError::UnknownStmtId
        );
    }

    #[test]
    fn shadowing_replaces_in_place_and_restores() {
        let p = ap("int v; int main() { v = 1; { char v = 'a'; v = 'b'; } v = 2; return 0; }");
        let inner = p
            .full_stmts
            .iter()
            .copied()
            .find(|s| {
                p.in_scope_vars(*s).unwrap().iter().any(|v| v.name == "v" && v.kind == VarKind::Local)
            })
            .unwrap();
        let vs = p.in_scope_vars(inner).unwrap();
        assert_eq!(vs.iter().filter(|v| v.name == "v").count(), 1);
        let last = *p.full_stmts.last().unwrap();
        let vs = p.in_scope_vars(last).unwrap();
        let v = vs.iter().find(|v| v.name == "v").unwrap();
        assert_eq!(v.kind, VarKind::Global);
    }

    #[test]
    fn type_errors() {
        assert!(matches!(ap_err("int main() { int x; char *p; p = x; return 0; }"),
            AnalyzeError::TypeMismatch { .. }));
        assert!(matches!(ap_err("int main() { const int k = 1; k = 2; return 0; }"),
            AnalyzeError::TypeMismatch { .. }));
        assert!(matches!(ap_err("int main() { int a[3]; int b[3]; a = b; return 0; }"),
            AnalyzeError::TypeMismatch { .. }));
        assert!(matches!(ap_err("int main() { int x; int x; return 0; }"),
            AnalyzeError::DuplicateDeclarationInScope { .. }));
        assert!(matches!(ap_err("int main() { void *p = malloc(8); p = p + 1; return 0; }"),
            AnalyzeError::TypeMismatch { .. }));
        assert!(matches!(ap_err("int main() { int x = 1; int *p = &x; return 0; }"),
            AnalyzeError::TypeMismatch { .. }));
        assert!(matches!(ap_err("int main() { char *p = (char *)5; return 0; }"),
            AnalyzeError::TypeMismatch { .. }));
        assert!(matches!(ap_err("void main() {}"), AnalyzeError::TypeMismatch { .. }));
        assert!(matches!(ap_err("int malloc;"), AnalyzeError::TypeMismatch { .. }));
        assert!(matches!(ap_err("int x; char x;"),
            AnalyzeError::DuplicateDeclarationInScope { .. }));
        assert!(matches!(ap_err("int f() { return 0; } int f() { return 1; }"),
            AnalyzeError::DuplicateDeclarationInScope { .. }));
    }

    #[test]
    fn literal_zero_initializes_pointers() {
        let p = ap("int *g = 0; int main() { char *s = 0; int *q = g; return 0; }");
        assert_eq!(p.globals_init[0], Some(GlobalInit::Int(0)));
    }

    #[test]
    fn global_initializers_fold() {
        let p = ap("int a = 3 * 5 + 1; char c = 'A'; char *s = \"hey\"; int main() { return 0; }");
        assert_eq!(p.globals_init[0], Some(GlobalInit::Int(16)));
        assert_eq!(p.globals_init[1], Some(GlobalInit::Int(65)));
        assert!(matches!(p.globals_init[2], Some(GlobalInit::Str(_))));
        assert!(matches!(
            ap_err("int b = 1 / 0;"),
            AnalyzeError::TypeMismatch { .. }
        ));
        assert!(matches!(
            ap_err("int g; int b = g;"),
            AnalyzeError::TypeMismatch { .. }
        ));
    }

    #[test]
    fn full_statements_are_block_elements_in_source_order() {
        let p = ap("int main() { /* c */ int i; for (i = 0; i < 3; i = i + 1) { \
                    print_int(i); } return 0; }");
        // full stmts: decl, for, print_int call, return (comment excluded;
        // for-init/step are header statements, not full ones)
        assert_eq!(p.full_stmts.len(), 4);
        for w in p.full_stmts.windows(2) {
            assert!(p.stmt_pos[&w[0]] < p.stmt_pos[&w[1]]);
        }
    }

    #[test]
    fn strlen_accepts_literal_zero() {
        // a null argument is type-correct; it faults only at run time
        ap("int main() { strlen(0); return 0; }");
    }

    #[test]
    fn oversized_arrays_are_rejected() {
        assert!(matches!(ap_err("char big[16777217];"), AnalyzeError::TypeMismatch { .. }));
        ap("char big[16777216];");
    }

    #[test]
    fn canonical_source_is_pretty_printed() {
        let p = ap("int main(){return   0;}");
        assert_eq!(p.canonical_source(), "int main() {\n    return 0;\n}\n");
    }
}
