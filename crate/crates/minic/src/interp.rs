//! Tree-walking interpreter with fault detection.
//!
//! Pointers are (object id, byte offset) pairs, never machine addresses;
//! object id 0 is null. Every allocation is a byte array: global arrays,
//! string literals (immutable, NUL-terminated), witness argument strings,
//! heap blocks, and local arrays. Scalar variables live in typed slots and
//! keep full i64 offsets; a pointer stored into object memory round-trips
//! through the 64-bit encoding `object << 32 | offset as u32`.
//!
//! The step counter advances once per executed full statement and once per
//! loop-condition evaluation, so even an empty loop body runs the budget
//! down. Faults are attributed to the innermost full statement being
//! executed when the illegal operation happens.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::analyze::{AnalyzedProgram, FuncInfo, GlobalInit, VarInfo, VarKind, MAX_OBJECT_BYTES};
use crate::ast::*;
use crate::trace::VarSnapshot;
use crate::types::{Base, Type};

pub const DEFAULT_STEP_BUDGET: u64 = 10_000_000;
pub const DEFAULT_MAX_CALL_DEPTH: u32 = 4096;
/// Exit code reported when the step budget or call-depth cap is hit.
pub const EXIT_BUDGET_EXHAUSTED: i64 = 70;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultKind {
    NullDeref,
    OobRead,
    OobWrite,
    UseAfterFree,
    DoubleFree,
    DivZero,
}

impl FaultKind {
    pub fn exit_code(self) -> i64 {
        match self {
            FaultKind::NullDeref => 64,
            FaultKind::OobRead => 65,
            FaultKind::OobWrite => 66,
            FaultKind::UseAfterFree => 67,
            FaultKind::DoubleFree => 68,
            FaultKind::DivZero => 69,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FaultKind::NullDeref => "null-deref",
            FaultKind::OobRead => "oob-read",
            FaultKind::OobWrite => "oob-write",
            FaultKind::UseAfterFree => "use-after-free",
            FaultKind::DoubleFree => "double-free",
            FaultKind::DivZero => "div-zero",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub step_budget: u64,
    pub max_call_depth: u32,
}

impl Default for Limits {
    fn default() -> Limits {
        Limits { step_budget: DEFAULT_STEP_BUDGET, max_call_depth: DEFAULT_MAX_CALL_DEPTH }
    }
}

/// One witness: an input id and its argument atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramInput {
    pub id: u32,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub exit: i64,
    /// Fault kind and the full statement it is attributed to.
    pub fault: Option<(FaultKind, NodeId)>,
    pub steps: u64,
    pub stdout: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("program has no main function")]
    NoMain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HookAction {
    Continue,
    Stop,
}

/// Passed to `run_hooked` callbacks when execution arrives at a hooked
/// statement, before the statement executes.
pub struct HookCtx<'a, 'p> {
    pub stmt: NodeId,
    pub step: u64,
    interp: &'a Interp<'p>,
}

impl HookCtx<'_, '_> {
    /// Scalar variables in scope at the hooked statement, pre-statement.
    pub fn snapshot(&self) -> Vec<VarSnapshot> {
        self.interp.snapshot_at(self.stmt)
    }
}

pub fn run_plain(prog: &AnalyzedProgram, input: &ProgramInput) -> Result<RunOutcome, RunError> {
    run_plain_limited(prog, input, Limits::default())
}

pub fn run_plain_limited(
    prog: &AnalyzedProgram,
    input: &ProgramInput,
    limits: Limits,
) -> Result<RunOutcome, RunError> {
    run_with_observer(prog, input, limits, &mut NoObserver)
}

/// Run with a callback at each statement in `hooks`. The callback may stop
/// the program; a stopped run reports exit 0, no fault.
pub fn run_hooked<F>(
    prog: &AnalyzedProgram,
    input: &ProgramInput,
    limits: Limits,
    hooks: &HashSet<NodeId>,
    on_hook: F,
) -> Result<RunOutcome, RunError>
where
    F: FnMut(&HookCtx) -> HookAction,
{
    let mut obs = FnObserver { hooks, f: on_hook };
    run_with_observer(prog, input, limits, &mut obs)
}

pub(crate) trait Observer {
    fn on_stmt(&mut self, interp: &Interp, stmt: NodeId, step: u64) -> HookAction;
}

struct NoObserver;

impl Observer for NoObserver {
    fn on_stmt(&mut self, _: &Interp, _: NodeId, _: u64) -> HookAction {
        HookAction::Continue
    }
}

struct FnObserver<'h, F> {
    hooks: &'h HashSet<NodeId>,
    f: F,
}

impl<F> Observer for FnObserver<'_, F>
where
    F: FnMut(&HookCtx) -> HookAction,
{
    fn on_stmt(&mut self, interp: &Interp, stmt: NodeId, step: u64) -> HookAction {
        if self.hooks.contains(&stmt) {
            (self.f)(&HookCtx { stmt, step, interp })
        } else {
            HookAction::Continue
        }
    }
}

pub(crate) fn run_with_observer<O: Observer>(
    prog: &AnalyzedProgram,
    input: &ProgramInput,
    limits: Limits,
    obs: &mut O,
) -> Result<RunOutcome, RunError> {
    if !prog.funcs.contains_key("main") {
        return Err(RunError::NoMain);
    }
    let mut it = Interp::new(prog, input, limits);
    it.setup();
    let res = it.call("main", Vec::new(), obs);
    let outcome = match res {
        Ok(v) => RunOutcome { exit: v.encode(), fault: None, steps: it.steps, stdout: it.stdout },
        Err(Stop::Fault(kind, stmt)) => RunOutcome {
            exit: kind.exit_code(),
            fault: Some((kind, stmt)),
            steps: it.steps,
            stdout: it.stdout,
        },
        Err(Stop::Budget) => RunOutcome {
            exit: EXIT_BUDGET_EXHAUSTED,
            fault: None,
            steps: it.steps,
            stdout: it.stdout,
        },
        Err(Stop::Halted) => {
            RunOutcome { exit: 0, fault: None, steps: it.steps, stdout: it.stdout }
        }
    };
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Value {
    Int(i64),
    Ptr(u32, i64),
}

impl Value {
    pub(crate) fn encode(self) -> i64 {
        match self {
            Value::Int(v) => v,
            Value::Ptr(obj, off) => (((obj as u64) << 32) | (off as u32 as u64)) as i64,
        }
    }

    fn truthy(self) -> bool {
        self.encode() != 0
    }
}

fn decode_ptr(bits: i64) -> Value {
    let u = bits as u64;
    Value::Ptr((u >> 32) as u32, (u & 0xffff_ffff) as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ObjKind {
    Global,
    Str,
    Arg,
    Heap,
    Local,
}

struct Object {
    kind: ObjKind,
    bytes: Vec<u8>,
    live: bool,
}

struct Frame {
    slots: Vec<Value>,
    /// Live local-array objects by slot, killed on exit or re-declaration.
    array_objs: HashMap<u32, u32>,
}

enum Stop {
    Fault(FaultKind, NodeId),
    Budget,
    Halted,
}

enum Flow {
    Normal,
    Return(Value),
}

enum Place {
    Slot { kind: VarKind, slot: u32, ty: Type },
    Mem { obj: u32, off: i64, ty: Type },
}

pub(crate) struct Interp<'p> {
    prog: &'p AnalyzedProgram,
    globals: Vec<Value>,
    objects: Vec<Object>,
    frames: Vec<Frame>,
    args: Vec<String>,
    arg_objs: Vec<u32>,
    str_objs: HashMap<NodeId, u32>,
    stdout: String,
    steps: u64,
    limits: Limits,
    cur_stmt: NodeId,
}

impl<'p> Interp<'p> {
    fn new(prog: &'p AnalyzedProgram, input: &ProgramInput, limits: Limits) -> Interp<'p> {
        Interp {
            prog,
            globals: Vec::new(),
            objects: Vec::new(),
            frames: Vec::new(),
            args: input.args.clone(),
            arg_objs: Vec::new(),
            str_objs: HashMap::new(),
            stdout: String::new(),
            steps: 0,
            limits,
            cur_stmt: NodeId(0),
        }
    }

    /// Allocation order fixes object ids: global arrays in declaration
    /// order, then string literals in node-id order, then argument strings,
    /// then whatever the run allocates.
    fn setup(&mut self) {
        for g in &self.prog.globals {
            let v = if g.ty.is_array() {
                let size = g.ty.size_in_bytes().expect("checked at analysis");
                let obj = self.alloc(ObjKind::Global, size as usize);
                Value::Ptr(obj, 0)
            } else {
                zero_of(&g.ty)
            };
            self.globals.push(v);
        }
        for (nid, bytes) in &self.prog.str_lits {
            let obj = self.alloc_bytes(ObjKind::Str, bytes);
            self.str_objs.insert(*nid, obj);
        }
        for arg in &self.args.clone() {
            let obj = self.alloc_bytes(ObjKind::Arg, arg.as_bytes());
            self.arg_objs.push(obj);
        }
        for (g, init) in self.prog.globals.iter().zip(&self.prog.globals_init) {
            let v = match init {
                None => continue,
                Some(GlobalInit::Int(v)) => coerce(&g.ty, Value::Int(*v)),
                Some(GlobalInit::Str(nid)) => Value::Ptr(self.str_objs[nid], 0),
            };
            self.globals[g.slot as usize] = v;
        }
    }

    fn alloc(&mut self, kind: ObjKind, size: usize) -> u32 {
        self.objects.push(Object { kind, bytes: vec![0; size], live: true });
        self.objects.len() as u32
    }

    /// Allocate a NUL-terminated copy of `bytes`.
    fn alloc_bytes(&mut self, kind: ObjKind, bytes: &[u8]) -> u32 {
        let mut v = Vec::with_capacity(bytes.len() + 1);
        v.extend_from_slice(bytes);
        v.push(0);
        self.objects.push(Object { kind, bytes: v, live: true });
        self.objects.len() as u32
    }

    fn fault(&self, kind: FaultKind) -> Stop {
        Stop::Fault(kind, self.cur_stmt)
    }

    /// Budget bookkeeping plus observer callback at a full statement.
    fn arrive<O: Observer>(&mut self, stmt: NodeId, obs: &mut O) -> Result<(), Stop> {
        if self.steps >= self.limits.step_budget {
            return Err(Stop::Budget);
        }
        self.steps += 1;
        self.cur_stmt = stmt;
        match obs.on_stmt(self, stmt, self.steps) {
            HookAction::Continue => Ok(()),
            HookAction::Stop => Err(Stop::Halted),
        }
    }

    /// Budget bookkeeping at a loop-condition evaluation; faults in the
    /// condition or step are attributed to the loop statement.
    fn loop_boundary(&mut self, stmt: NodeId) -> Result<(), Stop> {
        if self.steps >= self.limits.step_budget {
            return Err(Stop::Budget);
        }
        self.steps += 1;
        self.cur_stmt = stmt;
        Ok(())
    }

    fn frame(&self) -> &Frame {
        self.frames.last().expect("inside a call")
    }

    fn frame_mut(&mut self) -> &mut Frame {
        self.frames.last_mut().expect("inside a call")
    }

    fn call<O: Observer>(
        &mut self,
        name: &str,
        args: Vec<Value>,
        obs: &mut O,
    ) -> Result<Value, Stop> {
        if self.frames.len() as u32 >= self.limits.max_call_depth {
            return Err(Stop::Budget);
        }
        // The host stack must outlast the deepest permitted MiniC recursion.
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || self.call_inner(name, args, obs))
    }

    fn call_inner<O: Observer>(
        &mut self,
        name: &str,
        args: Vec<Value>,
        obs: &mut O,
    ) -> Result<Value, Stop> {
        let f: &FuncInfo = &self.prog.funcs[name];
        let mut slots: Vec<Value> = f.slot_tys.iter().map(zero_of).collect();
        for (p, v) in f.params.iter().zip(args) {
            slots[p.slot as usize] = coerce(&p.ty, v);
        }
        self.frames.push(Frame { slots, array_objs: HashMap::new() });
        let Item::Func(def) = &self.prog.unit.items[f.item_index] else { unreachable!() };
        let flow = self.exec_block(&def.body, obs);
        let frame = self.frames.pop().expect("frame pushed above");
        for (_, obj) in frame.array_objs {
            self.objects[(obj - 1) as usize].live = false;
        }
        let ret_ty = f.ret.clone();
        let v = match flow? {
            Flow::Return(v) => v,
            Flow::Normal => Value::Int(0),
        };
        Ok(match &ret_ty {
            Some(t) => coerce(t, v),
            None => Value::Int(0),
        })
    }

    fn exec_block<O: Observer>(&mut self, b: &Block, obs: &mut O) -> Result<Flow, Stop> {
        for s in &b.stmts {
            if s.is_comment() {
                continue;
            }
            self.arrive(s.id(), obs)?;
            match self.exec_stmt(s, obs)? {
                Flow::Normal => {}
                r @ Flow::Return(_) => return Ok(r),
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_stmt<O: Observer>(&mut self, s: &Stmt, obs: &mut O) -> Result<Flow, Stop> {
        match s {
            Stmt::Decl(d) => {
                let slot = self.prog.decl_slots[&d.id];
                if d.ty.is_array() {
                    // Fresh storage per execution; the previous iteration's
                    // array is dead, like leaving its scope in C.
                    if let Some(old) = self.frame().array_objs.get(&slot).copied() {
                        self.objects[(old - 1) as usize].live = false;
                    }
                    let size = d.ty.size_in_bytes().expect("checked at analysis");
                    let obj = self.alloc(ObjKind::Local, size as usize);
                    self.frame_mut().array_objs.insert(slot, obj);
                    self.frame_mut().slots[slot as usize] = Value::Ptr(obj, 0);
                } else {
                    let v = match &d.init {
                        Some(init) => self.eval(init, obs)?,
                        None => zero_of(&d.ty),
                    };
                    self.frame_mut().slots[slot as usize] = coerce(&d.ty, v);
                }
                Ok(Flow::Normal)
            }
            Stmt::Assign { target, value, .. } => {
                let place = self.eval_place(target, obs)?;
                let v = self.eval(value, obs)?;
                self.write_place(place, v)?;
                Ok(Flow::Normal)
            }
            Stmt::Expr { expr, .. } => {
                self.eval(expr, obs)?;
                Ok(Flow::Normal)
            }
            Stmt::If { cond, then_blk, else_blk, .. } => {
                let c = self.eval(cond, obs)?;
                if c.truthy() {
                    self.exec_block(then_blk, obs)
                } else if let Some(e) = else_blk {
                    self.exec_block(e, obs)
                } else {
                    Ok(Flow::Normal)
                }
            }
            Stmt::While { id, cond, body, .. } => {
                loop {
                    self.loop_boundary(*id)?;
                    if !self.eval(cond, obs)?.truthy() {
                        break;
                    }
                    match self.exec_block(body, obs)? {
                        Flow::Normal => {}
                        r @ Flow::Return(_) => return Ok(r),
                    }
                }
                Ok(Flow::Normal)
            }
            Stmt::For { id, init, cond, step, body, .. } => {
                if let Some(init) = init {
                    self.exec_stmt(init, obs)?;
                }
                loop {
                    self.loop_boundary(*id)?;
                    if let Some(cond) = cond {
                        if !self.eval(cond, obs)?.truthy() {
                            break;
                        }
                    }
                    match self.exec_block(body, obs)? {
                        Flow::Normal => {}
                        r @ Flow::Return(_) => return Ok(r),
                    }
                    if let Some(step) = step {
                        self.cur_stmt = *id;
                        self.exec_stmt(step, obs)?;
                    }
                }
                Ok(Flow::Normal)
            }
            Stmt::Return { value, .. } => {
                let v = match value {
                    Some(e) => self.eval(e, obs)?,
                    None => Value::Int(0),
                };
                Ok(Flow::Return(v))
            }
            Stmt::Block(b) => self.exec_block(b, obs),
            Stmt::Comment { .. } => Ok(Flow::Normal),
        }
    }

    fn eval<O: Observer>(&mut self, e: &Expr, obs: &mut O) -> Result<Value, Stop> {
        match &e.kind {
            ExprKind::Int(v) => Ok(Value::Int(*v)),
            ExprKind::Char(c) => Ok(Value::Int(*c as i8 as i64)),
            ExprKind::Str(_) => Ok(Value::Ptr(self.str_objs[&e.id], 0)),
            ExprKind::Ident(_) | ExprKind::Index(..) | ExprKind::Unary(UnOp::Deref, _) => {
                let place = self.eval_place(e, obs)?;
                self.read_place(place)
            }
            ExprKind::Unary(UnOp::Neg, x) => {
                let v = self.eval(x, obs)?;
                Ok(Value::Int(v.encode().wrapping_neg()))
            }
            ExprKind::Unary(UnOp::Not, x) => {
                let v = self.eval(x, obs)?;
                Ok(Value::Int((!v.truthy()) as i64))
            }
            ExprKind::Unary(UnOp::Addr, x) => {
                // No access happens: &a[i] and &*p are pure address math.
                match self.eval_place(x, obs)? {
                    Place::Mem { obj, off, .. } => Ok(Value::Ptr(obj, off)),
                    Place::Slot { .. } => unreachable!("analysis rejects & on variables"),
                }
            }
            ExprKind::Binary(op, l, r) => self.eval_binary(*op, l, r, obs),
            ExprKind::Call(name, args) => self.eval_call(name, args, obs),
            ExprKind::Cast(t, x) => {
                let v = self.eval(x, obs)?;
                Ok(if t.is_pointer() {
                    match v {
                        Value::Ptr(..) => v,
                        Value::Int(bits) => decode_ptr(bits),
                    }
                } else if t.base == Base::Char {
                    Value::Int(v.encode() as i8 as i64)
                } else {
                    Value::Int(v.encode())
                })
            }
        }
    }

    fn eval_binary<O: Observer>(
        &mut self,
        op: BinOp,
        l: &Expr,
        r: &Expr,
        obs: &mut O,
    ) -> Result<Value, Stop> {
        if matches!(op, BinOp::And | BinOp::Or) {
            let lv = self.eval(l, obs)?.truthy();
            return match (op, lv) {
                (BinOp::And, false) => Ok(Value::Int(0)),
                (BinOp::Or, true) => Ok(Value::Int(1)),
                _ => {
                    let rv = self.eval(r, obs)?.truthy();
                    Ok(Value::Int(rv as i64))
                }
            };
        }
        let lv = self.eval(l, obs)?;
        let rv = self.eval(r, obs)?;
        match op {
            BinOp::Add | BinOp::Sub => {
                if let Value::Ptr(obj, off) = lv {
                    let stride = self.ptr_stride(l);
                    let n = rv.encode().wrapping_mul(stride as i64);
                    let off = if op == BinOp::Add {
                        off.wrapping_add(n)
                    } else {
                        off.wrapping_sub(n)
                    };
                    Ok(Value::Ptr(obj, off))
                } else {
                    let (a, b) = (lv.encode(), rv.encode());
                    Ok(Value::Int(if op == BinOp::Add {
                        a.wrapping_add(b)
                    } else {
                        a.wrapping_sub(b)
                    }))
                }
            }
            BinOp::Mul => Ok(Value::Int(lv.encode().wrapping_mul(rv.encode()))),
            BinOp::Div | BinOp::Rem => {
                let (a, b) = (lv.encode(), rv.encode());
                if b == 0 {
                    return Err(self.fault(FaultKind::DivZero));
                }
                // i64::MIN / -1 wraps rather than trapping.
                Ok(Value::Int(if op == BinOp::Div {
                    a.wrapping_div(b)
                } else {
                    a.wrapping_rem(b)
                }))
            }
            BinOp::Eq | BinOp::Ne => {
                let eq = match (lv, rv) {
                    (Value::Ptr(a, b), Value::Ptr(c, d)) => (a, b) == (c, d),
                    _ => lv.encode() == rv.encode(),
                };
                Ok(Value::Int((eq == (op == BinOp::Eq)) as i64))
            }
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                let ord = match (lv, rv) {
                    (Value::Ptr(a, b), Value::Ptr(c, d)) => (a, b).cmp(&(c, d)),
                    _ => lv.encode().cmp(&rv.encode()),
                };
                let ok = match op {
                    BinOp::Lt => ord.is_lt(),
                    BinOp::Le => ord.is_le(),
                    BinOp::Gt => ord.is_gt(),
                    BinOp::Ge => ord.is_ge(),
                    _ => unreachable!(),
                };
                Ok(Value::Int(ok as i64))
            }
            BinOp::And | BinOp::Or => unreachable!("handled before operand evaluation"),
        }
    }

    /// Byte stride of pointer arithmetic on expression `e`.
    fn ptr_stride(&self, e: &Expr) -> u64 {
        let ty = &self.prog.expr_types[&e.id];
        let d = ty.decayed().expect("analysis checked arithmetic operand");
        d.elem()
            .and_then(|t| t.size_in_bytes())
            .expect("analysis rejects *void arithmetic")
    }

    fn eval_place<O: Observer>(&mut self, e: &Expr, obs: &mut O) -> Result<Place, Stop> {
        match &e.kind {
            ExprKind::Ident(_) => {
                let (kind, slot) = self.prog.ident_slots[&e.id];
                Ok(Place::Slot { kind, slot, ty: self.prog.expr_types[&e.id].clone() })
            }
            ExprKind::Unary(UnOp::Deref, x) => {
                let v = self.eval(x, obs)?;
                let (obj, off) = as_ptr(v);
                Ok(Place::Mem { obj, off, ty: self.prog.expr_types[&e.id].clone() })
            }
            ExprKind::Index(base, idx) => {
                let bv = self.eval(base, obs)?;
                let iv = self.eval(idx, obs)?.encode();
                let (obj, boff) = as_ptr(bv);
                let elem_ty = self.prog.expr_types[&e.id].clone();
                let stride = elem_ty.size_in_bytes().expect("indexable element has a size");
                let off = boff.wrapping_add(iv.wrapping_mul(stride as i64));
                Ok(Place::Mem { obj, off, ty: elem_ty })
            }
            _ => unreachable!("not a place expression"),
        }
    }

    fn read_place(&mut self, p: Place) -> Result<Value, Stop> {
        match p {
            Place::Slot { kind, slot, .. } => Ok(self.read_slot(kind, slot)),
            Place::Mem { obj, off, ty } => {
                if ty.is_array() {
                    // Sub-array of a multi-dimensional array decays to its
                    // first element's address; no memory is touched.
                    return Ok(Value::Ptr(obj, off));
                }
                let len = ty.size_in_bytes().expect("scalar place");
                let bytes = self.access(obj, off, len, false)?;
                Ok(if ty.is_pointer() {
                    decode_ptr(i64::from_le_bytes(bytes.try_into().unwrap()))
                } else if ty.base == Base::Char {
                    Value::Int(bytes[0] as i8 as i64)
                } else {
                    Value::Int(i64::from_le_bytes(bytes.try_into().unwrap()))
                })
            }
        }
    }

    fn write_place(&mut self, p: Place, v: Value) -> Result<(), Stop> {
        match p {
            Place::Slot { kind, slot, ty } => {
                let v = coerce(&ty, v);
                match kind {
                    VarKind::Global => self.globals[slot as usize] = v,
                    VarKind::Param | VarKind::Local => {
                        self.frame_mut().slots[slot as usize] = v;
                    }
                }
                Ok(())
            }
            Place::Mem { obj, off, ty } => {
                let len = ty.size_in_bytes().expect("scalar place");
                let bits = coerce(&ty, v).encode();
                let dst = self.access_mut(obj, off, len)?;
                if ty.base == Base::Char && !ty.is_pointer() {
                    dst[0] = bits as u8;
                } else {
                    dst.copy_from_slice(&bits.to_le_bytes());
                }
                Ok(())
            }
        }
    }

    fn read_slot(&self, kind: VarKind, slot: u32) -> Value {
        match kind {
            VarKind::Global => self.globals[slot as usize],
            VarKind::Param | VarKind::Local => self.frame().slots[slot as usize],
        }
    }

    /// Bounds- and lifetime-checked read access to `len` bytes.
    fn access(&self, obj: u32, off: i64, len: u64, write: bool) -> Result<Vec<u8>, Stop> {
        let idx = self.check_access(obj, off, len, write)?;
        let start = off as usize;
        Ok(self.objects[idx].bytes[start..start + len as usize].to_vec())
    }

    fn access_mut(&mut self, obj: u32, off: i64, len: u64) -> Result<&mut [u8], Stop> {
        let idx = self.check_access(obj, off, len, true)?;
        let start = off as usize;
        Ok(&mut self.objects[idx].bytes[start..start + len as usize])
    }

    fn check_access(&self, obj: u32, off: i64, len: u64, write: bool) -> Result<usize, Stop> {
        let oob = if write { FaultKind::OobWrite } else { FaultKind::OobRead };
        if obj == 0 {
            return Err(self.fault(FaultKind::NullDeref));
        }
        let o = &self.objects[(obj - 1) as usize];
        if !o.live {
            return Err(self.fault(FaultKind::UseAfterFree));
        }
        if write && matches!(o.kind, ObjKind::Str | ObjKind::Arg) {
            // String storage is immutable; a write is out of legal bounds.
            return Err(self.fault(FaultKind::OobWrite));
        }
        let size = o.bytes.len() as u64;
        if off < 0 || (off as u64).saturating_add(len) > size {
            return Err(self.fault(oob));
        }
        Ok((obj - 1) as usize)
    }

    fn eval_call<O: Observer>(
        &mut self,
        name: &str,
        args: &[Expr],
        obs: &mut O,
    ) -> Result<Value, Stop> {
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            vals.push(self.eval(a, obs)?);
        }
        if crate::is_builtin(name) {
            return self.eval_builtin(name, &vals);
        }
        let f = &self.prog.funcs[name];
        let coerced: Vec<Value> =
            f.params.iter().zip(vals).map(|(p, v)| coerce(&p.ty, v)).collect();
        self.call(name, coerced, obs)
    }

    fn eval_builtin(&mut self, name: &str, vals: &[Value]) -> Result<Value, Stop> {
        match name {
            "malloc" => {
                let n = vals[0].encode();
                if n <= 0 || n as u64 > MAX_OBJECT_BYTES {
                    return Ok(Value::Ptr(0, 0));
                }
                let obj = self.alloc(ObjKind::Heap, n as usize);
                Ok(Value::Ptr(obj, 0))
            }
            "free" => {
                if vals[0].encode() == 0 {
                    return Ok(Value::Int(0));
                }
                let (obj, off) = as_ptr(vals[0]);
                let valid = off == 0
                    && obj != 0
                    && self.objects[(obj - 1) as usize].kind == ObjKind::Heap
                    && self.objects[(obj - 1) as usize].live;
                if !valid {
                    return Err(self.fault(FaultKind::DoubleFree));
                }
                self.objects[(obj - 1) as usize].live = false;
                Ok(Value::Int(0))
            }
            "memcpy" => {
                let n = vals[2].encode();
                if n <= 0 {
                    return Ok(vals[0]);
                }
                if vals[0].encode() == 0 || vals[1].encode() == 0 {
                    return Err(self.fault(FaultKind::NullDeref));
                }
                let (sobj, soff) = as_ptr(vals[1]);
                let tmp = self.access(sobj, soff, n as u64, false)?;
                let (dobj, doff) = as_ptr(vals[0]);
                let dst = self.access_mut(dobj, doff, n as u64)?;
                dst.copy_from_slice(&tmp);
                Ok(vals[0])
            }
            "strlen" => {
                let (_, _, len) = self.c_str(vals[0])?;
                Ok(Value::Int(len as i64))
            }
            "strcpy" => {
                let (sobj, soff, len) = self.c_str(vals[1])?;
                let tmp = self.access(sobj, soff, len as u64 + 1, false)?;
                if vals[0].encode() == 0 {
                    return Err(self.fault(FaultKind::NullDeref));
                }
                let (dobj, doff) = as_ptr(vals[0]);
                let dst = self.access_mut(dobj, doff, len as u64 + 1)?;
                dst.copy_from_slice(&tmp);
                Ok(vals[0])
            }
            "print_int" => {
                let v = vals[0].encode();
                self.stdout.push_str(&v.to_string());
                self.stdout.push('\n');
                Ok(Value::Int(0))
            }
            "print_str" => {
                let (obj, off, len) = self.c_str(vals[0])?;
                let bytes = self.access(obj, off, len as u64, false)?;
                self.stdout.push_str(&String::from_utf8_lossy(&bytes));
                self.stdout.push('\n');
                Ok(Value::Int(0))
            }
            "argc" => Ok(Value::Int(self.args.len() as i64)),
            "arg_int" => {
                let i = vals[0].encode();
                let v = usize::try_from(i)
                    .ok()
                    .and_then(|i| self.args.get(i))
                    .and_then(|s| s.parse::<i64>().ok())
                    .unwrap_or(0);
                Ok(Value::Int(v))
            }
            "arg_str" => {
                let i = vals[0].encode();
                let obj = usize::try_from(i).ok().and_then(|i| self.arg_objs.get(i).copied());
                Ok(match obj {
                    Some(obj) => Value::Ptr(obj, 0),
                    None => Value::Ptr(0, 0),
                })
            }
            _ => unreachable!("unknown builtin {name}"),
        }
    }

    /// Locate a NUL-terminated string: (object, start offset, length).
    fn c_str(&self, v: Value) -> Result<(u32, i64, usize), Stop> {
        if v.encode() == 0 {
            return Err(self.fault(FaultKind::NullDeref));
        }
        let (obj, off) = as_ptr(v);
        if obj == 0 {
            return Err(self.fault(FaultKind::NullDeref));
        }
        let o = &self.objects[(obj - 1) as usize];
        if !o.live {
            return Err(self.fault(FaultKind::UseAfterFree));
        }
        if off < 0 || off as u64 > o.bytes.len() as u64 {
            return Err(self.fault(FaultKind::OobRead));
        }
        match o.bytes[off as usize..].iter().position(|&b| b == 0) {
            Some(len) => Ok((obj, off, len)),
            None => Err(self.fault(FaultKind::OobRead)),
        }
    }

    /// Remaining bytes from a pointer to the end of its live allocation.
    fn remaining(&self, obj: u32, off: i64) -> Option<u64> {
        if obj == 0 {
            return None;
        }
        let o = self.objects.get((obj - 1) as usize)?;
        if !o.live {
            return None;
        }
        let size = o.bytes.len() as u64;
        if off >= 0 && off as u64 <= size {
            Some(size - off as u64)
        } else {
            None
        }
    }

    fn read_var(&self, v: &VarInfo) -> Value {
        self.read_slot(v.kind, v.slot)
    }

    /// Scalar in-scope variables at `stmt` with their current values.
    pub(crate) fn snapshot_at(&self, stmt: NodeId) -> Vec<VarSnapshot> {
        let vars = self.prog.stmt_vars.get(&stmt).expect("hooked statements are known");
        vars.iter()
            .filter(|v| v.ty.is_scalar())
            .map(|v| {
                let val = self.read_var(v);
                let size = match val {
                    Value::Ptr(obj, off) => self.remaining(obj, off),
                    Value::Int(_) => None,
                };
                VarSnapshot {
                    name: v.name.clone(),
                    ty: v.ty.clone(),
                    is_const: v.is_const,
                    value: val.encode(),
                    size,
                }
            })
            .collect()
    }
}

/// Runtime values follow static types, so a pointer-typed operand is a
/// `Ptr`; the one exception is a literal 0, which arrives as `Int`.
fn as_ptr(v: Value) -> (u32, i64) {
    match v {
        Value::Ptr(obj, off) => (obj, off),
        Value::Int(bits) => match decode_ptr(bits) {
            Value::Ptr(obj, off) => (obj, off),
            Value::Int(_) => unreachable!(),
        },
    }
}

fn zero_of(ty: &Type) -> Value {
    if ty.is_pointer() {
        Value::Ptr(0, 0)
    } else {
        Value::Int(0)
    }
}

/// Store conversion: chars truncate and sign-extend, pointer slots decode
/// integer bits (only ever 0 after analysis).
fn coerce(ty: &Type, v: Value) -> Value {
    if ty.is_pointer() {
        match v {
            Value::Ptr(..) => v,
            Value::Int(bits) => decode_ptr(bits),
        }
    } else if ty.base == Base::Char && ty.dims.is_empty() && ty.stars == 0 {
        Value::Int(v.encode() as i8 as i64)
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyze::analyze;
    use crate::parser::parse;

    fn run(src: &str) -> RunOutcome {
        run_args(src, &[])
    }

    fn run_args(src: &str, args: &[&str]) -> RunOutcome {
        let prog = analyze(parse("t.mc", src).unwrap()).unwrap();
        let input =
            ProgramInput { id: 1, args: args.iter().map(|s| s.to_string()).collect() };
        run_plain(&prog, &input).unwrap()
    }

    #[test]
    fn plain_exit_codes() {
        assert_eq!(run("int main(){return 7;}").exit, 7);
        assert_eq!(run("int main(){return 0;}").exit, 0);
    }

    #[test]
    fn null_write_faults() {
        let out = run("int main(){int *p=0; *p=1; return 0;}");
        assert_eq!(out.exit, 64);
        assert_eq!(out.fault.unwrap().0, FaultKind::NullDeref);
    }

    #[test]
    fn string_literal_overread_faults() {
        let out = run("int main(){char *s=\"\"; char c=s[1]; c; return 0;}");
        assert_eq!(out.exit, 65);
        assert_eq!(out.fault.unwrap().0, FaultKind::OobRead);
    }

    #[test]
    fn string_literals_are_immutable() {
        let out = run("int main(){char *s=\"abc\"; s[0]='x'; return 0;}");
        assert_eq!(out.exit, 66);
    }

    #[test]
    fn use_after_free_and_double_free() {
        let out = run("int main(){int *p=(int *)malloc(8); free(p); return p[0];}");
        assert_eq!(out.exit, 67);
        let out = run("int main(){int *p=(int *)malloc(8); free(p); free(p); return 0;}");
        assert_eq!(out.exit, 68);
        let out = run("int main(){int *p=(int *)malloc(8); free(p+1); return 0;}");
        assert_eq!(out.exit, 68, "offset free is an invalid free");
        let out = run("int main(){free(0); return 0;}");
        assert_eq!(out.exit, 0, "free(null) is a no-op");
    }

    #[test]
    fn div_zero_faults_and_min_over_minus_one_wraps() {
        assert_eq!(run("int main(){int z=0; return 1/z;}").exit, 69);
        assert_eq!(run("int main(){int z=0; return 1%z;}").exit, 69);
        let out = run(
            "int main(){int m=-9223372036854775807-1; int d=-1; \
             if (m/d == m) { return 42; } return 1; }",
        );
        assert_eq!(out.exit, 42);
    }

    #[test]
    fn budget_exhaustion_is_exit_70_without_fault() {
        let prog = analyze(parse("t.mc", "int main(){while(1){} return 0;}").unwrap()).unwrap();
        let out = run_plain_limited(
            &prog,
            &ProgramInput { id: 1, args: vec![] },
            Limits { step_budget: 1000, max_call_depth: 64 },
        )
        .unwrap();
        assert_eq!(out.exit, EXIT_BUDGET_EXHAUSTED);
        assert!(out.fault.is_none());
        assert_eq!(out.steps, 1000);
        let out = run("int main(){for(;;){}}");
        assert_eq!(out.exit, EXIT_BUDGET_EXHAUSTED);
    }

    #[test]
    fn runaway_recursion_exits_70() {
        let out = run("int f(int n){ return f(n + 1); } int main(){ return f(0); }");
        assert_eq!(out.exit, EXIT_BUDGET_EXHAUSTED);
        assert!(out.fault.is_none());
    }

    #[test]
    fn malloc_contracts() {
        assert_eq!(run("int main(){ return malloc(0) == 0; }").exit, 1);
        assert_eq!(run("int main(){ return malloc(-5) == 0; }").exit, 1);
        assert_eq!(run("int main(){ return malloc(16777217) == 0; }").exit, 1);
        assert_eq!(
            run("int main(){ int *p=(int *)malloc(16); return p[0]+p[1]; }").exit,
            0,
            "heap memory is zeroed"
        );
    }

    #[test]
    fn memcpy_contracts() {
        let out = run(
            "int main(){ char *d=(char *)malloc(4); memcpy(d, \"abc\", 4); \
             return d[2]; }",
        );
        assert_eq!(out.exit, 'c' as i64);
        assert_eq!(run("int main(){ memcpy(0, \"a\", 1); return 0; }").exit, 64);
        assert_eq!(
            run("int main(){ char *d=(char *)malloc(2); memcpy(d, \"abc\", 4); return 0; }")
                .exit,
            66
        );
        assert_eq!(
            run("int main(){ char *d=(char *)malloc(9); memcpy(d, \"abc\", 9); return 0; }")
                .exit,
            65,
            "overlong source read"
        );
        assert_eq!(
            run("int main(){ char *d=(char *)malloc(4); memcpy(d, d, -3); return 0; }").exit,
            0,
            "non-positive length is a no-op"
        );
        let out = run(
            "int main(){ char *d=(char *)malloc(8); strcpy(d, \"abcdef\"); \
             memcpy(d + 2, d, 4); return d[2] == 'a' && d[5] == 'd'; }",
        );
        assert_eq!(out.exit, 1, "overlapping copy reads the pre-copy bytes");
    }

    #[test]
    fn string_builtins() {
        assert_eq!(run("int main(){ return strlen(\"hello\"); }").exit, 5);
        assert_eq!(run("int main(){ return strlen(0); }").exit, 64);
        let out = run(
            "int main(){ char *d=(char *)malloc(6); strcpy(d, \"hi\"); \
             return strlen(d); }",
        );
        assert_eq!(out.exit, 2);
        let out = run(
            "int main(){ char *p=(char *)malloc(3); p[0]='a'; p[1]='b'; p[2]='c'; \
             return strlen(p); }",
        );
        assert_eq!(out.exit, 65, "unterminated string read runs off the block");
    }

    #[test]
    fn print_builtins_collect_stdout() {
        let out = run("int main(){ print_int(42); print_str(\"ok\"); return 0; }");
        assert_eq!(out.stdout, "42\nok\n");
    }

    #[test]
    fn argument_builtins() {
        let out = run_args(
            "int main(){ print_int(argc()); print_int(arg_int(0)); print_int(arg_int(1)); \
             print_int(arg_int(9)); print_str(arg_str(1)); \
             return arg_str(9) == 0; }",
            &["31", "wide"],
        );
        assert_eq!(out.stdout, "2\n31\n0\n0\nwide\n");
        assert_eq!(out.exit, 1);
    }

    #[test]
    fn local_arrays_die_with_their_frame() {
        let out = run(
            "int *leak() { int a[4]; a[0] = 9; return &a[0]; } \
             int main(){ int *p = leak(); return p[0]; }",
        );
        assert_eq!(out.exit, 67);
    }

    #[test]
    fn global_arrays_persist_and_zero() {
        let out = run(
            "int tally[8]; int bump(int i){ tally[i] = tally[i] + 1; return tally[i]; } \
             int main(){ bump(3); bump(3); return tally[3] + tally[0]; }",
        );
        assert_eq!(out.exit, 2);
    }

    #[test]
    fn multidim_indexing() {
        let out = run(
            "int grid[3][4]; int main(){ grid[2][3] = 5; grid[0][1] = 7; \
             return grid[2][3] * 10 + grid[0][1]; }",
        );
        assert_eq!(out.exit, 57);
        let out = run("int grid[3][4]; int main(){ grid[0][-1] = 1; return 0; }");
        assert_eq!(out.exit, 66, "negative flat offset is out of bounds");
        let out = run("int grid[3][4]; int main(){ grid[0][11] = 1; return 0; }");
        assert_eq!(out.exit, 0, "row overflow stays inside the flat object");
        let out = run("int grid[3][4]; int main(){ grid[2][4] = 1; return 0; }");
        assert_eq!(out.exit, 66);
    }

    #[test]
    fn pointer_comparisons_and_arithmetic() {
        let out = run(
            "int main(){ int a[4]; int *p = &a[1]; int *q = p + 2; \
             return (q > p) + (q - 0 == q) * 2; }",
        );
        // q > p lexicographically; q-0 keeps the pointer
        assert_eq!(out.exit, 3);
        let out = run(
            "int main(){ char *s = \"abc\"; char *t = s + 1; \
             return *t == 'b' && t != s && s < t; }",
        );
        assert_eq!(out.exit, 1);
    }

    #[test]
    fn pointer_encoding_survives_memory_round_trips() {
        let out = run(
            "int main(){ int **pp = (int **)malloc(8); int *x = (int *)malloc(8); \
             *x = 77; *pp = x; int *y = *pp; return *y; }",
        );
        assert_eq!(out.exit, 77);
    }

    #[test]
    fn char_values_sign_extend() {
        let out = run("int main(){ char c = 200; return c; }");
        assert_eq!(out.exit, 200u8 as i8 as i64);
        let out = run(
            "int main(){ char *p=(char *)malloc(1); p[0] = 250; return p[0]; }",
        );
        assert_eq!(out.exit, 250u8 as i8 as i64);
    }

    #[test]
    fn fresh_locals_each_iteration() {
        let out = run(
            "int main(){ int s = 0; for (int i = 0; i < 3; i = i + 1) { \
             int x; x = x + 1; s = s + x; } return s; }",
        );
        assert_eq!(out.exit, 3, "locals re-zero on each declaration execution");
    }

    #[test]
    fn loop_iteration_arrays_invalidate_saved_pointers() {
        let out = run(
            "int main(){ int *save = 0; int bad = 0; \
             for (int i = 0; i < 2; i = i + 1) { int a[2]; a[0] = i; \
             if (i == 1) { bad = save[0]; } save = &a[0]; } return bad; }",
        );
        assert_eq!(out.exit, 67, "previous iteration's array storage is dead");
    }

    #[test]
    fn short_circuit_skips_faulting_operand() {
        let out = run("int main(){ int *p = 0; if (0 && *p) { return 1; } return 2; }");
        assert_eq!(out.exit, 2);
        let out = run("int main(){ int *p = 0; if (1 || *p) { return 1; } return 2; }");
        assert_eq!(out.exit, 1);
    }

    #[test]
    fn fault_statement_attribution() {
        let src = "int main(){ int *p = 0; *p = 1; return 0; }";
        let prog = analyze(parse("t.mc", src).unwrap()).unwrap();
        let out = run_plain(&prog, &ProgramInput { id: 1, args: vec![] }).unwrap();
        let (_, stmt) = out.fault.unwrap();
        // the second full statement is the write
        assert_eq!(stmt, prog.full_stmts[1]);
    }

    #[test]
    fn fault_in_loop_condition_attributes_to_the_loop() {
        let src = "int main(){ int *p = 0; while (*p) { return 1; } return 0; }";
        let prog = analyze(parse("t.mc", src).unwrap()).unwrap();
        let out = run_plain(&prog, &ProgramInput { id: 1, args: vec![] }).unwrap();
        let (kind, stmt) = out.fault.unwrap();
        assert_eq!(kind, FaultKind::NullDeref);
        assert_eq!(stmt, prog.full_stmts[1]);
    }

    #[test]
    fn void_functions_and_returns() {
        let out = run(
            "int g; void set(int v){ g = v; if (v > 10) { return; } g = g * 2; } \
             int main(){ set(4); int a = g; set(11); return a * 100 + g; }",
        );
        assert_eq!(out.exit, 811);
    }

    #[test]
    fn global_initializers_apply() {
        let out = run(
            "int base = 40; char c = 'A'; char *s = \"xy\"; \
             int main(){ return base + c % 10 + strlen(s); }",
        );
        assert_eq!(out.exit, 40 + 65 % 10 + 2);
    }

    #[test]
    fn hooks_observe_and_stop() {
        let src = "int main(){ int x = 1; x = 2; x = 3; return x; }";
        let prog = analyze(parse("t.mc", src).unwrap()).unwrap();
        let target = prog.full_stmts[2];
        let hooks: HashSet<NodeId> = [target].into_iter().collect();
        let mut seen = Vec::new();
        let out = run_hooked(
            &prog,
            &ProgramInput { id: 1, args: vec![] },
            Limits::default(),
            &hooks,
            |cx| {
                let x = cx.snapshot().into_iter().find(|v| v.name == "x").unwrap();
                seen.push((cx.step, x.value));
                HookAction::Stop
            },
        )
        .unwrap();
        assert_eq!(seen, vec![(3, 2)], "x is 2 before the third statement runs");
        assert_eq!(out.exit, 0, "stopped runs report a clean exit");
    }
}
