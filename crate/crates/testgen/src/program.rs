//! Random well-typed program generation.
//!
//! The generator builds programs from a typed symbol table, so every output
//! parses and analyzes cleanly. It never emits a dereference, a variable
//! array index, or an unbounded loop: generated programs cannot fault and
//! always terminate. Pointer variables still flip between null, array
//! interiors, and heap blocks, and `arg_int`/`argc` feed witness arguments
//! into the control flow, so traces vary per input.

use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct GenConfig {
    /// Statement budget per function body.
    pub max_fn_stmts: usize,
    /// Maximum statement nesting depth.
    pub max_depth: usize,
}

impl GenConfig {
    pub fn small() -> GenConfig {
        GenConfig { max_fn_stmts: 8, max_depth: 2 }
    }
}

impl Default for GenConfig {
    fn default() -> GenConfig {
        GenConfig::small()
    }
}

pub fn gen_program(rng: &mut Rng, cfg: &GenConfig) -> String {
    Gen::new(rng, cfg).unit()
}

/// Random witness arguments: numbers and short words.
pub fn gen_args(rng: &mut Rng) -> Vec<String> {
    let n = rng.below(4);
    (0..n)
        .map(|_| {
            if rng.chance(1, 2) {
                rng.range(-9, 99).to_string()
            } else {
                rng.pick(&["x", "key", "zz", "w7", "blob"]).to_string()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Int,
    Char,
    PtrInt,
    PtrChar,
}

impl Ty {
    fn decl(self, name: &str) -> String {
        match self {
            Ty::Int => format!("int {name}"),
            Ty::Char => format!("char {name}"),
            Ty::PtrInt => format!("int *{name}"),
            Ty::PtrChar => format!("char *{name}"),
        }
    }

    fn is_ptr(self) -> bool {
        matches!(self, Ty::PtrInt | Ty::PtrChar)
    }
}

#[derive(Debug, Clone)]
struct Var {
    name: String,
    ty: Ty,
    is_const: bool,
}

#[derive(Debug, Clone)]
struct Arr {
    name: String,
    elem: Ty,
    len: i64,
}

struct Gen<'r> {
    rng: &'r mut Rng,
    cfg: GenConfig,
    out: String,
    indent: usize,
    scopes: Vec<(Vec<Var>, Vec<Arr>)>,
    funcs: Vec<(String, Vec<Ty>)>,
    next_name: usize,
}

impl<'r> Gen<'r> {
    fn new(rng: &'r mut Rng, cfg: &GenConfig) -> Gen<'r> {
        Gen {
            rng,
            cfg: cfg.clone(),
            out: String::new(),
            indent: 0,
            scopes: vec![(Vec::new(), Vec::new())],
            funcs: Vec::new(),
            next_name: 0,
        }
    }

    fn fresh(&mut self, prefix: &str) -> String {
        self.next_name += 1;
        format!("{prefix}{}", self.next_name)
    }

    fn line(&mut self, s: &str) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn vars_of(&self, ty: Ty) -> Vec<Var> {
        self.scopes.iter().flat_map(|(vs, _)| vs.iter()).filter(|v| v.ty == ty).cloned().collect()
    }

    fn mutable_vars(&self) -> Vec<Var> {
        self.scopes
            .iter()
            .flat_map(|(vs, _)| vs.iter())
            .filter(|v| !v.is_const)
            .cloned()
            .collect()
    }

    fn arrays(&self) -> Vec<Arr> {
        self.scopes.iter().flat_map(|(_, ars)| ars.iter()).cloned().collect()
    }

    fn bind(&mut self, v: Var) {
        self.scopes.last_mut().unwrap().0.push(v);
    }

    fn unit(mut self) -> String {
        let nglobals = self.rng.below(4);
        for _ in 0..nglobals {
            self.global();
        }
        let nfuncs = self.rng.below(3);
        for _ in 0..nfuncs {
            self.func();
        }
        self.main();
        self.out
    }

    fn global(&mut self) {
        let name = self.fresh("g");
        match self.rng.below(6) {
            0 => {
                let v = self.rng.range(-5, 40);
                self.line(&format!("int {name} = {v};"));
                self.bind(Var { name, ty: Ty::Int, is_const: false });
            }
            1 => {
                let c = (b'a' + self.rng.below(26) as u8) as char;
                self.line(&format!("char {name} = '{c}';"));
                self.bind(Var { name, ty: Ty::Char, is_const: false });
            }
            2 => {
                let w = self.word();
                self.line(&format!("char *{name} = \"{w}\";"));
                self.bind(Var { name, ty: Ty::PtrChar, is_const: false });
            }
            3 => {
                let len = self.rng.range(2, 10);
                self.line(&format!("int {name}[{len}];"));
                self.scopes[0].1.push(Arr { name, elem: Ty::Int, len });
            }
            4 => {
                let len = self.rng.range(2, 12);
                self.line(&format!("char {name}[{len}];"));
                self.scopes[0].1.push(Arr { name, elem: Ty::Char, len });
            }
            _ => {
                self.line(&format!("int *{name} = 0;"));
                self.bind(Var { name, ty: Ty::PtrInt, is_const: false });
            }
        }
    }

    fn word(&mut self) -> &'static str {
        self.rng.pick(&["", "a", "ab", "tok", "grid", "x1"])
    }

    fn func(&mut self) {
        let name = self.fresh("f");
        let nparams = self.rng.below(3);
        let mut params = Vec::new();
        let mut sig = Vec::new();
        for _ in 0..nparams {
            let ty = *self.rng.pick(&[Ty::Int, Ty::Int, Ty::Char, Ty::PtrInt, Ty::PtrChar]);
            let pname = self.fresh("p");
            params.push((pname, ty));
            sig.push(ty);
        }
        let header = params.iter().map(|(n, t)| t.decl(n)).collect::<Vec<_>>().join(", ");
        self.line(&format!("int {name}({header}) {{"));
        self.indent += 1;
        self.scopes.push((
            params.into_iter().map(|(name, ty)| Var { name, ty, is_const: false }).collect(),
            Vec::new(),
        ));
        self.body();
        let ret = self.int_expr(1);
        self.line(&format!("return {ret};"));
        self.scopes.pop();
        self.indent -= 1;
        self.line("}");
        // callable from everything generated afterwards
        self.funcs.push((name, sig));
    }

    fn main(&mut self) {
        self.line("int main() {");
        self.indent += 1;
        self.scopes.push((Vec::new(), Vec::new()));
        self.body();
        self.line("return 0;");
        self.scopes.pop();
        self.indent -= 1;
        self.line("}");
    }

    fn body(&mut self) {
        let n = 2 + self.rng.below(self.cfg.max_fn_stmts as u64 - 1);
        for _ in 0..n {
            self.stmt(self.cfg.max_depth);
        }
    }

    fn stmt(&mut self, depth: usize) {
        let max = if depth > 0 { 10 } else { 8 };
        match self.rng.below(max) {
            0 => self.decl_scalar(),
            1 => self.decl_ptr(),
            2 => self.decl_arr(),
            3 => self.assign(),
            4 => {
                let e = self.int_expr(1);
                self.line(&format!("print_int({e});"));
            }
            5 => self.call_stmt(),
            6 => self.null_flip(),
            7 => self.assign(),
            8 => self.if_stmt(depth - 1),
            _ => self.for_stmt(depth - 1),
        }
    }

    fn decl_scalar(&mut self) {
        let name = self.fresh("v");
        if self.rng.chance(1, 3) {
            let e = self.int_expr(1);
            let konst = if self.rng.chance(1, 3) { "const " } else { "" };
            self.line(&format!("{konst}char {name} = {e};"));
            self.bind(Var { name, ty: Ty::Char, is_const: !konst.is_empty() });
        } else {
            let e = self.int_expr(2);
            let konst = if self.rng.chance(1, 4) { "const " } else { "" };
            self.line(&format!("{konst}int {name} = {e};"));
            self.bind(Var { name, ty: Ty::Int, is_const: !konst.is_empty() });
        }
    }

    fn decl_ptr(&mut self) {
        let name = self.fresh("v");
        let ty = if self.rng.chance(1, 2) { Ty::PtrInt } else { Ty::PtrChar };
        let init = self.ptr_expr(ty);
        self.line(&format!("{} = {init};", ty.decl(&name)));
        self.bind(Var { name, ty, is_const: false });
    }

    fn decl_arr(&mut self) {
        let name = self.fresh("v");
        let elem = if self.rng.chance(1, 2) { Ty::Int } else { Ty::Char };
        let len = self.rng.range(2, 8);
        self.line(&format!("{}[{len}];", elem.decl(&name)));
        self.scopes.last_mut().unwrap().1.push(Arr { name, elem, len });
    }

    fn assign(&mut self) {
        let vars = self.mutable_vars();
        if vars.is_empty() {
            self.decl_scalar();
            return;
        }
        let v = self.rng.pick(&vars).clone();
        let e = match v.ty {
            Ty::Int | Ty::Char => self.int_expr(2),
            ty => self.ptr_expr(ty),
        };
        self.line(&format!("{} = {e};", v.name));
    }

    fn call_stmt(&mut self) {
        if self.funcs.is_empty() {
            let e = self.int_expr(1);
            self.line(&format!("print_int({e});"));
            return;
        }
        let (name, sig) = self.rng.pick(&self.funcs.clone()).clone();
        let args: Vec<String> = sig
            .iter()
            .map(|t| match t {
                Ty::Int | Ty::Char => self.int_expr(1),
                ty => self.ptr_expr(*ty),
            })
            .collect();
        self.line(&format!("{name}({});", args.join(", ")));
    }

    fn null_flip(&mut self) {
        let ptrs: Vec<Var> =
            self.mutable_vars().into_iter().filter(|v| v.ty.is_ptr()).collect();
        if ptrs.is_empty() {
            self.decl_ptr();
            return;
        }
        let v = self.rng.pick(&ptrs).clone();
        if self.rng.chance(1, 2) {
            self.line(&format!("{} = 0;", v.name));
        } else {
            let e = self.ptr_expr(v.ty);
            self.line(&format!("{} = {e};", v.name));
        }
    }

    fn if_stmt(&mut self, depth: usize) {
        let c = self.cond();
        self.line(&format!("if ({c}) {{"));
        self.nested(depth);
        if self.rng.chance(1, 3) {
            self.line("} else {");
            self.nested(depth);
        }
        self.line("}");
    }

    fn for_stmt(&mut self, depth: usize) {
        let i = self.fresh("i");
        let n = self.rng.range(2, 5);
        self.line(&format!("for (int {i} = 0; {i} < {n}; {i} = {i} + 1) {{"));
        self.indent += 1;
        self.scopes.push((
            vec![Var { name: i, ty: Ty::Int, is_const: false }],
            Vec::new(),
        ));
        let k = 1 + self.rng.below(3);
        for _ in 0..k {
            self.stmt(depth);
        }
        self.scopes.pop();
        self.indent -= 1;
        self.line("}");
    }

    fn nested(&mut self, depth: usize) {
        self.indent += 1;
        self.scopes.push((Vec::new(), Vec::new()));
        let k = 1 + self.rng.below(2);
        for _ in 0..k {
            self.stmt(depth);
        }
        self.scopes.pop();
        self.indent -= 1;
    }

    fn cond(&mut self) -> String {
        let ptrs: Vec<Var> = self
            .scopes
            .iter()
            .flat_map(|(vs, _)| vs.iter())
            .filter(|v| v.ty.is_ptr())
            .cloned()
            .collect();
        if !ptrs.is_empty() && self.rng.chance(1, 3) {
            let v = self.rng.pick(&ptrs);
            let op = if self.rng.chance(1, 2) { "==" } else { "!=" };
            return format!("{} {op} 0", v.name);
        }
        let a = self.int_expr(1);
        let b = self.int_expr(1);
        let op = *self.rng.pick(&["<", "<=", ">", ">=", "==", "!="]);
        format!("{a} {op} {b}")
    }

    fn int_expr(&mut self, depth: usize) -> String {
        let ints = self.vars_of(Ty::Int);
        let chars = self.vars_of(Ty::Char);
        let arrays = self.arrays();
        loop {
            match self.rng.below(9) {
                0 | 1 => return self.rng.range(-3, 25).to_string(),
                2 | 3 if !ints.is_empty() => return self.rng.pick(&ints).name.clone(),
                4 if !chars.is_empty() => return self.rng.pick(&chars).name.clone(),
                5 if depth > 0 => {
                    let a = self.int_expr(depth - 1);
                    let b = self.int_expr(depth - 1);
                    let op = *self.rng.pick(&["+", "-", "*"]);
                    return format!("{a} {op} {b}");
                }
                6 if !arrays.is_empty() => {
                    let a = self.rng.pick(&arrays).clone();
                    let idx = self.rng.below(a.len as u64);
                    return format!("{}[{idx}]", a.name);
                }
                7 => {
                    let w = self.word();
                    return format!("strlen(\"{w}\")");
                }
                8 => {
                    return if self.rng.chance(1, 2) {
                        "argc()".to_string()
                    } else {
                        format!("arg_int({})", self.rng.below(3))
                    };
                }
                _ => continue,
            }
        }
    }

    fn ptr_expr(&mut self, ty: Ty) -> String {
        let same = self.vars_of(ty);
        let elem = if ty == Ty::PtrInt { Ty::Int } else { Ty::Char };
        let arrays: Vec<Arr> = self.arrays().into_iter().filter(|a| a.elem == elem).collect();
        loop {
            match self.rng.below(7) {
                0 | 1 => return "0".to_string(),
                2 | 3 if !same.is_empty() => return self.rng.pick(&same).name.clone(),
                4 | 5 if !arrays.is_empty() => {
                    let a = self.rng.pick(&arrays).clone();
                    let idx = self.rng.below(a.len as u64);
                    return format!("&{}[{idx}]", a.name);
                }
                6 => {
                    let n = self.rng.range(1, 48);
                    let cast = if ty == Ty::PtrInt { "(int *)" } else { "(char *)" };
                    return format!("{cast}malloc({n})");
                }
                _ => continue,
            }
        }
    }
}
