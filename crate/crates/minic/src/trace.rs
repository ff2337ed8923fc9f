//! Statement-level execution tracing.
//!
//! Instrumentation hooks every full statement of the program. A traced run
//! emits one `TracePoint` immediately before each hooked statement executes,
//! carrying the values of all scalar variables in scope there. Emission is
//! capped by `max_trace`; execution continues past the cap, so the reported
//! outcome is identical to an untraced run.

use crate::analyze::AnalyzedProgram;
use crate::ast::NodeId;
use crate::interp::{
    run_with_observer, HookAction, Interp, Limits, Observer, ProgramInput, RunError, RunOutcome,
};
use crate::types::Type;

/// One in-scope scalar variable observed before a statement ran.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarSnapshot {
    pub name: String,
    pub ty: Type,
    pub is_const: bool,
    /// Current value; pointers appear in their 64-bit encoding.
    pub value: i64,
    /// Bytes from the pointee to the end of its live allocation. `None` for
    /// non-pointers, null, dangling, and out-of-range pointers.
    pub size: Option<u64>,
}

impl VarSnapshot {
    pub fn is_pointer(&self) -> bool {
        self.ty.is_pointer()
    }

    /// True for a pointer whose value is null. Implies `size` is `None`.
    pub fn is_null(&self) -> bool {
        self.is_pointer() && self.value == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TracePoint {
    pub witness: u32,
    pub step: u32,
    pub stmt: NodeId,
    pub vars: Vec<VarSnapshot>,
}

/// A program plus the statements its traced runs observe.
#[derive(Debug, Clone)]
pub struct InstrumentedProgram<'p> {
    pub prog: &'p AnalyzedProgram,
    pub hooks: Vec<NodeId>,
}

/// Hook every full statement, in source order.
pub fn instrument(prog: &AnalyzedProgram) -> InstrumentedProgram<'_> {
    InstrumentedProgram { prog, hooks: prog.full_stmts.clone() }
}

struct Tracer<'a> {
    witness: u32,
    max_trace: u32,
    out: &'a mut Vec<TracePoint>,
}

impl Observer for Tracer<'_> {
    fn on_stmt(&mut self, interp: &Interp, stmt: NodeId, step: u64) -> HookAction {
        if (self.out.len() as u32) < self.max_trace {
            self.out.push(TracePoint {
                witness: self.witness,
                step: step.min(u32::MAX as u64) as u32,
                stmt,
                vars: interp.snapshot_at(stmt),
            });
        }
        HookAction::Continue
    }
}

/// Run under instrumentation, collecting at most `max_trace` points.
pub fn run_traced(
    inst: &InstrumentedProgram,
    input: &ProgramInput,
    max_trace: u32,
) -> Result<(RunOutcome, Vec<TracePoint>), RunError> {
    run_traced_limited(inst, input, max_trace, Limits::default())
}

pub fn run_traced_limited(
    inst: &InstrumentedProgram,
    input: &ProgramInput,
    max_trace: u32,
    limits: Limits,
) -> Result<(RunOutcome, Vec<TracePoint>), RunError> {
    let mut points = Vec::new();
    let mut tracer = Tracer { witness: input.id, max_trace, out: &mut points };
    let outcome = run_with_observer(inst.prog, input, limits, &mut tracer)?;
    Ok((outcome, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyze::analyze;
    use crate::interp::run_plain;
    use crate::parser::parse;

    fn program(src: &str) -> AnalyzedProgram {
        analyze(parse("t.mc", src).unwrap()).unwrap()
    }

    fn input() -> ProgramInput {
        ProgramInput { id: 7, args: vec![] }
    }

    #[test]
    fn hooks_are_the_full_statements() {
        let prog = program("int main(){ int x = 1; x = 2; return x; }");
        let inst = instrument(&prog);
        assert_eq!(inst.hooks.len(), 3);
        assert_eq!(inst.hooks, prog.full_stmts);
    }

    #[test]
    fn points_snapshot_state_before_each_statement() {
        let prog = program("int main(){ int x = 1; x = 2; return x; }");
        let inst = instrument(&prog);
        let (out, points) = run_traced(&inst, &input(), 1000).unwrap();
        assert_eq!(out.exit, 2);
        assert_eq!(points.len(), 3);
        assert!(points.iter().all(|p| p.witness == 7));
        // before the declaration x is not yet in scope
        assert!(points[0].vars.is_empty());
        let at = |i: usize| points[i].vars.iter().find(|v| v.name == "x").unwrap().value;
        assert_eq!(at(1), 1, "x still holds 1 before the assignment runs");
        assert_eq!(at(2), 2);
        assert!(points.windows(2).all(|w| w[0].step < w[1].step));
    }

    #[test]
    fn cap_limits_emission_not_execution() {
        let prog = program("int main(){ int x = 1; x = 2; return x; }");
        let inst = instrument(&prog);
        let (full, _) = run_traced(&inst, &input(), 1000).unwrap();
        let (capped, points) = run_traced(&inst, &input(), 2).unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!(capped, full, "outcome is unchanged by the cap");
        let (zero, points) = run_traced(&inst, &input(), 0).unwrap();
        assert_eq!(points.len(), 0);
        assert_eq!(zero, full);
    }

    #[test]
    fn traced_outcome_matches_plain_run() {
        let srcs = [
            "int main(){ int *p = 0; *p = 1; return 0; }",
            "int main(){ int s = 0; for (int i = 0; i < 10; i = i + 1) { s = s + i; } return s; }",
            "int f(int n){ if (n < 2) { return 1; } return n * f(n - 1); } \
             int main(){ return f(6); }",
        ];
        for src in srcs {
            let prog = program(src);
            let plain = run_plain(&prog, &input()).unwrap();
            let (traced, _) = run_traced(&instrument(&prog), &input(), 50).unwrap();
            assert_eq!(plain, traced, "{src}");
        }
    }

    #[test]
    fn snapshots_cover_exactly_the_scalars_in_scope() {
        let src = "int g; char tag = 'q'; \
                   int main(){ int buf[4]; int *p = &buf[0]; const char c = 'z'; \
                   p[0] = 5; return 0; }";
        let prog = program(src);
        let (_, points) = run_traced(&instrument(&prog), &input(), 100).unwrap();
        let last = points.last().unwrap();
        let names: Vec<&str> = last.vars.iter().map(|v| v.name.as_str()).collect();
        // buf is an array, not a scalar; everything else shows up
        assert_eq!(names, ["g", "tag", "p", "c"]);
        let p = last.vars.iter().find(|v| v.name == "p").unwrap();
        assert!(p.is_pointer() && !p.is_null());
        assert_eq!(p.size, Some(32), "whole array remains past &buf[0]");
        let c = last.vars.iter().find(|v| v.name == "c").unwrap();
        assert!(c.is_const);
        assert_eq!(c.value, 'z' as i64);
        assert_eq!(c.size, None);
    }

    #[test]
    fn null_pointer_snapshots_have_no_size() {
        let prog = program("int main(){ int *p = 0; p = p; return 0; }");
        let (_, points) = run_traced(&instrument(&prog), &input(), 10).unwrap();
        let p = points[1].vars.iter().find(|v| v.name == "p").unwrap();
        assert!(p.is_null());
        assert_eq!(p.value, 0);
        assert_eq!(p.size, None);
    }

    #[test]
    fn dangling_pointer_snapshots_lose_their_size() {
        let src = "int main(){ char *p = (char *)malloc(4); free(p); p = p; return 0; }";
        let prog = program(src);
        let (_, points) = run_traced(&instrument(&prog), &input(), 10).unwrap();
        let find = |i: usize| points[i].vars.iter().find(|v| v.name == "p").unwrap().clone();
        let before = find(1);
        assert_eq!(before.size, Some(4));
        let after = find(2);
        assert!(!after.is_null(), "value survives the free");
        assert_eq!(after.size, None, "size does not");
    }

    #[test]
    fn one_past_end_has_zero_remaining() {
        let src = "int main(){ char buf[3]; char *p = &buf[0]; p = p + 3; p = p - 4; return 0; }";
        let prog = program(src);
        let (_, points) = run_traced(&instrument(&prog), &input(), 10).unwrap();
        let at = |i: usize| points[i].vars.iter().find(|v| v.name == "p").unwrap().clone();
        assert_eq!(at(2).size, Some(3), "start of the array");
        assert_eq!(at(3).size, Some(0), "one past the end still counts");
        assert_eq!(at(4).size, None, "offset -1 does not");
    }
}
