//! Random bug-template text for matcher equivalence testing.
//!
//! Generated templates stay inside the fragment of the template language
//! the matcher cares about: dynamic patches with 0–2 free variables over
//! the scalar types the program generator emits, preconditions mixing
//! value/size comparisons with and/or/not, and occasionally a static
//! top-level patch or an inter-patch dependency.

use crate::rng::Rng;

const FV_POOL: [(&str, &str); 5] =
    [("fa", "int"), ("fb", "int"), ("fp", "*int"), ("fq", "*char"), ("fc", "char")];

pub fn gen_template(rng: &mut Rng, name: &str) -> String {
    let mut out = format!("(template {name}\n");
    let mut patch_names = Vec::new();
    if rng.chance(1, 4) {
        let pname = format!("{name}-p{}", patch_names.len() + 1);
        out.push_str(&static_patch(rng, &pname, patch_names.len()));
        patch_names.push(pname);
    }
    let ndyn = 1 + rng.below(2);
    for _ in 0..ndyn {
        let pname = format!("{name}-p{}", patch_names.len() + 1);
        out.push_str(&dynamic_patch(rng, &pname, &patch_names));
        patch_names.push(pname);
    }
    out.push_str(")\n");
    out
}

fn static_patch(rng: &mut Rng, pname: &str, idx: usize) -> String {
    let global = format!("static int zz_g{idx}[6];");
    let pre = if rng.chance(1, 2) {
        format!("(and (top-level) (declarable zz_g{idx}))")
    } else {
        "(top-level)".to_string()
    };
    format!(
        "  (patch {pname}\n    (kind static)\n    (top-level)\n    \
         (precondition {pre})\n    (code \"{global}\"))\n"
    )
}

fn dynamic_patch(rng: &mut Rng, pname: &str, earlier: &[String]) -> String {
    let nfv = rng.below(3) as usize;
    let mut pool: Vec<(&str, &str)> = FV_POOL.to_vec();
    let mut fvs = Vec::new();
    for _ in 0..nfv {
        let i = rng.below(pool.len() as u64) as usize;
        let (fv_name, fv_ty) = pool.remove(i);
        let not_const = rng.chance(1, 4);
        fvs.push((fv_name, fv_ty, not_const));
    }
    let mut s = format!("  (patch {pname}\n    (kind dynamic)\n");
    let cwe = *rng.pick(&[476, 121, 122]);
    s.push_str(&format!("    (cwe {cwe})\n    (cwe-line 1)\n"));
    if !earlier.is_empty() && rng.chance(1, 2) {
        s.push_str(&format!("    (requires {})\n", rng.pick(earlier)));
    }
    if !fvs.is_empty() {
        s.push_str("    (free-vars");
        for (n, t, nc) in &fvs {
            if *nc {
                s.push_str(&format!(" ({n} {t} not-const)"));
            } else {
                s.push_str(&format!(" ({n} {t})"));
            }
        }
        s.push_str(")\n");
    }
    s.push_str(&format!("    (precondition {})\n", pred(rng, &fvs, 2)));
    s.push_str(&format!("    (code \"{}\")\n", code(&fvs)));
    s.push_str("  )\n");
    s
}

fn pred(rng: &mut Rng, fvs: &[(&str, &str, bool)], depth: usize) -> String {
    if depth > 0 && rng.chance(1, 3) {
        return match rng.below(3) {
            0 => format!("(and {} {})", pred(rng, fvs, depth - 1), pred(rng, fvs, depth - 1)),
            1 => format!("(or {} {})", pred(rng, fvs, depth - 1), pred(rng, fvs, depth - 1)),
            _ => format!("(not {})", pred(rng, fvs, depth - 1)),
        };
    }
    atom(rng, fvs)
}

fn atom(rng: &mut Rng, fvs: &[(&str, &str, bool)]) -> String {
    if fvs.is_empty() {
        return if rng.chance(1, 4) { "(declarable zq9)".to_string() } else { "true".to_string() };
    }
    let (name, ty, _) = rng.pick(fvs);
    let ptr = ty.starts_with('*');
    match rng.below(6) {
        0 if ptr => format!("(has-size {name})"),
        1 if ptr => format!("(<= (size {name}) {})", rng.range(0, 24)),
        2 if ptr => format!("(= (value {name}) 0)"),
        3 => format!("(> (value {name}) {})", rng.range(-2, 8)),
        4 => format!("(< (value {name}) {})", rng.range(0, 20)),
        _ => format!("(!= (value {name}) 0)"),
    }
}

/// Snippet text touching every free variable type-safely, no derefs.
fn code(fvs: &[(&str, &str, bool)]) -> String {
    if fvs.is_empty() {
        return "print_int(7);".to_string();
    }
    let mut parts = Vec::new();
    for (name, ty, _) in fvs {
        if ty.starts_with('*') {
            parts.push(format!("if ({name} == 0) {{ print_int(9); }}"));
        } else {
            parts.push(format!("print_int({name} + 0);"));
        }
    }
    parts.join(" ")
}
