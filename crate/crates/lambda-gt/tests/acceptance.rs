//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use lambda_gt::canon::{embed, normalize};
use lambda_gt::eval::{eval, eval_with, DEFAULT_FUEL};
use lambda_gt::grammar::{derivable, eliminate_fusions, generate_bounded, generate_set, Grammar};
use lambda_gt::graph::{free_names, subst_links, Ann};
use lambda_gt::matcher::match_template;
use lambda_gt::syntax::printer::print_type_atom;
use lambda_gt::syntax::{expand_expr, expand_rules, parse_goal, parse_program, parse_type, print_graph, type_atom};
use lambda_gt::verifier::{descent_stats, same_type, Checker, TypingContext};
use lambda_gt::{congruent, Atom, AtomName, Expr, Graph, TypeAtom, TypeHead};
use rand::rngs::StdRng;
use rand::SeedableRng;

const SEED: u64 = 0x1a3b_da67;

struct Outcome {
    ok: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    Outcome { ok: true, detail: detail.into() }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome { ok: false, detail: detail.into() }
}

fn ty(s: &str) -> TypeAtom {
    type_atom(&parse_type(s).unwrap())
}

struct Program {
    grammar: Grammar,
    main: Option<Expr>,
}

fn program(rel: &str) -> Program {
    let p = parse_program(&read_corpus(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"));
    Program { grammar: expand_rules(&p.rules), main: p.main.as_ref().map(expand_expr) }
}

fn checker_for(g: &Grammar) -> Option<Checker> {
    (!g.rules.is_empty()).then(|| Checker::new(g).unwrap())
}

fn run_value(rel: &str) -> Result<Graph, String> {
    let p = program(rel);
    eval(p.main.as_ref().unwrap(), checker_for(&p.grammar).as_ref(), DEFAULT_FUEL).map_err(|e| e.to_string())
}

fn golden(rel: &str, expected: &str) -> Outcome {
    match run_value(rel) {
        Ok(v) if congruent(&v, &graph(expected)) => pass(format!("value {}", print_graph(&embed(&normalize(&v))))),
        Ok(v) => fail(format!("value {} is not {expected}", print_graph(&v))),
        Err(e) => fail(e),
    }
}

fn c3_function_payload() -> Outcome {
    let g = grammar(
        "nodes(Y, X) -> X >< Y; nodes(Y, X) -> cons((nat(W) -> nat(W)), nodes(Y), X); \
         nat(X) -> zero(X); nat(X) -> succ(nat, X);",
    );
    let c = Checker::new(&g).unwrap();
    let mut gamma = TypingContext::new();
    gamma.insert((n("succ"), 1), Ann::identity(ty("(nat(X) -> nat(X))(Z1)").head, 1));
    match c.check_template(&gamma, &graph("cons($succ, Y, X)"), &ty("nodes(Y, X)")) {
        Ok(v) if v.accepted => pass("cons(succ, Y, X) : nodes(Y, X) accepted"),
        Ok(_) => fail("rejected"),
        Err(e) => fail(e.to_string()),
    }
}

fn verify_goal(c: &Checker, goal: &str) -> Result<bool, String> {
    let g = parse_goal(goal).map_err(|e| e.to_string())?;
    let t = lambda_gt::syntax::expand_term_notation(&g.template);
    c.check_graph(&t, &type_atom(&g.ty)).map(|v| v.accepted).map_err(|e| e.to_string())
}

fn c4_concatenation() -> Outcome {
    let c = Checker::new(&program("grammars/nodes.lgt").grammar).unwrap();
    let goal = "nu Z. ($x[Z, X]:nodes(Z, X), $y[Y, Z]:nodes(Y, Z)) : nodes(Y, X)";
    let swapped = "nu Z. ($x[Z, X]:nodes(Z, X), $y[Y, Z]:nodes(Z, Y)) : nodes(Y, X)";
    match (verify_goal(&c, goal), verify_goal(&c, swapped)) {
        (Ok(true), Ok(false)) => pass("concatenation accepted, mis-oriented variant rejected"),
        (a, b) => fail(format!("concatenation {a:?}, mis-oriented {b:?}")),
    }
}

fn c5_leaf_linked_tree() -> Outcome {
    let c = Checker::new(&program("grammars/lltree.lgt").grammar).unwrap();
    let oriented = "nu Y. (node(L, $t[Y, R]:lltree(Y, R), X), leaf($n:nat, Y, L)) : lltree(L, R, X)";
    let literal = "nu Y. (node(L, $t[Y, R]:lltree(Y, R), X), leaf($n:nat, L, Y)) : lltree(L, R, X)";
    match (verify_goal(&c, oriented), verify_goal(&c, literal)) {
        (Ok(true), Ok(lit)) => pass(format!(
            "leaf($n:nat, Y, L) accepted; as-written leaf($n:nat, L, Y) {} (not derivable, see decisions)",
            if lit { "accepted" } else { "rejected" }
        )),
        (a, b) => fail(format!("leaf($n:nat, Y, L) {a:?}; leaf($n:nat, L, Y) {b:?}")),
    }
}

fn declared(rel: &str) -> TypeAtom {
    let src = read_corpus(rel);
    let line = src.lines().next().unwrap();
    ty(line.strip_prefix("// result:").unwrap_or_else(|| panic!("{rel} lacks a result header")).trim())
}

fn typecheck(rel: &str) -> Result<TypeAtom, String> {
    let p = program(rel);
    let c = Checker::new(&p.grammar).map_err(|e| e.to_string())?;
    c.type_of_expr(&TypingContext::new(), p.main.as_ref().unwrap()).map_err(|e| e.to_string())
}

fn c6_typed_programs() -> Outcome {
    let mut shown = Vec::new();
    for rel in ["typed/pop_fn.lgt", "typed/pop.lgt", "typed/append_fn.lgt", "typed/append.lgt"] {
        let want = declared(rel);
        let t0 = Instant::now();
        let got = typecheck(rel);
        if t0.elapsed() > Duration::from_secs(2) {
            return fail(format!("{rel}: {} ms over the 2000 ms limit", t0.elapsed().as_millis()));
        }
        match got {
            Ok(t) if same_type(&t, &want) => shown.push(format!("{rel}: {}", print_type_atom(&t))),
            Ok(t) => return fail(format!("{rel}: got {}, expected {}", print_type_atom(&t), print_type_atom(&want))),
            Err(e) => return fail(format!("{rel}: {e}")),
        }
    }
    pass(shown.join("; "))
}

const GRAMMARS: [(&str, &str); 6] = [
    ("grammars/nat.lgt", "nat(X)"),
    ("grammars/nodes.lgt", "nodes(Y, X)"),
    ("grammars/dlist2.lgt", "dnodes(F2, B, B2, F)"),
    ("grammars/skip.lgt", "nodes(Y, X)"),
    ("grammars/lltree.lgt", "lltree(L, R, X)"),
    ("grammars/thtree.lgt", "thtree(L, R, X)"),
];

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn c7_oracle_equivalence() -> Outcome {
    let loaded: Vec<(Grammar, Checker)> = GRAMMARS
        .iter()
        .map(|(p, _)| {
            let g = program(p).grammar;
            let c = Checker::new(&g).unwrap();
            (g, c)
        })
        .collect();
    // The depth-4 language is small, so every graph with at most eleven
    // constructors is checked as well.
    let mut positives = 0;
    for (i, (path, start)) in GRAMMARS.iter().enumerate() {
        let s = ty(start);
        let mut set = generate_set(&loaded[i].0, &s, 4);
        for c in generate_bounded(&loaded[i].0, &s, 11).into_vec() {
            set.insert(c);
        }
        for c in set.iter() {
            let g = embed(c);
            match loaded[i].1.check_graph(&g, &s) {
                Ok(v) if v.accepted => positives += 1,
                _ => return fail(format!("{path}: rejected derivable {}", print_graph(&g))),
            }
        }
    }
    // Graphs of every type of one grammar, checked against every type of
    // the same arity in another grammar under every link correspondence,
    // whenever the target grammar cannot derive them.
    let types = |g: &Grammar| -> Vec<TypeAtom> {
        let mut seen = Vec::new();
        for r in &g.rules {
            if !seen.iter().any(|t: &TypeAtom| t.head == r.head_atom().head) {
                seen.push(r.head_atom());
            }
        }
        seen
    };
    let mut negatives = 0;
    for (src, (sg, _)) in loaded.iter().enumerate() {
        for from in types(sg) {
            for g in generate_set(sg, &from, 6).iter().map(embed) {
                for (dst, (dg, dc)) in loaded.iter().enumerate() {
                    if dst == src {
                        continue;
                    }
                    for target in types(dg).into_iter().filter(|t| t.links.len() == from.links.len()) {
                        for perm in permutations(from.links.len()) {
                            let tmp: Vec<_> = from.links.iter().map(|f| (f.clone(), n(&format!("{f}'")))).collect();
                            let back: Vec<_> = from
                                .links
                                .iter()
                                .zip(&perm)
                                .map(|(f, &k)| (n(&format!("{f}'")), target.links[k].clone()))
                                .collect();
                            let moved = subst_links(&subst_links(&g, &tmp).unwrap(), &back).unwrap();
                            if derivable(dg, &target, &normalize(&moved)) {
                                continue;
                            }
                            match dc.check_graph(&moved, &target) {
                                Ok(v) if !v.accepted => negatives += 1,
                                _ => {
                                    return fail(format!(
                                        "{}: accepted non-derivable {} : {}",
                                        GRAMMARS[dst].0,
                                        print_graph(&moved),
                                        print_type_atom(&target)
                                    ))
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    if negatives < 100 {
        return fail(format!("only {negatives} cross-grammar negatives"));
    }
    pass(format!("{positives} derivable graphs accepted, {negatives} cross-grammar negatives rejected"))
}

fn c8_congruence_suite() -> Outcome {
    let mut r = StdRng::seed_from_u64(SEED);
    let mut counts: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
    let fusion = |a: &str, b: &str| Graph::Atom(Atom::new(AtomName::Fusion, vec![n(a), n(b)]));
    for i in 0..10_000 {
        let a = random_graph(&mut r, 8);
        let other = random_graph(&mut r, 8);
        let mut chain = vec![a.clone()];
        for _ in 0..3 {
            let (rule, next) = rewrite_once(chain.last().unwrap(), &mut r);
            if !congruent(chain.last().unwrap(), &next) {
                return fail(format!("graph {i}: {rule} broke congruence on {}", print_graph(chain.last().unwrap())));
            }
            *counts.entry(rule).or_default() += 1;
            chain.push(next);
        }
        let last = chain.last().unwrap();
        let laws = congruent(&a, &a)
            && congruent(&a, last)
            && congruent(last, &a)
            && congruent(&a, &other) == congruent(&other, &a)
            && (!congruent(&a, &other) || (free_names(&a) == free_names(&other) && congruent(last, &other)))
            && free_names(&a) == free_names(last);
        if !laws {
            return fail(format!("graph {i}: equivalence laws fail on {}", print_graph(&a)));
        }
        let symmetric = congruent(&Graph::mol(vec![fusion("X", "Y"), a.clone()]), &Graph::mol(vec![fusion("Y", "X"), a.clone()]));
        let fv = free_names(&a);
        let w = n("W");
        let alpha = ["X", "L", "M"].iter().all(|x| {
            let renamed = subst_links(&a, &[(n(x), w.clone())]).unwrap();
            congruent(&Graph::Nu(n(x), Box::new(a.clone())), &Graph::Nu(w.clone(), Box::new(renamed)))
        });
        let unused = fv.contains(&w) || congruent(&Graph::Nu(w.clone(), Box::new(a.clone())), &a);
        let identity = ["X", "L", "Q"].iter().all(|x| subst_links(&a, &[(n(x), n(x))]).unwrap() == a);
        if !(symmetric && alpha && unused && identity) {
            return fail(format!(
                "graph {i}: symmetry {symmetric}, alpha {alpha}, unused binder {unused}, identity {identity} on {}",
                print_graph(&a)
            ));
        }
    }
    let missing: Vec<&str> =
        ["E1", "E2", "E3", "E6", "E7", "E8", "E9", "E10"].into_iter().filter(|r| !counts.contains_key(r)).collect();
    if !missing.is_empty() {
        return fail(format!("rules never exercised: {missing:?}"));
    }
    let summary: Vec<String> = counts.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    pass(format!("10000 graphs, rule applications {}", summary.join(" ")))
}

fn count_cons(c: &lambda_gt::Canon) -> usize {
    c.atoms.iter().filter(|a| matches!(a.name, AtomName::Con(_))).count()
}

fn c9_fusion_elimination() -> Outcome {
    let mut details = Vec::new();
    for (path, start) in &GRAMMARS[1..] {
        let g = program(path).grammar;
        let s = ty(start);
        let (e, s2) = match eliminate_fusions(&g, &s) {
            Ok(x) => x,
            Err(err) => return fail(format!("{path}: {err}")),
        };
        let by_depth = generate_set(&g, &s, 4);
        let k = by_depth.iter().map(count_cons).max().unwrap_or(0).max(8);
        for bound in 0..=k {
            let a = generate_bounded(&g, &s, bound);
            let b = generate_bounded(&e, &s2, bound);
            if !(a.is_subset(&b) && b.is_subset(&a)) {
                return fail(format!("{path}: languages differ at {bound} constructors ({} vs {})", a.len(), b.len()));
            }
        }
        let bounded = generate_bounded(&e, &s2, k);
        if !by_depth.is_subset(&bounded) {
            return fail(format!("{path}: a depth-4 graph is missing after elimination"));
        }
        details.push(format!("{}:{} graphs up to {k} constructors", path.trim_start_matches("grammars/"), bounded.len()));
    }
    pass(details.join(", "))
}

fn c10_matching() -> Outcome {
    let mut r = StdRng::seed_from_u64(SEED ^ 10);
    let (mut nonempty, mut total) = (0, 0);
    for i in 0..1000 {
        let g = random_value(&mut r, 6);
        let t = random_template(&mut r, &g);
        let got = match_template(&g, &t);
        let want = oracle_matches(&g, &t);
        if !same_subst_sets(&got, &want) {
            return fail(format!(
                "pair {i}: {} against {}: matcher {} vs oracle {}",
                print_graph(&t),
                print_graph(&g),
                got.len(),
                want.len()
            ));
        }
        nonempty += usize::from(!want.is_empty());
        total += want.len();
    }
    pass(format!("1000 pairs, {nonempty} with matches, {total} substitutions"))
}

fn c11_soundness_corpus() -> Outcome {
    let mut files: Vec<String> = std::fs::read_dir(corpus("typed"))
        .unwrap()
        .map(|e| format!("typed/{}", e.unwrap().file_name().to_string_lossy()))
        .collect();
    files.sort();
    if files.len() < 10 {
        return fail(format!("only {} typed programs", files.len()));
    }
    let mut steps = 0;
    for rel in &files {
        let want = declared(rel);
        let p = program(rel);
        let main = p.main.unwrap();
        let c = Checker::new(&p.grammar).unwrap();
        let ctx = TypingContext::new();
        match c.type_of_expr(&ctx, &main) {
            Ok(t) if same_type(&t, &want) => {}
            other => return fail(format!("{rel}: typed as {other:?}")),
        }
        let mut broken = None;
        let v = eval_with(&main, Some(&c), DEFAULT_FUEL, |rule, e| {
            steps += 1;
            if broken.is_none() && c.check_expr(&ctx, e, &want).is_err() {
                broken = Some(format!("after {rule}"));
            }
        });
        let v = match v {
            Ok(v) => v,
            Err(e) => return fail(format!("{rel}: {e}")),
        };
        if let Some(b) = broken {
            return fail(format!("{rel}: type not preserved {b}"));
        }
        let final_ok = match &want.head {
            TypeHead::Var(_) => c.check_graph(&v, &want).is_ok_and(|r| r.accepted),
            TypeHead::Arrow(_) => c.type_of_expr(&ctx, &Expr::Graph(v.clone())).is_ok_and(|t| same_type(&t, &want)),
        };
        if !final_ok {
            return fail(format!("{rel}: final value {} fails {}", print_graph(&v), print_type_atom(&want)));
        }
    }
    pass(format!("{} programs, {steps} steps, every intermediate expression keeps its type", files.len()))
}

fn c12_descent_guard() -> Outcome {
    let (applied, violations) = descent_stats();
    if violations == 0 && applied > 0 {
        pass(format!("{applied} hypothesis applications, 0 refused"))
    } else {
        fail(format!("{applied} applications, {violations} refused by the guard"))
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 12] = [
        ("append evaluates to cons(1, cons(2, Y), X)", Duration::from_secs(1), || golden("append.lgt", "cons(1, cons(2, Y), X)")),
        ("pop evaluates to cons(1, Y, X)", Duration::from_secs(1), || golden("pop.lgt", "cons(1, Y, X)")),
        ("list of functions typed under a context", Duration::from_secs(1), c3_function_payload),
        ("concatenation verified", Duration::from_secs(5), c4_concatenation),
        ("leaf-linked tree verified", Duration::from_secs(5), c5_leaf_linked_tree),
        ("typed pop and append typecheck", Duration::from_secs(8), c6_typed_programs),
        ("checker agrees with generation", Duration::from_secs(60), c7_oracle_equivalence),
        ("congruence properties", Duration::from_secs(60), c8_congruence_suite),
        ("fusion elimination preserves languages", Duration::from_secs(60), c9_fusion_elimination),
        ("matching equals brute force", Duration::from_secs(120), c10_matching),
        ("typed corpus: progress and preservation", Duration::from_secs(30), c11_soundness_corpus),
        ("descent guard never fires", Duration::from_secs(1), c12_descent_guard),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let out = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            fail(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = t0.elapsed();
        let ok = out.ok && took <= *limit;
        failed += usize::from(!ok);
        println!(
            "{} {:>2} {name}: {} ({} ms, limit {} ms)",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            took.as_millis(),
            limit.as_millis()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
