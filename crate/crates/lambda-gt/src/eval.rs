//! Graph substitution and call-by-value small-step reduction.

use std::fmt;

use crate::graph::{graph_functors, subst_links, Atom, AtomName, Case, Expr, Functor, Graph, Lambda};
use crate::matcher::{match_checked, match_template, Subst};
use crate::name::{fresh, Name};
use crate::syntax::printer::{print_expr, print_graph};
use crate::verifier::Checker;

pub const DEFAULT_FUEL: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    Case1,
    Case2,
    Beta,
    /// A reduction below the root of the expression.
    Ctx,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Case1 => "Rd-Case1",
            Rule::Case2 => "Rd-Case2",
            Rule::Beta => "Rd-Beta",
            Rule::Ctx => "Rd-Ctx",
        })
    }
}

#[derive(Clone, Debug)]
pub enum Step {
    Stepped(Expr, Rule),
    Value(Graph),
    Stuck(String),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("stuck: {0}")]
    Stuck(String),
    #[error("fuel exhausted after {0} steps")]
    FuelExhausted(usize),
}

/// e[t / x[formals]].
pub fn graph_substitute(e: &Expr, t: &Graph, x: &Name, formals: &[Name]) -> Expr {
    let ft = graph_functors(t);
    subst_expr(e, t, &(x.clone(), formals.len()), formals, &ft)
}

fn subst_expr(e: &Expr, t: &Graph, x: &Functor, formals: &[Name], ft: &std::collections::BTreeSet<Functor>) -> Expr {
    match e {
        Expr::Graph(g) => Expr::Graph(subst_graph(g, t, x, formals, ft)),
        Expr::App(f, a) => Expr::App(
            Box::new(subst_expr(f, t, x, formals, ft)),
            Box::new(subst_expr(a, t, x, formals, ft)),
        ),
        Expr::Case(c) => {
            let scrutinee = subst_expr(&c.scrutinee, t, x, formals, ft);
            let otherwise = subst_expr(&c.otherwise, t, x, formals, ft);
            let bound = graph_functors(&c.pattern);
            if bound.contains(x) {
                return Expr::Case(Box::new(Case { scrutinee, pattern: c.pattern.clone(), then: c.then.clone(), otherwise }));
            }
            let mut pattern = c.pattern.clone();
            let mut then = c.then.clone();
            for f in bound.intersection(ft) {
                let z = fresh();
                pattern = pattern.map_atoms(&mut |a| match &a.name {
                    AtomName::Ctx(y, ann) if *y == f.0 && a.args.len() == f.1 => {
                        Graph::Atom(Atom::new(AtomName::Ctx(z.clone(), ann.clone()), a.args.clone()))
                    }
                    _ => Graph::Atom(a.clone()),
                });
                then = rename_ctx(&then, f, &z);
            }
            let then = subst_expr(&then, t, x, formals, ft);
            Expr::Case(Box::new(Case { scrutinee, pattern, then, otherwise }))
        }
    }
}

fn rename_ctx(e: &Expr, f: &Functor, z: &Name) -> Expr {
    let formals: Vec<Name> = (0..f.1).map(|_| fresh()).collect();
    let t = Graph::Atom(Atom::new(AtomName::Ctx(z.clone(), None), formals.clone()));
    graph_substitute(e, &t, &f.0, &formals)
}

fn subst_graph(g: &Graph, t: &Graph, x: &Functor, formals: &[Name], ft: &std::collections::BTreeSet<Functor>) -> Graph {
    g.map_atoms(&mut |a| match &a.name {
        AtomName::Ctx(y, _) if *y == x.0 && a.args.len() == x.1 => {
            let pairs: Vec<(Name, Name)> = formals.iter().cloned().zip(a.args.iter().cloned()).collect();
            subst_links(t, &pairs).expect("formal links are distinct")
        }
        AtomName::Lam(l) => {
            let own = (l.param.clone(), l.links.len());
            if own == *x {
                return Graph::Atom(a.clone());
            }
            let (param, body) = if ft.contains(&own) {
                let z = fresh();
                (z.clone(), rename_ctx(&l.body, &own, &z))
            } else {
                (l.param.clone(), l.body.clone())
            };
            let body = subst_expr(&body, t, x, formals, ft);
            let lam = Lambda { param, links: l.links.clone(), ann: l.ann.clone(), body };
            Graph::Atom(Atom::new(AtomName::Lam(lam.into()), a.args.clone()))
        }
        _ => Graph::Atom(a.clone()),
    })
}

fn value(e: &Expr) -> Option<&Graph> {
    match e {
        Expr::Graph(g) if g.is_value() => Some(g),
        _ => None,
    }
}

fn apply_subst(e: &Expr, theta: &Subst) -> Expr {
    theta
        .bindings
        .iter()
        .fold(e.clone(), |acc, ((x, _), b)| graph_substitute(&acc, &b.graph, x, &b.formals))
}

fn fully_annotated(pattern: &Graph) -> bool {
    let mut ok = true;
    pattern.for_each_atom(&mut |a| {
        if let AtomName::Ctx(_, ann) = &a.name {
            ok &= ann.is_some();
        }
    });
    ok
}

/// One reduction step. Patterns whose contexts are all annotated are matched
/// with type checking when a checker is supplied.
pub fn step(e: &Expr, checker: Option<&Checker>) -> Step {
    match e {
        Expr::Graph(g) => {
            if g.is_value() {
                Step::Value(g.clone())
            } else {
                Step::Stuck(format!("free graph context in {}", print_graph(g)))
            }
        }
        Expr::App(f, a) => {
            let Some(fg) = value(f) else {
                return inner(step(f, checker), |f2| Expr::App(Box::new(f2), a.clone()));
            };
            let Some(ag) = value(a) else {
                return inner(step(a, checker), |a2| Expr::App(f.clone(), Box::new(a2)));
            };
            let mut atoms = Vec::new();
            fg.for_each_atom(&mut |x| atoms.push(x));
            let lam = match atoms.as_slice() {
                [Atom { name: AtomName::Lam(l), .. }] => l,
                _ => return Step::Stuck(format!("applying a non-abstraction {}", print_graph(fg))),
            };
            let expected: std::collections::BTreeSet<Name> = lam.links.iter().cloned().collect();
            if crate::graph::free_names(ag) != expected || expected.len() != lam.links.len() {
                return Step::Stuck(format!(
                    "argument {} does not have the free links of ${}[{}]",
                    print_graph(ag),
                    lam.param,
                    lam.links.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(", ")
                ));
            }
            Step::Stepped(graph_substitute(&lam.body, ag, &lam.param, &lam.links), Rule::Beta)
        }
        Expr::Case(c) => {
            let Some(g) = value(&c.scrutinee) else {
                return inner(step(&c.scrutinee, checker), |s| {
                    Expr::Case(Box::new(Case { scrutinee: s, ..(**c).clone() }))
                });
            };
            let theta = match checker {
                Some(ch) if fully_annotated(&c.pattern) => match_checked(g, &c.pattern, ch),
                _ => match_template(g, &c.pattern).into_iter().next(),
            };
            match theta {
                Some(theta) => Step::Stepped(apply_subst(&c.then, &theta), Rule::Case1),
                None => Step::Stepped(c.otherwise.clone(), Rule::Case2),
            }
        }
    }
}

fn inner(s: Step, wrap: impl FnOnce(Expr) -> Expr) -> Step {
    match s {
        Step::Stepped(e, _) => Step::Stepped(wrap(e), Rule::Ctx),
        Step::Value(g) => Step::Stuck(format!("unexpected value {}", print_graph(&g))),
        stuck => stuck,
    }
}

/// Reduces to a value within `fuel` steps, reporting each step.
pub fn eval_with(
    e: &Expr,
    checker: Option<&Checker>,
    fuel: usize,
    mut on_step: impl FnMut(Rule, &Expr),
) -> Result<Graph, EvalError> {
    let mut cur = e.clone();
    for _ in 0..=fuel {
        match step(&cur, checker) {
            Step::Value(g) => return Ok(g),
            Step::Stuck(why) => return Err(EvalError::Stuck(why)),
            Step::Stepped(next, rule) => {
                on_step(rule, &next);
                cur = next;
            }
        }
    }
    Err(EvalError::FuelExhausted(fuel))
}

pub fn eval(e: &Expr, checker: Option<&Checker>, fuel: usize) -> Result<Graph, EvalError> {
    eval_with(e, checker, fuel, |_, _| {})
}

/// `<rule> ⊢ <expr>`.
pub fn trace_line(rule: Rule, e: &Expr) -> String {
    format!("{rule} ⊢ {}", print_expr(e))
}
