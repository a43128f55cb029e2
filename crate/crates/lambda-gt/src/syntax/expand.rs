//! Lowering of surface trees to core terms.

use std::sync::Arc;

use super::ast::*;
use crate::grammar::{Grammar, Rule};
use crate::graph::{Ann, Atom, AtomName, Case, Expr, Graph, Lambda, TypeAtom, TypeHead};
use crate::name::{fresh, Name};

pub fn type_atom(t: &SType) -> TypeAtom {
    TypeAtom { head: type_head(&t.head), links: t.links.clone() }
}

fn type_head(h: &STypeHead) -> TypeHead {
    match h {
        STypeHead::Var(n) => TypeHead::Var(n.clone()),
        STypeHead::Arrow(d, c) => TypeHead::arrow(type_atom(d), type_atom(c)),
    }
}

/// Replaces every nested argument by a fresh bound link joining the
/// parent's position to the child's last argument.
pub fn expand_term_notation(g: &SGraph) -> Graph {
    match g {
        SGraph::Null => Graph::Null,
        SGraph::Fusion(x, y) => Graph::Atom(Atom::new(AtomName::Fusion, vec![x.clone(), y.clone()])),
        SGraph::Atom(a) => expand_atom(a, None),
        SGraph::Mol(gs) => Graph::mol(gs.iter().map(expand_term_notation).collect()),
        SGraph::Nu(xs, body) => Graph::nu(xs.clone(), expand_term_notation(body)),
    }
}

fn expand_atom(a: &SAtom, connect: Option<Name>) -> Graph {
    let mut args = Vec::new();
    let mut bound = Vec::new();
    let mut children = Vec::new();
    for arg in &a.args {
        match arg {
            SArg::Link(l) => args.push(l.clone()),
            SArg::Nested(child) => {
                let w = fresh();
                args.push(w.clone());
                children.push(expand_atom(child, Some(w.clone())));
                bound.push(w);
            }
        }
    }
    if let Some(c) = &connect {
        args.push(c.clone());
    }
    let name = match &a.head {
        SHead::Con(c) => AtomName::Con(c.clone()),
        SHead::Ty(t) => AtomName::Ty(TypeHead::Var(t.clone())),
        SHead::Arrow(d, c) => AtomName::Ty(TypeHead::arrow(type_atom(d), type_atom(c))),
        SHead::Ctx(x, ann) => {
            let ann = ann.as_ref().map(|t| {
                let mut ty = type_atom(t);
                if let Some(c) = &connect {
                    ty.links.push(c.clone());
                }
                Ann::from_type(&ty, &args).expect("annotation links checked by the parser")
            });
            AtomName::Ctx(x.clone(), ann)
        }
        SHead::Lam(l) => AtomName::Lam(Arc::new(expand_lambda(l))),
    };
    let mut parts = vec![Graph::Atom(Atom::new(name, args))];
    parts.extend(children);
    Graph::nu(bound, Graph::mol(parts))
}

fn expand_lambda(l: &SLambda) -> Lambda {
    Lambda {
        param: l.param.clone(),
        links: l.links.clone(),
        ann: l.ann.as_ref().map(|t| {
            Ann::from_type(&type_atom(t), &l.links).expect("annotation links checked by the parser")
        }),
        body: expand_expr(&l.body),
    }
}

pub fn expand_expr(e: &SExpr) -> Expr {
    match e {
        SExpr::Graph(g) => Expr::Graph(expand_term_notation(g)),
        SExpr::App(f, a) => Expr::App(Box::new(expand_expr(f)), Box::new(expand_expr(a))),
        SExpr::Case(c) => Expr::Case(Box::new(Case {
            scrutinee: expand_expr(&c.scrutinee),
            pattern: expand_term_notation(&c.pattern),
            then: expand_expr(&c.then),
            otherwise: expand_expr(&c.otherwise),
        })),
    }
}

pub fn expand_rule(r: &SRule) -> Rule {
    Rule { name: r.name.clone(), links: r.links.clone(), rhs: expand_term_notation(&r.rhs) }
}

pub fn expand_rules(rules: &[SRule]) -> Grammar {
    Grammar::new(rules.iter().map(expand_rule).collect())
}
