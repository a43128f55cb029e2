//! Graphviz rendering of graphs and expressions.
//!
//! Node names come from the canonical form, so equal inputs give
//! byte-identical output.

use std::fmt::Write;

use crate::canon::{normalize, CLink};
use crate::graph::{AtomName, Expr, Graph, TypeHead};
use crate::syntax::printer::print_type_atom;

fn escape(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if matches!(c, '{' | '}' | '|' | '<' | '>' | '"' | '\\' | ' ') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

fn head_label(h: &TypeHead) -> String {
    match h {
        TypeHead::Var(n) => n.to_string(),
        TypeHead::Arrow(a) => format!("({} -> {})", print_type_atom(&a.dom), print_type_atom(&a.cod)),
    }
}

fn atom_label(name: &AtomName) -> String {
    match name {
        AtomName::Con(n) => n.to_string(),
        AtomName::Fusion => "><".into(),
        AtomName::Lam(l) => format!("λ${}", l.param),
        AtomName::Ctx(x, Some(ann)) => format!("${x}:{}", head_label(&ann.head)),
        AtomName::Ctx(x, None) => format!("${x}"),
        AtomName::Ty(h) => head_label(h),
    }
}

/// Writes the nodes and edges of `g`, prefixing every node id.
fn graph_body(out: &mut String, g: &Graph, prefix: &str, indent: &str) {
    let c = normalize(g);
    let free = c.free_names();
    for x in &free {
        let _ = writeln!(out, "{indent}{prefix}free_{x} [shape=diamond, label=\"{}\"];", x.as_str().replace('"', "\\\""));
    }
    for i in 0..c.locals {
        let _ = writeln!(out, "{indent}{prefix}l{i} [shape=point];");
    }
    let link = |l: &CLink| match l {
        CLink::Local(i) => format!("{prefix}l{i}"),
        CLink::Free(x) => format!("{prefix}free_{x}"),
    };
    for (i, a) in c.atoms.iter().enumerate() {
        if let AtomName::Fusion = a.name {
            let _ = writeln!(out, "{indent}{prefix}f{i} [shape=circle, style=filled, fillcolor=black, width=0.12, label=\"\"];");
            for l in &a.args {
                let _ = writeln!(out, "{indent}{prefix}f{i} -> {} [arrowhead=none];", link(l));
            }
            continue;
        }
        let ports: Vec<String> = (0..a.args.len()).map(|j| format!("<p{j}> {j}")).collect();
        let label = if ports.is_empty() {
            escape(&atom_label(&a.name))
        } else {
            format!("{{{}|{{{}}}}}", escape(&atom_label(&a.name)), ports.join("|"))
        };
        let _ = writeln!(out, "{indent}{prefix}a{i} [shape=record, label=\"{label}\"];");
        for (j, l) in a.args.iter().enumerate() {
            let _ = writeln!(out, "{indent}{prefix}a{i}:p{j} -> {} [arrowhead=none];", link(l));
        }
    }
}

pub fn render_graph(g: &Graph) -> String {
    let mut out = String::from("digraph G {\n");
    graph_body(&mut out, g, "", "  ");
    out.push_str("}\n");
    out
}

/// Expression nodes as ellipses; each graph below them is a cluster.
pub fn render_expr(e: &Expr) -> String {
    if let Expr::Graph(g) = e {
        return render_graph(g);
    }
    let mut out = String::from("digraph G {\n  compound=true;\n");
    let mut next = 0;
    expr_node(&mut out, e, &mut next);
    out.push_str("}\n");
    out
}

/// Returns the id of a node standing for `e`.
fn expr_node(out: &mut String, e: &Expr, next: &mut usize) -> String {
    let k = *next;
    *next += 1;
    match e {
        Expr::Graph(g) => {
            let prefix = format!("g{k}_");
            let _ = writeln!(out, "  subgraph cluster_{k} {{");
            let _ = writeln!(out, "    {prefix}anchor [shape=plaintext, label=\"\"];");
            graph_body(out, g, &prefix, "    ");
            out.push_str("  }\n");
            format!("{prefix}anchor")
        }
        Expr::App(f, a) => {
            let id = format!("e{k}");
            let _ = writeln!(out, "  {id} [shape=ellipse, label=\"apply\"];");
            for (tag, sub) in [("fun", f), ("arg", a)] {
                let s = expr_node(out, sub, next);
                let _ = writeln!(out, "  {id} -> {s} [label=\"{tag}\"];");
            }
            id
        }
        Expr::Case(c) => {
            let id = format!("e{k}");
            let _ = writeln!(out, "  {id} [shape=ellipse, label=\"case\"];");
            let s = expr_node(out, &c.scrutinee, next);
            let _ = writeln!(out, "  {id} -> {s} [label=\"of\"];");
            let p = expr_node(out, &Expr::Graph(c.pattern.clone()), next);
            let _ = writeln!(out, "  {id} -> {p} [label=\"pattern\"];");
            let t = expr_node(out, &c.then, next);
            let _ = writeln!(out, "  {id} -> {t} [label=\"then\"];");
            let o = expr_node(out, &c.otherwise, next);
            let _ = writeln!(out, "  {id} -> {o} [label=\"otherwise\"];");
            id
        }
    }
}
