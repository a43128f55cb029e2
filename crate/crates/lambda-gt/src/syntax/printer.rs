//! Text output. Surface trees print so that they parse back to the same
//! tree; core terms are first re-sugared into surface trees.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write;

use super::ast::*;
use crate::graph::{AtomName, Expr, Graph, Lambda, TypeAtom, TypeHead};
use crate::name::Name;

// ---- surface trees to text ----

fn join(names: &[Name]) -> String {
    names.iter().map(|n| n.as_str()).collect::<Vec<_>>().join(", ")
}

pub fn print_type(t: &SType) -> String {
    let mut s = String::new();
    ty(t, &mut s);
    s
}

fn ty(t: &SType, out: &mut String) {
    match &t.head {
        STypeHead::Var(n) => out.push_str(n.as_str()),
        STypeHead::Arrow(d, c) => {
            out.push('(');
            ty(d, out);
            let mut cod = c.as_ref();
            while let STypeHead::Arrow(d2, c2) = &cod.head {
                if cod.links != t.links {
                    break;
                }
                out.push_str(" -> ");
                ty(d2, out);
                cod = c2;
            }
            out.push_str(" -> ");
            ty(cod, out);
            out.push(')');
        }
    }
    if !t.links.is_empty() {
        let _ = write!(out, "({})", join(&t.links));
    }
}

fn atom(a: &SAtom, out: &mut String) {
    match &a.head {
        SHead::Con(n) | SHead::Ty(n) => {
            out.push_str(n.as_str());
            if !a.args.is_empty() {
                out.push('(');
                args(&a.args, out);
                out.push(')');
            }
        }
        SHead::Ctx(x, ann) => {
            let _ = write!(out, "${x}");
            if !a.args.is_empty() {
                out.push('[');
                args(&a.args, out);
                out.push(']');
            }
            if let Some(t) = ann {
                out.push(':');
                ty(t, out);
            }
        }
        SHead::Arrow(d, c) => {
            let t = SType {
                head: STypeHead::Arrow(d.clone(), c.clone()),
                links: a
                    .args
                    .iter()
                    .filter_map(|x| match x {
                        SArg::Link(l) => Some(l.clone()),
                        SArg::Nested(_) => None,
                    })
                    .collect(),
            };
            ty(&t, out);
        }
        SHead::Lam(l) => {
            out.push_str("(\\");
            let mut cur: &SLambda = l;
            loop {
                out.push(' ');
                param(&cur.param, &cur.links, cur.ann.as_ref(), out);
                match &cur.body {
                    SExpr::Graph(SGraph::Atom(SAtom { head: SHead::Lam(inner), args: inner_args }))
                        if *inner_args == a.args =>
                    {
                        cur = inner;
                    }
                    _ => break,
                }
            }
            out.push_str(". ");
            expr(&cur.body, 0, out);
            out.push_str(")(");
            args(&a.args, out);
            out.push(')');
        }
    }
}

fn param(x: &Name, links: &[Name], ann: Option<&SType>, out: &mut String) {
    let _ = write!(out, "${x}");
    if !links.is_empty() {
        let _ = write!(out, "[{}]", join(links));
    }
    if let Some(t) = ann {
        out.push(':');
        ty(t, out);
    }
}

fn args(xs: &[SArg], out: &mut String) {
    for (i, a) in xs.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match a {
            SArg::Link(l) => out.push_str(l.as_str()),
            SArg::Nested(n) => atom(n, out),
        }
    }
}

/// `inner` is true where a molecule would need parentheses.
fn graph(g: &SGraph, inner: bool, out: &mut String) {
    match g {
        SGraph::Null => out.push_str("()"),
        SGraph::Fusion(x, y) => {
            let _ = write!(out, "{x} >< {y}");
        }
        SGraph::Atom(a) => atom(a, out),
        SGraph::Mol(gs) => {
            if inner {
                out.push('(');
            }
            for (i, g) in gs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                graph(g, true, out);
            }
            if inner {
                out.push(')');
            }
        }
        SGraph::Nu(xs, body) => {
            out.push_str("nu ");
            for x in xs {
                out.push_str(x.as_str());
                out.push(' ');
            }
            out.pop();
            out.push_str(". ");
            graph(body, true, out);
        }
    }
}

fn let_shape(e: &SExpr) -> Option<(&SLambda, &SExpr)> {
    if let SExpr::App(f, bound) = e {
        if let SExpr::Graph(SGraph::Atom(SAtom { head: SHead::Lam(l), args })) = f.as_ref() {
            if args.is_empty() {
                return Some((l, bound));
            }
        }
    }
    None
}

/// Levels: 0 anything, 1 molecule or application, 2 application, 3 operand.
fn expr(e: &SExpr, level: u8, out: &mut String) {
    if let Some((l, bound)) = let_shape(e) {
        if level > 0 {
            out.push('(');
        }
        out.push_str("let ");
        param(&l.param, &l.links, l.ann.as_ref(), out);
        out.push_str(" = ");
        expr(bound, 0, out);
        out.push_str(" in ");
        expr(&l.body, 0, out);
        if level > 0 {
            out.push(')');
        }
        return;
    }
    match e {
        SExpr::Graph(g) => {
            let paren = matches!(g, SGraph::Mol(_)) && level > 1;
            if paren {
                out.push('(');
            }
            graph(g, false, out);
            if paren {
                out.push(')');
            }
        }
        SExpr::App(f, a) => {
            if level > 2 {
                out.push('(');
            }
            expr(f, 2, out);
            out.push(' ');
            expr(a, 3, out);
            if level > 2 {
                out.push(')');
            }
        }
        SExpr::Case(c) => {
            if level > 0 {
                out.push('(');
            }
            out.push_str("case ");
            expr(&c.scrutinee, 0, out);
            out.push_str(" of ");
            graph(&c.pattern, false, out);
            out.push_str(" -> ");
            expr(&c.then, 0, out);
            out.push_str(" | otherwise -> ");
            expr(&c.otherwise, 0, out);
            if level > 0 {
                out.push(')');
            }
        }
    }
}

pub fn print_sexpr(e: &SExpr) -> String {
    let mut s = String::new();
    expr(e, 0, &mut s);
    s
}

pub fn print_sgraph(g: &SGraph) -> String {
    let mut s = String::new();
    graph(g, false, &mut s);
    s
}

pub fn print_rule(r: &SRule) -> String {
    let mut s = format!("type {}", r.name);
    if !r.links.is_empty() {
        let _ = write!(s, "({})", join(&r.links));
    }
    s.push_str(" -> ");
    graph(&r.rhs, false, &mut s);
    s.push(';');
    s
}

pub fn print_program(p: &Program) -> String {
    let mut s = String::new();
    for r in &p.rules {
        s.push_str(&print_rule(r));
        s.push('\n');
    }
    if let Some(e) = &p.main {
        expr(e, 0, &mut s);
        s.push('\n');
    }
    s
}

// ---- core terms back to surface trees ----

/// Display names for generated links, chosen once per printed term.
struct Namer {
    taken: BTreeSet<Name>,
    map: HashMap<Name, Name>,
    next: usize,
}

impl Namer {
    fn new(taken: BTreeSet<Name>) -> Self {
        Namer { taken, map: HashMap::new(), next: 0 }
    }

    fn fresh(&mut self) -> Name {
        loop {
            self.next += 1;
            let n = Name::new(&format!("L{}", self.next));
            if self.taken.insert(n.clone()) {
                return n;
            }
        }
    }

    fn show(&mut self, n: &Name) -> Name {
        if !n.is_fresh() {
            return n.clone();
        }
        if let Some(m) = self.map.get(n) {
            return m.clone();
        }
        let m = self.fresh();
        self.map.insert(n.clone(), m.clone());
        m
    }
}

fn collect_names_expr(e: &Expr, out: &mut BTreeSet<Name>) {
    match e {
        Expr::Graph(g) => collect_names_graph(g, out),
        Expr::App(f, a) => {
            collect_names_expr(f, out);
            collect_names_expr(a, out);
        }
        Expr::Case(c) => {
            collect_names_expr(&c.scrutinee, out);
            collect_names_graph(&c.pattern, out);
            collect_names_expr(&c.then, out);
            collect_names_expr(&c.otherwise, out);
        }
    }
}

fn collect_names_type(t: &TypeAtom, out: &mut BTreeSet<Name>) {
    out.extend(t.links.iter().filter(|n| !n.is_fresh()).cloned());
    if let TypeHead::Arrow(a) = &t.head {
        collect_names_type(&a.dom, out);
        collect_names_type(&a.cod, out);
    }
}

fn collect_names_graph(g: &Graph, out: &mut BTreeSet<Name>) {
    match g {
        Graph::Null => {}
        Graph::Mol(l, r) => {
            collect_names_graph(l, out);
            collect_names_graph(r, out);
        }
        Graph::Nu(x, b) => {
            if !x.is_fresh() {
                out.insert(x.clone());
            }
            collect_names_graph(b, out);
        }
        Graph::Atom(a) => {
            out.extend(a.args.iter().filter(|n| !n.is_fresh()).cloned());
            match &a.name {
                AtomName::Lam(l) => {
                    out.extend(l.links.iter().filter(|n| !n.is_fresh()).cloned());
                    collect_names_expr(&l.body, out);
                }
                AtomName::Ty(TypeHead::Arrow(ar)) => {
                    collect_names_type(&ar.dom, out);
                    collect_names_type(&ar.cod, out);
                }
                _ => {}
            }
        }
    }
}

struct Flat {
    /// Display name per bound link, in binding order.
    locals: Vec<Name>,
    atoms: Vec<(AtomName, Vec<Name>)>,
}

/// Pulls every binder to the front, giving clashing binders new names.
fn prenex(g: &Graph, namer: &mut Namer, outer: &BTreeSet<Name>) -> Flat {
    fn go(
        g: &Graph,
        env: &mut Vec<(Name, Name)>,
        flat: &mut Flat,
        namer: &mut Namer,
        used: &mut BTreeSet<Name>,
    ) {
        match g {
            Graph::Null => {}
            Graph::Mol(l, r) => {
                go(l, env, flat, namer, used);
                go(r, env, flat, namer, used);
            }
            Graph::Nu(x, body) => {
                let shown = namer.show(x);
                let shown = if used.contains(&shown) { namer.fresh() } else { shown };
                used.insert(shown.clone());
                flat.locals.push(shown.clone());
                env.push((x.clone(), shown));
                go(body, env, flat, namer, used);
                env.pop();
            }
            Graph::Atom(a) => {
                let args = a
                    .args
                    .iter()
                    .map(|x| match env.iter().rev().find(|(n, _)| n == x) {
                        Some((_, s)) => s.clone(),
                        None => namer.show(x),
                    })
                    .collect();
                flat.atoms.push((a.name.clone(), args));
            }
        }
    }
    let mut flat = Flat { locals: Vec::new(), atoms: Vec::new() };
    let mut used: BTreeSet<Name> = outer.clone();
    used.extend(crate::graph::free_names(g).iter().map(|n| namer.show(n)));
    go(g, &mut Vec::new(), &mut flat, namer, &mut used);
    flat
}

fn can_parent(n: &AtomName) -> bool {
    matches!(n, AtomName::Con(_) | AtomName::Ty(TypeHead::Var(_)) | AtomName::Ctx(_, None))
}

fn can_child(n: &AtomName, arity: usize) -> bool {
    match n {
        AtomName::Con(_) | AtomName::Ty(_) => arity > 0,
        AtomName::Ctx(_, None) => arity > 0,
        AtomName::Ctx(_, Some(ann)) => arity > 0 && ann.perm.last() == Some(&(arity - 1)),
        _ => false,
    }
}

fn graph_to_surface(g: &Graph, namer: &mut Namer) -> SGraph {
    let flat = prenex(g, namer, &BTreeSet::new());
    let local_set: BTreeSet<&Name> = flat.locals.iter().collect();
    let mut count: HashMap<&Name, usize> = HashMap::new();
    for (_, args) in &flat.atoms {
        for a in args {
            *count.entry(a).or_default() += 1;
        }
    }
    // child index -> (parent index, position)
    let n = flat.atoms.len();
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut nested_links: BTreeSet<Name> = BTreeSet::new();
    for c in 0..n {
        let (cname, cargs) = &flat.atoms[c];
        if !can_child(cname, cargs.len()) {
            continue;
        }
        let l = cargs.last().unwrap();
        if !local_set.contains(l) || count[l] != 2 || cargs[..cargs.len() - 1].contains(l) {
            continue;
        }
        let found = (0..n).find_map(|p| {
            if p == c || !can_parent(&flat.atoms[p].0) {
                return None;
            }
            flat.atoms[p].1.iter().position(|x| x == l).map(|pos| (p, pos))
        });
        let Some((p, pos)) = found else { continue };
        // both roots on one link: nest only one way
        if pos + 1 == flat.atoms[p].1.len() && parent[p].map(|(q, _)| q) == Some(c) {
            continue;
        }
        let mut up = Some(p);
        let mut cycle = false;
        while let Some(u) = up {
            if u == c {
                cycle = true;
                break;
            }
            up = parent[u].map(|(q, _)| q);
        }
        if cycle {
            continue;
        }
        parent[c] = Some((p, pos));
        nested_links.insert(l.clone());
    }

    fn build(
        i: usize,
        flat: &Flat,
        parent: &[Option<(usize, usize)>],
        drop_last: bool,
        namer: &mut Namer,
    ) -> SAtom {
        let (name, args) = &flat.atoms[i];
        let mut sargs: Vec<SArg> = args.iter().map(|a| SArg::Link(a.clone())).collect();
        for (c, p) in parent.iter().enumerate() {
            if let Some((p, pos)) = p {
                if *p == i {
                    sargs[*pos] = SArg::Nested(build(c, flat, parent, true, namer));
                }
            }
        }
        if drop_last {
            sargs.pop();
        }
        let link_args: Vec<Name> = args.clone();
        let head = match name {
            AtomName::Con(c) => SHead::Con(c.clone()),
            AtomName::Fusion => unreachable!("fusions are printed separately"),
            AtomName::Ty(TypeHead::Var(t)) => SHead::Ty(t.clone()),
            AtomName::Ty(TypeHead::Arrow(ar)) => SHead::Arrow(
                Box::new(type_to_surface(&ar.dom, namer)),
                Box::new(type_to_surface(&ar.cod, namer)),
            ),
            AtomName::Ctx(x, ann) => SHead::Ctx(
                x.clone(),
                ann.as_ref().map(|a| {
                    let mut t = type_to_surface(&a.type_atom(&link_args), namer);
                    if drop_last {
                        t.links.pop();
                    }
                    t
                }),
            ),
            AtomName::Lam(l) => SHead::Lam(Box::new(lambda_to_surface(l, namer))),
        };
        SAtom { head, args: sargs }
    }

    let mut parts = Vec::new();
    for i in 0..n {
        if parent[i].is_some() {
            continue;
        }
        match &flat.atoms[i] {
            (AtomName::Fusion, args) => parts.push(SGraph::Fusion(args[0].clone(), args[1].clone())),
            _ => parts.push(SGraph::Atom(build(i, &flat, &parent, false, namer))),
        }
    }
    let body = match parts.len() {
        0 => SGraph::Null,
        1 => parts.pop().unwrap(),
        _ => SGraph::Mol(parts),
    };
    let used: BTreeSet<&Name> = flat.atoms.iter().flat_map(|(_, a)| a.iter()).collect();
    let binders: Vec<Name> = flat
        .locals
        .iter()
        .filter(|l| used.contains(l) && !nested_links.contains(*l))
        .cloned()
        .collect();
    if binders.is_empty() {
        body
    } else {
        SGraph::Nu(binders, Box::new(body))
    }
}

fn type_to_surface(t: &TypeAtom, namer: &mut Namer) -> SType {
    SType {
        head: match &t.head {
            TypeHead::Var(n) => STypeHead::Var(n.clone()),
            TypeHead::Arrow(a) => STypeHead::Arrow(
                Box::new(type_to_surface(&a.dom, namer)),
                Box::new(type_to_surface(&a.cod, namer)),
            ),
        },
        links: t.links.iter().map(|l| namer.show(l)).collect(),
    }
}

fn lambda_to_surface(l: &Lambda, namer: &mut Namer) -> SLambda {
    SLambda {
        param: l.param.clone(),
        links: l.links.iter().map(|x| namer.show(x)).collect(),
        ann: l.ann.as_ref().map(|a| type_to_surface(&a.type_atom(&l.links), namer)),
        body: expr_to_surface(&l.body, namer),
    }
}

fn expr_to_surface(e: &Expr, namer: &mut Namer) -> SExpr {
    match e {
        Expr::Graph(g) => SExpr::Graph(graph_to_surface(g, namer)),
        Expr::App(f, a) => SExpr::App(Box::new(expr_to_surface(f, namer)), Box::new(expr_to_surface(a, namer))),
        Expr::Case(c) => SExpr::Case(Box::new(SCase {
            scrutinee: expr_to_surface(&c.scrutinee, namer),
            pattern: graph_to_surface(&c.pattern, namer),
            then: expr_to_surface(&c.then, namer),
            otherwise: expr_to_surface(&c.otherwise, namer),
        })),
    }
}

/// A surface tree for a core expression, nesting where unambiguous.
pub fn resugar_expr(e: &Expr) -> SExpr {
    let mut names = BTreeSet::new();
    collect_names_expr(e, &mut names);
    expr_to_surface(e, &mut Namer::new(names))
}

pub fn resugar_graph(g: &Graph) -> SGraph {
    let mut names = BTreeSet::new();
    collect_names_graph(g, &mut names);
    graph_to_surface(g, &mut Namer::new(names))
}

pub fn print_expr(e: &Expr) -> String {
    print_sexpr(&resugar_expr(e))
}

pub fn print_graph(g: &Graph) -> String {
    print_sgraph(&resugar_graph(g))
}

pub fn print_type_atom(t: &TypeAtom) -> String {
    let mut names = BTreeSet::new();
    collect_names_type(t, &mut names);
    print_type(&type_to_surface(t, &mut Namer::new(names)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::congruent;
    use crate::syntax::{expand_expr, expand_term_notation, parse_expr, parse_template};

    fn round(s: &str) {
        let e = parse_expr(s).unwrap();
        let printed = print_sexpr(&e);
        assert_eq!(parse_expr(&printed).unwrap(), e, "{s} printed as {printed}");
    }

    #[test]
    fn surface_round_trips() {
        round("X >< Y");
        round("cons(zero, Y, X)");
        round("nu N. (cons(N, Y, X), zero(N)), p(Q)");
        round("(a(X), b(Y)), c(Z)");
        round("let $f[Z] = (\\ $x[Y, X] $y[Y, X]. $x[$y[Y], X])(Z) in $f[Z] cons(1, Y, X) cons(2, Y, X)");
        round("case $x[X] of zero(X) -> one(X) | otherwise -> $x[X]");
        round("f(X) (case a(X) of b(X) -> c(X) | otherwise -> d(X)) ()");
        round("(\\ $x[Y, X]:nodes(Y, X). $x[Y, X])(Z)");
        round("(\\ $f[Z]:(nat(X) -> nat(X) -> nat(X))(Z). $f[Z])(W)");
        round("case $l[Y, X] of nu A B. ($y[A, X]:nodes(A, X), cons(B, Y, A), $z[B]:nat(B)) -> $y[Y, X] | otherwise -> $l[Y, X]");
    }

    #[test]
    fn fusion_prints_infix() {
        assert_eq!(print_graph(&expand_term_notation(&parse_template("X >< Y").unwrap())), "X >< Y");
    }

    #[test]
    fn core_printing_resugars_nesting() {
        let g = expand_term_notation(&parse_template("nu N. (cons(N, Y, X), zero(N))").unwrap());
        assert_eq!(print_graph(&g), "cons(zero, Y, X)");
    }

    #[test]
    fn core_printing_reparses_congruently() {
        for s in [
            "cons(1, cons(2, Y), X)",
            "nu A. (p(A, A))",
            "nu A B. (p(A, B), q(B, A))",
            "leaf($n:nat, L, Y)",
            "nu Z. ($x[Z, X]:nodes(Z, X), $y[Y, Z]:nodes(Y, Z))",
            "nu A. (A >< X, p(A))",
        ] {
            let g = expand_term_notation(&parse_template(s).unwrap());
            let printed = print_graph(&g);
            let back = expand_term_notation(&parse_template(&printed).unwrap());
            assert!(congruent(&g, &back), "{s} printed as {printed}");
        }
    }

    #[test]
    fn core_expression_printing() {
        let e = expand_expr(&parse_expr("(\\ $x[Y, X]. $x[Y, X])(Z) cons(1, Y, X)").unwrap());
        assert_eq!(print_expr(&e), "(\\ $x[Y, X]. $x[Y, X])(Z) cons(1, Y, X)");
    }
}
