//! Graph terms, templates and expressions.
//!
//! One term type serves three roles: a value graph contains only
//! constructor, fusion and abstraction atoms; a template may also contain
//! graph contexts; a production right-hand side may contain type atoms.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use crate::name::{fresh, Name};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Graph {
    Null,
    Atom(Atom),
    Mol(Box<Graph>, Box<Graph>),
    Nu(Name, Box<Graph>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub name: AtomName,
    pub args: Vec<Name>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AtomName {
    Con(Name),
    Fusion,
    Lam(Arc<Lambda>),
    /// A graph context `$x[...]`, optionally annotated.
    Ctx(Name, Option<Ann>),
    /// A type atom inside a production right-hand side or annotated graph.
    Ty(TypeHead),
}

/// `λ x[links] : ann . body`; the atom's own arguments live on the
/// enclosing [`Atom`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lambda {
    pub param: Name,
    pub links: Vec<Name>,
    pub ann: Option<Ann>,
    pub body: Expr,
}

/// A type annotation on a context or parameter: link `j` of the type is
/// the owner's link at position `perm[j]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ann {
    pub head: TypeHead,
    pub perm: Vec<usize>,
}

impl Ann {
    /// The annotation whose links are the owner's links in order.
    pub fn identity(head: TypeHead, arity: usize) -> Self {
        Ann { head, perm: (0..arity).collect() }
    }

    pub fn type_atom(&self, links: &[Name]) -> TypeAtom {
        TypeAtom {
            head: self.head.clone(),
            links: self.perm.iter().map(|&i| links[i].clone()).collect(),
        }
    }

    /// The annotation that yields `ty` over `links`, if every type link is
    /// one of them.
    pub fn from_type(ty: &TypeAtom, links: &[Name]) -> Option<Ann> {
        let perm = ty
            .links
            .iter()
            .map(|l| links.iter().position(|x| x == l))
            .collect::<Option<Vec<_>>>()?;
        Some(Ann { head: ty.head.clone(), perm })
    }
}

pub fn ann_alpha_eq(a: &Ann, b: &Ann) -> bool {
    a.perm == b.perm && head_alpha_eq(&a.head, &b.head)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeHead {
    Var(Name),
    Arrow(Arc<ArrowType>),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArrowType {
    pub dom: TypeAtom,
    pub cod: TypeAtom,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TypeAtom {
    pub head: TypeHead,
    pub links: Vec<Name>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Graph(Graph),
    Case(Box<Case>),
    App(Box<Expr>, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Case {
    pub scrutinee: Expr,
    pub pattern: Graph,
    pub then: Expr,
    pub otherwise: Expr,
}

/// A context name paired with its arity.
pub type Functor = (Name, usize);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("link {0} is substituted twice")]
    DuplicateSource(Name),
}

impl TypeHead {
    pub fn var(name: &str) -> Self {
        TypeHead::Var(Name::new(name))
    }

    pub fn arrow(dom: TypeAtom, cod: TypeAtom) -> Self {
        TypeHead::Arrow(Arc::new(ArrowType { dom, cod }))
    }

    pub fn var_name(&self) -> Option<&Name> {
        match self {
            TypeHead::Var(n) => Some(n),
            TypeHead::Arrow(_) => None,
        }
    }
}

impl TypeAtom {
    pub fn new(head: TypeHead, links: Vec<Name>) -> Self {
        TypeAtom { head, links }
    }

    pub fn var(name: &str, links: &[&str]) -> Self {
        TypeAtom {
            head: TypeHead::var(name),
            links: links.iter().map(|l| Name::new(l)).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.links.len()
    }

    /// Renames the outer links only; the links inside an arrow are its own.
    pub fn rename(&self, map: &HashMap<Name, Name>) -> TypeAtom {
        TypeAtom {
            head: self.head.clone(),
            links: self
                .links
                .iter()
                .map(|l| map.get(l).cloned().unwrap_or_else(|| l.clone()))
                .collect(),
        }
    }
}

impl Atom {
    pub fn new(name: AtomName, args: Vec<Name>) -> Self {
        Atom { name, args }
    }

    pub fn con(name: &str, args: &[&str]) -> Self {
        Atom::new(AtomName::Con(Name::new(name)), names(args))
    }

    pub fn fusion(a: &str, b: &str) -> Self {
        Atom::new(AtomName::Fusion, names(&[a, b]))
    }

    pub fn ctx(name: &str, args: &[&str]) -> Self {
        Atom::new(AtomName::Ctx(Name::new(name), None), names(args))
    }

    pub fn ty(name: &str, args: &[&str]) -> Self {
        Atom::new(AtomName::Ty(TypeHead::var(name)), names(args))
    }
}

pub fn names(xs: &[&str]) -> Vec<Name> {
    xs.iter().map(|s| Name::new(s)).collect()
}

impl Graph {
    pub fn atom(a: Atom) -> Graph {
        Graph::Atom(a)
    }

    /// Right-nested molecule of the parts; the empty list gives `0`.
    pub fn mol(parts: Vec<Graph>) -> Graph {
        let mut it = parts.into_iter().rev();
        match it.next() {
            None => Graph::Null,
            Some(last) => it.fold(last, |acc, g| Graph::Mol(Box::new(g), Box::new(acc))),
        }
    }

    pub fn nu(links: Vec<Name>, body: Graph) -> Graph {
        links
            .into_iter()
            .rev()
            .fold(body, |acc, l| Graph::Nu(l, Box::new(acc)))
    }

    /// Visits every atom in left-to-right order, ignoring binders.
    pub fn for_each_atom<'a>(&'a self, f: &mut impl FnMut(&'a Atom)) {
        match self {
            Graph::Null => {}
            Graph::Atom(a) => f(a),
            Graph::Mol(l, r) => {
                l.for_each_atom(f);
                r.for_each_atom(f);
            }
            Graph::Nu(_, g) => g.for_each_atom(f),
        }
    }

    pub fn atom_count(&self) -> usize {
        let mut n = 0;
        self.for_each_atom(&mut |_| n += 1);
        n
    }

    pub fn has_contexts(&self) -> bool {
        let mut found = false;
        self.for_each_atom(&mut |a| found |= matches!(a.name, AtomName::Ctx(..)));
        found
    }

    /// A value contains neither graph contexts nor type atoms.
    pub fn is_value(&self) -> bool {
        let mut ok = true;
        self.for_each_atom(&mut |a| {
            ok &= !matches!(a.name, AtomName::Ctx(..) | AtomName::Ty(_))
        });
        ok
    }

    /// Replaces every atom by the graph `f` returns, keeping binders.
    pub fn map_atoms(&self, f: &mut impl FnMut(&Atom) -> Graph) -> Graph {
        match self {
            Graph::Null => Graph::Null,
            Graph::Atom(a) => f(a),
            Graph::Mol(l, r) => Graph::Mol(Box::new(l.map_atoms(f)), Box::new(r.map_atoms(f))),
            Graph::Nu(x, g) => Graph::Nu(x.clone(), Box::new(g.map_atoms(f))),
        }
    }

    pub fn has_lambda(&self) -> bool {
        let mut found = false;
        self.for_each_atom(&mut |a| found |= matches!(a.name, AtomName::Lam(_)));
        found
    }
}

/// fn(G).
pub fn free_names(g: &Graph) -> BTreeSet<Name> {
    fn go(g: &Graph, out: &mut BTreeSet<Name>) {
        match g {
            Graph::Null => {}
            Graph::Atom(a) => out.extend(a.args.iter().cloned()),
            Graph::Mol(l, r) => {
                go(l, out);
                go(r, out);
            }
            Graph::Nu(x, body) => {
                let mut inner = BTreeSet::new();
                go(body, &mut inner);
                inner.remove(x);
                out.extend(inner);
            }
        }
    }
    let mut out = BTreeSet::new();
    go(g, &mut out);
    out
}

/// G⟨to…/from…⟩, renaming binders that would capture a target name.
pub fn subst_links(g: &Graph, pairs: &[(Name, Name)]) -> Result<Graph, GraphError> {
    for (i, (from, _)) in pairs.iter().enumerate() {
        if pairs[..i].iter().any(|(f, _)| f == from) {
            return Err(GraphError::DuplicateSource(from.clone()));
        }
    }
    Ok(subst_unchecked(g, pairs))
}

fn subst_unchecked(g: &Graph, pairs: &[(Name, Name)]) -> Graph {
    if pairs.is_empty() {
        return g.clone();
    }
    match g {
        Graph::Null => Graph::Null,
        Graph::Atom(a) => Graph::Atom(Atom {
            name: a.name.clone(),
            args: a
                .args
                .iter()
                .map(|x| {
                    pairs
                        .iter()
                        .find(|(from, _)| from == x)
                        .map(|(_, to)| to.clone())
                        .unwrap_or_else(|| x.clone())
                })
                .collect(),
        }),
        Graph::Mol(l, r) => Graph::Mol(
            Box::new(subst_unchecked(l, pairs)),
            Box::new(subst_unchecked(r, pairs)),
        ),
        Graph::Nu(x, body) => {
            if pairs.iter().any(|(from, _)| from == x) {
                let rest: Vec<_> = pairs.iter().filter(|(f, _)| f != x).cloned().collect();
                Graph::Nu(x.clone(), Box::new(subst_unchecked(body, &rest)))
            } else if pairs.iter().all(|(_, to)| to != x) {
                Graph::Nu(x.clone(), Box::new(subst_unchecked(body, pairs)))
            } else {
                let w = fresh();
                let renamed = subst_unchecked(body, &[(x.clone(), w.clone())]);
                Graph::Nu(w, Box::new(subst_unchecked(&renamed, pairs)))
            }
        }
    }
}

/// ff(e): the free graph-context functors of an expression.
pub fn free_functors(e: &Expr) -> BTreeSet<Functor> {
    match e {
        Expr::Graph(t) => graph_functors(t),
        Expr::App(f, a) => {
            let mut s = free_functors(f);
            s.extend(free_functors(a));
            s
        }
        Expr::Case(c) => {
            let mut s = free_functors(&c.scrutinee);
            let bound = graph_functors(&c.pattern);
            s.extend(free_functors(&c.then).into_iter().filter(|f| !bound.contains(f)));
            s.extend(free_functors(&c.otherwise));
            s
        }
    }
}

/// ff(T) for a template.
pub fn graph_functors(t: &Graph) -> BTreeSet<Functor> {
    let mut s = BTreeSet::new();
    t.for_each_atom(&mut |a| match &a.name {
        AtomName::Ctx(x, _) => {
            s.insert((x.clone(), a.args.len()));
        }
        AtomName::Lam(l) => {
            let own = (l.param.clone(), l.links.len());
            s.extend(free_functors(&l.body).into_iter().filter(|f| *f != own));
        }
        _ => {}
    });
    s
}

/// Structural equality of type atoms up to a consistent renaming of every
/// link, including the outer ones.
pub fn type_alpha_eq(a: &TypeAtom, b: &TypeAtom) -> bool {
    let mut fwd = HashMap::new();
    let mut bwd = HashMap::new();
    type_eq_in(a, b, &mut fwd, &mut bwd)
}

/// Arrow heads are equal when their components agree up to renaming.
pub fn head_alpha_eq(a: &TypeHead, b: &TypeHead) -> bool {
    match (a, b) {
        (TypeHead::Var(x), TypeHead::Var(y)) => x == y,
        (TypeHead::Arrow(x), TypeHead::Arrow(y)) => {
            let mut fwd = HashMap::new();
            let mut bwd = HashMap::new();
            type_eq_in(&x.dom, &y.dom, &mut fwd, &mut bwd)
                && type_eq_in(&x.cod, &y.cod, &mut fwd, &mut bwd)
        }
        _ => false,
    }
}

fn type_eq_in(
    a: &TypeAtom,
    b: &TypeAtom,
    fwd: &mut HashMap<Name, Name>,
    bwd: &mut HashMap<Name, Name>,
) -> bool {
    if a.links.len() != b.links.len() {
        return false;
    }
    for (x, y) in a.links.iter().zip(&b.links) {
        if !bind_pair(fwd, bwd, x, y) {
            return false;
        }
    }
    match (&a.head, &b.head) {
        (TypeHead::Var(x), TypeHead::Var(y)) => x == y,
        (TypeHead::Arrow(x), TypeHead::Arrow(y)) => {
            type_eq_in(&x.dom, &y.dom, fwd, bwd) && type_eq_in(&x.cod, &y.cod, fwd, bwd)
        }
        _ => false,
    }
}

fn bind_pair(
    fwd: &mut HashMap<Name, Name>,
    bwd: &mut HashMap<Name, Name>,
    x: &Name,
    y: &Name,
) -> bool {
    match (fwd.get(x), bwd.get(y)) {
        (Some(y2), Some(x2)) => y2 == y && x2 == x,
        (None, None) => {
            fwd.insert(x.clone(), y.clone());
            bwd.insert(y.clone(), x.clone());
            true
        }
        _ => false,
    }
}

/// Abstraction equality: same parameter signature and bodies identical up
/// to consistent renaming of bound links and bound contexts.
pub fn lambda_alpha_eq(a: &Lambda, b: &Lambda) -> bool {
    if a.links.len() != b.links.len() {
        return false;
    }
    let mut env = Alpha::default();
    env.ctxs.push(((a.param.clone(), a.links.len()), (b.param.clone(), b.links.len())));
    let ann_ok = match (&a.ann, &b.ann) {
        (None, None) => true,
        (Some(x), Some(y)) => ann_alpha_eq(x, y),
        _ => false,
    };
    ann_ok && a.links == b.links && env.expr(&a.body, &b.body)
}

#[derive(Default)]
struct Alpha {
    links: Vec<(Name, Name)>,
    ctxs: Vec<(Functor, Functor)>,
}

impl Alpha {
    fn link(&self, x: &Name, y: &Name) -> bool {
        for (a, b) in self.links.iter().rev() {
            if a == x || b == y {
                return a == x && b == y;
            }
        }
        x == y
    }

    fn ctx(&self, x: &Functor, y: &Functor) -> bool {
        for (a, b) in self.ctxs.iter().rev() {
            if a == x || b == y {
                return a == x && b == y;
            }
        }
        x == y
    }

    fn expr(&mut self, a: &Expr, b: &Expr) -> bool {
        match (a, b) {
            (Expr::Graph(x), Expr::Graph(y)) => self.graph(x, y),
            (Expr::App(f1, a1), Expr::App(f2, a2)) => self.expr(f1, f2) && self.expr(a1, a2),
            (Expr::Case(c1), Expr::Case(c2)) => {
                if !self.expr(&c1.scrutinee, &c2.scrutinee) || !self.expr(&c1.otherwise, &c2.otherwise)
                {
                    return false;
                }
                let mut p1 = Vec::new();
                let mut p2 = Vec::new();
                pattern_ctxs(&c1.pattern, &mut p1);
                pattern_ctxs(&c2.pattern, &mut p2);
                if p1.len() != p2.len() {
                    return false;
                }
                let mark = self.ctxs.len();
                self.ctxs.extend(p1.into_iter().zip(p2));
                let ok = self.graph(&c1.pattern, &c2.pattern) && self.expr(&c1.then, &c2.then);
                self.ctxs.truncate(mark);
                ok
            }
            _ => false,
        }
    }

    fn graph(&mut self, a: &Graph, b: &Graph) -> bool {
        match (a, b) {
            (Graph::Null, Graph::Null) => true,
            (Graph::Mol(l1, r1), Graph::Mol(l2, r2)) => self.graph(l1, l2) && self.graph(r1, r2),
            (Graph::Nu(x, g1), Graph::Nu(y, g2)) => {
                self.links.push((x.clone(), y.clone()));
                let ok = self.graph(g1, g2);
                self.links.pop();
                ok
            }
            (Graph::Atom(x), Graph::Atom(y)) => {
                x.args.len() == y.args.len()
                    && x.args.iter().zip(&y.args).all(|(p, q)| self.link(p, q))
                    && self.atom_name(&x.name, &y.name, x.args.len())
            }
            _ => false,
        }
    }

    fn atom_name(&mut self, a: &AtomName, b: &AtomName, arity: usize) -> bool {
        match (a, b) {
            (AtomName::Con(x), AtomName::Con(y)) => x == y,
            (AtomName::Fusion, AtomName::Fusion) => true,
            (AtomName::Ty(x), AtomName::Ty(y)) => head_alpha_eq(x, y),
            (AtomName::Ctx(x, ax), AtomName::Ctx(y, ay)) => {
                self.ctx(&(x.clone(), arity), &(y.clone(), arity))
                    && match (ax, ay) {
                        (None, None) => true,
                        (Some(p), Some(q)) => ann_alpha_eq(p, q),
                        _ => false,
                    }
            }
            (AtomName::Lam(x), AtomName::Lam(y)) => {
                if x.links != y.links {
                    return false;
                }
                let ann_ok = match (&x.ann, &y.ann) {
                    (None, None) => true,
                    (Some(p), Some(q)) => ann_alpha_eq(p, q),
                    _ => false,
                };
                let mark = self.ctxs.len();
                self.ctxs
                    .push(((x.param.clone(), x.links.len()), (y.param.clone(), y.links.len())));
                let ok = ann_ok && self.expr(&x.body, &y.body);
                self.ctxs.truncate(mark);
                ok
            }
            _ => false,
        }
    }
}

/// Context functors of a pattern in traversal order, without duplicates.
pub fn pattern_ctxs(t: &Graph, out: &mut Vec<Functor>) {
    t.for_each_atom(&mut |a| {
        if let AtomName::Ctx(x, _) = &a.name {
            let f = (x.clone(), a.args.len());
            if !out.contains(&f) {
                out.push(f);
            }
        }
    });
}
