//! Graph type checking by structural induction, and typing of expressions.
//!
//! The checker walks the target graph and the annotation side by side from
//! their root links. A constructor facing a type atom expands the type atom
//! with one of its productions; a hole facing anything it does not
//! trivially match is decomposed over all productions of its type, and the
//! goal at that point becomes an induction hypothesis for the strictly
//! smaller holes the decomposition creates.

use std::cell::{Cell, RefCell};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::canon::{canon_congruent, normalize, CLink, Canon};
use crate::grammar::{check_root_constraints, fusion_variants, FlatRule, Grammar, GrammarError, Rule};
use crate::graph::{
    free_names, head_alpha_eq, subst_links, Ann, Atom, AtomName, Expr, Functor, Graph, Lambda, TypeAtom, TypeHead,
};
use crate::name::{fresh, Name};
use crate::syntax::printer::{print_expr, print_graph, print_type_atom};

pub type TypingContext = BTreeMap<Functor, Ann>;

pub const DEFAULT_DEPTH: usize = 64;

static HYPOTHESES_APPLIED: AtomicUsize = AtomicUsize::new(0);
static DESCENT_VIOLATIONS: AtomicUsize = AtomicUsize::new(0);

/// (hypothesis applications, applications refused because no constructor
/// was consumed since the hypothesis was introduced), process-wide.
pub fn descent_stats() -> (usize, usize) {
    (HYPOTHESES_APPLIED.load(Ordering::Relaxed), DESCENT_VIOLATIONS.load(Ordering::Relaxed))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerifyError {
    #[error("ill-formed grammar: {0}")]
    Invalid(String),
    #[error("root constraint violated: {0}")]
    RootConstraint(String),
    #[error(transparent)]
    Elimination(#[from] GrammarError),
    #[error("type {0}/{1} is not defined")]
    UnknownType(Name, usize),
    #[error("graph context ${0} has no type")]
    Unannotated(Name),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TypeError {
    #[error("unbound graph context ${}/{}", .0.0, .0.1)]
    Unbound(Functor),
    #[error("graph context ${0} in a case pattern has no type annotation")]
    MissingAnnotation(Name),
    #[error("parameter ${0} has no type annotation")]
    MissingParamAnnotation(Name),
    #[error("{0} is applied but has type {1}")]
    NotArrow(String, String),
    #[error("{expr} has type {found}, expected {expected}")]
    ArgMismatch { expr: String, expected: String, found: String },
    #[error("case branches have types {0} and {1}")]
    BranchMismatch(String, String),
    #[error("{expr} does not have type {expected}")]
    NotOfType { expr: String, expected: String },
    #[error("no type can be derived for {0}")]
    NoType(String),
    #[error("type {0}/{1} is not defined")]
    UnknownType(Name, usize),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

#[derive(Clone, Debug, Default)]
pub struct Verdict {
    pub accepted: bool,
    pub depth_exceeded: bool,
    /// Steps of the successful proof, outermost first.
    pub trace: Vec<String>,
    /// The deepest obligation that could not be discharged.
    pub deepest: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LinkCorrespondence {
    pub locals: BTreeSet<Name>,
    pub map: BTreeMap<Name, Option<Name>>,
}

/// Correspondence between target link `x` and annotation link `y`.
pub fn check_link_name(l: &LinkCorrespondence, x: &Name, y: &Name) -> Option<LinkCorrespondence> {
    if !l.locals.contains(x) {
        return (!l.map.contains_key(x) && x == y).then(|| l.clone());
    }
    match l.map.get(y) {
        Some(None) => {
            let mut out = l.clone();
            out.map.insert(y.clone(), Some(x.clone()));
            Some(out)
        }
        Some(Some(z)) if z == x => Some(l.clone()),
        _ => None,
    }
}

/// Replaces the annotated context `hole` by the body of `rule`, turning the
/// body's type atoms into fresh annotated contexts.
pub fn decompose(g: &Graph, hole: &Name, rule: &Rule) -> Option<Graph> {
    let mut ok = false;
    let out = g.map_atoms(&mut |a| match &a.name {
        AtomName::Ctx(x, Some(ann)) if x == hole => {
            let ty = ann.type_atom(&a.args);
            if ty.head != TypeHead::Var(rule.name.clone()) || ty.links.len() != rule.links.len() {
                return Graph::Atom(a.clone());
            }
            ok = true;
            let body = rule.rhs.map_atoms(&mut |b| match &b.name {
                AtomName::Ty(h) => Graph::Atom(Atom::new(
                    AtomName::Ctx(fresh(), Some(Ann::identity(h.clone(), b.args.len()))),
                    b.args.clone(),
                )),
                _ => Graph::Atom(b.clone()),
            });
            let pairs: Vec<_> = rule.links.iter().cloned().zip(ty.links.iter().cloned()).collect();
            subst_links(&body, &pairs).expect("head links are distinct")
        }
        _ => Graph::Atom(a.clone()),
    });
    ok.then(|| crate::canon::embed(&normalize(&out)))
}

#[derive(Clone, Debug)]
struct At {
    name: AtomName,
    args: Vec<Name>,
}

impl At {
    fn root(&self) -> Option<&Name> {
        match self.name {
            AtomName::Fusion => None,
            _ => self.args.last(),
        }
    }

    fn hole(&self) -> Option<(&Name, &TypeHead)> {
        match &self.name {
            AtomName::Ctx(id, Some(ann)) => Some((id, &ann.head)),
            _ => None,
        }
    }

    fn to_atom(&self) -> Atom {
        Atom::new(self.name.clone(), self.args.clone())
    }
}

struct Hyp {
    canon: Canon,
    hole: Name,
    consumed: usize,
}

#[derive(Clone)]
struct State {
    g: Vec<At>,
    t: Vec<At>,
    glocals: BTreeSet<Name>,
    /// Annotation-side local links and the target links they stand for.
    f: BTreeMap<Name, Option<Name>>,
    /// Free-link classes induced by fusions on either side.
    class: BTreeMap<Name, Name>,
    gfuse: Vec<(Name, Name)>,
    tfuse: Vec<(Name, Name)>,
    agenda: Vec<(Name, Name)>,
    hyps: Vec<Rc<Hyp>>,
    consumed: usize,
    decomps: usize,
    /// Pairs put back since the last step that changed either side.
    stalled: usize,
    trace: Vec<String>,
}

fn rename(v: &mut [Name], from: &Name, to: &Name) {
    for x in v.iter_mut() {
        if x == from {
            *x = to.clone();
        }
    }
}

impl State {
    fn is_local(&self, x: &Name) -> bool {
        self.glocals.contains(x) || self.f.contains_key(x)
    }

    fn rep<'a>(&'a self, x: &'a Name) -> &'a Name {
        self.class.get(x).unwrap_or(x)
    }

    fn same(&self, a: &Name, b: &Name) -> bool {
        a == b || (!self.is_local(a) && !self.is_local(b) && self.rep(a) == self.rep(b))
    }

    fn union(&mut self, a: &Name, b: &Name) {
        let (ra, rb) = (self.rep(a).clone(), self.rep(b).clone());
        if ra == rb {
            return;
        }
        let (keep, gone) = if ra < rb { (ra, rb) } else { (rb, ra) };
        for v in self.class.values_mut() {
            if *v == gone {
                *v = keep.clone();
            }
        }
        self.class.insert(gone, keep.clone());
        self.class.insert(keep.clone(), keep);
    }

    /// Class-aware link correspondence that also keeps the map injective.
    fn link(&mut self, x: &Name, y: &Name) -> bool {
        if !self.glocals.contains(x) {
            return !self.f.contains_key(y) && self.same(x, y);
        }
        match self.f.get(y) {
            Some(None) => {
                if self.f.values().any(|v| v.as_ref() == Some(x)) {
                    return false;
                }
                self.f.insert(y.clone(), Some(x.clone()));
                true
            }
            Some(Some(z)) => z == x,
            None => false,
        }
    }

    fn roots(atoms: &[At], r: &Name, same: impl Fn(&Name, &Name) -> bool) -> Vec<usize> {
        (0..atoms.len()).filter(|&i| atoms[i].root().is_some_and(|x| same(x, r))).collect()
    }

    fn g_roots(&self, r: &Name) -> Vec<usize> {
        Self::roots(&self.g, r, |a, b| self.same(a, b))
    }

    fn t_roots(&self, r: &Name) -> Vec<usize> {
        Self::roots(&self.t, r, |a, b| self.same(a, b))
    }

    fn g_fuse(&mut self, a: &Name, b: &Name) {
        if a == b {
            return;
        }
        let (gone, keep) = if self.glocals.contains(a) {
            (a.clone(), b.clone())
        } else if self.glocals.contains(b) {
            (b.clone(), a.clone())
        } else {
            self.gfuse.push((a.clone(), b.clone()));
            self.union(a, b);
            return;
        };
        self.glocals.remove(&gone);
        for at in &mut self.g {
            rename(&mut at.args, &gone, &keep);
        }
        for v in self.f.values_mut() {
            if v.as_ref() == Some(&gone) {
                *v = Some(keep.clone());
            }
        }
        for (x, _) in &mut self.agenda {
            if *x == gone {
                *x = keep.clone();
            }
        }
    }

    fn t_fuse(&mut self, a: &Name, b: &Name) -> bool {
        if a == b {
            return true;
        }
        let (gone, keep) = if self.f.contains_key(a) {
            (a.clone(), b.clone())
        } else if self.f.contains_key(b) {
            (b.clone(), a.clone())
        } else {
            self.tfuse.push((a.clone(), b.clone()));
            self.union(a, b);
            return true;
        };
        let image = self.f.remove(&gone).unwrap();
        if let Some(k) = self.f.get(&keep).cloned() {
            let merged = match (image, k) {
                (None, x) | (x, None) => x,
                (Some(x), Some(y)) if x == y => Some(x),
                _ => return false,
            };
            self.f.insert(keep.clone(), merged);
        } else if let Some(x) = image {
            if !self.same(&x, &keep) {
                return false;
            }
        }
        for at in &mut self.t {
            rename(&mut at.args, &gone, &keep);
        }
        for (_, y) in &mut self.agenda {
            if *y == gone {
                *y = keep.clone();
            }
        }
        true
    }

    fn partition(pairs: &[(Name, Name)]) -> BTreeSet<BTreeSet<Name>> {
        let mut classes: Vec<BTreeSet<Name>> = Vec::new();
        for (a, b) in pairs {
            let ia = classes.iter().position(|c| c.contains(a));
            let ib = classes.iter().position(|c| c.contains(b));
            match (ia, ib) {
                (Some(i), Some(j)) if i == j => {}
                (Some(i), Some(j)) => {
                    let cj = classes.remove(j);
                    let i = if j < i { i - 1 } else { i };
                    classes[i].extend(cj);
                }
                (Some(i), None) => {
                    classes[i].insert(b.clone());
                }
                (None, Some(j)) => {
                    classes[j].insert(a.clone());
                }
                (None, None) => classes.push([a.clone(), b.clone()].into_iter().collect()),
            }
        }
        classes.into_iter().collect()
    }

    fn describe(&self, pair: Option<&(Name, Name)>) -> String {
        let show = |atoms: &[At]| {
            if atoms.is_empty() {
                "()".to_string()
            } else {
                print_graph(&Graph::mol(atoms.iter().map(|a| Graph::Atom(a.to_atom())).collect()))
            }
        };
        let at = pair.map(|(x, y)| format!(" at roots {x} / {y}")).unwrap_or_default();
        format!("{} : {}{at}", show(&self.g), show(&self.t))
    }
}

fn instantiate(r: &FlatRule, args: &[Name]) -> (Vec<At>, Vec<Name>) {
    let locals: Vec<Name> = (0..r.locals).map(|_| fresh()).collect();
    let atoms = r
        .atoms
        .iter()
        .map(|a| At {
            name: a.name.clone(),
            args: a
                .args
                .iter()
                .map(|l| match l {
                    CLink::Local(i) => locals[*i as usize].clone(),
                    CLink::Free(n) => args[r.links.iter().position(|x| x == n).expect("validated rule")].clone(),
                })
                .collect(),
        })
        .collect();
    (atoms, locals)
}

pub struct Checker {
    grammar: Grammar,
    rules: BTreeMap<Name, Vec<FlatRule>>,
    expansions: BTreeMap<Name, Vec<FlatRule>>,
    fusion_only: BTreeMap<Name, Vec<FlatRule>>,
    pub depth: usize,
}

fn has(r: &FlatRule, p: impl Fn(&AtomName) -> bool) -> bool {
    r.atoms.iter().any(|a| p(&a.name))
}

impl Checker {
    pub fn new(g: &Grammar) -> Result<Checker, VerifyError> {
        let join = |v: Vec<crate::grammar::Violation>| v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
        g.validate().map_err(|v| VerifyError::Invalid(join(v)))?;
        check_root_constraints(g).map_err(|v| VerifyError::RootConstraint(join(v)))?;
        let mut rules: BTreeMap<Name, Vec<FlatRule>> = BTreeMap::new();
        let mut fusion_rules: BTreeMap<Name, Vec<FlatRule>> = BTreeMap::new();
        for r in &g.rules {
            let flat = FlatRule::new(r);
            if r.has_fusion() {
                fusion_rules.entry(r.name.clone()).or_default().push(flat.clone());
            }
            rules.entry(r.name.clone()).or_default().push(flat);
        }
        let mut expansions: BTreeMap<Name, Vec<FlatRule>> = BTreeMap::new();
        let mut fusion_only: BTreeMap<Name, Vec<FlatRule>> = BTreeMap::new();
        for (name, rs) in &rules {
            let exp = expansions.entry(name.clone()).or_default();
            for r in rs {
                let is_con = |n: &AtomName| matches!(n, AtomName::Con(_));
                if has(r, |n| matches!(n, AtomName::Fusion)) {
                    if has(r, is_con) {
                        exp.push(r.clone());
                    } else if !has(r, |n| matches!(n, AtomName::Ty(_))) {
                        fusion_only.entry(name.clone()).or_default().push(r.clone());
                    }
                    continue;
                }
                for c in fusion_variants(r, &fusion_rules) {
                    if c.atoms.iter().any(|a| matches!(a.name, AtomName::Fusion)) {
                        let head = Rule { name: name.clone(), links: r.links.clone(), rhs: Graph::Null }.head();
                        return Err(GrammarError::EliminationIncomplete { rule: head }.into());
                    }
                    exp.push(FlatRule { name: name.clone(), links: r.links.clone(), atoms: c.atoms, locals: c.locals });
                }
            }
        }
        Ok(Checker { grammar: g.clone(), rules, expansions, fusion_only, depth: DEFAULT_DEPTH })
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    fn defined(&self, ty: &TypeAtom) -> Result<(), VerifyError> {
        match &ty.head {
            TypeHead::Var(n) => match self.grammar.arity(n) {
                Some(k) if k == ty.links.len() => Ok(()),
                _ => Err(VerifyError::UnknownType(n.clone(), ty.links.len())),
            },
            TypeHead::Arrow(a) => {
                self.defined(&a.dom)?;
                self.defined(&a.cod)
            }
        }
    }

    /// Checks an annotated graph against a type. Holes are annotated graph
    /// contexts; abstraction atoms are typed with an empty context.
    pub fn check_graph(&self, g: &Graph, goal: &TypeAtom) -> Result<Verdict, TypeError> {
        self.defined(goal).map_err(TypeError::from)?;
        let prepared = self.prepare(&TypingContext::new(), g)?;
        Ok(self.check_prepared(&prepared, goal))
    }

    /// Replaces abstraction atoms by arrow-typed holes and resolves
    /// unannotated contexts through `ctx`.
    fn prepare(&self, ctx: &TypingContext, t: &Graph) -> Result<Graph, TypeError> {
        let mut err = None;
        let out = t.map_atoms(&mut |a| match &a.name {
            AtomName::Ctx(x, ann) => {
                let ann = match ann {
                    Some(ann) => ann.clone(),
                    None => match ctx.get(&(x.clone(), a.args.len())) {
                        Some(ann) => ann.clone(),
                        None => {
                            err.get_or_insert(TypeError::Unbound((x.clone(), a.args.len())));
                            return Graph::Null;
                        }
                    },
                };
                Graph::Atom(Atom::new(AtomName::Ctx(x.clone(), Some(ann)), a.args.clone()))
            }
            AtomName::Lam(l) => match self.type_of_lambda(ctx, l, &a.args) {
                Ok(ty) => Graph::Atom(Atom::new(
                    AtomName::Ctx(fresh(), Some(Ann::identity(ty.head, ty.links.len()))),
                    ty.links,
                )),
                Err(e) => {
                    err.get_or_insert(e);
                    Graph::Null
                }
            },
            _ => Graph::Atom(a.clone()),
        });
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    fn check_prepared(&self, g: &Graph, goal: &TypeAtom) -> Verdict {
        let goal_links: BTreeSet<Name> = goal.links.iter().cloned().collect();
        let mut verdict = Verdict::default();
        if free_names(g) != goal_links || goal_links.len() != goal.links.len() {
            verdict.deepest = Some("free links of the graph differ from the links of the type".into());
            return verdict;
        }
        let canon = normalize(g);
        let locals: Vec<Name> = (0..canon.locals).map(|_| fresh()).collect();
        let mut st = State {
            g: Vec::new(),
            t: vec![At { name: AtomName::Ty(goal.head.clone()), args: goal.links.clone() }],
            glocals: locals.iter().cloned().collect(),
            f: BTreeMap::new(),
            class: BTreeMap::new(),
            gfuse: Vec::new(),
            tfuse: Vec::new(),
            agenda: Vec::new(),
            hyps: Vec::new(),
            consumed: 0,
            decomps: 0,
            stalled: 0,
            trace: Vec::new(),
        };
        for a in &canon.atoms {
            let args: Vec<Name> = a
                .args
                .iter()
                .map(|l| match l {
                    CLink::Local(i) => locals[*i as usize].clone(),
                    CLink::Free(n) => n.clone(),
                })
                .collect();
            match &a.name {
                AtomName::Fusion => {
                    if args[0] != args[1] {
                        st.gfuse.push((args[0].clone(), args[1].clone()));
                        st.union(&args[0], &args[1]);
                    }
                }
                AtomName::Ctx(_, Some(ann)) => {
                    let ty = ann.type_atom(&args);
                    let n = ty.links.len();
                    st.g.push(At { name: AtomName::Ctx(fresh(), Some(Ann::identity(ty.head, n))), args: ty.links });
                }
                AtomName::Ty(h) => st.g.push(At {
                    name: AtomName::Ctx(fresh(), Some(Ann::identity(h.clone(), args.len()))),
                    args,
                }),
                _ => st.g.push(At { name: a.name.clone(), args }),
            }
        }
        match goal.links.last() {
            Some(r) => st.agenda.push((r.clone(), r.clone())),
            None => {
                verdict.deepest = Some("a type without links has no root".into());
                return verdict;
            }
        }
        let search = Search {
            checker: self,
            parents: RefCell::new(HashMap::new()),
            deepest: RefCell::new(None),
            exceeded: Cell::new(false),
            proof: RefCell::new(Vec::new()),
        };
        verdict.accepted = search.solve(st);
        verdict.depth_exceeded = search.exceeded.get();
        verdict.trace = search.proof.into_inner();
        if !verdict.accepted {
            verdict.deepest = search.deepest.into_inner().map(|(_, s)| s);
        }
        verdict
    }

    /// Ty-Subst at rank zero: contexts become holes of their types.
    pub fn check_template(&self, ctx: &TypingContext, t: &Graph, goal: &TypeAtom) -> Result<Verdict, TypeError> {
        self.defined(goal).map_err(TypeError::from)?;
        let prepared = self.prepare(ctx, t)?;
        Ok(self.check_prepared(&prepared, goal))
    }

    fn type_of_lambda(&self, ctx: &TypingContext, l: &Lambda, args: &[Name]) -> Result<TypeAtom, TypeError> {
        let ann = l.ann.as_ref().ok_or_else(|| TypeError::MissingParamAnnotation(l.param.clone()))?;
        let dom = ann.type_atom(&l.links);
        self.defined(&dom).map_err(TypeError::from)?;
        let mut inner = ctx.clone();
        inner.insert((l.param.clone(), l.links.len()), ann.clone());
        let cod = self.type_of_expr(&inner, &l.body)?;
        Ok(TypeAtom::new(TypeHead::arrow(dom, cod), args.to_vec()))
    }

    pub fn type_of_expr(&self, ctx: &TypingContext, e: &Expr) -> Result<TypeAtom, TypeError> {
        match e {
            Expr::Graph(t) => self.type_of_template(ctx, t),
            Expr::App(f, a) => {
                let tf = self.type_of_expr(ctx, f)?;
                let TypeHead::Arrow(arrow) = &tf.head else {
                    return Err(TypeError::NotArrow(print_expr(f), print_type_atom(&tf)));
                };
                self.check_expr(ctx, a, &arrow.dom)?;
                Ok(arrow.cod.clone())
            }
            Expr::Case(c) => {
                self.type_of_expr(ctx, &c.scrutinee)?;
                let mut inner = ctx.clone();
                let mut missing = None;
                c.pattern.for_each_atom(&mut |a| {
                    if let AtomName::Ctx(x, ann) = &a.name {
                        match ann {
                            Some(ann) => {
                                inner.insert((x.clone(), a.args.len()), ann.clone());
                            }
                            None => {
                                missing.get_or_insert(x.clone());
                            }
                        }
                    }
                });
                if let Some(x) = missing {
                    return Err(TypeError::MissingAnnotation(x));
                }
                let t2 = self.type_of_expr(&inner, &c.then)?;
                if self.check_expr(ctx, &c.otherwise, &t2).is_ok() {
                    return Ok(t2);
                }
                let t3 = self.type_of_expr(ctx, &c.otherwise)?;
                if self.check_expr(&inner, &c.then, &t3).is_ok() {
                    return Ok(t3);
                }
                Err(TypeError::BranchMismatch(print_type_atom(&t2), print_type_atom(&t3)))
            }
        }
    }

    /// Checks `e` against a known type. Templates other than a lone context
    /// or abstraction are checked directly, since a graph may have several
    /// types (a fusion has both orientations).
    pub fn check_expr(&self, ctx: &TypingContext, e: &Expr, expected: &TypeAtom) -> Result<(), TypeError> {
        if let Expr::Graph(t) = e {
            let lone = matches!(t, Graph::Atom(a) if matches!(a.name, AtomName::Ctx(..) | AtomName::Lam(_)));
            if !lone {
                return if self.check_template(ctx, t, expected)?.accepted {
                    Ok(())
                } else {
                    Err(TypeError::NotOfType { expr: print_graph(t), expected: print_type_atom(expected) })
                };
            }
        }
        let found = self.type_of_expr(ctx, e)?;
        if found != *expected {
            return Err(TypeError::ArgMismatch {
                expr: print_expr(e),
                expected: print_type_atom(expected),
                found: print_type_atom(&found),
            });
        }
        Ok(())
    }

    fn type_of_template(&self, ctx: &TypingContext, t: &Graph) -> Result<TypeAtom, TypeError> {
        if let Graph::Atom(a) = t {
            match &a.name {
                AtomName::Ctx(_, Some(ann)) => {
                    let ty = ann.type_atom(&a.args);
                    self.defined(&ty).map_err(TypeError::from)?;
                    return Ok(ty);
                }
                AtomName::Ctx(x, None) => {
                    return ctx
                        .get(&(x.clone(), a.args.len()))
                        .map(|ann| ann.type_atom(&a.args))
                        .ok_or_else(|| TypeError::Unbound((x.clone(), a.args.len())));
                }
                AtomName::Lam(l) => return self.type_of_lambda(ctx, l, &a.args),
                _ => {}
            }
        }
        let links: Vec<Name> = free_names(t).into_iter().collect();
        let prepared = self.prepare(ctx, t)?;
        for name in self.grammar.type_names() {
            if self.grammar.arity(&name) != Some(links.len()) {
                continue;
            }
            for perm in permutations(&links) {
                let goal = TypeAtom::new(TypeHead::Var(name.clone()), perm);
                if self.check_prepared(&prepared, &goal).accepted {
                    return Ok(goal);
                }
            }
        }
        Err(TypeError::NoType(print_graph(t)))
    }
}

/// Equal type atoms, comparing arrow heads up to renaming of their inner
/// links.
pub fn same_type(a: &TypeAtom, b: &TypeAtom) -> bool {
    a.links == b.links && head_alpha_eq(&a.head, &b.head)
}

fn permutations(xs: &[Name]) -> Vec<Vec<Name>> {
    if xs.len() <= 1 {
        return vec![xs.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..xs.len() {
        let mut rest = xs.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x.clone());
            out.push(p);
        }
    }
    out
}

struct Search<'c> {
    checker: &'c Checker,
    parents: RefCell<HashMap<Name, Name>>,
    deepest: RefCell<Option<(usize, String)>>,
    exceeded: Cell<bool>,
    proof: RefCell<Vec<String>>,
}

impl Search<'_> {
    fn fail(&self, st: &State, pair: Option<&(Name, Name)>) -> bool {
        let score = st.consumed * 2 + st.decomps;
        let mut d = self.deepest.borrow_mut();
        if d.as_ref().is_none_or(|(s, _)| score > *s) {
            *d = Some((score, st.describe(pair)));
        }
        false
    }

    fn solve(&self, mut st: State) -> bool {
        loop {
            let Some(pair) = st.agenda.pop() else {
                return self.finish(st);
            };
            let (rg, rt) = &pair;
            let gs = st.g_roots(rg);
            let ts = st.t_roots(rt);
            match (gs.is_empty(), ts.is_empty()) {
                (true, true) => continue,
                // The target side may gain an atom at this root once a type
                // atom hanging from another root is expanded.
                (false, true) => match Self::defer(st, pair) {
                    Ok(s) => st = s,
                    Err((s, pair)) => return self.fail(&s, Some(&pair)),
                },
                (true, false) => return self.empty_target(st, pair, ts),
                (false, false) => {
                    st.stalled = 0;
                    return self.step(st, pair, gs, ts);
                }
            }
        }
    }

    /// Puts a pair back under the agenda unless every pending pair has
    /// already been put back without progress.
    fn defer(mut st: State, pair: (Name, Name)) -> Result<State, (State, (Name, Name))> {
        if st.stalled > st.agenda.len() {
            return Err((st, pair));
        }
        st.stalled += 1;
        st.agenda.insert(0, pair);
        Ok(st)
    }

    fn finish(&self, st: State) -> bool {
        if !st.g.is_empty() || !st.t.is_empty() {
            return self.fail(&st, None);
        }
        if State::partition(&st.gfuse) != State::partition(&st.tfuse) {
            return self.fail(&st, None);
        }
        let mut proof = self.proof.borrow_mut();
        if proof.is_empty() {
            *proof = st.trace;
        }
        true
    }

    /// Nothing in the target hangs from the root: only fusion productions
    /// can apply.
    fn empty_target(&self, st: State, pair: (Name, Name), ts: Vec<usize>) -> bool {
        let ti = ts[0];
        let AtomName::Ty(TypeHead::Var(alpha)) = &st.t[ti].name else {
            return self.fail(&st, Some(&pair));
        };
        for r in self.checker.fusion_only.get(alpha).into_iter().flatten() {
            if let Some(mut s) = self.expand(&st, ti, r) {
                s.stalled = 0;
                s.agenda.push(pair.clone());
                if self.solve(s) {
                    return true;
                }
            }
        }
        // Decomposing a hole elsewhere may still root graph atoms here.
        match Self::defer(st, pair) {
            Ok(s) => self.solve(s),
            Err((s, pair)) => self.fail(&s, Some(&pair)),
        }
    }

    fn step(&self, st: State, pair: (Name, Name), gs: Vec<usize>, ts: Vec<usize>) -> bool {
        let gi = gs[0];
        let ga = st.g[gi].clone();
        match ga.hole() {
            None => {
                // Any constructor sharing this root may be the one the target
                // has here, so each distinct one is tried.
                let mut tried = Vec::new();
                for &gi in gs.iter().filter(|&&i| st.g[i].hole().is_none()) {
                    let ga = &st.g[gi];
                    if tried.contains(&(&ga.name, ga.args.len())) {
                        continue;
                    }
                    tried.push((&ga.name, ga.args.len()));
                    for &ti in &ts {
                        let ta = &st.t[ti];
                        if ta.args.len() == ga.args.len() && ta.name == ga.name {
                            if let Some(s) = self.pair_off(&st, gi, ti, &pair, "constructor") {
                                if self.solve(s) {
                                    return true;
                                }
                            }
                        }
                    }
                }
                self.expand_any(&st, &pair, &ts)
            }
            Some((_, TypeHead::Arrow(_))) => {
                for &ti in &ts {
                    if let AtomName::Ty(h @ TypeHead::Arrow(_)) = &st.t[ti].name {
                        let (_, gh) = ga.hole().unwrap();
                        if head_alpha_eq(gh, h) && st.t[ti].args.len() == ga.args.len() {
                            if let Some(s) = self.pair_off(&st, gi, ti, &pair, "arrow") {
                                if self.solve(s) {
                                    return true;
                                }
                            }
                        }
                    }
                }
                self.expand_any(&st, &pair, &ts)
            }
            Some((id, TypeHead::Var(beta))) => {
                let id = id.clone();
                for &ti in &ts {
                    if let AtomName::Ty(TypeHead::Var(alpha)) = &st.t[ti].name {
                        if alpha == beta && st.t[ti].args.len() == ga.args.len() {
                            if let Some(s) = self.pair_off(&st, gi, ti, &pair, "hole") {
                                if self.solve(s) {
                                    return true;
                                }
                            }
                        }
                    }
                }
                if let Some(s) = self.by_hypothesis(&st, &pair) {
                    if self.solve(s) {
                        return true;
                    }
                }
                self.decompose_all(st, gi, &id, beta.clone(), pair)
            }
        }
    }

    /// Removes a matching pair of atoms and queues their argument pairs.
    fn pair_off(&self, st: &State, gi: usize, ti: usize, pair: &(Name, Name), what: &str) -> Option<State> {
        let mut s = st.clone();
        let ga = s.g[gi].clone();
        let ta = s.t[ti].clone();
        for (x, y) in ga.args.iter().zip(&ta.args) {
            if !s.link(x, y) {
                return None;
            }
        }
        s.g.remove(gi);
        s.t.remove(ti);
        if what == "constructor" {
            s.consumed += 1;
        }
        s.trace.push(format!("{what} {} against {}", print_graph(&Graph::Atom(ga.to_atom())), print_graph(&Graph::Atom(ta.to_atom()))));
        s.agenda.push(pair.clone());
        let n = ga.args.len();
        for j in (0..n.saturating_sub(1)).rev() {
            s.agenda.push((ga.args[j].clone(), ta.args[j].clone()));
        }
        Some(s)
    }

    /// A constructor or arrow hole faces type atoms: try hypotheses, then
    /// every production of each type atom.
    fn expand_any(&self, st: &State, pair: &(Name, Name), ts: &[usize]) -> bool {
        if let Some(s) = self.by_hypothesis(st, pair) {
            if self.solve(s) {
                return true;
            }
        }
        for &ti in ts {
            let AtomName::Ty(TypeHead::Var(alpha)) = &st.t[ti].name else { continue };
            for r in self.checker.expansions.get(alpha).into_iter().flatten() {
                if let Some(mut s) = self.expand(st, ti, r) {
                    s.agenda.push(pair.clone());
                    if self.solve(s) {
                        return true;
                    }
                }
            }
        }
        self.fail(st, Some(pair))
    }

    fn expand(&self, st: &State, ti: usize, r: &FlatRule) -> Option<State> {
        let mut s = st.clone();
        let a = s.t.remove(ti);
        let (atoms, locals) = instantiate(r, &a.args);
        for l in locals {
            s.f.insert(l, None);
        }
        let mut fusions = Vec::new();
        for at in atoms {
            match at.name {
                AtomName::Fusion => fusions.push((at.args[0].clone(), at.args[1].clone())),
                _ => s.t.push(at),
            }
        }
        for (x, y) in fusions {
            if !s.t_fuse(&x, &y) {
                return None;
            }
        }
        s.trace.push(format!("expand {} with {}", print_graph(&Graph::Atom(a.to_atom())), r.name));
        Some(s)
    }

    fn decompose_all(&self, st: State, gi: usize, id: &Name, beta: Name, pair: (Name, Name)) -> bool {
        if st.decomps >= self.checker.depth {
            self.exceeded.set(true);
            return self.fail(&st, Some(&pair));
        }
        let hyp = self.judgment(&st, &pair, id).map(|canon| Rc::new(Hyp { canon, hole: id.clone(), consumed: st.consumed }));
        let rules = self.checker.rules.get(&beta).cloned().unwrap_or_default();
        if rules.is_empty() {
            return self.fail(&st, Some(&pair));
        }
        let mut trace = Vec::new();
        for r in &rules {
            let mut s = st.clone();
            let hole = s.g.remove(gi);
            let (atoms, locals) = instantiate(r, &hole.args);
            s.glocals.extend(locals);
            let mut fusions = Vec::new();
            for at in atoms {
                match &at.name {
                    AtomName::Fusion => fusions.push((at.args[0].clone(), at.args[1].clone())),
                    AtomName::Ty(h) => {
                        let child = fresh();
                        self.parents.borrow_mut().insert(child.clone(), id.clone());
                        s.g.push(At { name: AtomName::Ctx(child, Some(Ann::identity(h.clone(), at.args.len()))), args: at.args });
                    }
                    _ => s.g.push(at),
                }
            }
            for (x, y) in fusions {
                s.g_fuse(&x, &y);
            }
            s.decomps += 1;
            if let Some(h) = &hyp {
                s.hyps.push(h.clone());
            }
            s.trace.push(format!("case {} by a production of {beta}", print_graph(&Graph::Atom(hole.to_atom()))));
            s.agenda.push(pair.clone());
            self.proof.borrow_mut().clear();
            if !self.solve(s) {
                return false;
            }
            trace.extend(self.proof.borrow().iter().cloned());
        }
        *self.proof.borrow_mut() = trace;
        true
    }

    fn is_strict_descendant(&self, c: &Name, h: &Name) -> bool {
        let parents = self.parents.borrow();
        let mut cur = parents.get(c);
        while let Some(p) = cur {
            if p == h {
                return true;
            }
            cur = parents.get(p);
        }
        false
    }

    fn reach(atoms: &[At], root: &Name, same: impl Fn(&Name, &Name) -> bool) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        let mut seen = vec![root.clone()];
        let mut queue = vec![root.clone()];
        while let Some(l) = queue.pop() {
            for (i, a) in atoms.iter().enumerate() {
                if out.contains(&i) || !a.root().is_some_and(|r| same(r, &l)) {
                    continue;
                }
                out.push(i);
                for x in &a.args[..a.args.len() - 1] {
                    if !seen.contains(x) {
                        seen.push(x.clone());
                        queue.push(x.clone());
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// The obligation below a root pair as one graph over anonymous links,
    /// with `special` marking the hole an induction runs over.
    fn judgment(&self, st: &State, pair: &(Name, Name), special: &Name) -> Option<Canon> {
        if !st.gfuse.is_empty() || !st.tfuse.is_empty() {
            return None;
        }
        let gi = Self::reach(&st.g, &pair.0, |a, b| a == b);
        let ti = Self::reach(&st.t, &pair.1, |a, b| a == b);
        let tmap = |y: &Name| match st.f.get(y) {
            Some(Some(x)) => x.clone(),
            _ => y.clone(),
        };
        let outside: BTreeSet<Name> = st
            .g
            .iter()
            .enumerate()
            .filter(|(i, _)| !gi.contains(i))
            .flat_map(|(_, a)| a.args.iter().cloned())
            .chain(
                st.t
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !ti.contains(j))
                    .flat_map(|(_, a)| a.args.iter().map(tmap)),
            )
            .collect();
        let mut atoms = Vec::new();
        let mut links: Vec<Name> = Vec::new();
        let note = |l: &Name, links: &mut Vec<Name>| {
            if !links.contains(l) {
                links.push(l.clone());
            }
        };
        let g_mark = Name::new("#G");
        let t_mark = Name::new("#T");
        let special_mark = Name::new("#H");
        for &i in &gi {
            let a = &st.g[i];
            for l in &a.args {
                note(l, &mut links);
            }
            let mut args = a.args.clone();
            let name = match &a.name {
                AtomName::Ctx(id, Some(ann)) => {
                    args.push(if id == special { special_mark.clone() } else { id.clone() });
                    AtomName::Ty(ann.head.clone())
                }
                other => {
                    args.push(g_mark.clone());
                    other.clone()
                }
            };
            atoms.push(Graph::Atom(Atom::new(name, args)));
        }
        for &j in &ti {
            let a = &st.t[j];
            let mut args: Vec<Name> = a.args.iter().map(tmap).collect();
            for (l, orig) in args.iter().zip(&a.args) {
                if matches!(st.f.get(orig), Some(None)) && outside.contains(orig) {
                    return None;
                }
                note(l, &mut links);
            }
            args.push(t_mark.clone());
            atoms.push(Graph::Atom(Atom::new(a.name.clone(), args)));
        }
        let root_t = tmap(&pair.1);
        for l in &links {
            let interface = !st.is_local(l) || outside.contains(l) || *l == pair.0 || *l == root_t;
            if interface {
                atoms.push(Graph::Atom(Atom::new(AtomName::Con(Name::new("#if")), vec![l.clone()])));
            }
        }
        atoms.push(Graph::Atom(Atom::new(AtomName::Con(Name::new("#root")), vec![pair.0.clone()])));
        atoms.push(Graph::Atom(Atom::new(AtomName::Con(Name::new("#troot")), vec![root_t])));
        Some(normalize(&Graph::nu(links, Graph::mol(atoms))))
    }

    fn by_hypothesis(&self, st: &State, pair: &(Name, Name)) -> Option<State> {
        if st.hyps.is_empty() {
            return None;
        }
        let gi = Self::reach(&st.g, &pair.0, |a, b| a == b);
        let ti = Self::reach(&st.t, &pair.1, |a, b| a == b);
        for hyp in st.hyps.iter().rev() {
            for &i in &gi {
                let Some((c, _)) = st.g[i].hole() else { continue };
                if !self.is_strict_descendant(c, &hyp.hole) {
                    continue;
                }
                let Some(cand) = self.judgment(st, pair, c) else { continue };
                if !canon_congruent(&hyp.canon, &cand) {
                    continue;
                }
                if st.consumed <= hyp.consumed {
                    DESCENT_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
                    continue;
                }
                HYPOTHESES_APPLIED.fetch_add(1, Ordering::Relaxed);
                let mut s = st.clone();
                let gs: BTreeSet<usize> = gi.iter().copied().collect();
                let tset: BTreeSet<usize> = ti.iter().copied().collect();
                s.g = s.g.into_iter().enumerate().filter(|(k, _)| !gs.contains(k)).map(|(_, a)| a).collect();
                s.t = s.t.into_iter().enumerate().filter(|(k, _)| !tset.contains(k)).map(|(_, a)| a).collect();
                s.trace.push(format!("induction hypothesis at {} / {}", pair.0, pair.1));
                return Some(s);
            }
        }
        None
    }
}
