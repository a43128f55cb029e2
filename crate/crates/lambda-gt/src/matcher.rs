//! Matching a value graph against a template modulo congruence.
//!
//! Both sides are reduced to atoms over hyperlink points, where a point is
//! a class of links identified by fusions. Constructor atoms of the
//! template are matched injectively against atoms of the graph; template
//! points touched only by contexts are then placed on graph points or on
//! fresh points, and the leftover atoms are handed to contexts one
//! connected component at a time. Every candidate is confirmed with
//! `congruent(g, apply(t, θ))`.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;

use crate::canon::{atom_name_eq, canon_congruent, congruent, flatten, normalize, CAtom, CLink, Canon, UnionFind};
use crate::graph::{subst_links, Ann, Atom, AtomName, Functor, Graph, TypeAtom};
use crate::name::{fresh, Name};
use crate::verifier::Checker;

#[derive(Clone, Debug)]
pub struct Binding {
    pub graph: Graph,
    pub formals: Vec<Name>,
}

/// A ground substitution, in the order the contexts occur in the template.
#[derive(Clone, Debug, Default)]
pub struct Subst {
    pub bindings: Vec<(Functor, Binding)>,
}

impl Subst {
    pub fn get(&self, f: &Functor) -> Option<&Binding> {
        self.bindings.iter().find(|(g, _)| g == f).map(|(_, b)| b)
    }

    /// Same functors bound to congruent graphs.
    pub fn equiv(&self, other: &Subst) -> bool {
        self.bindings.len() == other.bindings.len()
            && self.bindings.iter().all(|(f, b)| {
                other.get(f).is_some_and(|c| {
                    let pairs: Vec<_> = c.formals.iter().cloned().zip(b.formals.iter().cloned()).collect();
                    subst_links(&c.graph, &pairs).is_ok_and(|cg| congruent(&b.graph, &cg))
                })
            })
    }
}

/// Tθ: each context atom replaced by its binding with formals renamed to
/// the atom's arguments.
pub fn apply(t: &Graph, theta: &Subst) -> Graph {
    t.map_atoms(&mut |a| match &a.name {
        AtomName::Ctx(x, _) => match theta.get(&(x.clone(), a.args.len())) {
            Some(b) => {
                let pairs: Vec<_> = b.formals.iter().cloned().zip(a.args.iter().cloned()).collect();
                subst_links(&b.graph, &pairs).expect("formals are distinct")
            }
            None => Graph::Atom(a.clone()),
        },
        _ => Graph::Atom(a.clone()),
    })
}

/// Atoms over points: fusion atoms are consumed into the point classes.
pub(crate) struct Points {
    pub atoms: Vec<(AtomName, Vec<usize>)>,
    pub count: usize,
    pub free: BTreeMap<Name, usize>,
}

pub(crate) fn points(atoms: &[CAtom]) -> Points {
    let mut ids: BTreeMap<&CLink, usize> = BTreeMap::new();
    let mut order: Vec<&CLink> = Vec::new();
    for a in atoms {
        for l in &a.args {
            ids.entry(l).or_insert_with(|| {
                order.push(l);
                order.len() - 1
            });
        }
    }
    let mut uf = UnionFind::new(order.len());
    for a in atoms.iter().filter(|a| matches!(a.name, AtomName::Fusion)) {
        uf.union(ids[&a.args[0]], ids[&a.args[1]]);
    }
    let mut class: BTreeMap<usize, usize> = BTreeMap::new();
    let mut point_of = vec![0; order.len()];
    for (i, p) in point_of.iter_mut().enumerate() {
        let r = uf.find(i);
        let next = class.len();
        *p = *class.entry(r).or_insert(next);
    }
    let free = order
        .iter()
        .enumerate()
        .filter_map(|(i, l)| match l {
            CLink::Free(n) => Some((n.clone(), point_of[i])),
            CLink::Local(_) => None,
        })
        .collect();
    let atoms = atoms
        .iter()
        .filter(|a| !matches!(a.name, AtomName::Fusion))
        .map(|a| (a.name.clone(), a.args.iter().map(|l| point_of[ids[l]]).collect()))
        .collect();
    Points { atoms, count: class.len(), free }
}

/// A context graph over the given formals. Points shared by several
/// formals become fusions, unused formals get a self-fusion, and all other
/// points become local links.
pub fn context_graph(formals: &[Name], formal_points: &[usize], atoms: &[&(AtomName, Vec<usize>)]) -> Graph {
    let mut named: BTreeMap<usize, Name> = BTreeMap::new();
    let mut parts = Vec::new();
    let mut shared = BTreeSet::new();
    for (f, p) in formals.iter().zip(formal_points) {
        match named.get(p) {
            Some(first) => {
                parts.push(Graph::Atom(Atom::new(AtomName::Fusion, vec![first.clone(), f.clone()])));
                shared.insert(*p);
            }
            None => {
                named.insert(*p, f.clone());
            }
        }
    }
    let used: BTreeSet<usize> = atoms.iter().flat_map(|(_, ps)| ps.iter().copied()).collect();
    for (f, p) in formals.iter().zip(formal_points) {
        if named[p] == *f && !used.contains(p) && !shared.contains(p) {
            parts.push(Graph::Atom(Atom::new(AtomName::Fusion, vec![f.clone(), f.clone()])));
        }
    }
    let mut locals = Vec::new();
    let mut body = Vec::new();
    for (name, ps) in atoms {
        let args = ps
            .iter()
            .map(|p| {
                named
                    .entry(*p)
                    .or_insert_with(|| {
                        let n = fresh();
                        locals.push(n.clone());
                        n
                    })
                    .clone()
            })
            .collect();
        body.push(Graph::Atom(Atom::new(name.clone(), args)));
    }
    body.extend(parts);
    Graph::nu(locals, Graph::mol(body))
}

struct TCtx {
    functor: Functor,
    formals: Vec<Name>,
    points: Vec<usize>,
}

struct Search<'a, F> {
    g: &'a Graph,
    t: &'a Graph,
    gside: Points,
    tcons: Vec<(AtomName, Vec<usize>)>,
    tctx: Vec<TCtx>,
    phi: Vec<Option<usize>>,
    used: Vec<bool>,
    found: Vec<Subst>,
    sink: F,
}

impl<F: FnMut(&Subst) -> ControlFlow<()>> Search<'_, F> {
    fn cons(&mut self, k: usize) -> ControlFlow<()> {
        if k == self.tcons.len() {
            return self.free_points(0, self.gside.count);
        }
        for gi in 0..self.gside.atoms.len() {
            if self.used[gi] {
                continue;
            }
            let (tn, targs) = &self.tcons[k];
            let (gn, gargs) = &self.gside.atoms[gi];
            if targs.len() != gargs.len() || !atom_name_eq(tn, gn) {
                continue;
            }
            let mut set = Vec::new();
            let mut ok = true;
            for (tp, gp) in targs.iter().zip(gargs) {
                match self.phi[*tp] {
                    Some(x) if x != *gp => {
                        ok = false;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        self.phi[*tp] = Some(*gp);
                        set.push(*tp);
                    }
                }
            }
            if ok {
                self.used[gi] = true;
                let r = self.cons(k + 1);
                self.used[gi] = false;
                for tp in &set {
                    self.phi[*tp] = None;
                }
                r?;
            } else {
                for tp in &set {
                    self.phi[*tp] = None;
                }
            }
        }
        ControlFlow::Continue(())
    }

    /// Places template points seen only by contexts; `next_fresh` is the
    /// least fresh point id not yet used.
    fn free_points(&mut self, from: usize, next_fresh: usize) -> ControlFlow<()> {
        let Some(p) = (from..self.phi.len()).find(|&p| self.phi[p].is_none()) else {
            return self.distribute();
        };
        for target in 0..=next_fresh {
            self.phi[p] = Some(target);
            let nf = if target == next_fresh { next_fresh + 1 } else { next_fresh };
            let r = self.free_points(p + 1, nf);
            self.phi[p] = None;
            r?;
        }
        ControlFlow::Continue(())
    }

    fn distribute(&mut self) -> ControlFlow<()> {
        let image: BTreeSet<usize> = self.phi.iter().flatten().copied().collect();
        let rest: Vec<usize> = (0..self.gside.atoms.len()).filter(|&i| !self.used[i]).collect();
        let mut uf = UnionFind::new(rest.len());
        let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
        for (k, &i) in rest.iter().enumerate() {
            for p in &self.gside.atoms[i].1 {
                if image.contains(p) {
                    continue;
                }
                match owner.get(p) {
                    Some(&j) => uf.union(j, k),
                    None => {
                        owner.insert(*p, k);
                    }
                }
            }
        }
        let mut comps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (k, &i) in rest.iter().enumerate() {
            comps.entry(uf.find(k)).or_default().push(i);
        }
        let mut choices: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for (_, members) in comps {
            let boundary: BTreeSet<usize> = members
                .iter()
                .flat_map(|&i| self.gside.atoms[i].1.iter().copied())
                .filter(|p| image.contains(p))
                .collect();
            let cands: Vec<usize> = (0..self.tctx.len())
                .filter(|&c| {
                    let reach: BTreeSet<usize> = self.tctx[c].points.iter().map(|p| self.phi[*p].unwrap()).collect();
                    boundary.is_subset(&reach)
                })
                .collect();
            if cands.is_empty() {
                return ControlFlow::Continue(());
            }
            choices.push((members, cands));
        }
        let mut pick = vec![0usize; choices.len()];
        loop {
            self.emit(&choices, &pick)?;
            let mut k = 0;
            loop {
                if k == pick.len() {
                    return ControlFlow::Continue(());
                }
                pick[k] += 1;
                if pick[k] < choices[k].1.len() {
                    break;
                }
                pick[k] = 0;
                k += 1;
            }
        }
    }

    fn emit(&mut self, choices: &[(Vec<usize>, Vec<usize>)], pick: &[usize]) -> ControlFlow<()> {
        let mut theta = Subst::default();
        for (c, ctx) in self.tctx.iter().enumerate() {
            let atoms: Vec<&(AtomName, Vec<usize>)> = choices
                .iter()
                .zip(pick)
                .filter(|((_, cands), &k)| cands[k] == c)
                .flat_map(|((members, _), _)| members.iter().map(|&i| &self.gside.atoms[i]))
                .collect();
            let fpts: Vec<usize> = ctx.points.iter().map(|p| self.phi[*p].unwrap()).collect();
            let graph = context_graph(&ctx.formals, &fpts, &atoms);
            theta.bindings.push((ctx.functor.clone(), Binding { graph, formals: ctx.formals.clone() }));
        }
        if self.found.iter().any(|s| s.equiv(&theta)) || !congruent(self.g, &apply(self.t, &theta)) {
            return ControlFlow::Continue(());
        }
        self.found.push(theta.clone());
        (self.sink)(&theta)
    }
}

/// Calls `sink` on every match in a deterministic order until it breaks.
pub fn for_each_match(g: &Graph, t: &Graph, sink: impl FnMut(&Subst) -> ControlFlow<()>) {
    let gc = normalize(g);
    let (tflat, _) = flatten(t);
    let tside = points(&tflat);
    let gside = points(&gc.atoms);
    if gc.free_names() != tflat_free(&tflat) {
        return;
    }
    let mut phi = vec![None; tside.count];
    for (n, &tp) in &tside.free {
        let gp = gside.free[n];
        match phi[tp] {
            Some(x) if x != gp => return,
            _ => phi[tp] = Some(gp),
        }
    }
    let mut tctx = Vec::new();
    let mut tcons = Vec::new();
    let mut written: Vec<&Atom> = Vec::new();
    t.for_each_atom(&mut |a| {
        if matches!(a.name, AtomName::Ctx(..)) {
            written.push(a);
        }
    });
    let mut written = written.into_iter();
    for (name, pts) in tside.atoms {
        match &name {
            AtomName::Ctx(x, _) => {
                let w = written.next().expect("context order");
                let functor = (x.clone(), pts.len());
                if tctx.iter().any(|c: &TCtx| c.functor.0 == functor.0) {
                    return;
                }
                tctx.push(TCtx { functor, formals: w.args.clone(), points: pts });
            }
            _ => tcons.push((name, pts)),
        }
    }
    let used = vec![false; gside.atoms.len()];
    let mut s = Search { g, t, gside, tcons, tctx, phi, used, found: Vec::new(), sink };
    let _ = s.cons(0);
}

fn tflat_free(atoms: &[CAtom]) -> BTreeSet<Name> {
    atoms
        .iter()
        .flat_map(|a| a.args.iter())
        .filter_map(|l| match l {
            CLink::Free(n) => Some(n.clone()),
            CLink::Local(_) => None,
        })
        .collect()
}

pub fn match_template(g: &Graph, t: &Graph) -> Vec<Subst> {
    let mut out = Vec::new();
    for_each_match(g, t, |s| {
        out.push(s.clone());
        ControlFlow::Continue(())
    });
    out
}

/// The first match whose annotated bindings all pass `check`.
pub fn match_checked_with(g: &Graph, t: &Graph, mut check: impl FnMut(&Graph, &TypeAtom) -> bool) -> Option<Subst> {
    let anns: BTreeMap<Name, Ann> = {
        let mut m = BTreeMap::new();
        t.for_each_atom(&mut |a| {
            if let AtomName::Ctx(x, Some(ann)) = &a.name {
                m.insert(x.clone(), ann.clone());
            }
        });
        m
    };
    let mut hit = None;
    for_each_match(g, t, |s| {
        let ok = s.bindings.iter().all(|((x, _), b)| match anns.get(x) {
            Some(ann) => check(&b.graph, &ann.type_atom(&b.formals)),
            None => true,
        });
        if ok {
            hit = Some(s.clone());
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    hit
}

/// The first match whose annotated bindings have their annotated types.
pub fn match_checked(g: &Graph, t: &Graph, checker: &Checker) -> Option<Subst> {
    match_checked_with(g, t, |b, ty| checker.check_graph(b, ty).is_ok_and(|v| v.accepted))
}

/// Canonical forms of the bindings, for comparing substitutions.
pub fn binding_canons(s: &Subst) -> Vec<(Functor, Canon)> {
    s.bindings.iter().map(|(f, b)| (f.clone(), normalize(&b.graph))).collect()
}

pub fn same_bindings(a: &[(Functor, Canon)], b: &[(Functor, Canon)]) -> bool {
    a.len() == b.len() && a.iter().all(|(f, c)| b.iter().any(|(g, d)| f == g && canon_congruent(c, d)))
}
