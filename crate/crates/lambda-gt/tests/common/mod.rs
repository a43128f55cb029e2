//! Generators and independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use lambda_gt::canon::{atom_name_eq, normalize, CLink};
use lambda_gt::eval::graph_substitute;
use lambda_gt::grammar::Grammar;
use lambda_gt::graph::{free_names, subst_links};
use lambda_gt::matcher::{Binding, Subst};
use lambda_gt::name::fresh;
use lambda_gt::syntax::{expand_rules, expand_term_notation, parse_template, parse_type_defs};
use lambda_gt::{congruent, Atom, AtomName, Expr, Graph, Name};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn corpus(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(rel)
}

pub fn read_corpus(rel: &str) -> String {
    std::fs::read_to_string(corpus(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn graph(s: &str) -> Graph {
    expand_term_notation(&parse_template(s).unwrap_or_else(|e| panic!("{s}: {e}")))
}

pub fn grammar(src: &str) -> Grammar {
    expand_rules(&parse_type_defs(src).unwrap())
}

pub fn n(s: &str) -> Name {
    Name::new(s)
}

// ---- random graphs ----

const LINKS: [&str; 6] = ["X", "Y", "Z", "L", "M", "N"];
const CONS: [(&str, usize); 6] = [("a", 0), ("p", 1), ("q", 1), ("f", 2), ("g", 2), ("h", 3)];

fn random_atom(rng: &mut impl Rng, fusion_weight: f64) -> Atom {
    let link = |rng: &mut dyn rand::RngCore| n(LINKS[rng.gen_range(0..LINKS.len())]);
    if rng.gen_bool(fusion_weight) {
        return Atom::new(AtomName::Fusion, vec![link(rng), link(rng)]);
    }
    let (c, k) = CONS[rng.gen_range(0..CONS.len())];
    Atom::new(AtomName::Con(n(c)), (0..k).map(|_| link(rng)).collect())
}

/// A random term with at most `budget` atoms over six link names, with
/// arbitrary nesting, ν-binders (including shadowing and unused ones),
/// null graphs and fusions.
pub fn random_graph(rng: &mut impl Rng, budget: usize) -> Graph {
    let k = rng.gen_range(0..=budget);
    build(rng, k)
}

fn build(rng: &mut impl Rng, atoms: usize) -> Graph {
    match atoms {
        0 => match rng.gen_range(0..4) {
            0 => Graph::Nu(n(LINKS[rng.gen_range(0..6)]), Box::new(Graph::Null)),
            _ => Graph::Null,
        },
        _ => match rng.gen_range(0..10) {
            0..=2 if atoms == 1 => Graph::Atom(random_atom(rng, 0.25)),
            0..=4 => {
                let left = rng.gen_range(0..=atoms);
                Graph::Mol(Box::new(build(rng, left)), Box::new(build(rng, atoms - left)))
            }
            5..=7 => {
                let x = n(LINKS[rng.gen_range(3..6)]);
                Graph::Nu(x, Box::new(build(rng, atoms)))
            }
            _ if atoms == 1 => Graph::Atom(random_atom(rng, 0.25)),
            _ => {
                let x = n(LINKS[rng.gen_range(0..6)]);
                Graph::Nu(x, Box::new(build(rng, atoms)))
            }
        },
    }
}

// ---- single applications of the congruence rules ----

fn at_mut<'a>(g: &'a mut Graph, path: &[usize]) -> &'a mut Graph {
    match path.split_first() {
        None => g,
        Some((&i, rest)) => match g {
            Graph::Mol(a, b) => at_mut(if i == 0 { a } else { b }, rest),
            Graph::Nu(_, b) => at_mut(b, rest),
            _ => unreachable!("bad path"),
        },
    }
}

fn positions(g: &Graph, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    out.push(path.clone());
    match g {
        Graph::Mol(a, b) => {
            for (i, s) in [a, b].into_iter().enumerate() {
                path.push(i);
                positions(s, path, out);
                path.pop();
            }
        }
        Graph::Nu(_, b) => {
            path.push(0);
            positions(b, path, out);
            path.pop();
        }
        _ => {}
    }
}

fn binds(g: &Graph, x: &Name) -> bool {
    match g {
        Graph::Nu(y, b) => y == x || binds(b, x),
        Graph::Mol(a, b) => binds(a, x) || binds(b, x),
        _ => false,
    }
}

/// Renames a random non-empty subset of the free occurrences of `y` to
/// `x`. Returns `None` when binders would interfere.
fn split_occurrences(g: &Graph, y: &Name, x: &Name, rng: &mut impl Rng) -> Option<Graph> {
    if binds(g, x) || binds(g, y) {
        return None;
    }
    let mut hit = false;
    let out = g.map_atoms(&mut |a| {
        let args = a
            .args
            .iter()
            .map(|l| {
                if l == y && rng.gen_bool(0.5) {
                    hit = true;
                    x.clone()
                } else {
                    l.clone()
                }
            })
            .collect();
        Graph::Atom(Atom::new(a.name.clone(), args))
    });
    hit.then_some(out)
}

/// Candidate rewrites at the root of `g`, each labelled with its rule.
fn root_rewrites(g: &Graph, rng: &mut impl Rng) -> Vec<(&'static str, Graph)> {
    let mut out = vec![("E1'", Graph::Mol(Box::new(Graph::Null), Box::new(g.clone())))];
    if matches!(g, Graph::Null) {
        let (x, y) = (n("M"), n("N"));
        out.push((
            "E7'",
            Graph::Nu(x.clone(), Box::new(Graph::Nu(y.clone(), Box::new(Graph::Atom(Atom::new(AtomName::Fusion, vec![x, y])))))),
        ));
        out.push(("E8'", Graph::Nu(n(LINKS[rng.gen_range(0..6)]), Box::new(Graph::Null))));
    }
    match g {
        Graph::Mol(a, b) => {
            if matches!(**a, Graph::Null) {
                out.push(("E1", (**b).clone()));
            }
            out.push(("E2", Graph::Mol(b.clone(), a.clone())));
            if let Graph::Mol(b1, b2) = &**b {
                out.push(("E3", Graph::Mol(Box::new(Graph::Mol(a.clone(), b1.clone())), b2.clone())));
            }
            if let Graph::Mol(a1, a2) = &**a {
                out.push(("E3'", Graph::Mol(a1.clone(), Box::new(Graph::Mol(a2.clone(), b.clone())))));
            }
            if let Graph::Nu(x, a1) = &**a {
                if !free_names(b).contains(x) {
                    out.push(("E10'", Graph::Nu(x.clone(), Box::new(Graph::Mol(a1.clone(), b.clone())))));
                }
            }
        }
        Graph::Nu(x, body) => {
            match &**body {
                Graph::Null => out.push(("E8", Graph::Null)),
                Graph::Nu(y, inner) => {
                    out.push(("E9", Graph::Nu(y.clone(), Box::new(Graph::Nu(x.clone(), inner.clone())))));
                    if let Graph::Atom(a) = &**inner {
                        if matches!(a.name, AtomName::Fusion) && a.args == [x.clone(), y.clone()] && x != y {
                            out.push(("E7", Graph::Null));
                        }
                    }
                }
                Graph::Mol(g1, g2) => {
                    if !free_names(g2).contains(x) {
                        out.push(("E10", Graph::Mol(Box::new(Graph::Nu(x.clone(), g1.clone())), g2.clone())));
                    }
                    if let Graph::Atom(f) = &**g1 {
                        if matches!(f.name, AtomName::Fusion) && f.args[0] == *x {
                            let y = &f.args[1];
                            let fv = free_names(g2);
                            if fv.contains(x) || fv.contains(y) {
                                if let Ok(r) = subst_links(g2, &[(x.clone(), y.clone())]) {
                                    out.push(("E6", Graph::Nu(x.clone(), Box::new(r))));
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
            // Absorption read backwards: split some occurrences of a free
            // link off onto the bound one and fuse them.
            let fv = free_names(body);
            if !fv.contains(x) {
                let ys: Vec<Name> = fv.into_iter().collect();
                if let Some(y) = ys.choose(rng) {
                    if let Some(split) = split_occurrences(body, y, x, rng) {
                        let fusion = Graph::Atom(Atom::new(AtomName::Fusion, vec![x.clone(), y.clone()]));
                        out.push(("E6'", Graph::Nu(x.clone(), Box::new(Graph::Mol(Box::new(fusion), Box::new(split))))));
                    }
                }
            }
        }
        _ => {}
    }
    out
}

/// Applies one congruence rule instance at a random position. The rule
/// is drawn uniformly from those applicable somewhere in `g`; a trailing
/// `'` marks the right-to-left direction.
pub fn rewrite_once(g: &Graph, rng: &mut impl Rng) -> (&'static str, Graph) {
    let mut ps = Vec::new();
    positions(g, &mut Vec::new(), &mut ps);
    let mut by_rule: BTreeMap<&'static str, Vec<(usize, Graph)>> = BTreeMap::new();
    for (i, p) in ps.iter().enumerate() {
        let mut probe = g.clone();
        for (rule, r) in root_rewrites(at_mut(&mut probe, p), rng) {
            by_rule.entry(rule).or_default().push((i, r));
        }
    }
    let rules: Vec<&'static str> = by_rule.keys().copied().collect();
    let rule = *rules.choose(rng).unwrap();
    let (i, r) = by_rule[rule].choose(rng).unwrap().clone();
    let mut out = g.clone();
    *at_mut(&mut out, &ps[i]) = r;
    (rule, out)
}

// ---- brute-force matching oracle ----

/// Atoms over points, fusions dissolved with a plain union-find.
struct Pts {
    atoms: Vec<(AtomName, Vec<usize>)>,
    count: usize,
    free: BTreeMap<Name, usize>,
}

fn to_points(g: &Graph) -> Pts {
    let c = normalize(g);
    let mut ids: BTreeMap<CLink, usize> = BTreeMap::new();
    for a in &c.atoms {
        for l in &a.args {
            let k = ids.len();
            ids.entry(l.clone()).or_insert(k);
        }
    }
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        if p[i] == i {
            i
        } else {
            let r = find(p, p[i]);
            p[i] = r;
            r
        }
    }
    for a in c.atoms.iter().filter(|a| matches!(a.name, AtomName::Fusion)) {
        let (x, y) = (find(&mut parent, ids[&a.args[0]]), find(&mut parent, ids[&a.args[1]]));
        parent[x] = y;
    }
    let mut renum: BTreeMap<usize, usize> = BTreeMap::new();
    let mut pt = |l: &CLink, parent: &mut Vec<usize>| {
        let r = find(parent, ids[l]);
        let k = renum.len();
        *renum.entry(r).or_insert(k)
    };
    let mut atoms = Vec::new();
    for a in c.atoms.iter().filter(|a| !matches!(a.name, AtomName::Fusion)) {
        let ps = a.args.iter().map(|l| pt(l, &mut parent)).collect();
        atoms.push((a.name.clone(), ps));
    }
    let mut free = BTreeMap::new();
    for l in ids.keys().cloned().collect::<Vec<_>>() {
        let p = pt(&l, &mut parent);
        if let CLink::Free(x) = l {
            free.insert(x, p);
        }
    }
    Pts { atoms, count: renum.len(), free }
}

struct Oracle<'a> {
    t: &'a Graph,
    gp: Pts,
    tcons: Vec<(AtomName, Vec<usize>)>,
    tctx: Vec<(Name, Vec<usize>)>,
    tcount: usize,
    phi: Vec<Option<usize>>,
    used: Vec<bool>,
    g: &'a Graph,
    out: Vec<Subst>,
}

/// Every substitution θ with g ≡ tθ, found by exhaustive enumeration of
/// constructor placements, point placements and atom partitions.
pub fn oracle_matches(g: &Graph, t: &Graph) -> Vec<Subst> {
    let gp = to_points(g);
    let tp = to_points(t);
    let mut tcons = Vec::new();
    let mut tctx = Vec::new();
    for (name, ps) in tp.atoms {
        match name {
            AtomName::Ctx(x, _) => tctx.push((x, ps)),
            other => tcons.push((other, ps)),
        }
    }
    let mut phi = vec![None; tp.count];
    for (x, p) in &tp.free {
        match gp.free.get(x) {
            Some(q) => {
                if phi[*p].is_some_and(|r| r != *q) {
                    return Vec::new();
                }
                phi[*p] = Some(*q);
            }
            None => return Vec::new(),
        }
    }
    let used = vec![false; gp.atoms.len()];
    let mut o = Oracle { t, gp, tcons, tctx, tcount: tp.count, phi, used, g, out: Vec::new() };
    o.place_cons(0);
    o.out
}

impl Oracle<'_> {
    fn place_cons(&mut self, k: usize) {
        if k == self.tcons.len() {
            let nf = self.gp.count;
            return self.place_points(0, nf);
        }
        for gi in 0..self.gp.atoms.len() {
            if self.used[gi] || !atom_name_eq(&self.tcons[k].0, &self.gp.atoms[gi].0) {
                continue;
            }
            if self.tcons[k].1.len() != self.gp.atoms[gi].1.len() {
                continue;
            }
            let saved = self.phi.clone();
            let ok = self.tcons[k].1.clone().into_iter().zip(self.gp.atoms[gi].1.clone()).all(|(tp, gq)| {
                match self.phi[tp] {
                    Some(q) => q == gq,
                    None => {
                        self.phi[tp] = Some(gq);
                        true
                    }
                }
            });
            if ok {
                self.used[gi] = true;
                self.place_cons(k + 1);
                self.used[gi] = false;
            }
            self.phi = saved;
        }
    }

    fn place_points(&mut self, p: usize, next_fresh: usize) {
        if p == self.tcount {
            let rest: Vec<usize> = (0..self.gp.atoms.len()).filter(|&i| !self.used[i]).collect();
            let mut owner = vec![0; rest.len()];
            return self.partition(&rest, 0, &mut owner);
        }
        if self.phi[p].is_some() {
            return self.place_points(p + 1, next_fresh);
        }
        for q in 0..=next_fresh {
            self.phi[p] = Some(q);
            self.place_points(p + 1, if q == next_fresh { next_fresh + 1 } else { next_fresh });
        }
        self.phi[p] = None;
    }

    fn partition(&mut self, rest: &[usize], i: usize, owner: &mut Vec<usize>) {
        if i == rest.len() {
            return self.try_candidate(rest, owner);
        }
        for c in 0..self.tctx.len() {
            owner[i] = c;
            self.partition(rest, i + 1, owner);
        }
    }

    fn try_candidate(&mut self, rest: &[usize], owner: &[usize]) {
        // A point a context uses without exposing it becomes local to
        // that context, so nothing else may touch it.
        let phi: Vec<usize> = self.phi.iter().map(|p| p.unwrap()).collect();
        let mut touched: BTreeMap<usize, BTreeSet<Option<usize>>> = BTreeMap::new();
        for (gi, a) in self.gp.atoms.iter().enumerate() {
            let who = rest.iter().position(|&r| r == gi).map(|k| owner[k]);
            for p in &a.1 {
                touched.entry(*p).or_default().insert(who);
            }
        }
        let exposed: Vec<BTreeSet<usize>> = self.tctx.iter().map(|(_, ps)| ps.iter().map(|p| phi[*p]).collect()).collect();
        let free_pts: BTreeSet<usize> = self.gp.free.values().copied().collect();
        let template_pts: BTreeSet<usize> = self.tcons.iter().flat_map(|(_, ps)| ps.iter().map(|p| phi[*p])).collect();
        for (p, who) in &touched {
            for c in who.iter().flatten() {
                if exposed[*c].contains(p) {
                    continue;
                }
                let others = who.len() > 1
                    || free_pts.contains(p)
                    || template_pts.contains(p)
                    || exposed.iter().enumerate().any(|(d, e)| d != *c && e.contains(p));
                if others {
                    return;
                }
            }
        }
        let mut theta = Subst::default();
        for (c, (x, ps)) in self.tctx.iter().enumerate() {
            let formals: Vec<Name> = ps.iter().map(|_| fresh()).collect();
            let mut named: BTreeMap<usize, Name> = BTreeMap::new();
            let mut parts = Vec::new();
            for (f, p) in formals.iter().zip(ps) {
                match named.get(&phi[*p]) {
                    Some(first) => parts.push(Graph::Atom(Atom::new(AtomName::Fusion, vec![first.clone(), f.clone()]))),
                    None => {
                        named.insert(phi[*p], f.clone());
                    }
                }
            }
            let mine: Vec<&(AtomName, Vec<usize>)> =
                rest.iter().zip(owner).filter(|(_, o)| **o == c).map(|(&gi, _)| &self.gp.atoms[gi]).collect();
            let used_pts: BTreeSet<usize> = mine.iter().flat_map(|(_, ps)| ps.iter().copied()).collect();
            for (f, p) in formals.iter().zip(ps) {
                let shared = ps.iter().filter(|q| phi[**q] == phi[*p]).count() > 1;
                if !shared && !used_pts.contains(&phi[*p]) {
                    parts.push(Graph::Atom(Atom::new(AtomName::Fusion, vec![f.clone(), f.clone()])));
                }
            }
            let mut locals = Vec::new();
            for (name, ps) in &mine {
                let args = ps
                    .iter()
                    .map(|p| {
                        named
                            .entry(*p)
                            .or_insert_with(|| {
                                let l = fresh();
                                locals.push(l.clone());
                                l
                            })
                            .clone()
                    })
                    .collect();
                parts.push(Graph::Atom(Atom::new(name.clone(), args)));
            }
            let graph = Graph::nu(locals, Graph::mol(parts));
            theta.bindings.push(((x.clone(), ps.len()), Binding { graph, formals }));
        }
        let mut e = Expr::Graph(self.t.clone());
        for ((x, _), b) in &theta.bindings {
            e = graph_substitute(&e, &b.graph, x, &b.formals);
        }
        let Expr::Graph(applied) = e else { unreachable!() };
        if congruent(self.g, &applied) && !self.out.iter().any(|s| s.equiv(&theta)) {
            self.out.push(theta);
        }
    }
}

// ---- random matching problems ----

/// A random value graph with no free-free fusions, at most `budget` atoms.
pub fn random_value(rng: &mut impl Rng, budget: usize) -> Graph {
    loop {
        let g = random_graph(rng, budget);
        let c = normalize(&g);
        if c.atoms.len() <= budget && c.atoms.iter().all(|a| !matches!(a.name, AtomName::Fusion)) {
            return g;
        }
    }
}

/// A template obtained by abstracting parts of `g` into at most two
/// contexts, sometimes perturbed so that it no longer matches.
pub fn random_template(rng: &mut impl Rng, g: &Graph) -> Graph {
    let c = normalize(g);
    let k = rng.gen_range(0..=2usize);
    let owner: Vec<Option<usize>> =
        c.atoms.iter().map(|_| if k > 0 && rng.gen_bool(0.6) { Some(rng.gen_range(0..k)) } else { None }).collect();
    let name = |l: &CLink| match l {
        CLink::Free(x) => x.clone(),
        CLink::Local(i) => n(&format!("L{i}")),
    };
    let mut atoms: Vec<Atom> = Vec::new();
    for (a, o) in c.atoms.iter().zip(&owner) {
        if o.is_none() {
            atoms.push(Atom::new(a.name.clone(), a.args.iter().map(name).collect()));
        }
    }
    for ctx in 0..k {
        let mut inside: BTreeSet<CLink> = BTreeSet::new();
        let mut outside: BTreeSet<CLink> = BTreeSet::new();
        for (a, o) in c.atoms.iter().zip(&owner) {
            let set = if *o == Some(ctx) { &mut inside } else { &mut outside };
            set.extend(a.args.iter().cloned());
        }
        let mut formals: Vec<Name> = inside
            .iter()
            .filter(|l| matches!(l, CLink::Free(_)) || outside.contains(*l))
            .map(name)
            .collect();
        if rng.gen_bool(0.3) {
            let extra = if rng.gen_bool(0.5) || c.locals == 0 {
                n("E")
            } else {
                n(&format!("L{}", rng.gen_range(0..c.locals)))
            };
            if !formals.contains(&extra) {
                formals.push(extra);
            }
        }
        formals.shuffle(rng);
        formals.truncate(4);
        atoms.push(Atom::new(AtomName::Ctx(n(&format!("c{ctx}")), None), formals));
    }
    if rng.gen_bool(0.3) {
        perturb(rng, &mut atoms);
    }
    let mut locals: BTreeSet<Name> = (0..c.locals).map(|i| n(&format!("L{i}"))).collect();
    locals.insert(n("E"));
    let used: BTreeSet<Name> = atoms.iter().flat_map(|a| a.args.iter().cloned()).collect();
    let locals = locals.into_iter().filter(|l| used.contains(l)).collect();
    Graph::nu(locals, Graph::mol(atoms.into_iter().map(Graph::Atom).collect()))
}

fn perturb(rng: &mut impl Rng, atoms: &mut [Atom]) {
    let Some(a) = atoms.choose_mut(rng) else { return };
    let is_ctx = matches!(a.name, AtomName::Ctx(..));
    match rng.gen_range(0..3) {
        0 if a.args.len() >= 2 => {
            let i = rng.gen_range(0..a.args.len());
            let j = rng.gen_range(0..a.args.len());
            a.args.swap(i, j);
        }
        1 if !is_ctx => {
            let (c, k) = CONS[rng.gen_range(0..CONS.len())];
            if k == a.args.len() {
                a.name = AtomName::Con(n(c));
            }
        }
        _ if !a.args.is_empty() => {
            let i = rng.gen_range(0..a.args.len());
            let l = n(LINKS[rng.gen_range(0..6)]);
            if !is_ctx || !a.args.contains(&l) {
                a.args[i] = l;
            }
        }
        _ => {}
    }
}

/// Both lists contain the same substitutions up to renaming of formals
/// and congruence of bindings.
pub fn same_subst_sets(a: &[Subst], b: &[Subst]) -> bool {
    a.len() == b.len() && a.iter().all(|s| b.iter().any(|t| s.equiv(t))) && b.iter().all(|t| a.iter().any(|s| s.equiv(t)))
}
