//! Prenex normal form for graphs and the congruence decision procedure.
//!
//! Fusions are read as hyperlink identification: every fusion class that
//! touches a local link or a non-fusion atom is collapsed onto one
//! representative, and a class made only of free links is kept as a star
//! of fusions from its least free name.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use crate::graph::{ann_alpha_eq, head_alpha_eq, lambda_alpha_eq, Atom, AtomName, Graph, TypeHead};
use crate::name::{fresh, Name};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CLink {
    Local(u32),
    Free(Name),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CAtom {
    pub name: AtomName,
    pub args: Vec<CLink>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Canon {
    pub atoms: Vec<CAtom>,
    pub locals: u32,
}

impl Canon {
    pub fn free_names(&self) -> BTreeSet<Name> {
        self.atoms
            .iter()
            .flat_map(|a| a.args.iter())
            .filter_map(|l| match l {
                CLink::Free(n) => Some(n.clone()),
                CLink::Local(_) => None,
            })
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Ordering key for atom names. Abstractions all share one key.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NameKey {
    Con(Name),
    Fusion,
    Ctx(Name),
    Ty(TypeHead),
    Lam,
}

pub fn name_key(n: &AtomName) -> NameKey {
    match n {
        AtomName::Con(c) => NameKey::Con(c.clone()),
        AtomName::Fusion => NameKey::Fusion,
        AtomName::Ctx(x, _) => NameKey::Ctx(x.clone()),
        AtomName::Ty(TypeHead::Var(t)) => NameKey::Ty(TypeHead::Var(t.clone())),
        // arrows compare modulo renaming, so their key must not see links
        AtomName::Ty(TypeHead::Arrow(_)) => NameKey::Ty(TypeHead::Var(Name::new("->"))),
        AtomName::Lam(_) => NameKey::Lam,
    }
}

/// Atom-name equality used by congruence.
pub fn atom_name_eq(a: &AtomName, b: &AtomName) -> bool {
    match (a, b) {
        (AtomName::Con(x), AtomName::Con(y)) => x == y,
        (AtomName::Fusion, AtomName::Fusion) => true,
        (AtomName::Lam(x), AtomName::Lam(y)) => std::sync::Arc::ptr_eq(x, y) || lambda_alpha_eq(x, y),
        (AtomName::Ctx(x, p), AtomName::Ctx(y, q)) => {
            x == y
                && match (p, q) {
                    (None, None) => true,
                    (Some(p), Some(q)) => ann_alpha_eq(p, q),
                    _ => false,
                }
        }
        (AtomName::Ty(x), AtomName::Ty(y)) => head_alpha_eq(x, y),
        _ => false,
    }
}

/// Flattens binders into numbered locals; no fusion processing.
pub fn flatten(g: &Graph) -> (Vec<CAtom>, u32) {
    fn go(g: &Graph, env: &mut Vec<(Name, u32)>, next: &mut u32, out: &mut Vec<CAtom>) {
        match g {
            Graph::Null => {}
            Graph::Atom(a) => out.push(CAtom {
                name: a.name.clone(),
                args: a
                    .args
                    .iter()
                    .map(|x| match env.iter().rev().find(|(n, _)| n == x) {
                        Some((_, i)) => CLink::Local(*i),
                        None => CLink::Free(x.clone()),
                    })
                    .collect(),
            }),
            Graph::Mol(l, r) => {
                go(l, env, next, out);
                go(r, env, next, out);
            }
            Graph::Nu(x, body) => {
                env.push((x.clone(), *next));
                *next += 1;
                go(body, env, next, out);
                env.pop();
            }
        }
    }
    let mut out = Vec::new();
    let mut next = 0;
    go(g, &mut Vec::new(), &mut next, &mut out);
    (out, next)
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = x;
        while self.parent[c] != r {
            let next = self.parent[c];
            self.parent[c] = r;
            c = next;
        }
        r
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

pub fn normalize(g: &Graph) -> Canon {
    let (atoms, _) = flatten(g);
    normalize_flat(atoms)
}

/// Normal form of already-flattened atoms.
pub fn normalize_flat(atoms: Vec<CAtom>) -> Canon {
    let mut ids: HashMap<CLink, usize> = HashMap::new();
    let mut links: Vec<CLink> = Vec::new();
    for a in &atoms {
        for l in &a.args {
            if !ids.contains_key(l) {
                ids.insert(l.clone(), links.len());
                links.push(l.clone());
            }
        }
    }
    let mut uf = UnionFind::new(links.len());
    let mut in_fusion = vec![false; links.len()];
    let mut used = vec![false; links.len()];
    for a in &atoms {
        if matches!(a.name, AtomName::Fusion) {
            let (x, y) = (ids[&a.args[0]], ids[&a.args[1]]);
            in_fusion[x] = true;
            in_fusion[y] = true;
            uf.union(x, y);
        } else {
            for l in &a.args {
                used[ids[l]] = true;
            }
        }
    }

    let mut classes: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..links.len() {
        if in_fusion[i] {
            let r = uf.find(i);
            classes.entry(r).or_default().push(i);
        }
    }
    let mut rep: Vec<CLink> = links.clone();
    let mut out: Vec<CAtom> = Vec::new();
    let mut class_list: Vec<_> = classes.into_values().collect();
    class_list.sort();
    for members in class_list {
        let mut frees: Vec<Name> = members
            .iter()
            .filter_map(|&i| match &links[i] {
                CLink::Free(n) => Some(n.clone()),
                CLink::Local(_) => None,
            })
            .collect();
        frees.sort();
        let is_used = members.iter().any(|&i| used[i]);
        let r = match frees.first() {
            Some(f) => CLink::Free(f.clone()),
            None => links[*members.iter().min_by_key(|&&i| &links[i]).unwrap()].clone(),
        };
        for &i in &members {
            rep[i] = r.clone();
        }
        if frees.len() >= 2 {
            for f in &frees[1..] {
                out.push(fusion(CLink::Free(frees[0].clone()), CLink::Free(f.clone())));
            }
        } else if frees.len() == 1 && !is_used {
            out.push(fusion(r.clone(), r.clone()));
        }
    }
    for a in atoms {
        if matches!(a.name, AtomName::Fusion) {
            continue;
        }
        let args = a.args.iter().map(|l| rep[ids[l]].clone()).collect();
        out.push(CAtom { name: a.name, args });
    }
    renumber(out)
}

fn fusion(a: CLink, b: CLink) -> CAtom {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    CAtom { name: AtomName::Fusion, args: vec![a, b] }
}

fn shape_cmp(a: &CAtom, b: &CAtom) -> Ordering {
    name_key(&a.name)
        .cmp(&name_key(&b.name))
        .then(a.args.len().cmp(&b.args.len()))
        .then_with(|| {
            for (x, y) in a.args.iter().zip(&b.args) {
                let o = match (x, y) {
                    (CLink::Local(_), CLink::Local(_)) => Ordering::Equal,
                    _ => x.cmp(y),
                };
                if o != Ordering::Equal {
                    return o;
                }
            }
            Ordering::Equal
        })
}

fn full_cmp(a: &CAtom, b: &CAtom) -> Ordering {
    name_key(&a.name)
        .cmp(&name_key(&b.name))
        .then(a.args.len().cmp(&b.args.len()))
        .then_with(|| a.args.cmp(&b.args))
}

/// Sorts atoms and renumbers locals densely by first occurrence.
fn renumber(mut atoms: Vec<CAtom>) -> Canon {
    atoms.sort_by(shape_cmp);
    let mut map: HashMap<u32, u32> = HashMap::new();
    for a in &mut atoms {
        for l in &mut a.args {
            if let CLink::Local(i) = l {
                let n = map.len() as u32;
                *i = *map.entry(*i).or_insert(n);
            }
        }
        if matches!(a.name, AtomName::Fusion) && a.args[0] > a.args[1] {
            a.args.swap(0, 1);
        }
    }
    atoms.sort_by(full_cmp);
    Canon { locals: map.len() as u32, atoms }
}

/// Rebuilds a graph term from a canonical form, naming locals freshly.
pub fn embed(c: &Canon) -> Graph {
    let names: Vec<Name> = (0..c.locals).map(|_| fresh()).collect();
    let atoms = c
        .atoms
        .iter()
        .map(|a| {
            Graph::Atom(Atom {
                name: a.name.clone(),
                args: a
                    .args
                    .iter()
                    .map(|l| match l {
                        CLink::Local(i) => names[*i as usize].clone(),
                        CLink::Free(n) => n.clone(),
                    })
                    .collect(),
            })
        })
        .collect();
    Graph::nu(names, Graph::mol(atoms))
}

pub fn congruent(a: &Graph, b: &Graph) -> bool {
    canon_congruent(&normalize(a), &normalize(b))
}

/// Searches for a bijection on locals that maps the atom multisets onto
/// each other while fixing free links.
pub fn canon_congruent(a: &Canon, b: &Canon) -> bool {
    if a.atoms.len() != b.atoms.len() || a.locals != b.locals {
        return false;
    }
    for (x, y) in a.atoms.iter().zip(&b.atoms) {
        if name_key(&x.name) != name_key(&y.name) || x.args.len() != y.args.len() {
            return false;
        }
    }
    let sig_a = signatures(a);
    let sig_b = signatures(b);
    let mut st = Search {
        a,
        b,
        sig_a,
        sig_b,
        fwd: vec![None; a.locals as usize],
        bwd: vec![None; b.locals as usize],
        used_b: vec![false; b.atoms.len()],
        done_a: vec![false; a.atoms.len()],
    };
    st.solve(a.atoms.len())
}

type Sig = Vec<(NameKey, usize, usize)>;

fn signatures(c: &Canon) -> Vec<Sig> {
    let mut sig: Vec<Sig> = vec![Vec::new(); c.locals as usize];
    for a in &c.atoms {
        let k = name_key(&a.name);
        let fus = matches!(a.name, AtomName::Fusion);
        for (p, l) in a.args.iter().enumerate() {
            if let CLink::Local(i) = l {
                sig[*i as usize].push((k.clone(), a.args.len(), if fus { 0 } else { p }));
            }
        }
    }
    for s in &mut sig {
        s.sort();
    }
    sig
}

struct Search<'a> {
    a: &'a Canon,
    b: &'a Canon,
    sig_a: Vec<Sig>,
    sig_b: Vec<Sig>,
    fwd: Vec<Option<u32>>,
    bwd: Vec<Option<u32>>,
    used_b: Vec<bool>,
    done_a: Vec<bool>,
}

impl Search<'_> {
    fn solve(&mut self, remaining: usize) -> bool {
        if remaining == 0 {
            return true;
        }
        let i = self.pick();
        self.done_a[i] = true;
        let atom = &self.a.atoms[i];
        let key = name_key(&atom.name);
        // equal keys occupy a contiguous range in both sorted atom lists
        for j in 0..self.b.atoms.len() {
            if self.used_b[j] {
                continue;
            }
            let cand = &self.b.atoms[j];
            if cand.args.len() != atom.args.len() || name_key(&cand.name) != key {
                continue;
            }
            if !atom_name_eq(&atom.name, &cand.name) {
                continue;
            }
            let orders: &[&[usize]] = if matches!(atom.name, AtomName::Fusion) {
                &[&[0, 1], &[1, 0]]
            } else {
                &[&[]]
            };
            for ord in orders {
                let mut trail = Vec::new();
                let ok = (0..atom.args.len()).all(|p| {
                    let q = if ord.is_empty() { p } else { ord[p] };
                    self.bind(&atom.args[p], &cand.args[q], &mut trail)
                });
                if ok {
                    self.used_b[j] = true;
                    if self.solve(remaining - 1) {
                        return true;
                    }
                    self.used_b[j] = false;
                }
                for x in trail {
                    let y = self.fwd[x as usize].take().unwrap();
                    self.bwd[y as usize] = None;
                }
            }
        }
        self.done_a[i] = false;
        false
    }

    /// The pending atom with the most already-determined arguments.
    fn pick(&self) -> usize {
        let mut best = usize::MAX;
        let mut best_score = i64::MIN;
        for (i, a) in self.a.atoms.iter().enumerate() {
            if self.done_a[i] {
                continue;
            }
            let fixed = a
                .args
                .iter()
                .filter(|l| match l {
                    CLink::Free(_) => true,
                    CLink::Local(k) => self.fwd[*k as usize].is_some(),
                })
                .count() as i64;
            let score = fixed * 2 - a.args.len() as i64 + if fixed > 0 { 100 } else { 0 };
            if score > best_score {
                best_score = score;
                best = i;
            }
        }
        best
    }

    fn bind(&mut self, x: &CLink, y: &CLink, trail: &mut Vec<u32>) -> bool {
        match (x, y) {
            (CLink::Free(p), CLink::Free(q)) => p == q,
            (CLink::Local(i), CLink::Local(j)) => match (self.fwd[*i as usize], self.bwd[*j as usize]) {
                (Some(j2), _) => j2 == *j,
                (None, Some(_)) => false,
                (None, None) => {
                    if self.sig_a[*i as usize] != self.sig_b[*j as usize] {
                        return false;
                    }
                    self.fwd[*i as usize] = Some(*j);
                    self.bwd[*j as usize] = Some(*i);
                    trail.push(*i);
                    true
                }
            },
            _ => false,
        }
    }
}
