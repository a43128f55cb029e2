//! Production rules, their well-formedness conditions, fusion elimination
//! and a bounded derivation oracle.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::canon::{embed, flatten, name_key, normalize_flat, CAtom, CLink, Canon, NameKey};
use crate::graph::{free_names, AtomName, Graph, TypeAtom, TypeHead};
use crate::name::Name;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub name: Name,
    pub links: Vec<Name>,
    pub rhs: Graph,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Grammar {
    pub rules: Vec<Rule>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub rule: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("fusion elimination left a fusion in a production of {rule}")]
    EliminationIncomplete { rule: String },
    #[error("type {0} has no production rules")]
    UnknownType(Name),
}

impl Rule {
    pub fn head(&self) -> String {
        let links: Vec<&str> = self.links.iter().map(|l| l.as_str()).collect();
        format!("{}({})", self.name, links.join(", "))
    }

    pub fn head_atom(&self) -> TypeAtom {
        TypeAtom::new(TypeHead::Var(self.name.clone()), self.links.clone())
    }

    pub fn has_fusion(&self) -> bool {
        let mut found = false;
        self.rhs.for_each_atom(&mut |a| found |= matches!(a.name, AtomName::Fusion));
        found
    }
}

impl Grammar {
    pub fn new(rules: Vec<Rule>) -> Self {
        Grammar { rules }
    }

    pub fn rules_for<'a>(&'a self, name: &'a Name) -> impl Iterator<Item = &'a Rule> + 'a {
        self.rules.iter().filter(move |r| &r.name == name)
    }

    pub fn arity(&self, name: &Name) -> Option<usize> {
        self.rules_for(name).next().map(|r| r.links.len())
    }

    pub fn defines(&self, name: &Name) -> bool {
        self.arity(name).is_some()
    }

    pub fn type_names(&self) -> Vec<Name> {
        let mut seen = Vec::new();
        for r in &self.rules {
            if !seen.contains(&r.name) {
                seen.push(r.name.clone());
            }
        }
        seen
    }

    /// Every rule-level and grammar-level well-formedness violation.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        for r in &self.rules {
            if let Err(v) = validate_rule(r) {
                out.extend(v);
            }
            if self.arity(&r.name) != Some(r.links.len()) {
                out.push(Violation { rule: r.head(), message: format!("type {} is used with two arities", r.name) });
            }
            r.rhs.for_each_atom(&mut |a| match &a.name {
                AtomName::Ty(TypeHead::Var(t)) => match self.arity(t) {
                    None => out.push(Violation { rule: r.head(), message: format!("type {t} is not defined") }),
                    Some(n) if n != a.args.len() => out.push(Violation {
                        rule: r.head(),
                        message: format!("type {t} has arity {n} but is used with {} links", a.args.len()),
                    }),
                    _ => {}
                },
                AtomName::Ctx(x, _) => out.push(Violation {
                    rule: r.head(),
                    message: format!("graph context ${x} in a production rule"),
                }),
                AtomName::Lam(_) => out.push(Violation {
                    rule: r.head(),
                    message: "abstraction atom in a production rule".into(),
                }),
                _ => {}
            });
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }
}

/// Free links of the right-hand side must be exactly the head links.
pub fn validate_rule(r: &Rule) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let head: BTreeSet<&Name> = r.links.iter().collect();
    if head.len() != r.links.len() {
        out.push(Violation { rule: r.head(), message: "head links are not distinct".into() });
    }
    let fns = free_names(&r.rhs);
    for l in &fns {
        if !head.contains(l) {
            out.push(Violation { rule: r.head(), message: format!("free link {l} not in head") });
        }
    }
    for l in &r.links {
        if !fns.contains(l) {
            out.push(Violation { rule: r.head(), message: format!("head link {l} does not occur in the body") });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Each body is either fusions only, or one constructor rooted at the
/// head's root link whose arguments hold the roots of all type atoms.
pub fn check_root_constraints(g: &Grammar) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    for r in &g.rules {
        let mut bad = |m: String| out.push(Violation { rule: r.head(), message: m });
        let Some(root) = r.links.last() else {
            bad("a type needs at least one link to serve as its root".into());
            continue;
        };
        let (atoms, _) = flatten(&r.rhs);
        let cons: Vec<&CAtom> = atoms.iter().filter(|a| matches!(a.name, AtomName::Con(_))).collect();
        let types: Vec<&CAtom> = atoms.iter().filter(|a| matches!(a.name, AtomName::Ty(_))).collect();
        let fusions = atoms.iter().filter(|a| matches!(a.name, AtomName::Fusion)).count();
        if cons.is_empty() {
            if !types.is_empty() || fusions == 0 {
                bad("a body without a constructor must consist of fusions only".into());
            }
            continue;
        }
        if cons.len() > 1 {
            bad(format!("{} constructor atoms; at most one is allowed", cons.len()));
            continue;
        }
        let c = cons[0];
        if c.args.last() != Some(&CLink::Free(root.clone())) {
            bad(format!("the constructor's root link must be the head's root link {root}"));
        }
        let mut roots = BTreeSet::new();
        for t in &types {
            match t.args.last() {
                None => bad("a type atom without links has no root".into()),
                Some(l) => {
                    if !c.args[..c.args.len() - 1].contains(l) {
                        bad("a type atom's root link must be an argument of the constructor".into());
                    }
                    if !roots.insert(l.clone()) {
                        bad("two type atoms share a root link".into());
                    }
                }
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// A rule body flattened once for repeated instantiation.
#[derive(Clone, Debug)]
pub struct FlatRule {
    pub name: Name,
    pub links: Vec<Name>,
    pub atoms: Vec<CAtom>,
    pub locals: u32,
}

impl FlatRule {
    pub fn new(r: &Rule) -> Self {
        let (atoms, locals) = flatten(&r.rhs);
        FlatRule { name: r.name.clone(), links: r.links.clone(), atoms, locals }
    }

    /// The body with head links replaced by `args` and locals shifted past
    /// `base`.
    pub fn instantiate(&self, args: &[CLink], base: u32) -> Vec<CAtom> {
        let map_link = |l: &CLink| match l {
            CLink::Local(i) => CLink::Local(base + i),
            CLink::Free(n) => {
                let j = self.links.iter().position(|x| x == n).expect("rule validated");
                args[j].clone()
            }
        };
        self.atoms
            .iter()
            .map(|a| CAtom {
                name: a.name.clone(),
                args: a.args.iter().map(map_link).collect(),
            })
            .collect()
    }
}

fn is_type_var(a: &CAtom) -> Option<&Name> {
    match &a.name {
        AtomName::Ty(TypeHead::Var(t)) => Some(t),
        _ => None,
    }
}

/// Variants of a fusion-free rule where every subset of its type atoms is
/// replaced by fusion productions of their types, normalized.
pub fn fusion_variants(rule: &FlatRule, fusion_rules: &BTreeMap<Name, Vec<FlatRule>>) -> Vec<Canon> {
    let slots: Vec<usize> = rule
        .atoms
        .iter()
        .enumerate()
        .filter(|(_, a)| is_type_var(a).is_some_and(|t| fusion_rules.contains_key(t)))
        .map(|(i, _)| i)
        .collect();
    let mut out: Vec<Canon> = Vec::new();
    // choice[k] = 0 keeps slot k, otherwise picks fusion rule choice[k]-1
    let mut choice = vec![0usize; slots.len()];
    loop {
        let mut atoms = Vec::new();
        let mut base = rule.locals;
        for (i, a) in rule.atoms.iter().enumerate() {
            match slots.iter().position(|&s| s == i) {
                Some(k) if choice[k] > 0 => {
                    let t = is_type_var(a).unwrap();
                    let fr = &fusion_rules[t][choice[k] - 1];
                    atoms.extend(fr.instantiate(&a.args, base));
                    base += fr.locals;
                }
                _ => atoms.push(a.clone()),
            }
        }
        let c = normalize_flat(atoms);
        if !out.iter().any(|o| crate::canon::canon_congruent(o, &c)) {
            out.push(c);
        }
        // next combination
        let mut k = 0;
        loop {
            if k == slots.len() {
                return out;
            }
            let t = is_type_var(&rule.atoms[slots[k]]).unwrap();
            if choice[k] < fusion_rules[t].len() {
                choice[k] += 1;
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

fn fusion_rule_map(g: &Grammar) -> BTreeMap<Name, Vec<FlatRule>> {
    let mut m: BTreeMap<Name, Vec<FlatRule>> = BTreeMap::new();
    for r in g.rules.iter().filter(|r| r.has_fusion()) {
        m.entry(r.name.clone()).or_default().push(FlatRule::new(r));
    }
    m
}

fn canon_rule(name: &Name, links: &[Name], c: &Canon) -> Rule {
    Rule { name: name.clone(), links: links.to_vec(), rhs: embed(c) }
}

pub fn alias_name(t: &Name) -> Name {
    Name::new(&format!("{t}_⋈"))
}

/// Rewrites the grammar so that fusions only occur in direct productions
/// of the start symbol, which is renamed to an alias when it has both
/// fusion and fusion-free productions.
pub fn eliminate_fusions(g: &Grammar, start: &TypeAtom) -> Result<(Grammar, TypeAtom), GrammarError> {
    let TypeHead::Var(start_name) = &start.head else {
        return Ok((g.clone(), start.clone()));
    };
    if !g.defines(start_name) {
        return Err(GrammarError::UnknownType(start_name.clone()));
    }
    let fusion_rules = fusion_rule_map(g);
    if fusion_rules.is_empty() {
        return Ok((g.clone(), start.clone()));
    }
    let mut derived: Vec<Rule> = Vec::new();
    for r in g.rules.iter().filter(|r| !r.has_fusion()) {
        let flat = FlatRule::new(r);
        for c in fusion_variants(&flat, &fusion_rules) {
            if c.atoms.iter().any(|a| matches!(a.name, AtomName::Fusion)) {
                return Err(GrammarError::EliminationIncomplete { rule: r.head() });
            }
            derived.push(canon_rule(&r.name, &r.links, &c));
        }
    }
    let start_has_fusion = fusion_rules.contains_key(start_name);
    let start_has_plain = derived.iter().any(|r| &r.name == start_name);
    let mut new_start = start.clone();
    if start_has_fusion {
        let alias = if start_has_plain { alias_name(start_name) } else { start_name.clone() };
        let mut extra = Vec::new();
        if start_has_plain {
            for r in derived.iter().filter(|r| &r.name == start_name) {
                extra.push(Rule { name: alias.clone(), ..r.clone() });
            }
        }
        for r in g.rules_for(start_name).filter(|r| r.has_fusion()) {
            extra.push(Rule { name: alias.clone(), ..r.clone() });
        }
        derived.extend(extra);
        new_start.head = TypeHead::Var(alias);
    }
    Ok((Grammar::new(derived), new_start))
}

// ---- derivation oracle ----

/// A set of canonical graphs compared modulo congruence.
#[derive(Clone, Debug, Default)]
pub struct CanonSet {
    buckets: HashMap<Vec<(NameKey, Vec<Option<Name>>)>, Vec<Canon>>,
    order: Vec<Canon>,
}

fn shape_key(c: &Canon) -> Vec<(NameKey, Vec<Option<Name>>)> {
    let mut k: Vec<_> = c
        .atoms
        .iter()
        .map(|a| {
            let mut args: Vec<Option<Name>> = a
                .args
                .iter()
                .map(|l| match l {
                    CLink::Free(n) => Some(n.clone()),
                    CLink::Local(_) => None,
                })
                .collect();
            if matches!(a.name, AtomName::Fusion) {
                args.sort();
            }
            (name_key(&a.name), args)
        })
        .collect();
    k.sort();
    k
}

impl CanonSet {
    pub fn new() -> Self {
        CanonSet::default()
    }

    /// Inserts `c` unless a congruent graph is present; reports insertion.
    pub fn insert(&mut self, c: Canon) -> bool {
        let bucket = self.buckets.entry(shape_key(&c)).or_default();
        if bucket.iter().any(|o| crate::canon::canon_congruent(o, &c)) {
            return false;
        }
        bucket.push(c.clone());
        self.order.push(c);
        true
    }

    pub fn contains(&self, c: &Canon) -> bool {
        self.buckets
            .get(&shape_key(c))
            .is_some_and(|b| b.iter().any(|o| crate::canon::canon_congruent(o, c)))
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Canon> {
        self.order.iter()
    }

    pub fn into_vec(self) -> Vec<Canon> {
        self.order
    }

    pub fn is_subset(&self, other: &CanonSet) -> bool {
        self.iter().all(|c| other.contains(c))
    }
}

fn start_canon(start: &TypeAtom) -> Canon {
    normalize_flat(vec![CAtom {
        name: AtomName::Ty(start.head.clone()),
        args: start.links.iter().map(|l| CLink::Free(l.clone())).collect(),
    }])
}

fn first_var(c: &Canon) -> Option<usize> {
    c.atoms.iter().position(|a| is_type_var(a).is_some())
}

fn expand_at(c: &Canon, i: usize, r: &FlatRule) -> Canon {
    let mut atoms: Vec<CAtom> = c.atoms.clone();
    let target = atoms.remove(i);
    atoms.extend(r.instantiate(&target.args, c.locals));
    normalize_flat(atoms)
}

struct Indexed {
    rules: BTreeMap<Name, Vec<FlatRule>>,
}

impl Indexed {
    fn new(g: &Grammar) -> Self {
        let mut rules: BTreeMap<Name, Vec<FlatRule>> = BTreeMap::new();
        for r in &g.rules {
            rules.entry(r.name.clone()).or_default().push(FlatRule::new(r));
        }
        Indexed { rules }
    }
}

/// Terminal graphs derivable from `start` in at most `depth` rule
/// applications, always expanding the first type atom.
pub fn generate(g: &Grammar, start: &TypeAtom, depth: usize) -> Vec<Canon> {
    generate_set(g, start, depth).into_vec()
}

pub fn generate_set(g: &Grammar, start: &TypeAtom, depth: usize) -> CanonSet {
    let idx = Indexed::new(g);
    let mut out = CanonSet::new();
    let mut seen = CanonSet::new();
    let mut frontier = vec![start_canon(start)];
    for _ in 0..depth {
        let mut next = Vec::new();
        for c in &frontier {
            let Some(i) = first_var(c) else { continue };
            let t = is_type_var(&c.atoms[i]).unwrap().clone();
            for r in idx.rules.get(&t).into_iter().flatten() {
                let d = expand_at(c, i, r);
                if !seen.insert(d.clone()) {
                    continue;
                }
                if first_var(&d).is_none() {
                    out.insert(d);
                } else {
                    next.push(d);
                }
            }
        }
        frontier = next;
    }
    out
}

fn count_cons(c: &Canon) -> usize {
    c.atoms.iter().filter(|a| matches!(a.name, AtomName::Con(_) | AtomName::Ty(TypeHead::Arrow(_)))).count()
}

/// Least number of constructor atoms any terminal derivation of each type
/// produces.
fn min_cons(idx: &Indexed) -> BTreeMap<Name, usize> {
    let mut m: BTreeMap<Name, usize> = BTreeMap::new();
    loop {
        let mut changed = false;
        for (t, rules) in &idx.rules {
            for r in rules {
                let mut total = 0usize;
                let mut ok = true;
                for a in &r.atoms {
                    match &a.name {
                        AtomName::Con(_) | AtomName::Ty(TypeHead::Arrow(_)) => total += 1,
                        AtomName::Ty(TypeHead::Var(u)) => match m.get(u) {
                            Some(k) => total += k,
                            None => ok = false,
                        },
                        _ => {}
                    }
                }
                if ok && m.get(t).is_none_or(|&k| total < k) {
                    m.insert(t.clone(), total);
                    changed = true;
                }
            }
        }
        if !changed {
            return m;
        }
    }
}

/// All terminal graphs of `start` with at most `max_cons` constructor
/// atoms (arrow placeholders count as constructors).
pub fn generate_bounded(g: &Grammar, start: &TypeAtom, max_cons: usize) -> CanonSet {
    let idx = Indexed::new(g);
    let mins = min_cons(&idx);
    let lower = |c: &Canon| -> Option<usize> {
        let mut n = count_cons(c);
        for a in &c.atoms {
            if let Some(t) = is_type_var(a) {
                n += *mins.get(t)?;
            }
        }
        Some(n)
    };
    let mut out = CanonSet::new();
    let mut seen = CanonSet::new();
    let mut stack = vec![start_canon(start)];
    while let Some(c) = stack.pop() {
        let Some(i) = first_var(&c) else { continue };
        let t = is_type_var(&c.atoms[i]).unwrap().clone();
        for r in idx.rules.get(&t).into_iter().flatten() {
            let d = expand_at(&c, i, r);
            match lower(&d) {
                Some(n) if n <= max_cons => {}
                _ => continue,
            }
            if !seen.insert(d.clone()) {
                continue;
            }
            if first_var(&d).is_none() {
                out.insert(d);
            } else {
                stack.push(d);
            }
        }
    }
    out
}

/// Membership by bounded generation up to the graph's own size.
pub fn derivable(g: &Grammar, start: &TypeAtom, graph: &Canon) -> bool {
    generate_bounded(g, start, count_cons(graph)).contains(graph)
}
