//! Surface syntax trees. Term-notation nesting is kept as written; `let`
//! is already desugared into an application of a link-less abstraction.

use crate::name::Name;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub rules: Vec<SRule>,
    pub main: Option<SExpr>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SRule {
    pub name: Name,
    pub links: Vec<Name>,
    pub rhs: SGraph,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SExpr {
    Graph(SGraph),
    Case(Box<SCase>),
    App(Box<SExpr>, Box<SExpr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SCase {
    pub scrutinee: SExpr,
    pub pattern: SGraph,
    pub then: SExpr,
    pub otherwise: SExpr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SGraph {
    Null,
    Fusion(Name, Name),
    Atom(SAtom),
    Mol(Vec<SGraph>),
    Nu(Vec<Name>, Box<SGraph>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SAtom {
    pub head: SHead,
    pub args: Vec<SArg>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SHead {
    Con(Name),
    /// A type variable atom; only produced inside rule right-hand sides.
    Ty(Name),
    /// An arrow atom inside a rule right-hand side.
    Arrow(Box<SType>, Box<SType>),
    Ctx(Name, Option<SType>),
    Lam(Box<SLambda>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SArg {
    Link(Name),
    Nested(SAtom),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SLambda {
    pub param: Name,
    pub links: Vec<Name>,
    pub ann: Option<SType>,
    pub body: SExpr,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SType {
    pub head: STypeHead,
    pub links: Vec<Name>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum STypeHead {
    Var(Name),
    Arrow(Box<SType>, Box<SType>),
}

/// A verification goal `T : τ(X…)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SGoal {
    pub template: SGraph,
    pub ty: SType,
}

impl SGraph {
    pub fn for_each_atom(&self, f: &mut impl FnMut(&SAtom)) {
        match self {
            SGraph::Null | SGraph::Fusion(..) => {}
            SGraph::Atom(a) => a.for_each(f),
            SGraph::Mol(gs) => gs.iter().for_each(|g| g.for_each_atom(f)),
            SGraph::Nu(_, g) => g.for_each_atom(f),
        }
    }
}

impl SAtom {
    pub fn for_each(&self, f: &mut impl FnMut(&SAtom)) {
        f(self);
        for a in &self.args {
            if let SArg::Nested(n) = a {
                n.for_each(f);
            }
        }
    }
}
