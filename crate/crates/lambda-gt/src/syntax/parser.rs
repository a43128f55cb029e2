use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::ParseError;
use crate::name::Name;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Expr,
    Pattern,
    Rule,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn new(src: &str) -> PResult<Self> {
        Ok(Parser { toks: lex(src)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(ParseError::new(t.line, t.col, msg))
    }

    fn err_at<T>(&self, pos: usize, msg: impl Into<String>) -> PResult<T> {
        let t = &self.toks[pos];
        Err(ParseError::new(t.line, t.col, msg))
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {t}, found {}", self.peek()))
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn upper(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Upper(s) => {
                self.bump();
                Ok(Name::new(&s))
            }
            t => self.err(format!("expected a link name, found {t}")),
        }
    }

    /// `A, B, C` up to the closing token, which is consumed.
    fn links_until(&mut self, close: Tok) -> PResult<Vec<Name>> {
        let mut out = Vec::new();
        if self.eat(&close) {
            return Ok(out);
        }
        loop {
            out.push(self.upper()?);
            if self.eat(&close) {
                return Ok(out);
            }
            self.expect(Tok::Comma)?;
        }
    }

    /// True when the tokens ahead read `( UPPER, … )`.
    fn at_link_list(&self) -> bool {
        if *self.peek() != Tok::LParen {
            return false;
        }
        let mut k = 1;
        if *self.peek_at(k) == Tok::RParen {
            return true;
        }
        loop {
            if !matches!(self.peek_at(k), Tok::Upper(_)) {
                return false;
            }
            k += 1;
            match self.peek_at(k) {
                Tok::RParen => return true,
                Tok::Comma => k += 1,
                _ => return false,
            }
        }
    }

    // ---- types ----

    fn ty(&mut self) -> PResult<SType> {
        match self.peek().clone() {
            Tok::Lower(s) => {
                self.bump();
                let links = if self.at_link_list() {
                    self.bump();
                    self.links_until(Tok::RParen)?
                } else {
                    Vec::new()
                };
                Ok(SType { head: STypeHead::Var(Name::new(&s)), links })
            }
            Tok::LParen => {
                self.bump();
                let mut parts = vec![self.ty()?];
                while self.eat(&Tok::Arrow) {
                    parts.push(self.ty()?);
                }
                if parts.len() < 2 {
                    return self.err("expected `->` in an arrow type");
                }
                self.expect(Tok::RParen)?;
                let links = if self.at_link_list() {
                    self.bump();
                    self.links_until(Tok::RParen)?
                } else {
                    Vec::new()
                };
                let mut it = parts.into_iter().rev();
                let mut cod = it.next().unwrap();
                let mut dom = it.next().unwrap();
                for next in it {
                    cod = SType {
                        head: STypeHead::Arrow(Box::new(dom), Box::new(cod)),
                        links: links.clone(),
                    };
                    dom = next;
                }
                Ok(SType { head: STypeHead::Arrow(Box::new(dom), Box::new(cod)), links })
            }
            t => self.err(format!("expected a type, found {t}")),
        }
    }

    // ---- graphs ----

    fn graph(&mut self, mode: Mode) -> PResult<SGraph> {
        let first = self.gprimary(mode)?;
        if *self.peek() != Tok::Comma {
            return Ok(first);
        }
        let mut parts = vec![first];
        while self.eat(&Tok::Comma) {
            parts.push(self.gprimary(mode)?);
        }
        Ok(SGraph::Mol(parts))
    }

    fn gprimary(&mut self, mode: Mode) -> PResult<SGraph> {
        match self.peek().clone() {
            Tok::LParen => {
                if *self.peek_at(1) == Tok::RParen {
                    self.bump();
                    self.bump();
                    return Ok(SGraph::Null);
                }
                if *self.peek_at(1) == Tok::Backslash {
                    return Ok(SGraph::Atom(self.lambda_atom(mode)?));
                }
                if mode == Mode::Rule {
                    if let Some(a) = self.try_arrow_atom()? {
                        return Ok(SGraph::Atom(a));
                    }
                }
                self.bump();
                let g = self.graph(mode)?;
                self.expect(Tok::RParen)?;
                Ok(g)
            }
            Tok::Nu => {
                self.bump();
                let mut names = vec![self.upper()?];
                while matches!(self.peek(), Tok::Upper(_)) {
                    names.push(self.upper()?);
                }
                self.expect(Tok::Dot)?;
                let body = self.gprimary(mode)?;
                Ok(SGraph::Nu(names, Box::new(body)))
            }
            Tok::Upper(_) => {
                let x = self.upper()?;
                self.expect(Tok::Bowtie)?;
                let y = self.upper()?;
                Ok(SGraph::Fusion(x, y))
            }
            Tok::Lower(_) | Tok::Ctx(_) => Ok(SGraph::Atom(self.atom(mode)?)),
            t => self.err(format!("expected a graph, found {t}")),
        }
    }

    /// Tries `(t -> t)(Z…)`; restores the position when it is not one.
    fn try_arrow_atom(&mut self) -> PResult<Option<SAtom>> {
        let save = self.pos;
        match self.ty() {
            Ok(SType { head: STypeHead::Arrow(d, c), links }) => Ok(Some(SAtom {
                head: SHead::Arrow(d, c),
                args: links.into_iter().map(SArg::Link).collect(),
            })),
            _ => {
                self.pos = save;
                Ok(None)
            }
        }
    }

    fn atom(&mut self, mode: Mode) -> PResult<SAtom> {
        let start = self.pos;
        match self.bump() {
            Tok::Lower(s) => {
                let args = if self.eat(&Tok::LParen) { self.args(Tok::RParen, mode)? } else { Vec::new() };
                Ok(SAtom { head: SHead::Con(Name::new(&s)), args })
            }
            Tok::Ctx(s) => {
                let args = if self.eat(&Tok::LBrack) { self.args(Tok::RBrack, mode)? } else { Vec::new() };
                let mut seen = BTreeSet::new();
                for a in &args {
                    if let SArg::Link(l) = a {
                        if !seen.insert(l.clone()) {
                            return self.err_at(start, format!("link {l} occurs twice in context ${s}"));
                        }
                    }
                }
                let ann = if self.eat(&Tok::Colon) { Some(self.ty()?) } else { None };
                if let Some(t) = &ann {
                    let mut written = Vec::new();
                    for a in &args {
                        match a {
                            SArg::Link(l) => written.push(l.clone()),
                            SArg::Nested(_) => {
                                return self.err_at(start, "annotated contexts cannot have nested arguments")
                            }
                        }
                    }
                    if !is_permutation(&t.links, &written) {
                        return self.err_at(start, format!("the annotation of ${s} must use exactly its links"));
                    }
                }
                Ok(SAtom { head: SHead::Ctx(Name::new(&s), ann), args })
            }
            _ => self.err_at(start, "expected an atom"),
        }
    }

    fn args(&mut self, close: Tok, mode: Mode) -> PResult<Vec<SArg>> {
        let mut out = Vec::new();
        if self.eat(&close) {
            return Ok(out);
        }
        loop {
            let arg = match self.peek().clone() {
                Tok::Upper(_) => SArg::Link(self.upper()?),
                Tok::Lower(_) | Tok::Ctx(_) => SArg::Nested(self.atom(mode)?),
                Tok::LParen if *self.peek_at(1) == Tok::Backslash => {
                    SArg::Nested(self.lambda_atom(mode)?)
                }
                Tok::LParen if mode == Mode::Rule => match self.try_arrow_atom()? {
                    Some(a) => SArg::Nested(a),
                    None => return self.err("expected an argument"),
                },
                t => return self.err(format!("expected an argument, found {t}")),
            };
            out.push(arg);
            if self.eat(&close) {
                return Ok(out);
            }
            self.expect(Tok::Comma)?;
        }
    }

    /// `(\ $x[X]:τ $y[Y]. e)(Z…)`.
    fn lambda_atom(&mut self, mode: Mode) -> PResult<SAtom> {
        if mode == Mode::Pattern {
            return self.err("abstraction atoms are not allowed in case patterns");
        }
        if mode == Mode::Rule {
            return self.err("abstraction atoms are not allowed in production rules");
        }
        self.expect(Tok::LParen)?;
        self.expect(Tok::Backslash)?;
        let mut params = Vec::new();
        while let Tok::Ctx(_) = self.peek() {
            params.push(self.param()?);
        }
        if params.is_empty() {
            return self.err("expected a parameter `$x[...]`");
        }
        self.expect(Tok::Dot)?;
        let body = self.expr()?;
        self.expect(Tok::RParen)?;
        let args: Vec<SArg> = if self.at_link_list() {
            self.bump();
            self.links_until(Tok::RParen)?.into_iter().map(SArg::Link).collect()
        } else {
            Vec::new()
        };
        let mut body = body;
        let mut it = params.into_iter().rev();
        let (p, l, a) = it.next().unwrap();
        let mut lam = SLambda { param: p, links: l, ann: a, body };
        for (p, l, a) in it {
            body = SExpr::Graph(SGraph::Atom(SAtom { head: SHead::Lam(Box::new(lam)), args: args.clone() }));
            lam = SLambda { param: p, links: l, ann: a, body };
        }
        Ok(SAtom { head: SHead::Lam(Box::new(lam)), args })
    }

    fn param(&mut self) -> PResult<(Name, Vec<Name>, Option<SType>)> {
        let start = self.pos;
        let Tok::Ctx(s) = self.bump() else { return self.err_at(start, "expected a parameter") };
        let links = if self.eat(&Tok::LBrack) { self.links_until(Tok::RBrack)? } else { Vec::new() };
        let set: BTreeSet<_> = links.iter().collect();
        if set.len() != links.len() {
            return self.err_at(start, format!("duplicate link in parameter ${s}"));
        }
        let ann = if self.eat(&Tok::Colon) { Some(self.ty()?) } else { None };
        if let Some(t) = &ann {
            if !is_permutation(&t.links, &links) {
                return self.err_at(start, format!("the annotation of ${s} must use exactly its links"));
            }
        }
        Ok((Name::new(&s), links, ann))
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<SExpr> {
        match self.peek() {
            Tok::Case => {
                self.bump();
                let scrutinee = self.expr()?;
                self.expect(Tok::Of)?;
                let pattern = self.graph(Mode::Pattern)?;
                self.expect(Tok::Arrow)?;
                let then = self.expr()?;
                self.expect(Tok::Bar)?;
                self.expect(Tok::Otherwise)?;
                self.expect(Tok::Arrow)?;
                let otherwise = self.expr()?;
                Ok(SExpr::Case(Box::new(SCase { scrutinee, pattern, then, otherwise })))
            }
            Tok::Let => {
                self.bump();
                let (param, links, ann) = self.param()?;
                self.expect(Tok::Eq)?;
                let bound = self.expr()?;
                self.expect(Tok::In)?;
                let body = self.expr()?;
                let lam = SAtom {
                    head: SHead::Lam(Box::new(SLambda { param, links, ann, body })),
                    args: Vec::new(),
                };
                Ok(SExpr::App(Box::new(SExpr::Graph(SGraph::Atom(lam))), Box::new(bound)))
            }
            _ => self.seq(),
        }
    }

    fn seq(&mut self) -> PResult<SExpr> {
        let start = self.pos;
        let first = self.app()?;
        if *self.peek() != Tok::Comma {
            return Ok(first);
        }
        let mut parts = vec![first];
        while self.eat(&Tok::Comma) {
            parts.push(self.app()?);
        }
        let mut gs = Vec::new();
        for p in parts {
            match p {
                SExpr::Graph(g) => gs.push(g),
                _ => return self.err_at(start, "only graphs can be composed with `,`"),
            }
        }
        Ok(SExpr::Graph(SGraph::Mol(gs)))
    }

    fn starts_operand(&self) -> bool {
        matches!(self.peek(), Tok::LParen | Tok::Nu | Tok::Upper(_) | Tok::Lower(_) | Tok::Ctx(_))
    }

    fn app(&mut self) -> PResult<SExpr> {
        let mut e = self.operand()?;
        while self.starts_operand() {
            let a = self.operand()?;
            e = SExpr::App(Box::new(e), Box::new(a));
        }
        Ok(e)
    }

    fn operand(&mut self) -> PResult<SExpr> {
        if *self.peek() == Tok::LParen && !matches!(self.peek_at(1), Tok::RParen | Tok::Backslash) {
            self.bump();
            let e = self.expr()?;
            self.expect(Tok::RParen)?;
            return Ok(e);
        }
        if *self.peek() == Tok::Nu {
            let start = self.pos;
            self.bump();
            let mut names = vec![self.upper()?];
            while matches!(self.peek(), Tok::Upper(_)) {
                names.push(self.upper()?);
            }
            self.expect(Tok::Dot)?;
            return match self.operand()? {
                SExpr::Graph(g) => Ok(SExpr::Graph(SGraph::Nu(names, Box::new(g)))),
                _ => self.err_at(start, "the body of `nu` must be a graph"),
            };
        }
        Ok(SExpr::Graph(self.gprimary(Mode::Expr)?))
    }

    fn rule(&mut self) -> PResult<SRule> {
        let name = match self.bump() {
            Tok::Lower(s) => Name::new(&s),
            t => return self.err_at(self.pos.saturating_sub(1), format!("expected a type name, found {t}")),
        };
        let links = if self.eat(&Tok::LParen) { self.links_until(Tok::RParen)? } else { Vec::new() };
        self.expect(Tok::Arrow)?;
        let rhs = self.graph(Mode::Rule)?;
        self.expect(Tok::Semi)?;
        Ok(SRule { name, links, rhs })
    }

    fn eof(&self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.err(format!("unexpected {}", self.peek()))
        }
    }
}

fn is_permutation(a: &[Name], b: &[Name]) -> bool {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort();
    y.sort();
    x == y
}

/// Marks every atom named after a rule head as a type atom and checks
/// that each type name keeps a single arity.
fn resolve_rules(rules: &mut [SRule], rule_pos: &[(usize, usize)]) -> PResult<()> {
    let mut arity: BTreeMap<Name, usize> = BTreeMap::new();
    for (r, &(line, col)) in rules.iter().zip(rule_pos) {
        match arity.get(&r.name) {
            Some(&n) if n != r.links.len() => {
                return Err(ParseError::new(
                    line,
                    col,
                    format!("type {} is defined with arities {n} and {}", r.name, r.links.len()),
                ))
            }
            _ => {
                arity.insert(r.name.clone(), r.links.len());
            }
        }
    }
    for r in rules.iter_mut() {
        retag(&mut r.rhs, &arity);
    }
    Ok(())
}

fn retag(g: &mut SGraph, types: &BTreeMap<Name, usize>) {
    match g {
        SGraph::Null | SGraph::Fusion(..) => {}
        SGraph::Atom(a) => retag_atom(a, types),
        SGraph::Mol(gs) => gs.iter_mut().for_each(|g| retag(g, types)),
        SGraph::Nu(_, g) => retag(g, types),
    }
}

fn retag_atom(a: &mut SAtom, types: &BTreeMap<Name, usize>) {
    if let SHead::Con(n) = &a.head {
        if types.contains_key(n) {
            a.head = SHead::Ty(n.clone());
        }
    }
    for arg in &mut a.args {
        if let SArg::Nested(n) = arg {
            retag_atom(n, types);
        }
    }
}

fn rules_block(p: &mut Parser, keyword: bool) -> PResult<Vec<SRule>> {
    let mut rules = Vec::new();
    let mut pos = Vec::new();
    loop {
        if keyword {
            if !p.eat(&Tok::Type) {
                break;
            }
        } else {
            p.eat(&Tok::Type);
            if !matches!(p.peek(), Tok::Lower(_)) {
                break;
            }
        }
        let t = &p.toks[p.pos];
        pos.push((t.line, t.col));
        rules.push(p.rule()?);
    }
    resolve_rules(&mut rules, &pos)?;
    Ok(rules)
}

/// `type` rules followed by an optional main expression.
pub fn parse_program(src: &str) -> PResult<Program> {
    let mut p = Parser::new(src)?;
    let rules = rules_block(&mut p, true)?;
    let main = if *p.peek() == Tok::Eof { None } else { Some(p.expr()?) };
    p.eof()?;
    Ok(Program { rules, main })
}

/// Production rules with an optional `type` keyword before each.
pub fn parse_type_defs(src: &str) -> PResult<Vec<SRule>> {
    let mut p = Parser::new(src)?;
    let rules = rules_block(&mut p, false)?;
    p.eof()?;
    Ok(rules)
}

pub fn parse_expr(src: &str) -> PResult<SExpr> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.eof()?;
    Ok(e)
}

pub fn parse_template(src: &str) -> PResult<SGraph> {
    let mut p = Parser::new(src)?;
    let g = p.graph(Mode::Pattern)?;
    p.eof()?;
    Ok(g)
}

pub fn parse_type(src: &str) -> PResult<SType> {
    let mut p = Parser::new(src)?;
    let t = p.ty()?;
    p.eof()?;
    Ok(t)
}

/// `T : τ(X…)`. A lone annotated context doubles as its own goal.
pub fn parse_goal(src: &str) -> PResult<SGoal> {
    let mut p = Parser::new(src)?;
    let template = p.graph(Mode::Pattern)?;
    if p.eat(&Tok::Colon) {
        let ty = p.ty()?;
        p.eof()?;
        return Ok(SGoal { template, ty });
    }
    p.eof()?;
    if let SGraph::Atom(SAtom { head: SHead::Ctx(_, Some(ty)), args }) = &template {
        if args.iter().all(|a| matches!(a, SArg::Link(_))) {
            let ty = ty.clone();
            return Ok(SGoal { template, ty });
        }
    }
    p.err("expected `:` followed by the goal type")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Name {
        Name::new(s)
    }

    #[test]
    fn fusion_expression() {
        assert_eq!(parse_expr("X >< Y").unwrap(), SExpr::Graph(SGraph::Fusion(n("X"), n("Y"))));
    }

    #[test]
    fn simple_case() {
        let e = parse_expr("case $x[X] of zero(X) -> one(X) | otherwise -> $x[X]").unwrap();
        let SExpr::Case(c) = e else { panic!() };
        assert!(matches!(c.pattern, SGraph::Atom(SAtom { head: SHead::Con(_), .. })));
    }

    #[test]
    fn type_rules_resolve_type_atoms() {
        let rules = parse_type_defs("nodes(Y,X) -> X >< Y; nodes(Y,X) -> cons(nat, nodes(Y), X); nat(X) -> zero(X);")
            .unwrap();
        assert_eq!(rules.len(), 3);
        let SGraph::Atom(cons) = &rules[1].rhs else { panic!() };
        assert_eq!(cons.head, SHead::Con(n("cons")));
        let SArg::Nested(nat) = &cons.args[0] else { panic!() };
        assert_eq!(nat.head, SHead::Ty(n("nat")));
        assert!(parse_type_defs("").unwrap().is_empty());
    }

    #[test]
    fn arity_clash_is_rejected() {
        let e = parse_type_defs("t(X) -> a(X); t(X,Y) -> b(X,Y);").unwrap_err();
        assert!(e.msg.contains("arities"));
    }

    #[test]
    fn lambda_in_pattern_is_rejected() {
        let e = parse_expr("case $x[X] of (\\ $y[X]. $y[X])(X) -> a(X) | otherwise -> b(X)").unwrap_err();
        assert!(e.msg.contains("not allowed"));
    }

    #[test]
    fn duplicate_context_links_are_rejected() {
        assert!(parse_expr("$x[X, X]").is_err());
    }

    #[test]
    fn let_desugars_to_application() {
        let e = parse_expr("let $f[Z] = (\\ $x[X]. $x[X])(Z) in $f[Z] a(X)").unwrap();
        let SExpr::App(f, _) = e else { panic!() };
        let SExpr::Graph(SGraph::Atom(SAtom { head: SHead::Lam(l), args })) = *f else { panic!() };
        assert!(args.is_empty());
        assert_eq!(l.param, n("f"));
    }

    #[test]
    fn curried_parameters_share_links() {
        let e = parse_expr("(\\ $x[X] $y[Y]. $x[X])(Z)").unwrap();
        let SExpr::Graph(SGraph::Atom(outer)) = e else { panic!() };
        let SHead::Lam(l) = &outer.head else { panic!() };
        let SExpr::Graph(SGraph::Atom(inner)) = &l.body else { panic!() };
        assert_eq!(inner.args, outer.args);
    }

    #[test]
    fn arrow_types_nest_to_the_right() {
        let t = parse_type("(nodes(Y,X) -> nodes(Y,X) -> nodes(Y,X))(Z)").unwrap();
        let STypeHead::Arrow(_, cod) = &t.head else { panic!() };
        assert!(matches!(cod.head, STypeHead::Arrow(..)));
        assert_eq!(cod.links, vec![n("Z")]);
    }

    #[test]
    fn arrow_atoms_in_rules() {
        let rules = parse_type_defs("nodes(Y,X) -> cons((nat(W) -> nat(W)), nodes(Y), X); nat(X) -> zero(X);").unwrap();
        let SGraph::Atom(cons) = &rules[0].rhs else { panic!() };
        let SArg::Nested(arrow) = &cons.args[0] else { panic!() };
        assert!(matches!(arrow.head, SHead::Arrow(..)));
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_expr("p(X,\n  ]").unwrap_err();
        assert_eq!((e.line, e.col), (2, 3));
    }

    #[test]
    fn goals() {
        let g = parse_goal("nu Z. ($x[Z,X]:nodes(Z,X), $y[Y,Z]:nodes(Y,Z)) : nodes(Y,X)").unwrap();
        assert_eq!(g.ty.links, vec![n("Y"), n("X")]);
        let g = parse_goal("$x[Y,X]:nodes(Y,X)").unwrap();
        assert_eq!(g.ty.links, vec![n("Y"), n("X")]);
    }
}
