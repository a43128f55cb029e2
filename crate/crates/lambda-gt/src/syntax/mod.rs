//! Concrete syntax: lexer, parser, term-notation expansion and printer.

pub mod ast;
pub mod expand;
pub mod lexer;
pub mod parser;
pub mod printer;

use std::fmt;

pub use expand::{expand_expr, expand_rules, expand_term_notation, type_atom};
pub use parser::{parse_expr, parse_goal, parse_program, parse_template, parse_type, parse_type_defs};
pub use printer::{print_expr, print_graph, print_program, print_sexpr, print_type};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, msg: impl Into<String>) -> Self {
        ParseError { line, col, msg: msg.into() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.msg)
    }
}
