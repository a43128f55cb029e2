//! Interned identifiers and the fresh-name supply.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

/// Link names, constructor names, context names and type names all share
/// this representation; the lexical class is decided by the parser.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(s: &str) -> Self {
        Name(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Names produced by [`fresh`] carry a prefix the lexer never accepts.
    pub fn is_fresh(&self) -> bool {
        self.0.starts_with(FRESH_PREFIX)
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

pub const FRESH_PREFIX: &str = "#n";

static COUNTER: AtomicU64 = AtomicU64::new(0);

/// A name that no parser-produced term can contain.
pub fn fresh() -> Name {
    let k = COUNTER.fetch_add(1, Ordering::Relaxed);
    Name(Arc::from(format!("{FRESH_PREFIX}{k}")))
}
