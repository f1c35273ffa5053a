//! Threshold-gate access trees.
//!
//! Text syntax: a bare label is a leaf; `AND(..)`, `OR(..)` and `Kof(..)` are
//! gates, e.g. `AND(OR(vital, urgent), geoA)` or `2of(a, b, c)`.

use std::borrow::Borrow;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AccessTree {
    Leaf(String),
    Gate {
        threshold: usize,
        children: Vec<AccessTree>,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("gate threshold {threshold} outside 1..={children}")]
    BadThreshold { threshold: usize, children: usize },
    #[error("policy syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
}

fn is_label_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | ':' | '.' | '@')
}

impl AccessTree {
    pub fn leaf(label: impl Into<String>) -> Self {
        Self::Leaf(label.into())
    }

    pub fn threshold(threshold: usize, children: Vec<AccessTree>) -> Result<Self, PolicyError> {
        if threshold == 0 || threshold > children.len() {
            return Err(PolicyError::BadThreshold {
                threshold,
                children: children.len(),
            });
        }
        Ok(Self::Gate {
            threshold,
            children,
        })
    }

    /// n-of-n gate. Panics on an empty child list.
    pub fn and(children: Vec<AccessTree>) -> Self {
        let n = children.len();
        Self::threshold(n, children).expect("AND needs at least one child")
    }

    /// 1-of-n gate. Panics on an empty child list.
    pub fn or(children: Vec<AccessTree>) -> Self {
        Self::threshold(1, children).expect("OR needs at least one child")
    }

    pub fn parse(text: &str) -> Result<Self, PolicyError> {
        text.parse()
    }

    /// Leaf labels in depth-first order; key components follow this order.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Self::Leaf(l) => out.push(l),
            Self::Gate { children, .. } => children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Self::Leaf(_) => 1,
            Self::Gate { children, .. } => children.iter().map(Self::leaf_count).sum(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Self::Leaf(_) => 0,
            Self::Gate { children, .. } => 1 + children.iter().map(Self::depth).max().unwrap_or(0),
        }
    }

    pub fn satisfied_by<S: Ord + Borrow<str>>(&self, attrs: &BTreeSet<S>) -> bool {
        match self {
            Self::Leaf(l) => attrs.contains(l.as_str()),
            Self::Gate {
                threshold,
                children,
            } => children.iter().filter(|c| c.satisfied_by(attrs)).count() >= *threshold,
        }
    }
}

/// Recursive threshold evaluation: a leaf holds iff its label is present, a
/// gate holds iff at least `threshold` children hold.
pub fn tree_satisfies(policy: &AccessTree, attrs: &BTreeSet<String>) -> bool {
    policy.satisfied_by(attrs)
}

impl fmt::Display for AccessTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Leaf(l) => f.write_str(l),
            Self::Gate {
                threshold,
                children,
            } => {
                let n = children.len();
                match *threshold {
                    t if t == n && n > 1 => f.write_str("AND(")?,
                    1 if n > 1 => f.write_str("OR(")?,
                    t => write!(f, "{t}of(")?,
                }
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for AccessTree {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser { src: s, pos: 0 };
        let tree = p.node()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(tree)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> PolicyError {
        PolicyError::Syntax {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn word(&mut self) -> &str {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if !is_label_char(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.src[start..self.pos]
    }

    fn node(&mut self) -> Result<AccessTree, PolicyError> {
        self.skip_ws();
        let start = self.pos;
        let word = self.word().to_string();
        if word.is_empty() {
            return Err(self.err("expected attribute label or gate"));
        }
        self.skip_ws();
        if self.peek() != Some('(') {
            return Ok(AccessTree::Leaf(word));
        }
        self.pos += 1;
        let mut children = vec![self.node()?];
        loop {
            self.skip_ws();
            match self.peek() {
                Some(',') => {
                    self.pos += 1;
                    children.push(self.node()?);
                }
                Some(')') => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(self.err("expected ',' or ')'")),
            }
        }
        let threshold = match word.to_ascii_uppercase().as_str() {
            "AND" => children.len(),
            "OR" => 1,
            w => w
                .strip_suffix("OF")
                .and_then(|k| k.parse::<usize>().ok())
                .ok_or(PolicyError::Syntax {
                    pos: start,
                    msg: format!("unknown gate '{word}'"),
                })?,
        };
        AccessTree::threshold(threshold, children)
    }
}
