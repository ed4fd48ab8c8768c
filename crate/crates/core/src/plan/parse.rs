//! S-expression syntax for plans.
//!
//! ```text
//! plan := NAME | (select (theta PAIR*) plan) | (project (cols INT*) plan)
//!       | (join (theta PAIR*) plan plan*)
//! PAIR := (INT INT)
//! ```
//!
//! A plan file may open with `(relation NAME INT)` declarations; `;` starts
//! a line comment.

use std::fmt::Write;

use super::{PlanError, SpjPlan, Theta};
use crate::structure::Signature;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Open,
    Close,
    Atom(String),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, PlanError> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let line = line.split(';').next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let pos = (li + 1, i + 1);
            match c {
                '(' => {
                    out.push(Token { tok: Tok::Open, line: pos.0, col: pos.1 });
                    i += 1;
                }
                ')' => {
                    out.push(Token { tok: Tok::Close, line: pos.0, col: pos.1 });
                    i += 1;
                }
                c if c.is_whitespace() => i += 1,
                c if c.is_alphanumeric() || c == '_' || c == '\'' || c == '.' || c == '-' => {
                    let start = i;
                    while i < chars.len()
                        && (chars[i].is_alphanumeric() || matches!(chars[i], '_' | '\'' | '.' | '-'))
                    {
                        i += 1;
                    }
                    out.push(Token {
                        tok: Tok::Atom(chars[start..i].iter().collect()),
                        line: pos.0,
                        col: pos.1,
                    });
                }
                other => {
                    return Err(PlanError::Syntax {
                        line: pos.0,
                        col: pos.1,
                        msg: format!("unexpected character `{other}`"),
                    })
                }
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn err(&self, msg: impl Into<String>) -> PlanError {
        let (line, col) = self
            .toks
            .get(self.pos)
            .map_or(self.end, |t| (t.line, t.col));
        PlanError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn expect_open(&mut self) -> Result<(), PlanError> {
        match self.peek() {
            Some(Tok::Open) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err("expected `(`")),
        }
    }

    fn expect_close(&mut self) -> Result<(), PlanError> {
        match self.peek() {
            Some(Tok::Close) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err("expected `)`")),
        }
    }

    fn atom(&mut self) -> Result<String, PlanError> {
        match self.peek() {
            Some(Tok::Atom(a)) => {
                let a = a.clone();
                self.pos += 1;
                Ok(a)
            }
            _ => Err(self.err("expected a name or number")),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), PlanError> {
        match self.peek() {
            Some(Tok::Atom(a)) if a == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected `{kw}`"))),
        }
    }

    fn int(&mut self) -> Result<usize, PlanError> {
        let here = self.pos;
        let a = self.atom()?;
        a.parse().map_err(|_| {
            self.pos = here;
            self.err(format!("expected a positive integer, found `{a}`"))
        })
    }

    fn index(&mut self) -> Result<usize, PlanError> {
        let here = self.pos;
        let i = self.int()?;
        if i == 0 {
            self.pos = here;
            return Err(self.err("column indices are 1-based"));
        }
        Ok(i)
    }

    fn theta(&mut self) -> Result<Theta, PlanError> {
        self.expect_open()?;
        self.keyword("theta")?;
        let mut theta = Theta::new();
        while let Some(Tok::Open) = self.peek() {
            self.pos += 1;
            let j = self.index()?;
            let k = self.index()?;
            self.expect_close()?;
            theta.insert((j, k));
        }
        self.expect_close()?;
        Ok(theta)
    }

    fn cols(&mut self) -> Result<Vec<usize>, PlanError> {
        self.expect_open()?;
        self.keyword("cols")?;
        let mut cols = Vec::new();
        while let Some(Tok::Atom(_)) = self.peek() {
            cols.push(self.index()?);
        }
        self.expect_close()?;
        Ok(cols)
    }

    fn plan(&mut self) -> Result<SpjPlan, PlanError> {
        match self.peek() {
            Some(Tok::Atom(a)) => {
                let name = a.clone();
                if name.chars().next().is_some_and(|c| c.is_ascii_digit()) {
                    return Err(self.err(format!("expected a relation name, found `{name}`")));
                }
                self.pos += 1;
                Ok(SpjPlan::Basic(name))
            }
            Some(Tok::Open) => {
                self.pos += 1;
                let head = self.atom()?;
                let plan = match head.as_str() {
                    "select" => {
                        let theta = self.theta()?;
                        let child = self.plan()?;
                        SpjPlan::select(theta, child)
                    }
                    "project" => {
                        let cols = self.cols()?;
                        let child = self.plan()?;
                        SpjPlan::project(cols, child)
                    }
                    "join" => {
                        let theta = self.theta()?;
                        let mut children = vec![self.plan()?];
                        while !matches!(self.peek(), Some(Tok::Close) | None) {
                            children.push(self.plan()?);
                        }
                        SpjPlan::join(theta, children)
                    }
                    other => {
                        self.pos -= 1;
                        return Err(self.err(format!(
                            "unknown operator `{other}` (expected select, project or join)"
                        )));
                    }
                };
                self.expect_close()?;
                Ok(plan)
            }
            Some(Tok::Close) => Err(self.err("unexpected `)`")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn declaration(&mut self) -> Result<Option<(String, usize)>, PlanError> {
        let is_decl = matches!(self.peek(), Some(Tok::Open))
            && matches!(self.toks.get(self.pos + 1).map(|t| &t.tok), Some(Tok::Atom(a)) if a == "relation");
        if !is_decl {
            return Ok(None);
        }
        self.pos += 2;
        let name = self.atom()?;
        let arity = self.int()?;
        self.expect_close()?;
        Ok(Some((name, arity)))
    }

    fn finish(&mut self) -> Result<(), PlanError> {
        if self.pos < self.toks.len() {
            return Err(self.err("trailing input after plan"));
        }
        Ok(())
    }
}

fn parser(text: &str) -> Result<Parser, PlanError> {
    let toks = tokenize(text)?;
    let lines = text.lines().count().max(1);
    let last_len = text.lines().last().map_or(0, |l| l.chars().count());
    Ok(Parser {
        toks,
        pos: 0,
        end: (lines, last_len + 1),
    })
}

/// Parses a single plan.
pub fn parse_plan(text: &str) -> Result<SpjPlan, PlanError> {
    let mut p = parser(text)?;
    let plan = p.plan()?;
    p.finish()?;
    Ok(plan)
}

/// A plan file: optional relation declarations followed by a plan.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanFile {
    pub declarations: Signature,
    pub plan: SpjPlan,
}

pub fn parse_plan_file(text: &str) -> Result<PlanFile, PlanError> {
    let mut p = parser(text)?;
    let mut pairs = Vec::new();
    while let Some(decl) = p.declaration()? {
        pairs.push(decl);
    }
    let declarations = Signature::from_pairs(pairs).map_err(|e| PlanError::Syntax {
        line: 1,
        col: 1,
        msg: e.to_string(),
    })?;
    let plan = p.plan()?;
    p.finish()?;
    if !declarations.is_empty() {
        plan.arity(&declarations)?;
    }
    Ok(PlanFile { declarations, plan })
}

fn write_theta(out: &mut String, theta: &Theta) {
    out.push_str("(theta");
    for (j, k) in theta {
        let _ = write!(out, " ({j} {k})");
    }
    out.push(')');
}

fn write_plan(out: &mut String, p: &SpjPlan) {
    match p {
        SpjPlan::Basic(name) => out.push_str(name),
        SpjPlan::Select { theta, child } => {
            out.push_str("(select ");
            write_theta(out, theta);
            out.push(' ');
            write_plan(out, child);
            out.push(')');
        }
        SpjPlan::Project { cols, child } => {
            out.push_str("(project (cols");
            for c in cols {
                let _ = write!(out, " {c}");
            }
            out.push_str(") ");
            write_plan(out, child);
            out.push(')');
        }
        SpjPlan::Join { theta, children } => {
            out.push_str("(join ");
            write_theta(out, theta);
            for c in children {
                out.push(' ');
                write_plan(out, c);
            }
            out.push(')');
        }
    }
}

/// Canonical single-line text of a plan.
pub fn print_plan(p: &SpjPlan) -> String {
    let mut out = String::new();
    write_plan(&mut out, p);
    out
}
