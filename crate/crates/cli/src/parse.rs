//! Element definitions in text form.
//!
//! ```text
//! def   := name "=" expr ;
//! expr  := term { "*" term } ;
//! term  := atom { "^-1" | "^" int } ;
//! atom  := "id" | "eta" | "perm(" cycles ")" | "(" expr { "," expr } ")" | name ;
//! ```
//!
//! Definitions are separated by newlines or `;`, and `#` starts a comment.
//! Line breaks inside parentheses are ordinary whitespace. A parenthesized
//! single expression is a grouping, two or more form a tuple.

use std::fmt;

use arbor_core::{ElementExpr, RecursionEnv, TreeShape};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DefinitionError {
    #[error("{at}: syntax error: {message}")]
    Syntax { at: Position, message: String },
    #[error("{at}: {source}")]
    Invalid {
        at: Position,
        #[source]
        source: arbor_core::Error,
    },
}

impl DefinitionError {
    pub fn position(&self) -> &Position {
        match self {
            DefinitionError::Syntax { at, .. } | DefinitionError::Invalid { at, .. } => at,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Name(String),
    Int(i64),
    Eq,
    Star,
    Caret,
    Minus,
    LParen,
    RParen,
    Comma,
    Sep,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Name(n) => write!(f, "`{n}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Sep => f.write_str("end of definition"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Position)>, DefinitionError> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    for (i, line) in src.lines().enumerate() {
        let line_no = i + 1;
        let line = line.split('#').next().unwrap_or("");
        let chars: Vec<(usize, char)> = line.char_indices().collect();
        let mut j = 0;
        while j < chars.len() {
            let (_, c) = chars[j];
            let at = Position { line: line_no, column: j + 1 };
            let tok = match c {
                c if c.is_whitespace() => {
                    j += 1;
                    continue;
                }
                '=' => Tok::Eq,
                '*' => Tok::Star,
                '^' => Tok::Caret,
                '-' => Tok::Minus,
                ',' => Tok::Comma,
                ';' => Tok::Sep,
                '(' => {
                    depth += 1;
                    Tok::LParen
                }
                ')' => {
                    depth = depth.saturating_sub(1);
                    Tok::RParen
                }
                c if c.is_ascii_digit() => {
                    let start = j;
                    while j < chars.len() && chars[j].1.is_ascii_digit() {
                        j += 1;
                    }
                    let text: String = chars[start..j].iter().map(|&(_, c)| c).collect();
                    let value = text.parse().map_err(|_| DefinitionError::Syntax {
                        at: at.clone(),
                        message: format!("integer `{text}` is too large"),
                    })?;
                    out.push((Tok::Int(value), at));
                    continue;
                }
                c if c.is_alphabetic() || c == '_' => {
                    let start = j;
                    while j < chars.len()
                        && (chars[j].1.is_alphanumeric() || chars[j].1 == '_' || chars[j].1 == '\'')
                    {
                        j += 1;
                    }
                    out.push((Tok::Name(chars[start..j].iter().map(|&(_, c)| c).collect()), at));
                    continue;
                }
                other => {
                    return Err(DefinitionError::Syntax { at, message: format!("unexpected character `{other}`") })
                }
            };
            out.push((tok, at));
            j += 1;
        }
        if depth == 0 {
            out.push((Tok::Sep, Position { line: line_no, column: line.chars().count() + 1 }));
        }
    }
    let end = Position { line: src.lines().count().max(1), column: 1 };
    out.push((Tok::End, end));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Position)>,
    pos: usize,
    degree: Option<usize>,
}

/// A parsed definition with the position of its name.
struct Definition {
    name: String,
    at: Position,
    expr: ElementExpr,
    refs: Vec<(String, Position)>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn at(&self) -> Position {
        self.toks[self.pos].1.clone()
    }

    fn bump(&mut self) -> (Tok, Position) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, DefinitionError> {
        Err(DefinitionError::Syntax { at: self.at(), message: message.into() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Position, DefinitionError> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            self.fail(format!("expected {what}, found {}", self.peek()))
        }
    }

    fn skip_separators(&mut self) {
        while *self.peek() == Tok::Sep {
            self.bump();
        }
    }

    fn definitions(&mut self) -> Result<Vec<Definition>, DefinitionError> {
        let mut defs = Vec::new();
        self.skip_separators();
        while *self.peek() != Tok::End {
            let (tok, at) = self.bump();
            let Tok::Name(name) = tok else {
                return Err(DefinitionError::Syntax { at, message: format!("expected a name, found {tok}") });
            };
            if is_keyword(&name) {
                return Err(DefinitionError::Syntax { at, message: format!("`{name}` is reserved") });
            }
            self.expect(Tok::Eq, "`=`")?;
            let mut refs = Vec::new();
            let expr = self.expr(&mut refs)?;
            if !matches!(self.peek(), Tok::Sep | Tok::End) {
                return self.fail(format!("expected `*`, `;` or a new line, found {}", self.peek()));
            }
            defs.push(Definition { name, at, expr, refs });
            self.skip_separators();
        }
        Ok(defs)
    }

    fn expr(&mut self, refs: &mut Vec<(String, Position)>) -> Result<ElementExpr, DefinitionError> {
        let mut factors = vec![self.term(refs)?];
        while *self.peek() == Tok::Star {
            self.bump();
            factors.push(self.term(refs)?);
        }
        Ok(if factors.len() == 1 { factors.pop().expect("one factor") } else { ElementExpr::compose(factors) })
    }

    fn term(&mut self, refs: &mut Vec<(String, Position)>) -> Result<ElementExpr, DefinitionError> {
        let mut x = self.atom(refs)?;
        while *self.peek() == Tok::Caret {
            self.bump();
            let negative = *self.peek() == Tok::Minus;
            if negative {
                self.bump();
            }
            let Tok::Int(e) = self.peek().clone() else {
                return self.fail(format!("expected an exponent, found {}", self.peek()));
            };
            self.bump();
            if e > 64 {
                return self.fail(format!("exponent {e} is larger than 64"));
            }
            x = x.pow(if negative { -e } else { e });
        }
        Ok(x)
    }

    fn atom(&mut self, refs: &mut Vec<(String, Position)>) -> Result<ElementExpr, DefinitionError> {
        let (tok, at) = self.bump();
        match tok {
            Tok::Name(n) if n == "id" => Ok(ElementExpr::Identity),
            Tok::Name(n) if n == "eta" => Ok(ElementExpr::eta()),
            Tok::Name(n) if n == "perm" => self.perm(),
            Tok::Name(n) => {
                refs.push((n.clone(), at));
                Ok(ElementExpr::reference(n))
            }
            Tok::LParen => {
                let mut items = vec![self.expr(refs)?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    items.push(self.expr(refs)?);
                }
                self.expect(Tok::RParen, "`,` or `)`")?;
                Ok(if items.len() == 1 { items.pop().expect("one item") } else { ElementExpr::tuple(items) })
            }
            other => Err(DefinitionError::Syntax { at, message: format!("expected an element, found {other}") }),
        }
    }

    /// `perm(` already consumed up to the name; cycles like `(0 1 2)(3 4)`.
    fn perm(&mut self) -> Result<ElementExpr, DefinitionError> {
        let start = self.at();
        self.expect(Tok::LParen, "`(` after `perm`")?;
        let mut cycles: Vec<Vec<usize>> = Vec::new();
        while *self.peek() == Tok::LParen {
            self.bump();
            let mut cycle = Vec::new();
            loop {
                match self.peek().clone() {
                    Tok::Int(x) => {
                        self.bump();
                        cycle.push(x as usize);
                    }
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::RParen => {
                        self.bump();
                        break;
                    }
                    other => return self.fail(format!("expected a letter or `)`, found {other}")),
                }
            }
            cycles.push(cycle);
        }
        self.expect(Tok::RParen, "`)` closing `perm(`")?;
        let largest = cycles.iter().flatten().copied().max().map_or(0, |x| x + 1);
        let d = self.degree.unwrap_or(largest).max(largest);
        let mut p: Vec<usize> = (0..d).collect();
        let mut seen = vec![false; d];
        for cycle in &cycles {
            for (i, &x) in cycle.iter().enumerate() {
                if seen[x] {
                    return Err(DefinitionError::Syntax {
                        at: start,
                        message: format!("letter {x} appears twice in `perm`"),
                    });
                }
                seen[x] = true;
                p[x] = cycle[(i + 1) % cycle.len()];
            }
        }
        Ok(ElementExpr::RootPerm(p))
    }
}

fn is_keyword(name: &str) -> bool {
    matches!(name, "id" | "eta" | "perm")
}

/// Parses a definitions file into an environment over `shape`.
pub fn parse_definitions(src: &str, shape: &TreeShape) -> Result<RecursionEnv, DefinitionError> {
    let mut parser = Parser { toks: lex(src)?, pos: 0, degree: shape.degree() };
    let defs = parser.definitions()?;
    let batch: Vec<(String, ElementExpr)> = defs.iter().map(|d| (d.name.clone(), d.expr.clone())).collect();
    RecursionEnv::new(shape.clone()).define_all(batch).map_err(|e| locate(&defs, shape, e))
}

/// Parses a single expression, e.g. a command-line argument.
pub fn parse_expr(src: &str, shape: &TreeShape) -> Result<ElementExpr, DefinitionError> {
    let mut parser = Parser { toks: lex(src)?, pos: 0, degree: shape.degree() };
    parser.skip_separators();
    let expr = parser.expr(&mut Vec::new())?;
    parser.skip_separators();
    if *parser.peek() != Tok::End {
        return parser.fail(format!("unexpected {} after the expression", parser.peek()));
    }
    Ok(expr)
}

/// Attaches the position of the responsible definition to an engine error.
fn locate(defs: &[Definition], shape: &TreeShape, err: arbor_core::Error) -> DefinitionError {
    use arbor_core::Error as E;
    let first = Position { line: 1, column: 1 };
    let at = match &err {
        E::DuplicateDefinition(name) => {
            defs.iter().filter(|d| &d.name == name).nth(1).map(|d| d.at.clone())
        }
        E::UnresolvedRef(name) => {
            defs.iter().flat_map(|d| &d.refs).find(|(n, _)| n == name).map(|(_, at)| at.clone())
        }
        E::NonContracting(message) => {
            defs.iter().find(|d| message.contains(&format!("`{}`", d.name))).map(|d| d.at.clone())
        }
        _ => defs
            .iter()
            .find(|d| {
                // checking each body alone isolates arity problems
                let names: Vec<(String, ElementExpr)> = defs
                    .iter()
                    .map(|o| (o.name.clone(), if o.name == d.name { o.expr.clone() } else { ElementExpr::Identity }))
                    .collect();
                RecursionEnv::new(shape.clone()).define_all(dedup(names)).is_err_and(|e| e == err)
            })
            .map(|d| d.at.clone()),
    };
    DefinitionError::Invalid { at: at.unwrap_or(first), source: err }
}

fn dedup(defs: Vec<(String, ElementExpr)>) -> Vec<(String, ElementExpr)> {
    let mut seen = std::collections::HashSet::new();
    defs.into_iter().filter(|(n, _)| seen.insert(n.clone())).collect()
}
