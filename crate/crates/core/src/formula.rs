//! STL abstract syntax, the text grammar and its parser, and structural helpers.
//!
//! Atoms are always stored in the canonical shape `expr > 0`. Comparisons are
//! rewritten at parse time:
//!
//! * `e < c` becomes `c - e > 0`, `e > c` becomes `e - c > 0` (`e > 0` is kept as is);
//! * `abs(e) < c` becomes `(c - e > 0) and (c + e > 0)`;
//! * `abs(e) > c` becomes `(e - c > 0) or (-e - c > 0)`;
//! * `a -> b` becomes `not a or b`.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Arithmetic over signal variables. No division, so evaluation is total.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Abs(Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn add(a: Expr, b: Expr) -> Self {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Self {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn neg(a: Expr) -> Self {
        Expr::Neg(Box::new(a))
    }

    pub fn abs(a: Expr) -> Self {
        Expr::Abs(Box::new(a))
    }

    /// Evaluates the expression, resolving variables through `lookup`.
    pub fn eval<F>(&self, lookup: &F) -> f64
    where
        F: Fn(&str) -> f64,
    {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(name) => lookup(name),
            Expr::Neg(e) => -e.eval(lookup),
            Expr::Add(a, b) => a.eval(lookup) + b.eval(lookup),
            Expr::Sub(a, b) => a.eval(lookup) - b.eval(lookup),
            Expr::Mul(a, b) => a.eval(lookup) * b.eval(lookup),
            Expr::Abs(e) => e.eval(lookup).abs(),
        }
    }

    /// Names of all variables referenced, sorted and deduplicated.
    pub fn variables(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(name) => {
                out.insert(name.as_str());
            }
            Expr::Neg(e) | Expr::Abs(e) => e.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(name) => write!(f, "{name}"),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Abs(e) => write!(f, "abs({e})"),
        }
    }
}

/// An atomic proposition `expr > 0` with its a-priori robustness range.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    /// Position of the atom in left-to-right order, dense from 0.
    pub id: usize,
    pub expr: Expr,
    pub r_min: f64,
    pub r_max: f64,
}

impl Atom {
    pub fn new(expr: Expr) -> Self {
        Atom {
            id: 0,
            expr,
            r_min: f64::NEG_INFINITY,
            r_max: f64::INFINITY,
        }
    }
}

/// Closed, bounded time interval `[lo, hi]` in time units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeInterval {
    pub lo: f64,
    pub hi: f64,
}

/// Relative tolerance used when snapping interval endpoints to the sampling grid.
const GRID_EPS: f64 = 1e-9;

impl TimeInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(IntervalError::Unbounded);
        }
        if lo < 0.0 || lo > hi {
            return Err(IntervalError::Reversed { lo, hi });
        }
        Ok(TimeInterval { lo, hi })
    }

    /// Snaps the interval onto a grid of step `delta`, rounding `lo` up and
    /// `hi` down, and returns the endpoints in samples.
    pub fn to_samples(&self, delta: f64) -> Result<(usize, usize), IntervalError> {
        let lo = (self.lo / delta - GRID_EPS).ceil().max(0.0);
        let hi = (self.hi / delta + GRID_EPS).floor();
        if lo > hi {
            return Err(IntervalError::EmptyOnGrid {
                lo: self.lo,
                hi: self.hi,
                delta,
            });
        }
        Ok((lo as usize, hi as usize))
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntervalError {
    #[error("unbounded interval")]
    Unbounded,
    #[error("reversed or negative interval [{lo},{hi}]")]
    Reversed { lo: f64, hi: f64 },
    #[error("interval [{lo},{hi}] contains no grid point for step {delta}")]
    EmptyOnGrid { lo: f64, hi: f64, delta: f64 },
}

/// STL formula with bounded temporal operators.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Atom(Atom),
    False,
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Always(TimeInterval, Box<Formula>),
    Eventually(TimeInterval, Box<Formula>),
    Until(TimeInterval, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(expr: Expr) -> Self {
        Formula::Atom(Atom::new(expr))
    }

    pub fn truth() -> Self {
        Formula::Not(Box::new(Formula::False))
    }

    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::or(Formula::not(a), b)
    }

    pub fn always(i: TimeInterval, f: Formula) -> Self {
        Formula::Always(i, Box::new(f))
    }

    pub fn eventually(i: TimeInterval, f: Formula) -> Self {
        Formula::Eventually(i, Box::new(f))
    }

    pub fn until(i: TimeInterval, a: Formula, b: Formula) -> Self {
        Formula::Until(i, Box::new(a), Box::new(b))
    }

    /// Future duration (time units) needed beyond the anchor instant.
    pub fn horizon(&self) -> f64 {
        match self {
            Formula::Atom(_) | Formula::False => 0.0,
            Formula::Not(f) => f.horizon(),
            Formula::And(a, b) | Formula::Or(a, b) => a.horizon().max(b.horizon()),
            Formula::Always(i, f) | Formula::Eventually(i, f) => i.hi + f.horizon(),
            Formula::Until(i, a, b) => i.hi + a.horizon().max(b.horizon()),
        }
    }

    /// Horizon in samples after snapping every interval to the grid of step `delta`.
    pub fn horizon_samples(&self, delta: f64) -> Result<usize, IntervalError> {
        Ok(match self {
            Formula::Atom(_) | Formula::False => 0,
            Formula::Not(f) => f.horizon_samples(delta)?,
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.horizon_samples(delta)?.max(b.horizon_samples(delta)?)
            }
            Formula::Always(i, f) | Formula::Eventually(i, f) => {
                i.to_samples(delta)?.1 + f.horizon_samples(delta)?
            }
            Formula::Until(i, a, b) => {
                i.to_samples(delta)?.1 + a.horizon_samples(delta)?.max(b.horizon_samples(delta)?)
            }
        })
    }

    /// Atoms in left-to-right order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.visit_atoms(&mut |a| out.push(a));
        out
    }

    fn visit_atoms<'a>(&'a self, f: &mut impl FnMut(&'a Atom)) {
        match self {
            Formula::Atom(a) => f(a),
            Formula::False => {}
            Formula::Not(g) | Formula::Always(_, g) | Formula::Eventually(_, g) => g.visit_atoms(f),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => {
                a.visit_atoms(f);
                b.visit_atoms(f);
            }
        }
    }

    fn visit_atoms_mut(&mut self, f: &mut impl FnMut(&mut Atom)) {
        match self {
            Formula::Atom(a) => f(a),
            Formula::False => {}
            Formula::Not(g) | Formula::Always(_, g) | Formula::Eventually(_, g) => {
                g.visit_atoms_mut(f)
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => {
                a.visit_atoms_mut(f);
                b.visit_atoms_mut(f);
            }
        }
    }

    /// Reassigns atom ids densely in left-to-right order.
    pub fn number_atoms(mut self) -> Self {
        let mut next = 0;
        self.visit_atoms_mut(&mut |a| {
            a.id = next;
            next += 1;
        });
        self
    }

    /// Applies `f` to every atom, e.g. to install a-priori bounds.
    pub fn map_atoms(mut self, mut f: impl FnMut(&mut Atom)) -> Self {
        self.visit_atoms_mut(&mut f);
        self
    }

    /// Number of operator nodes, atoms included.
    pub fn size(&self) -> usize {
        match self {
            Formula::Atom(_) | Formula::False => 1,
            Formula::Not(g) | Formula::Always(_, g) | Formula::Eventually(_, g) => 1 + g.size(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => {
                1 + a.size() + b.size()
            }
        }
    }

    /// Nesting depth; an atom has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Formula::Atom(_) | Formula::False => 0,
            Formula::Not(g) | Formula::Always(_, g) | Formula::Eventually(_, g) => 1 + g.depth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => {
                1 + a.depth().max(b.depth())
            }
        }
    }

    /// Every variable referenced by an atom.
    pub fn variables(&self) -> BTreeSet<String> {
        self.atoms()
            .iter()
            .flat_map(|a| a.expr.variables())
            .map(str::to_owned)
            .collect()
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(a) => write!(f, "{} > 0", a.expr),
            Formula::False => write!(f, "false"),
            Formula::Not(g) => write!(f, "not ({g})"),
            Formula::And(a, b) => write!(f, "({a}) and ({b})"),
            Formula::Or(a, b) => write!(f, "({a}) or ({b})"),
            Formula::Always(i, g) => write!(f, "alw_{i} ({g})"),
            Formula::Eventually(i, g) => write!(f, "ev_{i} ({g})"),
            Formula::Until(i, a, b) => write!(f, "({a}) until_{i} ({b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("invalid number {0:?}")]
    BadNumber(String),
    #[error("expected {expected}, found {found}")]
    Unexpected { expected: String, found: String },
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Lt,
    Gt,
    Arrow,
    Not,
    And,
    Or,
    True,
    False,
    Abs,
    Alw(TimeInterval),
    Ev(TimeInterval),
    Until(TimeInterval),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(n) => write!(f, "number {n}"),
            Tok::Ident(s) => write!(f, "identifier {s:?}"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::Plus => write!(f, "'+'"),
            Tok::Minus => write!(f, "'-'"),
            Tok::Star => write!(f, "'*'"),
            Tok::Lt => write!(f, "'<'"),
            Tok::Gt => write!(f, "'>'"),
            Tok::Arrow => write!(f, "'->'"),
            Tok::Not => write!(f, "'not'"),
            Tok::And => write!(f, "'and'"),
            Tok::Or => write!(f, "'or'"),
            Tok::True => write!(f, "'true'"),
            Tok::False => write!(f, "'false'"),
            Tok::Abs => write!(f, "'abs'"),
            Tok::Alw(i) => write!(f, "'alw_{i}'"),
            Tok::Ev(i) => write!(f, "'ev_{i}'"),
            Tok::Until(i) => write!(f, "'until_{i}'"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.char_indices().peekable(),
            src,
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<(usize, char)> {
        let next = self.chars.next();
        if let Some((_, c)) = next {
            if c == '\n' {
                self.line += 1;
                self.column = 1;
            } else {
                self.column += 1;
            }
        }
        next
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn err(&self, line: usize, column: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { line, column, kind }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let (line, column) = (self.line, self.column);
        let start = self.chars.peek().map(|&(i, _)| i).unwrap_or(self.src.len());
        let mut end = start;
        let mut prev = ' ';
        while let Some(&(i, c)) = self.chars.peek() {
            let exp_sign = (c == '-' || c == '+') && (prev == 'e' || prev == 'E');
            if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                end = i + c.len_utf8();
                prev = c;
                self.bump();
            } else {
                break;
            }
        }
        let text = &self.src[start..end];
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(line, column, ParseErrorKind::BadNumber(text.to_owned())))
    }

    fn bracket_interval(&mut self) -> Result<TimeInterval, ParseError> {
        let (line, column) = (self.line, self.column);
        let expect = |lx: &mut Self, want: char| -> Result<(), ParseError> {
            lx.skip_ws();
            let (l, c) = (lx.line, lx.column);
            match lx.bump() {
                Some((_, ch)) if ch == want => Ok(()),
                Some((_, ch)) => Err(lx.err(l, c, ParseErrorKind::UnexpectedChar(ch))),
                None => Err(lx.err(
                    l,
                    c,
                    ParseErrorKind::Unexpected {
                        expected: format!("'{want}'"),
                        found: "end of input".into(),
                    },
                )),
            }
        };
        expect(self, '[')?;
        self.skip_ws();
        let lo = self.number()?;
        expect(self, ',')?;
        self.skip_ws();
        let hi = self.number()?;
        expect(self, ']')?;
        TimeInterval::new(lo, hi).map_err(|e| self.err(line, column, e.into()))
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            let (line, column) = (self.line, self.column);
            let Some(c) = self.peek() else {
                out.push(Spanned {
                    tok: Tok::Eof,
                    line,
                    column,
                });
                return Ok(out);
            };
            let tok = match c {
                '(' => {
                    self.bump();
                    Tok::LParen
                }
                ')' => {
                    self.bump();
                    Tok::RParen
                }
                '+' => {
                    self.bump();
                    Tok::Plus
                }
                '*' => {
                    self.bump();
                    Tok::Star
                }
                '<' => {
                    self.bump();
                    Tok::Lt
                }
                '>' => {
                    self.bump();
                    Tok::Gt
                }
                '-' => {
                    self.bump();
                    if self.peek() == Some('>') {
                        self.bump();
                        Tok::Arrow
                    } else {
                        Tok::Minus
                    }
                }
                c if c.is_ascii_digit() || c == '.' => Tok::Num(self.number()?),
                c if c.is_alphabetic() || c == '_' => {
                    let mut word = String::new();
                    while let Some(c) = self.peek() {
                        if c.is_alphanumeric() || c == '_' {
                            word.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    match word.as_str() {
                        "not" => Tok::Not,
                        "and" => Tok::And,
                        "or" => Tok::Or,
                        "true" => Tok::True,
                        "false" => Tok::False,
                        "abs" => Tok::Abs,
                        "alw_" => Tok::Alw(self.bracket_interval()?),
                        "ev_" => Tok::Ev(self.bracket_interval()?),
                        "until_" => Tok::Until(self.bracket_interval()?),
                        _ => Tok::Ident(word),
                    }
                }
                other => return Err(self.err(line, column, ParseErrorKind::UnexpectedChar(other))),
            };
            out.push(Spanned { tok, line, column });
        }
    }
}

struct Parser<'v> {
    toks: Vec<Spanned>,
    pos: usize,
    variables: &'v [&'v str],
    /// Furthest error seen, reported when backtracking runs out of options.
    furthest: Option<(usize, ParseError)>,
}

type PResult<T> = Result<T, ParseError>;

impl<'v> Parser<'v> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&mut self, kind: ParseErrorKind) -> ParseError {
        let s = &self.toks[self.pos];
        let e = ParseError {
            line: s.line,
            column: s.column,
            kind,
        };
        match &self.furthest {
            Some((p, _)) if *p > self.pos => {}
            _ => self.furthest = Some((self.pos, e.clone())),
        }
        e
    }

    fn unexpected(&mut self, expected: &str) -> ParseError {
        let found = self.peek().to_string();
        self.error_here(ParseErrorKind::Unexpected {
            expected: expected.to_owned(),
            found,
        })
    }

    fn expect(&mut self, want: Tok, what: &str) -> PResult<()> {
        if *self.peek() == want {
            self.advance();
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    // implication := or_expr ("->" implication)?
    fn implication(&mut self) -> PResult<Formula> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Arrow {
            self.advance();
            let rhs = self.implication()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> PResult<Formula> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Tok::Or {
            self.advance();
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> PResult<Formula> {
        let mut lhs = self.until()?;
        while *self.peek() == Tok::And {
            self.advance();
            let rhs = self.until()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> PResult<Formula> {
        let mut lhs = self.unary()?;
        while let Tok::Until(i) = *self.peek() {
            self.advance();
            let rhs = self.unary()?;
            lhs = Formula::until(i, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Formula> {
        match *self.peek() {
            Tok::Not => {
                self.advance();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Alw(i) => {
                self.advance();
                Ok(Formula::always(i, self.unary()?))
            }
            Tok::Ev(i) => {
                self.advance();
                Ok(Formula::eventually(i, self.unary()?))
            }
            Tok::True => {
                self.advance();
                Ok(Formula::truth())
            }
            Tok::False => {
                self.advance();
                Ok(Formula::False)
            }
            Tok::LParen => {
                // Either a parenthesised formula or an atom whose left side
                // starts with a parenthesised expression.
                let save = self.pos;
                if let Ok(atom) = self.atom() {
                    return Ok(atom);
                }
                self.pos = save;
                self.advance();
                let inner = self.implication()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> PResult<Formula> {
        let lhs = self.expr()?;
        let cmp = match self.peek() {
            Tok::Lt => Tok::Lt,
            Tok::Gt => Tok::Gt,
            _ => return Err(self.unexpected("'<' or '>'")),
        };
        self.advance();
        let rhs = self.expr()?;
        Ok(canonical_atom(lhs, cmp == Tok::Lt, rhs))
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.advance();
                    lhs = Expr::add(lhs, self.term()?);
                }
                Tok::Minus => {
                    self.advance();
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.factor()?;
        while *self.peek() == Tok::Star {
            self.advance();
            lhs = Expr::mul(lhs, self.factor()?);
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Minus => {
                self.advance();
                if let Tok::Num(n) = *self.peek() {
                    self.advance();
                    return Ok(Expr::Const(-n));
                }
                Ok(Expr::neg(self.factor()?))
            }
            Tok::Num(n) => {
                self.advance();
                Ok(Expr::Const(n))
            }
            Tok::Ident(name) => {
                if !self.variables.contains(&name.as_str()) {
                    return Err(self.error_here(ParseErrorKind::UnknownVariable(name)));
                }
                self.advance();
                Ok(Expr::Var(name))
            }
            Tok::Abs => {
                self.advance();
                self.expect(Tok::LParen, "'('")?;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(Expr::abs(inner))
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

fn canonical_atom(lhs: Expr, less: bool, rhs: Expr) -> Formula {
    // Normalise to `big > small`.
    let (big, small) = if less { (rhs, lhs) } else { (lhs, rhs) };
    match (big, small) {
        // abs(e) > c
        (Expr::Abs(e), c) => Formula::or(
            Formula::atom(Expr::sub(*e.clone(), c.clone())),
            Formula::atom(Expr::sub(Expr::neg(*e), c)),
        ),
        // c > abs(e)
        (c, Expr::Abs(e)) => Formula::and(
            Formula::atom(Expr::sub(c.clone(), *e.clone())),
            Formula::atom(Expr::add(c, *e)),
        ),
        (e, Expr::Const(z)) if z == 0.0 && !less => Formula::atom(e),
        (big, small) => Formula::atom(Expr::sub(big, small)),
    }
}

/// Parses one formula. Every identifier must appear in `variables`.
pub fn parse_formula(text: &str, variables: &[&str]) -> Result<Formula, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser {
        toks,
        pos: 0,
        variables,
        furthest: None,
    };
    let result = p.implication().and_then(|f| {
        if *p.peek() == Tok::Eof {
            Ok(f)
        } else {
            Err(p.unexpected("end of input"))
        }
    });
    match result {
        Ok(f) => Ok(f.number_atoms()),
        Err(e) => Err(match p.furthest {
            Some((_, far))
                if far.line > e.line || (far.line == e.line && far.column > e.column) =>
            {
                far
            }
            _ => e,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> TimeInterval {
        TimeInterval::new(lo, hi).unwrap()
    }

    #[test]
    fn parses_intro_spec() {
        let f = parse_formula("alw_[0,100] (v < 10)", &["v"]).unwrap();
        let expected = Formula::always(
            iv(0.0, 100.0),
            Formula::atom(Expr::sub(Expr::Const(10.0), Expr::var("v"))),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn parses_eventually_less_than_zero() {
        let f = parse_formula("ev_[0,5] (a < 0)", &["a"]).unwrap();
        let expected = Formula::eventually(
            iv(0.0, 5.0),
            Formula::atom(Expr::sub(Expr::Const(0.0), Expr::var("a"))),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn implication_is_desugared() {
        let f = parse_formula("x > 0 -> x > 0", &["x"]).unwrap();
        let a = |id| {
            Formula::Atom(Atom {
                id,
                ..Atom::new(Expr::var("x"))
            })
        };
        assert_eq!(f, Formula::or(Formula::not(a(0)), a(1)));
    }

    #[test]
    fn abs_less_expands_to_conjunction() {
        let f = parse_formula("abs(x - y) < 0.1", &["x", "y"]).unwrap();
        let d = Expr::sub(Expr::var("x"), Expr::var("y"));
        let expected = Formula::and(
            Formula::atom(Expr::sub(Expr::Const(0.1), d.clone())),
            Formula::atom(Expr::add(Expr::Const(0.1), d)),
        )
        .number_atoms();
        assert_eq!(f, expected);
    }

    #[test]
    fn abs_expansion_preserves_robustness() {
        let f = parse_formula("abs(x) < 2", &["x"]).unwrap();
        let Formula::And(a, b) = &f else { panic!() };
        let (Formula::Atom(a), Formula::Atom(b)) = (a.as_ref(), b.as_ref()) else {
            panic!()
        };
        for x in [-3.5, -1.25, 0.5, 2.0, 7.0] {
            let look = |_: &str| x;
            assert_eq!(
                a.expr.eval(&look).min(b.expr.eval(&look)),
                2.0 - f64::abs(x)
            );
        }
        let g = parse_formula("abs(x) > 2", &["x"]).unwrap();
        let Formula::Or(a, b) = &g else { panic!() };
        let (Formula::Atom(a), Formula::Atom(b)) = (a.as_ref(), b.as_ref()) else {
            panic!()
        };
        for x in [-3.5, -1.25, 0.5, 2.0, 7.0] {
            let look = |_: &str| x;
            assert_eq!(
                a.expr.eval(&look).max(b.expr.eval(&look)),
                f64::abs(x) - 2.0
            );
        }
    }

    #[test]
    fn precedence_not_until_and_or_implies() {
        let vars = ["p", "q", "r"];
        let f = parse_formula("not p > 0 and q > 0 or r > 0 -> p > 0", &vars).unwrap();
        let Formula::Or(lhs, _) = &f else {
            panic!("implication must be outermost: {f}")
        };
        let Formula::Not(inner) = lhs.as_ref() else {
            panic!()
        };
        let Formula::Or(and, _) = inner.as_ref() else {
            panic!()
        };
        let Formula::And(n, _) = and.as_ref() else {
            panic!()
        };
        assert!(matches!(n.as_ref(), Formula::Not(_)));

        let g = parse_formula("p > 0 and q > 0 until_[0,1] r > 0", &vars).unwrap();
        let Formula::And(_, u) = &g else { panic!() };
        assert!(matches!(u.as_ref(), Formula::Until(..)));
    }

    #[test]
    fn parenthesised_expression_vs_formula() {
        let f = parse_formula("(x + 1) * 2 > 3", &["x"]).unwrap();
        assert!(matches!(f, Formula::Atom(_)));
        let g = parse_formula("((x > 3))", &["x"]).unwrap();
        assert!(matches!(g, Formula::Atom(_)));
        let h = parse_formula("(x > 3) and (x < 5)", &["x"]).unwrap();
        assert!(matches!(h, Formula::And(..)));
    }

    #[test]
    fn errors_carry_position() {
        let e = parse_formula("alw_[0,1] (v < 10", &["v"]).unwrap_err();
        assert_eq!(e.line, 1);
        assert!(matches!(e.kind, ParseErrorKind::Unexpected { .. }));

        let e = parse_formula("alw_[0,1]\n  (w < 10)", &["v"]).unwrap_err();
        assert_eq!((e.line, e.column), (2, 4));
        assert_eq!(e.kind, ParseErrorKind::UnknownVariable("w".into()));

        let e = parse_formula("alw_[5,1] (v < 10)", &["v"]).unwrap_err();
        assert!(matches!(
            e.kind,
            ParseErrorKind::Interval(IntervalError::Reversed { .. })
        ));

        let e = parse_formula("v < 10 $", &["v"]).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnexpectedChar('$'));
    }

    #[test]
    fn horizon_rules() {
        let a = || Formula::atom(Expr::var("x"));
        assert_eq!(a().horizon(), 0.0);
        assert_eq!(Formula::always(iv(10.0, 50.0), a()).horizon(), 50.0);
        let afc3 = Formula::always(
            iv(10.0, 48.0),
            Formula::or(Formula::not(a()), Formula::eventually(iv(0.0, 2.0), a())),
        );
        assert_eq!(afc3.horizon(), 50.0);
        let u = Formula::until(iv(1.0, 3.0), Formula::eventually(iv(0.0, 4.0), a()), a());
        assert_eq!(u.horizon(), 7.0);
        assert_eq!(Formula::not(afc3.clone()).horizon(), afc3.horizon());
    }

    #[test]
    fn atom_inventory() {
        let f = parse_formula("alw_[0,100] (v < 10)", &["v"]).unwrap();
        assert_eq!(f.atoms().len(), 1);
        assert_eq!(f.atoms()[0].id, 0);

        let afc3 = parse_formula(
            "alw_[10,48] (abs(AF - AFref) > 0.08 -> ev_[0,2] (abs(AF - AFref) < 0.08))",
            &["AF", "AFref"],
        )
        .unwrap();
        let ids: Vec<usize> = afc3.atoms().iter().map(|a| a.id).collect();
        assert_eq!(ids, vec![0, 1, 2, 3]);

        assert!(Formula::False.atoms().is_empty());
    }

    #[test]
    fn snapping_rounds_inward() {
        assert_eq!(iv(10.0, 48.5).to_samples(0.5).unwrap(), (20, 97));
        assert_eq!(iv(0.3, 1.0).to_samples(0.25).unwrap(), (2, 4));
        assert_eq!(iv(0.1, 0.3).to_samples(0.1).unwrap(), (1, 3));
        assert!(matches!(
            iv(0.3, 0.4).to_samples(0.5),
            Err(IntervalError::EmptyOnGrid { .. })
        ));
    }

    #[test]
    fn truth_prints_and_parses() {
        let f = parse_formula("true and not false", &[]).unwrap();
        assert_eq!(
            f,
            Formula::and(Formula::truth(), Formula::not(Formula::False))
        );
        assert_eq!(parse_formula(&f.to_string(), &[]).unwrap(), f);
    }
}
