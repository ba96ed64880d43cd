//! Coordinate expressions: parsing, serialization and jet evaluation.
//!
//! Expressions are written in the variables `x1..x9` with numeric literals,
//! the operators `+ - * / ^` (with `^` restricted to a numeric exponent and
//! right-associative), unary minus, and the functions `sin cos tan exp ln
//! sqrt sinh cosh`. The grammar, in EBNF:
//!
//! ```text
//! expression = term { ("+" | "-") term } ;
//! term       = factor { ("*" | "/") factor } ;
//! factor     = "-" factor | power ;
//! power      = atom [ "^" exponent ] ;
//! exponent   = literal | "(" literal ")" ;        (* chains fold right *)
//! literal    = [ "-" ] number ;
//! atom       = number | variable | function "(" expression ")"
//!            | "(" expression ")" ;
//! variable   = "x1" .. "x9" ;
//! function   = "sin" | "cos" | "tan" | "exp" | "ln" | "sqrt"
//!            | "sinh" | "cosh" ;
//! ```
//!
//! Parsed expressions are immutable; evaluation takes the point as an
//! argument and returns a [`Jet2`] carrying value, gradient and Hessian.

mod jet2;

use std::fmt;

pub use jet2::Jet2;
pub(crate) use jet2::{pow_derivs, sym_index};

/// Built-in univariate functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Sinh,
    Cosh,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    /// Zero-based coordinate index.
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    /// Base raised to a constant (possibly non-integer) exponent.
    Pow(Box<Node>, f64),
    Func(Func, Box<Node>),
}

/// A parsed coordinate expression bound to a dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    dim: usize,
    root: Node,
}

/// Parse failure with a byte position into the source text.
#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { pos: usize, name: String },
    #[error("variable x{index} exceeds dimension {dim} (position {pos})")]
    VariableOutOfRange { pos: usize, index: usize, dim: usize },
}

/// Evaluation failure: the point lies outside the domain of some
/// subexpression. The offending subexpression is reported verbatim.
#[derive(Debug, Clone, thiserror::Error, PartialEq)]
#[error("{reason} in `{subexpression}`")]
pub struct DomainError {
    pub reason: String,
    pub subexpression: String,
}

impl Expression {
    /// Parse `source` against a declared dimension `n`; every variable index
    /// referenced must be `<= n`.
    pub fn parse(source: &str, dim: usize) -> Result<Expression, ParseError> {
        let tokens = lex(source)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            dim,
            src_len: source.len(),
        };
        let root = parser.expression()?;
        if let Some(tok) = parser.peek() {
            return Err(ParseError::Syntax {
                pos: tok.pos,
                msg: format!("unexpected `{}`", tok.kind.describe()),
            });
        }
        Ok(Expression { dim, root })
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Value, gradient and Hessian at `x`.
    pub fn eval_jet2(&self, x: &[f64]) -> Result<Jet2, DomainError> {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        eval_node_jet(&self.root, x)
    }

    /// Plain value at `x`, computed without jet arithmetic. Used as the
    /// independent side of finite-difference checks.
    pub fn eval_value(&self, x: &[f64]) -> Result<f64, DomainError> {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        eval_node_value(&self.root, x)
    }

    /// Maximum absolute difference between the jet derivatives and central
    /// finite differences with the given step.
    ///
    /// The gradient is checked against central differences of plain values;
    /// the Hessian against central differences of the gradient. Differencing
    /// values twice would put the roundoff floor near `4 ε |f| / step²` and
    /// drown the O(step²) truncation this residual is meant to expose.
    pub fn fd_validate(&self, x: &[f64], step: f64) -> Result<f64, DomainError> {
        assert!(step > 0.0, "step must be positive");
        let n = self.dim;
        let jet = self.eval_jet2(x)?;
        let mut shifted = x.to_vec();
        let mut worst = 0.0_f64;

        for i in 0..n {
            shifted.copy_from_slice(x);
            shifted[i] = x[i] + step;
            let fp = self.eval_value(&shifted)?;
            let gp = self.eval_jet2(&shifted)?;
            shifted[i] = x[i] - step;
            let fm = self.eval_value(&shifted)?;
            let gm = self.eval_jet2(&shifted)?;
            let grad_fd = (fp - fm) / (2.0 * step);
            worst = worst.max((jet.grad()[i] - grad_fd).abs());
            for j in 0..n {
                let hess_fd = (gp.grad()[j] - gm.grad()[j]) / (2.0 * step);
                worst = worst.max((jet.hess(i, j) - hess_fd).abs());
            }
        }
        Ok(worst)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root, 0)
    }
}

// Precedence levels for the printer: 1 additive, 2 multiplicative,
// 3 unary minus, 4 power.
fn node_prec(node: &Node) -> u8 {
    match node {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(..) => 3,
        Node::Pow(..) => 4,
        Node::Const(v) if *v < 0.0 => 3,
        Node::Const(..) | Node::Var(..) | Node::Func(..) => 5,
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node, parent_prec: u8) -> fmt::Result {
    let prec = node_prec(node);
    let parens = prec < parent_prec;
    if parens {
        f.write_str("(")?;
    }
    match node {
        Node::Const(v) => write!(f, "{v}")?,
        Node::Var(i) => write!(f, "x{}", i + 1)?,
        Node::Neg(inner) => {
            f.write_str("-")?;
            write_node(f, inner, 4)?;
        }
        Node::Add(a, b) => {
            write_node(f, a, 1)?;
            f.write_str(" + ")?;
            // Right operand needs parens when it is itself additive, so the
            // reparse groups identically.
            write_node(f, b, 2)?;
        }
        Node::Sub(a, b) => {
            write_node(f, a, 1)?;
            f.write_str(" - ")?;
            write_node(f, b, 2)?;
        }
        Node::Mul(a, b) => {
            write_node(f, a, 2)?;
            f.write_str("*")?;
            write_node(f, b, 3)?;
        }
        Node::Div(a, b) => {
            write_node(f, a, 2)?;
            f.write_str("/")?;
            write_node(f, b, 3)?;
        }
        Node::Pow(base, expo) => {
            write_node(f, base, 5)?;
            if *expo < 0.0 {
                write!(f, "^({expo})")?;
            } else {
                write!(f, "^{expo}")?;
            }
        }
        Node::Func(func, arg) => {
            write!(f, "{}(", func.name())?;
            write_node(f, arg, 0)?;
            f.write_str(")")?;
        }
    }
    if parens {
        f.write_str(")")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Number(v) => format!("number {v}"),
            TokenKind::Ident(s) => s.clone(),
            TokenKind::Plus => "+".into(),
            TokenKind::Minus => "-".into(),
            TokenKind::Star => "*".into(),
            TokenKind::Slash => "/".into(),
            TokenKind::Caret => "^".into(),
            TokenKind::LParen => "(".into(),
            TokenKind::RParen => ")".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    pos: usize,
}

fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let pos = i;
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                i += 1;
            }
            '+' | '-' | '*' | '/' | '^' | '(' | ')' => {
                let kind = match c {
                    '+' => TokenKind::Plus,
                    '-' => TokenKind::Minus,
                    '*' => TokenKind::Star,
                    '/' => TokenKind::Slash,
                    '^' => TokenKind::Caret,
                    '(' => TokenKind::LParen,
                    _ => TokenKind::RParen,
                };
                tokens.push(Token { kind, pos });
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // Exponent part: e or E, optional sign, digits.
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &source[start..i];
                let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                    pos: start,
                    msg: format!("malformed number `{text}`"),
                })?;
                tokens.push(Token {
                    kind: TokenKind::Number(value),
                    pos: start,
                });
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(source[start..i].to_string()),
                    pos: start,
                });
            }
            other => {
                return Err(ParseError::Syntax {
                    pos,
                    msg: format!("unexpected character `{other}`"),
                });
            }
        }
    }
    Ok(tokens)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    dim: usize,
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&Token> {
        let tok = self.tokens.get(self.pos);
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn eof_error(&self, expected: &str) -> ParseError {
        ParseError::Syntax {
            pos: self.src_len,
            msg: format!("unexpected end of input, expected {expected}"),
        }
    }

    fn expect(&mut self, kind: &TokenKind, expected: &str) -> Result<(), ParseError> {
        match self.next() {
            Some(tok) if &tok.kind == kind => Ok(()),
            Some(tok) => Err(ParseError::Syntax {
                pos: tok.pos,
                msg: format!("expected {expected}, found `{}`", tok.kind.describe()),
            }),
            None => Err(self.eof_error(expected)),
        }
    }

    fn expression(&mut self) -> Result<Node, ParseError> {
        let mut node = self.term()?;
        loop {
            match self.peek().map(|t| t.kind.clone()) {
                Some(TokenKind::Plus) => {
                    self.pos += 1;
                    node = Node::Add(Box::new(node), Box::new(self.term()?));
                }
                Some(TokenKind::Minus) => {
                    self.pos += 1;
                    node = Node::Sub(Box::new(node), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(node)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut node = self.factor()?;
        loop {
            match self.peek().map(|t| t.kind.clone()) {
                Some(TokenKind::Star) => {
                    self.pos += 1;
                    node = Node::Mul(Box::new(node), Box::new(self.factor()?));
                }
                Some(TokenKind::Slash) => {
                    self.pos += 1;
                    node = Node::Div(Box::new(node), Box::new(self.factor()?));
                }
                _ => break,
            }
        }
        Ok(node)
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Minus)) {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Caret)) {
            self.pos += 1;
            let expo = self.exponent_chain()?;
            return Ok(Node::Pow(Box::new(base), expo));
        }
        Ok(base)
    }

    /// The exponent is a numeric literal (optionally negated, optionally in
    /// parentheses). `a^b^c` folds right-associatively to `a^(b^c)`.
    fn exponent_chain(&mut self) -> Result<f64, ParseError> {
        let value = self.exponent_literal()?;
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Caret)) {
            self.pos += 1;
            let rest = self.exponent_chain()?;
            return Ok(value.powf(rest));
        }
        Ok(value)
    }

    fn exponent_literal(&mut self) -> Result<f64, ParseError> {
        let mut sign = 1.0;
        let mut parenthesized = false;
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::LParen)) {
            self.pos += 1;
            parenthesized = true;
        }
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Minus)) {
            self.pos += 1;
            sign = -1.0;
        }
        let value = match self.next() {
            Some(tok) => match tok.kind {
                TokenKind::Number(v) => v,
                _ => {
                    return Err(ParseError::Syntax {
                        pos: tok.pos,
                        msg: format!(
                            "exponent must be a numeric literal, found `{}`",
                            tok.kind.describe()
                        ),
                    })
                }
            },
            None => return Err(self.eof_error("a numeric exponent")),
        };
        if parenthesized {
            self.expect(&TokenKind::RParen, "`)` after exponent")?;
        }
        Ok(sign * value)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let tok = match self.next() {
            Some(tok) => tok.clone(),
            None => return Err(self.eof_error("an operand")),
        };
        match tok.kind {
            TokenKind::Number(v) => Ok(Node::Const(v)),
            TokenKind::LParen => {
                let inner = self.expression()?;
                self.expect(&TokenKind::RParen, "`)`")?;
                Ok(inner)
            }
            TokenKind::Ident(name) => self.ident(&name, tok.pos),
            other => Err(ParseError::Syntax {
                pos: tok.pos,
                msg: format!("expected an operand, found `{}`", other.describe()),
            }),
        }
    }

    fn ident(&mut self, name: &str, pos: usize) -> Result<Node, ParseError> {
        if let Some(rest) = name.strip_prefix('x') {
            if rest.len() == 1 && rest.as_bytes()[0].is_ascii_digit() && rest != "0" {
                let index: usize = rest.parse().unwrap();
                if index > self.dim {
                    return Err(ParseError::VariableOutOfRange {
                        pos,
                        index,
                        dim: self.dim,
                    });
                }
                return Ok(Node::Var(index - 1));
            }
        }
        if let Some(func) = Func::from_name(name) {
            self.expect(&TokenKind::LParen, "`(` after function name")?;
            let arg = self.expression()?;
            self.expect(&TokenKind::RParen, "`)`")?;
            return Ok(Node::Func(func, Box::new(arg)));
        }
        Err(ParseError::UnknownIdentifier {
            pos,
            name: name.to_string(),
        })
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn domain_error(reason: impl Into<String>, node: &Node) -> DomainError {
    struct NodeDisplay<'a>(&'a Node);
    impl fmt::Display for NodeDisplay<'_> {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            write_node(f, self.0, 0)
        }
    }
    DomainError {
        reason: reason.into(),
        subexpression: NodeDisplay(node).to_string(),
    }
}

fn check_pow_domain(base: f64, expo: f64, node: &Node) -> Result<(), DomainError> {
    let integer_exponent = expo.fract() == 0.0 && expo.abs() < 2.0_f64.powi(53);
    if integer_exponent {
        if base == 0.0 && expo < 0.0 {
            return Err(domain_error("zero raised to a negative power", node));
        }
    } else if base <= 0.0 {
        return Err(domain_error(
            "non-integer power of a non-positive base",
            node,
        ));
    }
    Ok(())
}

fn check_func_domain(func: Func, x: f64, node: &Node) -> Result<(), DomainError> {
    match func {
        Func::Ln if x <= 0.0 => Err(domain_error("logarithm of a non-positive value", node)),
        Func::Sqrt if x < 0.0 => Err(domain_error("square root of a negative value", node)),
        // sqrt has an unbounded derivative at 0; the jet is undefined there.
        Func::Sqrt if x == 0.0 => Err(domain_error("square root evaluated at zero", node)),
        _ => Ok(()),
    }
}

fn eval_node_jet(node: &Node, x: &[f64]) -> Result<Jet2, DomainError> {
    let n = x.len();
    let jet = match node {
        Node::Const(v) => Jet2::constant(n, *v),
        Node::Var(i) => Jet2::variable(n, *i, x[*i]),
        Node::Neg(a) => eval_node_jet(a, x)?.neg(),
        Node::Add(a, b) => eval_node_jet(a, x)?.add(&eval_node_jet(b, x)?),
        Node::Sub(a, b) => eval_node_jet(a, x)?.sub(&eval_node_jet(b, x)?),
        Node::Mul(a, b) => eval_node_jet(a, x)?.mul(&eval_node_jet(b, x)?),
        Node::Div(a, b) => {
            let num = eval_node_jet(a, x)?;
            let den = eval_node_jet(b, x)?;
            if den.value() == 0.0 {
                return Err(domain_error("division by zero", node));
            }
            num.div(&den)
        }
        Node::Pow(base, expo) => {
            let b = eval_node_jet(base, x)?;
            check_pow_domain(b.value(), *expo, node)?;
            b.powf(*expo)
        }
        Node::Func(func, arg) => {
            let a = eval_node_jet(arg, x)?;
            check_func_domain(*func, a.value(), node)?;
            match func {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Exp => a.exp(),
                Func::Ln => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Sinh => a.sinh(),
                Func::Cosh => a.cosh(),
            }
        }
    };
    if !jet.value().is_finite() {
        return Err(domain_error("non-finite value", node));
    }
    Ok(jet)
}

fn eval_node_value(node: &Node, x: &[f64]) -> Result<f64, DomainError> {
    let v = match node {
        Node::Const(v) => *v,
        Node::Var(i) => x[*i],
        Node::Neg(a) => -eval_node_value(a, x)?,
        Node::Add(a, b) => eval_node_value(a, x)? + eval_node_value(b, x)?,
        Node::Sub(a, b) => eval_node_value(a, x)? - eval_node_value(b, x)?,
        Node::Mul(a, b) => eval_node_value(a, x)? * eval_node_value(b, x)?,
        Node::Div(a, b) => {
            let num = eval_node_value(a, x)?;
            let den = eval_node_value(b, x)?;
            if den == 0.0 {
                return Err(domain_error("division by zero", node));
            }
            num / den
        }
        Node::Pow(base, expo) => {
            let b = eval_node_value(base, x)?;
            check_pow_domain(b, *expo, node)?;
            b.powf(*expo)
        }
        Node::Func(func, arg) => {
            let a = eval_node_value(arg, x)?;
            check_func_domain(*func, a, node)?;
            match func {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Exp => a.exp(),
                Func::Ln => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Sinh => a.sinh(),
                Func::Cosh => a.cosh(),
            }
        }
    };
    if !v.is_finite() {
        return Err(domain_error("non-finite value", node));
    }
    Ok(v)
}

#[cfg(test)]
mod tests;
