//! A small arithmetic grammar in one variable `u`, used for custom kernels and
//! analytic densities supplied through JSON.
//!
//! Supported: numbers, `u`, `pi`, `+ - * / ^`, parentheses and the functions
//! `exp`, `log`, `sqrt`, `sin`, `cos`, `abs`.

use crate::error::{LevyError, Result};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var,
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Abs,
}

impl Node {
    fn eval(&self, u: f64) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Var => u,
            Node::Neg(a) => -a.eval(u),
            Node::Bin(op, a, b) => {
                let (x, y) = (a.eval(u), b.eval(u));
                match op {
                    Op::Add => x + y,
                    Op::Sub => x - y,
                    Op::Mul => x * y,
                    Op::Div => x / y,
                    Op::Pow => {
                        if y.fract() == 0.0 && y.abs() < 64.0 {
                            x.powi(y as i32)
                        } else {
                            x.powf(y)
                        }
                    }
                }
            }
            Node::Call(f, a) => {
                let x = a.eval(u);
                match f {
                    Func::Exp => x.exp(),
                    Func::Log => x.ln(),
                    Func::Sqrt => x.sqrt(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Abs => x.abs(),
                }
            }
        }
    }
}

/// A parsed expression. Cheap to clone and safe to share across threads.
#[derive(Clone)]
pub struct Expr {
    src: String,
    root: Arc<Node>,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.src)
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.src == other.src
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(LevyError::Parse(format!(
                "unexpected token {:?} at position {} in {src:?}",
                p.tokens[p.pos], p.pos
            )));
        }
        Ok(Expr {
            src: src.to_string(),
            root: Arc::new(root),
        })
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        self.root.eval(u)
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    /// Replaces every occurrence of `u` by `(replacement)` and wraps the result
    /// as `outer` with `{}` standing for the substituted expression.
    pub fn rewrite(&self, replacement: &str, outer: &str) -> Result<Expr> {
        let mut body = String::new();
        for tok in tokenize(&self.src)? {
            match tok {
                Tok::Num(v) => body.push_str(&format!("{v:?}")),
                Tok::Ident(name) if name == "u" => {
                    body.push('(');
                    body.push_str(replacement);
                    body.push(')');
                }
                Tok::Ident(name) => body.push_str(&name),
                Tok::Sym(c) => body.push(c),
            }
            body.push(' ');
        }
        Expr::parse(&outer.replace("{}", &format!("({})", body.trim_end())))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| LevyError::Parse(format!("bad number {s:?} at {start}")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else if c == '−' {
            out.push(Tok::Sym('-'));
            i += 1;
        } else {
            return Err(LevyError::Parse(format!("unexpected character {c:?} at {i}")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Bin(Op::Add, Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Bin(Op::Sub, Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Bin(Op::Mul, Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Bin(Op::Div, Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self
            .peek()
            .cloned()
            .ok_or_else(|| LevyError::Parse("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(LevyError::Parse("missing ')'".into()));
                }
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "u" => Ok(Node::Var),
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                _ => {
                    let f = match name.as_str() {
                        "exp" => Func::Exp,
                        "log" | "ln" => Func::Log,
                        "sqrt" => Func::Sqrt,
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "abs" => Func::Abs,
                        other => {
                            return Err(LevyError::Parse(format!("unknown identifier {other:?}")))
                        }
                    };
                    if !self.eat('(') {
                        return Err(LevyError::Parse(format!("expected '(' after {name}")));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(LevyError::Parse("missing ')'".into()));
                    }
                    Ok(Node::Call(f, Box::new(arg)))
                }
            },
            Tok::Sym(c) => Err(LevyError::Parse(format!("unexpected symbol {c:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_power() {
        let e = Expr::parse("1 + 2*u^2 - u/4").unwrap();
        assert_eq!(e.eval(2.0), 1.0 + 8.0 - 0.5);
        let e = Expr::parse("-u^2").unwrap();
        assert_eq!(e.eval(3.0), -9.0);
        let e = Expr::parse("u^-3").unwrap();
        assert!((e.eval(2.0) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn functions() {
        let e = Expr::parse("u^(-1.5)*exp(-u) + log(u)").unwrap();
        let u: f64 = 1.7;
        assert!((e.eval(u) - (u.powf(-1.5) * (-u).exp() + u.ln())).abs() < 1e-15);
        let e = Expr::parse("1e-3*sqrt(u)").unwrap();
        assert!((e.eval(4.0) - 2e-3).abs() < 1e-18);
    }

    #[test]
    fn rewrite_substitutes_variable() {
        let e = Expr::parse("u^(-1.5)*exp(-u)").unwrap();
        let inv = e.rewrite("1/u", "u^(-4)*{}").unwrap();
        let u: f64 = 0.8;
        let want = u.powi(-4) * e.eval(1.0 / u);
        assert!((inv.eval(u) - want).abs() < 1e-13 * want);
    }

    #[test]
    fn errors_are_reported() {
        assert!(Expr::parse("u +").is_err());
        assert!(Expr::parse("foo(u)").is_err());
        assert!(Expr::parse("(u").is_err());
        assert!(Expr::parse("u $ 2").is_err());
    }
}
