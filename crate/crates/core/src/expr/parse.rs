use thiserror::Error;

use super::ast::{BinaryOp, Expr, UnaryOp};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at byte {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| ParseError {
                position: start,
                message: format!("malformed number `{text}`"),
            })?;
            if !value.is_finite() {
                return Err(ParseError {
                    position: start,
                    message: format!("number `{text}` is out of range"),
                });
            }
            out.push((start, Tok::Num(value)));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if b"+-*/(),".contains(&c) {
            out.push((i, Tok::Sym(c as char)));
            i += 1;
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(ParseError {
                position: i,
                message: format!("unexpected character `{ch}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            position: self.here(),
            message: message.into(),
        })
    }

    fn eat(&mut self, sym: char) -> bool {
        if self.peek() == Some(&Tok::Sym(sym)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: char) -> Result<(), ParseError> {
        if self.eat(sym) {
            Ok(())
        } else {
            self.err(format!("expected `{sym}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinaryOp::Add
            } else if self.eat('-') {
                BinaryOp::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Expr::binary(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinaryOp::Mul
            } else if self.eat('/') {
                BinaryOp::Div
            } else {
                return Ok(lhs);
            };
            lhs = Expr::binary(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            // a minus directly on a literal is a negative constant
            if let Some(Tok::Num(v)) = self.peek() {
                let v = *v;
                self.pos += 1;
                return Ok(Expr::Const(-v));
            }
            return Ok(Expr::unary(UnaryOp::Neg, self.unary()?));
        }
        self.atom()
    }

    fn args(&mut self, n: usize, name: &str) -> Result<Vec<Expr>, ParseError> {
        self.expect('(')?;
        let mut out = vec![self.expr()?];
        while self.eat(',') {
            out.push(self.expr()?);
        }
        self.expect(')')?;
        if out.len() != n {
            return self.err(format!("`{name}` takes {n} argument(s), got {}", out.len()));
        }
        Ok(out)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek() != Some(&Tok::Sym('(')) {
                    return Ok(Expr::Var(name));
                }
                let unary = match name.as_str() {
                    "exp" => Some(UnaryOp::Exp),
                    "log" => Some(UnaryOp::Log),
                    "sqrt" => Some(UnaryOp::Sqrt),
                    "abs" => Some(UnaryOp::Abs),
                    _ => None,
                };
                if let Some(op) = unary {
                    let mut a = self.args(1, &name)?;
                    return Ok(Expr::unary(op, a.remove(0)));
                }
                match name.as_str() {
                    "min" | "max" => {
                        let op = if name == "min" { BinaryOp::Min } else { BinaryOp::Max };
                        let mut a = self.args(2, &name)?;
                        let b = a.pop().unwrap();
                        Ok(Expr::binary(op, a.pop().unwrap(), b))
                    }
                    "if_le" => {
                        let a: [Expr; 4] = self.args(4, &name)?.try_into().unwrap();
                        Ok(Expr::IfLe(Box::new(a)))
                    }
                    _ => self.err(format!("unknown function `{name}`")),
                }
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Some(Tok::Sym(c)) => self.err(format!("unexpected `{c}`")),
            None => self.err("unexpected end of input"),
        }
    }
}

/// Parses expression source. Variable names are not checked here.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: src.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Expr {
        Expr::var(n)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(
            parse("a - b - c").unwrap(),
            Expr::binary(BinaryOp::Sub, Expr::binary(BinaryOp::Sub, v("a"), v("b")), v("c"))
        );
        assert_eq!(
            parse("a + b * c").unwrap(),
            Expr::binary(BinaryOp::Add, v("a"), Expr::binary(BinaryOp::Mul, v("b"), v("c")))
        );
    }

    #[test]
    fn negative_literals_and_negation() {
        assert_eq!(parse("-2.5").unwrap(), Expr::Const(-2.5));
        assert_eq!(parse("-(2.5)").unwrap(), Expr::unary(UnaryOp::Neg, Expr::Const(2.5)));
        assert_eq!(parse("-x").unwrap(), Expr::unary(UnaryOp::Neg, v("x")));
        assert_eq!(parse("1e-3").unwrap(), Expr::Const(0.001));
    }

    #[test]
    fn functions() {
        assert_eq!(
            parse("if_le(a, 1, max(a, b), log(b))").unwrap(),
            Expr::if_le(
                v("a"),
                Expr::Const(1.0),
                Expr::binary(BinaryOp::Max, v("a"), v("b")),
                Expr::unary(UnaryOp::Log, v("b"))
            )
        );
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(parse("a +").unwrap_err().position, 3);
        assert!(parse("foo(1)").is_err());
        assert!(parse("max(1)").is_err());
        assert!(parse("1 $ 2").is_err());
        assert!(parse("(1").is_err());
        assert!(parse("1 2").is_err());
        assert!(parse("1e999").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn display_examples() {
        let e = parse("-(3) - -x * min(2, -1.5)").unwrap();
        assert_eq!(e.to_string(), "(-(3.0) - (-x * min(2.0, (-1.5))))");
        assert_eq!(parse(&e.to_string()).unwrap(), e);
    }
}
