//! Parser for polynomial expressions such as `1+2.25*(3*x^2-1)` or `2 + xi1*xi2/3`.
//!
//! Variables: `x`, `y`, `z`, `xi`/`ξ` (first coordinate) and `xi1`..`xi3` / `ξ1`..`ξ3`.
//! Division is allowed by constants only.

use crate::error::{Error, Result};
use crate::poly::Polynomial;

pub fn parse_polynomial(src: &str, nvars: usize) -> Result<Polynomial> {
    let tokens = tokenize(src)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        nvars,
        src,
    };
    let out = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(out)
}

/// Parses `max(e1, e2, ...)` where each argument is affine; returns (gradient, constant) pieces.
pub fn parse_pl_max(src: &str, nvars: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    let s = src.trim();
    let inner = s
        .strip_prefix("max")
        .map(str::trim_start)
        .and_then(|r| r.strip_prefix('('))
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| Error::Parse(format!("expected max(...) in `{src}`")))?;
    let mut args = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in inner.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                args.push(&inner[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    args.push(&inner[start..]);
    args.iter()
        .map(|a| {
            let p = parse_polynomial(a, nvars)?;
            if !p.is_affine() {
                return Err(Error::Parse(format!("piece `{}` is not affine", a.trim())));
            }
            let (c, g) = p.affine_part();
            Ok((g, c))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Var(usize),
    Op(char),
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
            let st = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[st..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{s}`")))?;
            out.push(Tok::Num(v));
        } else if c.is_alphabetic() {
            let st = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let s: String = chars[st..i].iter().collect();
            let idx = match s.as_str() {
                "x" | "xi" | "ξ" | "xi1" | "ξ1" | "x1" | "xi_1" => 0,
                "y" | "xi2" | "ξ2" | "x2" | "xi_2" => 1,
                "z" | "xi3" | "ξ3" | "x3" | "xi_3" => 2,
                _ => return Err(Error::Parse(format!("unknown identifier `{s}`"))),
            };
            out.push(Tok::Var(idx));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    nvars: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at token {} in `{}`", self.pos, self.src))
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Polynomial> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat('-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = acc.mul(&self.unary()?);
            } else if self.eat('/') {
                let d = self.unary()?;
                if !d.is_constant() {
                    return Err(self.error("division by a non-constant"));
                }
                let c = d.coeff(&vec![0; d.nvars()]);
                if c == 0.0 {
                    return Err(self.error("division by zero"));
                }
                acc = acc.scale(1.0 / c);
            } else if matches!(self.peek(), Some(Tok::Var(_)) | Some(Tok::Op('('))) {
                // implicit product such as `3x` or `2(x+1)`
                acc = acc.mul(&self.unary()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Polynomial> {
        if self.eat('-') {
            return Ok(self.unary()?.scale(-1.0));
        }
        if self.eat('+') {
            return self.unary();
        }
        let base = self.primary()?;
        if self.eat('^') {
            let neg = self.eat('-');
            match self.peek().cloned() {
                Some(Tok::Num(k)) if !neg && k.fract() == 0.0 && (0.0..=64.0).contains(&k) => {
                    self.pos += 1;
                    Ok(base.pow(k as u32))
                }
                _ => Err(self.error("exponent must be a non-negative integer")),
            }
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Polynomial> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Polynomial::constant(self.nvars, v))
            }
            Some(Tok::Var(i)) => {
                if i >= self.nvars {
                    return Err(self.error(&format!(
                        "variable index {} exceeds dimension {}",
                        i + 1,
                        self.nvars
                    )));
                }
                self.pos += 1;
                Ok(Polynomial::var(self.nvars, i))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("missing `)`"));
                }
                Ok(e)
            }
            _ => Err(self.error("expected a number, variable or `(`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_family() {
        let p = parse_polynomial("1+2.25*(3*x^2-1)", 1).unwrap();
        assert_eq!(p.coeff(&[0]), 1.0 - 2.25);
        assert_eq!(p.coeff(&[2]), 6.75);
    }

    #[test]
    fn rationals_and_aliases() {
        let p = parse_polynomial("1/3 + ξ1*xi2/2 - y^2", 2).unwrap();
        assert!((p.eval(&[2.0, 3.0]) - (1.0 / 3.0 + 3.0 - 9.0)).abs() < 1e-15);
        let q = parse_polynomial("2x(1+y)", 2).unwrap();
        assert_eq!(q.eval(&[1.0, 2.0]), 6.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_polynomial("1/x", 1).is_err());
        assert!(parse_polynomial("y", 1).is_err());
        assert!(parse_polynomial("x^-1", 1).is_err());
        assert!(parse_polynomial("sin(x)", 1).is_err());
        assert!(parse_polynomial("(x+1", 1).is_err());
    }

    #[test]
    fn pl_max() {
        let pieces = parse_pl_max("max(0, x)", 1).unwrap();
        assert_eq!(pieces, vec![(vec![0.0], 0.0), (vec![1.0], 0.0)]);
        let pieces = parse_pl_max("max(x-1/4, 1/4-x)", 1).unwrap();
        assert_eq!(pieces[1], (vec![-1.0], 0.25));
        assert!(parse_pl_max("max(x^2, 0)", 1).is_err());
    }
}
