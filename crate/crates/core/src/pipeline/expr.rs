//! Laurent-polynomial expressions in `z`.
//!
//! ```text
//! expr   := ['+' | '-'] term (('+' | '-') term)*
//! term   := factor (['*' | '/'] factor)*        juxtaposition multiplies
//! factor := atom ['^' ['-'] integer]
//! atom   := number ['i'] | 'i' | 'z' | '(' expr ')'
//! ```
//!
//! Numbers use Rust's correctly rounded `f64` parsing. Division is only by
//! constants. Negative powers are only allowed for `z` or `(z - c)` with a
//! constant `c`, and the centers must be holes of the domain.

use crate::error::{Error, Result};
use crate::geometry::PlanarDomain;
use crate::holofun::HoloFunction;
use num_complex::Complex64 as C64;

type Holo = HoloFunction<f64>;

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Imag,
    Z,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Open,
    Close,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        match ch {
            ' ' | '\t' => {
                i += 1;
                continue;
            }
            '+' => out.push(Token::Plus),
            '-' => out.push(Token::Minus),
            '*' => out.push(Token::Star),
            '/' => out.push(Token::Slash),
            '^' => out.push(Token::Caret),
            '(' => out.push(Token::Open),
            ')' => out.push(Token::Close),
            'z' => out.push(Token::Z),
            'i' => out.push(Token::Imag),
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                // exponent part, e.g. 1e-3
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::Config(format!("bad number '{text}' in expression '{src}'")))?;
                out.push(Token::Num(v));
                continue;
            }
            other => return Err(Error::Config(format!("unexpected '{other}' in expression '{src}'"))),
        }
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn fail(&self, msg: &str) -> Error {
        Error::Config(format!("{msg} in expression '{}'", self.src))
    }

    fn expr(&mut self) -> Result<Holo> {
        let mut acc = match self.peek() {
            Some(Token::Minus) => {
                self.pos += 1;
                self.term()?.scale(C64::new(-1.0, 0.0))
            }
            Some(Token::Plus) => {
                self.pos += 1;
                self.term()?
            }
            _ => self.term()?,
        };
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Holo> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    acc = acc.mul(&self.factor()?);
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    let d = self.factor()?;
                    let c = constant_value(&d).ok_or_else(|| self.fail("division by a non-constant"))?;
                    if c == C64::new(0.0, 0.0) {
                        return Err(self.fail("division by zero"));
                    }
                    acc = acc.scale(C64::new(1.0, 0.0) / c);
                }
                Some(Token::Num(_)) | Some(Token::Imag) | Some(Token::Z) | Some(Token::Open) => {
                    acc = acc.mul(&self.factor()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Holo> {
        let base = self.atom()?;
        if self.peek() != Some(&Token::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        let negative = if self.peek() == Some(&Token::Minus) {
            self.pos += 1;
            true
        } else {
            false
        };
        let k = match self.next() {
            Some(Token::Num(v)) if v.fract() == 0.0 && v <= 64.0 => v as i32,
            _ => return Err(self.fail("exponent must be an integer up to 64")),
        };
        if !negative {
            let mut out = Holo::constant(C64::new(1.0, 0.0));
            for _ in 0..k {
                out = out.mul(&base);
            }
            return Ok(out);
        }
        let (center, lead) = linear_form(&base).ok_or_else(|| self.fail("negative powers need z or (z - c)"))?;
        Ok(Holo::monomial(center, -k, lead.powi(-k)))
    }

    fn atom(&mut self) -> Result<Holo> {
        match self.next() {
            Some(Token::Num(v)) => {
                if self.peek() == Some(&Token::Imag) {
                    self.pos += 1;
                    Ok(Holo::constant(C64::new(0.0, v)))
                } else {
                    Ok(Holo::constant(C64::new(v, 0.0)))
                }
            }
            Some(Token::Imag) => Ok(Holo::constant(C64::new(0.0, 1.0))),
            Some(Token::Z) => Ok(Holo::identity()),
            Some(Token::Open) => {
                let e = self.expr()?;
                match self.next() {
                    Some(Token::Close) => Ok(e),
                    _ => Err(self.fail("missing ')'")),
                }
            }
            _ => Err(self.fail("expected a number, 'i', 'z' or '('")),
        }
    }
}

fn raw_terms(f: &Holo) -> Vec<(C64, i32, C64)> {
    let mut out = Vec::new();
    for e in f.expansions() {
        for (j, c) in e.coeffs.iter().enumerate() {
            if *c != C64::new(0.0, 0.0) {
                let k = e.min_pow + j as i32;
                out.push((e.center, k, *c / e.scale.powi(k)));
            }
        }
    }
    out
}

fn constant_value(f: &Holo) -> Option<C64> {
    let mut c = C64::new(0.0, 0.0);
    for (_, k, a) in raw_terms(f) {
        if k != 0 {
            return None;
        }
        c += a;
    }
    Some(c)
}

/// `lead·(z - center)` view of a degree-one polynomial.
fn linear_form(f: &Holo) -> Option<(C64, C64)> {
    let terms = raw_terms(f);
    if terms.iter().any(|t| t.1 != 0 && t.1 != 1) {
        return None;
    }
    let lead: C64 = terms.iter().filter(|t| t.1 == 1).map(|t| t.2).sum();
    if lead == C64::new(0.0, 0.0) {
        return None;
    }
    Some((-f.eval(C64::new(0.0, 0.0)) / lead, lead))
}

/// Parses an expression and registers it on the domain.
pub fn parse_expression(src: &str, domain: &PlanarDomain<f64>) -> Result<Holo> {
    let tokens = tokenize(src)?;
    if tokens.is_empty() {
        return Err(Error::Config("empty expression".into()));
    }
    let mut p = Parser { tokens, pos: 0, src };
    let f = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(p.fail("trailing input"));
    }
    f.on_domain(domain)
        .map_err(|e| Error::Config(format!("expression '{src}': {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Circle;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn disk() -> PlanarDomain<f64> {
        PlanarDomain::disk(c(0.0, 0.0), 2.0).unwrap()
    }

    #[test]
    fn polynomial_expressions() {
        let d = disk();
        let f = parse_expression("1 - z^2 + 0.5i z", &d).unwrap();
        let z = c(0.3, -0.7);
        assert!((f.eval(z) - (1.0 - z * z + c(0.0, 0.5) * z)).norm() < 1e-15);
        let g = parse_expression("-(z - 1)(z + 2i)/4", &d).unwrap();
        assert!((g.eval(z) + (z - 1.0) * (z + c(0.0, 2.0)) / 4.0).norm() < 1e-15);
        assert_eq!(parse_expression("2.5e-1", &d).unwrap().eval(z), c(0.25, 0.0));
        assert_eq!(parse_expression("i", &d).unwrap().eval(z), c(0.0, 1.0));
    }

    #[test]
    fn laurent_terms_need_hole_centers() {
        let ann = PlanarDomain::new(Circle::new(c(0.0, 0.0), 2.0), vec![Circle::new(c(0.5, 0.0), 0.2)], 64).unwrap();
        let f = parse_expression("3(z - 0.5)^-2 + z", &ann).unwrap();
        let z = c(1.2, 0.4);
        assert!((f.eval(z) - (3.0 / ((z - 0.5) * (z - 0.5)) + z)).norm() < 1e-13);
        let g = parse_expression("(2z - 1)^-1", &ann).unwrap();
        assert!((g.eval(z) - 1.0 / (2.0 * z - 1.0)).norm() < 1e-14);
        assert!(parse_expression("z^-1", &ann).is_err());
        assert!(parse_expression("z^-1", &disk()).is_err());
    }

    #[test]
    fn malformed_expressions() {
        let d = disk();
        for bad in ["", "z +", "(z", "z^1.5", "1/z", "z ^ (2)", "x"] {
            let e = parse_expression(bad, &d).unwrap_err();
            assert_eq!(e.code(), "CONFIG_INVALID", "{bad}");
        }
    }
}
