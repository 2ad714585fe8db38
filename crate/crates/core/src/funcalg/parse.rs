//! Textual expression format for control functions.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr := piece(lo, hi; a, p, b)        closed form a·x^p + b on [lo, hi]
//!       | compose(expr, expr)           outer ∘ inner
//!       | paste(expr, expr, ...)        concatenate contiguous expressions
//!       | iter(expr, n)                 n-fold composition
//!       | restrict(expr, lo, hi)        domain restriction
//!       | id                            the identity on [0, inf)
//! ```
//!
//! Rationals are `p/q`, integers or exact decimals; `hi` may be `inf`.
//! Exponents are natural numbers (exact evaluation needs integer powers).

use super::{compose, iterate, ControlFunction, Form, FuncError, Poly, Scale, Seg};
use crate::rational::{format_rat, parse_rat, Rat};
use num_bigint::BigUint;
use num_traits::{One, Zero};

pub fn parse_function(input: &str, scale: Scale) -> Result<ControlFunction, FuncError> {
    let mut p = Parser {
        src: input,
        pos: 0,
        scale,
    };
    let f = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(FuncError::Malformed(format!(
            "trailing input at byte {}: `{}`",
            p.pos,
            &p.src[p.pos..]
        )));
    }
    Ok(f)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    scale: Scale,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len()
            && self.src.as_bytes()[self.pos].is_ascii_whitespace()
        {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn expect(&mut self, c: char) -> Result<(), FuncError> {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(FuncError::Malformed(format!(
                "expected `{c}` at byte {} in `{}`",
                self.pos, self.src
            )))
        }
    }

    fn ident(&mut self) -> Result<String, FuncError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src.as_bytes()[self.pos];
            if c.is_ascii_alphabetic() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if start == self.pos {
            return Err(FuncError::Malformed(format!(
                "expected a function name at byte {start}"
            )));
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn number(&mut self) -> Result<Rat, FuncError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src.as_bytes()[self.pos];
            if c.is_ascii_digit() || matches!(c, b'-' | b'+' | b'.' | b'/') {
                self.pos += 1;
            } else {
                break;
            }
        }
        parse_rat(&self.src[start..self.pos]).map_err(FuncError::Malformed)
    }

    fn upper_bound(&mut self) -> Result<Option<Rat>, FuncError> {
        self.skip_ws();
        if self.src[self.pos..].starts_with("inf") {
            self.pos += 3;
            return Ok(None);
        }
        Ok(Some(self.number()?))
    }

    fn expr(&mut self) -> Result<ControlFunction, FuncError> {
        let name = self.ident()?;
        match name.as_str() {
            "id" => Ok(ControlFunction::identity(self.scale)),
            "piece" => {
                self.expect('(')?;
                let lo = self.number()?;
                self.expect(',')?;
                let hi = self.upper_bound()?;
                self.expect(';')?;
                let a = self.number()?;
                self.expect(',')?;
                let p = self.number()?;
                self.expect(',')?;
                let b = self.number()?;
                self.expect(')')?;
                if !p.denom().is_one() || p < Rat::zero() {
                    return Err(FuncError::Malformed(format!(
                        "exponent must be a natural number, got {}",
                        format_rat(&p)
                    )));
                }
                let p: BigUint = p
                    .numer()
                    .to_biguint()
                    .ok_or_else(|| FuncError::Malformed("negative exponent".into()))?;
                ControlFunction::from_segs(
                    self.scale,
                    vec![Seg {
                        lo,
                        hi,
                        form: Form::Poly(Poly::new(a, p, b)),
                    }],
                )
            }
            "compose" => {
                self.expect('(')?;
                let f = self.expr()?;
                self.expect(',')?;
                let g = self.expr()?;
                self.expect(')')?;
                compose(&f, &g)
            }
            "paste" => {
                self.expect('(')?;
                let mut parts = vec![self.expr()?];
                while self.peek() == Some(',') {
                    self.expect(',')?;
                    parts.push(self.expr()?);
                }
                self.expect(')')?;
                let mut segs = Vec::new();
                for part in parts {
                    segs.extend(part.segs().iter().cloned());
                }
                ControlFunction::from_segs(self.scale, segs)
            }
            "iter" => {
                self.expect('(')?;
                let f = self.expr()?;
                self.expect(',')?;
                let n = self.number()?;
                self.expect(')')?;
                let n: u32 = n
                    .to_integer()
                    .try_into()
                    .map_err(|_| FuncError::Malformed("iteration count".into()))?;
                iterate(&f, n)
            }
            "restrict" => {
                self.expect('(')?;
                let f = self.expr()?;
                self.expect(',')?;
                let lo = self.number()?;
                self.expect(',')?;
                let hi = self.upper_bound()?;
                self.expect(')')?;
                f.restrict(&lo, hi.as_ref())
            }
            other => Err(FuncError::Malformed(format!("unknown construct `{other}`"))),
        }
    }
}

impl std::fmt::Display for ControlFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.segs().len() == 1 {
            return write_seg(f, &self.segs()[0]);
        }
        write!(f, "paste(")?;
        for (i, s) in self.segs().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write_seg(f, s)?;
        }
        write!(f, ")")
    }
}

fn write_seg(f: &mut std::fmt::Formatter<'_>, s: &Seg) -> std::fmt::Result {
    let hi = match &s.hi {
        Some(h) => format_rat(h),
        None => "inf".to_string(),
    };
    match &s.form {
        Form::Poly(p) => write!(
            f,
            "piece({},{};{},{},{})",
            format_rat(&s.lo),
            hi,
            format_rat(&p.a),
            p.p,
            format_rat(&p.b)
        ),
        Form::Shift { base, dy } => {
            if dy.is_zero() {
                write!(f, "restrict({base},{},{hi})", format_rat(&s.lo))
            } else {
                write!(
                    f,
                    "restrict(compose(piece(0,inf;1,1,{}),{base}),{},{hi})",
                    format_rat(dy),
                    format_rat(&s.lo)
                )
            }
        }
        Form::Comp { outer, inner } => write!(
            f,
            "restrict(compose({outer},{inner}),{},{hi})",
            format_rat(&s.lo)
        ),
    }
}
