//! Single-variable polynomials with integer powers, e.g. `x^2-2` or
//! `3x^3 - 0.5*x + 1`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("cannot parse polynomial at column {column}: {message}")]
pub struct PolyError {
    pub column: usize,
    pub message: String,
}

/// `coeffs[i]` multiplies `x^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn parse(src: &str) -> Result<Self, PolyError> {
        Parser {
            src: src.as_bytes(),
            pos: 0,
        }
        .polynomial()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| c * i as f64)
            .collect();
        Polynomial { coeffs }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, message: impl Into<String>) -> PolyError {
        PolyError {
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn number(&mut self) -> Option<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        if start == self.pos {
            return None;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }

    fn polynomial(mut self) -> Result<Polynomial, PolyError> {
        let mut coeffs: Vec<f64> = Vec::new();
        let mut first = true;
        loop {
            let sign = match self.peek() {
                None if first => return Err(self.err("empty polynomial")),
                None => break,
                Some(b'+') => {
                    self.pos += 1;
                    1.0
                }
                Some(b'-') => {
                    self.pos += 1;
                    -1.0
                }
                Some(_) if first => 1.0,
                Some(c) => return Err(self.err(format!("expected + or -, found `{}`", c as char))),
            };
            first = false;
            let (power, coeff) = self.term()?;
            if coeffs.len() <= power {
                coeffs.resize(power + 1, 0.0);
            }
            coeffs[power] += sign * coeff;
        }
        Ok(Polynomial { coeffs })
    }

    fn term(&mut self) -> Result<(usize, f64), PolyError> {
        let coeff = self.number();
        if coeff.is_some() && self.peek() == Some(b'*') {
            self.pos += 1;
            if self.peek() != Some(b'x') {
                return Err(self.err("expected x after *"));
            }
        }
        if self.peek() != Some(b'x') {
            return coeff
                .map(|c| (0, c))
                .ok_or_else(|| self.err("expected a number or x"));
        }
        self.pos += 1;
        let mut power = 1;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            power = std::str::from_utf8(&self.src[start..self.pos])
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| self.err("expected a nonnegative integer power"))?;
        }
        Ok((power, coeff.unwrap_or(1.0)))
    }
}
