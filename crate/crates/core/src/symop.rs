//! Crystallographic symmetry operators in Jones-faithful notation
//! (`-x, y+1/2, -z+1/2`).
//!
//! Translations are stored exactly in twelfths, which covers every
//! denominator a space-group operator can carry (1, 2, 3, 4, 6).

use std::fmt;

use crate::error::{Error, Result};
use crate::lattice::{wrap_to_cell, Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AffineSymOp {
    pub rot: [[i32; 3]; 3],
    /// Translation in units of 1/12, each component in 0..12.
    pub trans12: [i32; 3],
}

fn det3(m: &[[i32; 3]; 3]) -> i32 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

impl AffineSymOp {
    pub fn identity() -> Self {
        AffineSymOp {
            rot: [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
            trans12: [0; 3],
        }
    }

    pub fn new(rot: [[i32; 3]; 3], trans12: [i32; 3]) -> Result<Self> {
        if rot.iter().flatten().any(|v| !(-1..=1).contains(v)) {
            return Err(Error::InvalidSymop("rotation entries must be in {-1, 0, 1}".into()));
        }
        if det3(&rot).abs() != 1 {
            return Err(Error::InvalidSymop("rotation part is not unimodular".into()));
        }
        Ok(AffineSymOp {
            rot,
            trans12: trans12.map(|t| t.rem_euclid(12)),
        })
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn rotation(&self) -> Mat3 {
        Mat3::from_fn(|i, j| self.rot[i][j] as f64)
    }

    pub fn translation(&self) -> Vec3 {
        Vec3::from_fn(|i, _| self.trans12[i] as f64 / 12.0)
    }

    /// Image of a fractional point, not wrapped.
    pub fn apply_unwrapped(&self, u: &Vec3) -> Vec3 {
        self.rotation() * u + self.translation()
    }

    /// Image of a fractional point wrapped into [0, 1)^3.
    pub fn apply(&self, u: &Vec3) -> Vec3 {
        wrap_to_cell(&self.apply_unwrapped(u))
    }

    /// `self` after `other`: u -> self(other(u)), translations mod 1.
    pub fn compose(&self, other: &AffineSymOp) -> AffineSymOp {
        let mut rot = [[0i32; 3]; 3];
        let mut t = self.trans12;
        for i in 0..3 {
            for j in 0..3 {
                rot[i][j] = (0..3).map(|k| self.rot[i][k] * other.rot[k][j]).sum();
            }
            t[i] += (0..3).map(|k| self.rot[i][k] * other.trans12[k]).sum::<i32>();
        }
        AffineSymOp {
            rot,
            trans12: t.map(|v| v.rem_euclid(12)),
        }
    }
}

fn gcd(a: i32, b: i32) -> i32 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for AffineSymOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.rot.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            let mut out = String::new();
            for (c, var) in row.iter().zip(['x', 'y', 'z']) {
                match c {
                    1 if out.is_empty() => out.push(var),
                    1 => {
                        out.push('+');
                        out.push(var);
                    }
                    -1 => {
                        out.push('-');
                        out.push(var);
                    }
                    _ => {}
                }
            }
            let t = self.trans12[i];
            if t != 0 {
                let g = gcd(t, 12);
                if !out.is_empty() {
                    out.push('+');
                }
                let (num, den) = (t / g, 12 / g);
                if den == 1 {
                    out.push_str(&num.to_string());
                } else {
                    out.push_str(&format!("{num}/{den}"));
                }
            }
            if out.is_empty() {
                out.push('0');
            }
            f.write_str(&out)?;
        }
        Ok(())
    }
}

struct Lexer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::SymopSyntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.') {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("");
        text.parse::<f64>().map_err(|_| Error::SymopSyntax {
            offset: start,
            message: format!("bad number '{text}'"),
        })
    }
}

fn to_twelfths(value: f64, offset: usize) -> Result<i32> {
    let scaled = value * 12.0;
    let rounded = scaled.round();
    if (scaled - rounded).abs() > 0.01 {
        return Err(Error::SymopSyntax {
            offset,
            message: format!("translation {value} is not a multiple of 1/12"),
        });
    }
    Ok(rounded as i32)
}

/// Parses one operator such as `-x, y+1/2, -z+1/2` (decimals like `0.5`
/// and leading constants like `1/2+x` are accepted; case-insensitive).
pub fn parse_symop(text: &str) -> Result<AffineSymOp> {
    let mut lx = Lexer {
        bytes: text.as_bytes(),
        pos: 0,
    };
    let mut rot = [[0i32; 3]; 3];
    let mut trans = [0i32; 3];
    for row in 0..3 {
        let mut terms = 0;
        loop {
            let mut sign = 1;
            let mut explicit_sign = false;
            match lx.peek() {
                Some(b'+') => {
                    lx.pos += 1;
                    explicit_sign = true;
                }
                Some(b'-') => {
                    lx.pos += 1;
                    sign = -1;
                    explicit_sign = true;
                }
                _ => {}
            }
            if terms > 0 && !explicit_sign {
                break;
            }
            match lx.peek() {
                Some(c) if matches!(c.to_ascii_lowercase(), b'x' | b'y' | b'z') => {
                    let var = (c.to_ascii_lowercase() - b'x') as usize;
                    lx.pos += 1;
                    rot[row][var] += sign;
                }
                Some(c) if c.is_ascii_digit() || c == b'.' => {
                    let start = lx.pos;
                    let num = lx.number()?;
                    let value = if lx.peek() == Some(b'/') {
                        lx.pos += 1;
                        lx.skip_ws();
                        let den = lx.number()?;
                        if den == 0.0 {
                            return Err(lx.err("zero denominator"));
                        }
                        num / den
                    } else {
                        num
                    };
                    // allow "1/2x" style coefficients only when 1
                    if let Some(c) = lx.peek() {
                        if matches!(c.to_ascii_lowercase(), b'x' | b'y' | b'z') {
                            if value != 1.0 {
                                return Err(lx.err("rotation coefficients must be 0 or +-1"));
                            }
                            let var = (c.to_ascii_lowercase() - b'x') as usize;
                            lx.pos += 1;
                            rot[row][var] += sign;
                            terms += 1;
                            continue;
                        }
                    }
                    trans[row] += sign * to_twelfths(value, start)?;
                }
                Some(_) => {
                    return Err(lx.err(format!("unexpected character '{}'", lx.bytes[lx.pos] as char)));
                }
                None => return Err(lx.err("unexpected end of operator")),
            }
            terms += 1;
            match lx.peek() {
                Some(b'+') | Some(b'-') => continue,
                _ => break,
            }
        }
        if terms == 0 {
            return Err(lx.err("empty component"));
        }
        match (row, lx.peek()) {
            (0 | 1, Some(b',')) => lx.pos += 1,
            (0 | 1, _) => return Err(lx.err("expected ','")),
            (_, None) => {}
            (_, Some(c)) => return Err(lx.err(format!("trailing '{}'", c as char))),
        }
    }
    AffineSymOp::new(rot, trans)
}
