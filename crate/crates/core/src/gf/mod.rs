//! Arithmetic over GF(2^8) with the reduction polynomial x^8 + x^4 + x^3 + x^2 + 1
//! (0x11D), plus dense matrices over the field.
//!
//! Multiplication goes through log/antilog tables. The tables are generated
//! once and checked against a shift-and-reduce multiplier before first use.

mod matrix;

pub use matrix::Matrix;

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign};
use std::sync::OnceLock;

use thiserror::Error;

/// Low byte of the reduction polynomial (the x^8 term is implicit).
pub const POLY: u8 = 0x1D;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GfError {
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is singular")]
    Singular,
}

/// An element of GF(2^8).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Gf256(pub u8);

impl fmt::Debug for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#04x}", self.0)
    }
}

impl fmt::Display for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02x}", self.0)
    }
}

struct Tables {
    log: [u8; 256],
    exp: [u8; 512],
}

static TABLES: OnceLock<Tables> = OnceLock::new();

/// Bitwise shift-and-reduce multiplication. Slow; used to build and validate
/// the tables.
pub fn mul_reference(a: u8, b: u8) -> u8 {
    let mut acc = 0u8;
    let mut a = a;
    let mut b = b;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        let carry = a & 0x80 != 0;
        a <<= 1;
        if carry {
            a ^= POLY;
        }
        b >>= 1;
    }
    acc
}

fn tables() -> &'static Tables {
    TABLES.get_or_init(|| {
        let mut log = [0u8; 256];
        let mut exp = [0u8; 512];
        let mut x = 1u8;
        for i in 0..255 {
            exp[i] = x;
            exp[i + 255] = x;
            log[x as usize] = i as u8;
            x = mul_reference(x, 2);
        }
        assert_eq!(x, 1, "0x02 must generate the multiplicative group");
        let t = Tables { log, exp };
        // Spot-check the tables against the reference on a coarse grid.
        for a in (0..=255u16).step_by(7) {
            for b in (0..=255u16).step_by(11) {
                assert_eq!(
                    table_mul(&t, a as u8, b as u8),
                    mul_reference(a as u8, b as u8),
                    "log/antilog tables disagree with reference multiplier"
                );
            }
        }
        t
    })
}

#[inline]
fn table_mul(t: &Tables, a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        0
    } else {
        t.exp[t.log[a as usize] as usize + t.log[b as usize] as usize]
    }
}

impl Gf256 {
    pub const ZERO: Gf256 = Gf256(0);
    pub const ONE: Gf256 = Gf256(1);

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Multiplicative inverse; zero has none.
    pub fn inv(self) -> Result<Gf256, GfError> {
        if self.0 == 0 {
            return Err(GfError::ZeroInverse);
        }
        let t = tables();
        Ok(Gf256(t.exp[255 - t.log[self.0 as usize] as usize]))
    }

    pub fn pow(self, e: u32) -> Gf256 {
        if e == 0 {
            return Gf256::ONE;
        }
        if self.0 == 0 {
            return Gf256::ZERO;
        }
        let t = tables();
        let l = (t.log[self.0 as usize] as u64 * e as u64) % 255;
        Gf256(t.exp[l as usize])
    }

    /// `2^i`, the i-th power of the field generator.
    pub fn exp(i: u32) -> Gf256 {
        Gf256(tables().exp[(i % 255) as usize])
    }
}

/// Field product.
#[inline]
pub fn mul(a: Gf256, b: Gf256) -> Gf256 {
    Gf256(table_mul(tables(), a.0, b.0))
}

/// Field inverse.
pub fn inv(a: Gf256) -> Result<Gf256, GfError> {
    a.inv()
}

impl Add for Gf256 {
    type Output = Gf256;
    #[allow(clippy::suspicious_arithmetic_impl)]
    #[inline]
    fn add(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

impl AddAssign for Gf256 {
    #[allow(clippy::suspicious_op_assign_impl)]
    #[inline]
    fn add_assign(&mut self, rhs: Gf256) {
        self.0 ^= rhs.0;
    }
}

impl Mul for Gf256 {
    type Output = Gf256;
    #[inline]
    fn mul(self, rhs: Gf256) -> Gf256 {
        mul(self, rhs)
    }
}

impl MulAssign for Gf256 {
    #[inline]
    fn mul_assign(&mut self, rhs: Gf256) {
        *self = mul(*self, rhs);
    }
}

impl std::iter::Sum for Gf256 {
    fn sum<I: Iterator<Item = Gf256>>(iter: I) -> Gf256 {
        iter.fold(Gf256::ZERO, |a, b| a + b)
    }
}

/// `dst[i] ^= c * src[i]` over byte buffers. This is the inner loop of every
/// symbol-level linear combination.
pub fn mul_add_slice(c: Gf256, src: &[u8], dst: &mut [u8]) {
    assert_eq!(src.len(), dst.len(), "symbol length mismatch");
    match c.0 {
        0 => {}
        1 => {
            for (d, s) in dst.iter_mut().zip(src) {
                *d ^= *s;
            }
        }
        _ => {
            let t = tables();
            let lc = t.log[c.0 as usize] as usize;
            for (d, s) in dst.iter_mut().zip(src) {
                if *s != 0 {
                    *d ^= t.exp[lc + t.log[*s as usize] as usize];
                }
            }
        }
    }
}

/// Linear combination `Σ coeffs[i] * symbols[i]` of equally sized byte symbols.
pub fn combine(coeffs: &[Gf256], symbols: &[&[u8]], len: usize) -> Vec<u8> {
    assert_eq!(coeffs.len(), symbols.len());
    let mut out = vec![0u8; len];
    for (c, s) in coeffs.iter().zip(symbols) {
        mul_add_slice(*c, s, &mut out);
    }
    out
}
