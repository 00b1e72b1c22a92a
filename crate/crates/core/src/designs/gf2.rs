//! Binary extension fields GF(2^w), `1 ≤ w ≤ 64`, and polynomial hash families.
//!
//! Field elements are `u64` coefficient vectors: bit `i` is the coefficient
//! of `x^i`. A key `k` is serialised as the element whose bits are the bits
//! of `k`; a hash output is the low `out_bits` bits of the evaluated element.

use crate::{Error, Result};

fn clmul(a: u64, b: u64) -> u128 {
    let a = a as u128;
    let mut out = 0u128;
    let mut b = b;
    let mut shift = 0;
    while b != 0 {
        if b & 1 == 1 {
            out ^= a << shift;
        }
        b >>= 1;
        shift += 1;
    }
    out
}

fn degree(p: u128) -> i32 {
    127 - p.leading_zeros() as i32
}

fn poly_mod(mut a: u128, m: u128) -> u128 {
    let dm = degree(m);
    while degree(a) >= dm {
        a ^= m << (degree(a) - dm);
    }
    a
}

fn poly_gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let r = poly_mod(a, b);
        a = b;
        b = r;
    }
    a
}

fn mulmod(a: u128, b: u128, m: u128) -> u128 {
    poly_mod(clmul(a as u64, b as u64), m)
}

fn prime_factors(mut n: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            out.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Rabin's test: `f` of degree `w` is irreducible over GF(2) iff
/// `x^(2^w) ≡ x (mod f)` and `gcd(x^(2^(w/q)) − x, f) = 1` for every prime `q | w`.
pub fn is_irreducible(f: u128) -> bool {
    let w = degree(f);
    if w < 1 {
        return false;
    }
    let w = w as u32;
    let x = poly_mod(2, f);
    let frobenius = |k: u32| {
        let mut h = x;
        for _ in 0..k {
            h = mulmod(h, h, f);
        }
        h
    };
    if frobenius(w) != x {
        return false;
    }
    prime_factors(w).into_iter().all(|q| poly_gcd(f, frobenius(w / q) ^ x) == 1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gf2Field {
    width: u32,
    modulus: u128,
}

impl Gf2Field {
    /// Field built from the smallest irreducible `x^w + …` in numeric order.
    pub fn new(width: u32) -> Result<Self> {
        if !(1..=64).contains(&width) {
            return Err(Error::invalid(format!("field width {width} outside 1..=64")));
        }
        let top = 1u128 << width;
        let modulus = (1u128..top)
            .map(|low| top | low)
            .find(|&f| is_irreducible(f))
            .expect("an irreducible polynomial exists in every degree");
        Ok(Gf2Field { width, modulus })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn modulus(&self) -> u128 {
        self.modulus
    }

    pub fn mask(&self) -> u64 {
        if self.width == 64 {
            u64::MAX
        } else {
            (1u64 << self.width) - 1
        }
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        mulmod((a & self.mask()) as u128, (b & self.mask()) as u128, self.modulus) as u64
    }
}

/// `x ↦ trunc(Σ_i c_i x^i)` over GF(2^w); with `k` uniform coefficients the
/// outputs on any `k` distinct points are jointly uniform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolynomialHash {
    field: Gf2Field,
    coeffs: Vec<u64>,
    out_bits: u32,
}

impl PolynomialHash {
    pub fn new(field: Gf2Field, coeffs: Vec<u64>, out_bits: u32) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("hash polynomial needs at least one coefficient"));
        }
        if out_bits == 0 || out_bits > field.width() {
            return Err(Error::invalid(format!("cannot take {out_bits} output bits from GF(2^{})", field.width())));
        }
        let mask = field.mask();
        let coeffs = coeffs.into_iter().map(|c| c & mask).collect();
        Ok(PolynomialHash { field, coeffs, out_bits })
    }

    pub fn independence(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, x: u64) -> u64 {
        let x = x & self.field.mask();
        let y = self.coeffs.iter().rev().fold(0u64, |acc, &c| self.field.mul(acc, x) ^ c);
        if self.out_bits == 64 {
            y
        } else {
            y & ((1u64 << self.out_bits) - 1)
        }
    }
}
