//! Arithmetic in `F_q = F_p[x]/(f)`.
//!
//! Elements are stored as their base-`p` serialization index
//! `Σ cᵢ·pⁱ`, where `cᵢ` is the coefficient of `xⁱ` in the power basis. All
//! operations go through lookup tables built once per [`FieldCtx`]; the
//! polynomial arithmetic used to build them is kept around as the reference
//! implementation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest field order we are willing to tabulate.
pub const MAX_ORDER: u32 = 1024;

/// An element of `F_q`, identified by its serialization integer.
///
/// The derived ordering is the canonical enumeration order of the field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fq(u16);

impl Fq {
    pub const ZERO: Fq = Fq(0);
    pub const ONE: Fq = Fq(1);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn to_int(self) -> u32 {
        self.0 as u32
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

#[derive(Clone, Debug)]
pub struct FieldCtx {
    p: u32,
    deg: u32,
    q: u32,
    modulus: Vec<u32>,
    add: Vec<u16>,
    mul: Vec<u16>,
    neg: Vec<u16>,
    inv: Vec<u16>,
    frob: Vec<u16>,
}

impl PartialEq for FieldCtx {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.deg == other.deg && self.modulus == other.modulus
    }
}

impl Eq for FieldCtx {}

pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u32;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

impl FieldCtx {
    /// Builds `F_{p^deg}` with the lexicographically smallest irreducible
    /// monic modulus, comparing coefficient tuples from the constant term up.
    pub fn new(p: u32, deg: u32) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::InvalidParameter(format!("p = {p} is not prime")));
        }
        if deg == 0 {
            return Err(Error::InvalidParameter("deg must be at least 1".into()));
        }
        let q = (p as u64)
            .checked_pow(deg)
            .filter(|&q| q <= MAX_ORDER as u64)
            .ok_or_else(|| Error::InvalidParameter(format!("field order {p}^{deg} exceeds {MAX_ORDER}")))?
            as u32;
        let modulus = smallest_irreducible(p, deg);
        Ok(Self::with_modulus(p, deg, q, modulus))
    }

    fn with_modulus(p: u32, deg: u32, q: u32, modulus: Vec<u32>) -> Self {
        let n = q as usize;
        let digits: Vec<Vec<u32>> = (0..q).map(|i| to_digits(i, p, deg)).collect();
        let mut add = vec![0u16; n * n];
        let mut mul = vec![0u16; n * n];
        for a in 0..n {
            for b in 0..n {
                let s: Vec<u32> = digits[a].iter().zip(&digits[b]).map(|(x, y)| (x + y) % p).collect();
                add[a * n + b] = from_digits(&s, p) as u16;
                let m = poly_mulmod(&digits[a], &digits[b], &modulus, p);
                mul[a * n + b] = from_digits(&m, p) as u16;
            }
        }
        let neg: Vec<u16> =
            digits.iter().map(|d| from_digits(&d.iter().map(|&c| (p - c) % p).collect::<Vec<_>>(), p) as u16).collect();
        let mut inv = vec![0u16; n];
        for a in 1..n {
            inv[a] = (1..n).find(|&b| mul[a * n + b] == 1).expect("field has inverses") as u16;
        }
        let mut ctx = FieldCtx { p, deg, q, modulus, add, mul, neg, inv, frob: Vec::new() };
        ctx.frob = (0..q).map(|a| ctx.pow(Fq(a as u16), p as u64).0).collect();
        ctx
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn deg(&self) -> u32 {
        self.deg
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Modulus coefficients, constant term first; the last entry is 1.
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn zero(&self) -> Fq {
        Fq::ZERO
    }

    pub fn one(&self) -> Fq {
        Fq::ONE
    }

    /// Element with serialization integer `i`.
    pub fn elem(&self, i: u32) -> Result<Fq> {
        if i < self.q {
            Ok(Fq(i as u16))
        } else {
            Err(Error::InvalidParameter(format!("{i} is not an element of F_{}", self.q)))
        }
    }

    /// Image of an integer in the prime field.
    pub fn from_int(&self, n: i64) -> Fq {
        Fq(n.rem_euclid(self.p as i64) as u16)
    }

    pub fn from_coeffs(&self, coeffs: &[u32]) -> Result<Fq> {
        if coeffs.len() != self.deg as usize || coeffs.iter().any(|&c| c >= self.p) {
            return Err(Error::InvalidParameter(format!("expected {} coefficients in [0, {})", self.deg, self.p)));
        }
        Ok(Fq(from_digits(coeffs, self.p) as u16))
    }

    /// Power-basis coordinates of `a`, constant term first.
    pub fn coeffs(&self, a: Fq) -> Vec<u32> {
        to_digits(a.to_int(), self.p, self.deg)
    }

    /// The generator `x` of the power basis (equal to 0 when `deg = 1` and the
    /// modulus is `x`).
    pub fn generator(&self) -> Fq {
        if self.deg == 1 {
            self.from_int(-(self.modulus[0] as i64))
        } else {
            Fq(self.p as u16)
        }
    }

    /// All elements in canonical order.
    pub fn elements(&self) -> impl Iterator<Item = Fq> + Clone {
        (0..self.q as u16).map(Fq)
    }

    #[inline]
    pub fn add(&self, a: Fq, b: Fq) -> Fq {
        Fq(self.add[a.index() * self.q as usize + b.index()])
    }

    #[inline]
    pub fn neg(&self, a: Fq) -> Fq {
        Fq(self.neg[a.index()])
    }

    #[inline]
    pub fn sub(&self, a: Fq, b: Fq) -> Fq {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: Fq, b: Fq) -> Fq {
        Fq(self.mul[a.index() * self.q as usize + b.index()])
    }

    pub fn inv(&self, a: Fq) -> Result<Fq> {
        if a.is_zero() {
            Err(Error::DivisionByZero)
        } else {
            Ok(Fq(self.inv[a.index()]))
        }
    }

    pub fn div(&self, a: Fq, b: Fq) -> Result<Fq> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: Fq, mut e: u64) -> Fq {
        let mut base = a;
        let mut acc = Fq::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// `a^(p^j)`.
    pub fn frobenius(&self, a: Fq, j: u32) -> Fq {
        (0..j % self.deg).fold(a, |x, _| Fq(self.frob[x.index()]))
    }

    /// Sum of `a` with itself `n` times.
    pub fn scale_int(&self, n: u64, a: Fq) -> Fq {
        self.mul(self.from_int((n % self.p as u64) as i64), a)
    }
}

fn to_digits(mut n: u32, p: u32, len: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(len as usize);
    for _ in 0..len {
        out.push(n % p);
        n /= p;
    }
    out
}

fn from_digits(d: &[u32], p: u32) -> u32 {
    d.iter().rev().fold(0, |acc, &c| acc * p + c)
}

/// Reduces `a·b` modulo the monic `modulus` over `F_p`.
fn poly_mulmod(a: &[u32], b: &[u32], modulus: &[u32], p: u32) -> Vec<u32> {
    let deg = modulus.len() - 1;
    let mut prod = vec![0u32; a.len() + b.len()];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + x * y) % p;
        }
    }
    for k in (deg..prod.len()).rev() {
        let c = prod[k];
        if c != 0 {
            for (i, &m) in modulus.iter().enumerate() {
                let idx = k - deg + i;
                prod[idx] = (prod[idx] + (p - c) * m) % p;
            }
        }
    }
    prod.truncate(deg);
    prod.resize(deg, 0);
    prod
}

/// Remainder of `num` modulo the monic `den` over `F_p`.
fn poly_rem(num: &[u32], den: &[u32], p: u32) -> Vec<u32> {
    let mut r = num.to_vec();
    let dd = den.len() - 1;
    while r.len() > dd {
        let c = *r.last().unwrap();
        let shift = r.len() - 1 - dd;
        if c != 0 {
            for (i, &m) in den.iter().enumerate() {
                r[shift + i] = (r[shift + i] + (p - c) * m) % p;
            }
        }
        r.pop();
    }
    r
}

/// Trial division by every monic polynomial of degree at most `deg/2`.
fn is_irreducible(poly: &[u32], p: u32) -> bool {
    let deg = poly.len() as u32 - 1;
    for d in 1..=deg / 2 {
        for k in 0..p.pow(d) {
            let mut div = to_digits(k, p, d);
            div.push(1);
            if poly_rem(poly, &div, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

fn smallest_irreducible(p: u32, deg: u32) -> Vec<u32> {
    for k in 0..p.pow(deg) {
        // Most significant digit of `k` is the constant term, so increasing `k`
        // walks the tuples (c0, c1, ...) in lexicographic order.
        let mut poly: Vec<u32> = to_digits(k, p, deg).into_iter().rev().collect();
        poly.push(1);
        if is_irreducible(&poly, p) {
            return poly;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_fields() -> Vec<FieldCtx> {
        [(2, 1), (3, 1), (5, 1), (7, 1), (2, 2), (3, 2), (2, 3)]
            .iter()
            .map(|&(p, d)| FieldCtx::new(p, d).unwrap())
            .collect()
    }

    #[test]
    fn canonical_moduli() {
        assert_eq!(FieldCtx::new(2, 1).unwrap().modulus(), &[0, 1]);
        assert_eq!(FieldCtx::new(3, 2).unwrap().modulus(), &[1, 0, 1]);
        assert_eq!(FieldCtx::new(2, 2).unwrap().modulus(), &[1, 1, 1]);
        assert_eq!(FieldCtx::new(3, 2).unwrap(), FieldCtx::new(3, 2).unwrap());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(FieldCtx::new(4, 1), Err(Error::InvalidParameter(_))));
        assert!(matches!(FieldCtx::new(1, 1), Err(Error::InvalidParameter(_))));
        assert!(matches!(FieldCtx::new(3, 0), Err(Error::InvalidParameter(_))));
        assert!(matches!(FieldCtx::new(2, 11), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn x_squared_in_f9() {
        let f = FieldCtx::new(3, 2).unwrap();
        let x = f.generator();
        assert_eq!(f.coeffs(x), vec![0, 1]);
        assert_eq!(f.mul(x, x), f.from_int(-1));
        assert_eq!(f.mul(x, x), f.from_int(2));
    }

    #[test]
    fn inverse_of_one_and_zero() {
        for f in small_fields() {
            assert_eq!(f.inv(f.one()).unwrap(), f.one());
            assert_eq!(f.inv(f.zero()), Err(Error::DivisionByZero));
        }
    }

    #[test]
    fn field_axioms_exhaustive() {
        for f in small_fields().into_iter().filter(|f| f.q() <= 9) {
            let els: Vec<Fq> = f.elements().collect();
            for &a in &els {
                assert_eq!(f.add(a, f.neg(a)), Fq::ZERO);
                if !a.is_zero() {
                    assert_eq!(f.mul(a, f.inv(a).unwrap()), Fq::ONE);
                    assert_eq!(f.pow(a, f.q() as u64 - 1), Fq::ONE);
                }
                for &b in &els {
                    assert_eq!(f.add(a, b), f.add(b, a));
                    assert_eq!(f.mul(a, b), f.mul(b, a));
                    for &c in &els {
                        assert_eq!(f.add(a, f.add(b, c)), f.add(f.add(a, b), c));
                        assert_eq!(f.mul(a, f.mul(b, c)), f.mul(f.mul(a, b), c));
                        assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                    }
                }
            }
        }
    }

    #[test]
    fn frobenius_properties() {
        let f4 = FieldCtx::new(2, 2).unwrap();
        let x = f4.generator();
        assert_eq!(f4.coeffs(f4.frobenius(x, 1)), vec![1, 1]);
        for f in small_fields().into_iter().filter(|f| f.q() <= 9) {
            let mut fixed = 0;
            for a in f.elements() {
                assert_eq!(f.frobenius(a, 0), a);
                assert_eq!(f.frobenius(a, f.deg()), a);
                if f.frobenius(a, 1) == a {
                    fixed += 1;
                    assert!(a.to_int() < f.p(), "only prime-field elements are fixed");
                }
                for b in f.elements() {
                    assert_eq!(f.frobenius(f.mul(a, b), 1), f.mul(f.frobenius(a, 1), f.frobenius(b, 1)));
                    assert_eq!(f.frobenius(f.add(a, b), 1), f.add(f.frobenius(a, 1), f.frobenius(b, 1)));
                }
            }
            assert_eq!(fixed, f.p());
        }
    }

    #[test]
    fn moduli_are_irreducible_by_root_and_factor_search() {
        // Independent check: a reducible polynomial of degree <= 3 has a root.
        for (p, d) in [(2, 2), (3, 2), (5, 2), (2, 3), (3, 3)] {
            let f = FieldCtx::new(p, d).unwrap();
            let m = f.modulus();
            for x in 0..p {
                let v = m.iter().rev().fold(0, |acc, &c| (acc * x + c) % p);
                assert_ne!(v, 0, "modulus of F_{p}^{d} has root {x}");
            }
        }
    }
}
