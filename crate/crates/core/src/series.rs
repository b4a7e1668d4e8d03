//! Truncated Laurent series over `F_q`, modelling `F = F_q((t))`.
//!
//! A series is either the exact zero or a normalized window
//! `t^offset · (c₀ + c₁t + …)` with `c₀ ≠ 0`. Windows are either *exact*
//! (a Laurent polynomial: every coefficient past the stored ones is zero) or
//! carry a relative precision equal to the number of stored coefficients.
//! Group elements built from polynomial parameters stay exact, so their
//! products can cancel to a provable zero; only inversion of non-monomial
//! units introduces truncation.

use std::cmp::{max, min};
use std::fmt;

use crate::error::{Error, Result};
use crate::field::{FieldCtx, Fq};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TruncSeries {
    Zero,
    Series { offset: i64, coeffs: Vec<Fq>, exact: bool },
}

/// Working precision (relative, in coefficients) for truncation level `n`.
pub fn precision_for_level(n: u32) -> usize {
    2 * n as usize + 6
}

impl TruncSeries {
    pub fn zero() -> Self {
        TruncSeries::Zero
    }

    pub fn one() -> Self {
        Self::constant(Fq::ONE)
    }

    pub fn constant(c: Fq) -> Self {
        Self::monomial(c, 0)
    }

    pub fn monomial(c: Fq, e: i64) -> Self {
        if c.is_zero() {
            TruncSeries::Zero
        } else {
            TruncSeries::Series { offset: e, coeffs: vec![c], exact: true }
        }
    }

    /// `t^e`.
    pub fn t_pow(e: i64) -> Self {
        Self::monomial(Fq::ONE, e)
    }

    /// The Laurent polynomial `Σ coeffs[i]·t^(offset+i)`.
    pub fn exact(offset: i64, coeffs: &[Fq]) -> Self {
        let Some(first) = coeffs.iter().position(|c| !c.is_zero()) else {
            return TruncSeries::Zero;
        };
        let last = coeffs.iter().rposition(|c| !c.is_zero()).unwrap();
        TruncSeries::Series { offset: offset + first as i64, coeffs: coeffs[first..=last].to_vec(), exact: true }
    }

    /// A series known through `t^(offset + coeffs.len() - 1)`.
    ///
    /// Fails with `InsufficientPrecision` when every tracked coefficient is
    /// zero, since the value is then not determined.
    pub fn approx(offset: i64, coeffs: &[Fq]) -> Result<Self> {
        match coeffs.iter().position(|c| !c.is_zero()) {
            Some(first) => Ok(TruncSeries::Series {
                offset: offset + first as i64,
                coeffs: coeffs[first..].to_vec(),
                exact: false,
            }),
            None => {
                Err(Error::precision(format!("all coefficients below t^{} cancelled", offset + coeffs.len() as i64)))
            }
        }
    }

    /// `A(λ) = Σ λⱼ tʲ`; in equal characteristic the Teichmüller lift of a
    /// residue is the constant itself.
    pub fn teichmuller_sum(lambda: &[Fq]) -> Self {
        Self::exact(0, lambda)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, TruncSeries::Zero)
    }

    pub fn is_exact(&self) -> bool {
        match self {
            TruncSeries::Zero => true,
            TruncSeries::Series { exact, .. } => *exact,
        }
    }

    /// Valuation; `None` stands for `+∞`.
    pub fn val(&self) -> Option<i64> {
        match self {
            TruncSeries::Zero => None,
            TruncSeries::Series { offset, .. } => Some(*offset),
        }
    }

    /// Number of tracked coefficients, or `None` for exact values.
    pub fn rel_precision(&self) -> Option<usize> {
        match self {
            TruncSeries::Series { coeffs, exact: false, .. } => Some(coeffs.len()),
            _ => None,
        }
    }

    /// Exponent of the first unknown coefficient, or `None` for exact values.
    pub fn abs_precision(&self) -> Option<i64> {
        match self {
            TruncSeries::Series { offset, coeffs, exact: false } => Some(offset + coeffs.len() as i64),
            _ => None,
        }
    }

    /// Leading coefficient (the unit part reduced mod `t`).
    pub fn leading(&self) -> Option<Fq> {
        match self {
            TruncSeries::Zero => None,
            TruncSeries::Series { coeffs, .. } => Some(coeffs[0]),
        }
    }

    /// Coefficient of `t^j`.
    pub fn coeff(&self, j: i64) -> Result<Fq> {
        match self {
            TruncSeries::Zero => Ok(Fq::ZERO),
            TruncSeries::Series { offset, coeffs, exact } => {
                if j < *offset {
                    return Ok(Fq::ZERO);
                }
                let k = (j - offset) as usize;
                match coeffs.get(k) {
                    Some(&c) => Ok(c),
                    None if *exact => Ok(Fq::ZERO),
                    None => Err(Error::precision(format!(
                        "coefficient of t^{j} requested, known only below t^{}",
                        offset + coeffs.len() as i64
                    ))),
                }
            }
        }
    }

    /// Coefficients of `t^lo, …, t^(hi-1)`.
    pub fn window(&self, lo: i64, hi: i64) -> Result<Vec<Fq>> {
        (lo..hi).map(|j| self.coeff(j)).collect()
    }

    /// `self · t^k`.
    pub fn shift(&self, k: i64) -> Self {
        match self {
            TruncSeries::Zero => TruncSeries::Zero,
            TruncSeries::Series { offset, coeffs, exact } => {
                TruncSeries::Series { offset: offset + k, coeffs: coeffs.clone(), exact: *exact }
            }
        }
    }

    pub fn neg(&self, f: &FieldCtx) -> Self {
        match self {
            TruncSeries::Zero => TruncSeries::Zero,
            TruncSeries::Series { offset, coeffs, exact } => TruncSeries::Series {
                offset: *offset,
                coeffs: coeffs.iter().map(|&c| f.neg(c)).collect(),
                exact: *exact,
            },
        }
    }

    pub fn scale(&self, c: Fq, f: &FieldCtx) -> Self {
        if c.is_zero() {
            return TruncSeries::Zero;
        }
        match self {
            TruncSeries::Zero => TruncSeries::Zero,
            TruncSeries::Series { offset, coeffs, exact } => TruncSeries::Series {
                offset: *offset,
                coeffs: coeffs.iter().map(|&x| f.mul(c, x)).collect(),
                exact: *exact,
            },
        }
    }

    pub fn add(&self, other: &Self, f: &FieldCtx) -> Result<Self> {
        let (va, vb) = match (self.val(), other.val()) {
            (None, _) => return Ok(other.clone()),
            (_, None) => return Ok(self.clone()),
            (Some(a), Some(b)) => (a, b),
        };
        let lo = min(va, vb);
        let hi = match (self.abs_precision(), other.abs_precision()) {
            (None, None) => max(va + self.len(), vb + other.len()),
            (Some(x), None) | (None, Some(x)) => x,
            (Some(x), Some(y)) => min(x, y),
        };
        if hi <= lo {
            return Err(Error::precision(format!("sum has no known coefficient below t^{hi}")));
        }
        let coeffs: Vec<Fq> = (lo..hi).map(|j| f.add(self.raw(j), other.raw(j))).collect();
        if self.is_exact() && other.is_exact() {
            Ok(Self::exact(lo, &coeffs))
        } else {
            Self::approx(lo, &coeffs)
        }
    }

    pub fn sub(&self, other: &Self, f: &FieldCtx) -> Result<Self> {
        self.add(&other.neg(f), f)
    }

    pub fn mul(&self, other: &Self, f: &FieldCtx) -> Self {
        let (
            TruncSeries::Series { offset: oa, coeffs: ca, exact: ea },
            TruncSeries::Series { offset: ob, coeffs: cb, exact: eb },
        ) = (self, other)
        else {
            return TruncSeries::Zero;
        };
        let len = match (ea, eb) {
            (true, true) => ca.len() + cb.len() - 1,
            (false, true) => ca.len(),
            (true, false) => cb.len(),
            (false, false) => min(ca.len(), cb.len()),
        };
        let mut out = vec![Fq::ZERO; len];
        for (i, &x) in ca.iter().enumerate().take(len) {
            if x.is_zero() {
                continue;
            }
            for (j, &y) in cb.iter().enumerate().take(len - i) {
                out[i + j] = f.add(out[i + j], f.mul(x, y));
            }
        }
        // Leading coefficients are units, so the product never cancels.
        TruncSeries::Series { offset: oa + ob, coeffs: out, exact: *ea && *eb }
    }

    /// Multiplicative inverse. Exact monomials invert exactly; other exact
    /// values are expanded to `cap` coefficients, inexact ones keep their
    /// own relative precision.
    pub fn inv(&self, f: &FieldCtx, cap: usize) -> Result<Self> {
        let TruncSeries::Series { offset, coeffs, exact } = self else {
            return Err(Error::DivisionByZero);
        };
        if *exact && coeffs.len() == 1 {
            return Ok(Self::monomial(f.inv(coeffs[0])?, -offset));
        }
        let prec = if *exact { cap.max(1) } else { coeffs.len() };
        let u0 = f.inv(coeffs[0])?;
        let mut w = Vec::with_capacity(prec);
        w.push(u0);
        for k in 1..prec {
            let mut s = Fq::ZERO;
            for i in 1..=min(k, coeffs.len() - 1) {
                s = f.add(s, f.mul(coeffs[i], w[k - i]));
            }
            w.push(f.neg(f.mul(u0, s)));
        }
        Ok(TruncSeries::Series { offset: -offset, coeffs: w, exact: false })
    }

    pub fn div(&self, other: &Self, f: &FieldCtx, cap: usize) -> Result<Self> {
        Ok(self.mul(&other.inv(f, cap)?, f))
    }

    /// Drops everything from `t^abs` on, turning the value inexact.
    pub fn truncate(&self, abs: i64) -> Result<Self> {
        match self {
            TruncSeries::Zero => Err(Error::precision("truncated exact zero has no known coefficient")),
            TruncSeries::Series { offset, .. } => {
                let hi = self.abs_precision().map_or(abs, |a| min(a, abs));
                Self::approx(*offset, &self.window(*offset, max(hi, *offset))?)
            }
        }
    }

    /// True when `self` and `other` agree on every coefficient known for both.
    pub fn agrees_with(&self, other: &Self) -> bool {
        let lo = match (self.val(), other.val()) {
            (None, None) => return true,
            (Some(a), None) | (None, Some(a)) => a,
            (Some(a), Some(b)) => min(a, b),
        };
        let hi = match (self.abs_precision(), other.abs_precision()) {
            (None, None) => max(self.val().map_or(lo, |v| v + self.len()), other.val().map_or(lo, |v| v + other.len())),
            (Some(x), None) | (None, Some(x)) => x,
            (Some(x), Some(y)) => min(x, y),
        };
        (lo..hi).all(|j| self.raw(j) == other.raw(j))
    }

    /// Reduction mod `t` of an integral value.
    pub fn residue(&self) -> Result<Fq> {
        match self.val() {
            Some(v) if v < 0 => Err(Error::InvalidParameter("series is not integral".into())),
            _ => self.coeff(0),
        }
    }

    /// Parses the text form produced by `Display`.
    pub fn parse(s: &str, f: &FieldCtx) -> Result<Self> {
        let s = s.trim();
        if s == "0" {
            return Ok(TruncSeries::Zero);
        }
        let bad = || Error::Parse(format!("not a series: {s:?}"));
        let rest = s.strip_prefix("t^").ok_or_else(bad)?;
        let (e, body) = rest.split_once(" * (").ok_or_else(bad)?;
        let offset: i64 = e.parse().map_err(|_| bad())?;
        let body = body.strip_suffix(')').ok_or_else(bad)?;
        let mut coeffs = Vec::new();
        let mut prec = None;
        for (i, term) in body.split(" + ").enumerate() {
            if let Some(o) = term.strip_prefix("O(t^").and_then(|o| o.strip_suffix(')')) {
                prec = Some(o.parse::<usize>().map_err(|_| bad())?);
                continue;
            }
            let c = match i {
                0 => term,
                1 => term.strip_suffix("*t").ok_or_else(bad)?,
                _ => term.strip_suffix(&format!("*t^{i}")).ok_or_else(bad)?,
            };
            coeffs.push(f.elem(c.parse().map_err(|_| bad())?)?);
        }
        match prec {
            None => Ok(Self::exact(offset, &coeffs)),
            Some(p) => {
                coeffs.resize(p, Fq::ZERO);
                Self::approx(offset, &coeffs)
            }
        }
    }

    fn len(&self) -> i64 {
        match self {
            TruncSeries::Zero => 0,
            TruncSeries::Series { coeffs, .. } => coeffs.len() as i64,
        }
    }

    /// Coefficient lookup without the precision check; callers stay inside
    /// the known window.
    fn raw(&self, j: i64) -> Fq {
        match self {
            TruncSeries::Zero => Fq::ZERO,
            TruncSeries::Series { offset, coeffs, .. } => {
                if j < *offset {
                    Fq::ZERO
                } else {
                    coeffs.get((j - offset) as usize).copied().unwrap_or(Fq::ZERO)
                }
            }
        }
    }
}

impl fmt::Display for TruncSeries {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruncSeries::Zero => write!(out, "0"),
            TruncSeries::Series { offset, coeffs, exact } => {
                write!(out, "t^{offset} * (")?;
                for (i, c) in coeffs.iter().enumerate() {
                    match i {
                        0 => write!(out, "{}", c.to_int())?,
                        1 => write!(out, " + {}*t", c.to_int())?,
                        _ => write!(out, " + {}*t^{i}", c.to_int())?,
                    }
                }
                if !exact {
                    write!(out, " + O(t^{})", coeffs.len())?;
                }
                write!(out, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f3() -> FieldCtx {
        FieldCtx::new(3, 1).unwrap()
    }

    fn ints(f: &FieldCtx, v: &[u32]) -> Vec<Fq> {
        v.iter().map(|&x| f.elem(x).unwrap()).collect()
    }

    #[test]
    fn inverse_of_one_plus_t() {
        let f = f3();
        let x = TruncSeries::exact(0, &ints(&f, &[1, 1]));
        let y = x.inv(&f, 4).unwrap();
        assert_eq!(y, TruncSeries::approx(0, &ints(&f, &[1, 2, 1, 2])).unwrap());
        // multiply back: (1+t)·y ≡ 1 mod t^4
        let back = x.mul(&y, &f);
        assert_eq!(back.window(0, 4).unwrap(), ints(&f, &[1, 0, 0, 0]));
    }

    #[test]
    fn cancellation_of_leading_term() {
        let f = f3();
        let a = TruncSeries::exact(1, &ints(&f, &[1, 1]));
        let b = TruncSeries::t_pow(1).neg(&f);
        let s = a.add(&b, &f).unwrap();
        assert_eq!(s.val(), Some(2));
        assert_eq!(s.leading(), Some(Fq::ONE));
        // same with finite precision
        let a = TruncSeries::approx(1, &ints(&f, &[1, 1, 0, 0])).unwrap();
        let s = a.add(&b, &f).unwrap();
        assert_eq!(s, TruncSeries::approx(2, &ints(&f, &[1, 0, 0])).unwrap());
    }

    #[test]
    fn exact_cancellation_is_provable_zero() {
        let f = f3();
        let a = TruncSeries::exact(-2, &ints(&f, &[2, 0, 1]));
        assert_eq!(a.sub(&a, &f).unwrap(), TruncSeries::Zero);
    }

    #[test]
    fn inexact_cancellation_is_an_error() {
        let f = f3();
        let a = TruncSeries::approx(0, &ints(&f, &[1, 1, 2])).unwrap();
        assert!(matches!(a.sub(&a, &f), Err(Error::InsufficientPrecision(_))));
        assert!(matches!(TruncSeries::approx(0, &ints(&f, &[0, 0])), Err(Error::InsufficientPrecision(_))));
    }

    #[test]
    fn valuation_of_monomial_times_unit() {
        let f = f3();
        let u = TruncSeries::approx(0, &ints(&f, &[2, 1, 1, 0, 2])).unwrap();
        assert_eq!(TruncSeries::t_pow(3).mul(&u, &f).val(), Some(3));
    }

    #[test]
    fn inverse_of_zero() {
        assert_eq!(TruncSeries::Zero.inv(&f3(), 5), Err(Error::DivisionByZero));
    }

    #[test]
    fn teichmuller_sums() {
        let f = FieldCtx::new(5, 1).unwrap();
        assert_eq!(TruncSeries::teichmuller_sum(&[Fq::ZERO]), TruncSeries::Zero);
        let a = TruncSeries::teichmuller_sum(&ints(&f, &[3, 4]));
        assert_eq!(a.val(), Some(0));
        assert_eq!(a.residue().unwrap(), f.elem(3).unwrap());
        let b = TruncSeries::teichmuller_sum(&ints(&f, &[0, 4]));
        assert_eq!(b.val(), Some(1));
        assert_eq!(b.residue().unwrap(), Fq::ZERO);
    }

    #[test]
    fn display_and_parse() {
        let f = f3();
        let a = TruncSeries::exact(-1, &ints(&f, &[2, 0, 1]));
        assert_eq!(a.to_string(), "t^-1 * (2 + 0*t + 1*t^2)");
        assert_eq!(TruncSeries::parse(&a.to_string(), &f).unwrap(), a);
        let b = TruncSeries::approx(3, &ints(&f, &[1, 2])).unwrap();
        assert_eq!(b.to_string(), "t^3 * (1 + 2*t + O(t^2))");
        assert_eq!(TruncSeries::parse(&b.to_string(), &f).unwrap(), b);
        assert_eq!(TruncSeries::parse("0", &f).unwrap(), TruncSeries::Zero);
    }

    #[test]
    fn precision_tracking() {
        let f = f3();
        let a = TruncSeries::approx(0, &ints(&f, &[1, 1, 1])).unwrap();
        let b = TruncSeries::approx(2, &ints(&f, &[1, 1, 1, 1, 1])).unwrap();
        assert_eq!(a.add(&b, &f).unwrap().abs_precision(), Some(3));
        assert_eq!(a.mul(&b, &f).rel_precision(), Some(3));
        assert_eq!(a.coeff(3), Err(Error::precision("coefficient of t^3 requested, known only below t^3")));
        assert_eq!(a.coeff(-4).unwrap(), Fq::ZERO);
    }
}
