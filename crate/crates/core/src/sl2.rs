//! `SL₂` over `F = F_q((t))` and over the residue field, together with the
//! canonical right-coset labels for `K₀ = SL₂(O_F)` in `SL₂(F)`.
//!
//! Every coset `K₀g` contains exactly one representative of the form
//!
//! * `Plus(n, x)`:  `u(x)·α₀⁻ⁿ  = [[tⁿ, x·t⁻ⁿ], [0, t⁻ⁿ]]` with `deg x < 2n`,
//! * `Minus(n, y)`: `ū(y)·α₀ⁿ   = [[t⁻ⁿ, 0], [y·t⁻ⁿ, tⁿ]]` with `deg y < 2n`, `y(0) = 0`,
//!
//! where `α₀ = diag(t⁻¹, t)`. The index `n` is the distance from the origin
//! vertex of the tree, called the shell.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldCtx, Fq};
use crate::series::TruncSeries;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SL2Mat {
    pub a: TruncSeries,
    pub b: TruncSeries,
    pub c: TruncSeries,
    pub d: TruncSeries,
}

impl SL2Mat {
    /// Builds a matrix and checks `ad − bc = 1` to the available precision.
    pub fn new(a: TruncSeries, b: TruncSeries, c: TruncSeries, d: TruncSeries, f: &FieldCtx) -> Result<Self> {
        let m = SL2Mat { a, b, c, d };
        let det = m.det(f)?;
        if !det.agrees_with(&TruncSeries::one()) {
            return Err(Error::InvalidParameter(format!("determinant is {det}, not 1")));
        }
        Ok(m)
    }

    pub fn identity() -> Self {
        Self::diag_unit(TruncSeries::one(), TruncSeries::one())
    }

    /// `α₀ⁿ = diag(t⁻ⁿ, tⁿ)`.
    pub fn alpha0_pow(n: i64) -> Self {
        Self::diag_unit(TruncSeries::t_pow(-n), TruncSeries::t_pow(n))
    }

    /// `u(x) = [[1, x], [0, 1]]`.
    pub fn u(x: TruncSeries) -> Self {
        SL2Mat { a: TruncSeries::one(), b: x, c: TruncSeries::Zero, d: TruncSeries::one() }
    }

    /// `ū(y) = [[1, 0], [y, 1]]`.
    pub fn ubar(y: TruncSeries) -> Self {
        SL2Mat { a: TruncSeries::one(), b: TruncSeries::Zero, c: y, d: TruncSeries::one() }
    }

    /// `diag(s, s⁻¹)`; the inverse is expanded to `cap` coefficients when `s`
    /// is not a monomial.
    pub fn diag(s: &TruncSeries, f: &FieldCtx, cap: usize) -> Result<Self> {
        Ok(Self::diag_unit(s.clone(), s.inv(f, cap)?))
    }

    /// Constant lift of a residue-field matrix.
    pub fn lift(k: &SL2q) -> Self {
        SL2Mat {
            a: TruncSeries::constant(k.a),
            b: TruncSeries::constant(k.b),
            c: TruncSeries::constant(k.c),
            d: TruncSeries::constant(k.d),
        }
    }

    fn diag_unit(a: TruncSeries, d: TruncSeries) -> Self {
        SL2Mat { a, b: TruncSeries::Zero, c: TruncSeries::Zero, d }
    }

    pub fn det(&self, f: &FieldCtx) -> Result<TruncSeries> {
        self.a.mul(&self.d, f).sub(&self.b.mul(&self.c, f), f)
    }

    pub fn mul(&self, o: &Self, f: &FieldCtx) -> Result<Self> {
        let dot = |x: &TruncSeries, y: &TruncSeries, z: &TruncSeries, w: &TruncSeries| x.mul(y, f).add(&z.mul(w, f), f);
        Ok(SL2Mat {
            a: dot(&self.a, &o.a, &self.b, &o.c)?,
            b: dot(&self.a, &o.b, &self.b, &o.d)?,
            c: dot(&self.c, &o.a, &self.d, &o.c)?,
            d: dot(&self.c, &o.b, &self.d, &o.d)?,
        })
    }

    /// Product of a sequence of matrices, left to right.
    pub fn product<'a>(ms: impl IntoIterator<Item = &'a SL2Mat>, f: &FieldCtx) -> Result<Self> {
        ms.into_iter().try_fold(Self::identity(), |acc, m| acc.mul(m, f))
    }

    /// Inverse via the adjugate.
    pub fn inv(&self, f: &FieldCtx) -> Self {
        SL2Mat { a: self.d.clone(), b: self.b.neg(f), c: self.c.neg(f), d: self.a.clone() }
    }

    pub fn entries(&self) -> [&TruncSeries; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    pub fn is_exact(&self) -> bool {
        self.entries().iter().all(|x| x.is_exact())
    }

    /// Entrywise agreement to the common precision.
    pub fn agrees_with(&self, o: &Self) -> bool {
        self.entries().iter().zip(o.entries()).all(|(x, y)| x.agrees_with(y))
    }

    /// True when every entry lies in `O_F`.
    pub fn is_integral(&self) -> bool {
        self.entries().iter().all(|x| x.val().is_none_or(|v| v >= 0))
    }

    /// Reduction mod `t` of an integral matrix.
    pub fn residue(&self) -> Result<SL2q> {
        Ok(SL2q { a: self.a.residue()?, b: self.b.residue()?, c: self.c.residue()?, d: self.d.residue()? })
    }
}

impl fmt::Display for SL2Mat {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(out, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// An element of `SL₂(F_q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SL2q {
    pub a: Fq,
    pub b: Fq,
    pub c: Fq,
    pub d: Fq,
}

impl SL2q {
    pub fn new(a: Fq, b: Fq, c: Fq, d: Fq, f: &FieldCtx) -> Result<Self> {
        let m = SL2q { a, b, c, d };
        if m.det(f) != Fq::ONE {
            return Err(Error::InvalidParameter("determinant is not 1".into()));
        }
        Ok(m)
    }

    pub fn identity() -> Self {
        SL2q { a: Fq::ONE, b: Fq::ZERO, c: Fq::ZERO, d: Fq::ONE }
    }

    pub fn u(x: Fq) -> Self {
        SL2q { b: x, ..Self::identity() }
    }

    pub fn ubar(y: Fq) -> Self {
        SL2q { c: y, ..Self::identity() }
    }

    pub fn diag(s: Fq, f: &FieldCtx) -> Result<Self> {
        Ok(SL2q { a: s, b: Fq::ZERO, c: Fq::ZERO, d: f.inv(s)? })
    }

    pub fn det(&self, f: &FieldCtx) -> Fq {
        f.sub(f.mul(self.a, self.d), f.mul(self.b, self.c))
    }

    pub fn mul(&self, o: &Self, f: &FieldCtx) -> Self {
        let dot = |x, y, z, w| f.add(f.mul(x, y), f.mul(z, w));
        SL2q {
            a: dot(self.a, o.a, self.b, o.c),
            b: dot(self.a, o.b, self.b, o.d),
            c: dot(self.c, o.a, self.d, o.c),
            d: dot(self.c, o.b, self.d, o.d),
        }
    }

    pub fn inv(&self, f: &FieldCtx) -> Self {
        SL2q { a: self.d, b: f.neg(self.b), c: f.neg(self.c), d: self.a }
    }

    /// All of `SL₂(F_q)`, in a fixed order.
    pub fn all(f: &FieldCtx) -> Vec<SL2q> {
        let mut out = Vec::new();
        for a in f.elements() {
            for b in f.elements() {
                for c in f.elements() {
                    if a.is_zero() {
                        // ad − bc = 1 forces c = −1/b
                        if !b.is_zero() && f.mul(b, c) == f.neg(Fq::ONE) {
                            for d in f.elements() {
                                out.push(SL2q { a, b, c, d });
                            }
                        }
                    } else {
                        let d = f.div(f.add(Fq::ONE, f.mul(b, c)), a).unwrap();
                        out.push(SL2q { a, b, c, d });
                    }
                }
            }
        }
        out
    }
}

/// The two sign conventions for the Weyl element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum W0Choice {
    /// `[[0, −1], [1, 0]]`
    Standard,
    /// `[[0, 1], [−1, 0]]`
    Alternate,
}

impl W0Choice {
    pub fn matrix(self, f: &FieldCtx) -> SL2q {
        let m1 = f.neg(Fq::ONE);
        match self {
            W0Choice::Standard => SL2q { a: Fq::ZERO, b: m1, c: Fq::ONE, d: Fq::ZERO },
            W0Choice::Alternate => SL2q { a: Fq::ZERO, b: Fq::ONE, c: m1, d: Fq::ZERO },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    Plus,
    Minus,
}

/// Canonical label of a right coset `K₀g`.
///
/// `param` always has length `2·shell`; for `Minus` points its first entry is
/// zero. The derived order (shell, then form, then parameter with the
/// constant coefficient most significant) is the canonical order used for
/// coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CosetPoint {
    #[serde(rename = "n")]
    pub shell: u32,
    pub form: Form,
    pub param: Vec<Fq>,
}

impl CosetPoint {
    /// The origin `Plus(0, 0)`, the coset `K₀` itself.
    pub fn origin() -> Self {
        CosetPoint { shell: 0, form: Form::Plus, param: Vec::new() }
    }

    pub fn plus(n: u32, x: Vec<Fq>) -> Result<Self> {
        if x.len() != 2 * n as usize {
            return Err(Error::InvalidParameter(format!("Plus({n}) needs {} coefficients", 2 * n)));
        }
        Ok(CosetPoint { shell: n, form: Form::Plus, param: x })
    }

    pub fn minus(n: u32, y: Vec<Fq>) -> Result<Self> {
        if n == 0 || y.len() != 2 * n as usize || !y[0].is_zero() {
            return Err(Error::InvalidParameter(format!(
                "Minus({n}) needs n ≥ 1 and {} coefficients with zero constant term",
                2 * n
            )));
        }
        Ok(CosetPoint { shell: n, form: Form::Minus, param: y })
    }

    /// Checks the invariants of a deserialized point against a field.
    pub fn validate(&self, f: &FieldCtx) -> Result<()> {
        if self.param.iter().any(|c| c.to_int() >= f.q()) {
            return Err(Error::InvalidParameter("coset parameter outside the field".into()));
        }
        match self.form {
            Form::Plus => Self::plus(self.shell, self.param.clone()).map(|_| ()),
            Form::Minus => Self::minus(self.shell, self.param.clone()).map(|_| ()),
        }
    }

    /// The canonical representative matrix.
    pub fn rep(&self) -> SL2Mat {
        let n = self.shell as i64;
        let p = TruncSeries::exact(-n, &self.param);
        match self.form {
            Form::Plus => SL2Mat { a: TruncSeries::t_pow(n), b: p, c: TruncSeries::Zero, d: TruncSeries::t_pow(-n) },
            Form::Minus => SL2Mat { a: TruncSeries::t_pow(-n), b: TruncSeries::Zero, c: p, d: TruncSeries::t_pow(n) },
        }
    }

    /// Position inside `enumerate_shell(shell)`.
    pub fn index_in_shell(&self, q: u32) -> usize {
        let digits = self.param.iter().fold(0usize, |acc, c| acc * q as usize + c.index());
        match self.form {
            Form::Plus => digits,
            Form::Minus => (q as usize).pow(2 * self.shell) + digits,
        }
    }

    /// Inverse of [`index_in_shell`](Self::index_in_shell).
    pub fn from_shell_index(f: &FieldCtx, n: u32, idx: usize) -> Result<Self> {
        let q = f.q() as usize;
        let plus = q.pow(2 * n);
        if idx >= shell_size(f.q(), n) {
            return Err(Error::InvalidParameter(format!("index {idx} outside shell {n}")));
        }
        let (form, mut rest) = if idx < plus { (Form::Plus, idx) } else { (Form::Minus, idx - plus) };
        let mut param = vec![Fq::ZERO; 2 * n as usize];
        for slot in param.iter_mut().rev() {
            *slot = f.elem((rest % q) as u32)?;
            rest /= q;
        }
        Ok(CosetPoint { shell: n, form, param })
    }
}

impl fmt::Display for CosetPoint {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let form = match self.form {
            Form::Plus => "Plus",
            Form::Minus => "Minus",
        };
        let digits: Vec<String> = self.param.iter().map(|c| c.to_int().to_string()).collect();
        write!(out, "{form}({}, [{}])", self.shell, digits.join(","))
    }
}

/// Number of coset points in shell `n`: `1` for `n = 0`, else `q^{2n} + q^{2n−1}`.
pub fn shell_size(q: u32, n: u32) -> usize {
    if n == 0 {
        1
    } else {
        let q = q as usize;
        q.pow(2 * n) + q.pow(2 * n - 1)
    }
}

/// All points of shell `n` in canonical order.
pub fn enumerate_shell(f: &FieldCtx, n: u32) -> Vec<CosetPoint> {
    (0..shell_size(f.q(), n)).map(|i| CosetPoint::from_shell_index(f, n, i).unwrap()).collect()
}

/// `n` such that `g ∈ K₀ α₀⁻ⁿ K₀`.
pub fn cartan_level(g: &SL2Mat) -> u32 {
    let m = g.entries().iter().filter_map(|x| x.val()).min().unwrap_or(0);
    (-m).max(0) as u32
}

/// Writes `g = rep(P)·h` with `h ∈ K₀` and returns `P` with `h mod t`.
///
/// `cap` bounds the expansion of inverses of non-monomial entries.
pub fn reduce_coset(g: &SL2Mat, f: &FieldCtx, cap: usize) -> Result<(CosetPoint, SL2q)> {
    let n = cartan_level(g) as i64;
    let low = |x: &TruncSeries| x.val() == Some(-n);
    let width = 2 * n as usize;
    let lead = |x: &TruncSeries| x.coeff(-n);
    // Digits of num/den mod t^{2n} together with the coefficient of t^{2n}.
    let quotient = |num: &TruncSeries, den: &TruncSeries| -> Result<(Vec<Fq>, Fq)> {
        let q = num.div(den, f, cap)?;
        Ok((q.window(0, 2 * n)?, q.coeff(2 * n)?))
    };
    let one = Fq::ONE;

    if low(&g.c) || low(&g.d) {
        let (x, h) = if low(&g.d) {
            let (x, top) = quotient(&g.b, &g.d)?;
            let h22 = lead(&g.d)?;
            let h21 = lead(&g.c)?;
            let h12 = f.mul(h22, top);
            let h11 = f.div(f.add(one, f.mul(h12, h21)), h22)?;
            (x, SL2q { a: h11, b: h12, c: h21, d: h22 })
        } else {
            let (x, top) = quotient(&g.a, &g.c)?;
            let h21 = lead(&g.c)?;
            let h11 = f.mul(h21, top);
            let h12 = f.neg(f.inv(h21)?);
            (x, SL2q { a: h11, b: h12, c: h21, d: Fq::ZERO })
        };
        debug_assert_eq!(x.len(), width);
        Ok((CosetPoint { shell: n as u32, form: Form::Plus, param: x }, h))
    } else if low(&g.a) || low(&g.b) {
        let (y, h) = if low(&g.a) {
            let (y, top) = quotient(&g.c, &g.a)?;
            let h11 = lead(&g.a)?;
            let h12 = lead(&g.b)?;
            let h21 = f.mul(h11, top);
            let h22 = f.div(f.add(one, f.mul(h12, h21)), h11)?;
            (y, SL2q { a: h11, b: h12, c: h21, d: h22 })
        } else {
            let (y, top) = quotient(&g.d, &g.b)?;
            let h12 = lead(&g.b)?;
            let h22 = f.mul(h12, top);
            let h21 = f.neg(f.inv(h12)?);
            (y, SL2q { a: Fq::ZERO, b: h12, c: h21, d: h22 })
        };
        if !y[0].is_zero() {
            return Err(Error::InvalidParameter(format!("matrix is not in SL2: {g}")));
        }
        Ok((CosetPoint { shell: n as u32, form: Form::Minus, param: y }, h))
    } else {
        Err(Error::InvalidParameter(format!("matrix is not in SL2: {g}")))
    }
}
