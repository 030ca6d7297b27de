//! Sparse polynomial algebra over the complex phase-space variables
//! `(α_j, α*_j)`, plus the Berezin transforms and the conversion machinery
//! between complex and real `(q_j, p_j)` derivative expansions.
//!
//! All combinatorial factors (falling factorials, binomials) are computed in
//! integer arithmetic and converted, so polynomials with integer coefficients
//! transform exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub(crate) const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// `(1/2)^(n/2)`, exact for even `n` (plain `SQRT_HALF.powi(n)` rounds).
pub(crate) fn sqrt_half_pow(n: u32) -> f64 {
    let halves = 0.5f64.powi((n / 2) as i32);
    if n % 2 == 1 {
        halves * SQRT_HALF
    } else {
        halves
    }
}

/// Quantization-scheme tag carried by every symbol.
///
/// `Classical` marks a classical phase-space function whose reading (Wick or
/// anti-Wick) is chosen by the operation consuming it; `Untyped` is for
/// intermediate values with no declared scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    Wick,
    AntiWick,
    Classical,
    Untyped,
}

impl fmt::Display for SymbolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SymbolKind::Wick => "wick",
            SymbolKind::AntiWick => "antiwick",
            SymbolKind::Classical => "classical",
            SymbolKind::Untyped => "untyped",
        };
        f.write_str(s)
    }
}

/// Multi-index of mixed `∂_{α_j}` / `∂_{α*_j}` derivative orders.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DerivativeMultiIndex {
    /// Orders of `∂_{α_j}` per mode.
    pub alpha: Vec<u32>,
    /// Orders of `∂_{α*_j}` per mode.
    pub alphastar: Vec<u32>,
}

impl DerivativeMultiIndex {
    pub fn new(alpha: Vec<u32>, alphastar: Vec<u32>) -> Self {
        assert_eq!(alpha.len(), alphastar.len(), "per-mode order lists differ");
        Self { alpha, alphastar }
    }

    /// Single-mode index `∂_α^k ∂_{α*}^l`.
    pub fn single_mode(k: u32, l: u32) -> Self {
        Self {
            alpha: vec![k],
            alphastar: vec![l],
        }
    }

    pub fn num_modes(&self) -> usize {
        self.alpha.len()
    }

    /// Total order `Σ_j (k_j + l_j)`.
    pub fn order(&self) -> u32 {
        self.alpha.iter().sum::<u32>() + self.alphastar.iter().sum::<u32>()
    }
}

/// Exponent pair of a monomial `∏_j α_j^{a_j} (α*_j)^{ad_j}`.
///
/// The derived lexicographic `Ord` fixes the canonical term order used for
/// equality, iteration and serialization.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExponentPair {
    pub a: Vec<u32>,
    pub ad: Vec<u32>,
}

impl ExponentPair {
    fn total_degree(&self) -> u32 {
        self.a.iter().sum::<u32>() + self.ad.iter().sum::<u32>()
    }
}

/// Exact sparse polynomial in `(α_j, α*_j)` with complex coefficients.
///
/// Terms are held in a `BTreeMap` keyed by [`ExponentPair`]; zero coefficients
/// are never stored, so structural equality is semantic equality for exact
/// inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialSymbol {
    num_modes: usize,
    kind: SymbolKind,
    terms: BTreeMap<ExponentPair, Complex64>,
}

impl PolynomialSymbol {
    /// The zero polynomial.
    pub fn zero(num_modes: usize, kind: SymbolKind) -> Self {
        assert!(num_modes >= 1, "need at least one mode");
        Self {
            num_modes,
            kind,
            terms: BTreeMap::new(),
        }
    }

    /// Constant polynomial `c`.
    pub fn constant(num_modes: usize, c: Complex64, kind: SymbolKind) -> Self {
        let mut out = Self::zero(num_modes, kind);
        out.add_term(&vec![0; num_modes], &vec![0; num_modes], c);
        out
    }

    /// Single monomial `c · ∏ α_j^{a_j} (α*_j)^{ad_j}`.
    ///
    /// Panics if the exponent slices do not have `num_modes` entries.
    pub fn monomial(num_modes: usize, a: &[u32], ad: &[u32], c: Complex64, kind: SymbolKind) -> Self {
        let mut out = Self::zero(num_modes, kind);
        out.add_term(a, ad, c);
        out
    }

    /// Build from a list of `(a_powers, ad_powers, coefficient)` terms,
    /// merging duplicates.
    pub fn from_terms<'a, I>(num_modes: usize, terms: I, kind: SymbolKind) -> Self
    where
        I: IntoIterator<Item = (&'a [u32], &'a [u32], Complex64)>,
    {
        let mut out = Self::zero(num_modes, kind);
        for (a, ad, c) in terms {
            out.add_term(a, ad, c);
        }
        out
    }

    /// Single-mode convenience: terms given as `(m, n, c)` for `c α^m α*^n`.
    pub fn single_mode(terms: &[(u32, u32, Complex64)], kind: SymbolKind) -> Self {
        let mut out = Self::zero(1, kind);
        for &(m, n, c) in terms {
            out.add_term(&[m], &[n], c);
        }
        out
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn kind(&self) -> SymbolKind {
        self.kind
    }

    /// Same polynomial re-tagged with another kind.
    pub fn with_kind(mut self, kind: SymbolKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Iterate terms in canonical (lexicographic exponent) order.
    pub fn terms(&self) -> impl Iterator<Item = (&ExponentPair, &Complex64)> {
        self.terms.iter()
    }

    /// Coefficient of `∏ α^a α*^ad` (zero if absent).
    pub fn coeff(&self, a: &[u32], ad: &[u32]) -> Complex64 {
        self.terms
            .get(&ExponentPair {
                a: a.to_vec(),
                ad: ad.to_vec(),
            })
            .copied()
            .unwrap_or_default()
    }

    /// Total degree (0 for the zero polynomial).
    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.total_degree()).max().unwrap_or(0)
    }

    /// Highest power of `α_j` across all terms.
    pub fn degree_alpha(&self, mode: usize) -> u32 {
        self.terms.keys().map(|e| e.a[mode]).max().unwrap_or(0)
    }

    /// Highest power of `α*_j` across all terms.
    pub fn degree_alphastar(&self, mode: usize) -> u32 {
        self.terms.keys().map(|e| e.ad[mode]).max().unwrap_or(0)
    }

    /// Add `c` to the coefficient of the given monomial (dropping the term
    /// if the result is exactly zero).
    pub fn add_term(&mut self, a: &[u32], ad: &[u32], c: Complex64) {
        assert_eq!(a.len(), self.num_modes, "exponent length != num_modes");
        assert_eq!(ad.len(), self.num_modes, "exponent length != num_modes");
        if c == Complex64::default() {
            return;
        }
        let key = ExponentPair {
            a: a.to_vec(),
            ad: ad.to_vec(),
        };
        let entry = self.terms.entry(key).or_default();
        *entry += c;
        if *entry == Complex64::default() {
            let key = ExponentPair {
                a: a.to_vec(),
                ad: ad.to_vec(),
            };
            self.terms.remove(&key);
        }
    }

    fn check_modes(&self, other: &Self) -> Result<()> {
        if self.num_modes != other.num_modes {
            return Err(Error::ModeMismatch {
                left: self.num_modes,
                right: other.num_modes,
            });
        }
        Ok(())
    }

    /// Multiply every coefficient by `c`.
    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero(self.num_modes, self.kind);
        for (e, v) in &self.terms {
            out.add_term(&e.a, &e.ad, *v * c);
        }
        out
    }

    /// Drop terms with |coefficient| below `tol` (canonicalizes away rounding
    /// dust from non-integer pipelines).
    pub fn prune(mut self, tol: f64) -> Self {
        self.terms.retain(|_, c| c.norm() > tol);
        self
    }

    /// Complex conjugate `f*(α, α*)`: swaps each exponent pair and conjugates
    /// coefficients.
    pub fn conjugate(&self) -> Self {
        let mut out = Self::zero(self.num_modes, self.kind);
        for (e, c) in &self.terms {
            out.add_term(&e.ad, &e.a, c.conj());
        }
        out
    }

    /// A symbol represents a self-adjoint operator iff
    /// `coeff(m, n) = conj(coeff(n, m))` for every exponent pair.
    pub fn is_real_symbol(&self, tol: f64) -> bool {
        self.terms.iter().all(|(e, c)| {
            let mirrored = self.coeff(&e.ad, &e.a);
            (*c - mirrored.conj()).norm() <= tol
        })
    }

    /// Exact derivative `∂^idx f` (monomial-wise falling factorials).
    /// Over-differentiation yields the zero polynomial; the kind is preserved.
    pub fn differentiate(&self, idx: &DerivativeMultiIndex) -> Self {
        assert_eq!(idx.num_modes(), self.num_modes, "index mode count mismatch");
        let mut out = Self::zero(self.num_modes, self.kind);
        'terms: for (e, c) in &self.terms {
            let mut factor = 1.0;
            let mut a = e.a.clone();
            let mut ad = e.ad.clone();
            for j in 0..self.num_modes {
                let (k, l) = (idx.alpha[j], idx.alphastar[j]);
                if e.a[j] < k || e.ad[j] < l {
                    continue 'terms;
                }
                factor *= falling_factorial(e.a[j], k) * falling_factorial(e.ad[j], l);
                a[j] = e.a[j] - k;
                ad[j] = e.ad[j] - l;
            }
            out.add_term(&a, &ad, *c * factor);
        }
        out
    }

    /// `∂_{α_j} f` for a single mode.
    pub fn d_alpha(&self, mode: usize) -> Self {
        let mut alpha = vec![0; self.num_modes];
        alpha[mode] = 1;
        self.differentiate(&DerivativeMultiIndex::new(alpha, vec![0; self.num_modes]))
    }

    /// `∂_{α*_j} f` for a single mode.
    pub fn d_alphastar(&self, mode: usize) -> Self {
        let mut alphastar = vec![0; self.num_modes];
        alphastar[mode] = 1;
        self.differentiate(&DerivativeMultiIndex::new(vec![0; self.num_modes], alphastar))
    }

    /// Berezin transform `e^{±Σ_j ∂_{α_j}∂_{α*_j}}` expanded per monomial.
    ///
    /// For a monomial `α^m α*^n` and per-mode order `t_j` the factor is the
    /// integer `(±1)^{t_j} t_j! C(m_j, t_j) C(n_j, t_j)`, so integer inputs
    /// map exactly.
    fn berezin(&self, sign: f64, kind: SymbolKind) -> Self {
        let mut out = Self::zero(self.num_modes, kind);
        for (e, c) in &self.terms {
            let bounds: Vec<u32> = (0..self.num_modes)
                .map(|j| e.a[j].min(e.ad[j]))
                .collect();
            for t in multi_range(&bounds) {
                let mut factor = 1.0;
                let mut a = e.a.clone();
                let mut ad = e.ad.clone();
                for j in 0..self.num_modes {
                    factor *= sign.powi(t[j] as i32)
                        * factorial(t[j])
                        * binomial(e.a[j], t[j])
                        * binomial(e.ad[j], t[j]);
                    a[j] -= t[j];
                    ad[j] -= t[j];
                }
                out.add_term(&a, &ad, *c * factor);
            }
        }
        out
    }

    /// Anti-Wick symbol of the operator whose Wick symbol is `self`:
    /// `bar f = e^{−Σ ∂∂} f`. Rejects anti-Wick input (a scheme-direction
    /// mistake); `Untyped`/`Classical` input stays `Untyped`.
    pub fn berezin_inverse(&self) -> Result<Self> {
        let kind = match self.kind {
            SymbolKind::Wick => SymbolKind::AntiWick,
            SymbolKind::Untyped | SymbolKind::Classical => SymbolKind::Untyped,
            SymbolKind::AntiWick => {
                return Err(Error::Complementarity {
                    op: "berezin_inverse",
                    expected: "wick or untyped",
                    found: self.kind,
                })
            }
        };
        Ok(self.berezin(-1.0, kind))
    }

    /// Wick symbol of the operator whose anti-Wick symbol is `self`:
    /// `tilde f = e^{+Σ ∂∂} f`. Inverse of [`Self::berezin_inverse`] on
    /// polynomials.
    pub fn berezin_forward(&self) -> Result<Self> {
        let kind = match self.kind {
            SymbolKind::AntiWick => SymbolKind::Wick,
            SymbolKind::Untyped | SymbolKind::Classical => SymbolKind::Untyped,
            SymbolKind::Wick => {
                return Err(Error::Complementarity {
                    op: "berezin_forward",
                    expected: "antiwick or untyped",
                    found: self.kind,
                })
            }
        };
        Ok(self.berezin(1.0, kind))
    }

    /// Evaluate at `α_j = point_j`, `α*_j = conj(point_j)`.
    pub fn evaluate(&self, point: &[Complex64]) -> Result<Complex64> {
        if point.len() != self.num_modes {
            return Err(Error::DimensionMismatch {
                expected: self.num_modes,
                found: point.len(),
            });
        }
        let conj: Vec<Complex64> = point.iter().map(|z| z.conj()).collect();
        let mut acc = Complex64::default();
        for (e, c) in &self.terms {
            let mut v = *c;
            for j in 0..self.num_modes {
                v *= point[j].powu(e.a[j]) * conj[j].powu(e.ad[j]);
            }
            acc += v;
        }
        Ok(acc)
    }

    /// Substitute `α_j = (q_j + i p_j)/√2` and expand into a real-variable
    /// polynomial in `(q_j, p_j)`.
    pub fn to_real_polynomial(&self) -> RealPolynomial {
        let i = Complex64::new(0.0, 1.0);
        let mut out = RealPolynomial::zero(self.num_modes);
        for (e, c) in &self.terms {
            // Expand one mode at a time: (q+ip)^m (q-ip)^n / sqrt(2)^(m+n).
            let mut partial: Vec<(Vec<u32>, Vec<u32>, Complex64)> =
                vec![(Vec::new(), Vec::new(), *c)];
            for j in 0..self.num_modes {
                let (m, n) = (e.a[j], e.ad[j]);
                let scale = sqrt_half_pow(m + n);
                let mut next = Vec::new();
                for u in 0..=m {
                    for v in 0..=n {
                        let w = binomial(m, u)
                            * binomial(n, v)
                            * scale
                            * (i.powu(u) * (-i).powu(v));
                        for (q_acc, p_acc, c_acc) in &partial {
                            let mut q = q_acc.clone();
                            let mut p = p_acc.clone();
                            q.push(m - u + n - v);
                            p.push(u + v);
                            next.push((q, p, *c_acc * w));
                        }
                    }
                }
                partial = next;
            }
            for (q, p, v) in partial {
                out.add_term(&q, &p, v);
            }
        }
        out
    }
}

impl fmt::Display for PolynomialSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i)", c.re, c.im)?;
            for j in 0..self.num_modes {
                if e.a[j] > 0 {
                    write!(f, " a{}^{}", j, e.a[j])?;
                }
                if e.ad[j] > 0 {
                    write!(f, " ad{}^{}", j, e.ad[j])?;
                }
            }
        }
        Ok(())
    }
}

impl Add for &PolynomialSymbol {
    type Output = PolynomialSymbol;
    fn add(self, rhs: &PolynomialSymbol) -> PolynomialSymbol {
        self.check_modes(rhs).expect("mode mismatch in +");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(&e.a, &e.ad, *c);
        }
        out
    }
}

impl Sub for &PolynomialSymbol {
    type Output = PolynomialSymbol;
    fn sub(self, rhs: &PolynomialSymbol) -> PolynomialSymbol {
        self.check_modes(rhs).expect("mode mismatch in -");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(&e.a, &e.ad, -*c);
        }
        out
    }
}

impl Mul for &PolynomialSymbol {
    type Output = PolynomialSymbol;
    // exponents add under monomial multiplication
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: &PolynomialSymbol) -> PolynomialSymbol {
        self.check_modes(rhs).expect("mode mismatch in *");
        let mut out = PolynomialSymbol::zero(self.num_modes, self.kind);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                let a: Vec<u32> = e1.a.iter().zip(&e2.a).map(|(x, y)| x + y).collect();
                let ad: Vec<u32> = e1.ad.iter().zip(&e2.ad).map(|(x, y)| x + y).collect();
                out.add_term(&a, &ad, *c1 * *c2);
            }
        }
        out
    }
}

impl Neg for &PolynomialSymbol {
    type Output = PolynomialSymbol;
    fn neg(self) -> PolynomialSymbol {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

/// Coefficient-wise distance `max |c_f − c_g|` over the union of exponents.
pub fn max_coeff_distance(f: &PolynomialSymbol, g: &PolynomialSymbol) -> f64 {
    let mut d: f64 = 0.0;
    for (e, c) in f.terms() {
        d = d.max((*c - g.coeff(&e.a, &e.ad)).norm());
    }
    for (e, c) in g.terms() {
        d = d.max((*c - f.coeff(&e.a, &e.ad)).norm());
    }
    d
}

// ---------------------------------------------------------------------------
// Real-variable polynomials
// ---------------------------------------------------------------------------

/// Sparse polynomial in the real variables `(q_j, p_j)`.
///
/// Coefficients stay complex internally; [`RealPolynomial::is_real`] checks
/// that a polynomial that should be real-valued actually is.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPolynomial {
    num_modes: usize,
    terms: BTreeMap<ExponentPair, Complex64>,
}

impl RealPolynomial {
    pub fn zero(num_modes: usize) -> Self {
        Self {
            num_modes,
            terms: BTreeMap::new(),
        }
    }

    /// Single-mode convenience: terms given as `(q_power, p_power, c)`.
    pub fn single_mode(terms: &[(u32, u32, f64)]) -> Self {
        let mut out = Self::zero(1);
        for &(q, p, c) in terms {
            out.add_term(&[q], &[p], Complex64::new(c, 0.0));
        }
        out
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Iterate `(q_powers, p_powers) -> coefficient` in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&ExponentPair, &Complex64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, q: &[u32], p: &[u32]) -> Complex64 {
        self.terms
            .get(&ExponentPair {
                a: q.to_vec(),
                ad: p.to_vec(),
            })
            .copied()
            .unwrap_or_default()
    }

    /// Add `c` to the coefficient of `q^q_pows p^p_pows`.
    pub fn add_term(&mut self, q: &[u32], p: &[u32], c: Complex64) {
        assert_eq!(q.len(), self.num_modes);
        assert_eq!(p.len(), self.num_modes);
        if c == Complex64::default() {
            return;
        }
        let key = ExponentPair {
            a: q.to_vec(),
            ad: p.to_vec(),
        };
        let entry = self.terms.entry(key).or_default();
        *entry += c;
        if *entry == Complex64::default() {
            self.terms.remove(&ExponentPair {
                a: q.to_vec(),
                ad: p.to_vec(),
            });
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero(self.num_modes);
        for (e, v) in &self.terms {
            out.add_term(&e.a, &e.ad, *v * c);
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.num_modes, rhs.num_modes);
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(&e.a, &e.ad, *c);
        }
        out
    }

    /// Drop terms with |coefficient| below `tol`.
    pub fn prune(mut self, tol: f64) -> Self {
        self.terms.retain(|_, c| c.norm() > tol);
        self
    }

    /// `∂_{q_j}` (exact, monomial-wise).
    pub fn d_q(&self, mode: usize) -> Self {
        self.diff(mode, true)
    }

    /// `∂_{p_j}` (exact, monomial-wise).
    pub fn d_p(&self, mode: usize) -> Self {
        self.diff(mode, false)
    }

    fn diff(&self, mode: usize, wrt_q: bool) -> Self {
        let mut out = Self::zero(self.num_modes);
        for (e, c) in &self.terms {
            let pow = if wrt_q { e.a[mode] } else { e.ad[mode] };
            if pow == 0 {
                continue;
            }
            let mut q = e.a.clone();
            let mut p = e.ad.clone();
            if wrt_q {
                q[mode] -= 1;
            } else {
                p[mode] -= 1;
            }
            out.add_term(&q, &p, *c * pow as f64);
        }
        out
    }

    /// Repeated `∂_q^kq ∂_p^kp` on a single mode.
    pub fn diff_qp(&self, mode: usize, kq: u32, kp: u32) -> Self {
        let mut out = self.clone();
        for _ in 0..kq {
            out = out.d_q(mode);
        }
        for _ in 0..kp {
            out = out.d_p(mode);
        }
        out
    }

    /// Evaluate at real coordinates (one `q` and one `p` per mode).
    pub fn evaluate(&self, q: &[f64], p: &[f64]) -> Complex64 {
        assert_eq!(q.len(), self.num_modes);
        assert_eq!(p.len(), self.num_modes);
        let mut acc = Complex64::default();
        for (e, c) in &self.terms {
            let mut v = *c;
            for j in 0..self.num_modes {
                v *= q[j].powi(e.a[j] as i32) * p[j].powi(e.ad[j] as i32);
            }
            acc += v;
        }
        acc
    }

    /// True when every coefficient is real to within `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    /// Largest |imaginary part| over all coefficients.
    pub fn max_imag(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.im.abs())
            .fold(0.0, f64::max)
    }
}

/// Coefficient-wise distance between real-variable polynomials.
pub fn real_max_coeff_distance(f: &RealPolynomial, g: &RealPolynomial) -> f64 {
    let mut d: f64 = 0.0;
    for (e, c) in f.terms() {
        d = d.max((*c - g.coeff(&e.a, &e.ad)).norm());
    }
    for (e, c) in g.terms() {
        d = d.max((*c - f.coeff(&e.a, &e.ad)).norm());
    }
    d
}

// ---------------------------------------------------------------------------
// Complex <-> real derivative expansions
// ---------------------------------------------------------------------------

/// Expansion of `∂_α^n` (or `∂_{α*}^n` when `conjugated`) in real-variable
/// derivatives, with `ħ = 1`:
///
/// ```text
/// ∂_α^n  = (1/2)^(n/2) Σ_m C(n,m) (-i)^m ∂_q^(n-m) ∂_p^m
/// ∂_α*^n = (1/2)^(n/2) Σ_k C(n,k) (+i)^k ∂_q^(n-k) ∂_p^k
/// ```
///
/// Returns `(q_order, p_order, coefficient)` triples; the expansion applies
/// per mode.
pub fn complex_to_real_expansion(n: u32, conjugated: bool) -> Vec<(u32, u32, Complex64)> {
    let i = Complex64::new(0.0, 1.0);
    let unit = if conjugated { i } else { -i };
    let scale = sqrt_half_pow(n);
    (0..=n)
        .map(|m| (n - m, m, unit.powu(m) * binomial(n, m) * scale))
        .collect()
}

// ---------------------------------------------------------------------------
// Combinatorics helpers (exact in f64 for the sizes used here)
// ---------------------------------------------------------------------------

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n as u64).map(|k| k as f64).product()
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k) as u64;
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for j in 0..k {
        num *= (n as u128) - (j as u128);
        den *= (j + 1) as u128;
    }
    (num / den) as f64
}

/// `n (n-1) ... (n-k+1)`.
pub(crate) fn falling_factorial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    ((n - k + 1)..=n).map(|j| j as f64).product()
}

/// All multi-indices `t` with `0 <= t_j <= bounds_j`, in odometer order.
pub(crate) fn multi_range(bounds: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0; bounds.len()]];
    for (j, &b) in bounds.iter().enumerate() {
        let mut next = Vec::with_capacity(out.len() * (b as usize + 1));
        for t in &out {
            for v in 0..=b {
                let mut t2 = t.clone();
                t2[j] = v;
                next.push(t2);
            }
        }
        out = next;
    }
    out
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TermJson {
    a: Vec<u32>,
    ad: Vec<u32>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct SymbolJson {
    modes: usize,
    terms: Vec<TermJson>,
    kind: SymbolKind,
}

impl Serialize for PolynomialSymbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SymbolJson {
            modes: self.num_modes,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| TermJson {
                    a: e.a.clone(),
                    ad: e.ad.clone(),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
            kind: self.kind,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PolynomialSymbol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SymbolJson::deserialize(d)?;
        if raw.modes == 0 {
            return Err(serde::de::Error::custom("modes must be >= 1"));
        }
        let mut out = PolynomialSymbol::zero(raw.modes, raw.kind);
        for t in raw.terms {
            if t.a.len() != raw.modes || t.ad.len() != raw.modes {
                return Err(serde::de::Error::custom(format!(
                    "term exponent length != modes ({})",
                    raw.modes
                )));
            }
            out.add_term(&t.a, &t.ad, Complex64::new(t.re, t.im));
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct RealTermJson {
    q: Vec<u32>,
    p: Vec<u32>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct RealPolyJson {
    modes: usize,
    terms: Vec<RealTermJson>,
}

impl Serialize for RealPolynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RealPolyJson {
            modes: self.num_modes,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| RealTermJson {
                    q: e.a.clone(),
                    p: e.ad.clone(),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RealPolynomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RealPolyJson::deserialize(d)?;
        if raw.modes == 0 {
            return Err(serde::de::Error::custom("modes must be >= 1"));
        }
        let mut out = RealPolynomial::zero(raw.modes);
        for t in raw.terms {
            if t.q.len() != raw.modes || t.p.len() != raw.modes {
                return Err(serde::de::Error::custom("term exponent length != modes"));
            }
            out.add_term(&t.q, &t.p, Complex64::new(t.re, t.im));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn i() -> Complex64 {
        Complex64::new(0.0, 1.0)
    }

    /// |α|^4 + |α|^2 as a Wick symbol.
    fn quartic_plus_number() -> PolynomialSymbol {
        PolynomialSymbol::single_mode(&[(2, 2, c(1.0)), (1, 1, c(1.0))], SymbolKind::Wick)
    }

    #[test]
    fn differentiate_mixed_monomial() {
        // d_a d_a* (a^2 a*^2) = 4 a a*
        let f = PolynomialSymbol::single_mode(&[(2, 2, c(1.0))], SymbolKind::Untyped);
        let df = f.differentiate(&DerivativeMultiIndex::single_mode(1, 1));
        assert_eq!(df, PolynomialSymbol::single_mode(&[(1, 1, c(4.0))], SymbolKind::Untyped));
    }

    #[test]
    fn differentiate_absent_variable_is_zero() {
        let f = PolynomialSymbol::single_mode(&[(2, 0, c(1.0))], SymbolKind::Untyped);
        assert!(f.differentiate(&DerivativeMultiIndex::single_mode(0, 1)).is_zero());
    }

    #[test]
    fn differentiate_order_exceeding_degree_is_zero() {
        let f = PolynomialSymbol::single_mode(&[(2, 2, c(1.0))], SymbolKind::Untyped);
        assert!(f.differentiate(&DerivativeMultiIndex::single_mode(3, 0)).is_zero());
    }

    #[test]
    fn differentiate_commutes() {
        let f = PolynomialSymbol::single_mode(
            &[(3, 2, Complex64::new(1.5, -0.5)), (1, 4, c(2.0)), (0, 1, i())],
            SymbolKind::Untyped,
        );
        let da_dastar = f.d_alpha(0).d_alphastar(0);
        let dastar_da = f.d_alphastar(0).d_alpha(0);
        assert_eq!(da_dastar, dastar_da);
    }

    #[test]
    fn berezin_inverse_of_quartic_hamiltonian() {
        // |a|^4 + |a|^2  ->  |a|^4 - 3|a|^2 + 1, exactly.
        let bar = quartic_plus_number().berezin_inverse().unwrap();
        let expected = PolynomialSymbol::single_mode(
            &[(2, 2, c(1.0)), (1, 1, c(-3.0)), (0, 0, c(1.0))],
            SymbolKind::AntiWick,
        );
        assert_eq!(bar, expected);
        assert_eq!(bar.kind(), SymbolKind::AntiWick);
    }

    #[test]
    fn berezin_of_constant_is_identity() {
        let f = PolynomialSymbol::constant(1, Complex64::new(2.5, 1.0), SymbolKind::Wick);
        assert_eq!(f.berezin_inverse().unwrap(), f.clone().with_kind(SymbolKind::AntiWick));
    }

    #[test]
    fn berezin_inverse_of_number_symbol() {
        let f = PolynomialSymbol::single_mode(&[(1, 1, c(1.0))], SymbolKind::Wick);
        let expected = PolynomialSymbol::single_mode(
            &[(1, 1, c(1.0)), (0, 0, c(-1.0))],
            SymbolKind::AntiWick,
        );
        assert_eq!(f.berezin_inverse().unwrap(), expected);
    }

    #[test]
    fn berezin_forward_of_number_symbol() {
        let f = PolynomialSymbol::single_mode(&[(1, 1, c(1.0))], SymbolKind::AntiWick);
        let expected = PolynomialSymbol::single_mode(
            &[(1, 1, c(1.0)), (0, 0, c(1.0))],
            SymbolKind::Wick,
        );
        assert_eq!(f.berezin_forward().unwrap(), expected);
    }

    #[test]
    fn berezin_round_trip_is_exact() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let mut f = PolynomialSymbol::zero(1, SymbolKind::Wick);
            for _ in 0..rng.gen_range(1..8) {
                let m = rng.gen_range(0..6);
                let n = rng.gen_range(0..6);
                let re = rng.gen_range(-4i32..=4) as f64;
                let im = rng.gen_range(-4i32..=4) as f64;
                f.add_term(&[m], &[n], Complex64::new(re, im));
            }
            let round = f.berezin_inverse().unwrap().berezin_forward().unwrap();
            assert_eq!(round, f, "round trip drifted for {f}");
        }
    }

    #[test]
    fn berezin_rejects_wrong_direction() {
        let f = PolynomialSymbol::single_mode(&[(1, 1, c(1.0))], SymbolKind::AntiWick);
        assert!(matches!(f.berezin_inverse(), Err(Error::Complementarity { .. })));
        let g = quartic_plus_number();
        assert!(matches!(g.berezin_forward(), Err(Error::Complementarity { .. })));
    }

    #[test]
    fn berezin_preserves_real_symbols() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let mut f = PolynomialSymbol::zero(1, SymbolKind::Wick);
            for _ in 0..5 {
                let m = rng.gen_range(0..5);
                let n = rng.gen_range(0..5);
                let v = Complex64::new(rng.gen_range(-3i32..=3) as f64, rng.gen_range(-3i32..=3) as f64);
                f.add_term(&[m], &[n], v);
                f.add_term(&[n], &[m], v.conj());
            }
            assert!(f.is_real_symbol(0.0));
            assert!(f.berezin_inverse().unwrap().is_real_symbol(0.0));
        }
    }

    #[test]
    fn evaluate_number_and_polynomial() {
        let f = PolynomialSymbol::single_mode(&[(1, 1, c(1.0))], SymbolKind::Untyped);
        let v = f.evaluate(&[Complex64::new(1.0, 1.0)]).unwrap();
        assert!((v - c(2.0)).norm() < 1e-15);

        // a*^2 a^2 - 3 a* a + 1 at a = 1 -> -1
        let g = PolynomialSymbol::single_mode(
            &[(2, 2, c(1.0)), (1, 1, c(-3.0)), (0, 0, c(1.0))],
            SymbolKind::Untyped,
        );
        let v = g.evaluate(&[c(1.0)]).unwrap();
        assert!((v - c(-1.0)).norm() < 1e-15);

        let z = PolynomialSymbol::zero(1, SymbolKind::Untyped);
        assert_eq!(z.evaluate(&[Complex64::new(0.3, -2.0)]).unwrap(), Complex64::default());
    }

    #[test]
    fn evaluate_rejects_wrong_point_length() {
        let f = PolynomialSymbol::zero(2, SymbolKind::Untyped);
        assert!(matches!(
            f.evaluate(&[c(1.0)]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn real_expansion_low_orders() {
        let e0 = complex_to_real_expansion(0, false);
        assert_eq!(e0, vec![(0, 0, c(1.0))]);

        let e1 = complex_to_real_expansion(1, false);
        assert_eq!(e1.len(), 2);
        assert!((e1[0].2 - c(SQRT_HALF)).norm() < 1e-16);
        assert!((e1[1].2 - (-i() * SQRT_HALF)).norm() < 1e-16);
        assert_eq!((e1[0].0, e1[0].1), (1, 0));
        assert_eq!((e1[1].0, e1[1].1), (0, 1));

        // n = 2: (1/2) d_q^2 - i d_q d_p - (1/2) d_p^2
        let e2 = complex_to_real_expansion(2, false);
        assert_eq!(e2.len(), 3);
        assert!((e2[0].2 - c(0.5)).norm() < 1e-16);
        assert!((e2[1].2 - (-i())).norm() < 1e-16);
        assert!((e2[2].2 - c(-0.5)).norm() < 1e-16);
    }

    #[test]
    fn real_expansion_matches_direct_differentiation() {
        // Apply the expansion of d_a^n to a polynomial converted to (q,p)
        // and compare against direct complex differentiation at random points.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let mut f = PolynomialSymbol::zero(1, SymbolKind::Untyped);
            for _ in 0..6 {
                let m = rng.gen_range(0..5);
                let n = rng.gen_range(0..5);
                f.add_term(
                    &[m],
                    &[n],
                    Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
                );
            }
            let order = rng.gen_range(1..4u32);
            let conjugated = rng.gen_bool(0.5);
            let direct = if conjugated {
                f.differentiate(&DerivativeMultiIndex::single_mode(0, order))
            } else {
                f.differentiate(&DerivativeMultiIndex::single_mode(order, 0))
            };

            let freal = f.to_real_polynomial();
            let mut expanded = RealPolynomial::zero(1);
            for (qo, po, w) in complex_to_real_expansion(order, conjugated) {
                expanded = expanded.add(&freal.diff_qp(0, qo, po).scale(w));
            }

            let q = rng.gen_range(-1.5..1.5);
            let p = rng.gen_range(-1.5..1.5);
            let alpha = Complex64::new(q, p) * SQRT_HALF;
            let lhs = direct.evaluate(&[alpha]).unwrap();
            let rhs = expanded.evaluate(&[q], &[p]);
            let scale = lhs.norm().max(1.0);
            assert!(
                (lhs - rhs).norm() / scale < 1e-12,
                "mismatch: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn to_real_polynomial_agrees_pointwise() {
        let f = PolynomialSymbol::single_mode(
            &[(2, 1, Complex64::new(0.5, -1.0)), (0, 3, c(2.0))],
            SymbolKind::Untyped,
        );
        let fr = f.to_real_polynomial();
        for &(q, p) in &[(0.3, -1.2), (2.0, 0.7), (-0.4, -0.9)] {
            let alpha = Complex64::new(q, p) * SQRT_HALF;
            let lhs = f.evaluate(&[alpha]).unwrap();
            let rhs = fr.evaluate(&[q], &[p]);
            assert!((lhs - rhs).norm() < 1e-13);
        }
    }

    #[test]
    fn multi_mode_evaluate_and_degrees() {
        // f = a1 a2* + 2
        let f = PolynomialSymbol::from_terms(
            2,
            [
                (&[1u32, 0][..], &[0u32, 1][..], c(1.0)),
                (&[0, 0][..], &[0, 0][..], c(2.0)),
            ],
            SymbolKind::Untyped,
        );
        assert_eq!(f.degree_alpha(0), 1);
        assert_eq!(f.degree_alphastar(1), 1);
        let v = f
            .evaluate(&[Complex64::new(1.0, 1.0), Complex64::new(0.0, 2.0)])
            .unwrap();
        // (1+i)*conj(2i) + 2 = (1+i)(-2i) + 2 = -2i + 2 + 2 = 4 - 2i... check:
        // (1+i)*(-2i) = -2i - 2i^2 = 2 - 2i; plus 2 -> 4 - 2i.
        assert!((v - Complex64::new(4.0, -2.0)).norm() < 1e-14);
    }

    #[test]
    fn serialization_round_trip_and_shape() {
        let f = PolynomialSymbol::single_mode(
            &[(2, 2, c(1.0)), (1, 1, Complex64::new(-3.0, 0.5))],
            SymbolKind::Wick,
        );
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.contains("\"kind\":\"wick\""));
        assert!(json.contains("\"a\":[1]"));
        let back: PolynomialSymbol = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);

        let g: PolynomialSymbol = serde_json::from_str(
            r#"{"modes":1,"terms":[{"a":[1],"ad":[1],"re":1.0,"im":0.0}],"kind":"antiwick"}"#,
        )
        .unwrap();
        assert_eq!(g.kind(), SymbolKind::AntiWick);
        assert_eq!(g.coeff(&[1], &[1]), c(1.0));
    }

    #[test]
    fn no_zero_terms_stored() {
        let mut f = PolynomialSymbol::zero(1, SymbolKind::Untyped);
        f.add_term(&[1], &[1], c(2.0));
        f.add_term(&[1], &[1], c(-2.0));
        assert!(f.is_zero());
        assert_eq!(f.num_terms(), 0);
    }
}
