//! Derivation of evolution equations for the Husimi Q- and Glauber-Sudarshan
//! P-functions from the complementary Hamiltonian symbol, conversion to real
//! phase-space form, Fokker-Planck coefficient extraction, and the anharmonic
//! oscillator comparison scenario.
//!
//! The Q-function series, with `H` the anti-Wick Hamiltonian symbol (`ħ = 1`):
//!
//! ```text
//! ∂_t Q = -i Σ_{|m|>=1} (1/m!) [ ∂_α*^m (∂_α^m H · Q) − ∂_α^m (∂_α*^m H · Q) ]
//! ```
//!
//! and the P-function series, with `H` the Wick symbol:
//!
//! ```text
//! ∂_t P = +i Σ_{|m|>=1} ((-1)^|m|/m!) [ ∂_α*^m (∂_α^m H · P) − ∂_α^m (∂_α*^m H · P) ]
//! ```
//!
//! Both terminate at the Hamiltonian degree. The n = 1 block is the classical
//! Liouville drift for every Hamiltonian; for Hamiltonians at most quartic in
//! `|α|` the series stops at n = 2 and forms a Fokker-Planck system with a
//! traceless diffusion matrix.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::star::wick_star;
use crate::symbols::{
    binomial, factorial, multi_range, DerivativeMultiIndex, PolynomialSymbol, RealPolynomial,
    SymbolKind,
};
use crate::{Error, Result};

/// Which distribution the derived equation evolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    #[serde(rename = "Q")]
    QFunction,
    #[serde(rename = "P")]
    PFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableForm {
    Complex,
    Real,
}

/// One complex-form contribution `scalar · ∂^outer (inner · F)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSurfaceTerm {
    /// Series order `|m|` this term belongs to.
    pub order: u32,
    pub outer: DerivativeMultiIndex,
    pub inner: PolynomialSymbol,
    pub scalar: Complex64,
}

/// One real-form contribution `scalar · ∂_q^outer_q ∂_p^outer_p (inner · F)`.
///
/// The scalar is exactly real by construction; the inner polynomial is real
/// whenever the Hamiltonian is a real symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSurfaceTerm {
    pub order: u32,
    pub outer_q: Vec<u32>,
    pub outer_p: Vec<u32>,
    pub inner: RealPolynomial,
    pub scalar: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
enum Terms {
    Complex(Vec<ComplexSurfaceTerm>),
    Real(Vec<RealSurfaceTerm>),
}

/// A derived evolution equation as a finite list of surface-derivative terms.
#[derive(Debug, Clone, PartialEq)]
pub struct EomSeries {
    scheme: Scheme,
    hamiltonian: PolynomialSymbol,
    terms: Terms,
    max_n: u32,
}

impl EomSeries {
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn variable_form(&self) -> VariableForm {
        match self.terms {
            Terms::Complex(_) => VariableForm::Complex,
            Terms::Real(_) => VariableForm::Real,
        }
    }

    /// The complementary Hamiltonian symbol the series was derived from.
    pub fn hamiltonian(&self) -> &PolynomialSymbol {
        &self.hamiltonian
    }

    /// Highest series order present (0 for an empty series).
    pub fn max_n(&self) -> u32 {
        self.max_n
    }

    pub fn num_modes(&self) -> usize {
        self.hamiltonian.num_modes()
    }

    pub fn is_empty(&self) -> bool {
        match &self.terms {
            Terms::Complex(t) => t.is_empty(),
            Terms::Real(t) => t.is_empty(),
        }
    }

    pub fn complex_terms(&self) -> Option<&[ComplexSurfaceTerm]> {
        match &self.terms {
            Terms::Complex(t) => Some(t),
            Terms::Real(_) => None,
        }
    }

    pub fn real_terms(&self) -> Option<&[RealSurfaceTerm]> {
        match &self.terms {
            Terms::Real(t) => Some(t),
            Terms::Complex(_) => None,
        }
    }

    /// Keep only the terms whose order satisfies the predicate.
    pub fn restricted_to_orders(&self, keep: impl Fn(u32) -> bool) -> EomSeries {
        let terms = match &self.terms {
            Terms::Complex(t) => {
                Terms::Complex(t.iter().filter(|t| keep(t.order)).cloned().collect())
            }
            Terms::Real(t) => Terms::Real(t.iter().filter(|t| keep(t.order)).cloned().collect()),
        };
        let max_n = match &terms {
            Terms::Complex(t) => t.iter().map(|t| t.order).max().unwrap_or(0),
            Terms::Real(t) => t.iter().map(|t| t.order).max().unwrap_or(0),
        };
        EomSeries {
            scheme: self.scheme,
            hamiltonian: self.hamiltonian.clone(),
            terms,
            max_n,
        }
    }

    /// Apply the complex-form series to a polynomial stand-in for the
    /// distribution: `Σ scalar · ∂^outer (inner · g)`.
    pub fn apply_symbolic(&self, g: &PolynomialSymbol) -> Result<PolynomialSymbol> {
        let terms = self.complex_terms().ok_or_else(|| {
            Error::InvalidConfig("apply_symbolic requires the complex-variable form".into())
        })?;
        if g.num_modes() != self.num_modes() {
            return Err(Error::ModeMismatch {
                left: self.num_modes(),
                right: g.num_modes(),
            });
        }
        let mut out = PolynomialSymbol::zero(self.num_modes(), SymbolKind::Untyped);
        for t in terms {
            let contrib = (&t.inner * g).differentiate(&t.outer);
            out = &out + &contrib.scale(t.scalar);
        }
        Ok(out)
    }

    /// Convert the complex-variable series to the equivalent real `(q, p)`
    /// form with `(1/2)^n` prefactors.
    ///
    /// Each complex pair at multi-index `m` becomes a double sum over outer
    /// realizations `k` and inner realizations `u` with coefficient
    /// `C^m_{k,u} = (1/m!) Π_j C(m_j,k_j) C(m_j,u_j) [i^|k|(-i)^|u| − (-i)^|k| i^|u|]`;
    /// terms with zero coefficient are dropped.
    pub fn to_real_form(&self) -> Result<EomSeries> {
        let terms = self.complex_terms().ok_or_else(|| {
            Error::InvalidConfig("series is already in real-variable form".into())
        })?;

        // Collect the multi-indices present, remembering which side(s) of the
        // bracket survived in the complex form.
        let mut sides: BTreeMap<Vec<u32>, (bool, bool)> = BTreeMap::new();
        for t in terms {
            if t.outer.alpha.iter().all(|&v| v == 0) {
                sides.entry(t.outer.alphastar.clone()).or_default().0 = true;
            } else {
                sides.entry(t.outer.alpha.clone()).or_default().1 = true;
            }
        }

        let h_real = self.hamiltonian.to_real_polynomial();
        let real_terms = real_block(
            &h_real,
            self.scheme,
            self.num_modes(),
            sides.iter().map(|(m, s)| (m.clone(), *s)),
        );
        let max_n = real_terms.iter().map(|t| t.order).max().unwrap_or(0);
        Ok(EomSeries {
            scheme: self.scheme,
            hamiltonian: self.hamiltonian.clone(),
            terms: Terms::Real(real_terms),
            max_n,
        })
    }

    /// Rewrite the single-mode complex-form series in non-surface form:
    /// a map from `(j, k)` to the coefficient polynomial of `∂_α^j ∂_α*^k F`.
    pub fn expand_to_coefficients(&self) -> Result<BTreeMap<(u32, u32), PolynomialSymbol>> {
        let terms = self.complex_terms().ok_or_else(|| {
            Error::InvalidConfig("expand_to_coefficients requires the complex form".into())
        })?;
        if self.num_modes() != 1 {
            return Err(Error::InvalidConfig(
                "expand_to_coefficients is single-mode only".into(),
            ));
        }
        let mut out: BTreeMap<(u32, u32), PolynomialSymbol> = BTreeMap::new();
        for t in terms {
            let (a, b) = (t.outer.alpha[0], t.outer.alphastar[0]);
            for u in 0..=a {
                for v in 0..=b {
                    let w = binomial(a, u) * binomial(b, v);
                    let d_inner = t
                        .inner
                        .differentiate(&DerivativeMultiIndex::single_mode(a - u, b - v));
                    if d_inner.is_zero() {
                        continue;
                    }
                    let entry = out
                        .entry((u, v))
                        .or_insert_with(|| PolynomialSymbol::zero(1, SymbolKind::Untyped));
                    *entry = &*entry + &d_inner.scale(t.scalar * w);
                }
            }
        }
        out.retain(|_, p| !p.is_zero());
        Ok(out)
    }
}

fn scheme_prefactor(scheme: Scheme, order: u32) -> Complex64 {
    match scheme {
        Scheme::QFunction => Complex64::new(0.0, -1.0),
        Scheme::PFunction => {
            if order % 2 == 0 {
                Complex64::new(0.0, 1.0)
            } else {
                Complex64::new(0.0, -1.0)
            }
        }
    }
}

fn derive(scheme: Scheme, h: &PolynomialSymbol) -> EomSeries {
    let modes = h.num_modes();
    let bounds: Vec<u32> = (0..modes)
        .map(|j| h.degree_alpha(j).max(h.degree_alphastar(j)))
        .collect();
    let mut terms = Vec::new();
    for m in multi_range(&bounds) {
        let order: u32 = m.iter().sum();
        if order == 0 {
            continue;
        }
        let inv_fact: f64 = 1.0 / m.iter().map(|&mj| factorial(mj)).product::<f64>();
        let pref = scheme_prefactor(scheme, order) * inv_fact;
        let d = DerivativeMultiIndex::new(m.clone(), vec![0; modes]);
        let dbar = DerivativeMultiIndex::new(vec![0; modes], m.clone());

        let inner1 = h.differentiate(&d);
        if !inner1.is_zero() {
            terms.push(ComplexSurfaceTerm {
                order,
                outer: dbar.clone(),
                inner: inner1,
                scalar: pref,
            });
        }
        let inner2 = h.differentiate(&dbar);
        if !inner2.is_zero() {
            terms.push(ComplexSurfaceTerm {
                order,
                outer: d,
                inner: inner2,
                scalar: -pref,
            });
        }
    }
    terms.sort_by(|a, b| (a.order, &a.outer).cmp(&(b.order, &b.outer)));
    let max_n = terms.iter().map(|t| t.order).max().unwrap_or(0);
    EomSeries {
        scheme,
        hamiltonian: h.clone(),
        terms: Terms::Complex(terms),
        max_n,
    }
}

/// Evolution series for the Husimi Q-function from the anti-Wick Hamiltonian
/// symbol. A `Classical` Hamiltonian is read as its own anti-Wick symbol;
/// a Wick-tagged Hamiltonian is rejected.
pub fn derive_q_eom(h_antiwick: &PolynomialSymbol) -> Result<EomSeries> {
    if h_antiwick.kind() == SymbolKind::Wick {
        return Err(Error::Complementarity {
            op: "derive_q_eom",
            expected: "antiwick or classical",
            found: h_antiwick.kind(),
        });
    }
    Ok(derive(Scheme::QFunction, h_antiwick))
}

/// Evolution series for the Glauber-Sudarshan P-function from the Wick
/// Hamiltonian symbol. An anti-Wick-tagged Hamiltonian is rejected.
pub fn derive_p_eom(h_wick: &PolynomialSymbol) -> Result<EomSeries> {
    if h_wick.kind() == SymbolKind::AntiWick {
        return Err(Error::Complementarity {
            op: "derive_p_eom",
            expected: "wick or classical",
            found: h_wick.kind(),
        });
    }
    Ok(derive(Scheme::PFunction, h_wick))
}

/// Shared real-form expansion. `sides` lists each multi-index together with
/// flags for which bracket sides are present (`∂_α*^m(∂_α^m H ·)`,
/// `∂_α^m(∂_α*^m H ·)`).
fn real_block(
    h_real: &RealPolynomial,
    scheme: Scheme,
    modes: usize,
    sides: impl Iterator<Item = (Vec<u32>, (bool, bool))>,
) -> Vec<RealSurfaceTerm> {
    let i = Complex64::new(0.0, 1.0);
    let mut out = Vec::new();
    for (m, (side_bar, side_plain)) in sides {
        let order: u32 = m.iter().sum();
        let inv_fact: f64 = 1.0 / m.iter().map(|&mj| factorial(mj)).product::<f64>();
        let pref = scheme_prefactor(scheme, order) * inv_fact * 0.5f64.powi(order as i32);
        for k in multi_range(&m) {
            let ksum: u32 = k.iter().sum();
            for u in multi_range(&m) {
                let usum: u32 = u.iter().sum();
                let mut w = Complex64::default();
                if side_bar {
                    w += i.powu(ksum) * (-i).powu(usum);
                }
                if side_plain {
                    w -= (-i).powu(ksum) * i.powu(usum);
                }
                if w == Complex64::default() {
                    continue;
                }
                let mut binoms = 1.0;
                for j in 0..modes {
                    binoms *= binomial(m[j], k[j]) * binomial(m[j], u[j]);
                }
                let mut inner = h_real.clone();
                for j in 0..modes {
                    inner = inner.diff_qp(j, m[j] - u[j], u[j]);
                }
                if inner.is_zero() {
                    continue;
                }
                let outer_q: Vec<u32> = m.iter().zip(&k).map(|(mj, kj)| mj - kj).collect();
                out.push(RealSurfaceTerm {
                    order,
                    outer_q,
                    outer_p: k.clone(),
                    inner,
                    scalar: pref * binoms * w,
                });
            }
        }
    }
    out.sort_by(|a, b| {
        (a.order, &a.outer_q, &a.outer_p).cmp(&(b.order, &b.outer_q, &b.outer_p))
    });
    out
}

/// The order-n real-form block of the evolution series for `h` (n >= 3:
/// the beyond-diffusion corrections; empty when the Hamiltonian has no
/// derivatives of that order).
pub fn beyond_diffusion_terms(
    h: &PolynomialSymbol,
    scheme: Scheme,
    n: u32,
) -> Result<Vec<RealSurfaceTerm>> {
    if n < 3 {
        return Err(Error::InvalidConfig(format!(
            "beyond-diffusion blocks start at order 3 (asked for {n})"
        )));
    }
    let eom = match scheme {
        Scheme::QFunction => derive_q_eom(h)?,
        Scheme::PFunction => derive_p_eom(h)?,
    };
    let restricted = eom.restricted_to_orders(|o| o == n);
    Ok(restricted.to_real_form()?.real_terms().unwrap().to_vec())
}

// ---------------------------------------------------------------------------
// Fokker-Planck coefficients
// ---------------------------------------------------------------------------

/// Drift vector and (traceless) diffusion matrix of a second-order series,
/// as real-variable polynomials in `(q, p)`:
///
/// ```text
/// ∂_t F = −∂_q(A_q F) − ∂_p(A_p F)
///         + (1/2)[∂_q²(D_qq F) + ∂_p²(D_pp F) + ∂_q∂_p((D_qp + D_pq) F)]
/// ```
///
/// with `D_qp = D_pq` stored once.
#[derive(Debug, Clone, PartialEq)]
pub struct FpCoefficients {
    pub a_q: RealPolynomial,
    pub a_p: RealPolynomial,
    pub d_qq: RealPolynomial,
    pub d_pp: RealPolynomial,
    pub d_qp: RealPolynomial,
}

impl FpCoefficients {
    /// `D_qq + D_pp` is the zero polynomial (up to `tol` per coefficient).
    pub fn is_traceless(&self, tol: f64) -> bool {
        self.d_qq
            .add(&self.d_pp)
            .terms()
            .all(|(_, c)| c.norm() <= tol)
    }
}

impl Serialize for FpCoefficients {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("FpCoefficients", 6)?;
        st.serialize_field("a_q", &self.a_q)?;
        st.serialize_field("a_p", &self.a_p)?;
        st.serialize_field("d_qq", &self.d_qq)?;
        st.serialize_field("d_pp", &self.d_pp)?;
        st.serialize_field("d_qp", &self.d_qp)?;
        st.serialize_field("traceless", &self.is_traceless(1e-12))?;
        st.end()
    }
}

/// Extract Fokker-Planck drift and diffusion from a derived series
/// (single-mode, `max_n <= 2`).
///
/// Q-scheme (`ħ = 1`): `A_q = ∂_p H`, `A_p = −∂_q H`, `D_pp = ∂_q∂_p H`,
/// `D_qq = −D_pp`, `D_qp = (∂_q² − ∂_p²)H / 2`; the P-scheme flips the sign
/// of every diffusion entry.
pub fn extract_fp(eom: &EomSeries) -> Result<FpCoefficients> {
    if eom.num_modes() != 1 {
        return Err(Error::InvalidConfig(
            "Fokker-Planck extraction is single-mode only".into(),
        ));
    }
    if eom.max_n() > 2 {
        let order = match (&eom.terms, eom.complex_terms()) {
            (_, Some(t)) => t.iter().map(|t| t.order).filter(|&o| o >= 3).min(),
            _ => eom
                .real_terms()
                .unwrap()
                .iter()
                .map(|t| t.order)
                .filter(|&o| o >= 3)
                .min(),
        }
        .unwrap_or(eom.max_n());
        return Err(Error::BeyondDiffusion { order });
    }
    let h = eom.hamiltonian().to_real_polynomial();
    let a_q = h.d_p(0);
    let a_p = h.d_q(0).scale(Complex64::new(-1.0, 0.0));
    let mixed = h.d_q(0).d_p(0);
    let half_dq2_minus_dp2 = h
        .d_q(0)
        .d_q(0)
        .add(&h.d_p(0).d_p(0).scale(Complex64::new(-1.0, 0.0)))
        .scale(Complex64::new(0.5, 0.0));
    let (d_pp, d_qq, d_qp) = match eom.scheme() {
        Scheme::QFunction => (
            mixed.clone(),
            mixed.scale(Complex64::new(-1.0, 0.0)),
            half_dq2_minus_dp2,
        ),
        Scheme::PFunction => (
            mixed.scale(Complex64::new(-1.0, 0.0)),
            mixed.clone(),
            half_dq2_minus_dp2.scale(Complex64::new(-1.0, 0.0)),
        ),
    };
    Ok(FpCoefficients {
        a_q,
        a_p,
        d_qq,
        d_pp,
        d_qp,
    })
}

// ---------------------------------------------------------------------------
// Anharmonic oscillator scenario
// ---------------------------------------------------------------------------

/// All symbols and equations of the anharmonic-oscillator comparison between
/// the normal-ordered (Milburn) and anti-Wick quantizations.
///
/// Both evolution series are in dimensionless time `τ = ω₀ t` (that is,
/// derived from the interaction symbols divided by `ω₀`).
#[derive(Debug, Clone)]
pub struct MilburnScenario {
    pub mu: f64,
    pub omega0: f64,
    /// Lab-frame classical Hamiltonian `ω₀(|α|² + μ|α|⁴)`.
    pub h_classical: PolynomialSymbol,
    /// Rotating-frame classical interaction `ω₀ μ |α|⁴`, the anti-Wick symbol
    /// of the anti-Wick-quantized interaction operator.
    pub h_antiwick_quantized: PolynomialSymbol,
    /// Wick symbol of Milburn's interaction operator: `ω₀ μ (|α|⁴ + |α|²)`.
    pub h_milburn_interaction_wick: PolynomialSymbol,
    /// Its anti-Wick symbol: `ω₀ μ (α*²α² − 3α*α + 1)`.
    pub h_milburn_interaction_antiwick: PolynomialSymbol,
    /// Q-function series (τ units) from the Milburn interaction Hamiltonian.
    pub eom_milburn: EomSeries,
    /// Q-function series (τ units) from the anti-Wick-quantized Hamiltonian.
    pub eom_antiwick: EomSeries,
}

impl MilburnScenario {
    /// Classical rotating-frame drift: the order-1 block of the
    /// anti-Wick-quantized series, `2iμ[∂_α(α|α|² ·) − ∂_α*(α*|α|² ·)]`.
    pub fn classical_drift(&self) -> EomSeries {
        self.eom_antiwick.restricted_to_orders(|o| o == 1)
    }

    /// Non-classical drift of the Milburn branch: the first-derivative
    /// coefficients of the fully expanded Milburn evolution minus the
    /// classical Liouville ones. Keys are `(j, k)` derivative orders of the
    /// distribution (restricted to `j + k = 1`); values the offending
    /// coefficient polynomials (e.g. `+iμα` on `∂_α`).
    pub fn drift_artifact(&self) -> Result<BTreeMap<(u32, u32), PolynomialSymbol>> {
        let milburn = self.eom_milburn.expand_to_coefficients()?;
        let classical = self.classical_drift().expand_to_coefficients()?;
        let mut artifact = BTreeMap::new();
        for (key, poly) in milburn {
            if key.0 + key.1 != 1 {
                continue;
            }
            let diff = match classical.get(&key) {
                Some(r) => (&poly - r).prune(1e-12),
                None => poly,
            };
            if !diff.is_zero() {
                artifact.insert(key, diff);
            }
        }
        Ok(artifact)
    }
}

/// Build the anharmonic-oscillator scenario programmatically.
///
/// `H_I,W = ω₀μ(|α|⁴ + |α|²)` is produced by a Wick star product of number
/// symbols, `H_I,aW` by the inverse Berezin transform, and both Q-function
/// series are derived and cross-checked against the classical drift.
pub fn milburn_scenario(mu: f64, omega0: f64) -> Result<MilburnScenario> {
    if !(mu >= 0.0) || !(omega0 > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "need mu >= 0 and omega0 > 0 (got mu = {mu}, omega0 = {omega0})"
        )));
    }
    let one = Complex64::new(1.0, 0.0);
    let number = PolynomialSymbol::single_mode(&[(1, 1, one)], SymbolKind::Wick);
    // (a†a)² has Wick symbol (α*α) *_W (α*α) = |α|⁴ + |α|².
    let number_sq = wick_star(&number, &number)?;
    let h_milburn_interaction_wick = number_sq.scale(Complex64::new(omega0 * mu, 0.0));
    let h_milburn_interaction_antiwick = h_milburn_interaction_wick.berezin_inverse()?;

    let h_classical = PolynomialSymbol::single_mode(
        &[(1, 1, one * omega0), (2, 2, one * (omega0 * mu))],
        SymbolKind::Classical,
    );
    let h_antiwick_quantized =
        PolynomialSymbol::single_mode(&[(2, 2, one * (omega0 * mu))], SymbolKind::Classical);

    // Dimensionless time: derive from the interaction symbols divided by ω₀.
    let eom_milburn = derive_q_eom(
        &h_milburn_interaction_antiwick.scale(Complex64::new(1.0 / omega0, 0.0)),
    )?;
    let eom_antiwick = derive_q_eom(
        &h_antiwick_quantized
            .scale(Complex64::new(1.0 / omega0, 0.0))
            .with_kind(SymbolKind::Classical),
    )?;

    let scenario = MilburnScenario {
        mu,
        omega0,
        h_classical,
        h_antiwick_quantized,
        h_milburn_interaction_wick,
        h_milburn_interaction_antiwick,
        eom_milburn,
        eom_antiwick,
    };

    if mu > 0.0 {
        let scale = mu.abs();
        // The -3α*α footprint of the anti-Wick interaction symbol.
        let found = scenario.h_milburn_interaction_antiwick.coeff(&[1], &[1]);
        assert!(
            (found - Complex64::new(-3.0 * omega0 * mu, 0.0)).norm() <= 1e-12 * scale,
            "anti-Wick interaction symbol lost its -3|α|² term"
        );
        // The anti-Wick-quantized drift matches the classical rotating-frame
        // drift, and the Milburn drift does not.
        let artifact = scenario.drift_artifact().expect("single-mode expansion");
        assert!(
            !artifact.is_empty(),
            "Milburn drift artifact unexpectedly absent"
        );
        let classical = scenario.classical_drift();
        let own_drift = scenario.eom_antiwick.restricted_to_orders(|o| o == 1);
        assert_eq!(
            classical, own_drift,
            "anti-Wick drift must equal the classical Liouville drift"
        );
    }
    Ok(scenario)
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ScalarJson {
    re: f64,
    im: f64,
}

#[derive(Serialize)]
#[serde(untagged)]
enum OuterJson {
    Complex { alpha: Vec<u32>, alphastar: Vec<u32> },
    Real { q: Vec<u32>, p: Vec<u32> },
}

#[derive(Serialize)]
#[serde(untagged)]
enum InnerJson<'a> {
    Complex(&'a PolynomialSymbol),
    Real(&'a RealPolynomial),
}

#[derive(Serialize)]
struct TermJson<'a> {
    order: u32,
    outer: OuterJson,
    inner: InnerJson<'a>,
    scalar: ScalarJson,
}

impl Serialize for EomSeries {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let terms: Vec<TermJson> = match &self.terms {
            Terms::Complex(ts) => ts
                .iter()
                .map(|t| TermJson {
                    order: t.order,
                    outer: OuterJson::Complex {
                        alpha: t.outer.alpha.clone(),
                        alphastar: t.outer.alphastar.clone(),
                    },
                    inner: InnerJson::Complex(&t.inner),
                    scalar: ScalarJson {
                        re: t.scalar.re,
                        im: t.scalar.im,
                    },
                })
                .collect(),
            Terms::Real(ts) => ts
                .iter()
                .map(|t| TermJson {
                    order: t.order,
                    outer: OuterJson::Real {
                        q: t.outer_q.clone(),
                        p: t.outer_p.clone(),
                    },
                    inner: InnerJson::Real(&t.inner),
                    scalar: ScalarJson {
                        re: t.scalar.re,
                        im: t.scalar.im,
                    },
                })
                .collect(),
        };
        let mut st = s.serialize_struct("EomSeries", 5)?;
        st.serialize_field("scheme", &self.scheme)?;
        st.serialize_field("variable_form", &self.variable_form())?;
        st.serialize_field("max_n", &self.max_n)?;
        st.serialize_field("hamiltonian", &self.hamiltonian)?;
        st.serialize_field("terms", &terms)?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::star::{wick_bracket, wick_bracket_complementary};
    use crate::symbols::max_coeff_distance;
    use rand::{Rng, SeedableRng};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn i_times(x: f64) -> Complex64 {
        Complex64::new(0.0, x)
    }

    fn harmonic(kind: SymbolKind) -> PolynomialSymbol {
        PolynomialSymbol::single_mode(&[(1, 1, c(1.0))], kind)
    }

    fn random_real_symbol(rng: &mut impl Rng, max_half_deg: u32) -> PolynomialSymbol {
        let mut h = PolynomialSymbol::zero(1, SymbolKind::AntiWick);
        for _ in 0..5 {
            let m = rng.gen_range(0..=max_half_deg);
            let n = rng.gen_range(0..=max_half_deg.min(4 - m.min(4)));
            let v = Complex64::new(
                rng.gen_range(-3i32..=3) as f64,
                rng.gen_range(-3i32..=3) as f64,
            );
            h.add_term(&[m], &[n], v);
            h.add_term(&[n], &[m], v.conj());
        }
        h
    }

    #[test]
    fn harmonic_q_eom_is_single_drift_pair() {
        // H = ω₀|α|²: -iω₀[∂_α*(α* Q) - ∂_α(α Q)]
        let omega0 = 2.0;
        let h = harmonic(SymbolKind::AntiWick).scale(c(omega0));
        let eom = derive_q_eom(&h).unwrap();
        assert_eq!(eom.max_n(), 1);
        let terms = eom.complex_terms().unwrap();
        assert_eq!(terms.len(), 2);
        // Sorted order puts the ∂_α* outer term (alpha orders [0]) first.
        assert_eq!(terms[0].outer, DerivativeMultiIndex::single_mode(0, 1));
        assert_eq!(
            terms[0].inner,
            PolynomialSymbol::single_mode(&[(0, 1, c(omega0))], SymbolKind::AntiWick)
        );
        assert_eq!(terms[0].scalar, i_times(-1.0));
        assert_eq!(terms[1].outer, DerivativeMultiIndex::single_mode(1, 0));
        assert_eq!(
            terms[1].inner,
            PolynomialSymbol::single_mode(&[(1, 0, c(omega0))], SymbolKind::AntiWick)
        );
        assert_eq!(terms[1].scalar, i_times(1.0));
    }

    #[test]
    fn anharmonic_drift_coefficients() {
        // H = ω₀(|α|² + μ|α|⁴): the ∂_α* inner must be ω₀(α* + 2μ α*|α|²).
        let (omega0, mu) = (1.0, 0.25);
        let h = PolynomialSymbol::single_mode(
            &[(1, 1, c(omega0)), (2, 2, c(omega0 * mu))],
            SymbolKind::AntiWick,
        );
        let eom = derive_q_eom(&h).unwrap();
        let drift = eom.restricted_to_orders(|o| o == 1);
        let terms = drift.complex_terms().unwrap();
        let bar_term = terms
            .iter()
            .find(|t| t.outer == DerivativeMultiIndex::single_mode(0, 1))
            .unwrap();
        let expected = PolynomialSymbol::single_mode(
            &[(0, 1, c(omega0)), (1, 2, c(2.0 * omega0 * mu))],
            SymbolKind::AntiWick,
        );
        assert_eq!(bar_term.inner, expected);
    }

    #[test]
    fn constant_hamiltonian_gives_empty_series() {
        let h = PolynomialSymbol::constant(1, c(7.0), SymbolKind::AntiWick);
        let eom = derive_q_eom(&h).unwrap();
        assert!(eom.is_empty());
        assert_eq!(eom.max_n(), 0);
        let h = PolynomialSymbol::constant(1, c(7.0), SymbolKind::Wick);
        assert!(derive_p_eom(&h).unwrap().is_empty());
    }

    #[test]
    fn derive_rejects_wrong_complementarity() {
        let h = harmonic(SymbolKind::Wick);
        assert!(matches!(derive_q_eom(&h), Err(Error::Complementarity { .. })));
        let h = harmonic(SymbolKind::AntiWick);
        assert!(matches!(derive_p_eom(&h), Err(Error::Complementarity { .. })));
    }

    #[test]
    fn q_eom_equals_complementary_bracket_application() {
        // -i {{berezin_forward(H), G}}_W applied symbolically must equal the
        // derived series applied to G.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..25 {
            let h = random_real_symbol(&mut rng, 2);
            let mut g = PolynomialSymbol::zero(1, SymbolKind::Wick);
            for _ in 0..4 {
                g.add_term(
                    &[rng.gen_range(0..4)],
                    &[rng.gen_range(0..4)],
                    Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
                );
            }
            let eom = derive_q_eom(&h).unwrap();
            let lhs = eom.apply_symbolic(&g).unwrap();

            let h_wick = h.berezin_forward().unwrap();
            let bracket = wick_bracket(&h_wick, &g).unwrap();
            let rhs = bracket.scale(i_times(-1.0));
            assert!(
                max_coeff_distance(&lhs, &rhs) < 1e-10,
                "series != -i {{H_W, G}}_W"
            );

            // and the complementary-series route agrees too
            let comp = wick_bracket_complementary(&h.clone().with_kind(SymbolKind::AntiWick), &g, None)
                .unwrap()
                .scale(i_times(-1.0));
            assert!(max_coeff_distance(&lhs, &comp) < 1e-10);
        }
    }

    #[test]
    fn p_eom_drift_matches_liouville_and_quartic_diffusion_sign() {
        // Harmonic Wick Hamiltonian: same drift as the Q case.
        let h = harmonic(SymbolKind::Wick);
        let eom = derive_p_eom(&h).unwrap();
        assert_eq!(eom.max_n(), 1);
        let fp = extract_fp(&eom).unwrap();
        // A_q = ∂_p H = p, A_p = -∂_q H = -q for H = (q²+p²)/2.
        assert_eq!(fp.a_q, RealPolynomial::single_mode(&[(0, 1, 1.0)]));
        assert_eq!(fp.a_p, RealPolynomial::single_mode(&[(1, 0, -1.0)]));

        // Quartic Wick Hamiltonian: D_pp = -∂_q∂_p H_W for the P-scheme.
        let quartic = PolynomialSymbol::single_mode(&[(2, 2, c(1.0))], SymbolKind::Wick);
        let fp = extract_fp(&derive_p_eom(&quartic).unwrap()).unwrap();
        // H = (q²+p²)²/4, ∂_q∂_p H = 2qp.
        assert_eq!(fp.d_pp, RealPolynomial::single_mode(&[(1, 1, -2.0)]));
        assert_eq!(fp.d_qq, RealPolynomial::single_mode(&[(1, 1, 2.0)]));
        assert!(fp.is_traceless(0.0));
    }

    #[test]
    fn real_form_order1_is_classical_liouville() {
        // C¹₀₁ = -2i, C¹₁₀ = +2i, diagonal zero: with the -i/2 prefactors the
        // order-1 block is -∂_q(∂_p H · Q) + ∂_p(∂_q H · Q).
        let h = harmonic(SymbolKind::AntiWick);
        let real = derive_q_eom(&h).unwrap().to_real_form().unwrap();
        let terms = real.real_terms().unwrap();
        assert_eq!(terms.len(), 2);
        for t in terms {
            assert_eq!(t.scalar.im, 0.0, "real-form scalars are exactly real");
            assert_eq!(t.order, 1);
        }
        // term sorted: outer_q=[0],outer_p=[1] first
        assert_eq!(terms[0].outer_q, vec![0]);
        assert_eq!(terms[0].outer_p, vec![1]);
        assert_eq!(terms[0].scalar, c(1.0));
        assert_eq!(terms[0].inner, RealPolynomial::single_mode(&[(1, 0, 1.0)]));
        assert_eq!(terms[1].outer_q, vec![1]);
        assert_eq!(terms[1].outer_p, vec![0]);
        assert_eq!(terms[1].scalar, c(-1.0));
        assert_eq!(terms[1].inner, RealPolynomial::single_mode(&[(0, 1, 1.0)]));
    }

    #[test]
    fn real_form_pure_surface_derivative_structure() {
        // Pure q-surface outer derivatives appear at k = 0, pure p at k = n.
        let h = PolynomialSymbol::single_mode(&[(2, 2, c(1.0))], SymbolKind::AntiWick);
        let real = derive_q_eom(&h).unwrap().to_real_form().unwrap();
        let n2: Vec<_> = real
            .real_terms()
            .unwrap()
            .iter()
            .filter(|t| t.order == 2)
            .collect();
        assert!(n2.iter().any(|t| t.outer_p == vec![0] && t.outer_q == vec![2]));
        assert!(n2.iter().any(|t| t.outer_p == vec![2] && t.outer_q == vec![0]));
        // every order-2 term has |outer| = 2
        for t in &n2 {
            assert_eq!(t.outer_q[0] + t.outer_p[0], 2);
        }
    }

    #[test]
    fn traceless_diffusion_for_random_quartic_hamiltonians() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let h = random_real_symbol(&mut rng, 2);
            let eom = derive_q_eom(&h).unwrap();
            assert!(eom.max_n() <= 2);
            let fp = extract_fp(&eom).unwrap();
            assert!(
                fp.d_qq.add(&fp.d_pp).prune(1e-12).is_zero(),
                "trace not zero for {h}"
            );
        }
    }

    #[test]
    fn extract_fp_rejects_beyond_diffusion() {
        let h = PolynomialSymbol::single_mode(&[(3, 3, c(1.0))], SymbolKind::AntiWick);
        let eom = derive_q_eom(&h).unwrap();
        assert!(matches!(
            extract_fp(&eom),
            Err(Error::BeyondDiffusion { order: 3 })
        ));
    }

    #[test]
    fn harmonic_fp_has_zero_diffusion() {
        // H = (q²+p²)/2: A_q = p, A_p = -q, all D = 0.
        let fp = extract_fp(&derive_q_eom(&harmonic(SymbolKind::AntiWick)).unwrap()).unwrap();
        assert!(fp.d_qq.is_zero() && fp.d_pp.is_zero() && fp.d_qp.is_zero());
        assert_eq!(fp.a_q, RealPolynomial::single_mode(&[(0, 1, 1.0)]));
        assert_eq!(fp.a_p, RealPolynomial::single_mode(&[(1, 0, -1.0)]));
    }

    #[test]
    fn beyond_diffusion_quartic_is_empty_and_sextic_is_not() {
        let quartic = PolynomialSymbol::single_mode(&[(2, 2, c(1.0))], SymbolKind::AntiWick);
        assert!(beyond_diffusion_terms(&quartic, Scheme::QFunction, 3)
            .unwrap()
            .is_empty());

        let sextic = PolynomialSymbol::single_mode(&[(3, 3, c(1.0))], SymbolKind::AntiWick);
        let block = beyond_diffusion_terms(&sextic, Scheme::QFunction, 3).unwrap();
        assert!(!block.is_empty());
        for t in &block {
            assert_eq!(t.order, 3);
            assert_eq!(t.outer_q[0] + t.outer_p[0], 3);
        }
    }

    #[test]
    fn n3_block_has_paper_coefficient_pattern() {
        // For the Q-scheme the n = 3 block is
        //   (1/(3! 2²)) [ (∂q³ − 3∂q∂p²)((∂p³ − 3∂q²∂p)H · Q)
        //               − (∂p³ − 3∂q²∂p)((∂q³ − 3∂q∂p²)H · Q) ]
        // i.e. outer (3,0) pairs with inner weights (0,3): +1, (2,1): -3, and
        // the q<->p mirrored pattern with opposite sign.
        let h = PolynomialSymbol::single_mode(&[(3, 3, c(1.0))], SymbolKind::AntiWick);
        let block = beyond_diffusion_terms(&h, Scheme::QFunction, 3).unwrap();
        let h_real = h.to_real_polynomial();
        let w = 1.0 / (factorial(3) * 4.0);

        let find = |oq: u32, op: u32, iq: u32, ip: u32| -> f64 {
            let inner = h_real.diff_qp(0, iq, ip);
            block
                .iter()
                .filter(|t| {
                    t.outer_q == vec![oq] && t.outer_p == vec![op] && t.inner == inner
                })
                .map(|t| t.scalar.re)
                .sum()
        };

        assert!((find(3, 0, 0, 3) - w).abs() < 1e-15);
        assert!((find(3, 0, 2, 1) + 3.0 * w).abs() < 1e-15);
        assert!((find(0, 3, 3, 0) + w).abs() < 1e-15);
        assert!((find(0, 3, 1, 2) - 3.0 * w).abs() < 1e-15);
        // mixed outers carry the -3 weights of (∂q³ − 3∂q∂p²) etc.
        assert!((find(1, 2, 0, 3) + 3.0 * w).abs() < 1e-15);
        assert!((find(1, 2, 2, 1) - 9.0 * w).abs() < 1e-15);
    }

    #[test]
    fn separable_two_mode_hamiltonian_has_no_cross_terms() {
        let h = PolynomialSymbol::from_terms(
            2,
            [
                (&[1u32, 0][..], &[1u32, 0][..], c(1.0)),
                (&[0, 2][..], &[0, 2][..], c(0.5)),
            ],
            SymbolKind::AntiWick,
        );
        let eom = derive_q_eom(&h).unwrap();
        for t in eom.complex_terms().unwrap() {
            let touches_mode0 = t.outer.alpha[0] + t.outer.alphastar[0] > 0;
            let touches_mode1 = t.outer.alpha[1] + t.outer.alphastar[1] > 0;
            assert!(
                touches_mode0 ^ touches_mode1,
                "cross-mode term in separable Hamiltonian"
            );
        }
        // and the series equals the sum of the single-mode series applied to
        // a separable stand-in (checked symbolically against a product g).
        let g = PolynomialSymbol::from_terms(
            2,
            [(&[1u32, 1][..], &[1u32, 1][..], c(1.0))],
            SymbolKind::Untyped,
        );
        let combined = eom.apply_symbolic(&g).unwrap();
        let h0 = PolynomialSymbol::from_terms(
            2,
            [(&[1u32, 0][..], &[1u32, 0][..], c(1.0))],
            SymbolKind::AntiWick,
        );
        let h1 = PolynomialSymbol::from_terms(
            2,
            [(&[0u32, 2][..], &[0u32, 2][..], c(0.5))],
            SymbolKind::AntiWick,
        );
        let sum = &derive_q_eom(&h0).unwrap().apply_symbolic(&g).unwrap()
            + &derive_q_eom(&h1).unwrap().apply_symbolic(&g).unwrap();
        assert!(max_coeff_distance(&combined, &sum) < 1e-12);
    }

    #[test]
    fn order1_blocks_agree_between_schemes() {
        // The drift block is the classical Liouville term for both the Q and
        // P readings of the same classical Hamiltonian.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
        for _ in 0..20 {
            let h = random_real_symbol(&mut rng, 2).with_kind(SymbolKind::Classical);
            let q_drift = derive_q_eom(&h)
                .unwrap()
                .restricted_to_orders(|o| o == 1)
                .to_real_form()
                .unwrap();
            let p_drift = derive_p_eom(&h)
                .unwrap()
                .restricted_to_orders(|o| o == 1)
                .to_real_form()
                .unwrap();
            assert_eq!(q_drift.real_terms().unwrap(), p_drift.real_terms().unwrap());
        }
    }

    #[test]
    fn milburn_scenario_reproduces_papers_symbols() {
        let (mu, omega0) = (0.125, 1.0);
        let sc = milburn_scenario(mu, omega0).unwrap();

        // H_I,aW = ω₀μ(α*²α² − 3α*α + 1) exactly (dyadic μ).
        let expected = PolynomialSymbol::single_mode(
            &[
                (2, 2, c(omega0 * mu)),
                (1, 1, c(-3.0 * omega0 * mu)),
                (0, 0, c(omega0 * mu)),
            ],
            SymbolKind::AntiWick,
        );
        assert_eq!(sc.h_milburn_interaction_antiwick, expected);

        // The Milburn EOM in non-surface form is
        //   iμα(1+2|α|²)∂_α − iμα*(1+2|α|²)∂_α* + iμα²∂_α² − iμα*²∂_α*².
        let coeffs = sc.eom_milburn.expand_to_coefficients().unwrap();
        let da = coeffs.get(&(1, 0)).unwrap();
        let expected_da = PolynomialSymbol::single_mode(
            &[(1, 0, i_times(mu)), (2, 1, i_times(2.0 * mu))],
            SymbolKind::Untyped,
        );
        assert_eq!(da, &expected_da);
        let da2 = coeffs.get(&(2, 0)).unwrap();
        assert_eq!(
            da2,
            &PolynomialSymbol::single_mode(&[(2, 0, i_times(mu))], SymbolKind::Untyped)
        );
        assert!(!coeffs.contains_key(&(0, 0)), "no zeroth-order term");

        // Artifact report: the +iμα offset shows up against the classical
        // drift.
        let artifact = sc.drift_artifact().unwrap();
        let off = artifact.get(&(1, 0)).unwrap();
        assert_eq!(off.coeff(&[1], &[0]), i_times(mu));
    }

    #[test]
    fn milburn_scenario_mu_zero_is_free() {
        let sc = milburn_scenario(0.0, 1.0).unwrap();
        assert!(sc.eom_milburn.is_empty());
        assert!(sc.eom_antiwick.is_empty());
    }

    #[test]
    fn milburn_scenario_rejects_bad_parameters() {
        assert!(matches!(milburn_scenario(-0.1, 1.0), Err(Error::InvalidConfig(_))));
        assert!(matches!(milburn_scenario(0.1, 0.0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn eom_serialization_shape() {
        let eom = derive_q_eom(&harmonic(SymbolKind::AntiWick)).unwrap();
        let v = serde_json::to_value(&eom).unwrap();
        assert_eq!(v["scheme"], "Q");
        assert_eq!(v["variable_form"], "complex");
        assert_eq!(v["max_n"], 1);
        assert!(v["terms"].as_array().unwrap().len() == 2);
        assert!(v["terms"][0]["outer"]["alpha"].is_array());

        let real = eom.to_real_form().unwrap();
        let v = serde_json::to_value(&real).unwrap();
        assert_eq!(v["variable_form"], "real");
        assert!(v["terms"][0]["outer"]["q"].is_array());
    }
}
