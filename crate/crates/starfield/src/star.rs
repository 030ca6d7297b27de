//! Wick and anti-Wick star products and brackets.
//!
//! The products are evaluated term-by-term with integer combinatorics:
//!
//! ```text
//! f *_W  g = Σ_k (1/k!)      ∂_α^k f · ∂_α*^k g
//! f *_aW g = Σ_k ((-1)^k/k!) ∂_α*^k f · ∂_α^k g
//! ```
//!
//! (multi-mode sums run over multi-indices `k`). Both series terminate on
//! polynomials. The complementary bracket forms express the Wick bracket
//! through the anti-Wick symbol of the first operand (and vice versa); their
//! equality with the direct brackets is enforced by tests, as is the
//! derivative-shifting identity they are built from.

use num_complex::Complex64;

use crate::symbols::{
    binomial, falling_factorial, multi_range, DerivativeMultiIndex, PolynomialSymbol, SymbolKind,
};
use crate::{Error, Result};

fn check_same_modes(f: &PolynomialSymbol, g: &PolynomialSymbol) -> Result<()> {
    if f.num_modes() != g.num_modes() {
        return Err(Error::ModeMismatch {
            left: f.num_modes(),
            right: g.num_modes(),
        });
    }
    Ok(())
}

fn check_kind(
    op: &'static str,
    sym: &PolynomialSymbol,
    allowed: SymbolKind,
    expected: &'static str,
) -> Result<()> {
    if sym.kind() == allowed || sym.kind() == SymbolKind::Untyped {
        Ok(())
    } else {
        Err(Error::Complementarity {
            op,
            expected,
            found: sym.kind(),
        })
    }
}

fn result_kind(f: &PolynomialSymbol, g: &PolynomialSymbol, tagged: SymbolKind) -> SymbolKind {
    if f.kind() == tagged || g.kind() == tagged {
        tagged
    } else {
        SymbolKind::Untyped
    }
}

/// Wick star product `f *_W g`.
pub fn wick_star(f: &PolynomialSymbol, g: &PolynomialSymbol) -> Result<PolynomialSymbol> {
    check_same_modes(f, g)?;
    check_kind("wick_star", f, SymbolKind::Wick, "wick or untyped")?;
    check_kind("wick_star", g, SymbolKind::Wick, "wick or untyped")?;
    let modes = f.num_modes();
    let mut out = PolynomialSymbol::zero(modes, result_kind(f, g, SymbolKind::Wick));
    for (ef, cf) in f.terms() {
        for (eg, cg) in g.terms() {
            // k_j bounded by the α-degree of the f-term and the α*-degree of
            // the g-term.
            let bounds: Vec<u32> = (0..modes).map(|j| ef.a[j].min(eg.ad[j])).collect();
            for k in multi_range(&bounds) {
                let mut factor = 1.0;
                let mut a = vec![0u32; modes];
                let mut ad = vec![0u32; modes];
                for j in 0..modes {
                    factor *= binomial(ef.a[j], k[j]) * falling_factorial(eg.ad[j], k[j]);
                    a[j] = ef.a[j] - k[j] + eg.a[j];
                    ad[j] = ef.ad[j] + eg.ad[j] - k[j];
                }
                out.add_term(&a, &ad, *cf * *cg * factor);
            }
        }
    }
    Ok(out)
}

/// Anti-Wick star product `f *_aW g`.
pub fn antiwick_star(f: &PolynomialSymbol, g: &PolynomialSymbol) -> Result<PolynomialSymbol> {
    check_same_modes(f, g)?;
    check_kind("antiwick_star", f, SymbolKind::AntiWick, "antiwick or untyped")?;
    check_kind("antiwick_star", g, SymbolKind::AntiWick, "antiwick or untyped")?;
    let modes = f.num_modes();
    let mut out = PolynomialSymbol::zero(modes, result_kind(f, g, SymbolKind::AntiWick));
    for (ef, cf) in f.terms() {
        for (eg, cg) in g.terms() {
            let bounds: Vec<u32> = (0..modes).map(|j| ef.ad[j].min(eg.a[j])).collect();
            for k in multi_range(&bounds) {
                let mut factor = 1.0;
                let mut a = vec![0u32; modes];
                let mut ad = vec![0u32; modes];
                for j in 0..modes {
                    let sign = if k[j] % 2 == 0 { 1.0 } else { -1.0 };
                    factor *= sign * binomial(ef.ad[j], k[j]) * falling_factorial(eg.a[j], k[j]);
                    a[j] = ef.a[j] + eg.a[j] - k[j];
                    ad[j] = ef.ad[j] - k[j] + eg.ad[j];
                }
                out.add_term(&a, &ad, *cf * *cg * factor);
            }
        }
    }
    Ok(out)
}

/// Wick star bracket `{{f, g}}_W = f *_W g − g *_W f`.
pub fn wick_bracket(f: &PolynomialSymbol, g: &PolynomialSymbol) -> Result<PolynomialSymbol> {
    Ok(&wick_star(f, g)? - &wick_star(g, f)?)
}

/// Anti-Wick star bracket `{{f, g}}_aW = f *_aW g − g *_aW f`.
pub fn antiwick_bracket(f: &PolynomialSymbol, g: &PolynomialSymbol) -> Result<PolynomialSymbol> {
    Ok(&antiwick_star(f, g)? - &antiwick_star(g, f)?)
}

/// Left-hand side of the derivative-shifting identity on mode 0:
/// `(∂_α^k f) · (∂_α*^n g)`, or the role-swapped version.
pub fn shift_derivatives_lhs(
    f: &PolynomialSymbol,
    g: &PolynomialSymbol,
    k: u32,
    n: u32,
    conjugate_roles: bool,
) -> PolynomialSymbol {
    let (df, dg) = if conjugate_roles {
        (
            f.differentiate(&idx0(f, 0, k)),
            g.differentiate(&idx0(g, n, 0)),
        )
    } else {
        (
            f.differentiate(&idx0(f, k, 0)),
            g.differentiate(&idx0(g, 0, n)),
        )
    };
    &df * &dg
}

/// Right-hand side of the derivative-shifting identity on mode 0:
///
/// ```text
/// Σ_{j=0}^{n} C(n,j) (-1)^(n-j) ∂_α*^j ( ∂_α*^(n-j) (∂_α^k f) · g )
/// ```
///
/// (with α and α* swapped when `conjugate_roles`). Equal to the left-hand
/// side for all polynomials; exposed for property testing.
pub fn shift_derivatives_rhs(
    f: &PolynomialSymbol,
    g: &PolynomialSymbol,
    k: u32,
    n: u32,
    conjugate_roles: bool,
) -> PolynomialSymbol {
    let base = if conjugate_roles {
        f.differentiate(&idx0(f, 0, k))
    } else {
        f.differentiate(&idx0(f, k, 0))
    };
    let mut out = PolynomialSymbol::zero(f.num_modes(), SymbolKind::Untyped);
    for j in 0..=n {
        let sign = if (n - j) % 2 == 0 { 1.0 } else { -1.0 };
        let w = sign * binomial(n, j);
        let inner = if conjugate_roles {
            base.differentiate(&idx0(f, n - j, 0))
        } else {
            base.differentiate(&idx0(f, 0, n - j))
        };
        let prod = &inner * g;
        let shifted = if conjugate_roles {
            prod.differentiate(&idx0(f, j, 0))
        } else {
            prod.differentiate(&idx0(f, 0, j))
        };
        out = &out + &shifted.scale(Complex64::new(w, 0.0));
    }
    out
}

fn idx0(f: &PolynomialSymbol, k: u32, l: u32) -> DerivativeMultiIndex {
    let mut alpha = vec![0; f.num_modes()];
    let mut alphastar = vec![0; f.num_modes()];
    alpha[0] = k;
    alphastar[0] = l;
    DerivativeMultiIndex::new(alpha, alphastar)
}

/// Shared surface-derivative series behind both complementary bracket forms:
///
/// `Σ_m w(|m|) / m! [ ∂_α*^m (∂_α^m h · g) − ∂_α^m (∂_α*^m h · g) ]`
fn complementary_series(
    h: &PolynomialSymbol,
    g: &PolynomialSymbol,
    max_order: Option<u32>,
    weight: impl Fn(u32) -> f64,
    kind: SymbolKind,
) -> PolynomialSymbol {
    let modes = h.num_modes();
    let bounds: Vec<u32> = (0..modes)
        .map(|j| h.degree_alpha(j).max(h.degree_alphastar(j)))
        .collect();
    let mut out = PolynomialSymbol::zero(modes, kind);
    for m in multi_range(&bounds) {
        let order: u32 = m.iter().sum();
        if order == 0 {
            continue;
        }
        if let Some(cap) = max_order {
            if order > cap {
                continue;
            }
        }
        let inv_m_fact: f64 = m.iter().map(|&mj| crate::symbols::factorial(mj)).product::<f64>();
        let w = weight(order) / inv_m_fact;
        let d = DerivativeMultiIndex::new(m.clone(), vec![0; modes]);
        let dbar = DerivativeMultiIndex::new(vec![0; modes], m.clone());

        let inner1 = h.differentiate(&d);
        if !inner1.is_zero() {
            let t1 = (&inner1 * g).differentiate(&dbar);
            out = &out + &t1.scale(Complex64::new(w, 0.0));
        }
        let inner2 = h.differentiate(&dbar);
        if !inner2.is_zero() {
            let t2 = (&inner2 * g).differentiate(&d);
            out = &out - &t2.scale(Complex64::new(w, 0.0));
        }
    }
    out
}

/// Wick star bracket `{{f, g}}_W` computed from the anti-Wick symbol
/// `f_bar = berezin_inverse(f)` of the first operand:
///
/// ```text
/// Σ_{|m|>=1} (1/m!) [ ∂_α*^m (∂_α^m f_bar · g) − ∂_α^m (∂_α*^m f_bar · g) ]
/// ```
///
/// `max_order` truncates the series for diagnostics; `None` runs it to
/// termination. Must equal `wick_bracket(berezin_forward(f_bar), g)`.
pub fn wick_bracket_complementary(
    f_bar: &PolynomialSymbol,
    g: &PolynomialSymbol,
    max_order: Option<u32>,
) -> Result<PolynomialSymbol> {
    check_same_modes(f_bar, g)?;
    check_kind(
        "wick_bracket_complementary",
        f_bar,
        SymbolKind::AntiWick,
        "antiwick or untyped",
    )?;
    check_kind("wick_bracket_complementary", g, SymbolKind::Wick, "wick or untyped")?;
    Ok(complementary_series(
        f_bar,
        g,
        max_order,
        |_| 1.0,
        result_kind(f_bar, g, SymbolKind::Wick),
    ))
}

/// Anti-Wick star bracket `{{f, g}}_aW` computed from the Wick symbol
/// `f_tilde = berezin_forward(f)` of the first operand:
///
/// ```text
/// −Σ_{|m|>=1} ((-1)^|m|/m!) [ ∂_α*^m (∂_α^m f_tilde · g) − ∂_α^m (∂_α*^m f_tilde · g) ]
/// ```
///
/// Must equal `antiwick_bracket(berezin_inverse(f_tilde), g)`.
pub fn antiwick_bracket_complementary(
    f_tilde: &PolynomialSymbol,
    g: &PolynomialSymbol,
) -> Result<PolynomialSymbol> {
    check_same_modes(f_tilde, g)?;
    check_kind(
        "antiwick_bracket_complementary",
        f_tilde,
        SymbolKind::Wick,
        "wick or untyped",
    )?;
    check_kind(
        "antiwick_bracket_complementary",
        g,
        SymbolKind::AntiWick,
        "antiwick or untyped",
    )?;
    let weight = |order: u32| if order % 2 == 0 { -1.0 } else { 1.0 };
    Ok(complementary_series(
        f_tilde,
        g,
        None,
        weight,
        result_kind(f_tilde, g, SymbolKind::AntiWick),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::max_coeff_distance;
    use rand::{Rng, SeedableRng};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn number_symbol(kind: SymbolKind) -> PolynomialSymbol {
        PolynomialSymbol::single_mode(&[(1, 1, c(1.0))], kind)
    }

    fn random_poly(
        rng: &mut impl Rng,
        max_deg: u32,
        terms: usize,
        kind: SymbolKind,
    ) -> PolynomialSymbol {
        let mut f = PolynomialSymbol::zero(1, kind);
        for _ in 0..terms {
            let m = rng.gen_range(0..=max_deg);
            let n = rng.gen_range(0..=max_deg.saturating_sub(m));
            f.add_term(
                &[m],
                &[n],
                Complex64::new(rng.gen_range(-3i32..=3) as f64, rng.gen_range(-3i32..=3) as f64),
            );
        }
        f
    }

    #[test]
    fn wick_star_of_number_with_itself() {
        // (a* a) *_W (a* a) = a*^2 a^2 + a* a
        let n = number_symbol(SymbolKind::Wick);
        let prod = wick_star(&n, &n).unwrap();
        let expected = PolynomialSymbol::single_mode(
            &[(2, 2, c(1.0)), (1, 1, c(1.0))],
            SymbolKind::Wick,
        );
        assert_eq!(prod, expected);
    }

    #[test]
    fn wick_star_identity_element() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let one = PolynomialSymbol::constant(1, c(1.0), SymbolKind::Wick);
        for _ in 0..20 {
            let f = random_poly(&mut rng, 5, 5, SymbolKind::Wick);
            assert_eq!(wick_star(&f, &one).unwrap(), f);
            assert_eq!(wick_star(&one, &f).unwrap(), f);
        }
    }

    #[test]
    fn wick_star_alpha_with_alphastar() {
        // a *_W a* = a a* + 1
        let a = PolynomialSymbol::single_mode(&[(1, 0, c(1.0))], SymbolKind::Wick);
        let ad = PolynomialSymbol::single_mode(&[(0, 1, c(1.0))], SymbolKind::Wick);
        let prod = wick_star(&a, &ad).unwrap();
        let expected = PolynomialSymbol::single_mode(
            &[(1, 1, c(1.0)), (0, 0, c(1.0))],
            SymbolKind::Wick,
        );
        assert_eq!(prod, expected);
    }

    #[test]
    fn antiwick_star_examples() {
        // a* *_aW a = a* a - 1
        let a = PolynomialSymbol::single_mode(&[(1, 0, c(1.0))], SymbolKind::AntiWick);
        let ad = PolynomialSymbol::single_mode(&[(0, 1, c(1.0))], SymbolKind::AntiWick);
        let prod = antiwick_star(&ad, &a).unwrap();
        let expected = PolynomialSymbol::single_mode(
            &[(1, 1, c(1.0)), (0, 0, c(-1.0))],
            SymbolKind::AntiWick,
        );
        assert_eq!(prod, expected);

        let one = PolynomialSymbol::constant(1, c(1.0), SymbolKind::AntiWick);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(22);
        let f = random_poly(&mut rng, 6, 6, SymbolKind::AntiWick);
        assert_eq!(antiwick_star(&f, &one).unwrap(), f);
        assert_eq!(antiwick_star(&one, &f).unwrap(), f);
    }

    #[test]
    fn star_rejects_mode_and_kind_mismatches() {
        let f = PolynomialSymbol::zero(1, SymbolKind::Wick);
        let g = PolynomialSymbol::zero(2, SymbolKind::Wick);
        assert!(matches!(wick_star(&f, &g), Err(Error::ModeMismatch { .. })));

        let aw = PolynomialSymbol::zero(1, SymbolKind::AntiWick);
        assert!(matches!(wick_star(&f, &aw), Err(Error::Complementarity { .. })));
        assert!(matches!(antiwick_star(&aw, &f), Err(Error::Complementarity { .. })));
    }

    #[test]
    fn bracket_antisymmetry_and_self_bracket() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let f = random_poly(&mut rng, 5, 5, SymbolKind::Wick);
            let g = random_poly(&mut rng, 5, 5, SymbolKind::Wick);
            assert!(wick_bracket(&f, &f).unwrap().is_zero());
            let fg = wick_bracket(&f, &g).unwrap();
            let gf = wick_bracket(&g, &f).unwrap();
            assert!(max_coeff_distance(&fg, &(-&gf)) < 1e-12);
        }
    }

    #[test]
    fn bracket_of_alpha_with_alphastar_is_one() {
        let a = PolynomialSymbol::single_mode(&[(1, 0, c(1.0))], SymbolKind::Wick);
        let ad = PolynomialSymbol::single_mode(&[(0, 1, c(1.0))], SymbolKind::Wick);
        let br = wick_bracket(&a, &ad).unwrap();
        assert_eq!(br, PolynomialSymbol::constant(1, c(1.0), SymbolKind::Wick));

        let n = number_symbol(SymbolKind::Wick);
        assert!(wick_bracket(&n, &n).unwrap().is_zero());
    }

    #[test]
    fn bracket_bilinearity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(24);
        for _ in 0..20 {
            let f = random_poly(&mut rng, 4, 4, SymbolKind::Wick);
            let g = random_poly(&mut rng, 4, 4, SymbolKind::Wick);
            let h = random_poly(&mut rng, 4, 4, SymbolKind::Wick);
            let lam = Complex64::new(2.0, -1.0);
            let lhs = wick_bracket(&(&f.scale(lam) + &g), &h).unwrap();
            let rhs = &wick_bracket(&f, &h).unwrap().scale(lam) + &wick_bracket(&g, &h).unwrap();
            assert!(max_coeff_distance(&lhs, &rhs) < 1e-11);
        }
    }

    #[test]
    fn shift_identity_base_case() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(25);
        let f = random_poly(&mut rng, 5, 5, SymbolKind::Untyped);
        let g = random_poly(&mut rng, 5, 5, SymbolKind::Untyped);
        for k in 0..3 {
            let lhs = shift_derivatives_lhs(&f, &g, k, 0, false);
            let rhs = shift_derivatives_rhs(&f, &g, k, 0, false);
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn shift_identity_simple_case() {
        // f = a^2, g = a*^2, k = n = 1: both sides equal 4 a a*.
        let f = PolynomialSymbol::single_mode(&[(2, 0, c(1.0))], SymbolKind::Untyped);
        let g = PolynomialSymbol::single_mode(&[(0, 2, c(1.0))], SymbolKind::Untyped);
        let lhs = shift_derivatives_lhs(&f, &g, 1, 1, false);
        let rhs = shift_derivatives_rhs(&f, &g, 1, 1, false);
        let expected = PolynomialSymbol::single_mode(&[(1, 1, c(4.0))], SymbolKind::Untyped);
        assert_eq!(lhs, expected);
        assert_eq!(rhs, expected);
    }

    #[test]
    fn shift_identity_random_cases_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(26);
        for case in 0..100 {
            let f = random_poly(&mut rng, 5, 4, SymbolKind::Untyped);
            let g = random_poly(&mut rng, 5, 4, SymbolKind::Untyped);
            let k = rng.gen_range(0..=3);
            let n = rng.gen_range(0..=3);
            let conj = rng.gen_bool(0.5);
            let lhs = shift_derivatives_lhs(&f, &g, k, n, conj);
            let rhs = shift_derivatives_rhs(&f, &g, k, n, conj);
            assert!(
                max_coeff_distance(&lhs, &rhs) <= 1e-12,
                "case {case}: k={k} n={n} conj={conj}"
            );
        }
    }

    #[test]
    fn complementary_wick_bracket_equals_direct() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(27);
        for _ in 0..40 {
            let f = random_poly(&mut rng, 6, 5, SymbolKind::Wick);
            let g = random_poly(&mut rng, 6, 5, SymbolKind::Wick);
            let direct = wick_bracket(&f, &g).unwrap();
            let f_bar = f.berezin_inverse().unwrap();
            let comp = wick_bracket_complementary(&f_bar, &g, None).unwrap();
            assert!(
                max_coeff_distance(&direct, &comp) < 1e-12,
                "f={f} g={g}"
            );
        }
    }

    #[test]
    fn complementary_bracket_of_number_symbol() {
        // berezin_inverse(|a|^2) = |a|^2 - 1; bracket must agree with the
        // direct route for arbitrary g.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(28);
        let n = number_symbol(SymbolKind::Wick);
        let n_bar = n.berezin_inverse().unwrap();
        for _ in 0..10 {
            let g = random_poly(&mut rng, 6, 6, SymbolKind::Wick);
            let direct = wick_bracket(&n, &g).unwrap();
            let comp = wick_bracket_complementary(&n_bar, &g, None).unwrap();
            assert!(max_coeff_distance(&direct, &comp) < 1e-12);
        }
    }

    #[test]
    fn complementary_bracket_constant_first_operand_vanishes() {
        let cst = PolynomialSymbol::constant(1, Complex64::new(3.0, 1.0), SymbolKind::AntiWick);
        let g = PolynomialSymbol::single_mode(&[(2, 1, c(2.0))], SymbolKind::Wick);
        assert!(wick_bracket_complementary(&cst, &g, None).unwrap().is_zero());
    }

    #[test]
    fn complementary_antiwick_bracket_equals_direct() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        for _ in 0..40 {
            let f = random_poly(&mut rng, 6, 5, SymbolKind::AntiWick);
            let g = random_poly(&mut rng, 6, 5, SymbolKind::AntiWick);
            let direct = antiwick_bracket(&f, &g).unwrap();
            let f_tilde = f.berezin_forward().unwrap();
            let comp = antiwick_bracket_complementary(&f_tilde, &g).unwrap();
            assert!(max_coeff_distance(&direct, &comp) < 1e-12);
        }
    }

    #[test]
    fn complementary_bracket_kind_checks() {
        let w = PolynomialSymbol::single_mode(&[(1, 1, c(1.0))], SymbolKind::Wick);
        let aw = w.clone().with_kind(SymbolKind::AntiWick);
        assert!(matches!(
            wick_bracket_complementary(&w, &w, None),
            Err(Error::Complementarity { .. })
        ));
        assert!(matches!(
            antiwick_bracket_complementary(&aw, &aw),
            Err(Error::Complementarity { .. })
        ));
    }

    #[test]
    fn bracket_self_after_matching_transform_vanishes() {
        // f_tilde = berezin_forward(|a|^2), g = |a|^2: both routes give zero.
        let n_aw = number_symbol(SymbolKind::AntiWick);
        let f_tilde = n_aw.berezin_forward().unwrap();
        let comp = antiwick_bracket_complementary(&f_tilde, &n_aw).unwrap();
        assert!(comp.prune(1e-14).is_zero());
        let direct = antiwick_bracket(&n_aw, &n_aw).unwrap();
        assert!(direct.is_zero());
    }

    #[test]
    fn truncated_series_differs_then_converges() {
        let f = PolynomialSymbol::single_mode(&[(2, 2, c(1.0))], SymbolKind::Wick);
        let g = PolynomialSymbol::single_mode(&[(3, 1, c(1.0))], SymbolKind::Wick);
        let f_bar = f.berezin_inverse().unwrap();
        let full = wick_bracket_complementary(&f_bar, &g, None).unwrap();
        let order1 = wick_bracket_complementary(&f_bar, &g, Some(1)).unwrap();
        let order2 = wick_bracket_complementary(&f_bar, &g, Some(2)).unwrap();
        assert!(max_coeff_distance(&full, &order1) > 1e-6);
        assert_eq!(full, order2, "series terminates at the Hamiltonian degree");
    }

    #[test]
    fn explicit_cancellation_form_matches_bracket() {
        // The k >= 1, m >= 1 double sum left after the k = 0 / m = 0
        // cancellations reproduces the full bracket.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(30);
        for _ in 0..20 {
            let f = random_poly(&mut rng, 5, 4, SymbolKind::Wick);
            let g = random_poly(&mut rng, 5, 4, SymbolKind::Wick);
            let direct = wick_bracket(&f, &g).unwrap();

            let kmax = f.total_degree().max(g.total_degree());
            let mut acc = PolynomialSymbol::zero(1, SymbolKind::Wick);
            for k in 1..=kmax {
                let inv_kfact = 1.0 / crate::symbols::factorial(k);
                for m in 1..=k {
                    let sign = if (k - m) % 2 == 0 { 1.0 } else { -1.0 };
                    let w = sign * binomial(k, m) * inv_kfact;
                    // ∂_α*^m( ∂_α*^{k-m} ∂_α^k f · g )
                    let t1 = (&f
                        .differentiate(&DerivativeMultiIndex::single_mode(k, k - m))
                        * &g)
                        .differentiate(&DerivativeMultiIndex::single_mode(0, m));
                    // ∂_α^m( ∂_α^{k-m} ∂_α*^k f · g )
                    let t2 = (&f
                        .differentiate(&DerivativeMultiIndex::single_mode(k - m, k))
                        * &g)
                        .differentiate(&DerivativeMultiIndex::single_mode(m, 0));
                    acc = &acc + &(&t1 - &t2).scale(c(w));
                }
            }
            assert!(max_coeff_distance(&direct, &acc) < 1e-11);
        }
    }

    #[test]
    fn bracket_of_real_symbols_times_minus_i_is_real() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..30 {
            let mut f = PolynomialSymbol::zero(1, SymbolKind::Wick);
            let mut g = PolynomialSymbol::zero(1, SymbolKind::Wick);
            for _ in 0..4 {
                let (m, n) = (rng.gen_range(0..4), rng.gen_range(0..4));
                let v = Complex64::new(rng.gen_range(-3i32..=3) as f64, rng.gen_range(-3i32..=3) as f64);
                f.add_term(&[m], &[n], v);
                f.add_term(&[n], &[m], v.conj());
                let (m, n) = (rng.gen_range(0..4), rng.gen_range(0..4));
                let w = Complex64::new(rng.gen_range(-3i32..=3) as f64, rng.gen_range(-3i32..=3) as f64);
                g.add_term(&[m], &[n], w);
                g.add_term(&[n], &[m], w.conj());
            }
            let br = wick_bracket(&f, &g).unwrap();
            let scaled = br.scale(Complex64::new(0.0, -1.0));
            assert!(scaled.is_real_symbol(1e-12));
        }
    }

    #[test]
    fn multi_mode_star_product_is_separable_for_disjoint_modes() {
        // f acts on mode 0 only, g on mode 1 only: star product = plain
        // product (no contractions connect different modes).
        let f = PolynomialSymbol::from_terms(
            2,
            [(&[2u32, 0][..], &[1u32, 0][..], c(2.0))],
            SymbolKind::Wick,
        );
        let g = PolynomialSymbol::from_terms(
            2,
            [(&[0u32, 1][..], &[0u32, 2][..], c(3.0))],
            SymbolKind::Wick,
        );
        assert_eq!(wick_star(&f, &g).unwrap(), &f * &g);
        assert_eq!(wick_star(&g, &f).unwrap(), &f * &g);
    }
}
