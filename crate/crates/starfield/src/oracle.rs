//! Closed-form reference solutions and brute-force engines used by tests and
//! the CLI's comparison commands.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::eom::derive_q_eom;
use crate::pde::{apply_eom, GridSpec, PhaseSpaceGrid, StencilOrder};
use crate::symbols::{PolynomialSymbol, SymbolKind, SQRT_HALF};
use crate::{Error, Result};

/// Exact rotating-frame Husimi function of the anti-Wick-quantized anharmonic
/// oscillator, `Q(α, α*, τ) = exp(−|α|² − |α₀|²) |S|²` with
///
/// ```text
/// S(α, α*, τ) = Σ_n (α₀* α)^n / n! · exp(i μ τ n(n+3))
/// ```
///
/// The phase `n(n+3)` is the spectrum of the anti-normal-ordered interaction
/// `μ â²â†²` (up to an overall constant that cancels in `|S|²`); `n(n+3)` is
/// even for every `n`, so the state revives exactly at `τ = π/μ`.
///
/// `n_terms` must satisfy the tail bound
/// `max|α₀* α|^N / N! < 1e-14` over the grid; see [`required_terms`].
pub fn anharmonic_exact_q(
    spec: &GridSpec,
    tau: f64,
    alpha0: Complex64,
    mu: f64,
    n_terms: usize,
) -> Result<PhaseSpaceGrid> {
    spec.validate()?;
    let residual = tail_bound(spec, alpha0, n_terms);
    if residual >= 1e-14 {
        return Err(Error::TailBound {
            terms: n_terms,
            residual,
            required: 1e-14,
        });
    }
    let phases: Vec<Complex64> = (0..n_terms)
        .map(|n| {
            let k = (n * (n + 3)) as f64;
            Complex64::from_polar(1.0, mu * tau * k)
        })
        .collect();
    let a0_sq = alpha0.norm_sqr();
    PhaseSpaceGrid::from_fn(spec.clone(), crate::pde::DistributionKind::Q, |q, p| {
        let alpha = Complex64::new(q, p) * SQRT_HALF;
        let u = alpha0.conj() * alpha;
        let mut s = Complex64::default();
        let mut term = Complex64::new(1.0, 0.0);
        for (n, phase) in phases.iter().enumerate() {
            s += term * phase;
            term = term * u / (n as f64 + 1.0);
        }
        (-alpha.norm_sqr() - a0_sq).exp() * s.norm_sqr()
    })
}

/// Largest remainder bound `u_max^N / N!` of the S-series over the grid.
fn tail_bound(spec: &GridSpec, alpha0: Complex64, n_terms: usize) -> f64 {
    let corners = [
        (spec.q_min, spec.p_min),
        (spec.q_min, spec.p_max),
        (spec.q_max, spec.p_min),
        (spec.q_max, spec.p_max),
    ];
    let alpha_max = corners
        .iter()
        .map(|&(q, p)| (Complex64::new(q, p) * SQRT_HALF).norm())
        .fold(0.0f64, f64::max);
    let u_max = alpha0.norm() * alpha_max;
    if u_max == 0.0 {
        return 0.0;
    }
    let n = n_terms as f64;
    let ln_fact: f64 = (1..=n_terms).map(|k| (k as f64).ln()).sum();
    (n * u_max.ln() - ln_fact).exp()
}

/// Smallest term count meeting the S-series tail bound on this grid.
pub fn required_terms(spec: &GridSpec, alpha0: Complex64) -> usize {
    let mut n = 1;
    while tail_bound(spec, alpha0, n) >= 1e-14 {
        n += 1;
        if n > 10_000 {
            break;
        }
    }
    n
}

/// Lab-frame harmonic-oscillator Husimi function: the coherent state rigidly
/// rotated, `exp(−|α − α₀ e^{−iτ}|²)`.
pub fn harmonic_rotation_q(spec: &GridSpec, tau: f64, alpha0: Complex64) -> Result<PhaseSpaceGrid> {
    let center = alpha0 * Complex64::from_polar(1.0, -tau);
    PhaseSpaceGrid::from_fn(spec.clone(), crate::pde::DistributionKind::Q, |q, p| {
        let alpha = Complex64::new(q, p) * SQRT_HALF;
        (-(alpha - center).norm_sqr()).exp()
    })
}

/// Classical rotating-frame Liouville rate
/// `2iμ[∂_α(α|α|² F) − ∂_α*(α*|α|² F)]`, evaluated through the real-form
/// conversion with 2nd-order stencils. Only the rotating frame is supported.
pub fn classical_liouville_rhs(
    grid: &PhaseSpaceGrid,
    rotating_frame: bool,
    mu: f64,
) -> Result<Array2<f64>> {
    if !rotating_frame {
        return Err(Error::InvalidConfig(
            "the classical reference equation is only available in the rotating frame".into(),
        ));
    }
    let eom = classical_liouville_eom(mu)?;
    apply_eom(grid, &eom, StencilOrder::Two)
}

/// The classical drift as an order-1 evolution series (rotating frame,
/// interaction Hamiltonian `μ|α|⁴` read as an anti-Wick symbol).
pub fn classical_liouville_eom(mu: f64) -> Result<crate::eom::EomSeries> {
    let h = PolynomialSymbol::single_mode(
        &[(2, 2, Complex64::new(mu, 0.0))],
        SymbolKind::Classical,
    );
    derive_q_eom(&h)?
        .restricted_to_orders(|o| o == 1)
        .to_real_form()
}

// ---------------------------------------------------------------------------
// Truncated Fock-basis engine
// ---------------------------------------------------------------------------

/// Matrix engine on a truncated Fock space, for independent verification of
/// star products against normal/anti-normal ordered operator products.
pub struct FockOracle {
    dim: usize,
    lowering: Array2<Complex64>,
}

impl FockOracle {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidConfig("Fock dimension must be at least 2".into()));
        }
        let mut lowering = Array2::zeros((dim, dim));
        for n in 1..dim {
            lowering[[n - 1, n]] = Complex64::new((n as f64).sqrt(), 0.0);
        }
        Ok(Self { dim, lowering })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn annihilation(&self) -> Array2<Complex64> {
        self.lowering.clone()
    }

    pub fn creation(&self) -> Array2<Complex64> {
        self.lowering.t().mapv(|c| c.conj())
    }

    fn identity(&self) -> Array2<Complex64> {
        Array2::from_diag(&Array1::from_elem(self.dim, Complex64::new(1.0, 0.0)))
    }

    fn power(&self, base: &Array2<Complex64>, n: u32) -> Array2<Complex64> {
        let mut out = self.identity();
        for _ in 0..n {
            out = out.dot(base);
        }
        out
    }

    /// `â†^n â^m` — the operator whose Wick symbol is `α^m α*^n`.
    pub fn normal_ordered_monomial(&self, m: u32, n: u32) -> Array2<Complex64> {
        self.power(&self.creation(), n).dot(&self.power(&self.lowering, m))
    }

    /// `â^m â†^n` — the operator whose anti-Wick symbol is `α^m α*^n`.
    pub fn antinormal_ordered_monomial(&self, m: u32, n: u32) -> Array2<Complex64> {
        self.power(&self.lowering, m).dot(&self.power(&self.creation(), n))
    }

    /// Normal-ordered (Wick) quantization of a single-mode symbol.
    pub fn quantize_wick(&self, f: &PolynomialSymbol) -> Result<Array2<Complex64>> {
        self.quantize_with(f, |m, n| self.normal_ordered_monomial(m, n))
    }

    /// Anti-normal-ordered (anti-Wick) quantization of a single-mode symbol.
    pub fn quantize_antiwick(&self, f: &PolynomialSymbol) -> Result<Array2<Complex64>> {
        self.quantize_with(f, |m, n| self.antinormal_ordered_monomial(m, n))
    }

    fn quantize_with(
        &self,
        f: &PolynomialSymbol,
        monomial: impl Fn(u32, u32) -> Array2<Complex64>,
    ) -> Result<Array2<Complex64>> {
        if f.num_modes() != 1 {
            return Err(Error::InvalidConfig("Fock engine is single-mode only".into()));
        }
        let mut out = Array2::zeros((self.dim, self.dim));
        for (e, c) in f.terms() {
            out = out + monomial(e.a[0], e.ad[0]).mapv(|v| v * *c);
        }
        Ok(out)
    }

    /// Truncated coherent-state vector. Errors when `|α|² > dim/4`, where
    /// truncation starts to bite.
    pub fn coherent_vector(&self, alpha: Complex64) -> Result<Array1<Complex64>> {
        let amp_sq = alpha.norm_sqr();
        let limit = self.dim as f64 / 4.0;
        if amp_sq > limit {
            return Err(Error::TruncationSensitivity { amp_sq, limit });
        }
        let mut v = Array1::zeros(self.dim);
        let mut c = Complex64::new((-amp_sq / 2.0).exp(), 0.0);
        for n in 0..self.dim {
            v[n] = c;
            c = c * alpha / ((n as f64 + 1.0).sqrt());
        }
        Ok(v)
    }

    /// `⟨α| op |α⟩` in the truncated space — the Wick symbol of `op` at `α`
    /// up to truncation error.
    pub fn coherent_sandwich(&self, op: &Array2<Complex64>, alpha: Complex64) -> Result<Complex64> {
        let v = self.coherent_vector(alpha)?;
        let w = op.dot(&v);
        Ok(v.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum())
    }
}
