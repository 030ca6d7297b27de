//! Run configuration: one JSON document describing the Hamiltonian, scheme,
//! grid, integrator and initial state. Command-line flags override file
//! values.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::Deserialize;

use starfield::eom::{derive_p_eom, derive_q_eom, EomSeries};
use starfield::pde::{Boundary, GridSpec, IntegratorConfig, StencilOrder};
use starfield::symbols::{PolynomialSymbol, SymbolKind};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum SchemeTag {
    Q,
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantization {
    /// The polynomial is a classical Hamiltonian to be read as an anti-Wick
    /// symbol (natural for Q-function evolution).
    ClassicalAntiwick,
    /// The polynomial is a classical Hamiltonian to be read as a Wick symbol
    /// (natural for P-function evolution).
    ClassicalWick,
    /// The monomials are normal-ordered operator words `a†^n a^m`, so the
    /// polynomial is the operator's Wick symbol.
    NormalOrderedOperator,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinHamiltonian {
    /// `ω₀ |α|²`
    Harmonic,
    /// `ω₀ (|α|² + μ |α|⁴)`
    Anharmonic,
    /// `ω₀ μ |α|⁴` (interaction picture)
    AnharmonicRotating,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexSpec {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl ComplexSpec {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialSpec {
    pub a: Vec<u32>,
    pub ad: Vec<u32>,
    pub coeff: ComplexSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    #[serde(default)]
    pub monomials: Option<Vec<MonomialSpec>>,
    #[serde(default)]
    pub builtin: Option<BuiltinHamiltonian>,
    pub quantization: Quantization,
    #[serde(default = "default_omega0")]
    pub omega0: f64,
    #[serde(default)]
    pub mu: f64,
    /// When set, the monomial table must satisfy the real-symbol coefficient
    /// symmetry `coeff(m,n) = conj(coeff(n,m))`.
    #[serde(default)]
    pub self_adjoint: bool,
}

fn default_omega0() -> f64 {
    1.0
}

impl HamiltonianSpec {
    /// Build the phase-space polynomial, tagged by the quantization scheme
    /// (`classical_antiwick` -> anti-Wick symbol, the others -> Wick symbol).
    pub fn symbol(&self) -> Result<PolynomialSymbol, CliError> {
        let kind = match self.quantization {
            Quantization::ClassicalAntiwick => SymbolKind::AntiWick,
            Quantization::ClassicalWick | Quantization::NormalOrderedOperator => SymbolKind::Wick,
        };
        let poly = match (&self.monomials, &self.builtin) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "give either 'monomials' or 'builtin', not both".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Config(
                    "hamiltonian needs 'monomials' or 'builtin'".into(),
                ))
            }
            (Some(monomials), None) => {
                if monomials.is_empty() {
                    return Err(CliError::Config("empty monomial list".into()));
                }
                let modes = monomials[0].a.len();
                if modes == 0 {
                    return Err(CliError::Config("monomials must have at least one mode".into()));
                }
                let mut poly = PolynomialSymbol::zero(modes, kind);
                for m in monomials {
                    if m.a.len() != modes || m.ad.len() != modes {
                        return Err(CliError::Config(
                            "all monomials must have the same number of modes".into(),
                        ));
                    }
                    poly.add_term(&m.a, &m.ad, m.coeff.value());
                }
                poly
            }
            (None, Some(builtin)) => {
                let w0 = self.omega0;
                let mu = self.mu;
                if !(w0 > 0.0) {
                    return Err(CliError::Config("omega0 must be positive".into()));
                }
                if mu < 0.0 {
                    return Err(CliError::Config("mu must be non-negative".into()));
                }
                let c = |x: f64| Complex64::new(x, 0.0);
                match builtin {
                    BuiltinHamiltonian::Harmonic => {
                        PolynomialSymbol::single_mode(&[(1, 1, c(w0))], kind)
                    }
                    BuiltinHamiltonian::Anharmonic => PolynomialSymbol::single_mode(
                        &[(1, 1, c(w0)), (2, 2, c(w0 * mu))],
                        kind,
                    ),
                    BuiltinHamiltonian::AnharmonicRotating => {
                        PolynomialSymbol::single_mode(&[(2, 2, c(w0 * mu))], kind)
                    }
                }
            }
        };
        if self.self_adjoint && !poly.is_real_symbol(1e-12) {
            return Err(CliError::Config(
                "hamiltonian declared self_adjoint but coefficients lack the \
                 conjugate symmetry coeff(m,n) = conj(coeff(n,m))"
                    .into(),
            ));
        }
        Ok(poly)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nq: usize,
    pub np: usize,
}

impl GridSection {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            q_min: self.q_min,
            q_max: self.q_max,
            p_min: self.p_min,
            p_max: self.p_max,
            nq: self.nq,
            np: self.np,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_stencil")]
    pub stencil_order: u32,
    #[serde(default = "default_boundary")]
    pub boundary: String,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    #[serde(default = "default_max_growth")]
    pub max_growth: f64,
}

fn default_stencil() -> u32 {
    2
}
fn default_boundary() -> String {
    "zero_pad".into()
}
fn default_cfl() -> f64 {
    0.25
}
fn default_snapshots() -> usize {
    5
}
fn default_max_growth() -> f64 {
    1e6
}

impl IntegratorSection {
    pub fn config(&self) -> Result<IntegratorConfig, CliError> {
        let stencil_order = match self.stencil_order {
            2 => StencilOrder::Two,
            4 => StencilOrder::Four,
            other => {
                return Err(CliError::Config(format!(
                    "stencil_order must be 2 or 4 (got {other})"
                )))
            }
        };
        if self.boundary != "zero_pad" {
            return Err(CliError::Config(format!(
                "unsupported boundary '{}' (only zero_pad)",
                self.boundary
            )));
        }
        let mut cfg = IntegratorConfig::new(self.dt, self.t_final);
        cfg.stencil_order = stencil_order;
        cfg.boundary = Boundary::ZeroPad;
        cfg.cfl_safety = self.cfl_safety;
        cfg.snapshots = self.snapshots;
        cfg.max_growth = self.max_growth;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateSection {
    pub coherent: ComplexSpec,
    #[serde(default = "default_strict_margin")]
    pub strict_margin: bool,
}

fn default_strict_margin() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub hamiltonian: HamiltonianSpec,
    pub scheme: SchemeTag,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub integrator: Option<IntegratorSection>,
    #[serde(default)]
    pub initial_state: Option<InitialStateSection>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub compare_oracle: bool,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        self.grid
            .as_ref()
            .map(|g| g.spec())
            .ok_or_else(|| CliError::Config("config has no 'grid' section".into()))
    }

    pub fn integrator_config(&self) -> Result<IntegratorConfig, CliError> {
        self.integrator
            .as_ref()
            .ok_or_else(|| CliError::Config("config has no 'integrator' section".into()))?
            .config()
    }

    pub fn initial_state(&self) -> Result<&InitialStateSection, CliError> {
        self.initial_state
            .as_ref()
            .ok_or_else(|| CliError::Config("config has no 'initial_state' section".into()))
    }
}

/// The complementary Hamiltonian symbol the scheme needs, enforcing the
/// pairing rule.
///
/// Without `allow_wick`, pairing a Wick-type Hamiltonian with the Q-function
/// (or anti-Wick with P) is refused: done silently it produces the well-known
/// spurious drift relative to the classical flow. With the flag the symbol is
/// converted through the Berezin transform so the mismatch can be reproduced
/// deliberately.
pub fn complementary_hamiltonian(
    config: &RunConfig,
    allow_wick: bool,
) -> Result<PolynomialSymbol, CliError> {
    let raw = config.hamiltonian.symbol()?;
    match (config.scheme, raw.kind()) {
        (SchemeTag::Q, SymbolKind::AntiWick) => Ok(raw),
        (SchemeTag::P, SymbolKind::Wick) => Ok(raw),
        (SchemeTag::Q, SymbolKind::Wick) => {
            if !allow_wick {
                return Err(CliError::Pairing(
                    "this Hamiltonian is a Wick symbol but the run uses the Q-function. \
                     Evolving the Husimi function with a Hamiltonian that was not \
                     anti-Wick-quantized adds a spurious non-classical drift. \
                     Re-quantize with 'classical_antiwick', or pass \
                     --i-know-this-is-wick to reproduce the artifact deliberately."
                        .into(),
                ));
            }
            Ok(raw.berezin_inverse().map_err(CliError::Lib)?)
        }
        (SchemeTag::P, SymbolKind::AntiWick) => {
            if !allow_wick {
                return Err(CliError::Pairing(
                    "this Hamiltonian is an anti-Wick symbol but the run uses the \
                     P-function; its Wick symbol is required. Re-quantize with \
                     'classical_wick' or 'normal_ordered_operator', or pass \
                     --i-know-this-is-wick to convert through the Berezin transform."
                        .into(),
                ));
            }
            Ok(raw.berezin_forward().map_err(CliError::Lib)?)
        }
        (_, other) => Err(CliError::Config(format!(
            "unexpected hamiltonian symbol kind '{other}'"
        ))),
    }
}

/// Derive the evolution series for the configured scheme.
pub fn build_eom(config: &RunConfig, allow_wick: bool) -> Result<EomSeries, CliError> {
    let h = complementary_hamiltonian(config, allow_wick)?;
    let eom = match config.scheme {
        SchemeTag::Q => derive_q_eom(&h),
        SchemeTag::P => derive_p_eom(&h),
    };
    eom.map_err(CliError::Lib)
}
