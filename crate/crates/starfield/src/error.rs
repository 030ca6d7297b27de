use crate::symbols::SymbolKind;

/// Errors shared by all modules of the crate.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Two symbols that must live on the same number of modes do not.
    #[error("mode count mismatch: {left} vs {right}")]
    ModeMismatch { left: usize, right: usize },

    /// A point or exponent vector has the wrong length.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A symbol of the wrong quantization kind was passed to an operation
    /// that requires its complementary (or same-type) partner.
    #[error("complementarity violation in {op}: expected {expected}, found {found:?}")]
    Complementarity {
        op: &'static str,
        expected: &'static str,
        found: SymbolKind,
    },

    /// The evolution series has surface derivatives of order three or more,
    /// so it is not a Fokker-Planck system.
    #[error("not a Fokker-Planck system: surface derivatives of order {order} present")]
    BeyondDiffusion { order: u32 },

    /// Configuration rejected before any computation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The grid integrator detected a blow-up and aborted.
    #[error(
        "numerical instability at step {step} (t = {time:.6}): max |rate| = {max_rate:.3e}, dt = {dt:.3e}"
    )]
    Instability {
        step: usize,
        time: f64,
        max_rate: f64,
        dt: f64,
    },

    /// A truncated series was requested with too few terms for the target
    /// accuracy.
    #[error("series tail bound violated: {terms} terms leave residual {residual:.3e} (need < {required:.1e})")]
    TailBound {
        terms: usize,
        residual: f64,
        required: f64,
    },

    /// Coherent amplitude too large for the truncated Fock space.
    #[error("truncation-sensitive amplitude: |alpha|^2 = {amp_sq:.3} exceeds dim/4 = {limit:.3}")]
    TruncationSensitivity { amp_sq: f64, limit: f64 },

    /// An evolution-series term produced a rate with a non-real component
    /// beyond tolerance.
    #[error("non-real rate residue: |imag| = {imag:.3e} exceeds tolerance")]
    NonRealResidue { imag: f64 },
}
