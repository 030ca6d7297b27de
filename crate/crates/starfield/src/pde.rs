//! Single-mode `(q, p)` grid discretization of a derived evolution series:
//! finite-difference application of surface-derivative terms, RK4 time
//! stepping, phase-space expectation values and Ehrenfest residuals.
//!
//! Coordinates follow `α = (q + ip)/√2`; integrals use `dq dp / (2π)`, which
//! makes the coherent-state Husimi function `exp(−|α−α₀|²)` normalized.
//! Boundaries are zero-padded, justified by the vanishing of the distributions
//! at the phase-space boundary.

use ndarray::Array2;
use num_complex::Complex64;

use crate::eom::{EomSeries, RealSurfaceTerm, Scheme};
use crate::star::{antiwick_bracket, wick_bracket};
use crate::symbols::{PolynomialSymbol, RealPolynomial, SymbolKind, SQRT_HALF};
use crate::{Error, Result};

const TWO_PI: f64 = std::f64::consts::TAU;

/// Which distribution the grid samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionKind {
    Q,
    P,
}

/// Uniform rectangular grid layout over `(q, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nq: usize,
    pub np: usize,
}

impl GridSpec {
    /// Square grid centered on the origin with half-extent `ext`.
    pub fn square(ext: f64, n: usize) -> Self {
        Self {
            q_min: -ext,
            q_max: ext,
            p_min: -ext,
            p_max: ext,
            nq: n,
            np: n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q_max > self.q_min) || !(self.p_max > self.p_min) {
            return Err(Error::InvalidConfig("grid extents must be increasing".into()));
        }
        if self.nq < 9 || self.np < 9 {
            return Err(Error::InvalidConfig(format!(
                "grid needs at least 9 points per axis for stencil support (got {}x{})",
                self.nq, self.np
            )));
        }
        Ok(())
    }

    pub fn dq(&self) -> f64 {
        (self.q_max - self.q_min) / (self.nq - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.np - 1) as f64
    }

    pub fn q_at(&self, i: usize) -> f64 {
        self.q_min + self.dq() * i as f64
    }

    pub fn p_at(&self, j: usize) -> f64 {
        self.p_min + self.dp() * j as f64
    }

    /// `α` at a grid node.
    pub fn alpha_at(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.q_at(i), self.p_at(j)) * SQRT_HALF
    }

    /// Distance (in oscillator lengths, i.e. in the α-plane) from `alpha0`
    /// to the nearest domain edge.
    pub fn alpha_margin(&self, alpha0: Complex64) -> f64 {
        let (x, y) = (alpha0.re, alpha0.im);
        let xs = [self.q_max * SQRT_HALF - x, x - self.q_min * SQRT_HALF];
        let ys = [self.p_max * SQRT_HALF - y, y - self.p_min * SQRT_HALF];
        xs.into_iter().chain(ys).fold(f64::INFINITY, f64::min)
    }
}

/// Real-valued distribution samples on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    pub spec: GridSpec,
    pub kind: DistributionKind,
    pub values: Array2<f64>,
}

impl PhaseSpaceGrid {
    /// Sample `f(q, p)` at every node.
    pub fn from_fn(
        spec: GridSpec,
        kind: DistributionKind,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Result<Self> {
        spec.validate()?;
        let values =
            Array2::from_shape_fn((spec.nq, spec.np), |(i, j)| f(spec.q_at(i), spec.p_at(j)));
        Ok(Self { spec, kind, values })
    }

    /// `∫ values dq dp / (2π)` by midpoint quadrature.
    pub fn norm(&self) -> f64 {
        self.values.sum() * self.spec.dq() * self.spec.dp() / TWO_PI
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `max |self − other|` over all nodes (grids must share the layout).
    pub fn linf_diff(&self, other: &PhaseSpaceGrid) -> f64 {
        assert_eq!(self.spec, other.spec, "grids have different layouts");
        self.values
            .iter()
            .zip(other.values.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Coherent-state Husimi function `exp(−|α−α₀|²)` sampled on `spec`.
///
/// With `strict_margin` the domain must enclose `α₀` with a margin of at
/// least 4 oscillator lengths (boundary values below `e^{-16}`).
pub fn coherent_state_grid(
    alpha0: Complex64,
    spec: &GridSpec,
    strict_margin: bool,
) -> Result<PhaseSpaceGrid> {
    spec.validate()?;
    let margin = spec.alpha_margin(alpha0);
    if strict_margin && margin < 4.0 {
        return Err(Error::InvalidConfig(format!(
            "domain margin around alpha0 is {margin:.2} oscillator lengths (need >= 4)"
        )));
    }
    PhaseSpaceGrid::from_fn(spec.clone(), DistributionKind::Q, |q, p| {
        let alpha = Complex64::new(q, p) * SQRT_HALF;
        (-(alpha - alpha0).norm_sqr()).exp()
    })
}

// ---------------------------------------------------------------------------
// Central finite-difference stencils
// ---------------------------------------------------------------------------

/// Requested accuracy of the spatial stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilOrder {
    Two,
    Four,
}

impl StencilOrder {
    pub fn accuracy(self) -> u32 {
        match self {
            StencilOrder::Two => 2,
            StencilOrder::Four => 4,
        }
    }
}

/// Boundary handling of the grid operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Ghost nodes outside the domain read as zero.
    #[default]
    ZeroPad,
}

/// Fornberg weights for the `m`-th derivative at `z` on nodes `x`.
fn fornberg_weights(z: f64, x: &[f64], m: usize) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![vec![0.0f64; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    (0..n).map(|i| c[i][m]).collect()
}

/// Symmetric central stencil for the `d`-th derivative at the given accuracy,
/// on unit spacing (divide by `Δ^d` at application).
pub fn central_stencil(d: u32, accuracy: u32) -> Vec<f64> {
    if d == 0 {
        return vec![1.0];
    }
    let npoints = (2 * ((d + 1) / 2) - 1 + accuracy) as usize;
    let half = (npoints - 1) / 2;
    let x: Vec<f64> = (0..npoints).map(|k| k as f64 - half as f64).collect();
    fornberg_weights(0.0, &x, d as usize)
}

/// Apply a 1D stencil along the q axis (`axis_q`) or p axis, zero-padded,
/// scaling by `scale` (normally `1/Δ^d`).
fn apply_axis_stencil(v: &Array2<f64>, w: &[f64], scale: f64, axis_q: bool) -> Array2<f64> {
    let (nq, np) = v.dim();
    let half = (w.len() - 1) as isize / 2;
    let mut out = Array2::zeros((nq, np));
    for (s, &ws) in w.iter().enumerate() {
        let ws = ws * scale;
        if ws == 0.0 {
            continue;
        }
        let off = s as isize - half;
        if axis_q {
            let lo = (-off).max(0) as usize;
            let hi = (nq as isize - off).clamp(0, nq as isize) as usize;
            for i in lo..hi {
                let src = (i as isize + off) as usize;
                let srow = v.row(src);
                let mut orow = out.row_mut(i);
                for j in 0..np {
                    orow[j] += ws * srow[j];
                }
            }
        } else {
            let lo = (-off).max(0) as usize;
            let hi = (np as isize - off).clamp(0, np as isize) as usize;
            for i in 0..nq {
                let srow = v.row(i);
                let mut orow = out.row_mut(i);
                for j in lo..hi {
                    orow[j] += ws * srow[(j as isize + off) as usize];
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Compiled operator
// ---------------------------------------------------------------------------

struct CompiledTerm {
    coeff: Array2<f64>,
    wq: Vec<f64>,
    wp: Vec<f64>,
    scale_q: f64,
    scale_p: f64,
}

/// A real-form series frozen onto a grid: per outer derivative one
/// coefficient field and the stencils to apply.
pub struct CompiledEom {
    terms: Vec<CompiledTerm>,
}

impl CompiledEom {
    /// Evaluate the rate grid for the current distribution samples.
    pub fn apply(&self, v: &Array2<f64>) -> Array2<f64> {
        let mut rate = Array2::zeros(v.dim());
        for t in &self.terms {
            let mut w = &t.coeff * v;
            if t.wq.len() > 1 {
                w = apply_axis_stencil(&w, &t.wq, t.scale_q, true);
            }
            if t.wp.len() > 1 {
                w = apply_axis_stencil(&w, &t.wp, t.scale_p, false);
            }
            rate += &w;
        }
        rate
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Freeze a real-form series onto a grid layout.
///
/// Terms sharing an outer derivative are merged into one coefficient field.
/// Fails if the merged coefficients are not real (the series would produce a
/// non-real rate) or if a stencil does not fit on the grid.
pub fn compile_eom(eom: &EomSeries, spec: &GridSpec, order: StencilOrder) -> Result<CompiledEom> {
    let terms = eom.real_terms().ok_or_else(|| {
        Error::InvalidConfig("grid application needs the real-variable form".into())
    })?;
    if eom.num_modes() != 1 {
        return Err(Error::InvalidConfig("grid integration is single-mode only".into()));
    }
    spec.validate()?;

    // Merge scalar * inner per outer derivative pair.
    let mut merged: std::collections::BTreeMap<(u32, u32), RealPolynomial> =
        std::collections::BTreeMap::new();
    for t in terms {
        let key = (t.outer_q[0], t.outer_p[0]);
        let scaled = t.inner.scale(t.scalar);
        merged
            .entry(key)
            .and_modify(|acc| *acc = acc.add(&scaled))
            .or_insert(scaled);
    }

    let mut compiled = Vec::new();
    for ((qo, po), poly) in merged {
        let magnitude = poly
            .terms()
            .map(|(_, c)| c.norm())
            .fold(0.0f64, f64::max)
            .max(1.0);
        if poly.max_imag() > 1e-10 * magnitude {
            return Err(Error::NonRealResidue {
                imag: poly.max_imag(),
            });
        }
        let wq = central_stencil(qo, order.accuracy());
        let wp = central_stencil(po, order.accuracy());
        if wq.len() > spec.nq || wp.len() > spec.np {
            return Err(Error::InvalidConfig(format!(
                "stencil for outer derivative ({qo},{po}) exceeds the grid"
            )));
        }
        let coeff = Array2::from_shape_fn((spec.nq, spec.np), |(i, j)| {
            poly.evaluate(&[spec.q_at(i)], &[spec.p_at(j)]).re
        });
        compiled.push(CompiledTerm {
            coeff,
            wq,
            wp,
            scale_q: spec.dq().powi(-(qo as i32)),
            scale_p: spec.dp().powi(-(po as i32)),
        });
    }
    Ok(CompiledEom { terms: compiled })
}

/// Rate grid `∂_t F` of a real-form series applied to the distribution.
pub fn apply_eom(
    grid: &PhaseSpaceGrid,
    eom: &EomSeries,
    order: StencilOrder,
) -> Result<Array2<f64>> {
    let compiled = compile_eom(eom, &grid.spec, order)?;
    Ok(compiled.apply(&grid.values))
}

// ---------------------------------------------------------------------------
// Time integration
// ---------------------------------------------------------------------------

/// RK4 integration controls.
#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    pub stencil_order: StencilOrder,
    pub boundary: Boundary,
    /// Safety factor `c` of the step-size guard
    /// `dt <= c min(Δq,Δp)² / max|D|`, applied when second-order (diffusion)
    /// terms are present.
    pub cfl_safety: f64,
    /// Number of snapshots to record, end points included.
    pub snapshots: usize,
    /// Abort when `max |F|` exceeds this multiple of its initial value.
    pub max_growth: f64,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            t_final,
            stencil_order: StencilOrder::Two,
            boundary: Boundary::ZeroPad,
            cfl_safety: 0.25,
            snapshots: 2,
            max_growth: 1e6,
        }
    }
}

/// One recorded state of a trajectory.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub norm: f64,
    pub grid: PhaseSpaceGrid,
}

/// Result of [`integrate`]: recorded snapshots (first at `t = 0`, last at
/// `t_final`) with per-snapshot norms.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
}

impl Trajectory {
    pub fn initial(&self) -> &Snapshot {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory has snapshots")
    }

    /// Largest `|norm(t) − norm(0)|` over the recorded snapshots.
    pub fn max_norm_drift(&self) -> f64 {
        let n0 = self.snapshots[0].norm;
        self.snapshots
            .iter()
            .map(|s| (s.norm - n0).abs())
            .fold(0.0, f64::max)
    }
}

fn scheme_matches(scheme: Scheme, kind: DistributionKind) -> bool {
    matches!(
        (scheme, kind),
        (Scheme::QFunction, DistributionKind::Q) | (Scheme::PFunction, DistributionKind::P)
    )
}

/// Largest diffusion-coefficient magnitude over the grid, in the
/// normalization of the Fokker-Planck form (order-2 term coefficients carry
/// a factor 1/2 relative to the `D` entries).
fn max_diffusion(eom: &EomSeries, spec: &GridSpec) -> f64 {
    let Some(terms) = eom.real_terms() else {
        return 0.0;
    };
    let order2: Vec<&RealSurfaceTerm> = terms.iter().filter(|t| t.order >= 2).collect();
    let mut max_d = 0.0f64;
    for t in &order2 {
        let scaled = t.inner.scale(t.scalar * 2.0);
        for i in 0..spec.nq {
            for j in 0..spec.np {
                let v = scaled.evaluate(&[spec.q_at(i)], &[spec.p_at(j)]).norm();
                max_d = max_d.max(v);
            }
        }
    }
    max_d
}

/// Integrate a real-form series with classical RK4, recording snapshots.
///
/// Aborts with [`Error::Instability`] if the samples blow up or go
/// non-finite; rejects the configuration up front if `dt` violates the
/// diffusion guard.
pub fn integrate(
    grid: &PhaseSpaceGrid,
    eom: &EomSeries,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    if !scheme_matches(eom.scheme(), grid.kind) {
        return Err(Error::InvalidConfig(
            "evolution scheme does not match the grid's distribution kind".into(),
        ));
    }
    if !(config.dt > 0.0) {
        return Err(Error::InvalidConfig("dt must be positive".into()));
    }
    if !(config.t_final >= 0.0) {
        return Err(Error::InvalidConfig("t_final must be non-negative".into()));
    }
    if config.snapshots < 2 {
        return Err(Error::InvalidConfig("need at least 2 snapshots".into()));
    }
    let steps_f = config.t_final / config.dt;
    let steps = steps_f.round() as usize;
    if (steps == 0 && config.t_final > 0.0) || (steps_f - steps as f64).abs() > 1e-6 {
        return Err(Error::InvalidConfig(format!(
            "dt = {} must divide t_final = {}",
            config.dt, config.t_final
        )));
    }

    let compiled = compile_eom(eom, &grid.spec, config.stencil_order)?;

    let max_d = max_diffusion(eom, &grid.spec);
    if max_d > 0.0 {
        let h = grid.spec.dq().min(grid.spec.dp());
        let dt_max = config.cfl_safety * h * h / max_d;
        if config.dt > dt_max {
            return Err(Error::InvalidConfig(format!(
                "dt = {:.3e} exceeds the diffusion guard {:.3e} (= {} * {:.3e}^2 / {:.3e})",
                config.dt, dt_max, config.cfl_safety, h, max_d
            )));
        }
    }

    // Map requested snapshot times onto step indices.
    let mut snap_steps: Vec<usize> = (0..config.snapshots)
        .map(|k| {
            let t = config.t_final * k as f64 / (config.snapshots - 1) as f64;
            (t / config.dt).round() as usize
        })
        .collect();
    snap_steps.dedup();

    let mut u = grid.values.clone();
    let initial_max = grid.max_abs().max(f64::MIN_POSITIVE);
    let mut snapshots = Vec::with_capacity(snap_steps.len());
    let record = |step: usize, u: &Array2<f64>, out: &mut Vec<Snapshot>| {
        let g = PhaseSpaceGrid {
            spec: grid.spec.clone(),
            kind: grid.kind,
            values: u.clone(),
        };
        out.push(Snapshot {
            time: step as f64 * config.dt,
            norm: g.norm(),
            grid: g,
        });
    };
    if snap_steps.first() == Some(&0) {
        record(0, &u, &mut snapshots);
    }

    let dt = config.dt;
    for step in 1..=steps {
        let k1 = compiled.apply(&u);
        let k2 = compiled.apply(&(&u + &(&k1 * (0.5 * dt))));
        let k3 = compiled.apply(&(&u + &(&k2 * (0.5 * dt))));
        let k4 = compiled.apply(&(&u + &(&k3 * dt)));
        let max_rate = k1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        u = &u + &((&(&k1 + &k4) + &(&(&k2 + &k3) * 2.0)) * (dt / 6.0));

        let max_abs = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !max_abs.is_finite() || max_abs > config.max_growth * initial_max {
            return Err(Error::Instability {
                step,
                time: step as f64 * dt,
                max_rate,
                dt,
            });
        }
        if snap_steps.contains(&step) {
            record(step, &u, &mut snapshots);
        }
    }
    Ok(Trajectory { snapshots, steps })
}

// ---------------------------------------------------------------------------
// Expectation values and Ehrenfest residuals
// ---------------------------------------------------------------------------

fn complementary_observable_kind(kind: DistributionKind) -> SymbolKind {
    match kind {
        DistributionKind::Q => SymbolKind::AntiWick,
        DistributionKind::P => SymbolKind::Wick,
    }
}

/// Expectation value `∫ A(α, α*) F(q, p) dq dp / (2π)` by midpoint
/// quadrature.
///
/// The observable's kind must complement the distribution: anti-Wick with Q,
/// Wick with P (`Classical` is accepted as either reading); anything else is
/// a hard error.
pub fn expectation(observable: &PolynomialSymbol, grid: &PhaseSpaceGrid) -> Result<Complex64> {
    let expected = complementary_observable_kind(grid.kind);
    if observable.kind() != expected && observable.kind() != SymbolKind::Classical {
        return Err(Error::Complementarity {
            op: "expectation",
            expected: match grid.kind {
                DistributionKind::Q => "antiwick (with a Q grid)",
                DistributionKind::P => "wick (with a P grid)",
            },
            found: observable.kind(),
        });
    }
    if observable.num_modes() != 1 {
        return Err(Error::InvalidConfig("grid expectation is single-mode only".into()));
    }
    let spec = &grid.spec;
    let mut acc = Complex64::default();
    for i in 0..spec.nq {
        for j in 0..spec.np {
            let a = observable
                .evaluate(&[spec.alpha_at(i, j)])
                .expect("mode count checked");
            acc += a * grid.values[[i, j]];
        }
    }
    Ok(acc * (spec.dq() * spec.dp() / TWO_PI))
}

/// One Ehrenfest comparison point: measured `d⟨A⟩/dt` by centered
/// differencing of snapshot expectations against the bracket side
/// `−i ⟨{{A, H}}_*⟩`.
#[derive(Debug, Clone)]
pub struct EhrenfestSample {
    pub time: f64,
    pub measured: Complex64,
    pub bracket_side: Complex64,
}

impl EhrenfestSample {
    pub fn residual(&self) -> f64 {
        (self.measured - self.bracket_side).norm()
    }
}

/// Ehrenfest residuals along a trajectory.
///
/// `observable` and `hamiltonian` must both carry the symbol kind
/// complementary to the trajectory's distribution (anti-Wick for Q, Wick for
/// P); the bracket is the star bracket of that same kind. For
/// `observable = hamiltonian` the bracket side is symbolically zero.
pub fn ehrenfest_residual(
    observable: &PolynomialSymbol,
    hamiltonian: &PolynomialSymbol,
    trajectory: &Trajectory,
) -> Result<Vec<EhrenfestSample>> {
    let kind = trajectory.initial().grid.kind;
    let expected = complementary_observable_kind(kind);
    for sym in [observable, hamiltonian] {
        if sym.kind() != expected {
            return Err(Error::Complementarity {
                op: "ehrenfest_residual",
                expected: match kind {
                    DistributionKind::Q => "antiwick (with a Q trajectory)",
                    DistributionKind::P => "wick (with a P trajectory)",
                },
                found: sym.kind(),
            });
        }
    }
    let bracket = match kind {
        DistributionKind::Q => antiwick_bracket(observable, hamiltonian)?,
        DistributionKind::P => wick_bracket(observable, hamiltonian)?,
    };
    let minus_i = Complex64::new(0.0, -1.0);

    let snaps = &trajectory.snapshots;
    if snaps.len() < 3 {
        return Err(Error::InvalidConfig(
            "need at least 3 snapshots for centered differencing".into(),
        ));
    }
    let means: Vec<Complex64> = snaps
        .iter()
        .map(|s| expectation(observable, &s.grid))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(snaps.len().saturating_sub(2));
    for w in 0..snaps.len() - 2 {
        let (lo, mid, hi) = (&snaps[w], &snaps[w + 1], &snaps[w + 2]);
        let measured = (means[w + 2] - means[w]) / (hi.time - lo.time);
        let bracket_side = if bracket.is_zero() {
            Complex64::default()
        } else {
            minus_i * expectation(&bracket, &mid.grid)?
        };
        out.push(EhrenfestSample {
            time: mid.time,
            measured,
            bracket_side,
        });
    }
    Ok(out)
}
