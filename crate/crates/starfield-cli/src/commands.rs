//! Implementations of the CLI subcommands.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use starfield::eom::{extract_fp, milburn_scenario, EomSeries};
use starfield::oracle::{
    anharmonic_exact_q, harmonic_rotation_q, required_terms,
};
use starfield::pde::{
    coherent_state_grid, ehrenfest_residual, integrate, GridSpec, IntegratorConfig,
    PhaseSpaceGrid, Trajectory,
};
use starfield::star;
use starfield::symbols::{PolynomialSymbol, SymbolKind};

use crate::config::{
    build_eom, complementary_hamiltonian, BuiltinHamiltonian, RunConfig, SchemeTag,
};
use crate::jsonfmt::{csv_f64, write_json};
use crate::CliError;

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn scheme_name(scheme: SchemeTag) -> &'static str {
    match scheme {
        SchemeTag::Q => "Q",
        SchemeTag::P => "P",
    }
}

// ---------------------------------------------------------------------------
// derive
// ---------------------------------------------------------------------------

pub fn cmd_derive(config: &RunConfig, out: &Path, allow_wick: bool) -> Result<(), CliError> {
    ensure_dir(out)?;
    let eom = build_eom(config, allow_wick)?;
    let real = eom.to_real_form().map_err(CliError::Lib)?;

    write_json(
        &out.join("eom.json"),
        &json!({
            "scheme": scheme_name(config.scheme),
            "complex": &eom,
            "real": &real,
        }),
    )?;

    let mut summary = String::new();
    summary.push_str(&format!("scheme: {}\n", scheme_name(config.scheme)));
    summary.push_str(&format!("series max order: {}\n", eom.max_n()));

    if eom.max_n() <= 2 {
        let fp = extract_fp(&eom).map_err(CliError::Lib)?;
        let traceless = fp.is_traceless(1e-12);
        write_json(&out.join("fp.json"), &fp)?;
        summary.push_str("fokker_planck: yes\n");
        summary.push_str(&format!("traceless_diffusion: {traceless}\n"));
    } else {
        let beyond = real.restricted_to_orders(|o| o >= 3);
        write_json(&out.join("beyond_diffusion.json"), &beyond)?;
        summary.push_str("fokker_planck: no\n");
        let orders: Vec<u32> = (3..=eom.max_n()).collect();
        summary.push_str(&format!("beyond_diffusion_orders: {orders:?}\n"));
    }

    fs::write(out.join("summary.txt"), summary)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// evolve
// ---------------------------------------------------------------------------

fn write_grid_csv(path: &Path, grid: &PhaseSpaceGrid) -> Result<(), CliError> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "q,p,value")?;
    let spec = &grid.spec;
    for i in 0..spec.nq {
        for j in 0..spec.np {
            writeln!(
                f,
                "{},{},{}",
                csv_f64(spec.q_at(i)),
                csv_f64(spec.p_at(j)),
                csv_f64(grid.values[[i, j]])
            )?;
        }
    }
    Ok(())
}

fn sidecar_json(grid: &PhaseSpaceGrid, time: f64, norm: f64) -> serde_json::Value {
    json!({
        "time": time,
        "norm": norm,
        "extents": {
            "q_min": grid.spec.q_min,
            "q_max": grid.spec.q_max,
            "p_min": grid.spec.p_min,
            "p_max": grid.spec.p_max,
        },
        "spacing": { "dq": grid.spec.dq(), "dp": grid.spec.dp() },
        "points": { "nq": grid.spec.nq, "np": grid.spec.np },
    })
}

fn write_trajectory(
    out: &Path,
    scheme: SchemeTag,
    traj: &Trajectory,
) -> Result<(), CliError> {
    let mut entries = Vec::new();
    for (idx, snap) in traj.snapshots.iter().enumerate() {
        let csv_name = format!("snapshot_{idx:03}.csv");
        let sidecar_name = format!("snapshot_{idx:03}.json");
        write_grid_csv(&out.join(&csv_name), &snap.grid)?;
        write_json(
            &out.join(&sidecar_name),
            &sidecar_json(&snap.grid, snap.time, snap.norm),
        )?;
        entries.push(json!({
            "file": csv_name,
            "sidecar": sidecar_name,
            "time": snap.time,
            "norm": snap.norm,
        }));
    }
    write_json(
        &out.join("manifest.json"),
        &json!({
            "scheme": scheme_name(scheme),
            "steps": traj.steps,
            "snapshots": entries,
        }),
    )?;
    Ok(())
}

fn oracle_snapshot(
    config: &RunConfig,
    spec: &GridSpec,
    alpha0: Complex64,
    time: f64,
) -> Result<Option<PhaseSpaceGrid>, CliError> {
    let h = &config.hamiltonian;
    let tau = h.omega0 * time;
    match h.builtin {
        Some(BuiltinHamiltonian::Harmonic) => {
            Ok(Some(harmonic_rotation_q(spec, tau, alpha0).map_err(CliError::Lib)?))
        }
        Some(BuiltinHamiltonian::AnharmonicRotating) => {
            let n = required_terms(spec, alpha0);
            Ok(Some(
                anharmonic_exact_q(spec, tau, alpha0, h.mu, n).map_err(CliError::Lib)?,
            ))
        }
        _ => Ok(None),
    }
}

pub fn cmd_evolve(
    config: &RunConfig,
    out: &Path,
    compare_oracle: bool,
    allow_wick: bool,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    // P runs use the same Gaussian initial state as Q runs; rougher
    // P-function data is outside the integrator's remit.
    let eom = build_eom(config, allow_wick)?
        .to_real_form()
        .map_err(CliError::Lib)?;
    let spec = config.grid_spec()?;
    let initial_cfg = config.initial_state()?;
    let alpha0 = initial_cfg.coherent.value();
    let mut initial =
        coherent_state_grid(alpha0, &spec, initial_cfg.strict_margin).map_err(CliError::Lib)?;
    if config.scheme == SchemeTag::P {
        initial.kind = starfield::pde::DistributionKind::P;
    }
    let int_cfg: IntegratorConfig = config.integrator_config()?;
    let traj = integrate(&initial, &eom, &int_cfg).map_err(CliError::Lib)?;
    write_trajectory(out, config.scheme, &traj)?;

    let do_compare = compare_oracle || config.compare_oracle;
    if do_compare {
        if config.scheme == SchemeTag::P {
            return Err(CliError::Config(
                "oracle comparison is only available for Q-function runs".into(),
            ));
        }
        let mut rows = Vec::new();
        for snap in &traj.snapshots {
            let Some(oracle) = oracle_snapshot(config, &spec, alpha0, snap.time)? else {
                return Err(CliError::Config(
                    "oracle comparison needs a builtin hamiltonian \
                     ('harmonic' or 'anharmonic_rotating')"
                        .into(),
                ));
            };
            rows.push((snap.time, snap.grid.linf_diff(&oracle), snap.norm));
        }
        let mut f = std::io::BufWriter::new(fs::File::create(out.join("error_vs_time.csv"))?);
        writeln!(f, "time,linf_error,norm")?;
        for (t, e, n) in rows {
            writeln!(f, "{},{},{}", csv_f64(t), csv_f64(e), csv_f64(n))?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// milburn
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct DriftBlock {
    /// Inner coefficient polynomials of the order-1 surface terms.
    surface: EomSeries,
    /// Fully expanded first-derivative coefficients, keyed "d_alpha" /
    /// "d_alpha_star".
    expanded: serde_json::Value,
}

fn drift_block(eom: &EomSeries) -> Result<DriftBlock, CliError> {
    let coeffs = eom.expand_to_coefficients().map_err(CliError::Lib)?;
    let zero = || PolynomialSymbol::zero(1, SymbolKind::Untyped);
    Ok(DriftBlock {
        surface: eom.restricted_to_orders(|o| o == 1),
        expanded: json!({
            "d_alpha": coeffs.get(&(1, 0)).cloned().unwrap_or_else(zero),
            "d_alpha_star": coeffs.get(&(0, 1)).cloned().unwrap_or_else(zero),
        }),
    })
}

pub struct MilburnEvolveOptions {
    pub alpha0: Complex64,
    pub grid_ext: f64,
    pub grid_n: usize,
    pub dt: f64,
    pub taus: Vec<f64>,
}

pub fn cmd_milburn(
    mu: f64,
    omega0: f64,
    out: &Path,
    evolve: Option<MilburnEvolveOptions>,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    let sc = milburn_scenario(mu, omega0).map_err(CliError::Lib)?;
    let artifact = sc.drift_artifact().map_err(CliError::Lib)?;
    let artifact_json: Vec<serde_json::Value> = artifact
        .iter()
        .map(|((j, k), poly)| {
            json!({ "d_alpha_order": j, "d_alpha_star_order": k, "coefficient": poly })
        })
        .collect();

    write_json(
        &out.join("milburn.json"),
        &json!({
            "mu": mu,
            "omega0": omega0,
            "h_classical": sc.h_classical,
            "h_antiwick_quantized": sc.h_antiwick_quantized,
            "h_milburn_interaction_wick": sc.h_milburn_interaction_wick,
            "h_milburn_interaction_antiwick": sc.h_milburn_interaction_antiwick,
            "milburn_drift": drift_block(&sc.eom_milburn)?,
            "antiwick_drift": drift_block(&sc.eom_antiwick)?,
            "classical_drift": sc.classical_drift(),
            "drift_artifact_present": !artifact.is_empty(),
            "drift_artifact": artifact_json,
        }),
    )?;

    if let Some(opts) = evolve {
        let spec = GridSpec::square(opts.grid_ext, opts.grid_n);
        let initial = coherent_state_grid(opts.alpha0, &spec, false).map_err(CliError::Lib)?;
        let milburn_real = sc.eom_milburn.to_real_form().map_err(CliError::Lib)?;
        let antiwick_real = sc.eom_antiwick.to_real_form().map_err(CliError::Lib)?;
        let mut rows = Vec::new();
        for &tau in &opts.taus {
            let mut cfg = IntegratorConfig::new(opts.dt, tau);
            cfg.snapshots = 2;
            let a = integrate(&initial, &milburn_real, &cfg).map_err(CliError::Lib)?;
            let b = integrate(&initial, &antiwick_real, &cfg).map_err(CliError::Lib)?;
            rows.push((
                tau,
                a.last().grid.linf_diff(&b.last().grid),
                a.last().norm,
                b.last().norm,
            ));
        }
        let mut f =
            std::io::BufWriter::new(fs::File::create(out.join("evolved_differences.csv"))?);
        writeln!(f, "tau,linf_milburn_vs_antiwick,norm_milburn,norm_antiwick")?;
        for (t, d, nm, na) in rows {
            writeln!(f, "{},{},{},{}", csv_f64(t), csv_f64(d), csv_f64(nm), csv_f64(na))?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// ehrenfest
// ---------------------------------------------------------------------------

fn run_ehrenfest(
    config: &RunConfig,
    observable: &PolynomialSymbol,
    hamiltonian: &PolynomialSymbol,
    spec: &GridSpec,
    int_cfg: &IntegratorConfig,
    allow_wick: bool,
) -> Result<Vec<starfield::pde::EhrenfestSample>, CliError> {
    let eom = build_eom(config, allow_wick)?
        .to_real_form()
        .map_err(CliError::Lib)?;
    let initial_cfg = config.initial_state()?;
    let mut initial = coherent_state_grid(initial_cfg.coherent.value(), spec, initial_cfg.strict_margin)
        .map_err(CliError::Lib)?;
    if config.scheme == SchemeTag::P {
        initial.kind = starfield::pde::DistributionKind::P;
    }
    let traj = integrate(&initial, &eom, int_cfg).map_err(CliError::Lib)?;
    ehrenfest_residual(observable, hamiltonian, &traj).map_err(CliError::Lib)
}

pub fn cmd_ehrenfest(
    config: &RunConfig,
    observable_path: &Path,
    out: &Path,
    allow_wick: bool,
) -> Result<(), CliError> {
    ensure_dir(out)?;
    let text = fs::read_to_string(observable_path)?;
    let observable: PolynomialSymbol = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", observable_path.display())))?;

    let expected = match config.scheme {
        SchemeTag::Q => SymbolKind::AntiWick,
        SchemeTag::P => SymbolKind::Wick,
    };
    if observable.kind() != expected {
        return Err(CliError::Pairing(format!(
            "observable kind '{}' does not complement the {} scheme (need '{expected}')",
            observable.kind(),
            scheme_name(config.scheme),
        )));
    }
    // The bracket side pairs the observable with the same-kind Hamiltonian
    // symbol.
    let hamiltonian = complementary_hamiltonian(config, allow_wick)?.with_kind(expected);

    let spec = config.grid_spec()?;
    let base_cfg = config.integrator_config()?;
    let samples = run_ehrenfest(config, &observable, &hamiltonian, &spec, &base_cfg, allow_wick)?;

    let mut f = std::io::BufWriter::new(fs::File::create(out.join("ehrenfest.csv"))?);
    writeln!(f, "time,measured_re,measured_im,bracket_re,bracket_im,residual")?;
    for s in &samples {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            csv_f64(s.time),
            csv_f64(s.measured.re),
            csv_f64(s.measured.im),
            csv_f64(s.bracket_side.re),
            csv_f64(s.bracket_side.im),
            csv_f64(s.residual()),
        )?;
    }
    drop(f);

    let max_res = samples.iter().map(|s| s.residual()).fold(0.0f64, f64::max);

    // Convergence summary: halve the snapshot interval (the centered
    // differencing that forms the measured side) and refine the grid.
    let mut fine_sampling = base_cfg.clone();
    fine_sampling.snapshots = 2 * (base_cfg.snapshots - 1) + 1;
    let sampling_samples =
        run_ehrenfest(config, &observable, &hamiltonian, &spec, &fine_sampling, allow_wick)?;
    let sampling_res = sampling_samples
        .iter()
        .map(|s| s.residual())
        .fold(0.0f64, f64::max);

    let fine_spec = GridSpec {
        nq: 2 * spec.nq - 1,
        np: 2 * spec.np - 1,
        ..spec.clone()
    };
    let grid_samples =
        run_ehrenfest(config, &observable, &hamiltonian, &fine_spec, &base_cfg, allow_wick)?;
    let grid_res = grid_samples
        .iter()
        .map(|s| s.residual())
        .fold(0.0f64, f64::max);

    write_json(
        &out.join("ehrenfest_summary.json"),
        &json!({
            "max_residual": max_res,
            "sampling_refined_residual": sampling_res,
            "sampling_refinement_factor": if sampling_res > 0.0 { max_res / sampling_res } else { f64::INFINITY },
            "grid_refined_residual": grid_res,
        }),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

pub enum OracleKind {
    Harmonic,
    Anharmonic,
}

pub fn cmd_oracle(
    kind: OracleKind,
    tau: f64,
    alpha0: Complex64,
    mu: f64,
    spec: &GridSpec,
    out: &Path,
) -> Result<(), CliError> {
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            ensure_dir(dir)?;
        }
    }
    let grid = match kind {
        OracleKind::Harmonic => harmonic_rotation_q(spec, tau, alpha0).map_err(CliError::Lib)?,
        OracleKind::Anharmonic => {
            let n = required_terms(spec, alpha0);
            anharmonic_exact_q(spec, tau, alpha0, mu, n).map_err(CliError::Lib)?
        }
    };
    write_grid_csv(out, &grid)?;
    let sidecar = out.with_extension("json");
    write_json(&sidecar, &sidecar_json(&grid, tau, grid.norm()))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// symbol
// ---------------------------------------------------------------------------

pub fn cmd_symbol(
    op: &str,
    lhs_path: &Path,
    rhs_path: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let lhs: PolynomialSymbol = serde_json::from_str(&fs::read_to_string(lhs_path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", lhs_path.display())))?;
    let rhs: Option<PolynomialSymbol> = match rhs_path {
        Some(p) => Some(
            serde_json::from_str(&fs::read_to_string(p)?)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    let need_rhs = || {
        rhs.clone()
            .ok_or_else(|| CliError::Config(format!("operation '{op}' needs --rhs")))
    };
    let result = match op {
        "star-wick" => star::wick_star(&lhs, &need_rhs()?).map_err(CliError::Lib)?,
        "star-antiwick" => star::antiwick_star(&lhs, &need_rhs()?).map_err(CliError::Lib)?,
        "bracket-wick" => star::wick_bracket(&lhs, &need_rhs()?).map_err(CliError::Lib)?,
        "bracket-antiwick" => star::antiwick_bracket(&lhs, &need_rhs()?).map_err(CliError::Lib)?,
        "berezin-forward" => lhs.berezin_forward().map_err(CliError::Lib)?,
        "berezin-inverse" => lhs.berezin_inverse().map_err(CliError::Lib)?,
        other => {
            return Err(CliError::Config(format!(
                "unknown symbol operation '{other}' (star-wick, star-antiwick, bracket-wick, \
                 bracket-antiwick, berezin-forward, berezin-inverse)"
            )))
        }
    };
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            ensure_dir(dir)?;
        }
    }
    write_json(out, &result)?;
    Ok(())
}
