//! One function per subcommand: parse, run, emit.

use abqsim_core::dynamics::{evolve, expectation_kinetic_momentum, snapshot_filename};
use abqsim_core::experiments::{
    fringe_shift_sweep, fringe_sweep_to_csv, predict_fringe_shift_holonomy, profile_to_csv,
    ring_comparison_to_csv, run_ab_interference, run_static_ring_experiment,
};
use abqsim_core::format::fmt17;
use abqsim_core::gauge::{default_flatness_tol, is_pure_gauge};
use abqsim_core::grid::RingGrid;
use abqsim_core::lattice::{
    build_hamiltonian, build_link_phases, covariant_commutator_check, plaquette_curvature,
};
use abqsim_core::ring::spectrum_flux_sweep;
use abqsim_core::state::{QuantumState, Wavefunction2D};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use std::path::Path;
use std::sync::Arc;

use crate::config::{
    parse_doc, resolved_toml, EvolveDoc, GaugeCheckDoc, InterferenceDoc, RingSpectrumDoc,
};
use crate::error::{CliError, CliResult};
use crate::output::OutputDir;

fn report(entries: Vec<(&str, Value)>) -> Map<String, Value> {
    entries
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

pub fn ring_spectrum(text: &str, out: &Path, seed: u64) -> CliResult<()> {
    let doc: RingSpectrumDoc = parse_doc(text)?;
    let consts = doc.constants.to_core()?;
    if doc.ring.alphas.is_empty() {
        return Err(CliError::Validation("`ring.alphas` must be non-empty".into()));
    }
    if doc.ring.n_min > doc.ring.n_max {
        return Err(CliError::Validation(
            "`ring.n_min` must not exceed `ring.n_max`".into(),
        ));
    }
    let mut dir = OutputDir::create(out)?;
    dir.write("resolved_config.toml", &resolved_toml(&doc)?)?;

    let rows = spectrum_flux_sweep(
        &consts,
        doc.ring.radius,
        &doc.ring.alphas,
        doc.ring.n_min..=doc.ring.n_max,
    )?;
    dir.write("spectrum.csv", &abqsim_core::ring::sweep_to_csv(&rows))?;

    let ground = rows
        .iter()
        .map(|r| r.energy)
        .fold(f64::INFINITY, f64::min);
    let mut rep = report(vec![
        ("levels", json!(rows.len())),
        ("alphas", json!(doc.ring.alphas.len())),
        ("ground_energy", json!(ground)),
    ]);

    if let Some(numerical) = &doc.numerical {
        let grid = Arc::new(RingGrid::new(doc.ring.radius, numerical.grid_points)?);
        let table = run_static_ring_experiment(
            &consts,
            doc.ring.radius,
            &grid,
            &doc.ring.alphas,
            numerical.levels,
        )?;
        dir.write("ring_comparison.csv", &ring_comparison_to_csv(&table))?;
        let max_fd_err = table.iter().map(|r| r.fd_abs_err).fold(0.0, f64::max);
        let max_spectral_err = table
            .iter()
            .map(|r| r.spectral_abs_err)
            .fold(0.0, f64::max);
        rep.insert("max_fd_abs_err".into(), json!(max_fd_err));
        rep.insert("max_spectral_abs_err".into(), json!(max_spectral_err));
        rep.insert(
            "degenerate_rows".into(),
            json!(table.iter().filter(|r| r.degenerate).count()),
        );
    }

    dir.finish("ring-spectrum", seed, rep)?;
    Ok(())
}

pub fn gauge_check(text: &str, out: &Path, seed: u64) -> CliResult<()> {
    let doc: GaugeCheckDoc = parse_doc(text)?;
    let consts = doc.constants.to_core()?;
    let grid = doc.lattice.build()?;
    let potential = doc.potential.build(&grid, &consts)?;

    let tol = if doc.check.tolerance > 0.0 {
        doc.check.tolerance
    } else {
        default_flatness_tol(&grid)
    };
    let flatness = is_pure_gauge(&potential, &consts, tol)?;
    let links = build_link_phases(&potential, &consts)?;
    let curvature = plaquette_curvature(&links);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let commutator =
        covariant_commutator_check(&potential, &consts, doc.check.commutator_trials, &mut rng)?;

    let mut dir = OutputDir::create(out)?;
    dir.write("resolved_config.toml", &resolved_toml(&doc)?)?;
    let winding = (flatness.max_loop_raw / (2.0 * std::f64::consts::PI)).round() as i64;
    let rep = report(vec![
        ("flat", json!(flatness.flat)),
        ("winding", json!(winding)),
        ("max_plaquette", json!(flatness.max_plaquette)),
        ("max_loop_residual", json!(flatness.max_loop_residual)),
        ("flatness_tolerance", json!(tol)),
        ("total_curvature", json!(curvature.total())),
        (
            "commutator_max_phase_deviation",
            json!(commutator.max_phase_deviation),
        ),
    ]);
    dir.finish("gauge-check", seed, rep)?;
    Ok(())
}

pub fn holonomy(text: &str, out: &Path, seed: u64) -> CliResult<()> {
    let doc: InterferenceDoc = parse_doc(text)?;
    let alpha = doc.require_alpha()?;
    let cfg = doc.to_core(alpha)?;
    cfg.validate()?;
    let predicted = predict_fringe_shift_holonomy(&cfg)?;

    let mut dir = OutputDir::create(out)?;
    dir.write("resolved_config.toml", &resolved_toml(&doc)?)?;
    let rep = report(vec![
        ("alpha", json!(alpha)),
        ("predicted_rad", json!(predicted)),
    ]);
    dir.finish("holonomy", seed, rep)?;
    Ok(())
}

pub fn evolve_command(text: &str, out: &Path, seed: u64) -> CliResult<()> {
    let doc: EvolveDoc = parse_doc(text)?;
    let consts = doc.constants.to_core()?;
    let grid = doc.lattice.build()?;
    let mut potential = doc.potential.build(&grid, &consts)?;
    if doc.v_const != 0.0 {
        potential = potential
            .with_scalar_potential(Array2::from_elem((grid.nx(), grid.ny()), doc.v_const))?;
    }
    let hamiltonian = build_hamiltonian(&potential, &consts)?;
    let packet = Wavefunction2D::gaussian(
        grid.clone(),
        doc.packet.center,
        doc.packet.sigma,
        doc.packet.wavevector,
    )?;
    let cfg = doc.run.to_core();
    let record = evolve(&packet, &hamiltonian, &consts, &cfg)?;

    let mut dir = OutputDir::create(out)?;
    dir.write("resolved_config.toml", &resolved_toml(&doc)?)?;
    for snapshot in &record.snapshots {
        let step = ((snapshot.time() - packet.time()) / cfg.dt).round() as usize;
        let mut buf = Vec::new();
        abqsim_core::dynamics::write_snapshot_csv(&mut buf, snapshot)?;
        dir.write(
            &snapshot_filename(step),
            std::str::from_utf8(&buf).expect("ascii csv"),
        )?;
    }

    let links = hamiltonian.links().clone();
    let final_state = record.final_state();
    let momentum = expectation_kinetic_momentum(final_state, &links, &consts)?;
    let rep = report(vec![
        ("steps", json!(record.steps)),
        ("norm_drift", json!(record.norm_drift)),
        ("energy_drift", json!(record.energy_drift)),
        ("max_cg_iterations", json!(record.max_iterations_used)),
        ("final_norm", json!(final_state.norm())),
        ("final_kinetic_momentum", json!(momentum)),
        ("snapshots", json!(record.snapshots.len())),
    ]);
    dir.finish("evolve", seed, rep)?;
    Ok(())
}

pub fn interfere(text: &str, out: &Path, seed: u64) -> CliResult<()> {
    let doc: InterferenceDoc = parse_doc(text)?;
    let alpha = doc.require_alpha()?;
    let cfg = doc.to_core(alpha)?;
    let result = run_ab_interference(&cfg)?;
    let predicted = predict_fringe_shift_holonomy(&cfg)?;

    let mut dir = OutputDir::create(out)?;
    dir.write("resolved_config.toml", &resolved_toml(&doc)?)?;
    dir.write("profile.csv", &profile_to_csv(&cfg, &result.screen_profile))?;
    let rep = report(vec![
        ("alpha", json!(alpha)),
        ("shift_rad", json!(result.fringe_shift_vs_reference)),
        ("predicted_rad", json!(predicted)),
        ("visibility", json!(result.visibility)),
        ("transmitted", json!(result.transmitted)),
        ("norm_drift", json!(result.norm_drift)),
        ("dominant_bin", json!(result.dominant_bin)),
        ("dominant_wavenumber", json!(result.dominant_wavenumber)),
    ]);
    dir.finish("interfere", seed, rep)?;
    Ok(())
}

pub fn sweep(text: &str, out: &Path, seed: u64) -> CliResult<()> {
    let doc: InterferenceDoc = parse_doc(text)?;
    let alphas = doc.require_alphas()?;
    let cfg = doc.to_core(0.0)?;
    let rows = fringe_shift_sweep(&cfg, &alphas)?;

    let mut dir = OutputDir::create(out)?;
    dir.write("resolved_config.toml", &resolved_toml(&doc)?)?;
    dir.write("fringe_sweep.csv", &fringe_sweep_to_csv(&rows))?;
    let mut profile_files = Vec::new();
    for (idx, row) in rows.iter().enumerate() {
        let name = format!("profile_{idx:03}.csv");
        dir.write(&name, &profile_to_csv(&cfg, &row.profile))?;
        profile_files.push(json!({"alpha": row.alpha, "file": name}));
    }
    let max_err = rows
        .iter()
        .map(|r| {
            abqsim_core::gauge::wrap_angle(r.shift_rad - r.predicted_rad).abs()
        })
        .fold(0.0, f64::max);
    let rep = report(vec![
        ("alphas", json!(alphas)),
        ("max_abs_shift_error_rad", json!(max_err)),
        ("profiles", Value::Array(profile_files)),
        (
            "shifts",
            Value::Array(rows.iter().map(|r| json!(fmt17(r.shift_rad))).collect()),
        ),
    ]);
    dir.finish("sweep", seed, rep)?;
    Ok(())
}
