//! One driver per subcommand. Each returns the summary line and writes its
//! reports through [`Outputs`].

use serde::Serialize;
use serde_json::json;

use super::config::{CommandName, RunConfig};
use super::output::{float, Outputs, Table};
use super::CliError;
use crate::analysis::{
    coherence_scan, entanglement_report, medium_sweep, protocol_engine, purity_law_sweep, real_input, theta_grid, unit_grid,
    MediumSweepConfig,
};
use crate::chain::ModelKind;
use crate::dense::{
    check_swap_identities_with, check_triplet_condition, check_unsigned_odd_xy, search_triplets, select_convention, DenseEngine,
    Triplet, FROZEN_CONVENTION,
};
use crate::fermion::FermionEngine;
use crate::protocol::{MediumSpec, ProtocolEngine};

pub fn execute(cfg: &RunConfig, out: &mut Outputs) -> Result<String, CliError> {
    match cfg.command {
        CommandName::VerifyIdentities => verify_identities(cfg, out),
        CommandName::Run => run(cfg, out),
        CommandName::SweepMedium => sweep_medium(cfg, out),
        CommandName::P00Sweep => p00_sweep(cfg, out),
        CommandName::Homogeneous => homogeneous(cfg, out),
        CommandName::Entangle => entangle(cfg, out),
        CommandName::TripletCheck => triplet_check(cfg, out),
    }
}

fn medium_or(cfg: &RunConfig, fallback: impl FnOnce() -> MediumSpec) -> MediumSpec {
    cfg.medium.clone().unwrap_or_else(fallback)
}

fn failures<T: Serialize>(cfg: &RunConfig, summary: String, items: &[T]) -> CliError {
    let doc = json!({ "command": cfg.command.as_str(), "threshold": cfg.threshold, "failures": items });
    CliError::Failed { summary, details: doc.to_string() }
}

fn verify_identities(cfg: &RunConfig, out: &mut Outputs) -> Result<String, CliError> {
    let engine = DenseEngine::new(cfg.chain)?;
    let selection = select_convention()?;
    let reports = check_swap_identities_with(&engine, FROZEN_CONVENTION)?;
    let mut table = Table::new(&["model", "n_sites", "site", "mirror_site", "source", "target", "residual", "convention", "passed"]);
    for r in &reports {
        table.push(vec![
            r.model.label().into(),
            r.n_sites.to_string(),
            r.site.to_string(),
            r.mirror_site.to_string(),
            r.source.clone(),
            r.target.clone(),
            float(r.residual),
            r.convention.label().into(),
            (r.residual < cfg.threshold).to_string(),
        ]);
    }
    out.csv(".csv", &table)?;
    let worst = reports.iter().map(|r| r.residual).fold(0.0, f64::max);
    let mut summary = format!(
        "verify-identities: {} {} checks at N={}, max residual {:.3e}, convention {} (other convention {})",
        reports.len(),
        cfg.chain.model(),
        cfg.chain.n_sites(),
        worst,
        FROZEN_CONVENTION,
        if selection.is_ambiguous() { "also passes" } else { "fails" },
    );
    if cfg.chain.model() == ModelKind::XxEngineered && cfg.chain.n_sites() % 2 == 1 {
        let unsigned = check_unsigned_odd_xy(&cfg.chain)?;
        let r = unsigned.iter().map(|r| r.residual).fold(0.0, f64::max);
        summary.push_str(&format!("; XY with target +XY has residual {r:.3e}, target -XY used"));
    }
    let bad: Vec<_> = reports.iter().filter(|r| !(r.residual < cfg.threshold)).collect();
    if !bad.is_empty() {
        return Err(failures(cfg, format!("{summary}; {} above threshold {:e}", bad.len(), cfg.threshold), &bad));
    }
    Ok(summary)
}

fn engine_for(cfg: &RunConfig) -> Result<ProtocolEngine, CliError> {
    Ok(match cfg.time {
        Some(t) => ProtocolEngine::from_engine(DenseEngine::new(cfg.chain)?, t)?,
        None => protocol_engine(&cfg.chain)?,
    })
}

fn run(cfg: &RunConfig, out: &mut Outputs) -> Result<String, CliError> {
    let engine = engine_for(cfg)?;
    let input = cfg.input.state()?;
    let medium = medium_or(cfg, || MediumSpec::MaximallyMixed);
    let run = engine.run(&input, &medium, cfg.outcomes.last.0, cfg.outcomes.first.0, cfg.seed)?;
    out.json(".json", &run.record()?)?;
    Ok(format!(
        "run: {} N={} outcomes ({}, {}) product {} correction {} fidelity {:.12}",
        cfg.chain.model(),
        cfg.chain.n_sites(),
        run.n_projection_outcome,
        run.first_spin_outcome,
        run.outcome_product,
        run.correction_applied,
        run.fidelity
    ))
}

fn sweep_medium(cfg: &RunConfig, out: &mut Outputs) -> Result<String, CliError> {
    let sweep = MediumSweepConfig {
        model: cfg.chain.model(),
        n_sites: cfg.sweep.n_sites.clone(),
        j_scale: cfg.chain.j_scale(),
        end_coupling_ratio: cfg.chain.end_coupling_ratio(),
        media: cfg.sweep.media.clone(),
        pure_inputs: cfg.sweep.pure_inputs,
        mixed_inputs: cfg.sweep.mixed_inputs,
        seed: cfg.seed,
    };
    let cells = medium_sweep(&sweep)?;
    let mut table =
        Table::new(&["model", "n_sites", "medium", "evolution_time", "runs", "min_fidelity", "max_fidelity", "mean_fidelity", "product_spread"]);
    for c in &cells {
        table.push(vec![
            c.model.label().into(),
            c.n_sites.to_string(),
            c.medium.clone(),
            float(c.evolution_time),
            c.runs.to_string(),
            float(c.min_fidelity),
            float(c.max_fidelity),
            float(c.mean_fidelity),
            float(c.product_spread),
        ]);
    }
    out.csv(".csv", &table)?;
    let min = cells.iter().map(|c| c.min_fidelity).fold(f64::INFINITY, f64::min);
    let runs: usize = cells.iter().map(|c| c.runs).sum();
    Ok(format!("sweep-medium: {} cells, {runs} runs, min fidelity {min:.12}", cells.len()))
}

fn p00_sweep(cfg: &RunConfig, out: &mut Outputs) -> Result<String, CliError> {
    let report = purity_law_sweep(&cfg.chain, &theta_grid(cfg.grid.theta_points), &unit_grid(cfg.grid.p00_points))?;
    let mut table = Table::new(&["input", "x_expectation", "p00", "simulated", "outcome_spread", "linear", "squared"]);
    for r in &report.rows {
        table.push(vec![
            r.input.clone(),
            float(r.x_expectation),
            float(r.p00),
            float(r.simulated),
            float(r.outcome_spread),
            float(r.linear),
            float(r.squared),
        ]);
    }
    out.csv(".csv", &table)?;
    let probe = real_input(std::f64::consts::PI / 8.0);
    let coherence = coherence_scan(&cfg.chain, &probe, 0.5, 0.0, cfg.grid.gamma_points)?;
    let spread = coherence.iter().cloned().fold(f64::MIN, f64::max) - coherence.iter().cloned().fold(f64::MAX, f64::min);
    let summary = json!({
        "n_sites": report.n_sites,
        "winner": report.winner,
        "deviation_linear": report.deviation_linear,
        "deviation_squared": report.deviation_squared,
        "discrimination": report.discrimination,
        "coherence_probe": { "theta": std::f64::consts::PI / 8.0, "p00": 0.5, "fidelities": coherence, "spread": spread },
    });
    out.json("_summary.json", &summary)?;
    Ok(format!(
        "p00-sweep: winner {:?}, deviations linear {:.3e} squared {:.3e}, coherence spread {:.3e}",
        report.winner, report.deviation_linear, report.deviation_squared, spread
    ))
}

fn homogeneous(cfg: &RunConfig, out: &mut Outputs) -> Result<String, CliError> {
    let engine = FermionEngine::new(&cfg.chain)?;
    let t_max = cfg.grid.t_max / cfg.chain.j_scale();
    let opt = engine.optimize(t_max, cfg.grid.time_points)?;
    let mut table = Table::new(&["t", "abs_f", "avg_fidelity_estimate"]);
    for k in 0..opt.curve.times.len() {
        table.push(vec![float(opt.curve.times[k]), float(opt.curve.amplitudes[k]), float(opt.curve.avg_fidelities[k])]);
    }
    out.csv(".csv", &table)?;
    let summary = json!({
        "model": cfg.chain.model(),
        "n_sites": cfg.chain.n_sites(),
        "j_scale": cfg.chain.j_scale(),
        "end_coupling_ratio": cfg.chain.end_coupling_ratio(),
        "t_max": t_max,
        "grid_points": cfg.grid.time_points,
        "t_opt": opt.t_opt,
        "abs_f_max": opt.abs_f_max,
        "avg_fidelity_estimate_max": opt.avg_fidelity_estimate,
        "estimator": "1/2 + |f|/3 + |f|^2/6",
        "reference_bound": 0.87,
        "meets_reference_bound": opt.avg_fidelity_estimate >= 0.87,
    });
    out.json("_summary.json", &summary)?;
    Ok(format!(
        "homogeneous: N={} t_opt {:.6} |f|max {:.6} average fidelity estimate {:.6}",
        cfg.chain.n_sites(),
        opt.t_opt,
        opt.abs_f_max,
        opt.avg_fidelity_estimate
    ))
}

fn entangle(cfg: &RunConfig, out: &mut Outputs) -> Result<String, CliError> {
    let input = cfg.input.state()?;
    let ket = input.pure_ket().ok_or_else(|| CliError::Config("entangle needs a pure input".into()))?;
    let medium = medium_or(cfg, || MediumSpec::ProductZ { bits: vec![0; cfg.chain.medium_len()] });
    let report = entanglement_report(&cfg.chain, &ket, &medium)?;
    out.json(".json", &report)?;
    Ok(format!(
        "entangle: N={} <X> {:.6} first-spin entropy {:.6} last-spin entropy {:.6}",
        report.n_sites, report.x_expectation, report.first_spin_entropy, report.last_spin_entropy
    ))
}

fn triplet_check(cfg: &RunConfig, out: &mut Outputs) -> Result<String, CliError> {
    let engine = DenseEngine::new(cfg.chain)?;
    let t = match cfg.time {
        Some(t) => t,
        None => engine.critical_time()?,
    };
    if let Some(tc) = &cfg.triplet {
        let triplet = Triplet { b: tc.b, c: tc.c, d: tc.d, exponents: tc.exponents };
        let residuals = check_triplet_condition(&engine, t, &triplet)?;
        let mut table = Table::new(&["observable", "site", "residual", "passed"]);
        for r in &residuals {
            table.push(vec![r.observable.symbol().to_string(), r.site.to_string(), float(r.residual), (r.residual < cfg.threshold).to_string()]);
        }
        out.csv(".csv", &table)?;
        let worst = residuals.iter().map(|r| r.residual).fold(0.0, f64::max);
        let summary = format!("triplet-check: {} residuals, max {worst:.3e}", residuals.len());
        let bad: Vec<_> = residuals.iter().filter(|r| !(r.residual < cfg.threshold)).collect();
        if !bad.is_empty() {
            return Err(failures(cfg, summary, &bad));
        }
        return Ok(summary);
    }
    let found = search_triplets(&engine, t)?;
    let mut table = Table::new(&["b", "c", "d", "exponents_x", "exponents_y", "exponents_z"]);
    let fmt = |v: &Vec<(u8, u8)>| v.iter().map(|(j, k)| format!("{j}{k}")).collect::<Vec<_>>().join(";");
    for s in &found {
        table.push(vec![
            s.b.symbol().to_string(),
            s.c.label().to_string(),
            s.d.symbol().to_string(),
            fmt(&s.admissible[0]),
            fmt(&s.admissible[1]),
            fmt(&s.admissible[2]),
        ]);
    }
    out.csv(".csv", &table)?;
    Ok(format!("triplet-check: {} N={} t={t:.12}: {} triplets found", cfg.chain.model(), cfg.chain.n_sites(), found.len()))
}
