//! The five subcommands. Each returns its exit code: 0 when every hard row passes, 1 otherwise.
use crate::config::{CliError, CliResult, RunConfig};
use convint::experiment::{Checkpoints, Toolkit};
use convint::jets::{jet_report, JetReport, JetReportOptions};
use convint::params::check_admissible;
use convint::verify::consistency::consistency_experiment;
use convint::verify::ledger::{DiagnosticLedger, Flag, LedgerRow, Relation};
use serde::Serialize;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

/// Creates the directory and checks that it accepts files.
pub fn writable_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    let probe = dir.join(".write_probe");
    std::fs::write(&probe, b"")
        .map_err(|e| CliError::Config(format!("{} is not writable: {e}", dir.display())))?;
    std::fs::remove_file(probe)?;
    Ok(())
}

fn write_json(path: &Path, v: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn write_ledger(dir: &Path, stem: &str, ledger: &DiagnosticLedger) -> CliResult<()> {
    ledger.write_csv(BufWriter::new(File::create(
        dir.join(format!("{stem}.csv")),
    )?))?;
    write_json(&dir.join(format!("{stem}.json")), &ledger.to_json())
}

fn print_ledger(ledger: &DiagnosticLedger) {
    for r in &ledger.rows {
        let level = r.level.map(|l| l.to_string()).unwrap_or_else(|| "-".into());
        let flag = match r.flag {
            Flag::Hard => "hard",
            Flag::Soft => "soft",
            Flag::Info => "info",
        };
        let verdict = if r.pass { "ok" } else { "FAIL" };
        println!(
            "{level:>3} {:<26} {:>12.4e} {:>12.4e} {flag:<4} {verdict}",
            r.id, r.measured, r.reference
        );
    }
}

fn finish(ledger: &DiagnosticLedger) -> i32 {
    let hard = ledger.hard_failures();
    for r in &hard {
        eprintln!(
            "hard failure: level {:?} {} measured {:e} reference {:e} {}",
            r.level, r.id, r.measured, r.reference, r.note
        );
    }
    i32::from(!hard.is_empty())
}

/// Admissibility of the exact-schedule tuple, every constraint as a hard row.
pub fn params_check(cfg: &RunConfig, out: &Path) -> CliResult<i32> {
    let (schedule, q_check) = cfg.exact_schedule()?;
    let adm = check_admissible(&schedule, q_check)?;
    let mut ledger = DiagnosticLedger::default();
    for r in &adm.rows {
        let mut row = LedgerRow::new(
            r.level.map(|l| l as usize),
            &r.id,
            r.lhs,
            r.rhs,
            Relation::AtMost,
            Flag::Hard,
        );
        row.pass = r.pass;
        row.margin = r.margin;
        row.note = r.description.clone();
        ledger.push(row);
    }
    print_ledger(&ledger);
    writable_dir(out)?;
    write_ledger(out, "params_ledger", &ledger)?;
    write_json(&out.join("params_report.json"), &adm)?;
    Ok(finish(&ledger))
}

fn jet_rows(rep: &JetReport) -> DiagnosticLedger {
    let mut l = DiagnosticLedger::default();
    let hard =
        |id: &str, m: f64, r: f64| LedgerRow::new(None, id, m, r, Relation::AtMost, Flag::Hard);
    let norm = rep
        .norms
        .iter()
        .map(|n| (n.l2 - 1.0).abs())
        .fold(0.0, f64::max);
    l.push(hard("jet_normalization", norm, 1e-6));
    l.push(hard(
        "jet_divergence",
        rep.identities
            .iter()
            .map(|i| i.div_free)
            .fold(0.0, f64::max),
        1e-8,
    ));
    l.push(hard(
        "jet_potential",
        rep.identities
            .iter()
            .map(|i| i.curl_curl)
            .fold(0.0, f64::max),
        1e-8,
    ));
    let overlap = rep
        .supports
        .iter()
        .map(|s| s.max_overlap)
        .max()
        .unwrap_or(0);
    l.push(hard("jet_disjoint_supports", overlap as f64, 1.0));
    let osc = rep
        .oscillation
        .iter()
        .map(|o| o.relative_residual)
        .fold(0.0, f64::max);
    l.push(
        LedgerRow::new(
            None,
            "oscillation_identity",
            osc,
            1e-4,
            Relation::AtMost,
            Flag::Soft,
        )
        .note("smallest dt of the sweep"),
    );
    let order = rep
        .oscillation_order
        .iter()
        .map(|o| (o - 2.0).abs())
        .fold(0.0, f64::max);
    l.push(LedgerRow::new(
        None,
        "oscillation_order",
        2.0 + order,
        2.0,
        Relation::within(0.3),
        Flag::Soft,
    ));
    for s in &rep.scaling {
        let mut r = LedgerRow::new(
            None,
            &format!("scaling_{:?}_p{}", s.quantity, s.p).to_lowercase(),
            s.slope,
            s.predicted,
            Relation::within(0.1),
            Flag::Soft,
        );
        r.note = format!("k = {:?}", s.ks);
        l.push(r);
    }
    l
}

/// Jet identity, support, oscillation and scaling battery for `jets.k`.
pub fn jets(cfg: &RunConfig, out: &Path) -> CliResult<i32> {
    let kit = Toolkit::new(cfg.run.quadrature_nodes)?;
    let j = &cfg.jets;
    let opts = JetReportOptions {
        box_nodes: j.box_nodes,
        scan_grid: j.scan_grid,
        near_points: j.near_points,
        times: j.times.clone(),
        dts: j.dts.clone(),
        scaling_ks: j.scaling_ks.clone(),
        seed: cfg.noise.seed,
    };
    let rep = jet_report(&kit.profiles, &kit.frame, j.k, &opts)?;
    let ledger = jet_rows(&rep);
    print_ledger(&ledger);
    writable_dir(out)?;
    write_ledger(out, "jets_ledger", &ledger)?;
    write_json(&out.join("jets_report.json"), &rep)?;
    Ok(finish(&ledger))
}

fn checkpoint_dir(cfg: &RunConfig, out: &Path) -> PathBuf {
    if cfg.run.checkpoints.is_absolute() {
        cfg.run.checkpoints.clone()
    } else {
        out.join(&cfg.run.checkpoints)
    }
}

/// Runs levels 1..=q_max+1 and writes the ledger, the report and field checkpoints.
pub fn iterate(cfg: &RunConfig, out: &Path) -> CliResult<i32> {
    let spec = cfg.experiment()?;
    let energy = cfg.energy_profile()?;
    writable_dir(out)?;
    let ckpt = checkpoint_dir(cfg, out);
    writable_dir(&ckpt)?;
    let kit = Toolkit::new(spec.quadrature_nodes)?;
    let outcome = spec.run(&kit, &spec.noise()?, &energy, &mut [])?;
    let (ledger, report) = outcome.ledger()?;
    print_ledger(&ledger);
    write_ledger(out, "ledger", &ledger)?;
    write_json(&out.join("report.json"), &report)?;
    outcome.write_checkpoints(&ckpt)?;
    Ok(finish(&ledger))
}

#[derive(Serialize)]
struct VerifyReport {
    weak: Option<convint::verify::weak::WeakReport>,
    convergence: Option<convint::verify::convergence::ConvergenceReport>,
    hard_failures: usize,
    soft_failures: usize,
}

/// Weak-form residual and convergence report from stored checkpoints.
pub fn verify(cfg: &RunConfig, out: &Path) -> CliResult<i32> {
    let spec = cfg.experiment()?;
    let energy = cfg.energy_profile()?;
    let ck = Checkpoints::load(&checkpoint_dir(cfg, out), &spec)?;
    let (ledger, weak, convergence) = ck.verify(&spec, &energy, &spec.noise()?)?;
    print_ledger(&ledger);
    writable_dir(out)?;
    write_ledger(out, "verify_ledger", &ledger)?;
    let rep = VerifyReport {
        weak,
        convergence,
        hard_failures: ledger.hard_failures().len(),
        soft_failures: ledger.soft_failures().len(),
    };
    write_json(&out.join("verify_report.json"), &rep)?;
    Ok(finish(&ledger))
}

/// Two energies agreeing up to t_agree: iterates must match bitwise up to t_agree ∧ τ.
pub fn consistency(cfg: &RunConfig, out: &Path) -> CliResult<i32> {
    let spec = cfg.experiment()?;
    let e1 = cfg.energy_profile()?;
    let (e2, block) = cfg.second_energy()?;
    let kit = Toolkit::new(spec.quadrature_nodes)?;
    let seeds = if block.seeds.is_empty() {
        vec![spec.seed]
    } else {
        block.seeds.clone()
    };
    let rep = consistency_experiment(&spec, &kit, &e1, &e2, block.t_agree, &seeds)?;
    let mut ledger = DiagnosticLedger::default();
    for run in &rep.runs {
        for l in &run.levels {
            let mut r = LedgerRow::new(
                Some(l.q),
                "consistency",
                l.mismatches as f64,
                0.0,
                Relation::AtMost,
                Flag::Hard,
            )
            .note(format!(
                "seed {}, {} indices up to t = {:.6}",
                run.seed, l.compared, run.cutoff
            ));
            if l.compared == 0 {
                r.pass = false;
                r.note.push_str("; nothing compared");
            }
            ledger.push(r);
        }
    }
    print_ledger(&ledger);
    writable_dir(out)?;
    write_ledger(out, "consistency_ledger", &ledger)?;
    write_json(&out.join("consistency_report.json"), &rep)?;
    Ok(finish(&ledger))
}
