use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use chaos_bounds::estimator::evaluate;
use chaos_bounds::montecarlo::{
    decoupling_experiment, gaussian_tensor, sandwich_experiment, tail_experiment, CprimeChoice,
    DecouplingReport, Sampling, SandwichReport, TailReport, Thresholds,
};
use chaos_bounds::multiindex::enumerate_partitions;
use chaos_bounds::norms::partition_norm;
use chaos_bounds::{
    Breakdown, Error, Law, LawGrid, ModeSubset, NormMethod, NormTable, Partition, Result, Tensor,
};
use serde::Serialize;

use crate::config::{Command, RunConfig};
use crate::Output;

const WARNINGS: u8 = 4;

/// Convergence failures exit with 3 and print the best value reached; every
/// other error is an input problem and exits with 2.
pub fn fail(e: &Error) -> ExitCode {
    if let Error::Convergence {
        context,
        best,
        iterations,
    } = e
    {
        let partial = serde_json::json!({
            "error": "convergence",
            "context": context,
            "best": best,
            "iterations": iterations,
        });
        eprintln!("{partial}");
        eprintln!("error: {e}");
        ExitCode::from(3)
    } else {
        eprintln!("error: {e}");
        ExitCode::from(2)
    }
}

pub fn run(command: Command, cfg: &RunConfig, output: &Output) -> Result<ExitCode> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = output.threads {
        if k == 0 {
            return Err(Error::Input("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(k);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Input(format!("cannot start worker threads: {e}")))?;
    pool.install(|| match command {
        Command::Estimate => estimate(cfg, output),
        Command::Norms => norms(cfg, output),
        Command::VerifyMoments => verify_moments(cfg, output),
        Command::VerifyDecoupling => verify_decoupling(cfg, output),
        Command::VerifyTail => verify_tail(cfg, output),
    })
}

/// Read or generate the tensor. `--symmetrize` applies to either source;
/// random tensors are also symmetrized when the command samples the chaos in
/// one sequence.
fn load_tensor(cfg: &RunConfig, one_sequence: bool) -> Result<Tensor> {
    let (t, random) = match (&cfg.tensor, cfg.random) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Input(format!("cannot read tensor {path}: {e}")))?;
            let t = serde_json::from_str::<Tensor>(&text)
                .map_err(|e| Error::Input(format!("tensor {path}: {e}")))?;
            (t, false)
        }
        (None, Some(spec)) => (gaussian_tensor(spec.d, spec.n, spec.seed)?, true),
        (None, None) => return Err(Error::Input("no tensor given".into())),
    };
    Ok(
        if cfg.symmetrize == Some(true) || (random && one_sequence) {
            t.symmetrize().zero_generalized_diagonal()
        } else {
            t
        },
    )
}

fn law(cfg: &RunConfig) -> Result<Law> {
    cfg.law_descriptor().resolve()
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Input(format!("json output: {e}")))?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Error::Input(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Input(format!("stdout: {e}"))),
    }
}

fn emit_csv(path: Option<&Path>, write: impl FnOnce(std::fs::File) -> Result<()>) -> Result<()> {
    if let Some(p) = path {
        let f = std::fs::File::create(p)
            .map_err(|e| Error::Input(format!("cannot write {}: {e}", p.display())))?;
        write(f)?;
    }
    Ok(())
}

fn status(warn: bool) -> ExitCode {
    if warn {
        ExitCode::from(WARNINGS)
    } else {
        ExitCode::SUCCESS
    }
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    config: &'a RunConfig,
    breakdowns: Vec<Breakdown>,
    unconverged_norms: usize,
}

fn estimate(cfg: &RunConfig, output: &Output) -> Result<ExitCode> {
    let t = load_tensor(cfg, false)?;
    let law = law(cfg)?;
    let laws = LawGrid::broadcast(law, t.order(), t.dim());
    let form = cfg.form.expect("resolved");
    let table = NormTable::compute(&t, &cfg.norm_config())?;
    let breakdowns = cfg
        .p
        .as_deref()
        .unwrap_or_default()
        .iter()
        .map(|&p| evaluate(form, &table, &t, &laws, p))
        .collect::<Result<Vec<Breakdown>>>()?;
    for b in &breakdowns {
        eprintln!("p = {}  total = {:.6e}", b.p, b.total);
        for term in &b.terms {
            eprintln!(
                "    I = {:<10} J = {:<16} {:>12.5e} x {:>12.5e} = {:>12.5e}",
                term.subset.to_string(),
                term.partition.to_string(),
                term.prefactor,
                term.inner_value,
                term.contribution
            );
        }
    }
    let unconverged = table.unconverged();
    if unconverged > 0 {
        eprintln!("warning: {unconverged} iterative norms hit the iteration cap");
    }
    emit(
        &EstimateOutput {
            config: cfg,
            breakdowns,
            unconverged_norms: unconverged,
        },
        output.out.as_deref(),
    )?;
    Ok(status(unconverged > 0))
}

#[derive(Serialize)]
struct NormRow {
    #[serde(rename = "J")]
    partition: Partition,
    value: f64,
    method: NormMethod,
    converged: bool,
    iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    discretization_error: Option<f64>,
}

#[derive(Serialize)]
struct NormsOutput<'a> {
    config: &'a RunConfig,
    norms: Vec<NormRow>,
}

fn norms(cfg: &RunConfig, output: &Output) -> Result<ExitCode> {
    let t = load_tensor(cfg, false)?;
    let partitions = match &cfg.partition {
        Some(spec) => vec![Partition::parse(spec, t.order())?],
        None => enumerate_partitions(&ModeSubset::full(t.order()))?,
    };
    let norm_cfg = cfg.norm_config();
    let mut rows = Vec::new();
    for j in partitions {
        let r = partition_norm(&t, &j, &norm_cfg).map_err(|e| e.within(&format!("J={j}")))?;
        eprintln!(
            "{:<20} {:>22.15e}  {:?}{}",
            j.to_string(),
            r.value,
            r.method,
            if r.converged || t.is_zero() {
                ""
            } else {
                "  (not converged)"
            }
        );
        rows.push(NormRow {
            partition: j,
            value: r.value,
            method: r.method,
            converged: r.converged,
            iterations: r.iterations,
            discretization_error: r.discretization_error,
        });
    }
    let warn = !t.is_zero() && rows.iter().any(|r| !r.converged);
    emit(
        &NormsOutput {
            config: cfg,
            norms: rows,
        },
        output.out.as_deref(),
    )?;
    Ok(status(warn))
}

#[derive(Serialize)]
struct ReportOutput<'a, R> {
    config: &'a RunConfig,
    report: R,
}

fn print_warnings(w: &[String]) {
    for line in w {
        eprintln!("warning: {line}");
    }
}

fn verify_moments(cfg: &RunConfig, output: &Output) -> Result<ExitCode> {
    let undecoupled = cfg.undecoupled == Some(true);
    let t = load_tensor(cfg, undecoupled)?;
    let laws = LawGrid::broadcast(law(cfg)?, t.order(), t.dim());
    let sampling = if undecoupled {
        Sampling::Undecoupled
    } else {
        Sampling::Decoupled
    };
    let report: SandwichReport = sandwich_experiment(
        &t,
        &laws,
        cfg.p.as_deref().unwrap_or_default(),
        &cfg.sample_config(),
        cfg.form.expect("resolved"),
        sampling,
        &cfg.norm_config(),
    )?;
    eprintln!(
        "{:>8} {:>14} {:>14} {:>12} {:>10} {:>10}",
        "p", "estimate", "empirical", "std err", "ratio", "max share"
    );
    for c in &report.cells {
        eprintln!(
            "{:>8} {:>14.6e} {:>14.6e} {:>12.3e} {:>10} {:>10.4}{}",
            c.p,
            c.estimate,
            c.empirical.value,
            c.empirical.value_std_error,
            c.ratio.map_or("-".to_string(), |r| format!("{r:.5}")),
            c.empirical.max_share,
            if c.empirical.unstable {
                "  unstable"
            } else {
                ""
            }
        );
    }
    if let Some(s) = report.spread {
        eprintln!("spread (max/min ratio over stable cells): {s:.4}");
    }
    print_warnings(&report.warnings);
    emit_csv(output.csv.as_deref(), |f| report.write_csv(f))?;
    let warn = report.has_warnings();
    emit(
        &ReportOutput {
            config: cfg,
            report,
        },
        output.out.as_deref(),
    )?;
    Ok(status(warn))
}

fn verify_decoupling(cfg: &RunConfig, output: &Output) -> Result<ExitCode> {
    let t = load_tensor(cfg, true)?;
    let report: DecouplingReport = decoupling_experiment(
        &t,
        law(cfg)?,
        cfg.p.as_deref().unwrap_or_default(),
        &cfg.sample_config(),
    )?;
    eprintln!(
        "{:>8} {:>14} {:>14} {:>10} {:>10}",
        "p", "one sequence", "decoupled", "ratio", "std err"
    );
    for c in &report.cells {
        eprintln!(
            "{:>8} {:>14.6e} {:>14.6e} {:>10} {:>10}",
            c.p,
            c.undecoupled.value,
            c.decoupled.value,
            c.ratio.map_or("-".to_string(), |r| format!("{r:.5}")),
            c.ratio_std_error
                .map_or("-".to_string(), |r| format!("{r:.2e}")),
        );
    }
    eprintln!("d! = {}", report.d_factorial);
    print_warnings(&report.warnings);
    emit_csv(output.csv.as_deref(), |f| report.write_csv(f))?;
    let warn = report.has_warnings();
    emit(
        &ReportOutput {
            config: cfg,
            report,
        },
        output.out.as_deref(),
    )?;
    Ok(status(warn))
}

fn verify_tail(cfg: &RunConfig, output: &Output) -> Result<ExitCode> {
    let t = load_tensor(cfg, false)?;
    let thresholds = match &cfg.thresholds {
        Some(v) => Thresholds::Given(v.clone()),
        None => Thresholds::Auto,
    };
    let cprime = if cfg.calibrate == Some(true) {
        CprimeChoice::Calibrate
    } else {
        CprimeChoice::Fixed(cfg.cprime.unwrap_or(1.0))
    };
    let report: TailReport = tail_experiment(
        &t,
        law(cfg)?,
        &thresholds,
        &cfg.sample_config(),
        cfg.a,
        cprime,
        &cfg.norm_config(),
    )?;
    eprintln!(
        "{:>14} {:>12} {:>10} {:>12} {:>7}",
        "t", "empirical", "count", "bound", "stable"
    );
    for r in &report.rows {
        eprintln!(
            "{:>14.6e} {:>12.5e} {:>10} {:>12.5e} {:>7}",
            r.t, r.empirical, r.exceedances, r.bound, r.stable
        );
    }
    eprintln!(
        "Cprime = {:.6e}{}, dominates = {}",
        report.cprime,
        if report.calibrated {
            " (calibrated)"
        } else {
            ""
        },
        report.dominates
    );
    match (report.fitted_slope, report.min_exponent) {
        (Some(s), Some(e)) => eprintln!("fitted slope {s:.4} vs minimal exponent {e:.4}"),
        _ => eprintln!(
            "slope: {}",
            report.slope_note.as_deref().unwrap_or("not available")
        ),
    }
    print_warnings(&report.warnings);
    emit_csv(output.csv.as_deref(), |f| report.write_csv(f))?;
    let warn = report.has_warnings();
    emit(
        &ReportOutput {
            config: cfg,
            report,
        },
        output.out.as_deref(),
    )?;
    Ok(status(warn))
}
