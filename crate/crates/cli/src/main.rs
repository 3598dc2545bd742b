//! `chaos-bounds`: moment and tail estimates for random multilinear chaoses,
//! and Monte Carlo checks of those estimates.
//!
//! Exit codes: 0 success, 2 input error, 3 convergence failure, 4 completed
//! with warnings.

// `!(x >= lo)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use chaos_bounds::laws::LawFamily;
use chaos_bounds::EstimateForm;
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{Command, RandomSpec, RunConfig};

#[derive(Parser)]
#[command(name = "chaos-bounds", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a deterministic moment estimate for each p.
    Estimate {
        #[command(flatten)]
        tensor: TensorArgs,
        #[command(flatten)]
        law: LawArgs,
        #[command(flatten)]
        norms: NormArgs,
        #[command(flatten)]
        moments: MomentArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Print partition norms of a tensor.
    Norms {
        #[command(flatten)]
        tensor: TensorArgs,
        /// Partition of the modes, blocks separated by '|', e.g. "1,3|2".
        #[arg(conflicts_with = "all")]
        partition: Option<String>,
        /// Every partition of {1..d}.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        norms: NormArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Compare empirical moments with a deterministic estimate.
    VerifyMoments {
        #[command(flatten)]
        tensor: TensorArgs,
        /// Symmetrize the tensor and zero its generalized diagonal.
        #[arg(long)]
        symmetrize: bool,
        #[command(flatten)]
        law: LawArgs,
        #[command(flatten)]
        norms: NormArgs,
        #[command(flatten)]
        moments: MomentArgs,
        #[command(flatten)]
        sampling: SampleArgs,
        /// Sample the chaos in a single sequence instead of the decoupled one.
        #[arg(long)]
        undecoupled: bool,
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        csv: CsvArgs,
    },
    /// Compare moments of a chaos with those of its decoupled version.
    VerifyDecoupling {
        #[command(flatten)]
        tensor: TensorArgs,
        #[command(flatten)]
        law: LawArgs,
        /// Moment orders, comma separated.
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
        #[command(flatten)]
        sampling: SampleArgs,
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        csv: CsvArgs,
    },
    /// Compare the empirical tail with the Weibull-type tail bound.
    VerifyTail {
        #[command(flatten)]
        tensor: TensorArgs,
        #[command(flatten)]
        law: LawArgs,
        #[command(flatten)]
        norms: NormArgs,
        #[command(flatten)]
        sampling: SampleArgs,
        /// Thresholds, comma separated and increasing.
        #[arg(long, value_delimiter = ',', conflicts_with = "auto")]
        thresholds: Option<Vec<f64>>,
        /// Thresholds from a pilot run (the default).
        #[arg(long)]
        auto: bool,
        /// Search for the smallest constant that makes the bound dominate.
        #[arg(long)]
        calibrate: bool,
        /// Constant in front of the norms in the bound.
        #[arg(long = "Cprime")]
        cprime: Option<f64>,
        /// Moment growth constant: ||X||_p <= A p^{1/r}.
        #[arg(long = "A")]
        a: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        csv: CsvArgs,
    },
}

#[derive(Args)]
struct TensorArgs {
    /// Tensor JSON file: {"d": .., "n": .., "entries": [..]} in row-major order.
    #[arg(long)]
    tensor: Option<PathBuf>,
    /// Gaussian-entry tensor "d,n,seed".
    #[arg(long, conflicts_with = "tensor")]
    random: Option<RandomSpec>,
}

#[derive(Args)]
struct LawArgs {
    #[arg(long, value_enum)]
    law: Option<LawArg>,
    /// Weibull shape in (0, 1].
    #[arg(long)]
    r: Option<f64>,
    /// Rescale the law to unit variance.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct NormArgs {
    /// Random restarts for the power iteration.
    #[arg(long)]
    restarts: Option<usize>,
    /// Relative tolerance of the power iteration.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct MomentArgs {
    /// Moment orders, comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    form: Option<FormArg>,
}

#[derive(Args)]
struct SampleArgs {
    /// Monte Carlo sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Samples per parallel task.
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args)]
struct OutArgs {
    /// Seed for tensors, restarts and sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "CHAOS_BOUNDS_THREADS")]
    threads: Option<usize>,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON run configuration; flags take precedence. A previous output file
    /// is accepted and its echoed config reused.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CsvArgs {
    /// Also write the result table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LawArg {
    Exponential,
    Weibull,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    #[value(name = "A")]
    A,
    #[value(name = "B")]
    B,
    Max,
    Gaussian,
    D2,
    Weibull,
    WeibullMax,
    Hmso,
}

impl From<LawArg> for LawFamily {
    fn from(l: LawArg) -> Self {
        match l {
            LawArg::Exponential => LawFamily::Exponential,
            LawArg::Weibull => LawFamily::Weibull,
            LawArg::Gaussian => LawFamily::Gaussian,
        }
    }
}

impl From<FormArg> for EstimateForm {
    fn from(f: FormArg) -> Self {
        match f {
            FormArg::A => EstimateForm::A,
            FormArg::B => EstimateForm::B,
            FormArg::Max => EstimateForm::Max,
            FormArg::Gaussian => EstimateForm::Gaussian,
            FormArg::D2 => EstimateForm::D2,
            FormArg::Weibull => EstimateForm::Weibull,
            FormArg::WeibullMax => EstimateForm::WeibullMax,
            FormArg::Hmso => EstimateForm::Hmso,
        }
    }
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

impl TensorArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.tensor = self.tensor.as_ref().map(|p| p.display().to_string());
        c.random = self.random;
    }
}

impl LawArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.law = self.law.map(Into::into);
        c.r = self.r;
        c.normalize = flag(self.normalize);
    }
}

impl NormArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.restarts = self.restarts;
        c.tol = self.tol;
    }
}

impl SampleArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.samples = self.samples;
        c.batch_size = self.batch_size;
    }
}

/// Where results go and how many threads produce them. Not part of the
/// echoed configuration.
pub struct Output {
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub threads: Option<usize>,
}

fn parse(cli: Cli) -> (Command, RunConfig, OutArgs, Option<PathBuf>) {
    let mut c = RunConfig::default();
    match cli.command {
        Cmd::Estimate {
            tensor,
            law,
            norms,
            moments,
            out,
        } => {
            tensor.apply(&mut c);
            law.apply(&mut c);
            norms.apply(&mut c);
            c.p = moments.p;
            c.form = moments.form.map(Into::into);
            (Command::Estimate, c, out, None)
        }
        Cmd::Norms {
            tensor,
            partition,
            all,
            norms,
            out,
        } => {
            tensor.apply(&mut c);
            norms.apply(&mut c);
            c.partition = partition;
            c.all = flag(all);
            (Command::Norms, c, out, None)
        }
        Cmd::VerifyMoments {
            tensor,
            symmetrize,
            law,
            norms,
            moments,
            sampling,
            undecoupled,
            out,
            csv,
        } => {
            tensor.apply(&mut c);
            c.symmetrize = flag(symmetrize);
            law.apply(&mut c);
            norms.apply(&mut c);
            c.p = moments.p;
            c.form = moments.form.map(Into::into);
            sampling.apply(&mut c);
            c.undecoupled = flag(undecoupled);
            (Command::VerifyMoments, c, out, csv.csv)
        }
        Cmd::VerifyDecoupling {
            tensor,
            law,
            p,
            sampling,
            out,
            csv,
        } => {
            tensor.apply(&mut c);
            law.apply(&mut c);
            c.p = p;
            sampling.apply(&mut c);
            (Command::VerifyDecoupling, c, out, csv.csv)
        }
        Cmd::VerifyTail {
            tensor,
            law,
            norms,
            sampling,
            thresholds,
            auto: _,
            calibrate,
            cprime,
            a,
            out,
            csv,
        } => {
            tensor.apply(&mut c);
            law.apply(&mut c);
            norms.apply(&mut c);
            sampling.apply(&mut c);
            c.thresholds = thresholds;
            c.calibrate = flag(calibrate);
            c.cprime = cprime;
            c.a = a;
            (Command::VerifyTail, c, out, csv.csv)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, mut flags, out, csv) = parse(cli);
    flags.seed = out.seed;
    let merged = match &out.config {
        Some(path) => RunConfig::load(path).map(|file| flags.over(file)),
        None => Ok(flags),
    };
    let resolved = match merged.and_then(|c| c.resolve(command)) {
        Ok(c) => c,
        Err(e) => return commands::fail(&e),
    };
    let output = Output {
        out: out.out,
        csv,
        threads: out.threads,
    };
    match commands::run(command, &resolved, &output) {
        Ok(status) => status,
        Err(e) => commands::fail(&e),
    }
}
