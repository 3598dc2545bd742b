//! Run configuration: flags layered over an optional JSON file, resolved to a
//! complete record that is echoed into every output.

use std::path::Path;

use chaos_bounds::laws::LawFamily;
use chaos_bounds::{Error, EstimateForm, LawDescriptor, NormConfig, Result, SampleConfig};
use serde::{Deserialize, Serialize};

/// `--random d,n,seed`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    pub d: usize,
    pub n: usize,
    pub seed: u64,
}

impl std::str::FromStr for RandomSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [d, n, seed] = parts.as_slice() else {
            return Err(format!("expected d,n,seed, got {s:?}"));
        };
        let bad = |what: &str, v: &str| {
            format!("{what} in --random must be a nonnegative integer, got {v:?}")
        };
        Ok(Self {
            d: d.parse().map_err(|_| bad("d", d))?,
            n: n.parse().map_err(|_| bad("n", n))?,
            seed: seed.parse().map_err(|_| bad("seed", seed))?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Command {
    #[serde(rename = "estimate")]
    Estimate,
    #[serde(rename = "norms")]
    Norms,
    #[serde(rename = "verify-moments")]
    VerifyMoments,
    #[serde(rename = "verify-decoupling")]
    VerifyDecoupling,
    #[serde(rename = "verify-tail")]
    VerifyTail,
}

/// Every parameter a command reads. In a config file and in the echo, absent
/// fields are omitted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tensor: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetrize: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub law: Option<LawFamily>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalize: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub form: Option<EstimateForm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub undecoupled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub all: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibrate: Option<bool>,
    #[serde(rename = "Cprime", skip_serializing_if = "Option::is_none")]
    pub cprime: Option<f64>,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

macro_rules! overlay {
    ($top:ident, $base:ident, $($f:ident),*) => {
        RunConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

pub const DEFAULT_P: [f64; 3] = [2.0, 4.0, 8.0];
pub const DEFAULT_SAMPLES: usize = 100_000;

impl RunConfig {
    /// Read a config file. A previous output (an object with a `config`
    /// field) is accepted in place of a bare config.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Input(format!("config {}: {e}", path.display())))?;
        let value = match value {
            serde_json::Value::Object(mut m) if m.contains_key("config") => {
                m.remove("config").unwrap_or_default()
            }
            other => other,
        };
        serde_json::from_value(value)
            .map_err(|e| Error::Input(format!("config {}: {e}", path.display())))
    }

    /// Fields set in `self` win over `base`.
    pub fn over(self, base: RunConfig) -> RunConfig {
        let top = self;
        overlay!(
            top,
            base,
            command,
            tensor,
            random,
            symmetrize,
            law,
            r,
            normalize,
            p,
            form,
            restarts,
            tol,
            samples,
            seed,
            batch_size,
            undecoupled,
            partition,
            all,
            thresholds,
            calibrate,
            cprime,
            a
        )
    }

    /// Fill defaults for the fields `command` reads, drop the rest, and
    /// validate. The result is what gets echoed.
    pub fn resolve(self, command: Command) -> Result<RunConfig> {
        if let Some(c) = self.command {
            if c != command {
                return Err(Error::Input(format!(
                    "config was written for {}, not {}",
                    command_name(c),
                    command_name(command)
                )));
            }
        }
        let uses_law = command != Command::Norms;
        let uses_norms = command != Command::VerifyDecoupling;
        let uses_samples = matches!(
            command,
            Command::VerifyMoments | Command::VerifyDecoupling | Command::VerifyTail
        );
        let uses_p = !matches!(command, Command::Norms | Command::VerifyTail);
        let uses_form = matches!(command, Command::Estimate | Command::VerifyMoments);

        if self.tensor.is_some() == self.random.is_some() {
            return Err(Error::Input(
                "give exactly one of --tensor PATH or --random d,n,seed".into(),
            ));
        }
        let law = if uses_law {
            Some(self.law.unwrap_or(LawFamily::Exponential))
        } else {
            None
        };
        let r = match law {
            Some(LawFamily::Weibull) => Some(
                self.r
                    .ok_or_else(|| Error::Input("--law weibull needs --r".into()))?,
            ),
            _ if self.r.is_some() && uses_law => {
                return Err(Error::Input("--r only applies to --law weibull".into()))
            }
            _ => None,
        };
        let resolved = RunConfig {
            command: Some(command),
            tensor: self.tensor,
            random: self.random,
            symmetrize: (command == Command::VerifyMoments)
                .then(|| self.symmetrize.unwrap_or(false)),
            law,
            r,
            normalize: uses_law.then(|| self.normalize.unwrap_or(false)),
            p: uses_p.then(|| self.p.unwrap_or_else(|| DEFAULT_P.to_vec())),
            form: uses_form.then(|| self.form.unwrap_or(EstimateForm::B)),
            restarts: uses_norms.then(|| self.restarts.unwrap_or(NormConfig::default().restarts)),
            tol: uses_norms.then(|| self.tol.unwrap_or(NormConfig::default().multilinear_tol)),
            samples: uses_samples.then(|| self.samples.unwrap_or(DEFAULT_SAMPLES)),
            seed: Some(self.seed.unwrap_or(0)),
            batch_size: uses_samples.then(|| {
                self.batch_size
                    .unwrap_or(SampleConfig::new(1, 0).batch_size)
            }),
            undecoupled: (command == Command::VerifyMoments)
                .then(|| self.undecoupled.unwrap_or(false)),
            partition: if command == Command::Norms && self.all != Some(true) {
                Some(self.partition.ok_or_else(|| {
                    Error::Input("norms needs a partition spec such as \"1,3|2\" or --all".into())
                })?)
            } else {
                None
            },
            all: (command == Command::Norms).then(|| self.all.unwrap_or(false)),
            thresholds: if command == Command::VerifyTail {
                self.thresholds
            } else {
                None
            },
            calibrate: (command == Command::VerifyTail).then(|| self.calibrate.unwrap_or(false)),
            cprime: if command == Command::VerifyTail {
                Some(self.cprime.unwrap_or(1.0))
            } else {
                None
            },
            a: if command == Command::VerifyTail {
                self.a
            } else {
                None
            },
        };
        resolved.validate()?;
        Ok(resolved)
    }

    fn validate(&self) -> Result<()> {
        if let Some(spec) = self.random {
            if spec.d == 0 || spec.n == 0 {
                return Err(Error::Input("--random needs d >= 1 and n >= 1".into()));
            }
        }
        if let Some(p) = &self.p {
            if p.is_empty() {
                return Err(Error::Input("--p needs at least one value".into()));
            }
            if let Some(bad) = p.iter().find(|v| !(**v >= 2.0) || !v.is_finite()) {
                return Err(Error::Input(format!(
                    "moment orders must be finite reals >= 2, got {bad}"
                )));
            }
        }
        if self.samples == Some(0) {
            return Err(Error::Input("--samples must be at least 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Input("batch_size must be at least 1".into()));
        }
        if let Some(t) = &self.thresholds {
            if t.is_empty() {
                return Err(Error::Input("--thresholds needs at least one value".into()));
            }
            if let Some(w) = t.windows(2).find(|w| !(w[1] > w[0])) {
                return Err(Error::Input(format!(
                    "thresholds must be strictly increasing; {} follows {}",
                    w[1], w[0]
                )));
            }
            if let Some(bad) = t.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                return Err(Error::Input(format!(
                    "thresholds must be finite and positive, got {bad}"
                )));
            }
        }
        for (name, v) in [("--Cprime", self.cprime), ("--A", self.a)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::Input(format!(
                        "{name} must be a finite positive real, got {v}"
                    )));
                }
            }
        }
        if self.tol.is_some() || self.restarts.is_some() {
            self.norm_config()
                .validate()
                .map_err(|e| Error::Input(e.to_string()))?;
        }
        if self.law.is_some() {
            self.law_descriptor()
                .resolve()
                .map_err(|e| Error::Input(e.to_string()))?;
        }
        Ok(())
    }

    pub fn norm_config(&self) -> NormConfig {
        let d = NormConfig::default();
        NormConfig {
            restarts: self.restarts.unwrap_or(d.restarts),
            multilinear_tol: self.tol.unwrap_or(d.multilinear_tol),
            seed: self.seed.unwrap_or(0),
            ..d
        }
    }

    pub fn law_descriptor(&self) -> LawDescriptor {
        LawDescriptor {
            kind: self.law.unwrap_or(LawFamily::Exponential),
            r: self.r,
            scale: 1.0,
            normalize: self.normalize.unwrap_or(false),
        }
    }

    pub fn sample_config(&self) -> SampleConfig {
        SampleConfig {
            n_samples: self.samples.unwrap_or(DEFAULT_SAMPLES),
            seed: self.seed.unwrap_or(0),
            batch_size: self
                .batch_size
                .unwrap_or(SampleConfig::new(1, 0).batch_size),
        }
    }
}

pub fn command_name(c: Command) -> &'static str {
    match c {
        Command::Estimate => "estimate",
        Command::Norms => "norms",
        Command::VerifyMoments => "verify-moments",
        Command::VerifyDecoupling => "verify-decoupling",
        Command::VerifyTail => "verify-tail",
    }
}
