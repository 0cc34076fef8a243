//! Experiment configuration, read from TOML or JSON.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use bandspike::evaluation::{Method, MuRule, SteeringGrid};
use bandspike::model::{db_to_linear, GroundTruthScenario};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub p: usize,
    pub band_size: usize,
    pub spike_count: usize,
    /// Linear noise power; exclusive with `sigma2_db`.
    pub sigma2: Option<f64>,
    /// Noise power as `10·log10(σ²)`.
    pub sigma2_db: Option<f64>,
    pub spike_gain: f64,
    /// Seed for the ground truth; the master seed drives the samples.
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSection {
    pub fn to_scenario(&self) -> Result<GroundTruthScenario> {
        let sigma2 = match (self.sigma2, self.sigma2_db) {
            (Some(s), None) => s,
            (None, Some(db)) => db_to_linear(db),
            (None, None) => bail!("scenario needs sigma2 or sigma2_db"),
            (Some(_), Some(_)) => bail!("give only one of sigma2 and sigma2_db"),
        };
        let scenario = GroundTruthScenario {
            p: self.p,
            band_size: self.band_size,
            spike_count: self.spike_count,
            sigma2,
            spike_gain: self.spike_gain,
            seed: self.seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub q: usize,
    pub n_pulses: usize,
}

fn default_methods() -> Vec<String> {
    // No taper by default: its bandsize has to suit p.
    vec!["banded-spiked".into(), "dl".into(), "spiked-shrinkage".into()]
}

fn default_trials() -> usize {
    1
}

fn default_mu_rule() -> String {
    "3*sqrt(log(p)/K)".into()
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    pub k_list: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_mu_rule")]
    pub mu_rule: String,
    /// Diagonal loading level; `σ̂²` when absent.
    pub dl_delta: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; `--seed` overrides it.
    pub seed: Option<u64>,
    pub scenario: ScenarioSection,
    pub grid: Option<GridSection>,
    pub sweep: SweepSection,
    /// Free-form descriptive metadata copied into the manifest.
    #[serde(default)]
    pub annotations: BTreeMap<String, serde_json::Value>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.to_scenario()?;
        self.methods()?;
        self.mu_rule()?;
        if self.sweep.k_list.is_empty() || self.sweep.k_list.contains(&0) {
            bail!("k_list must be non-empty with positive entries");
        }
        if self.sweep.trials == 0 {
            bail!("trials must be at least 1");
        }
        if let Some(d) = self.sweep.dl_delta {
            if !(d.is_finite() && d >= 0.0) {
                bail!("dl_delta must be non-negative");
            }
        }
        let p = self.scenario.p;
        for m in self.methods()? {
            if let Method::BandTaper { taper_l } = m {
                if taper_l == 0 || taper_l >= p {
                    bail!("band-taper-{taper_l} needs a bandsize in [1, {}]", p - 1);
                }
            }
        }
        self.grid()?;
        Ok(())
    }

    pub fn mu_rule(&self) -> Result<MuRule> {
        Ok(self.sweep.mu_rule.parse()?)
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        let mu = self.mu_rule()?;
        self.sweep
            .methods
            .iter()
            .map(|name| {
                Ok(match name.parse::<Method>()? {
                    Method::BandedSpiked { .. } => Method::BandedSpiked { mu },
                    Method::DiagonalLoading { .. } => Method::DiagonalLoading {
                        delta: self.sweep.dl_delta,
                    },
                    other => other,
                })
            })
            .collect()
    }

    /// Standard 21×21 grid. Without a `[grid]` section the whole dimension
    /// is treated as pulses of a single channel.
    pub fn grid(&self) -> Result<SteeringGrid> {
        let (q, n) = match &self.grid {
            Some(g) => (g.q, g.n_pulses),
            None => (1, self.scenario.p),
        };
        if q * n != self.scenario.p {
            bail!("grid q·n_pulses = {} does not match p = {}", q * n, self.scenario.p);
        }
        Ok(SteeringGrid::standard(q, n)?)
    }
}
