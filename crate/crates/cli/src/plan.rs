//! Run plan files: JSON documents naming the game, templates, one endpoint
//! per party and the session settings. Relative paths resolve against the
//! plan file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use negotiation_core::agent::AgentEndpoint;
use negotiation_core::deal_space::OutcomePolicy;
use negotiation_core::experiment::ExperimentPlan;
use negotiation_core::game::{GameConfig, Incentive};
use negotiation_core::legacy::load_legacy_game;
use negotiation_core::orchestrator::{SessionMode, SessionSettings};
use negotiation_core::parser::DealPick;
use negotiation_core::prompt::{default_template_dir, CotConfig, TemplateSet};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunPlanFile {
    /// Game config: a JSON file or a plain-text game directory.
    pub config: PathBuf,
    #[serde(default)]
    pub templates: Option<PathBuf>,
    pub endpoints: EndpointTable,
    #[serde(default)]
    pub cot: Option<CotSpec>,
    #[serde(default)]
    pub mode: Option<SessionMode>,
    /// Keyed by 1-based party number or party name.
    #[serde(default)]
    pub incentives: BTreeMap<String, IncentiveSpec>,
    pub seeds: SeedSpec,
    #[serde(default)]
    pub parallelism: Option<usize>,
    #[serde(default)]
    pub rounds: Option<u32>,
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub outcome_policy: Option<OutcomePolicy>,
    #[serde(default)]
    pub deal_pick: Option<DealPick>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointTable {
    #[serde(default)]
    pub default: Option<AgentEndpoint>,
    /// Keyed by 1-based party number or party name.
    #[serde(default)]
    pub parties: BTreeMap<String, AgentEndpoint>,
}

/// A preset row (1..=6) or explicit flags.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum CotSpec {
    Row(u8),
    Flags(CotConfig),
}

impl CotSpec {
    pub fn resolve(&self) -> Result<CotConfig> {
        let cot = match self {
            CotSpec::Row(n) => CotConfig::row(*n)?,
            CotSpec::Flags(flags) => *flags,
        };
        cot.variation()?;
        Ok(cot)
    }
}

/// `"greedy"`, `"targeted:2"`, or the tagged object form.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum IncentiveSpec {
    Short(String),
    Full(Incentive),
}

impl IncentiveSpec {
    fn resolve(&self, config: &GameConfig) -> Result<Incentive> {
        let text = match self {
            IncentiveSpec::Full(i) => return Ok(*i),
            IncentiveSpec::Short(text) => text.trim(),
        };
        let (kind, target) = match text.split_once(':') {
            Some((kind, target)) => (kind.trim().to_ascii_lowercase(), Some(target.trim())),
            None => (text.to_ascii_lowercase(), None),
        };
        Ok(match (kind.as_str(), target) {
            ("cooperative", None) => Incentive::Cooperative,
            ("greedy", None) => Incentive::Greedy,
            ("untargeted" | "adversarial_untargeted", None) => Incentive::AdversarialUntargeted,
            ("targeted" | "adversarial_targeted", Some(target)) => Incentive::AdversarialTargeted {
                target: party_index(config, target)? + 1,
            },
            _ => bail!("unknown incentive {text:?}"),
        })
    }
}

/// A list, or a string of comma-separated numbers and inclusive ranges.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Text(String),
}

impl SeedSpec {
    pub fn resolve(&self) -> Result<Vec<u64>> {
        match self {
            SeedSpec::List(list) => Ok(list.clone()),
            SeedSpec::Text(text) => parse_seeds(text),
        }
    }
}

/// Parses `"1-10"`, `"3,5,8"` or `"1-3,7"`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().with_context(|| format!("bad seed range {part:?}"))?;
                let b: u64 = b.trim().parse().with_context(|| format!("bad seed range {part:?}"))?;
                ensure!(a <= b, "empty seed range {part:?}");
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().with_context(|| format!("bad seed {part:?}"))?),
        }
    }
    ensure!(!seeds.is_empty(), "no seeds in {text:?}");
    Ok(seeds)
}

/// Zero-based party position from a 1-based number or a name.
fn party_index(config: &GameConfig, key: &str) -> Result<usize> {
    if let Ok(n) = key.parse::<usize>() {
        ensure!(
            (1..=config.n_parties()).contains(&n),
            "party {n} does not exist (the game has {} parties)",
            config.n_parties()
        );
        return Ok(n - 1);
    }
    config
        .party_by_name(key)
        .with_context(|| format!("no party named {key:?}"))
}

/// A JSON config file or a plain-text game directory.
pub fn load_game(path: &Path) -> Result<GameConfig> {
    let config = if path.is_dir() {
        load_legacy_game(path)
    } else {
        GameConfig::load(path)
    };
    config.with_context(|| format!("loading game {}", path.display()))
}

/// Command-line overrides, applied on top of the plan file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,
    pub cot_row: Option<u8>,
    pub mode: Option<SessionMode>,
    pub rounds: Option<u32>,
    pub window: Option<usize>,
    pub parallelism: Option<usize>,
    pub out: Option<PathBuf>,
    pub force: bool,
}

impl RunPlanFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading plan {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing plan {}", path.display()))
    }

    /// Builds the experiment plan. `base` is the plan file's directory.
    pub fn resolve(&self, base: &Path, overrides: Overrides) -> Result<ExperimentPlan> {
        let rel = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

        let config_path = overrides.config.clone().unwrap_or_else(|| rel(&self.config));
        let mut config = load_game(&config_path)?;
        for (key, spec) in &self.incentives {
            let party = party_index(&config, key).context("incentives")?;
            config.parties[party].incentive = spec
                .resolve(&config)
                .with_context(|| format!("incentive for {key:?}"))?;
        }
        let config = config.validate().context("applying incentives")?;

        let template_dir = self.templates.as_deref().map(rel).unwrap_or_else(default_template_dir);
        let templates = TemplateSet::load(&template_dir)
            .with_context(|| format!("loading templates from {}", template_dir.display()))?;

        let mut endpoints = Vec::with_capacity(config.n_parties());
        let mut named: Vec<Option<&AgentEndpoint>> = vec![None; config.n_parties()];
        for (key, endpoint) in &self.endpoints.parties {
            let party = party_index(&config, key).context("endpoints")?;
            ensure!(named[party].is_none(), "party {} has two endpoints", party + 1);
            named[party] = Some(endpoint);
        }
        for (party, endpoint) in named.into_iter().enumerate() {
            let endpoint = endpoint.or(self.endpoints.default.as_ref()).with_context(|| {
                format!(
                    "no endpoint for party {} ({}) and no default endpoint",
                    party + 1,
                    config.parties[party].name
                )
            })?;
            endpoints.push(endpoint.clone());
        }

        let cot = match (overrides.cot_row, &self.cot) {
            (Some(row), _) => CotSpec::Row(row).resolve()?,
            (None, Some(spec)) => spec.resolve()?,
            (None, None) => CotConfig::default(),
        };
        let defaults = SessionSettings::default();
        let settings = SessionSettings {
            mode: overrides.mode.or(self.mode).unwrap_or(defaults.mode),
            cot,
            rounds: overrides.rounds.or(self.rounds),
            window: overrides.window.or(self.window).unwrap_or(defaults.window),
            policy: self.outcome_policy.unwrap_or(defaults.policy),
            deal_pick: self.deal_pick.unwrap_or(defaults.deal_pick),
        };
        ensure!(settings.rounds_for(&config) > 0, "rounds must be at least 1");
        ensure!(settings.window > 0, "window must be at least 1");

        let seeds = match overrides.seeds {
            Some(seeds) => seeds,
            None => self.seeds.resolve()?,
        };
        let out_dir = match (overrides.out, &self.out) {
            (Some(out), _) => out,
            (None, Some(out)) => rel(out),
            (None, None) => bail!("no output directory: set \"out\" in the plan or pass --out"),
        };
        let parallelism = overrides.parallelism.or(self.parallelism).unwrap_or(1).max(1);

        let description = serde_json::json!({
            "config": config_path,
            "game": config.name,
            "templates": template_dir,
            "endpoints": endpoints,
            "settings": settings,
            "incentives": config.parties.iter().map(|p| p.incentive).collect::<Vec<_>>(),
            "parallelism": parallelism,
        });
        Ok(ExperimentPlan {
            config,
            templates,
            endpoints,
            settings,
            seeds,
            parallelism,
            out_dir,
            force: overrides.force,
            description,
        })
    }
}
