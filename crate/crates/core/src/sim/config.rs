use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{SimEnv, Trace};
use crate::circuits::CircuitKind;
use crate::distributed::{run_plan, Hierarchy, Strategy, StrategyPlan};
use crate::operators::{inputs, CostModel, Int64Add, DEFAULT_SEED};
use crate::{Error, Result};

/// Parses flat `key = value` lines. Blank lines and lines starting with `#`
/// are skipped; a repeated key keeps its last value.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key=value, got `{line}`", no + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::InvalidConfig(format!("line {}: empty key", no + 1)));
        }
        map.insert(k.to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// A complete simulated experiment: input size, plan and environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub plan: StrategyPlan,
    pub env: SimEnv,
    pub seed: u64,
}

impl SimConfig {
    /// Keys understood by [`SimConfig::from_kv`].
    pub const KEYS: [&'static str; 13] = [
        "n",
        "p",
        "pprime",
        "t",
        "strategy",
        "global",
        "local",
        "dynamic",
        "cost",
        "seed",
        "latency",
        "preprocess",
        "window",
    ];

    pub fn new(n: usize, plan: StrategyPlan) -> Self {
        Self {
            n,
            plan,
            env: SimEnv::default(),
            seed: DEFAULT_SEED,
        }
    }

    /// Builds a configuration from parsed key/value pairs, ignoring keys not
    /// in [`SimConfig::KEYS`].
    ///
    /// Giving `pprime` or `t` selects a hierarchical plan; `p`, if also
    /// given, must equal their product.
    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        fn get<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
        where
            T::Err: std::fmt::Display,
        {
            kv.get(key)
                .map(|v| {
                    v.parse::<T>()
                        .map_err(|e| Error::InvalidConfig(format!("{key} = `{v}`: {e}")))
                })
                .transpose()
        }
        let n: usize = get(kv, "n")?.ok_or_else(|| Error::InvalidConfig("missing key `n`".into()))?;
        let strategy: Strategy = get(kv, "strategy")?.unwrap_or(Strategy::ReduceThenScan);
        let global: CircuitKind = get(kv, "global")?.unwrap_or(CircuitKind::Dissemination);
        let local: Option<CircuitKind> = get(kv, "local")?;
        let dynamic: bool = get(kv, "dynamic")?.unwrap_or(false);
        let p: Option<usize> = get(kv, "p")?;
        let pprime: Option<usize> = get(kv, "pprime")?;
        let t: Option<usize> = get(kv, "t")?;
        let seed: u64 = get(kv, "seed")?.unwrap_or(DEFAULT_SEED);

        let mut plan = if pprime.is_some() || t.is_some() || dynamic {
            let (ranks, lanes) = (pprime.unwrap_or(1), t.unwrap_or(1));
            if let Some(p) = p {
                if p != ranks * lanes {
                    return Err(Error::InvalidConfig(format!(
                        "p = {p} but pprime x t = {}",
                        ranks * lanes
                    )));
                }
            }
            if strategy != Strategy::ReduceThenScan {
                return Err(Error::InvalidConfig("hierarchical plans use reduce-then-scan".into()));
            }
            if dynamic {
                StrategyPlan::dynamic(ranks, lanes, global)
            } else {
                StrategyPlan::hierarchical(ranks, lanes, global)
            }
        } else {
            StrategyPlan::flat(strategy, p.unwrap_or(1), global)
        };
        plan.local = local;

        let cost = match kv.get("cost") {
            Some(spec) => CostModel::parse(spec, seed)?,
            None => CostModel::UNIT,
        };
        let defaults = SimEnv::default();
        let env = SimEnv {
            cost,
            latency: get(kv, "latency")?.unwrap_or(defaults.latency),
            preprocess: get(kv, "preprocess")?.unwrap_or(defaults.preprocess),
            rate_window: get(kv, "window")?.unwrap_or(defaults.rate_window),
        };
        if env.rate_window == 0 {
            return Err(Error::InvalidConfig("window must be at least 1".into()));
        }
        let config = Self { n, plan, env, seed };
        config.plan.validate(n)?;
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&parse_kv(text)?)
    }

    /// Renders the configuration in the format read by [`SimConfig::parse`].
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: &dyn std::fmt::Display| writeln!(out, "{k} = {v}").expect("writing to a String");
        line("n", &self.n);
        line("p", &self.plan.workers);
        if let Some(h) = self.plan.hierarchy {
            line("pprime", &h.ranks);
            line("t", &h.lanes);
        }
        line("strategy", &self.plan.strategy);
        line("global", &self.plan.global);
        if let Some(local) = self.plan.local {
            line("local", &local);
        }
        line("dynamic", &self.plan.dynamic);
        line("cost", &self.env.cost.spec());
        line("seed", &self.seed);
        line("latency", &self.env.latency);
        line("preprocess", &self.env.preprocess);
        line("window", &self.env.rate_window);
        out
    }

    pub fn hierarchy(&self) -> Option<Hierarchy> {
        self.plan.hierarchy
    }
}

/// Simulates `config` on deterministic integer inputs and returns the trace.
/// Timing depends only on the plan and the costs, not on the values.
pub fn simulate(config: &SimConfig) -> Result<Trace> {
    let xs = inputs::int64(config.n, config.seed as u32);
    let (_, trace) = run_plan(&Int64Add, &xs, &config.plan, &config.env)?;
    Ok(trace)
}
