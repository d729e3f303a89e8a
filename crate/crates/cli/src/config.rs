use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use hpscan::circuits::CircuitKind;
use hpscan::distributed::{Strategy, StrategyPlan};
use hpscan::exec::ExecConfig;
use hpscan::operators::{CostModel, DEFAULT_SEED};
use hpscan::sim::{parse_kv, SimEnv};

/// A bad flag, config key or combination; reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Sim,
    Exec,
}

impl FromStr for BackendArg {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, UsageError> {
        <Self as ValueEnum>::from_str(s, true)
            .map_err(|_| usage(format!("unknown backend `{s}` (expected sim or exec)")))
    }
}

impl BackendArg {
    pub fn name(self) -> &'static str {
        match self {
            BackendArg::Sim => "sim",
            BackendArg::Exec => "exec",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Fixed n, growing worker count.
    Strong,
    /// Fixed elements per worker, n and ranks multiplied by 1, 2, 4, 8.
    Weak,
}

impl FromStr for Mode {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, UsageError> {
        <Self as ValueEnum>::from_str(s, true)
            .map_err(|_| usage(format!("unknown mode `{s}` (expected strong or weak)")))
    }
}

/// Flags shared by every subcommand. Each overrides the same key from
/// `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Number of input elements.
    #[arg(long)]
    pub n: Option<usize>,
    /// Ranks P′ (workers, for flat plans).
    #[arg(long)]
    pub ranks: Option<usize>,
    /// Lanes T per rank; more than one selects the hierarchical scheme.
    #[arg(long)]
    pub lanes: Option<usize>,
    /// scan-then-map or reduce-then-scan.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Global circuit: sequential, blelloch, dissemination, ladner-fischer, binomial-tree.
    #[arg(long)]
    pub global: Option<String>,
    /// Circuit over the lanes of a rank (defaults to --global).
    #[arg(long)]
    pub local: Option<String>,
    /// Operator cost: unit, const:<t> or exp:<t> (t in ns, us, ms or s).
    #[arg(long)]
    pub cost: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Repetitions per measurement (seeds for the simulator).
    #[arg(long)]
    pub reps: Option<usize>,
    /// sim or exec.
    #[arg(long)]
    pub backend: Option<String>,
    /// Report file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat key=value file with defaults for any of these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Message latency between ranks, in ns (simulator).
    #[arg(long)]
    pub latency: Option<u64>,
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub n: usize,
    /// Whether `n` came from the user rather than the command's default.
    pub n_given: bool,
    pub ranks: usize,
    pub lanes: usize,
    pub strategy: Strategy,
    pub global: CircuitKind,
    pub local: Option<CircuitKind>,
    pub cost: CostModel,
    pub seed: u64,
    pub reps: usize,
    pub backend: BackendArg,
    pub out: Option<PathBuf>,
    pub latency: u64,
    pub window: usize,
    pub preprocess: bool,
    pub mode: Mode,
}

const KEYS: [&str; 17] = [
    "n",
    "ranks",
    "pprime",
    "lanes",
    "t",
    "strategy",
    "global",
    "local",
    "cost",
    "seed",
    "reps",
    "backend",
    "out",
    "latency",
    "window",
    "preprocess",
    "mode",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, UsageError>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| usage(format!("{key} = `{value}`: {e}")))
}

impl ExperimentConfig {
    /// Defaults, then the config file, then flags.
    pub fn resolve(args: &CommonArgs, defaults: &ExperimentDefaults) -> Result<Self, UsageError> {
        let mut kv: BTreeMap<String, String> = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| usage(format!("reading {}: {e}", path.display())))?;
                parse_kv(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
            }
            None => BTreeMap::new(),
        };
        if let Some(bad) = kv.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(usage(format!(
                "unknown config key `{bad}` (known: {})",
                KEYS.join(", ")
            )));
        }
        for (alias, key) in [("pprime", "ranks"), ("t", "lanes")] {
            if let Some(v) = kv.remove(alias) {
                kv.entry(key.to_string()).or_insert(v);
            }
        }
        let mut set = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                kv.insert(key.to_string(), v);
            }
        };
        set("n", args.n.map(|v| v.to_string()));
        set("ranks", args.ranks.map(|v| v.to_string()));
        set("lanes", args.lanes.map(|v| v.to_string()));
        set("strategy", args.strategy.clone());
        set("global", args.global.clone());
        set("local", args.local.clone());
        set("cost", args.cost.clone());
        set("seed", args.seed.map(|v| v.to_string()));
        set("reps", args.reps.map(|v| v.to_string()));
        set("backend", args.backend.clone());
        set("out", args.out.as_ref().map(|p| p.display().to_string()));
        set("latency", args.latency.map(|v| v.to_string()));

        let get = |key: &str| kv.get(key).map(String::as_str);
        let seed = get("seed")
            .map(|v| parse("seed", v))
            .transpose()?
            .unwrap_or(DEFAULT_SEED);
        let cost_spec = get("cost").unwrap_or(defaults.cost);
        let cost = CostModel::parse(cost_spec, seed).map_err(|e| usage(e.to_string()))?;
        let config = Self {
            n: get("n").map(|v| parse("n", v)).transpose()?.unwrap_or(defaults.n),
            n_given: get("n").is_some(),
            ranks: get("ranks")
                .map(|v| parse("ranks", v))
                .transpose()?
                .unwrap_or(defaults.ranks),
            lanes: get("lanes")
                .map(|v| parse("lanes", v))
                .transpose()?
                .unwrap_or(defaults.lanes),
            strategy: get("strategy")
                .map(|v| parse("strategy", v))
                .transpose()?
                .unwrap_or(Strategy::ReduceThenScan),
            global: get("global")
                .map(|v| parse("global", v))
                .transpose()?
                .unwrap_or(CircuitKind::Dissemination),
            local: get("local").map(|v| parse("local", v)).transpose()?,
            cost,
            seed,
            reps: get("reps")
                .map(|v| parse("reps", v))
                .transpose()?
                .unwrap_or(defaults.reps),
            backend: get("backend")
                .map(|v| parse("backend", v))
                .transpose()?
                .unwrap_or(BackendArg::Sim),
            out: get("out").map(PathBuf::from),
            latency: get("latency").map(|v| parse("latency", v)).transpose()?.unwrap_or(0),
            window: get("window")
                .map(|v| parse("window", v))
                .transpose()?
                .unwrap_or(SimEnv::DEFAULT_RATE_WINDOW),
            preprocess: get("preprocess")
                .map(|v| parse("preprocess", v))
                .transpose()?
                .unwrap_or(false),
            mode: get("mode")
                .map(|v| parse("mode", v))
                .transpose()?
                .unwrap_or(Mode::Strong),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), UsageError> {
        if self.n == 0 || self.ranks == 0 || self.lanes == 0 {
            return Err(usage("n, ranks and lanes must be positive"));
        }
        if self.window == 0 {
            return Err(usage("window must be at least 1"));
        }
        if self.lanes > 1 && self.strategy != Strategy::ReduceThenScan {
            return Err(usage("several lanes per rank need --strategy reduce-then-scan"));
        }
        if self.backend == BackendArg::Exec && self.strategy != Strategy::ReduceThenScan {
            return Err(usage("the exec backend runs reduce-then-scan plans only"));
        }
        if self.n < self.workers() {
            return Err(usage(format!(
                "n = {} is smaller than {} workers",
                self.n,
                self.workers()
            )));
        }
        self.plan(self.ranks, false)
            .validate(self.n)
            .map_err(|e| usage(e.to_string()))
    }

    pub fn workers(&self) -> usize {
        self.ranks * self.lanes
    }

    pub fn env(&self) -> SimEnv {
        SimEnv {
            cost: self.cost,
            latency: self.latency,
            preprocess: self.preprocess,
            rate_window: self.window,
        }
    }

    /// The configured plan with `ranks` ranks; flat unless there are
    /// several lanes or `dynamic` is requested.
    pub fn plan(&self, ranks: usize, dynamic: bool) -> StrategyPlan {
        let plan = if self.lanes > 1 || dynamic {
            if dynamic {
                StrategyPlan::dynamic(ranks, self.lanes, self.global)
            } else {
                StrategyPlan::hierarchical(ranks, self.lanes, self.global)
            }
        } else {
            StrategyPlan::flat(self.strategy, ranks, self.global)
        };
        StrategyPlan {
            local: self.local,
            ..plan
        }
    }

    pub fn exec_config(&self, ranks: usize, lanes: usize, dynamic: bool) -> ExecConfig {
        ExecConfig {
            global: self.global,
            local: self.local,
            rate_window: self.window,
            ..ExecConfig::new(ranks, lanes).with_dynamic(dynamic).with_cost(self.cost)
        }
    }
}

/// Per-command defaults for settings the user left out.
pub struct ExperimentDefaults {
    pub n: usize,
    pub ranks: usize,
    pub lanes: usize,
    pub reps: usize,
    pub cost: &'static str,
}
