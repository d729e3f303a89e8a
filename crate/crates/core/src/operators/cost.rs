//! Deterministic per-application cost models.
//!
//! Exponential costs use inverse-CDF sampling on raw MT19937 output so the
//! sequence for a given seed is identical on every platform. Each lane owns
//! its own stream seeded with `seed + lane`; the simulator and the executor
//! consume identical sequences.

use std::fmt;
use std::str::FromStr;

use rand_mt::Mt;

use crate::{Error, Nanos, Result};

/// Seed used by the reference experiments.
pub const DEFAULT_SEED: u64 = 1410;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostModel {
    /// Every application takes `t`.
    Constant { t: Nanos },
    /// Exponentially distributed durations with rate `1 / mean`.
    Exponential { mean: Nanos, seed: u64 },
}

impl CostModel {
    /// One time unit per application; makespans read directly as depths.
    pub const UNIT: CostModel = CostModel::Constant { t: 1 };

    pub fn mean(&self) -> f64 {
        match *self {
            CostModel::Constant { t } => t as f64,
            CostModel::Exponential { mean, .. } => mean as f64,
        }
    }

    /// Stream for `lane`. Streams with different indices are independent.
    pub fn stream(&self, lane: usize) -> CostStream {
        let rng = match *self {
            CostModel::Constant { .. } => None,
            // std::mt19937 takes a 32-bit seed; higher bits are dropped.
            CostModel::Exponential { seed, .. } => Some(Box::new(Mt::new(seed.wrapping_add(lane as u64) as u32))),
        };
        CostStream { model: *self, rng }
    }

    /// Parses `unit`, `const:<duration>` or `exp:<duration>`, where a
    /// duration is an integer with an optional `ns`, `us`, `ms` or `s`
    /// suffix. `seed` only matters for exponential models.
    pub fn parse(spec: &str, seed: u64) -> Result<Self> {
        let spec = spec.trim();
        if spec == "unit" {
            return Ok(Self::UNIT);
        }
        let (kind, value) = spec
            .split_once(':')
            .ok_or_else(|| Error::InvalidConfig(format!("cost `{spec}`: expected unit, const:<t> or exp:<t>")))?;
        let t = parse_duration(value)?;
        match kind {
            "const" => Ok(CostModel::Constant { t }),
            "exp" => Ok(CostModel::Exponential { mean: t, seed }),
            other => Err(Error::InvalidConfig(format!("unknown cost model `{other}`"))),
        }
    }

    /// Canonical text form accepted by [`CostModel::parse`].
    pub fn spec(&self) -> String {
        match *self {
            CostModel::Constant { t: 1 } => "unit".to_owned(),
            CostModel::Constant { t } => format!("const:{t}"),
            CostModel::Exponential { mean, .. } => format!("exp:{mean}"),
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            CostModel::Exponential { mean, .. } => CostModel::Exponential { mean, seed },
            other => other,
        }
    }
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec())
    }
}

impl FromStr for CostModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CostModel::parse(s, DEFAULT_SEED)
    }
}

fn parse_duration(s: &str) -> Result<Nanos> {
    let s = s.trim();
    let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let (digits, unit) = s.split_at(split);
    let value: u64 = digits
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad duration `{s}`")))?;
    let scale = match unit {
        "" | "ns" => 1,
        "us" => 1_000,
        "ms" => 1_000_000,
        "s" => 1_000_000_000,
        _ => return Err(Error::InvalidConfig(format!("bad duration unit in `{s}`"))),
    };
    value
        .checked_mul(scale)
        .ok_or_else(|| Error::InvalidConfig(format!("duration `{s}` overflows")))
}

/// A lane-private sequence of sampled durations.
#[derive(Debug, Clone)]
pub struct CostStream {
    model: CostModel,
    rng: Option<Box<Mt>>,
}

impl CostStream {
    pub fn sample(&mut self) -> Nanos {
        match (self.model, self.rng.as_mut()) {
            (CostModel::Constant { t }, _) => t,
            (CostModel::Exponential { mean, .. }, Some(rng)) => {
                // u in (0, 1): never 0, so ln(u) is finite.
                let u = (rng.next_u32() as f64 + 0.5) / 4_294_967_296.0;
                (-(mean as f64) * u.ln()).round() as Nanos
            }
            (CostModel::Exponential { .. }, None) => unreachable!("exponential streams own a generator"),
        }
    }
}

/// Draws the next duration from a lane's stream.
pub fn sample_cost(stream: &mut CostStream) -> Nanos {
    stream.sample()
}

/// Per-element durations shared by every backend and by static and dynamic
/// variants of a run.
///
/// Lane `i` of the static partition draws the costs of its own segment, in
/// index order, from stream `i`. An element keeps its cost when another lane
/// ends up processing it. Applications that combine partial results (lane and
/// global scans) draw from per-worker auxiliary streams numbered after the
/// element streams.
#[derive(Debug, Clone)]
pub struct CostTable {
    element: Vec<Nanos>,
    model: CostModel,
    aux_offset: usize,
}

impl CostTable {
    pub fn generate(model: &CostModel, segment_lengths: &[usize]) -> Self {
        let n = segment_lengths.iter().sum();
        let mut element = Vec::with_capacity(n);
        for (lane, &len) in segment_lengths.iter().enumerate() {
            let mut stream = model.stream(lane);
            element.extend((0..len).map(|_| stream.sample()));
        }
        Self {
            element,
            model: *model,
            aux_offset: segment_lengths.len(),
        }
    }

    /// Table with explicit element costs; auxiliary applications cost
    /// `aux` each.
    pub fn from_costs(element: Vec<Nanos>, aux: Nanos) -> Self {
        let aux_offset = element.len();
        Self {
            element,
            model: CostModel::Constant { t: aux },
            aux_offset,
        }
    }

    pub fn len(&self) -> usize {
        self.element.len()
    }

    pub fn is_empty(&self) -> bool {
        self.element.is_empty()
    }

    pub fn element(&self, index: usize) -> Nanos {
        self.element[index]
    }

    pub fn elements(&self) -> &[Nanos] {
        &self.element
    }

    pub fn model(&self) -> &CostModel {
        &self.model
    }

    pub fn aux_streams(&self, workers: usize) -> Vec<CostStream> {
        (0..workers).map(|w| self.model.stream(self.aux_offset + w)).collect()
    }
}
