//! Lower-bound constructions as request generators.
//!
//! An adversary owns its metric and request pool. The driver asks it for the
//! next block given the algorithm's current state, lets the algorithm serve
//! it, and reports back. Each completed phase carries a hiding trajectory,
//! the feasible offline schedule whose cost certifies an upper bound on OPT.

mod cube;
mod lifted;
mod multi_group;
mod paired;
mod subset_labeled;
mod two_request;

pub use cube::CubeMss;
pub use lifted::{lift_values, LiftedConstruction};
pub use multi_group::MultiGroupUniform;
pub use paired::PairedUniform;
pub use subset_labeled::SubsetLabeledHst;
pub use two_request::TwoRequestUniform;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::check::CheckRow;
use crate::cost::{Reps, rat};
use crate::error::{Error, Result};
use crate::metric::MetricSpace;
use crate::request::{Block, RequestSet, Run};

/// One block to serve. With `stop_on_move` the algorithm is interrupted right
/// after its first move and the adversary picks the next block from there.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Emission {
    pub block: Block,
    pub stop_on_move: bool,
}

/// A finished accounting unit (phase, period or meta-sequence).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseRecord {
    pub steps: Reps,
    /// The adversary's own trajectory over exactly these steps.
    pub trace: Vec<Run>,
}

/// Per-phase inequalities the construction promises.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bounds {
    /// Exact lower bound on the algorithm's cost in every phase.
    pub alg_at_least: Option<BigRational>,
    /// Lower bound on the expected algorithm cost per phase (checked on the mean).
    pub alg_mean_at_least: Option<BigRational>,
    pub certified_at_most: Option<BigRational>,
    pub certified_below: Option<BigRational>,
    pub certified_service_below: Option<BigRational>,
    /// Moves of the hiding trajectory per phase.
    pub trace_moves_at_most: Option<usize>,
}

/// The construction's predicted competitive ratio.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    #[serde(with = "crate::cost::rational_serde")]
    pub value: BigRational,
    pub formula: String,
}

pub trait Adversary: Send {
    fn name(&self) -> &'static str;

    fn metric(&self) -> &MetricSpace;

    fn requests(&self) -> &RequestSet;

    fn initial_state(&self) -> usize {
        0
    }

    /// What an accounting unit is called in reports.
    fn unit(&self) -> &'static str {
        "phase"
    }

    /// Next block, or `None` once the requested number of phases is done.
    fn next(&mut self, alg_state: usize) -> Option<Emission>;

    /// The algorithm served `steps` copies of the last block along `runs`.
    fn served(&mut self, steps: &Reps, runs: &[Run]);

    fn completed(&self) -> &[PhaseRecord];

    fn bounds(&self) -> Bounds {
        Bounds::default()
    }

    fn predicted(&self) -> Prediction;

    /// Construction-specific checks (structure, hiding safety).
    fn checks(&self) -> Vec<CheckRow> {
        Vec::new()
    }

    /// A description of the adaptive policy, for `construct`.
    fn descriptor(&self) -> serde_json::Value;
}

/// Parameters shared by all constructions; each uses what it needs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryParams {
    pub n: Option<usize>,
    pub m: Option<usize>,
    #[serde(rename = "C", default, with = "opt_rational")]
    pub c: Option<BigRational>,
    pub levels: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_phases")]
    pub phases: usize,
    /// Largest metric (in points) a construction may build.
    #[serde(default = "default_size_cap")]
    pub size_cap: usize,
}

fn default_phases() -> usize {
    10
}

pub const DEFAULT_SIZE_CAP: usize = 1 << 16;

fn default_size_cap() -> usize {
    DEFAULT_SIZE_CAP
}

impl Default for AdversaryParams {
    fn default() -> Self {
        AdversaryParams {
            n: None,
            m: None,
            c: None,
            levels: None,
            seed: 0,
            phases: default_phases(),
            size_cap: DEFAULT_SIZE_CAP,
        }
    }
}

mod opt_rational {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::cost::ExtendedCost;

    pub fn serialize<S: Serializer>(v: &Option<BigRational>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(r) => s.serialize_str(&crate::cost::format_rational(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigRational>, D::Error> {
        let v = Option::<ExtendedCost>::deserialize(d)?;
        match v {
            None => Ok(None),
            Some(ExtendedCost::Finite(r)) => Ok(Some(r)),
            Some(ExtendedCost::Infinite) => Err(serde::de::Error::custom("C must be finite")),
        }
    }
}

impl AdversaryParams {
    fn need(&self, v: Option<usize>, what: &str) -> Result<usize> {
        v.ok_or_else(|| Error::InvalidParameter(format!("missing parameter {what}")))
    }
}

pub const ADVERSARY_NAMES: [&str; 7] = [
    "two-request-uniform",
    "multi-group-uniform",
    "paired-uniform",
    "cube-mss",
    "subset-labeled-hst",
    "meta-sequence",
    "lift-construction",
];

/// Builds a construction by name.
pub fn by_name(name: &str, p: &AdversaryParams) -> Result<Box<dyn Adversary>> {
    Ok(match name {
        "two-request-uniform" => {
            let n = p.need(p.n, "n")?;
            Box::new(TwoRequestUniform::new(n, p.c.clone(), p.seed, p.phases)?)
        }
        "multi-group-uniform" => {
            let n = p.need(p.n, "n")?;
            let m = p.need(p.m, "m")?;
            Box::new(MultiGroupUniform::new(n, m, p.c.clone(), p.seed, p.phases)?)
        }
        "paired-uniform" => {
            let n = p.need(p.n, "n")?;
            Box::new(PairedUniform::new(n, p.c.clone(), p.phases)?)
        }
        "cube-mss" => {
            let n = p.need(p.n, "n")?;
            let m = p.need(p.m, "m")?;
            Box::new(CubeMss::new(n, m, p.seed, p.phases)?)
        }
        "subset-labeled-hst" => {
            let m = p.need(p.m, "m")?;
            Box::new(SubsetLabeledHst::new(m, p.c.clone(), p.phases, p.size_cap)?)
        }
        "meta-sequence" => {
            let m = p.need(p.m, "m")?;
            Box::new(LiftedConstruction::new(m, 2, p.c.clone(), p.seed, p.phases, p.size_cap)?)
        }
        "lift-construction" => {
            let m = p.need(p.m, "m")?;
            let levels = p.levels.unwrap_or(3);
            Box::new(LiftedConstruction::new(m, levels, p.c.clone(), p.seed, p.phases, p.size_cap)?)
        }
        other => return Err(Error::Unknown(format!("adversary '{other}'"))),
    })
}

pub(crate) fn int(v: usize) -> BigRational {
    rat(v as i64, 1)
}

pub(crate) fn require_aspect(c: &BigRational) -> Result<()> {
    if *c <= int(1) {
        return Err(Error::InvalidParameter("C must exceed 1".into()));
    }
    Ok(())
}
