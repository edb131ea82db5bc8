use serde::{Deserialize, Serialize};

use crate::barrier::SolverOptions;
use crate::ellipsoid::{Ellipsoid, IntersectionSpec, SizeCriterion};
use crate::error::Result;

use super::weights::WeightVector;
use super::{inscribed, parametric, sdp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FullSdp,
    SProcedure,
    DecoupledSdp,
    InscribedInflate,
    BoundingNoDelta,
    BoundingOptimal,
    CovarianceIntersection,
    RecursiveBounding,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::FullSdp,
        Method::SProcedure,
        Method::DecoupledSdp,
        Method::InscribedInflate,
        Method::BoundingNoDelta,
        Method::BoundingOptimal,
        Method::CovarianceIntersection,
        Method::RecursiveBounding,
    ];

    /// Short tag used on the command line.
    pub fn tag(self) -> &'static str {
        match self {
            Method::FullSdp => "sdp",
            Method::SProcedure => "sproc",
            Method::DecoupledSdp => "decoupled",
            Method::InscribedInflate => "inscribed",
            Method::BoundingNoDelta => "bounding",
            Method::BoundingOptimal => "bounding-opt",
            Method::CovarianceIntersection => "ci",
            Method::RecursiveBounding => "recursive",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.tag() == tag)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxOptions {
    pub solver: SolverOptions,
    /// Start count for the bounding-optimal search, barycenter and vertices
    /// included.
    pub multistarts: usize,
    pub multistart_seed: u64,
    /// Projected-gradient iteration cap per start.
    pub max_iterations: usize,
    /// Whether the recursive method tightens each pairwise fusion by `1 − δ`.
    pub recursive_scale_delta: bool,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        RelaxOptions {
            solver: SolverOptions::default(),
            multistarts: 16,
            multistart_seed: 0x5eed,
            max_iterations: 2000,
            recursive_scale_delta: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub ellipsoid: Ellipsoid,
    /// Size of `ellipsoid` under the requested criterion.
    pub objective: f64,
    pub weights: Option<WeightVector>,
    pub diagnostics: serde_json::Value,
}

pub fn run_method(
    method: Method,
    spec: &IntersectionSpec,
    criterion: SizeCriterion,
    opts: &RelaxOptions,
) -> Result<MethodResult> {
    match method {
        Method::FullSdp => sdp::full_sdp(spec, criterion, opts),
        Method::SProcedure => sdp::s_procedure(spec, criterion, opts),
        Method::DecoupledSdp => sdp::decoupled_sdp(spec, criterion, opts),
        Method::InscribedInflate => inscribed::inscribed_inflate(spec, criterion, opts),
        Method::BoundingNoDelta => parametric::bounding_no_delta(spec, criterion, opts),
        Method::BoundingOptimal => parametric::bounding_optimal(spec, criterion, opts),
        Method::CovarianceIntersection => parametric::covariance_intersection(spec, criterion, opts),
        Method::RecursiveBounding => {
            parametric::recursive_bounding(spec, criterion, opts.recursive_scale_delta)
        }
    }
}
