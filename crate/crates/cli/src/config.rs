//! Experiment configuration: one JSON document per run.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use penreg::concentration::MonteCarloConfig;
use penreg::constants::{recommended_tuning, ConeSpec, ReConfig};
use penreg::geometry::DykstraConfig;
use penreg::model::{DesignMatrix, Observation, Problem, ProblemDocument};
use penreg::penalties::{slope_weights, GroupPartition, Penalty, PenaltyDocument, PenaltyKind};
use penreg::solvers::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    VerifyGeometry,
    Constants,
    Simulate,
    Report,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Solve => "solve",
            Command::VerifyGeometry => "verify-geometry",
            Command::Constants => "constants",
            Command::Simulate => "simulate",
            Command::Report => "report",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub problem: Option<ProblemSource>,
    #[serde(default)]
    pub penalty: Option<PenaltyConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub monte_carlo: MonteCarloConfig,
    #[serde(default)]
    pub geometry: GeometryOptions,
    #[serde(default)]
    pub constants: ConstantsOptions,
    #[serde(default)]
    pub coverage: Option<CoverageConfig>,
    /// Base seed for noise draws; `--seed` replaces it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Directory whose artifacts `report` aggregates; defaults to the output
    /// directory.
    #[serde(default)]
    pub report_dir: Option<PathBuf>,
}

/// Where the design and mean vector come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSource {
    /// i.i.d. N(0, 1) entries, columns rescaled to `|x_j|² = n`, and a
    /// planted `β*` with `f = Xβ*`.
    Gaussian {
        n: usize,
        p: usize,
        sigma: f64,
        /// Nonzero coordinates of `β*`; defaults to `0..sparsity`.
        #[serde(default)]
        support: Option<Vec<usize>>,
        #[serde(default)]
        sparsity: usize,
        #[serde(default = "one")]
        magnitude: f64,
        #[serde(default)]
        design_seed: u64,
    },
    /// `X = √n·Q` with `Q` a random orthogonal matrix, so `XᵀX/n = I`.
    Orthonormal {
        n: usize,
        sigma: f64,
        #[serde(default)]
        support: Option<Vec<usize>>,
        #[serde(default)]
        sparsity: usize,
        #[serde(default = "one")]
        magnitude: f64,
        #[serde(default)]
        design_seed: u64,
    },
    Inline {
        document: ProblemDocument,
    },
    /// A problem JSON document; relative paths resolve against the config file.
    File {
        path: PathBuf,
    },
}

struct Signal {
    sigma: f64,
    support: Vec<usize>,
    magnitude: f64,
    design_seed: u64,
}

impl ProblemSource {
    fn signal(&self) -> Option<Signal> {
        match self {
            ProblemSource::Gaussian {
                sigma,
                support,
                sparsity,
                magnitude,
                design_seed,
                ..
            }
            | ProblemSource::Orthonormal {
                sigma,
                support,
                sparsity,
                magnitude,
                design_seed,
                ..
            } => Some(Signal {
                sigma: *sigma,
                support: support.clone().unwrap_or_else(|| (0..*sparsity).collect()),
                magnitude: *magnitude,
                design_seed: *design_seed,
            }),
            _ => None,
        }
    }
}

fn one() -> f64 {
    1.0
}

/// A penalty document whose scale may be omitted; the recommended tuning
/// fills it in. `group_size` is shorthand for a contiguous partition, and
/// SLOPE weights default to `μ_j = σ√(log(2p/j)/n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyConfig {
    pub kind: PenaltyKind,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(rename = "A", default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub group_size: Option<usize>,
    #[serde(default)]
    pub partition: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub mu: Option<Vec<f64>>,
    #[serde(default)]
    pub extremal_points: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub admissible_sets: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryOptions {
    /// Observations for the projection identity.
    pub instances: usize,
    /// Pairs `(y, y′)` for the contraction check.
    pub pairs: usize,
    pub tol: f64,
    /// Sampled points of the dual ball, for kinds without a constraint list.
    pub samples: usize,
    pub rel_gap_tol: f64,
    pub dykstra: DykstraConfig,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        Self {
            instances: 10,
            pairs: 100,
            tol: 1e-6,
            samples: 1000,
            rel_gap_tol: 1e-14,
            dykstra: DykstraConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsOptions {
    pub re: ReConfig,
    /// Cone constants for the natural cone of the penalty at each `c₀`.
    pub c0_grid: Vec<f64>,
    /// Explicit cone specifications; replace the derived ones when given.
    pub specs: Option<Vec<ConeSpec>>,
}

impl Default for ConstantsOptions {
    fn default() -> Self {
        Self {
            re: ReConfig::default(),
            c0_grid: vec![3.0],
            specs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageConfig {
    /// Oracle support: coordinates, or group indices for the group LASSO.
    /// Defaults to the planted support.
    pub support: Option<Vec<usize>>,
    /// RE-type constant; estimated when omitted.
    pub constant: Option<f64>,
    pub c0: f64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            support: None,
            constant: None,
            c0: 3.0,
        }
    }
}

/// Reads and validates a config file, naming the offending field on failure.
pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    parse(&text).with_context(|| format!("config {}", path.display()))
}

pub fn parse(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            anyhow!("{}", e.inner())
        } else {
            anyhow!("field `{path}`: {}", e.inner())
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let needs_problem = self.command != Command::Report;
        if needs_problem && self.problem.is_none() {
            bail!("field `problem`: required for command `{}`", self.command);
        }
        if needs_problem && self.penalty.is_none() {
            bail!("field `penalty`: required for command `{}`", self.command);
        }
        self.solver.validate().context("field `solver`")?;
        if self.command == Command::Simulate {
            self.monte_carlo.validate().context("field `monte_carlo`")?;
        }
        if let Some(signal) = self.problem.as_ref().and_then(ProblemSource::signal) {
            if !(signal.sigma > 0.0 && signal.sigma.is_finite()) {
                bail!(
                    "field `problem.sigma`: must be positive, got {}",
                    signal.sigma
                );
            }
        }
        if let Some(cov) = &self.coverage {
            if !(cov.c0 > 0.0 && cov.c0.is_finite()) {
                bail!("field `coverage.c0`: must be positive, got {}", cov.c0);
            }
        }
        if self
            .constants
            .c0_grid
            .iter()
            .any(|c| !(*c > 0.0 && c.is_finite()))
        {
            bail!("field `constants.c0_grid`: entries must be positive");
        }
        let g = &self.geometry;
        if !(g.tol >= 0.0 && g.rel_gap_tol > 0.0) {
            bail!("field `geometry`: tol must be >= 0 and rel_gap_tol > 0");
        }
        Ok(())
    }

    /// The config as hashed in the manifest: canonical JSON of the parsed
    /// document, so formatting changes do not alter the hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// A problem with its planted support (empty when unknown).
pub struct Built {
    pub problem: Problem,
    /// Stored observation of a problem document, if it has one.
    pub observation: Option<Observation>,
    pub support: Vec<usize>,
    pub design_seed: Option<u64>,
}

pub fn build_problem(source: &ProblemSource, base_dir: &Path) -> Result<Built> {
    let design = match source {
        ProblemSource::Gaussian {
            n, p, design_seed, ..
        } => DesignMatrix::gaussian_normalized(*n, *p, *design_seed),
        ProblemSource::Orthonormal { n, design_seed, .. } => {
            DesignMatrix::orthonormal(*n, *design_seed)
        }
        ProblemSource::Inline { document } => {
            return from_document(document).context("field `problem.document`")
        }
        ProblemSource::File { path } => {
            let full = base_dir.join(path);
            let text = std::fs::read_to_string(&full)
                .with_context(|| format!("field `problem.path`: reading {}", full.display()))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            let doc: ProblemDocument = serde_path_to_error::deserialize(de)
                .map_err(|e| anyhow!("{}: field `{}`: {}", full.display(), e.path(), e.inner()))?;
            return from_document(&doc).with_context(|| full.display().to_string());
        }
    }
    .context("field `problem`")?;
    let signal = source.signal().expect("generated problems carry a signal");
    let mut beta = DVector::zeros(design.p());
    for &j in &signal.support {
        if j >= design.p() {
            bail!(
                "field `problem.support`: index {j} out of range (p = {})",
                design.p()
            );
        }
        beta[j] = signal.magnitude;
    }
    let support: BTreeSet<usize> = signal.support.into_iter().collect();
    Ok(Built {
        problem: Problem::planted(design, &beta, signal.sigma)?,
        observation: None,
        support: support.into_iter().collect(),
        design_seed: Some(signal.design_seed),
    })
}

fn from_document(doc: &ProblemDocument) -> Result<Built> {
    let problem = doc.to_problem()?;
    let observation = doc.to_observation(&problem)?;
    Ok(Built {
        problem,
        observation,
        support: Vec::new(),
        design_seed: None,
    })
}

pub fn build_penalty(cfg: &PenaltyConfig, problem: &Problem) -> Result<Penalty> {
    let (n, p) = (problem.n(), problem.p());
    let partition = match (&cfg.partition, cfg.group_size) {
        (Some(groups), _) => Some(groups.clone()),
        (None, Some(t)) => Some(
            GroupPartition::contiguous(p, t)
                .context("field `penalty.group_size`")?
                .groups()
                .to_vec(),
        ),
        (None, None) => None,
    };
    let mu = match (&cfg.mu, cfg.kind) {
        (Some(mu), _) => Some(mu.clone()),
        (None, PenaltyKind::Slope) => Some(slope_weights(p, n, problem.sigma)?.as_slice().to_vec()),
        _ => None,
    };
    let doc = PenaltyDocument {
        kind: cfg.kind,
        lambda: Some(cfg.lambda.unwrap_or(1.0)),
        a: Some(cfg.a.unwrap_or(1.0)),
        partition,
        mu,
        extremal_points: cfg.extremal_points.clone(),
        admissible_sets: cfg.admissible_sets.clone(),
    };
    let unit = Penalty::try_from(doc).context("field `penalty`")?;
    unit.check_dim(p).context("field `penalty`")?;
    let given = match cfg.kind {
        PenaltyKind::Slope => cfg.a,
        _ => cfg.lambda,
    };
    let scale = match given {
        Some(s) => s,
        None => recommended_tuning(&unit, &problem.design, problem.sigma)?,
    };
    unit.with_scale(scale).context("field `penalty`")
}

/// The cone the oracle inequality for `pen` uses, with `support` in the
/// penalty's own indexing (groups for the group LASSO).
pub fn natural_cone(pen: &Penalty, support: &[usize], c0: f64) -> Result<ConeSpec> {
    Ok(match pen {
        Penalty::L1 { .. } => ConeSpec::Re {
            support: support.to_vec(),
            c0,
        },
        Penalty::GroupL2 { partition, .. } => ConeSpec::GroupRe {
            partition: partition.clone(),
            groups: support.to_vec(),
            c0,
        },
        Penalty::SortedL1 { weights, .. } => ConeSpec::Wre {
            s: support.len(),
            c0,
            weights: weights.clone(),
        },
        Penalty::ConeNorm { cone, .. } => ConeSpec::ConeQ {
            cone: cone.clone(),
            support: support.to_vec(),
            c0,
        },
    })
}

/// Maps a coordinate support to the groups that contain it.
pub fn groups_touching(partition: &GroupPartition, support: &[usize]) -> Vec<usize> {
    partition
        .groups()
        .iter()
        .enumerate()
        .filter(|(_, g)| g.iter().any(|j| support.contains(j)))
        .map(|(k, _)| k)
        .collect()
}
