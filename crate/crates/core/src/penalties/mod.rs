//! Penalty norms: ℓ1, group ℓ2, sorted ℓ1 (SLOPE) and cone-generated norms.
//!
//! Every penalty is a scaled norm `F = λ·N` (or `A·|·|_*` for SLOPE). The
//! `dual_norm` of a penalty includes the scale, so `dual_norm(v) ≤ 1` is the
//! unit ball of `F`'s dual: `vᵀβ ≤ dual_norm(v)·F(β)`.

pub mod cone;
pub mod slope;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};

pub use cone::{ConeNormEval, PolyhedralCone};

/// Partition of `{0, …, p−1}` into `M` groups of common size `T`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
    group_size: usize,
    p: usize,
}

impl TryFrom<Vec<Vec<usize>>> for GroupPartition {
    type Error = Error;

    fn try_from(groups: Vec<Vec<usize>>) -> Result<Self> {
        let p = groups.iter().map(Vec::len).sum();
        Self::new(groups, p)
    }
}

impl From<GroupPartition> for Vec<Vec<usize>> {
    fn from(g: GroupPartition) -> Self {
        g.groups
    }
}

impl GroupPartition {
    pub fn new(groups: Vec<Vec<usize>>, p: usize) -> Result<Self> {
        if groups.is_empty() || p == 0 {
            return invalid("partition needs at least one group and p >= 1");
        }
        let t = groups[0].len();
        if t == 0 {
            return invalid("groups must be non-empty");
        }
        let mut seen = vec![false; p];
        for (k, g) in groups.iter().enumerate() {
            if g.len() != t {
                return invalid(format!("group {k} has size {} (expected {t})", g.len()));
            }
            for &j in g {
                if j >= p {
                    return invalid(format!("group {k} has index {j} >= p = {p}"));
                }
                if seen[j] {
                    return invalid(format!("index {j} appears in more than one group"));
                }
                seen[j] = true;
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return invalid(format!("index {j} is not covered by any group"));
        }
        Ok(Self {
            groups,
            group_size: t,
            p,
        })
    }

    /// Consecutive groups `{0..T}, {T..2T}, …`.
    pub fn contiguous(p: usize, group_size: usize) -> Result<Self> {
        if group_size == 0 || !p.is_multiple_of(group_size) {
            return invalid(format!("group size {group_size} does not divide p = {p}"));
        }
        let groups = (0..p / group_size)
            .map(|k| (k * group_size..(k + 1) * group_size).collect())
            .collect();
        Self::new(groups, p)
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Coordinates covered by the listed groups.
    pub fn coordinates(&self, group_ids: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = group_ids
            .iter()
            .flat_map(|&k| self.groups[k].iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    pub fn is_union_of_groups(&self, set: &[usize]) -> bool {
        let mut inside = vec![false; self.p];
        for &j in set {
            if j >= self.p {
                return false;
            }
            inside[j] = true;
        }
        self.groups.iter().all(|g| {
            let first = inside[g[0]];
            g.iter().all(|&j| inside[j] == first)
        })
    }

    fn block_norms<'a>(&'a self, v: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        self.groups
            .iter()
            .map(move |g| g.iter().map(|&j| v[j] * v[j]).sum::<f64>().sqrt())
    }
}

/// SLOPE weights `μ_1 ≥ … ≥ μ_p > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SlopeWeights(Vec<f64>);

impl TryFrom<Vec<f64>> for SlopeWeights {
    type Error = Error;

    fn try_from(mu: Vec<f64>) -> Result<Self> {
        Self::new(mu)
    }
}

impl From<SlopeWeights> for Vec<f64> {
    fn from(w: SlopeWeights) -> Self {
        w.0
    }
}

impl SlopeWeights {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return invalid("SLOPE weights must be non-empty");
        }
        if mu.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return invalid("SLOPE weights must be positive and finite");
        }
        if mu.windows(2).any(|w| w[1] > w[0]) {
            return invalid("SLOPE weights must be non-increasing");
        }
        Ok(Self(mu))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(Σ_{j≤s} μ_j²)^{1/2}`.
    pub fn head_norm(&self, s: usize) -> f64 {
        self.0[..s.min(self.0.len())]
            .iter()
            .map(|m| m * m)
            .sum::<f64>()
            .sqrt()
    }
}

/// `μ_j = σ·sqrt(log(2p/j)/n)` for `j = 1, …, p`.
pub fn slope_weights(p: usize, n: usize, sigma: f64) -> Result<SlopeWeights> {
    if p == 0 || n == 0 {
        return invalid("slope weights need p >= 1 and n >= 1");
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return invalid("sigma must be positive");
    }
    let mu = (1..=p)
        .map(|j| sigma * ((2.0 * p as f64 / j as f64).ln() / n as f64).sqrt())
        .collect();
    SlopeWeights::new(mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    L1,
    Group,
    Slope,
    Cone,
}

impl PenaltyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PenaltyKind::L1 => "l1",
            PenaltyKind::Group => "group",
            PenaltyKind::Slope => "slope",
            PenaltyKind::Cone => "cone",
        }
    }
}

impl std::fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Penalty `F` of the penalized least-squares problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PenaltyDocument", into = "PenaltyDocument")]
pub enum Penalty {
    /// `λ|β|₁`
    L1 { lambda: f64 },
    /// `λ Σ_k |β_{G_k}|₂`
    GroupL2 {
        partition: GroupPartition,
        lambda: f64,
    },
    /// `A Σ_j μ_j β*_j`
    SortedL1 { a_scale: f64, weights: SlopeWeights },
    /// `λ‖β‖_A`
    ConeNorm { cone: PolyhedralCone, lambda: f64 },
}

fn check_scale(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be positive and finite, got {v}"))
    }
}

impl Penalty {
    pub fn l1(lambda: f64) -> Result<Self> {
        check_scale("lambda", lambda)?;
        Ok(Penalty::L1 { lambda })
    }

    pub fn group(partition: GroupPartition, lambda: f64) -> Result<Self> {
        check_scale("lambda", lambda)?;
        Ok(Penalty::GroupL2 { partition, lambda })
    }

    pub fn slope(a_scale: f64, weights: SlopeWeights) -> Result<Self> {
        check_scale("A", a_scale)?;
        Ok(Penalty::SortedL1 { a_scale, weights })
    }

    pub fn cone(cone: PolyhedralCone, lambda: f64) -> Result<Self> {
        check_scale("lambda", lambda)?;
        Ok(Penalty::ConeNorm { cone, lambda })
    }

    pub fn kind(&self) -> PenaltyKind {
        match self {
            Penalty::L1 { .. } => PenaltyKind::L1,
            Penalty::GroupL2 { .. } => PenaltyKind::Group,
            Penalty::SortedL1 { .. } => PenaltyKind::Slope,
            Penalty::ConeNorm { .. } => PenaltyKind::Cone,
        }
    }

    /// `λ`, or `A` for SLOPE.
    pub fn scale(&self) -> f64 {
        match self {
            Penalty::L1 { lambda }
            | Penalty::GroupL2 { lambda, .. }
            | Penalty::ConeNorm { lambda, .. } => *lambda,
            Penalty::SortedL1 { a_scale, .. } => *a_scale,
        }
    }

    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        check_scale("penalty scale", scale)?;
        let mut out = self.clone();
        match &mut out {
            Penalty::L1 { lambda }
            | Penalty::GroupL2 { lambda, .. }
            | Penalty::ConeNorm { lambda, .. } => *lambda = scale,
            Penalty::SortedL1 { a_scale, .. } => *a_scale = scale,
        }
        Ok(out)
    }

    /// The underlying norm (`λ = 1` or `A = 1`).
    pub fn unit(&self) -> Self {
        self.with_scale(1.0).expect("unit scale is valid")
    }

    /// Required vector length, if the penalty fixes one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Penalty::L1 { .. } => None,
            Penalty::GroupL2 { partition, .. } => Some(partition.p()),
            Penalty::SortedL1 { weights, .. } => Some(weights.len()),
            Penalty::ConeNorm { cone, .. } => Some(cone.dim()),
        }
    }

    pub fn check_dim(&self, len: usize) -> Result<()> {
        match self.dim() {
            Some(p) => check_dim("penalty dimension", p, len),
            None => Ok(()),
        }
    }

    /// `F(β)`.
    pub fn value(&self, beta: &DVector<f64>) -> Result<f64> {
        self.check_dim(beta.len())?;
        let b = beta.as_slice();
        Ok(match self {
            Penalty::L1 { lambda } => lambda * b.iter().map(|v| v.abs()).sum::<f64>(),
            Penalty::GroupL2 { partition, lambda } => {
                lambda * partition.block_norms(b).sum::<f64>()
            }
            Penalty::SortedL1 { a_scale, weights } => {
                a_scale * slope::sorted_l1_norm(weights.as_slice(), b)
            }
            Penalty::ConeNorm { cone, lambda } => lambda * cone.norm(b)?.value,
        })
    }

    /// Dual norm of `F`: `sup_{F(β) ≤ 1} vᵀβ`.
    pub fn dual_norm(&self, v: &DVector<f64>) -> Result<f64> {
        self.check_dim(v.len())?;
        let x = v.as_slice();
        Ok(match self {
            Penalty::L1 { lambda } => x.iter().fold(0.0_f64, |m, a| m.max(a.abs())) / lambda,
            Penalty::GroupL2 { partition, lambda } => {
                partition.block_norms(x).fold(0.0_f64, f64::max) / lambda
            }
            Penalty::SortedL1 { a_scale, weights } => {
                slope::sorted_l1_dual(weights.as_slice(), x) / a_scale
            }
            Penalty::ConeNorm { cone, lambda } => cone.dual_norm(x) / lambda,
        })
    }

    /// `argmin_b ½|b − v|² + step·F(b)`.
    pub fn prox(&self, v: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
        self.check_dim(v.len())?;
        if !(step > 0.0 && step.is_finite()) {
            return invalid(format!("prox step must be positive, got {step}"));
        }
        let x = v.as_slice();
        let out = match self {
            Penalty::L1 { lambda } => {
                let t = step * lambda;
                x.iter().map(|&a| soft_threshold(a, t)).collect()
            }
            Penalty::GroupL2 { partition, lambda } => {
                let t = step * lambda;
                let mut out = x.to_vec();
                for (g, norm) in partition.groups().iter().zip(partition.block_norms(x)) {
                    let shrink = if norm > t { 1.0 - t / norm } else { 0.0 };
                    for &j in g {
                        out[j] *= shrink;
                    }
                }
                out
            }
            Penalty::SortedL1 { a_scale, weights } => {
                let thresholds: Vec<f64> = weights
                    .as_slice()
                    .iter()
                    .map(|m| step * a_scale * m)
                    .collect();
                slope::prox_sorted_l1(x, &thresholds)
            }
            Penalty::ConeNorm { cone, lambda } => cone.prox(x, step * lambda)?,
        };
        Ok(DVector::from_vec(out))
    }

    /// A subgradient `v` of the unit norm `N = F/scale` at `β`. For `β ≠ 0`
    /// it satisfies `N∘(v) = 1` and `vᵀβ = N(β)`; at `β = 0` it returns `0`.
    pub fn subgradient(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(beta.len())?;
        let b = beta.as_slice();
        let p = b.len();
        let mut v = vec![0.0; p];
        if b.iter().all(|&x| x == 0.0) {
            return Ok(DVector::from_vec(v));
        }
        match self {
            Penalty::L1 { .. } => {
                for (vj, &bj) in v.iter_mut().zip(b) {
                    if bj != 0.0 {
                        *vj = bj.signum();
                    }
                }
            }
            Penalty::GroupL2 { partition, .. } => {
                for (g, norm) in partition.groups().iter().zip(partition.block_norms(b)) {
                    if norm > 0.0 {
                        for &j in g {
                            v[j] = b[j] / norm;
                        }
                    }
                }
            }
            Penalty::SortedL1 { weights, .. } => {
                let order = slope::order_by_magnitude(b);
                for (&j, &m) in order.iter().zip(weights.as_slice()) {
                    v[j] = if b[j] < 0.0 { -m } else { m };
                }
            }
            Penalty::ConeNorm { cone, .. } => {
                let ev = cone.norm(b)?;
                if !ev.value.is_finite() {
                    return invalid("cone norm is infinite at this point");
                }
                for j in 0..p {
                    if b[j] != 0.0 {
                        v[j] = b[j] / (ev.a[j] * ev.value);
                    }
                }
            }
        }
        Ok(DVector::from_vec(v))
    }
}

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// JSON form `{kind, lambda | A, partition, mu, extremal_points}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PenaltyDocument {
    pub kind: PenaltyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extremal_points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admissible_sets: Option<Vec<Vec<usize>>>,
}

fn required<T>(field: Option<T>, name: &str, kind: PenaltyKind) -> Result<T> {
    field.ok_or_else(|| Error::Validation(format!("penalty kind `{kind}` requires field `{name}`")))
}

impl TryFrom<PenaltyDocument> for Penalty {
    type Error = Error;

    fn try_from(d: PenaltyDocument) -> Result<Self> {
        let kind = d.kind;
        match kind {
            PenaltyKind::L1 => Penalty::l1(required(d.lambda, "lambda", kind)?),
            PenaltyKind::Group => {
                let groups = required(d.partition, "partition", kind)?;
                Penalty::group(groups.try_into()?, required(d.lambda, "lambda", kind)?)
            }
            PenaltyKind::Slope => Penalty::slope(
                required(d.a, "A", kind)?,
                SlopeWeights::new(required(d.mu, "mu", kind)?)?,
            ),
            PenaltyKind::Cone => {
                let lambda = required(d.lambda, "lambda", kind)?;
                let cone = match (d.extremal_points, d.partition) {
                    (Some(points), partition) => {
                        let cone =
                            PolyhedralCone::new(points, d.admissible_sets.unwrap_or_default())?;
                        match partition {
                            Some(groups) => {
                                let part = GroupPartition::new(groups, cone.dim())?;
                                cone.with_blocks(part)?
                            }
                            None => cone,
                        }
                    }
                    (None, Some(groups)) => {
                        let part: GroupPartition = groups.try_into()?;
                        let admissible = d.admissible_sets.unwrap_or_default();
                        let points = PolyhedralCone::blocks(&part).extremal_points().to_vec();
                        PolyhedralCone::new(points, admissible)?.with_blocks(part)?
                    }
                    (None, None) => {
                        return invalid(
                            "penalty kind `cone` requires `extremal_points` or `partition`",
                        )
                    }
                };
                Penalty::cone(cone, lambda)
            }
        }
    }
}

impl From<Penalty> for PenaltyDocument {
    fn from(p: Penalty) -> Self {
        let mut d = PenaltyDocument {
            kind: p.kind(),
            lambda: None,
            a: None,
            partition: None,
            mu: None,
            extremal_points: None,
            admissible_sets: None,
        };
        match p {
            Penalty::L1 { lambda } => d.lambda = Some(lambda),
            Penalty::GroupL2 { partition, lambda } => {
                d.lambda = Some(lambda);
                d.partition = Some(partition.groups().to_vec());
            }
            Penalty::SortedL1 { a_scale, weights } => {
                d.a = Some(a_scale);
                d.mu = Some(weights.as_slice().to_vec());
            }
            Penalty::ConeNorm { cone, lambda } => {
                d.lambda = Some(lambda);
                d.partition = cone.block_partition().map(|b| b.groups().to_vec());
                if !cone.admissible_sets().is_empty() {
                    d.admissible_sets = Some(cone.admissible_sets().to_vec());
                }
                d.extremal_points = Some(cone.extremal_points().to_vec());
            }
        }
        d
    }
}

/// Outcome of checking `‖β‖_A = ‖β_S‖_A + ‖β_{Sᶜ}‖_A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub pass: bool,
}

/// Checks the additive decomposition of a cone norm along a declared
/// admissible set `S`. Passes iff `|lhs − rhs| ≤ 1e-6·(1 + lhs)`.
pub fn decomposition_check(
    cone: &PolyhedralCone,
    set: &[usize],
    beta: &DVector<f64>,
) -> Result<DecompositionReport> {
    check_dim("beta", cone.dim(), beta.len())?;
    if set.iter().any(|&j| j >= cone.dim()) {
        return invalid(format!("index set {set:?} out of range"));
    }
    if !cone.is_admissible(set) {
        return Err(Error::NotAdmissible(set.to_vec()));
    }
    let mut inside = vec![false; cone.dim()];
    for &j in set {
        inside[j] = true;
    }
    let (mut bs, mut bc) = (beta.clone(), beta.clone());
    for j in 0..cone.dim() {
        if inside[j] {
            bc[j] = 0.0;
        } else {
            bs[j] = 0.0;
        }
    }
    let lhs = cone.norm(beta.as_slice())?.value;
    let rhs = cone.norm(bs.as_slice())?.value + cone.norm(bc.as_slice())?.value;
    let residual = (lhs - rhs).abs();
    Ok(DecompositionReport {
        lhs,
        rhs,
        residual,
        pass: residual <= 1e-6 * (1.0 + lhs),
    })
}
