//! Restricted-eigenvalue type constants, recommended tuning parameters,
//! oracle-bound values and best sparse approximations.
//!
//! The RE-type constants are minima of `‖XΔ‖²/den(Δ)` over nonconvex cones
//! `{Δ : tail(Δ) ≤ head(Δ)}`. They are estimated by multistart projected
//! gradient: at each iterate the cone is replaced by the convex inner cone
//! `{tail_lin(Δ) ≤ gᵀΔ}` obtained by linearizing `head` (and, for the weighted
//! cone, freezing the tail coordinates), which contains the iterate. Every
//! iterate therefore stays in the true cone and each estimate is an upper bound
//! on the constant.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::model::{replication_seed, sn, DesignMatrix, Problem};
use crate::normal::std_normal_quantile;
use crate::penalties::slope::{decreasing_rearrangement, order_by_magnitude, prox_sorted_l1};
use crate::penalties::{GroupPartition, Penalty, PolyhedralCone, SlopeWeights};

/// Cone and denominator of an RE-type constant. Index sets are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConeSpec {
    /// `κ(S, c₀)`: `|Δ_{Sᶜ}|₁ ≤ c₀|Δ_S|₁`, denominator `|Δ|₂²`.
    Re { support: Vec<usize>, c0: f64 },
    /// `κ_G(S, c₀)` with `S` a set of group indices.
    GroupRe {
        partition: GroupPartition,
        groups: Vec<usize>,
        c0: f64,
    },
    /// `ϑ(s, c₀)`: `Σ_{j>s} μ_j δ*_j ≤ c₀(Σ_{j≤s} μ_j²)^{1/2}|Δ|₂`.
    Wre {
        s: usize,
        c0: f64,
        weights: SlopeWeights,
    },
    /// `q_A(S, c₀)`: `‖Δ_{Sᶜ}‖_A ≤ c₀‖Δ_S‖_A`, denominator `‖Δ_S‖_A²`.
    ConeQ {
        cone: PolyhedralCone,
        support: Vec<usize>,
        c0: f64,
    },
}

impl ConeSpec {
    pub fn c0(&self) -> f64 {
        match self {
            ConeSpec::Re { c0, .. }
            | ConeSpec::GroupRe { c0, .. }
            | ConeSpec::Wre { c0, .. }
            | ConeSpec::ConeQ { c0, .. } => *c0,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ConeSpec::Re { .. } => "re",
            ConeSpec::GroupRe { .. } => "group_re",
            ConeSpec::Wre { .. } => "wre",
            ConeSpec::ConeQ { .. } => "cone_q",
        }
    }

    /// `S` as it appears in reports: coordinates, group indices, or `s`.
    pub fn support_label(&self) -> String {
        let join = |v: &[usize]| {
            v.iter()
                .map(|j| j.to_string())
                .collect::<Vec<_>>()
                .join(";")
        };
        match self {
            ConeSpec::Re { support, .. } | ConeSpec::ConeQ { support, .. } => join(support),
            ConeSpec::GroupRe { groups, .. } => join(groups),
            ConeSpec::Wre { s, .. } => s.to_string(),
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let c0 = self.c0();
        if !(c0 > 0.0 && c0.is_finite()) {
            return invalid(format!("c0 must be positive, got {c0}"));
        }
        let check_set = |set: &[usize], limit: usize, what: &str| -> Result<()> {
            if set.is_empty() {
                return invalid(format!("{what} must be nonempty"));
            }
            if let Some(&j) = set.iter().find(|&&j| j >= limit) {
                return invalid(format!("{what} index {j} out of range (< {limit})"));
            }
            Ok(())
        };
        match self {
            ConeSpec::Re { support, .. } => check_set(support, p, "support"),
            ConeSpec::GroupRe {
                partition, groups, ..
            } => {
                check_dim("partition dimension", p, partition.p())?;
                check_set(groups, partition.num_groups(), "group set")
            }
            ConeSpec::Wre { s, weights, .. } => {
                check_dim("WRE weights", p, weights.len())?;
                if *s == 0 || *s > p {
                    return invalid(format!("WRE sparsity s = {s} must be in 1..={p}"));
                }
                Ok(())
            }
            ConeSpec::ConeQ { cone, support, .. } => {
                check_dim("cone dimension", p, cone.dim())?;
                check_set(support, p, "support")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReStatus {
    /// Known analytically (`XᵀX/n = I`).
    #[serde(rename = "exact")]
    Exact,
    /// Smallest ratio found; an upper bound on the constant.
    #[serde(rename = "multistart-estimate")]
    MultistartEstimate,
}

impl ReStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ReStatus::Exact => "exact",
            ReStatus::MultistartEstimate => "multistart-estimate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReEstimate {
    /// `sqrt(‖XΔ‖²/den(Δ))` at the witness.
    pub value: f64,
    /// Unit-norm `Δ` in the cone achieving `value`.
    pub witness: DVector<f64>,
    pub starts: usize,
    pub status: ReStatus,
    /// `max(0, tail(Δ) − head(Δ))` at the witness.
    pub cone_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReConfig {
    pub starts: usize,
    pub seed: u64,
    pub max_iters: usize,
}

impl Default for ReConfig {
    fn default() -> Self {
        Self {
            starts: 256,
            seed: 0,
            max_iters: 200,
        }
    }
}

/// One row of the constants CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantRow {
    pub kind: String,
    #[serde(rename = "S")]
    pub support: String,
    pub c0: f64,
    pub value: f64,
    pub status: String,
    pub starts: usize,
}

impl ConstantRow {
    pub fn new(spec: &ConeSpec, est: &ReEstimate) -> Self {
        Self {
            kind: spec.kind_name().to_string(),
            support: spec.support_label(),
            c0: spec.c0(),
            value: est.value,
            status: est.status.as_str().to_string(),
            starts: est.starts,
        }
    }
}

/// Cone geometry with everything precomputed for one specification.
#[allow(clippy::large_enum_variant)]
enum Shape {
    Re {
        in_s: Vec<bool>,
        c0: f64,
    },
    Group {
        partition: GroupPartition,
        in_s: Vec<bool>,
        c0: f64,
    },
    Wre {
        s: usize,
        head_scale: f64,
        mu: Vec<f64>,
    },
    ConeQ {
        support: Vec<usize>,
        complement: Vec<usize>,
        head_cone: PolyhedralCone,
        tail_cone: PolyhedralCone,
        c0: f64,
    },
}

fn masked(d: &DVector<f64>, keep: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; d.len()];
    for &j in keep {
        out[j] = d[j];
    }
    out
}

impl Shape {
    fn new(spec: &ConeSpec, p: usize) -> Self {
        let mask = |set: &[usize], len: usize| {
            let mut m = vec![false; len];
            for &j in set {
                m[j] = true;
            }
            m
        };
        match spec {
            ConeSpec::Re { support, c0 } => Shape::Re {
                in_s: mask(support, p),
                c0: *c0,
            },
            ConeSpec::GroupRe {
                partition,
                groups,
                c0,
            } => Shape::Group {
                partition: partition.clone(),
                in_s: mask(groups, partition.num_groups()),
                c0: *c0,
            },
            ConeSpec::Wre { s, c0, weights } => Shape::Wre {
                s: *s,
                head_scale: c0 * weights.head_norm(*s),
                mu: weights.as_slice().to_vec(),
            },
            ConeSpec::ConeQ { cone, support, c0 } => {
                let in_s = mask(support, p);
                let complement: Vec<usize> = (0..p).filter(|&j| !in_s[j]).collect();
                let mut support = support.clone();
                support.sort_unstable();
                support.dedup();
                Shape::ConeQ {
                    head_cone: cone.restricted(&support),
                    tail_cone: cone.restricted(&complement),
                    support,
                    complement,
                    c0: *c0,
                }
            }
        }
    }

    fn head(&self, d: &DVector<f64>) -> Result<f64> {
        Ok(match self {
            Shape::Re { in_s, c0 } => {
                c0 * d
                    .iter()
                    .zip(in_s)
                    .filter(|(_, &s)| s)
                    .map(|(v, _)| v.abs())
                    .sum::<f64>()
            }
            Shape::Group {
                partition,
                in_s,
                c0,
            } => {
                c0 * partition
                    .groups()
                    .iter()
                    .zip(in_s)
                    .filter(|(_, &s)| s)
                    .map(|(g, _)| g.iter().map(|&j| d[j] * d[j]).sum::<f64>().sqrt())
                    .sum::<f64>()
            }
            Shape::Wre { head_scale, .. } => head_scale * d.norm(),
            Shape::ConeQ {
                support,
                head_cone,
                c0,
                ..
            } => c0 * head_cone.norm(&masked(d, support))?.value,
        })
    }

    /// `g` with `gᵀd = head(d)` and `gᵀx ≤ head(x)` for all `x`.
    fn head_subgradient(&self, d: &DVector<f64>) -> Result<DVector<f64>> {
        let p = d.len();
        let mut g = DVector::zeros(p);
        match self {
            Shape::Re { in_s, c0 } => {
                for j in 0..p {
                    if in_s[j] && d[j] != 0.0 {
                        g[j] = c0 * d[j].signum();
                    }
                }
            }
            Shape::Group {
                partition,
                in_s,
                c0,
            } => {
                for (grp, _) in partition.groups().iter().zip(in_s).filter(|(_, &s)| s) {
                    let norm = grp.iter().map(|&j| d[j] * d[j]).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        for &j in grp {
                            g[j] = c0 * d[j] / norm;
                        }
                    }
                }
            }
            Shape::Wre { head_scale, .. } => {
                let norm = d.norm();
                if norm > 0.0 {
                    g = d * (head_scale / norm);
                }
            }
            Shape::ConeQ {
                support,
                head_cone,
                c0,
                ..
            } => {
                let ds = masked(d, support);
                let ev = head_cone.norm(&ds)?;
                if ev.value > 0.0 && ev.value.is_finite() {
                    for &j in support {
                        if ds[j] != 0.0 {
                            g[j] = c0 * ds[j] / (ev.a[j] * ev.value);
                        }
                    }
                }
            }
        }
        Ok(g)
    }

    /// The exact (nonlinearized) tail.
    fn tail(&self, d: &DVector<f64>) -> Result<f64> {
        Ok(match self {
            Shape::Re { in_s, .. } => d
                .iter()
                .zip(in_s)
                .filter(|(_, &s)| !s)
                .map(|(v, _)| v.abs())
                .sum(),
            Shape::Group {
                partition, in_s, ..
            } => partition
                .groups()
                .iter()
                .zip(in_s)
                .filter(|(_, &s)| !s)
                .map(|(g, _)| g.iter().map(|&j| d[j] * d[j]).sum::<f64>().sqrt())
                .sum(),
            Shape::Wre { s, mu, .. } => decreasing_rearrangement(d.as_slice())
                .iter()
                .zip(mu)
                .skip(*s)
                .map(|(a, m)| a * m)
                .sum(),
            Shape::ConeQ {
                complement,
                tail_cone,
                ..
            } => tail_cone.norm(&masked(d, complement))?.value,
        })
    }

    /// Tail coordinates frozen at `anchor` (only the weighted cone needs it).
    fn frozen(&self, anchor: &DVector<f64>) -> Vec<usize> {
        match self {
            Shape::Wre { s, .. } => order_by_magnitude(anchor.as_slice())[*s..].to_vec(),
            _ => Vec::new(),
        }
    }

    /// Convex upper bound on the tail, exact at the anchor.
    fn tail_lin(&self, d: &DVector<f64>, frozen: &[usize]) -> Result<f64> {
        match self {
            Shape::Wre { s, mu, .. } => {
                let sub: Vec<f64> = frozen.iter().map(|&j| d[j]).collect();
                Ok(crate::penalties::slope::sorted_l1_norm(&mu[*s..], &sub))
            }
            _ => self.tail(d),
        }
    }

    /// `prox_{τ·tail_lin}(z)`.
    fn tail_prox(&self, z: &DVector<f64>, tau: f64, frozen: &[usize]) -> Result<DVector<f64>> {
        let mut out = z.clone();
        match self {
            Shape::Re { in_s, .. } => {
                for (v, &s) in out.iter_mut().zip(in_s) {
                    if !s {
                        *v = crate::penalties::soft_threshold(*v, tau);
                    }
                }
            }
            Shape::Group {
                partition, in_s, ..
            } => {
                for (g, _) in partition.groups().iter().zip(in_s).filter(|(_, &s)| !s) {
                    let norm = g.iter().map(|&j| z[j] * z[j]).sum::<f64>().sqrt();
                    let f = if norm > tau { 1.0 - tau / norm } else { 0.0 };
                    for &j in g {
                        out[j] *= f;
                    }
                }
            }
            Shape::Wre { s, mu, .. } => {
                let sub: Vec<f64> = frozen.iter().map(|&j| z[j]).collect();
                let thr: Vec<f64> = mu[*s..].iter().map(|m| tau * m).collect();
                for (&j, v) in frozen.iter().zip(prox_sorted_l1(&sub, &thr)) {
                    out[j] = v;
                }
            }
            Shape::ConeQ {
                complement,
                tail_cone,
                ..
            } => {
                let b = tail_cone.prox(&masked(z, complement), tau)?;
                for &j in complement {
                    out[j] = b[j];
                }
            }
        }
        Ok(out)
    }

    /// Euclidean projection of `z` onto `{tail_lin(Δ) ≤ gᵀΔ}`.
    fn project(
        &self,
        z: &DVector<f64>,
        g: &DVector<f64>,
        frozen: &[usize],
    ) -> Result<DVector<f64>> {
        let phi = |d: &DVector<f64>| -> Result<f64> { Ok(self.tail_lin(d, frozen)? - g.dot(d)) };
        if phi(z)? <= 0.0 {
            return Ok(z.clone());
        }
        let at = |tau: f64| self.tail_prox(&(z + g * tau), tau, frozen);
        let scale = z.norm() * g.norm().max(1.0);
        let mut lo = 0.0;
        let mut f_lo = phi(z)?;
        let mut hi = 1e-3 * z.norm().max(1e-300) / g.norm().max(1.0);
        let mut d_hi = at(hi)?;
        let mut f_hi = phi(&d_hi)?;
        let mut doublings = 0;
        while f_hi > 0.0 {
            lo = hi;
            f_lo = f_hi;
            hi *= 2.0;
            d_hi = at(hi)?;
            f_hi = phi(&d_hi)?;
            doublings += 1;
            if doublings > 200 {
                return Err(Error::NonConvergence {
                    what: "cone projection bracket",
                    iters: doublings,
                    residual: f_hi,
                });
            }
        }
        // φ(Δ(τ)) is nonincreasing in τ. Illinois regula falsi, keeping the
        // feasible endpoint `hi`.
        let mut side = 0;
        for _ in 0..200 {
            if hi - lo <= 1e-12 * hi || f_hi >= -1e-13 * scale {
                break;
            }
            let mut mid = hi - f_hi * (hi - lo) / (f_hi - f_lo);
            if !(mid > lo && mid < hi) {
                mid = 0.5 * (lo + hi);
            }
            let d_mid = at(mid)?;
            let f_mid = phi(&d_mid)?;
            if f_mid > 0.0 {
                lo = mid;
                f_lo = f_mid;
                if side == -1 {
                    f_hi *= 0.5;
                }
                side = -1;
            } else {
                hi = mid;
                f_hi = f_mid;
                d_hi = d_mid;
                if side == 1 {
                    f_lo *= 0.5;
                }
                side = 1;
            }
        }
        Ok(d_hi)
    }

    fn is_euclidean(&self) -> bool {
        !matches!(self, Shape::ConeQ { .. })
    }

    /// Denominator and its gradient.
    fn denominator(&self, d: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        match self {
            Shape::ConeQ {
                support, head_cone, ..
            } => {
                let ds = masked(d, support);
                let ev = head_cone.norm(&ds)?;
                let mut grad = DVector::zeros(d.len());
                if ev.value > 0.0 && ev.value.is_finite() {
                    for &j in support {
                        if ds[j] != 0.0 {
                            grad[j] = 2.0 * ds[j] / ev.a[j];
                        }
                    }
                }
                Ok((ev.value * ev.value, grad))
            }
            _ => Ok((d.norm_squared(), d * 2.0)),
        }
    }
}

struct Objective<'a> {
    gram: &'a DMatrix<f64>,
    shape: &'a Shape,
}

impl Objective<'_> {
    fn ratio(&self, d: &DVector<f64>) -> Result<f64> {
        let q = d.dot(&(self.gram * d));
        let (den, _) = self.shape.denominator(d)?;
        Ok(if den > 0.0 { q / den } else { f64::INFINITY })
    }

    fn ratio_grad(&self, d: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let gd = self.gram * d;
        let q = d.dot(&gd);
        let (den, dgrad) = self.shape.denominator(d)?;
        let r = q / den;
        Ok((r, (gd * 2.0 - dgrad * r) / den))
    }

    /// Projected gradient from a start in the cone. Returns the final ratio
    /// and iterate.
    fn descend(&self, start: DVector<f64>, max_iters: usize) -> Result<(f64, DVector<f64>)> {
        let mut d = start.normalize();
        let mut r = self.ratio(&d)?;
        let mut eta = 0.5;
        for _ in 0..max_iters {
            let (_, grad) = self.ratio_grad(&d)?;
            let g = self.shape.head_subgradient(&d)?;
            let frozen = self.shape.frozen(&d);
            let mut improved = false;
            while eta > 1e-14 {
                let cand = self.shape.project(&(&d - &grad * eta), &g, &frozen)?;
                let norm = cand.norm();
                if norm > 0.0 {
                    let cand = cand / norm;
                    let rc = self.ratio(&cand)?;
                    if rc < r {
                        let gain = r - rc;
                        d = cand;
                        r = rc;
                        eta *= 2.0;
                        improved = gain > 1e-10 * r.max(1e-12);
                        break;
                    }
                }
                eta *= 0.5;
            }
            if !improved {
                break;
            }
        }
        Ok((r, d))
    }
}

fn is_identity(gram: &DMatrix<f64>) -> bool {
    gram.iter().enumerate().all(|(k, &v)| {
        let (i, j) = (k % gram.nrows(), k / gram.nrows());
        let target = if i == j { 1.0 } else { 0.0 };
        (v - target).abs() <= 1e-12
    })
}

/// Multistart estimate of an RE-type constant with `budget` starts.
pub fn re_type_constant(x: &DesignMatrix, spec: &ConeSpec, budget: usize) -> Result<ReEstimate> {
    re_type_constant_with(
        x,
        spec,
        &ReConfig {
            starts: budget,
            ..ReConfig::default()
        },
    )
}

pub fn re_type_constant_with(
    x: &DesignMatrix,
    spec: &ConeSpec,
    cfg: &ReConfig,
) -> Result<ReEstimate> {
    let p = x.p();
    spec.validate(p)?;
    if cfg.starts == 0 {
        return invalid("RE estimation needs at least one start");
    }
    let gram = x.gram();
    let shape = Shape::new(spec, p);
    let obj = Objective {
        gram: &gram,
        shape: &shape,
    };

    if shape.is_euclidean() && is_identity(&gram) {
        let j = match spec {
            ConeSpec::Re { support, .. } => support[0],
            ConeSpec::GroupRe {
                partition, groups, ..
            } => partition.groups()[groups[0]][0],
            _ => 0,
        };
        let mut witness = DVector::zeros(p);
        witness[j] = 1.0;
        return Ok(ReEstimate {
            value: 1.0,
            cone_residual: (shape.tail(&witness)? - shape.head(&witness)?).max(0.0),
            witness,
            starts: 0,
            status: ReStatus::Exact,
        });
    }

    // Deterministic starts: coordinate vectors inside the head set.
    let mut seeds: Vec<DVector<f64>> = Vec::new();
    let head_coords: Vec<usize> = match spec {
        ConeSpec::Re { support, .. } | ConeSpec::ConeQ { support, .. } => support.clone(),
        ConeSpec::GroupRe {
            partition, groups, ..
        } => partition.coordinates(groups),
        ConeSpec::Wre { .. } => (0..p).collect(),
    };
    for &j in head_coords.iter().take(cfg.starts) {
        let mut e = DVector::zeros(p);
        e[j] = 1.0;
        seeds.push(e);
    }

    let mut results: Vec<(usize, f64, DVector<f64>)> = (0..cfg.starts)
        .into_par_iter()
        .map(|k| -> Result<Option<(usize, f64, DVector<f64>)>> {
            let start = if k < seeds.len() {
                seeds[k].clone()
            } else {
                let mut rng = ChaCha20Rng::seed_from_u64(replication_seed(cfg.seed, k as u64));
                let z = DVector::from_iterator(p, (0..p).map(|_| StandardNormal.sample(&mut rng)));
                let g = shape.head_subgradient(&z)?;
                let proj = shape.project(&z, &g, &shape.frozen(&z))?;
                if proj.norm() == 0.0 || shape.head(&proj)? == 0.0 {
                    return Ok(None);
                }
                proj
            };
            let (r, d) = obj.descend(start, cfg.max_iters)?;
            Ok(Some((k, r, d)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    results.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let (_, _, witness) = results
        .into_iter()
        .next()
        .ok_or_else(|| Error::Validation("no start landed in the cone".into()))?;
    let ratio = obj.ratio(&witness)?;
    Ok(ReEstimate {
        value: ratio.max(0.0).sqrt(),
        cone_residual: (shape.tail(&witness)? - shape.head(&witness)?).max(0.0),
        witness,
        starts: cfg.starts,
        status: ReStatus::MultistartEstimate,
    })
}

/// `ψ* = max_k σ_max(X_{G_k})/√n`.
pub fn group_spectral_factor(x: &DesignMatrix, partition: &GroupPartition) -> Result<f64> {
    check_dim("partition dimension", x.p(), partition.p())?;
    let sn = (x.n() as f64).sqrt();
    Ok(partition
        .groups()
        .iter()
        .map(|g| {
            x.columns(g)
                .svd(false, false)
                .singular_values
                .iter()
                .fold(0.0_f64, |m, &s| m.max(s))
        })
        .fold(0.0_f64, f64::max)
        / sn)
}

/// Smallest tuning parameter covered by the oracle inequalities (`λ`, or
/// `A` for SLOPE). The current scale of `pen` is ignored.
pub fn recommended_tuning(pen: &Penalty, x: &DesignMatrix, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return invalid(format!("sigma must be positive, got {sigma}"));
    }
    pen.check_dim(x.p())?;
    let (n, p) = (x.n() as f64, x.p());
    Ok(match pen {
        Penalty::L1 { .. } => {
            if p < 2 {
                return invalid("the LASSO tuning needs p >= 2");
            }
            2.0 * sigma * (2.0 * (p as f64).ln() / n).sqrt()
        }
        Penalty::GroupL2 { partition, .. } => {
            let psi = group_spectral_factor(x, partition)?;
            let t = partition.group_size() as f64;
            let m = partition.num_groups() as f64;
            2.0 * sigma / n.sqrt() * (t.sqrt() + psi * (2.0 * (2.0 * m).ln()).sqrt())
        }
        Penalty::ConeNorm { cone, .. } => {
            let e = cone.num_extremal_points() as f64;
            2.0 * sigma / n.sqrt() * (1.0 + (2.0 * (2.0 * e).ln()).sqrt())
        }
        Penalty::SortedL1 { .. } => 8.0,
    })
}

/// The penalty rescaled to its recommended tuning.
pub fn with_recommended_tuning(pen: &Penalty, x: &DesignMatrix, sigma: f64) -> Result<Penalty> {
    pen.with_scale(recommended_tuning(pen, x, sigma)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseApproximation {
    /// Length `p`, zero outside the support.
    pub beta: DVector<f64>,
    /// `‖Xβ − f‖`
    pub error: f64,
}

/// Least-squares projection of `f` onto the span of the columns in `support`
/// (minimum-norm coefficients under rank deficiency).
pub fn best_sparse_approximation(
    f: &DVector<f64>,
    x: &DesignMatrix,
    support: &[usize],
) -> Result<SparseApproximation> {
    check_dim("mean vector", x.n(), f.len())?;
    if let Some(&j) = support.iter().find(|&&j| j >= x.p()) {
        return invalid(format!("support index {j} out of range"));
    }
    let mut beta = DVector::zeros(x.p());
    if !support.is_empty() {
        let xs = x.columns(support);
        let svd = xs.svd(true, true);
        let smax = svd.singular_values.iter().fold(0.0_f64, |m, &s| m.max(s));
        let eps = smax * f64::EPSILON * (x.n().max(support.len()) as f64);
        let coef = svd
            .solve(f, eps)
            .map_err(|e| Error::Validation(e.to_string()))?;
        for (k, &j) in support.iter().enumerate() {
            beta[j] += coef[k];
        }
    }
    let error = sn((x.apply(&beta) - f).as_slice());
    Ok(SparseApproximation { beta, error })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleBound {
    /// `min_{supp β = S} ‖Xβ − f‖`
    pub approximation: f64,
    /// Penalty-specific remainder of the root bound.
    pub remainder: f64,
    /// Deterministic squared bound on the good event: approximation² + remainder².
    pub squared_bound: f64,
    /// With probability `≥ 1 − δ`: approximation + remainder + σΦ⁻¹(1−δ)/√n.
    /// Without `δ` the last term is omitted.
    pub root_bound: f64,
    /// Bound on the expected error: approximation + remainder + σ/√(2πn).
    pub expectation_bound: f64,
    /// `3·approximation² + 3·remainder² + 6σ² log(1/δ)/n` (absent without `δ`).
    pub corollary_squared: Option<f64>,
}

/// Oracle bound for support `S` given an RE-type constant.
///
/// `support` lists coordinates, except for the group penalty where it lists
/// group indices. `constant` is `κ`, `κ_G`, `q_A` or `ϑ` as appropriate; a
/// zero constant gives `+∞` remainders.
pub fn oracle_bound(
    pen: &Penalty,
    problem: &Problem,
    support: &[usize],
    constant: f64,
    delta: Option<f64>,
) -> Result<OracleBound> {
    if !(constant >= 0.0) {
        return invalid(format!("RE-type constant must be >= 0, got {constant}"));
    }
    if let Some(d) = delta {
        if !(d > 0.0 && d < 1.0) {
            return invalid(format!("delta must be in (0, 1), got {d}"));
        }
    }
    pen.check_dim(problem.p())?;
    let sigma = problem.sigma;
    let n = problem.n() as f64;
    let coords = match pen {
        Penalty::GroupL2 { partition, .. } => {
            if let Some(&k) = support.iter().find(|&&k| k >= partition.num_groups()) {
                return invalid(format!("group index {k} out of range"));
            }
            partition.coordinates(support)
        }
        _ => support.to_vec(),
    };
    let approximation = best_sparse_approximation(&problem.mean, &problem.design, &coords)?.error;
    let size = support.len() as f64;
    let numerator = match pen {
        Penalty::L1 { lambda } | Penalty::GroupL2 { lambda, .. } => 1.5 * lambda * size.sqrt(),
        Penalty::ConeNorm { lambda, .. } => 1.5 * lambda,
        Penalty::SortedL1 { a_scale, .. } => {
            let s = size.max(1.0);
            let p = problem.p() as f64;
            1.5 * sigma * a_scale * (s * (2.0 * std::f64::consts::E * p / s).ln() / n).sqrt()
        }
    };
    let remainder = if numerator == 0.0 {
        0.0
    } else if constant == 0.0 {
        f64::INFINITY
    } else {
        numerator / constant
    };
    let base = approximation + remainder;
    let root_bound = match delta {
        Some(d) => base + sigma * std_normal_quantile(1.0 - d)? / n.sqrt(),
        None => base,
    };
    Ok(OracleBound {
        approximation,
        remainder,
        squared_bound: approximation.powi(2) + remainder.powi(2),
        root_bound,
        expectation_bound: base + sigma / (2.0 * std::f64::consts::PI * n).sqrt(),
        corollary_squared: delta.map(|d| {
            3.0 * approximation.powi(2)
                + 3.0 * remainder.powi(2)
                + 6.0 * sigma * sigma * (1.0 / d).ln() / n
        }),
    })
}
