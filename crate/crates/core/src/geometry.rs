//! Dual-ball geometry of norm-penalized least squares.
//!
//! For `F = λN` the fit is the residual of a Euclidean projection,
//! `Xβ̂(y) = y − P_C(y)` with `C = {u : N∘(Xᵀu) ≤ nλ}`; equivalently
//! `Penalty::dual_norm(Xᵀu) ≤ n`. This module builds `C` for the ℓ1 and group
//! penalties as an intersection of slabs or cylinders, projects onto it by
//! Dykstra's algorithm, and certifies the projection identity and the
//! contraction of `y ↦ Xβ̂(y)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::model::{sn, standard_normal_vector, DesignMatrix, Observation, Problem};
use crate::penalties::Penalty;
use crate::report::CheckReport;
use crate::solvers::{solve, SolverConfig};

/// Closed convex set with an exact Euclidean projection.
pub trait ConvexSet: Send + Sync {
    fn dim(&self) -> usize;

    /// Replaces `u` by its projection.
    fn project_in_place(&self, u: &mut DVector<f64>);

    fn project(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut out = u.clone();
        self.project_in_place(&mut out);
        out
    }

    /// Euclidean distance from `u` to the set.
    fn distance(&self, u: &DVector<f64>) -> f64 {
        (self.project(u) - u).norm()
    }
}

/// `{u : |aᵀu| ≤ b}`
#[derive(Debug, Clone)]
pub struct Slab {
    normal: DVector<f64>,
    bound: f64,
    norm2: f64,
}

impl Slab {
    pub fn new(normal: DVector<f64>, bound: f64) -> Result<Self> {
        if !(bound >= 0.0) {
            return invalid("slab bound must be nonnegative");
        }
        let norm2 = normal.norm_squared();
        Ok(Self {
            normal,
            bound,
            norm2,
        })
    }
}

impl ConvexSet for Slab {
    fn dim(&self) -> usize {
        self.normal.len()
    }

    fn project_in_place(&self, u: &mut DVector<f64>) {
        if self.norm2 == 0.0 {
            return;
        }
        let c = self.normal.dot(u);
        if c.abs() > self.bound {
            let excess = c - self.bound.copysign(c);
            u.axpy(-excess / self.norm2, &self.normal, 1.0);
        }
    }
}

/// `{u : aᵀu ≤ b}`
#[derive(Debug, Clone)]
pub struct HalfSpace {
    normal: DVector<f64>,
    bound: f64,
    norm2: f64,
}

impl HalfSpace {
    pub fn new(normal: DVector<f64>, bound: f64) -> Result<Self> {
        let norm2 = normal.norm_squared();
        if norm2 == 0.0 && bound < 0.0 {
            return invalid("half-space with zero normal and negative bound is empty");
        }
        Ok(Self {
            normal,
            bound,
            norm2,
        })
    }
}

impl ConvexSet for HalfSpace {
    fn dim(&self) -> usize {
        self.normal.len()
    }

    fn project_in_place(&self, u: &mut DVector<f64>) {
        if self.norm2 == 0.0 {
            return;
        }
        let c = self.normal.dot(u);
        if c > self.bound {
            u.axpy(-(c - self.bound) / self.norm2, &self.normal, 1.0);
        }
    }
}

/// `{u : |Mᵀu|₂ ≤ r}` for an `n × k` matrix `M`.
///
/// With the thin SVD `M = U S Vᵀ`, only the coordinates `c = Uᵀu` are
/// constrained; the projection is `c_i / (1 + μ s_i²)` with `μ ≥ 0` the root of
/// `Σ s_i² c_i² / (1 + μ s_i²)² = r²`.
#[derive(Debug, Clone)]
pub struct Cylinder {
    basis: DMatrix<f64>,
    singular: Vec<f64>,
    radius: f64,
}

impl Cylinder {
    pub fn new(m: &DMatrix<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return invalid("cylinder radius must be nonnegative");
        }
        let svd = m.clone().svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let smax = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > 1e-13 * smax.max(f64::MIN_POSITIVE))
            .collect();
        let basis = u.select_columns(&keep);
        let singular = keep.iter().map(|&i| svd.singular_values[i]).collect();
        Ok(Self {
            basis,
            singular,
            radius,
        })
    }
}

impl ConvexSet for Cylinder {
    fn dim(&self) -> usize {
        self.basis.nrows()
    }

    fn project_in_place(&self, u: &mut DVector<f64>) {
        let c = self.basis.tr_mul(u);
        let r2 = self.radius * self.radius;
        let phi = |mu: f64| -> f64 {
            c.iter()
                .zip(&self.singular)
                .map(|(&ci, &si)| {
                    let d = 1.0 + mu * si * si;
                    si * si * ci * ci / (d * d)
                })
                .sum()
        };
        if phi(0.0) <= r2 {
            return;
        }
        if r2 == 0.0 {
            *u -= &self.basis * &c;
            return;
        }
        // phi is decreasing in μ: bracket, then bisect.
        let mut lo = 0.0;
        let mut hi = 1.0
            / self
                .singular
                .iter()
                .fold(f64::INFINITY, |a, &s| a.min(s * s));
        while phi(hi) > r2 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) > r2 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let mu = hi;
        let mut delta = c.clone();
        for (di, &si) in delta.iter_mut().zip(&self.singular) {
            *di *= 1.0 / (1.0 + mu * si * si) - 1.0;
        }
        u.gemv(1.0, &self.basis, &delta, 1.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DykstraConfig {
    /// Stop once the correction increments of a full cycle have norm `≤ tol`
    /// and every set is within `tol`.
    pub tol: f64,
    pub max_cycles: usize,
}

impl Default for DykstraConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_cycles: 200_000,
        }
    }
}

/// Projection of `y` onto the intersection of `sets` by Dykstra's algorithm.
pub fn dykstra(
    sets: &[Box<dyn ConvexSet>],
    y: &DVector<f64>,
    cfg: &DykstraConfig,
) -> Result<DVector<f64>> {
    if sets.is_empty() {
        return Ok(y.clone());
    }
    for s in sets {
        check_dim("convex set dimension", y.len(), s.dim())?;
    }
    let mut x = y.clone();
    let mut corr = vec![DVector::zeros(y.len()); sets.len()];
    let mut z = DVector::zeros(y.len());
    let mut change = f64::INFINITY;
    for _ in 0..cfg.max_cycles {
        change = 0.0;
        for (set, p) in sets.iter().zip(corr.iter_mut()) {
            z.copy_from(&x);
            z += &*p;
            x.copy_from(&z);
            set.project_in_place(&mut x);
            // new correction: z − x
            let mut d2 = 0.0;
            for i in 0..x.len() {
                let np = z[i] - x[i];
                d2 += (np - p[i]) * (np - p[i]);
                p[i] = np;
            }
            change += d2;
        }
        if change.sqrt() <= cfg.tol && sets.iter().all(|s| s.distance(&x) <= cfg.tol) {
            return Ok(x);
        }
    }
    Err(Error::NonConvergence {
        what: "Dykstra projection",
        iters: cfg.max_cycles,
        residual: change.sqrt(),
    })
}

/// The set `C = {u ∈ ℝⁿ : Penalty::dual_norm(Xᵀu) ≤ n}`.
#[derive(Debug, Clone)]
pub struct DualBall {
    design: DesignMatrix,
    penalty: Penalty,
}

impl DualBall {
    pub fn new(design: &DesignMatrix, penalty: &Penalty) -> Result<Self> {
        penalty.check_dim(design.p())?;
        Ok(Self {
            design: design.clone(),
            penalty: penalty.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn penalty(&self) -> &Penalty {
        &self.penalty
    }

    /// `dual_norm(Xᵀu)/n`; `u ∈ C` iff this is `≤ 1`.
    pub fn gauge(&self, u: &DVector<f64>) -> Result<f64> {
        check_dim("dual-ball point", self.n(), u.len())?;
        Ok(self.penalty.dual_norm(&self.design.apply_t(u))? / self.n() as f64)
    }

    /// Slabs `|x_jᵀu| ≤ nλ` for ℓ1, cylinders `|X_Gᵀu|₂ ≤ nλ` for groups.
    pub fn constraint_sets(&self) -> Result<Vec<Box<dyn ConvexSet>>> {
        let nf = self.n() as f64;
        let x = self.design.matrix();
        match &self.penalty {
            Penalty::L1 { lambda } => (0..self.design.p())
                .map(|j| {
                    Slab::new(x.column(j).into_owned(), nf * lambda)
                        .map(|s| Box::new(s) as Box<dyn ConvexSet>)
                })
                .collect(),
            Penalty::GroupL2 { partition, lambda } => partition
                .groups()
                .iter()
                .map(|g| {
                    Cylinder::new(&x.select_columns(g), nf * lambda)
                        .map(|c| Box::new(c) as Box<dyn ConvexSet>)
                })
                .collect(),
            other => invalid(format!(
                "no constraint list for the {} dual ball",
                other.kind()
            )),
        }
    }

    /// A point of `C`: a Gaussian direction with a uniform random length in
    /// `[0, 2/gauge]`, pulled back into `C` by `1/max(1, gauge)`. About half of
    /// the draws land on the boundary.
    pub fn sample(&self, seed: u64) -> Result<DVector<f64>> {
        let g = standard_normal_vector(self.n(), seed);
        let k = self.gauge(&g)?;
        if k == 0.0 {
            return Ok(g);
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5DEE_CE66_D1CE_0001);
        let u = g * (rng.random_range(0.0..2.0) / k);
        let ku = self.gauge(&u)?;
        Ok(if ku > 1.0 { u / ku } else { u })
    }
}

/// Projection onto the dual ball of an ℓ1 or group penalty.
pub fn dual_ball_project(y: &DVector<f64>, ball: &DualBall, tol: f64) -> Result<DVector<f64>> {
    check_dim("projected point", ball.n(), y.len())?;
    let sets = ball.constraint_sets()?;
    dykstra(
        &sets,
        y,
        &DykstraConfig {
            tol,
            ..DykstraConfig::default()
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub solver: SolverConfig,
    pub dykstra: DykstraConfig,
    /// End-to-end tolerance on each certified inequality.
    pub tol: f64,
    /// Sampled points of `C` for the variational inequality.
    pub samples: usize,
    pub seed: u64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            // Fit errors are ≈ sqrt(gap); a 1e-6 end-to-end tolerance needs
            // gaps well below 1e-12.
            solver: SolverConfig::default().with_rel_gap(1e-14),
            dykstra: DykstraConfig::default(),
            tol: 1e-6,
            samples: 1000,
            seed: 0,
        }
    }
}

fn solved_fit(
    y: &DVector<f64>,
    x: &DesignMatrix,
    pen: &Penalty,
    cfg: &SolverConfig,
) -> Result<DVector<f64>> {
    let res = solve(y, x, pen, cfg)?;
    if !res.converged {
        return Err(Error::NonConvergence {
            what: "penalized least squares solve",
            iters: res.iters,
            residual: res.gap,
        });
    }
    Ok(res.fitted)
}

/// Certifies `Xβ̂(y) = y − P_C(y)`.
///
/// For ℓ1 and group penalties both sides are computed independently and the
/// slack is `tol − ‖Xβ̂ − (y − P_C(y))‖`. For the other kinds, `θ = y − Xβ̂`
/// must lie in `C` (gauge `≤ 1 + tol`) and satisfy
/// `(1/n)(y − θ)ᵀ(θ − u′) ≥ −tol` for sampled `u′ ∈ C`.
pub fn projection_identity_check(
    problem: &Problem,
    observation: &Observation,
    pen: &Penalty,
    cfg: &GeometryConfig,
) -> Result<CheckReport> {
    let x = &problem.design;
    let y = &observation.y;
    let ball = DualBall::new(x, pen)?;
    let fit = solved_fit(y, x, pen, &cfg.solver)?;
    let theta = y - &fit;
    let mut report = CheckReport::new("projection_identity");
    match pen {
        Penalty::L1 { .. } | Penalty::GroupL2 { .. } => {
            let proj = dykstra(&ball.constraint_sets()?, y, &cfg.dykstra)?;
            let diff = &theta - &proj;
            report.record(cfg.tol - sn(diff.as_slice()));
        }
        _ => {
            report.record(cfg.tol - (ball.gauge(&theta)? - 1.0));
            let nf = problem.n() as f64;
            let mut seeds = ChaCha20Rng::seed_from_u64(cfg.seed);
            for _ in 0..cfg.samples {
                let u = ball.sample(seeds.random())?;
                report.record(cfg.tol + fit.dot(&(&theta - u)) / nf);
            }
        }
    }
    Ok(report)
}

/// Certifies `‖Xβ̂(y) − Xβ̂(y′)‖ ≤ ‖y − y′‖` for every pair and, for ℓ1 and
/// group penalties, the firm bound
/// `‖Xβ̂(y) − Xβ̂(y′)‖² ≤ ‖y − y′‖² − ‖P_C(y) − P_C(y′)‖²` using Dykstra
/// projections. Returns the contraction report followed by the firm report
/// when applicable.
pub fn contraction_check(
    x: &DesignMatrix,
    pen: &Penalty,
    pairs: &[(DVector<f64>, DVector<f64>)],
    cfg: &GeometryConfig,
) -> Result<Vec<CheckReport>> {
    let ball = DualBall::new(x, pen)?;
    let sets = match pen {
        Penalty::L1 { .. } | Penalty::GroupL2 { .. } => Some(ball.constraint_sets()?),
        _ => None,
    };
    let slacks: Vec<(f64, Option<f64>)> = pairs
        .par_iter()
        .map(|(y1, y2)| -> Result<(f64, Option<f64>)> {
            let f1 = solved_fit(y1, x, pen, &cfg.solver)?;
            let f2 = solved_fit(y2, x, pen, &cfg.solver)?;
            let fit_gap = sn((&f1 - &f2).as_slice());
            let dy = sn((y1 - y2).as_slice());
            let firm = match &sets {
                Some(sets) => {
                    let p1 = dykstra(sets, y1, &cfg.dykstra)?;
                    let p2 = dykstra(sets, y2, &cfg.dykstra)?;
                    let dp = sn((&p1 - &p2).as_slice());
                    Some(cfg.tol + dy * dy - dp * dp - fit_gap * fit_gap)
                }
                None => None,
            };
            Ok((cfg.tol + dy - fit_gap, firm))
        })
        .collect::<Result<_>>()?;
    let mut contraction = CheckReport::new("contraction");
    let mut firm = CheckReport::new("firm_nonexpansiveness");
    for (c, f) in slacks {
        contraction.record(c);
        if let Some(f) = f {
            firm.record(f);
        }
    }
    let mut out = vec![contraction];
    if sets.is_some() {
        out.push(firm);
    }
    Ok(out)
}
