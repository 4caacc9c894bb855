//! Norms generated by a polyhedral cone of weights.
//!
//! With `P = hull(E ∪ {0})` for a finite set `E` of nonnegative points,
//!
//! ```text
//! ‖β‖_A  = inf_{a ∈ P} sqrt(Σ_j β_j² / a_j)      (β_j²/a_j := 0 when β_j = 0)
//! ‖v‖_A∘ = max_{a ∈ E} sqrt(Σ_j a_j v_j²)
//! ```
//!
//! Writing `a = Σ_e w_e e` with `w ≥ 0`, the norm is also
//! `inf_{w ≥ 0} ½(Σ_j β_j²/a_j + Σ_e w_e)`, which is jointly convex and
//! separable in the constraints. Evaluation and the proximal operator both
//! warm up with exact coordinate minimization over `w`, then switch to
//! projected Newton steps, and stop on a duality gap.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::GroupPartition;
use crate::error::{invalid, Error, Result};

const EVAL_REL_GAP: f64 = 1e-12;
const PROX_REL_GAP: f64 = 1e-14;
const MAX_SWEEPS: usize = 20_000;
const STALL_REL_GAP: f64 = 1e-8;
/// Coordinate sweeps before Newton steps take over.
const WARM_SWEEPS: usize = 20;

/// Cone described by the extremal points of its section by the ℓ1 ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConeDocument", into = "ConeDocument")]
pub struct PolyhedralCone {
    points: Vec<Vec<f64>>,
    admissible_sets: Vec<Vec<usize>>,
    blocks: Option<GroupPartition>,
    sparse: Vec<Vec<(usize, f64)>>,
}

#[derive(Serialize, Deserialize)]
struct ConeDocument {
    extremal_points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    admissible_sets: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    partition: Option<Vec<Vec<usize>>>,
}

impl TryFrom<ConeDocument> for PolyhedralCone {
    type Error = Error;

    fn try_from(doc: ConeDocument) -> Result<Self> {
        let cone = Self::new(doc.extremal_points, doc.admissible_sets)?;
        match doc.partition {
            Some(groups) => {
                let partition = GroupPartition::new(groups, cone.dim())?;
                cone.with_blocks(partition)
            }
            None => Ok(cone),
        }
    }
}

impl From<PolyhedralCone> for ConeDocument {
    fn from(c: PolyhedralCone) -> Self {
        Self {
            extremal_points: c.points,
            admissible_sets: c.admissible_sets,
            partition: c.blocks.map(|b| b.groups().to_vec()),
        }
    }
}

impl PolyhedralCone {
    pub fn new(points: Vec<Vec<f64>>, admissible_sets: Vec<Vec<usize>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return invalid("cone needs at least one extremal point");
        };
        let p = first.len();
        if p == 0 {
            return invalid("extremal points must be non-empty vectors");
        }
        for (k, e) in points.iter().enumerate() {
            if e.len() != p {
                return invalid(format!(
                    "extremal point {k} has length {} (expected {p})",
                    e.len()
                ));
            }
            if e.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return invalid(format!(
                    "extremal point {k} has a negative or non-finite entry"
                ));
            }
            let l1: f64 = e.iter().sum();
            if l1 > 1.0 + 1e-12 {
                return invalid(format!("extremal point {k} has l1 norm {l1} > 1"));
            }
        }
        for s in &admissible_sets {
            if s.iter().any(|&j| j >= p) {
                return invalid(format!("admissible set {s:?} has an index >= {p}"));
            }
        }
        let sparse = points
            .iter()
            .map(|e| {
                e.iter()
                    .enumerate()
                    .filter(|(_, &v)| v > 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect()
            })
            .collect();
        Ok(Self {
            points,
            admissible_sets,
            blocks: None,
            sparse,
        })
    }

    /// Cone of positive vectors constant on each block; extremal points are
    /// `1_{G_k}/T`. Every union of blocks is admissible. On this cone
    /// `‖β‖_A = √T Σ_k |β_{G_k}|₂`.
    pub fn blocks(partition: &GroupPartition) -> Self {
        let p = partition.p();
        let t = partition.group_size() as f64;
        let points = partition
            .groups()
            .iter()
            .map(|g| {
                let mut e = vec![0.0; p];
                for &j in g {
                    e[j] = 1.0 / t;
                }
                e
            })
            .collect();
        let mut cone = Self::new(points, Vec::new()).expect("block extremal points are valid");
        cone.blocks = Some(partition.clone());
        cone
    }

    /// Marks this cone as the block cone of `partition`, so that unions of
    /// blocks count as admissible. Fails if the points are not `1_{G_k}/T`.
    pub fn with_blocks(mut self, partition: GroupPartition) -> Result<Self> {
        let expected = Self::blocks(&partition);
        let same = expected.points.len() == self.points.len()
            && expected.points.iter().zip(&self.points).all(|(a, b)| {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12)
            });
        if !same {
            return invalid("extremal points are not the block points of the partition");
        }
        self.blocks = Some(partition);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn extremal_points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn num_extremal_points(&self) -> usize {
        self.points.len()
    }

    pub fn admissible_sets(&self) -> &[Vec<usize>] {
        &self.admissible_sets
    }

    pub fn block_partition(&self) -> Option<&GroupPartition> {
        self.blocks.as_ref()
    }

    /// Declared admissibility: listed sets, unions of blocks for block cones,
    /// and the trivial sets `∅` and `{0, …, p−1}`.
    pub fn is_admissible(&self, set: &[usize]) -> bool {
        let mut s: Vec<usize> = set.to_vec();
        s.sort_unstable();
        s.dedup();
        if s.is_empty() || s.len() == self.dim() && s.last() == Some(&(self.dim() - 1)) {
            return true;
        }
        if self.admissible_sets.iter().any(|a| {
            let mut a = a.clone();
            a.sort_unstable();
            a.dedup();
            a == s
        }) {
            return true;
        }
        self.blocks
            .as_ref()
            .is_some_and(|b| b.is_union_of_groups(&s))
    }

    /// Same cone with every extremal point restricted to `coords`.
    pub fn restricted(&self, coords: &[usize]) -> Self {
        let mut keep = vec![false; self.dim()];
        for &j in coords {
            keep[j] = true;
        }
        let points = self
            .points
            .iter()
            .map(|e| {
                e.iter()
                    .enumerate()
                    .map(|(j, &v)| if keep[j] { v } else { 0.0 })
                    .collect()
            })
            .collect();
        Self::new(points, Vec::new()).expect("restriction keeps points valid")
    }

    /// `max_{a ∈ E} sqrt(Σ_j a_j v_j²)`.
    pub fn dual_norm(&self, v: &[f64]) -> f64 {
        self.sparse
            .iter()
            .map(|e| e.iter().map(|&(j, a)| a * v[j] * v[j]).sum::<f64>())
            .fold(0.0_f64, f64::max)
            .sqrt()
    }

    fn weights_to_a(&self, w: &[f64], p: usize) -> Vec<f64> {
        let mut a = vec![0.0; p];
        for (e, &we) in self.sparse.iter().zip(w) {
            if we > 0.0 {
                for &(j, v) in e {
                    a[j] += we * v;
                }
            }
        }
        a
    }

    /// Evaluates `‖β‖_A`. Returns `+∞` when some `β_j ≠ 0` is not covered by
    /// any extremal point.
    pub fn norm(&self, beta: &[f64]) -> Result<ConeNormEval> {
        let p = self.dim();
        let b2: Vec<f64> = beta.iter().map(|v| v * v).collect();
        if b2.iter().all(|&v| v == 0.0) {
            return Ok(ConeNormEval {
                value: 0.0,
                a: vec![0.0; p],
                rel_gap: 0.0,
            });
        }
        let mut covered = vec![false; p];
        for e in &self.sparse {
            for &(j, _) in e {
                covered[j] = true;
            }
        }
        if b2.iter().zip(&covered).any(|(&b, &c)| b > 0.0 && !c) {
            return Ok(ConeNormEval {
                value: f64::INFINITY,
                a: vec![0.0; p],
                rel_gap: 0.0,
            });
        }

        let m = self.sparse.len();
        let start = b2.iter().sum::<f64>().sqrt() / m as f64;
        let mut w = vec![start; m];
        let mut a = self.weights_to_a(&w, p);
        let mut last_gap = f64::INFINITY;
        let newton = WeightProblem {
            sparse: &self.sparse,
            q: &b2,
            mult: 1.0,
            shift: 0.0,
            kappa: 1.0,
        };
        let mut checkpoint = f64::INFINITY;
        for sweep in 0..MAX_SWEEPS {
            let newton_moved = sweep >= WARM_SWEEPS && newton.step(&mut w);
            if newton_moved {
                a = self.weights_to_a(&w, p);
            }
            // A coordinate sweep after each Newton step lets weights that are
            // fixed at zero re-enter.
            {
                for (k, e) in self.sparse.iter().enumerate() {
                    let wk = w[k];
                    let terms: Vec<(f64, f64, f64)> = e
                        .iter()
                        .map(|&(j, ej)| ((a[j] - wk * ej).max(0.0), ej, b2[j]))
                        .collect();
                    let new = coordinate_root(&terms, 0.0);
                    for &(j, ej) in e {
                        a[j] = (a[j] + (new - wk) * ej).max(0.0);
                    }
                    w[k] = new;
                }
            }
            // Refresh to avoid drift from incremental updates.
            a = self.weights_to_a(&w, p);
            let (upper, lower) = self.eval_bounds(&w, &a, &b2);
            let gap = ((upper - lower) / upper).max(0.0);
            // Progress can stall in floating point near degenerate optima; the
            // certificate is then accepted at a looser level.
            if sweep % 100 == 0 {
                checkpoint = gap;
            }
            let stalled = sweep >= WARM_SWEEPS
                && gap <= STALL_REL_GAP
                && (!newton_moved || (sweep % 100 == 99 && gap > 0.5 * checkpoint));
            if gap <= EVAL_REL_GAP || stalled || (sweep > 50 && gap >= last_gap && gap < 1e-10) {
                let total: f64 = w.iter().sum();
                return Ok(ConeNormEval {
                    value: upper,
                    a: a.iter().map(|v| v / total).collect(),
                    rel_gap: gap,
                });
            }
            last_gap = gap;
        }
        Err(Error::NonConvergence {
            what: "cone norm evaluation",
            iters: MAX_SWEEPS,
            residual: last_gap,
        })
    }

    fn eval_bounds(&self, w: &[f64], a: &[f64], b2: &[f64]) -> (f64, f64) {
        let total: f64 = w.iter().sum();
        let q: f64 = b2
            .iter()
            .zip(a)
            .filter(|(&b, _)| b > 0.0)
            .map(|(&b, &aj)| b / aj)
            .sum();
        let dual = self
            .sparse
            .iter()
            .map(|e| {
                e.iter()
                    .filter(|&&(j, _)| b2[j] > 0.0)
                    .map(|&(j, ej)| ej * b2[j] / (a[j] * a[j]))
                    .sum::<f64>()
            })
            .fold(0.0_f64, f64::max)
            .sqrt();
        ((total * q).sqrt(), q / dual)
    }

    /// `argmin_b ½|b − v|² + c‖b‖_A`.
    pub fn prox(&self, v: &[f64], c: f64) -> Result<Vec<f64>> {
        let p = self.dim();
        let v2: Vec<f64> = v.iter().map(|x| x * x).collect();
        let half_v2: f64 = 0.5 * v2.iter().sum::<f64>();
        if half_v2 == 0.0 {
            return Ok(vec![0.0; p]);
        }
        let m = self.sparse.len();
        let mut w = vec![0.0; m];
        let mut a = vec![0.0; p];
        let mut last_gap = f64::INFINITY;
        let newton = WeightProblem {
            sparse: &self.sparse,
            q: &v2,
            mult: c,
            shift: c,
            kappa: c,
        };
        for sweep in 0..MAX_SWEEPS {
            let mut moved = 0.0_f64;
            if sweep >= WARM_SWEEPS {
                let before = w.clone();
                if newton.step(&mut w) {
                    moved = w
                        .iter()
                        .zip(&before)
                        .map(|(n, o)| (n - o).abs() / (1.0 + n))
                        .fold(0.0, f64::max);
                    a = self.weights_to_a(&w, p);
                }
            }
            for (k, e) in self.sparse.iter().enumerate() {
                let wk = w[k];
                let terms: Vec<(f64, f64, f64)> = e
                    .iter()
                    .map(|&(j, ej)| ((a[j] - wk * ej).max(0.0), ej, v2[j]))
                    .collect();
                let new = coordinate_root(&terms, c);
                if new != wk {
                    for &(j, ej) in e {
                        a[j] = (a[j] + (new - wk) * ej).max(0.0);
                    }
                    moved = moved.max((new - wk).abs() / (1.0 + new));
                    w[k] = new;
                }
            }
            a = self.weights_to_a(&w, p);
            let gap = self.prox_gap(v, &v2, &w, &a, c);
            let scale = 1.0 + half_v2;
            if gap <= PROX_REL_GAP * scale || moved <= 1e-15 || (sweep > 50 && gap >= last_gap) {
                if gap > 1e-8 * scale {
                    return Err(Error::NonConvergence {
                        what: "cone norm prox",
                        iters: sweep + 1,
                        residual: gap,
                    });
                }
                return Ok(v
                    .iter()
                    .zip(&a)
                    .map(|(&vj, &aj)| vj * aj / (aj + c))
                    .collect());
            }
            last_gap = gap;
        }
        Err(Error::NonConvergence {
            what: "cone norm prox",
            iters: MAX_SWEEPS,
            residual: last_gap,
        })
    }

    fn prox_gap(&self, v: &[f64], v2: &[f64], w: &[f64], a: &[f64], c: f64) -> f64 {
        let primal: f64 = 0.5
            * v2.iter()
                .zip(a)
                .map(|(&x, &aj)| c * x / (aj + c))
                .sum::<f64>()
            + 0.5 * c * w.iter().sum::<f64>();
        let u: Vec<f64> = v.iter().zip(a).map(|(&x, &aj)| x * c / (aj + c)).collect();
        let du = self.dual_norm(&u);
        let s = if du > c { c / du } else { 1.0 };
        let dual: f64 = v
            .iter()
            .zip(&u)
            .map(|(&x, &uj)| 0.5 * x * x - 0.5 * (x - s * uj).powi(2))
            .sum();
        (primal - dual).max(0.0)
    }
}

/// `φ(w) = ½ Σ_j mult·q_j/(a_j + shift) + ½ kappa Σ_e w_e` with
/// `a = Σ_e w_e e`, minimized over `w ≥ 0`. The norm uses
/// `(mult, shift, kappa) = (1, 0, 1)`, the prox `(c, c, c)`.
struct WeightProblem<'a> {
    sparse: &'a [Vec<(usize, f64)>],
    q: &'a [f64],
    mult: f64,
    shift: f64,
    kappa: f64,
}

impl WeightProblem<'_> {
    fn a(&self, w: &[f64]) -> Vec<f64> {
        let mut a = vec![0.0; self.q.len()];
        for (e, &we) in self.sparse.iter().zip(w) {
            for &(j, v) in e {
                a[j] += we * v;
            }
        }
        a
    }

    /// `φ(w1) − φ(w0)`, formed term by term so that small changes are not
    /// lost to cancellation against `φ` itself.
    fn change(&self, w0: &[f64], w1: &[f64]) -> f64 {
        let (a0, a1) = (self.a(w0), self.a(w1));
        let mut total = 0.0;
        for j in 0..self.q.len() {
            if self.q[j] > 0.0 {
                let (d0, d1) = (a0[j] + self.shift, a1[j] + self.shift);
                if d1 <= 0.0 {
                    return f64::INFINITY;
                }
                total += self.mult * self.q[j] * (a0[j] - a1[j]) / (d0 * d1);
            }
        }
        let dw: f64 = w0.iter().zip(w1).map(|(x, y)| y - x).sum();
        0.5 * (total + self.kappa * dw)
    }

    /// One projected Newton step with Armijo backtracking. Returns `false`
    /// when no decrease was found.
    fn step(&self, w: &mut [f64]) -> bool {
        let m = w.len();
        let a = self.a(w);
        let mut r = vec![0.0; a.len()];
        let mut t = vec![0.0; a.len()];
        for j in 0..a.len() {
            let d = a[j] + self.shift;
            if self.q[j] > 0.0 {
                if d <= 0.0 {
                    return false;
                }
                r[j] = self.q[j] / (d * d);
                t[j] = self.q[j] / (d * d * d);
            }
        }
        let grad: Vec<f64> = self
            .sparse
            .iter()
            .map(|e| 0.5 * (self.kappa - self.mult * e.iter().map(|&(j, v)| v * r[j]).sum::<f64>()))
            .collect();
        let wmax = w.iter().fold(0.0_f64, |x, &y| x.max(y));
        let mut free: Vec<usize> = (0..m)
            .filter(|&e| w[e] > 1e-14 * wmax || grad[e] < 0.0)
            .collect();
        let dense: Vec<Vec<f64>> = (0..m)
            .map(|e| {
                let mut row = vec![0.0; a.len()];
                for &(j, v) in &self.sparse[e] {
                    row[j] = v;
                }
                row
            })
            .collect();
        // Solve on the free set; weights at zero that the step would push
        // negative are fixed and the system is solved again.
        let dir = loop {
            if free.is_empty() {
                return false;
            }
            let k = free.len();
            let mut h = DMatrix::zeros(k, k);
            for x in 0..k {
                for y in x..k {
                    let (rx, ry) = (&dense[free[x]], &dense[free[y]]);
                    let hxy: f64 = (0..a.len()).map(|j| rx[j] * ry[j] * t[j]).sum();
                    h[(x, y)] = self.mult * hxy;
                    h[(y, x)] = self.mult * hxy;
                }
            }
            let g = DVector::from_iterator(k, free.iter().map(|&e| -grad[e]));
            let trace = h.trace().max(f64::MIN_POSITIVE);
            let mut ridge = 1e-14 * trace;
            let dir = loop {
                let reg = &h + DMatrix::identity(k, k) * ridge;
                if let Some(ch) = reg.cholesky() {
                    break ch.solve(&g);
                }
                ridge *= 100.0;
                if ridge > trace {
                    return false;
                }
            };
            let before = free.len();
            let kept: Vec<usize> = free
                .iter()
                .enumerate()
                .filter(|&(x, &e)| !(w[e] <= 1e-14 * wmax && dir[x] < 0.0))
                .map(|(_, &e)| e)
                .collect();
            if kept.len() == before {
                break dir;
            }
            free = kept;
        };
        let mut alpha = 1.0;
        for _ in 0..60 {
            let mut trial = w.to_vec();
            let mut decrease = 0.0;
            for (x, &e) in free.iter().enumerate() {
                trial[e] = (w[e] + alpha * dir[x]).max(0.0);
                decrease += grad[e] * (trial[e] - w[e]);
            }
            let change = self.change(w, &trial);
            if change <= 1e-4 * decrease && change < 0.0 {
                w.copy_from_slice(&trial);
                return true;
            }
            alpha *= 0.5;
        }
        false
    }
}

/// Result of a cone norm evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeNormEval {
    pub value: f64,
    /// Minimizing weight vector in `hull(E)`.
    pub a: Vec<f64>,
    /// Certified relative gap between the value and a dual lower bound.
    pub rel_gap: f64,
}

/// Exact minimization over one coordinate `w ≥ 0`: finds the root of
/// `S(w) = Σ e_j q_j / (r_j + w e_j + c)² = 1`, or `0` when `S(0) ≤ 1`.
/// Each term is `(r_j, e_j, q_j)`.
fn coordinate_root(terms: &[(f64, f64, f64)], c: f64) -> f64 {
    let s_at = |w: f64| -> (f64, f64) {
        let mut s = 0.0;
        let mut ds = 0.0;
        for &(r, e, q) in terms {
            if q == 0.0 {
                continue;
            }
            let d = r + w * e + c;
            if d <= 0.0 {
                return (f64::INFINITY, f64::NEG_INFINITY);
            }
            s += e * q / (d * d);
            ds -= 2.0 * e * e * q / (d * d * d);
        }
        (s, ds)
    };
    let (s0, _) = s_at(0.0);
    if s0 <= 1.0 {
        return 0.0;
    }
    let mut hi = terms
        .iter()
        .filter(|t| t.2 > 0.0)
        .map(|&(_, e, q)| q / e)
        .sum::<f64>()
        .sqrt();
    let mut lo = 0.0;
    // g(w) = S(w)^{-1/2} − 1 is increasing and close to affine.
    let mut w = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (s, ds) = s_at(w);
        let g = s.powf(-0.5) - 1.0;
        if g < 0.0 {
            lo = w;
        } else {
            hi = w;
        }
        if g == 0.0 || hi - lo <= 1e-16 * hi.max(1e-300) {
            break;
        }
        let dg = -0.5 * s.powf(-1.5) * ds;
        let mut next = w - g / dg;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 1e-16 * w.abs() {
            w = next;
            break;
        }
        w = next;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn partition() -> GroupPartition {
        GroupPartition::contiguous(6, 3).unwrap()
    }

    #[test]
    fn block_cone_norm_closed_form() {
        let cone = PolyhedralCone::blocks(&partition());
        let beta = [1.0, -2.0, 2.0, 0.0, 3.0, 4.0];
        let expected = 3.0_f64.sqrt() * (3.0 + 5.0);
        let got = cone.norm(&beta).unwrap();
        assert!((got.value - expected).abs() < 1e-9 * expected, "{got:?}");
    }

    #[test]
    fn block_cone_dual_closed_form() {
        let cone = PolyhedralCone::blocks(&partition());
        let v = [3.0, 4.0, 0.0, 1.0, 1.0, 1.0];
        assert!((cone.dual_norm(&v) - 5.0 / 3.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn block_cone_prox_is_group_shrink() {
        let cone = PolyhedralCone::blocks(&partition());
        let v = [3.0, 4.0, 0.0, 0.1, 0.2, 0.0];
        let c = 0.5;
        let b = cone.prox(&v, c).unwrap();
        let thr = c * 3.0_f64.sqrt();
        let f = 1.0 - thr / 5.0;
        let expected = [3.0 * f, 4.0 * f, 0.0, 0.0, 0.0, 0.0];
        for (x, y) in b.iter().zip(expected) {
            assert!((x - y).abs() < 1e-12, "{b:?}");
        }
    }

    #[test]
    fn uncovered_coordinate_gives_infinite_norm() {
        let cone = PolyhedralCone::new(vec![vec![0.5, 0.5, 0.0]], vec![]).unwrap();
        assert_eq!(cone.norm(&[1.0, 1.0, 0.0]).unwrap().value, 2.0);
        assert!(cone.norm(&[0.0, 0.0, 1.0]).unwrap().value.is_infinite());
        assert_eq!(
            cone.prox(&[0.0, 0.0, 5.0], 1.0).unwrap(),
            vec![0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn overlapping_cone_converges() {
        // Three overlapping generators on four coordinates.
        let cone = PolyhedralCone::new(
            vec![
                vec![0.5, 0.5, 0.0, 0.0],
                vec![0.0, 0.4, 0.3, 0.3],
                vec![0.25, 0.25, 0.25, 0.25],
            ],
            vec![],
        )
        .unwrap();
        let beta = [1.0, -0.5, 2.0, 0.3];
        let ev = cone.norm(&beta).unwrap();
        assert!(ev.rel_gap <= 1e-10, "{ev:?}");
        let q: f64 = beta.iter().zip(&ev.a).map(|(b, a)| b * b / a).sum();
        assert!((q.sqrt() - ev.value).abs() < 1e-9 * ev.value);
    }

    #[test]
    fn rejects_bad_points() {
        assert!(PolyhedralCone::new(vec![], vec![]).is_err());
        assert!(PolyhedralCone::new(vec![vec![0.7, 0.7]], vec![]).is_err());
        assert!(PolyhedralCone::new(vec![vec![-0.1, 0.5]], vec![]).is_err());
        assert!(PolyhedralCone::new(vec![vec![0.5, 0.5]], vec![vec![2]]).is_err());
    }

    #[test]
    fn admissibility_of_block_unions() {
        let cone = PolyhedralCone::blocks(&partition());
        assert!(cone.is_admissible(&[0, 1, 2]));
        assert!(cone.is_admissible(&[]));
        assert!(!cone.is_admissible(&[0, 1]));
    }
}
