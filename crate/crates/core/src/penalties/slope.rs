//! Sorted-ℓ1 norm `|u|_* = Σ_j w_j u*_j`, its dual, and its proximal operator.

use std::cmp::Ordering;

/// Indices of `u` ordered by non-increasing `|u_i|`; ties keep index order.
pub(crate) fn order_by_magnitude(u: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..u.len()).collect();
    idx.sort_by(|&a, &b| {
        u[b].abs()
            .partial_cmp(&u[a].abs())
            .unwrap_or(Ordering::Equal)
    });
    idx
}

/// Non-increasing rearrangement of `|u_1|, …, |u_p|`.
pub fn decreasing_rearrangement(u: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = u.iter().map(|v| v.abs()).collect();
    a.sort_by(|x, y| y.partial_cmp(x).unwrap_or(Ordering::Equal));
    a
}

pub fn sorted_l1_norm(weights: &[f64], u: &[f64]) -> f64 {
    decreasing_rearrangement(u)
        .iter()
        .zip(weights)
        .map(|(a, w)| a * w)
        .sum()
}

/// `max_k (Σ_{j≤k} v*_j) / (Σ_{j≤k} w_j)`.
pub fn sorted_l1_dual(weights: &[f64], v: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut best = 0.0_f64;
    for (a, w) in decreasing_rearrangement(v).iter().zip(weights) {
        num += a;
        den += w;
        best = best.max(num / den);
    }
    best
}

struct Block {
    start: usize,
    len: usize,
    sum: f64,
}

impl Block {
    fn mean(&self) -> f64 {
        self.sum / self.len as f64
    }
}

/// Non-increasing least-squares fit of `x` (pool-adjacent-violators, one
/// stack pass).
pub fn isotonic_nonincreasing(x: &[f64]) -> Vec<f64> {
    let mut stack: Vec<Block> = Vec::with_capacity(x.len());
    for (i, &xi) in x.iter().enumerate() {
        stack.push(Block {
            start: i,
            len: 1,
            sum: xi,
        });
        while stack.len() >= 2 {
            let top = &stack[stack.len() - 1];
            let prev = &stack[stack.len() - 2];
            if prev.mean() > top.mean() {
                break;
            }
            let top = stack.pop().unwrap();
            let prev = stack.last_mut().unwrap();
            prev.len += top.len;
            prev.sum += top.sum;
        }
    }
    let mut out = vec![0.0; x.len()];
    for b in &stack {
        let m = b.mean();
        out[b.start..b.start + b.len].fill(m);
    }
    out
}

/// `argmin_b ½|b − v|² + Σ_j t_j b*_j` for non-increasing thresholds `t ≥ 0`.
pub fn prox_sorted_l1(v: &[f64], thresholds: &[f64]) -> Vec<f64> {
    let order = order_by_magnitude(v);
    let shifted: Vec<f64> = order
        .iter()
        .zip(thresholds)
        .map(|(&i, &t)| v[i].abs() - t)
        .collect();
    let fitted = isotonic_nonincreasing(&shifted);
    let mut out = vec![0.0; v.len()];
    for (&i, &f) in order.iter().zip(&fitted) {
        out[i] = f.max(0.0).copysign(v[i]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_and_dual() {
        assert_eq!(sorted_l1_norm(&[2.0, 1.0], &[1.0, -3.0]), 7.0);
        // v* = (3, 1): max(3/2, 4/3)
        assert!((sorted_l1_dual(&[2.0, 1.0], &[1.0, -3.0]) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn prox_pools_ties() {
        // Brute force over a 1e-3 grid on [0, 5]²: minimizer (3, 3).
        let b = prox_sorted_l1(&[5.0, 4.0], &[2.0, 1.0]);
        assert!(
            (b[0] - 3.0).abs() < 1e-12 && (b[1] - 3.0).abs() < 1e-12,
            "{b:?}"
        );
    }

    #[test]
    fn prox_restores_signs_and_order() {
        let b = prox_sorted_l1(&[-1.0, 4.0, 0.0, 2.5], &[1.5, 1.0, 0.5, 0.2]);
        // |v| sorted: 4 (t=1.5), 2.5 (t=1.0), 1 (t=0.5), 0 (t=0.2)
        assert_eq!(b, vec![-0.5, 2.5, 0.0, 1.5]);
    }

    #[test]
    fn isotonic_fit_is_nonincreasing() {
        let f = isotonic_nonincreasing(&[1.0, 3.0, 2.0, 0.0, 0.5]);
        assert_eq!(f, vec![2.0, 2.0, 2.0, 0.25, 0.25]);
    }
}
