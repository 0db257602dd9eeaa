//! Welfare-maximal schedules for linear-penalty users.
//!
//! For a fixed order each job runs alone at constant speed, and the interval
//! lengths have a closed form from the first-order conditions. Plugging them
//! back in leaves a cost of the form `sum w_j * S_j^beta` over suffix penalty
//! sums `S_j`, which is the classical single-machine problem
//! `1 || sum w_i C_i^beta` with the job order reversed.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Alpha, OrderMethod, ScheduleResult};

/// Largest instance `brute_force_order` enumerates.
pub const BRUTE_FORCE_MAX_JOBS: usize = 9;

/// Factor tying the classical objective to the social cost:
/// `alpha * (alpha - 1)^((1 - alpha) / alpha)`.
pub fn scaling_factor(alpha: Alpha) -> f64 {
    let a = alpha.value();
    a * (a - 1.0).powf((1.0 - a) / a)
}

/// Completion-time exponent of the classical problem, `(alpha - 1) / alpha`.
pub fn beta(alpha: Alpha) -> f64 {
    let a = alpha.value();
    (a - 1.0) / a
}

fn check(order: &[usize], workloads: &[f64], penalties: &[f64]) -> Result<()> {
    let n = workloads.len();
    if penalties.len() != n {
        return Err(Error::InvalidOrder(
            "one penalty per workload is required".into(),
        ));
    }
    if let Some(index) = penalties.iter().position(|&p| !(p.is_finite() && p > 0.0)) {
        return Err(Error::NonPositivePenalty { index });
    }
    if order.len() != n {
        return Err(Error::InvalidOrder(format!(
            "order has {} entries for {n} jobs",
            order.len()
        )));
    }
    let mut seen = vec![false; n];
    for &j in order {
        if j >= n || std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidOrder(format!(
                "{order:?} is not a permutation"
            )));
        }
    }
    Ok(())
}

/// Penalty sums `S_r = sum of p[order[k]] for k >= r`, by rank.
pub fn suffix_penalties(order: &[usize], penalties: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; order.len()];
    let mut acc = 0.0;
    for r in (0..order.len()).rev() {
        acc += penalties[order[r]];
        sums[r] = acc;
    }
    sums
}

/// Optimal execution-interval length of each rank for a fixed order:
/// `l_r = (w^alpha * (alpha - 1) / S_r)^(1 / alpha)`.
pub fn interval_lengths(
    order: &[usize],
    workloads: &[f64],
    penalties: &[f64],
    alpha: Alpha,
) -> Result<Vec<f64>> {
    check(order, workloads, penalties)?;
    let a = alpha.value();
    Ok(order
        .iter()
        .zip(suffix_penalties(order, penalties))
        .map(|(&j, s)| workloads[j] * ((a - 1.0) / s).powf(1.0 / a))
        .collect())
}

/// Minimised penalty-plus-energy cost of an order, in closed form.
pub fn social_cost(
    order: &[usize],
    workloads: &[f64],
    penalties: &[f64],
    alpha: Alpha,
) -> Result<f64> {
    check(order, workloads, penalties)?;
    Ok(closed_form_cost(order, workloads, penalties, alpha))
}

fn closed_form_cost(order: &[usize], workloads: &[f64], penalties: &[f64], alpha: Alpha) -> f64 {
    let b = beta(alpha);
    let mut acc = 0.0;
    let mut sum = 0.0;
    for &j in order.iter().rev() {
        acc += penalties[j];
        sum += workloads[j] * acc.powf(b);
    }
    scaling_factor(alpha) * sum
}

/// `sum p_i t_i + E` for arbitrary rank lengths, evaluated term by term.
pub fn direct_cost(
    order: &[usize],
    workloads: &[f64],
    penalties: &[f64],
    rank_lengths: &[f64],
    alpha: Alpha,
) -> f64 {
    let a = alpha.value();
    let mut t = 0.0;
    let mut penalty = 0.0;
    let mut energy = 0.0;
    for (&j, &l) in order.iter().zip(rank_lengths) {
        t += l;
        penalty += penalties[j] * t;
        energy += workloads[j].powf(a) * l.powf(1.0 - a);
    }
    penalty + energy
}

/// Schedule of a fixed order with the closed-form interval lengths.
pub fn schedule(
    order: Vec<usize>,
    workloads: &[f64],
    penalties: &[f64],
    alpha: Alpha,
) -> Result<ScheduleResult> {
    let lengths = interval_lengths(&order, workloads, penalties, alpha)?;
    ScheduleResult::from_lengths(order, workloads, &lengths, alpha)
}

/// `1 || sum w_i C_i^beta`: processing times are the penalties, priority
/// weights are the workloads.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalInstance {
    pub processing: Vec<f64>,
    pub weights: Vec<f64>,
    pub beta: f64,
}

pub fn to_classical(workloads: &[f64], penalties: &[f64], alpha: Alpha) -> ClassicalInstance {
    ClassicalInstance {
        processing: penalties.to_vec(),
        weights: workloads.to_vec(),
        beta: beta(alpha),
    }
}

impl ClassicalInstance {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Objective of a classical order on a unit-speed machine.
    pub fn cost(&self, order: &[usize]) -> f64 {
        let mut c = 0.0;
        order
            .iter()
            .map(|&j| {
                c += self.processing[j];
                self.weights[j] * c.powf(self.beta)
            })
            .sum()
    }

    /// The speed-scaling order matching a classical order: the reverse.
    pub fn to_speed_order(classical: &[usize]) -> Vec<usize> {
        classical.iter().rev().copied().collect()
    }

    /// Exhaustive minimum over all orders, lexicographically first on ties.
    pub fn brute_force(&self) -> Result<(Vec<usize>, f64)> {
        enumerate_min(self.len(), |o| self.cost(o))
    }
}

/// Visits every permutation of `0..n` in lexicographic order and returns
/// the first one reaching the minimum cost.
fn enumerate_min(n: usize, mut cost: impl FnMut(&[usize]) -> f64) -> Result<(Vec<usize>, f64)> {
    if n > BRUTE_FORCE_MAX_JOBS {
        return Err(Error::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_JOBS,
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = (perm.clone(), cost(&perm));
    while next_permutation(&mut perm) {
        let c = cost(&perm);
        if c < best.1 {
            best = (perm.clone(), c);
        }
    }
    Ok(best)
}

fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Smith's rule on the classical instance (decreasing `w / p`, ties by
/// index), returned as a speed-scaling order, i.e. reversed.
pub fn smith_order(workloads: &[f64], penalties: &[f64]) -> Vec<usize> {
    let mut classical: Vec<usize> = (0..workloads.len()).collect();
    // w_a / p_a > w_b / p_b  <=>  w_a * p_b > w_b * p_a
    classical.sort_by(|&a, &b| {
        (workloads[b] * penalties[a])
            .total_cmp(&(workloads[a] * penalties[b]))
            .then(a.cmp(&b))
    });
    ClassicalInstance::to_speed_order(&classical)
}

/// Cheapest order over all `n!` candidates, lexicographically first on ties.
pub fn brute_force_order(
    workloads: &[f64],
    penalties: &[f64],
    alpha: Alpha,
) -> Result<(Vec<usize>, f64)> {
    let n = workloads.len();
    check(&(0..n).collect::<Vec<_>>(), workloads, penalties)?;
    enumerate_min(n, |o| closed_form_cost(o, workloads, penalties, alpha))
}

/// The regulator's order: exhaustive search when affordable, Smith's rule
/// otherwise.
pub fn regulator_order(
    workloads: &[f64],
    penalties: &[f64],
    alpha: Alpha,
) -> Result<(Vec<usize>, OrderMethod)> {
    if workloads.len() <= BRUTE_FORCE_MAX_JOBS {
        let (order, _) = brute_force_order(workloads, penalties, alpha)?;
        Ok((order, OrderMethod::BruteForce))
    } else {
        let order = smith_order(workloads, penalties);
        check(&order, workloads, penalties)?;
        Ok((order, OrderMethod::Smith))
    }
}

/// Golden-section minimisation of a unimodal function on `[lo, hi]`.
fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..400 {
        if hi - lo <= rel_tol * (lo.abs() + hi.abs()) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Numerical minimiser of `sum p_i t_i + E` over the interval lengths of a
/// fixed order: cyclic coordinate descent with a golden-section line search
/// per coordinate. Does not use the closed form.
pub fn coordinate_descent_lengths(
    order: &[usize],
    workloads: &[f64],
    penalties: &[f64],
    alpha: Alpha,
) -> Result<Vec<f64>> {
    check(order, workloads, penalties)?;
    let mut lengths: Vec<f64> = order.iter().map(|&j| workloads[j]).collect();
    for _sweep in 0..100 {
        let mut max_move: f64 = 0.0;
        for r in 0..lengths.len() {
            let current = lengths[r];
            // Expand the bracket until the objective rises on both sides.
            let eval = |x: f64, ls: &mut Vec<f64>| {
                ls[r] = x;
                direct_cost(order, workloads, penalties, ls, alpha)
            };
            let mut scratch = lengths.clone();
            let mut lo = current / 2.0;
            while lo > 1e-300 && eval(lo, &mut scratch) < eval(lo * 2.0, &mut scratch) {
                lo /= 2.0;
            }
            let mut hi = current * 2.0;
            while hi < 1e300 && eval(hi, &mut scratch) < eval(hi / 2.0, &mut scratch) {
                hi *= 2.0;
            }
            let best = golden_section(
                |x| {
                    let mut ls = lengths.clone();
                    ls[r] = x;
                    direct_cost(order, workloads, penalties, &ls, alpha)
                },
                lo,
                hi,
                1e-15,
            );
            max_move = max_move.max((best - current).abs() / current);
            lengths[r] = best;
        }
        if max_move <= 1e-10 {
            break;
        }
    }
    Ok(lengths)
}
