//! Cost-sharing mechanisms.
//!
//! The proportional mechanism charges deadline users the energy spent during
//! their own execution interval. Mechanism X charges penalty users a
//! penalty-weighted function of every interval up to their completion; it is
//! not budget-balanced in general, so its overcharge ratio is reported.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    rel_close, Alpha, Announcement, Instance, Mechanism, MechanismOutcome, OrderMethod,
    ScheduleResult, UserOutcome, Users, REL_TOL,
};
use crate::{typea, typeb};

/// Cost shares indexed by job position within the scheduled job slice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShareVector {
    pub mechanism: Mechanism,
    pub shares: Vec<f64>,
}

impl ShareVector {
    pub fn total(&self) -> f64 {
        self.shares.iter().sum()
    }
}

/// `C_j = (t_j - t_{j-1})^(1 - alpha) * w_j^alpha` along the execution order.
pub fn proportional_shares(
    schedule: &ScheduleResult,
    workloads: &[f64],
    alpha: Alpha,
) -> ShareVector {
    let a = alpha.value();
    let mut shares = vec![0.0; workloads.len()];
    let mut prev = 0.0;
    for &j in &schedule.order {
        let t = schedule.completion[j];
        shares[j] = (t - prev).powf(1.0 - a) * workloads[j].powf(a);
        prev = t;
    }
    ShareVector {
        mechanism: Mechanism::Proportional,
        shares,
    }
}

/// Mechanism X in its defining form, per job:
/// `C = sum_{k <= j} (alpha * s_k^alpha - p_j) * l_k`, with
/// `s_k^alpha = S_k / (alpha - 1)` and `S_k` the suffix sum of announced
/// penalties from rank `k`.
pub fn mechanism_x_direct(
    order: &[usize],
    workloads: &[f64],
    announced: &[f64],
    alpha: Alpha,
) -> Result<Vec<f64>> {
    let a = alpha.value();
    let lengths = typeb::interval_lengths(order, workloads, announced, alpha)?;
    let suffix = typeb::suffix_penalties(order, announced);
    let mut shares = vec![0.0; order.len()];
    for (j, &job) in order.iter().enumerate() {
        let p = announced[job];
        shares[job] = (0..=j)
            .map(|k| (a * suffix[k] / (a - 1.0) - p) * lengths[k])
            .sum();
    }
    Ok(shares)
}

/// The rearranged form of mechanism X:
/// `(alpha - 1)^-1 * sum_{k <= j} (p_j + alpha * sum_{r >= k, r != j} p_r) * l_k`.
/// Interval lengths are recomputed here from `w^alpha (alpha - 1) / S_k`.
pub fn mechanism_x_equivalent(
    order: &[usize],
    workloads: &[f64],
    announced: &[f64],
    alpha: Alpha,
) -> Result<Vec<f64>> {
    let a = alpha.value();
    // validates the inputs
    typeb::interval_lengths(order, workloads, announced, alpha)?;
    let n = order.len();
    let lengths: Vec<f64> = (0..n)
        .map(|k| {
            let tail: f64 = order[k..].iter().map(|&r| announced[r]).sum();
            (workloads[order[k]].powf(a) * (a - 1.0) / tail).powf(1.0 / a)
        })
        .collect();
    let mut shares = vec![0.0; n];
    for j in 0..n {
        let p = announced[order[j]];
        let sum: f64 = (0..=j)
            .map(|k| {
                let others: f64 = (k..n)
                    .filter(|&r| r != j)
                    .map(|r| announced[order[r]])
                    .sum();
                (p + a * others) * lengths[k]
            })
            .sum();
        shares[order[j]] = sum / (a - 1.0);
    }
    Ok(shares)
}

/// Change in a penalty user's welfare under mechanism X when their announced
/// penalty moves from `announced[job]` to `announced[job] + delta`, with the
/// order and everyone else fixed. Built from per-interval increments so that
/// no two large numbers are subtracted; plain differences of welfare lose
/// the second-order term to round-off once `delta` is tiny.
pub fn mechanism_x_welfare_delta(
    order: &[usize],
    workloads: &[f64],
    announced: &[f64],
    true_value: f64,
    job: usize,
    delta: f64,
    alpha: Alpha,
) -> Result<f64> {
    let a = alpha.value();
    let rank = order
        .iter()
        .position(|&j| j == job)
        .ok_or_else(|| Error::InvalidOrder(format!("job {job} is not in the order")))?;
    let lengths = typeb::interval_lengths(order, workloads, announced, alpha)?;
    let suffix = typeb::suffix_penalties(order, announced);
    let p = announced[job];
    let (mut dt, mut dshare) = (0.0, 0.0);
    for k in 0..=rank {
        // l_k scales with S_k^(-1/alpha)
        let dl = lengths[k] * (-(delta / suffix[k]).ln_1p() / a).exp_m1();
        dt += dl;
        dshare += (a * suffix[k] / (a - 1.0) - p) * dl + delta * (lengths[k] + dl) / (a - 1.0);
    }
    Ok(-true_value * dt - dshare)
}

/// Mechanism X shares; both algebraic forms are evaluated and must agree.
pub fn mechanism_x_shares(
    order: &[usize],
    workloads: &[f64],
    announced: &[f64],
    alpha: Alpha,
) -> Result<ShareVector> {
    let direct = mechanism_x_direct(order, workloads, announced, alpha)?;
    let equivalent = mechanism_x_equivalent(order, workloads, announced, alpha)?;
    for (rank, &job) in order.iter().enumerate() {
        if !rel_close(direct[job], equivalent[job], REL_TOL) {
            return Err(Error::DualFormMismatch {
                rank,
                direct: direct[job],
                equivalent: equivalent[job],
            });
        }
    }
    Ok(ShareVector {
        mechanism: Mechanism::X,
        shares: direct,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetBalance {
    /// `sum of shares / energy`.
    pub ratio: f64,
    /// The shares fail to cover the energy.
    pub violated: bool,
}

pub fn budget_balance_ratio(shares: &[f64], energy: f64) -> Result<BudgetBalance> {
    if energy.is_nan() || energy <= 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let total: f64 = shares.iter().sum();
    Ok(BudgetBalance {
        ratio: total / energy,
        violated: total < energy - REL_TOL * energy,
    })
}

/// How the regulator orders type B jobs.
#[derive(Debug, Clone, PartialEq)]
pub enum OrderPolicy {
    /// Brute force for small instances, Smith's rule beyond.
    Optimize,
    /// Run participating users in this id order.
    Fixed(Vec<u32>),
}

/// Resolves every user's announcement, defaulting to the truth.
fn resolve(instance: &Instance, announcements: &[Announcement]) -> Result<Vec<Announcement>> {
    let mut resolved = Announcement::truthful(instance);
    for a in announcements {
        let pos = instance.position(a.id)?;
        a.validate()?;
        resolved[pos] = *a;
    }
    Ok(resolved)
}

/// Runs the mechanism on the announced values with the regulator's own order.
pub fn outcome(
    instance: &Instance,
    announcements: &[Announcement],
    mechanism: Mechanism,
) -> Result<MechanismOutcome> {
    outcome_with_order(instance, announcements, mechanism, &OrderPolicy::Optimize)
}

/// Runs the mechanism on the announced values.
///
/// Opted-out users are left out of the schedule with share and welfare zero.
/// Quality of service always uses the users' true private values.
pub fn outcome_with_order(
    instance: &Instance,
    announcements: &[Announcement],
    mechanism: Mechanism,
    policy: &OrderPolicy,
) -> Result<MechanismOutcome> {
    let resolved = resolve(instance, announcements)?;
    let ids = instance.users.ids();
    let alpha = instance.alpha;
    let participants: Vec<usize> = (0..ids.len())
        .filter(|&i| resolved[i].participate)
        .collect();
    let workloads: Vec<f64> = {
        let all = instance.users.workloads();
        participants.iter().map(|&i| all[i]).collect()
    };

    let (schedule, shares, method) = match (&instance.users, mechanism) {
        (_, _) if participants.is_empty() => (None, Vec::new(), OrderMethod::Fixed),
        (Users::A(_), Mechanism::Proportional) => {
            // deadline order on the announced values, ties by id
            let mut by_deadline: Vec<usize> = (0..participants.len()).collect();
            by_deadline.sort_by(|&x, &y| {
                let (ix, iy) = (participants[x], participants[y]);
                resolved[ix]
                    .value
                    .total_cmp(&resolved[iy].value)
                    .then(ids[ix].cmp(&ids[iy]))
            });
            let w: Vec<f64> = by_deadline.iter().map(|&k| workloads[k]).collect();
            let d: Vec<f64> = by_deadline
                .iter()
                .map(|&k| resolved[participants[k]].value)
                .collect();
            let sorted = typea::schedule(&w, &d, alpha)?;
            // Re-express the schedule in participant indexing.
            let mut completion = vec![0.0; w.len()];
            let mut lengths = vec![0.0; w.len()];
            let mut block_of = vec![0; w.len()];
            for (pos, &k) in by_deadline.iter().enumerate() {
                completion[k] = sorted.completion[pos];
                lengths[k] = sorted.lengths[pos];
                block_of[k] = sorted.block_of[pos];
            }
            let order: Vec<usize> = sorted.order.iter().map(|&pos| by_deadline[pos]).collect();
            let mut rank = vec![0; order.len()];
            for (r, &k) in order.iter().enumerate() {
                rank[k] = r;
            }
            let schedule = ScheduleResult {
                order,
                rank,
                completion,
                lengths,
                block_of,
                profile: sorted.profile,
                energy: sorted.energy,
            };
            let shares = proportional_shares(&schedule, &workloads, alpha).shares;
            (Some(schedule), shares, OrderMethod::Deadline)
        }
        (Users::B(_), Mechanism::X) => {
            let p: Vec<f64> = participants.iter().map(|&i| resolved[i].value).collect();
            let (order, method) = match policy {
                OrderPolicy::Optimize => typeb::regulator_order(&workloads, &p, alpha)?,
                OrderPolicy::Fixed(id_order) => {
                    let order = id_order
                        .iter()
                        .filter_map(|id| participants.iter().position(|&i| ids[i] == *id))
                        .collect();
                    (order, OrderMethod::Fixed)
                }
            };
            let schedule = typeb::schedule(order, &workloads, &p, alpha)?;
            let shares = mechanism_x_shares(&schedule.order, &workloads, &p, alpha)?.shares;
            (Some(schedule), shares, method)
        }
        (users, m) => {
            return Err(Error::MechanismMismatch {
                mechanism: m.as_str(),
                user_type: users.user_type().as_str(),
            })
        }
    };

    let mut users = Vec::with_capacity(ids.len());
    for (i, &id) in ids.iter().enumerate() {
        let slot = participants.iter().position(|&p| p == i);
        let entry = match (slot, &schedule) {
            (Some(k), Some(s)) => {
                let t = s.completion[k];
                let share = shares[k];
                let quality = match &instance.users {
                    Users::A(jobs) => jobs[i].quality(t),
                    Users::B(jobs) => jobs[i].quality(t),
                };
                UserOutcome {
                    id,
                    participate: true,
                    announced: Some(resolved[i].value),
                    share,
                    announced_time: Some(t),
                    quality,
                    welfare: quality - share,
                }
            }
            _ => UserOutcome {
                id,
                participate: false,
                announced: None,
                share: 0.0,
                announced_time: None,
                quality: 0.0,
                welfare: 0.0,
            },
        };
        users.push(entry);
    }

    let energy = schedule.as_ref().map_or(0.0, |s| s.energy);
    let total_share: f64 = shares.iter().sum();
    let bb_ratio = if schedule.is_some() {
        Some(budget_balance_ratio(&shares, energy)?.ratio)
    } else {
        None
    };
    let execution_order = schedule
        .as_ref()
        .map(|s| s.order.iter().map(|&k| ids[participants[k]]).collect())
        .unwrap_or_default();
    Ok(MechanismOutcome {
        mechanism,
        order_method: method,
        total_welfare: users.iter().map(|u| u.welfare).sum(),
        users,
        execution_order,
        energy,
        total_share,
        bb_ratio,
        schedule,
    })
}
