//! Energy-minimal speed profiles for deadline users.
//!
//! With all jobs released at time zero and processed in deadline order, the
//! optimal speed function is non-increasing and piecewise constant. It is
//! built by a single pass over the jobs that keeps a stack of
//! `(work, duration)` pairs with strictly decreasing speeds, merging the top
//! two pairs whenever the upper one is at least as fast as the one below.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Alpha, Block, ScheduleResult, SpeedProfile, REL_TOL};

/// Largest instance the exhaustive oracle accepts.
pub const ORACLE_MAX_JOBS: usize = 12;

/// A stack entry: a constant-speed block and the number of jobs it holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackPair {
    pub work: f64,
    pub duration: f64,
    pub jobs: usize,
}

/// Bottom-to-top stack of pairs with strictly decreasing speed.
#[derive(Debug, Clone, Default)]
pub struct BlockStack {
    pairs: Vec<StackPair>,
    pushes: usize,
    merges: usize,
}

impl BlockStack {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pushes a job's pair and restores the decreasing-speed invariant.
    pub fn push(&mut self, work: f64, duration: f64) {
        self.pairs.push(StackPair {
            work,
            duration,
            jobs: 1,
        });
        self.pushes += 1;
        while self.pairs.len() >= 2 {
            let top = self.pairs[self.pairs.len() - 1];
            let below = self.pairs[self.pairs.len() - 2];
            // top speed >= speed below, compared without division
            if below.work * top.duration <= top.work * below.duration {
                self.pairs.pop();
                let merged = self.pairs.last_mut().expect("two pairs present");
                merged.work += top.work;
                merged.duration += top.duration;
                merged.jobs += top.jobs;
                self.merges += 1;
            } else {
                break;
            }
        }
    }

    pub fn pairs(&self) -> &[StackPair] {
        &self.pairs
    }

    /// Number of pairs pushed so far.
    pub fn pushes(&self) -> usize {
        self.pushes
    }

    /// Number of merge steps performed so far.
    pub fn merges(&self) -> usize {
        self.merges
    }

    pub fn duration(&self) -> f64 {
        self.pairs.iter().map(|p| p.duration).sum()
    }
}

fn check_jobs(workloads: &[f64], deadlines: &[f64]) -> Result<()> {
    if workloads.is_empty() {
        return Err(Error::EmptyInstance);
    }
    if workloads.len() != deadlines.len() {
        return Err(Error::InvalidProfile(
            "one deadline per workload is required".into(),
        ));
    }
    if deadlines.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::UnsortedDeadlines);
    }
    if deadlines[0] <= 0.0 {
        return Err(Error::ZeroInterval);
    }
    Ok(())
}

/// Runs the stack merge over deadline-sorted jobs and returns the final stack.
///
/// Jobs sharing a deadline push a zero-length pair, which always merges into
/// the pair below it.
pub fn merge_stack(workloads: &[f64], deadlines: &[f64]) -> Result<BlockStack> {
    check_jobs(workloads, deadlines)?;
    let mut stack = BlockStack::new();
    let mut prev = 0.0;
    for (&w, &d) in workloads.iter().zip(deadlines) {
        stack.push(w, d - prev);
        prev = d;
    }
    Ok(stack)
}

/// Minimum-energy profile meeting every deadline, for jobs sorted by deadline.
pub fn optimal_profile(workloads: &[f64], deadlines: &[f64]) -> Result<SpeedProfile> {
    let stack = merge_stack(workloads, deadlines)?;
    SpeedProfile::new(
        stack
            .pairs()
            .iter()
            .map(|p| Block::new(p.work, p.duration))
            .collect(),
    )
}

/// The optimal schedule for deadline-sorted jobs, run in deadline order.
pub fn schedule(workloads: &[f64], deadlines: &[f64], alpha: Alpha) -> Result<ScheduleResult> {
    let profile = optimal_profile(workloads, deadlines)?;
    ScheduleResult::from_profile(profile, (0..workloads.len()).collect(), workloads, alpha)
}

/// Outcome of checking a profile against the deadline constraints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    /// Work delivered by each deadline minus the cumulative work due by then.
    pub slack: Vec<f64>,
    /// First job (in deadline order) whose constraint fails.
    pub first_violation: Option<usize>,
}

/// Checks that the profile has delivered the first `i` workloads by `d_i`
/// for every `i`. Jobs must be sorted by deadline.
pub fn feasibility_check(
    profile: &SpeedProfile,
    workloads: &[f64],
    deadlines: &[f64],
) -> Feasibility {
    let mut due = 0.0;
    let mut slack = Vec::with_capacity(workloads.len());
    let mut first_violation = None;
    for (i, (&w, &d)) in workloads.iter().zip(deadlines).enumerate() {
        due += w;
        let s = profile.work_by(d) - due;
        if s < -REL_TOL * due && first_violation.is_none() {
            first_violation = Some(i);
        }
        slack.push(s);
    }
    Feasibility {
        feasible: first_violation.is_none(),
        slack,
        first_violation,
    }
}

/// Independent minimum-energy solver: tries every subset of deadlines as
/// block boundaries, keeps candidates that are feasible with strictly
/// decreasing speeds, and returns the cheapest. Ties go to the
/// lexicographically smallest boundary set.
pub fn exhaustive_oracle(
    workloads: &[f64],
    deadlines: &[f64],
    alpha: Alpha,
) -> Result<SpeedProfile> {
    check_jobs(workloads, deadlines)?;
    let n = workloads.len();
    if n > ORACLE_MAX_JOBS {
        return Err(Error::TooLarge {
            n,
            max: ORACLE_MAX_JOBS,
        });
    }

    // Distinct deadlines and the work due exactly at each one.
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (&w, &d) in workloads.iter().zip(deadlines) {
        match points.last_mut() {
            Some((last, work)) if *last == d => *work += w,
            _ => points.push((d, w)),
        }
    }
    let inner = points.len() - 1;

    let mut best: Option<(f64, Vec<usize>, Vec<Block>)> = None;
    for mask in 0u32..(1u32 << inner) {
        let cut: Vec<usize> = (0..inner)
            .filter(|&k| mask & (1 << k) != 0)
            .chain(std::iter::once(inner))
            .collect();

        let mut blocks = Vec::with_capacity(cut.len());
        let (mut start_time, mut next) = (0.0, 0);
        for &c in &cut {
            let work: f64 = points[next..=c].iter().map(|p| p.1).sum();
            blocks.push(Block::new(work, points[c].0 - start_time));
            start_time = points[c].0;
            next = c + 1;
        }
        let Ok(profile) = SpeedProfile::new(blocks.clone()) else {
            continue;
        };
        let mut due = 0.0;
        let feasible = points.iter().all(|&(d, w)| {
            due += w;
            profile.work_by(d) >= due * (1.0 - 1e-12)
        });
        if !feasible {
            continue;
        }
        let e: f64 = blocks.iter().map(|b| b.energy(alpha.value())).sum();
        let better = match &best {
            None => true,
            Some((be, bcut, _)) => e < *be || (e == *be && cut < *bcut),
        };
        if better {
            best = Some((e, cut, blocks));
        }
    }
    let (_, _, blocks) = best.expect("the single-block candidate is always feasible");
    SpeedProfile::new(blocks)
}
