//! Domain types shared by the solvers and mechanisms: jobs, instances,
//! speed profiles, schedules, and the energy and welfare arithmetic.
//!
//! A schedule is a piecewise-constant speed function together with a job
//! order. Speed functions are stored as `(work, duration)` blocks, so the
//! speed of a block is `work / duration` and its energy is
//! `work^alpha * duration^(1 - alpha)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used by every invariant comparison in the crate.
pub const REL_TOL: f64 = 1e-9;

/// `true` when `a` and `b` agree to within `tol` relative to the larger magnitude.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= tol * scale || a == b
}

/// Relative difference `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// The power exponent of the processor: running at speed `s` draws power `s^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::BadAlpha(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Warning flag: the exponent lies outside the customary `[2, 3]` range.
    /// Everything still works, the flag only surfaces in reports.
    pub fn is_atypical(self) -> bool {
        !(2.0..=3.0).contains(&self.0)
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UserType {
    A,
    B,
}

impl UserType {
    pub fn as_str(self) -> &'static str {
        match self {
            UserType::A => "A",
            UserType::B => "B",
        }
    }
}

impl fmt::Display for UserType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A deadline user: utility `u` if the job completes by `d`, nothing otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobA {
    pub id: u32,
    pub w: f64,
    pub d: f64,
    pub u: f64,
}

/// A linear-penalty user: utility `u - p * t` for completion time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobB {
    pub id: u32,
    pub w: f64,
    pub p: f64,
    pub u: f64,
}

/// `t <= d` up to the crate-wide relative tolerance.
///
/// Completion times are sums of interval lengths, so a job finishing exactly
/// at its deadline can land a few ulps past it.
pub fn deadline_met(t: f64, d: f64) -> bool {
    t <= d * (1.0 + REL_TOL)
}

impl JobA {
    /// Quality of service, always evaluated with the true deadline.
    pub fn quality(&self, announced_time: f64) -> f64 {
        if deadline_met(announced_time, self.d) {
            self.u
        } else {
            0.0
        }
    }

    pub fn welfare(&self, announced_time: f64, share: f64) -> f64 {
        self.quality(announced_time) - share
    }
}

impl JobB {
    pub fn quality(&self, announced_time: f64) -> f64 {
        self.u - self.p * announced_time
    }

    pub fn welfare(&self, announced_time: f64, share: f64) -> f64 {
        self.quality(announced_time) - share
    }
}

/// The users of an instance; all of one type.
#[derive(Debug, Clone, PartialEq)]
pub enum Users {
    A(Vec<JobA>),
    B(Vec<JobB>),
}

impl Users {
    pub fn len(&self) -> usize {
        match self {
            Users::A(jobs) => jobs.len(),
            Users::B(jobs) => jobs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn user_type(&self) -> UserType {
        match self {
            Users::A(_) => UserType::A,
            Users::B(_) => UserType::B,
        }
    }

    pub fn ids(&self) -> Vec<u32> {
        match self {
            Users::A(jobs) => jobs.iter().map(|j| j.id).collect(),
            Users::B(jobs) => jobs.iter().map(|j| j.id).collect(),
        }
    }

    /// The true private value each user would announce: `d` or `p`.
    pub fn true_values(&self) -> Vec<f64> {
        match self {
            Users::A(jobs) => jobs.iter().map(|j| j.d).collect(),
            Users::B(jobs) => jobs.iter().map(|j| j.p).collect(),
        }
    }

    pub fn workloads(&self) -> Vec<f64> {
        match self {
            Users::A(jobs) => jobs.iter().map(|j| j.w).collect(),
            Users::B(jobs) => jobs.iter().map(|j| j.w).collect(),
        }
    }
}

/// A validated game instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub alpha: Alpha,
    pub users: Users,
}

impl Instance {
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn user_type(&self) -> UserType {
        self.users.user_type()
    }

    /// Position of a user id inside `users`.
    pub fn position(&self, id: u32) -> Result<usize> {
        self.users
            .ids()
            .iter()
            .position(|&x| x == id)
            .ok_or(Error::UnknownUser(id))
    }

    pub fn type_a(alpha: f64, jobs: Vec<JobA>) -> Result<Self> {
        validate_instance(alpha, Users::A(jobs))
    }

    pub fn type_b(alpha: f64, jobs: Vec<JobB>) -> Result<Self> {
        validate_instance(alpha, Users::B(jobs))
    }
}

fn check_field(field: &'static str, id: u32, value: f64) -> Result<()> {
    if !value.is_finite() {
        Err(Error::NonFiniteField { field, id })
    } else if value <= 0.0 {
        Err(Error::NonPositiveField { field, id })
    } else {
        Ok(())
    }
}

/// Validates raw input and puts the jobs in canonical order.
///
/// Type A jobs are sorted by deadline with ties broken by id; type B jobs are
/// sorted by id.
pub fn validate_instance(alpha: f64, users: Users) -> Result<Instance> {
    let alpha = Alpha::new(alpha)?;
    if users.is_empty() {
        return Err(Error::EmptyInstance);
    }
    let mut ids = users.ids();
    ids.sort_unstable();
    if let Some(pair) = ids.windows(2).find(|p| p[0] == p[1]) {
        return Err(Error::DuplicateId(pair[0]));
    }
    let users = match users {
        Users::A(mut jobs) => {
            for j in &jobs {
                check_field("w", j.id, j.w)?;
                check_field("d", j.id, j.d)?;
                check_field("U", j.id, j.u)?;
            }
            jobs.sort_by(|a, b| a.d.total_cmp(&b.d).then(a.id.cmp(&b.id)));
            Users::A(jobs)
        }
        Users::B(mut jobs) => {
            for j in &jobs {
                check_field("w", j.id, j.w)?;
                check_field("p", j.id, j.p)?;
                check_field("U", j.id, j.u)?;
            }
            jobs.sort_by_key(|j| j.id);
            Users::B(jobs)
        }
    };
    Ok(Instance { alpha, users })
}

/// A user's strategy: the declared deadline (type A) or penalty (type B),
/// or a decision to stay out of the game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Announcement {
    pub id: u32,
    pub value: f64,
    pub participate: bool,
}

impl Announcement {
    pub fn new(id: u32, value: f64) -> Self {
        Self {
            id,
            value,
            participate: true,
        }
    }

    pub fn opt_out(id: u32) -> Self {
        Self {
            id,
            value: f64::NAN,
            participate: false,
        }
    }

    /// Every user announces their true value.
    pub fn truthful(instance: &Instance) -> Vec<Announcement> {
        instance
            .users
            .ids()
            .into_iter()
            .zip(instance.users.true_values())
            .map(|(id, value)| Announcement::new(id, value))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.participate && !(self.value.is_finite() && self.value > 0.0) {
            return Err(Error::BadAnnouncement {
                id: self.id,
                value: self.value,
            });
        }
        Ok(())
    }
}

/// One constant-speed piece of a speed function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    /// Work delivered inside the block.
    pub work: f64,
    /// Length of the block in time units.
    pub duration: f64,
}

impl Block {
    pub fn new(work: f64, duration: f64) -> Self {
        Self { work, duration }
    }

    pub fn speed(&self) -> f64 {
        self.work / self.duration
    }

    /// `work^alpha * duration^(1 - alpha)`, i.e. `speed^alpha * duration`.
    pub fn energy(&self, alpha: f64) -> f64 {
        self.work.powf(alpha) * self.duration.powf(1.0 - alpha)
    }
}

/// A piecewise-constant speed function starting at time zero, with strictly
/// decreasing speeds from one block to the next.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedProfile {
    blocks: Vec<Block>,
}

impl SpeedProfile {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidProfile("no blocks".into()));
        }
        for (i, b) in blocks.iter().enumerate() {
            if !(b.work.is_finite() && b.work > 0.0 && b.duration.is_finite() && b.duration > 0.0) {
                return Err(Error::InvalidProfile(format!(
                    "block {i} has non-positive or non-finite work or duration"
                )));
            }
        }
        if let Some(i) = (1..blocks.len()).find(|&i| blocks[i].speed() >= blocks[i - 1].speed()) {
            return Err(Error::InvalidProfile(format!(
                "speed of block {i} does not drop below its predecessor"
            )));
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.blocks.iter().map(Block::speed).collect()
    }

    pub fn duration(&self) -> f64 {
        self.blocks.iter().map(|b| b.duration).sum()
    }

    pub fn total_work(&self) -> f64 {
        self.blocks.iter().map(|b| b.work).sum()
    }

    /// Block end times, accumulated from the durations.
    pub fn boundaries(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .scan(0.0, |t, b| {
                *t += b.duration;
                Some(*t)
            })
            .collect()
    }

    /// Work delivered over `[0, time]`; the speed is zero after the last block.
    pub fn work_by(&self, time: f64) -> f64 {
        let mut start = 0.0;
        let mut done = 0.0;
        for b in &self.blocks {
            let end = start + b.duration;
            if time >= end {
                done += b.work;
            } else {
                if time > start {
                    done += b.speed() * (time - start);
                }
                break;
            }
            start = end;
        }
        done
    }
}

/// `E(s) = sum over blocks of work^alpha * duration^(1 - alpha)`.
pub fn energy(profile: &SpeedProfile, alpha: Alpha) -> f64 {
    profile.blocks.iter().map(|b| b.energy(alpha.value())).sum()
}

fn check_order(order: &[usize], n: usize) -> Result<()> {
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

/// Completion time and block index of every job, indexed by job.
fn locate_completions(
    profile: &SpeedProfile,
    order: &[usize],
    workloads: &[f64],
) -> Result<(Vec<f64>, Vec<usize>)> {
    check_order(order, workloads.len())?;
    let needed: f64 = workloads.iter().sum();
    let delivered = profile.total_work();
    if !rel_close(needed, delivered, REL_TOL) {
        return Err(Error::WorkMismatch {
            profile: delivered,
            jobs: needed,
        });
    }

    let blocks = profile.blocks();
    let mut times = vec![0.0; workloads.len()];
    let mut members = vec![0; workloads.len()];
    let (mut block, mut block_start, mut work_before) = (0, 0.0, 0.0);
    let mut cumulative = 0.0;
    for (rank, &job) in order.iter().enumerate() {
        cumulative += workloads[job];
        let last = rank + 1 == order.len();
        // Advance while the target lies beyond the current block's end. A
        // target equal to a block end (up to rounding) completes at that end.
        while block + 1 < blocks.len() {
            let end_work = work_before + blocks[block].work;
            if cumulative <= end_work * (1.0 + REL_TOL) {
                break;
            }
            work_before = end_work;
            block_start += blocks[block].duration;
            block += 1;
        }
        let b = blocks[block];
        let end_work = work_before + b.work;
        let block_end = block_start + b.duration;
        let t = if last || rel_close(cumulative, end_work, REL_TOL) {
            block_end
        } else {
            (block_start + (cumulative - work_before) / b.speed()).min(block_end)
        };
        times[job] = t;
        members[job] = block;
    }
    Ok((times, members))
}

/// Completion time of every job when the profile runs them back to back in
/// `order`. Returned times are indexed by job, not by rank.
pub fn completion_times(
    profile: &SpeedProfile,
    order: &[usize],
    workloads: &[f64],
) -> Result<Vec<f64>> {
    locate_completions(profile, order, workloads).map(|(t, _)| t)
}

/// A speed function plus a job order, with the derived per-job quantities.
///
/// Job indices refer to positions in the job slice the schedule was built
/// from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleResult {
    /// `order[rank]` is the job run at that rank.
    pub order: Vec<usize>,
    /// `rank[job]`, the inverse of `order`.
    pub rank: Vec<usize>,
    /// Completion time per job.
    pub completion: Vec<f64>,
    /// Length of each job's own execution interval, per job.
    pub lengths: Vec<f64>,
    /// Index of the profile block each job runs in, per job.
    pub block_of: Vec<usize>,
    pub profile: SpeedProfile,
    pub energy: f64,
}

fn invert(order: &[usize]) -> Vec<usize> {
    let mut rank = vec![0; order.len()];
    for (r, &j) in order.iter().enumerate() {
        rank[j] = r;
    }
    rank
}

impl ScheduleResult {
    /// Runs the jobs in `order` under an arbitrary profile. Each job's
    /// interval length is the gap between consecutive completion times.
    pub fn from_profile(
        profile: SpeedProfile,
        order: Vec<usize>,
        workloads: &[f64],
        alpha: Alpha,
    ) -> Result<Self> {
        let (completion, block_of) = locate_completions(&profile, &order, workloads)?;
        let mut lengths = vec![0.0; workloads.len()];
        let mut prev = 0.0;
        for &j in &order {
            lengths[j] = completion[j] - prev;
            prev = completion[j];
        }
        let energy = energy(&profile, alpha);
        Ok(Self {
            rank: invert(&order),
            order,
            completion,
            lengths,
            block_of,
            profile,
            energy,
        })
    }

    /// One block per job: the job at rank `r` runs alone for `rank_lengths[r]`.
    pub fn from_lengths(
        order: Vec<usize>,
        workloads: &[f64],
        rank_lengths: &[f64],
        alpha: Alpha,
    ) -> Result<Self> {
        check_order(&order, workloads.len())?;
        if rank_lengths.len() != order.len() {
            return Err(Error::InvalidOrder(
                "one length per rank is required".into(),
            ));
        }
        let blocks = order
            .iter()
            .zip(rank_lengths)
            .map(|(&j, &l)| Block::new(workloads[j], l))
            .collect();
        let profile = SpeedProfile::new(blocks)?;
        let n = order.len();
        let mut completion = vec![0.0; n];
        let mut lengths = vec![0.0; n];
        let mut block_of = vec![0; n];
        let mut t = 0.0;
        for (r, (&j, &l)) in order.iter().zip(rank_lengths).enumerate() {
            t += l;
            completion[j] = t;
            lengths[j] = l;
            block_of[j] = r;
        }
        let energy = energy(&profile, alpha);
        Ok(Self {
            rank: invert(&order),
            order,
            completion,
            lengths,
            block_of,
            profile,
            energy,
        })
    }

    /// Completion times in rank order.
    pub fn times_by_rank(&self) -> Vec<f64> {
        self.order.iter().map(|&j| self.completion[j]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Proportional,
    X,
}

impl Mechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Proportional => "proportional",
            Mechanism::X => "x",
        }
    }
}

/// How the order of type B jobs was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderMethod {
    /// Deadline order (type A).
    Deadline,
    BruteForce,
    Smith,
    /// Supplied by the caller.
    Fixed,
}

/// Per-user result of running a mechanism.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserOutcome {
    pub id: u32,
    pub participate: bool,
    /// Value the user declared; absent for users who opted out.
    pub announced: Option<f64>,
    pub share: f64,
    /// Completion time the regulator announces; absent for users who opted out.
    pub announced_time: Option<f64>,
    /// Quality of service under the user's true private value.
    pub quality: f64,
    pub welfare: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MechanismOutcome {
    pub mechanism: Mechanism,
    pub order_method: OrderMethod,
    /// One entry per user of the instance, in instance order.
    pub users: Vec<UserOutcome>,
    /// Ids of participating users in execution order.
    pub execution_order: Vec<u32>,
    pub energy: f64,
    pub total_share: f64,
    pub total_welfare: f64,
    /// `total_share / energy`; absent when nobody participates.
    pub bb_ratio: Option<f64>,
    /// Schedule of the participating users; absent when nobody participates.
    #[serde(skip)]
    pub schedule: Option<ScheduleResult>,
}

impl MechanismOutcome {
    pub fn user(&self, id: u32) -> Option<&UserOutcome> {
        self.users.iter().find(|u| u.id == id)
    }
}
