//! Numerical incentive audits.
//!
//! Each audit holds every other user truthful, sweeps one user's announcement
//! over a multiplicative grid around the true value, and compares the
//! resulting welfare with the truthful welfare. Penalty users additionally
//! get a central finite-difference check of the first-order condition at the
//! truth.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanisms::{mechanism_x_welfare_delta, outcome_with_order, OrderPolicy};
use crate::model::{
    rel_close, Announcement, Instance, Mechanism, MechanismOutcome, OrderMethod, Users, REL_TOL,
};

/// Welfare gain above which a type A deviation counts as an improvement.
pub const TOL_GAIN_A: f64 = 1e-9;
/// Same for type B deviations.
pub const TOL_GAIN_B: f64 = 1e-7;
/// Finite-difference step relative to the true penalty.
pub const FD_REL_STEP: f64 = 1e-5;
/// Allowed first-derivative magnitude, relative to the true penalty.
pub const FD_REL_TOL: f64 = 1e-4;

/// Multiplicative factors applied to the true value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lo: 0.5,
            hi: 2.0,
            points: 201,
        }
    }
}

impl GridSpec {
    /// Symmetric band `[1 - radius, 1 + radius]` with the default density.
    pub fn around_truth(radius: f64) -> Self {
        Self {
            lo: 1.0 - radius,
            hi: 1.0 + radius,
            points: 201,
        }
    }

    /// Evenly spaced factors plus the exact truth factor, ascending.
    pub fn factors(&self) -> Vec<f64> {
        let mut f: Vec<f64> = match self.points {
            0 => Vec::new(),
            1 => vec![self.lo],
            n => (0..n)
                .map(|k| self.lo + (self.hi - self.lo) * k as f64 / (n - 1) as f64)
                .collect(),
        };
        if !f.contains(&1.0) {
            f.push(1.0);
        }
        f.sort_by(f64::total_cmp);
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditMode {
    /// Type B: the truthful order is kept whatever the user announces.
    Fixed,
    /// Type B: the regulator re-optimises the order for every announcement.
    Reorder,
    /// Type A: deadline order on announced values.
    Deadline,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub factor: f64,
    pub announced: f64,
    pub share: f64,
    pub completion: f64,
    pub welfare: f64,
    pub gain: f64,
    pub order_changed: bool,
}

/// One user's best-response audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditEntry {
    pub user: u32,
    pub mode: AuditMode,
    pub order_method: OrderMethod,
    pub true_value: f64,
    pub truthful_welfare: f64,
    pub truthful_share: f64,
    pub max_gain: f64,
    pub argmax_announced: f64,
    pub tolerance: f64,
    /// No grid deviation improves welfare by more than `tolerance`.
    pub truthful_best_response: bool,
    pub points: Vec<GridPoint>,
}

fn mechanism_for(instance: &Instance) -> Mechanism {
    match instance.users {
        Users::A(_) => Mechanism::Proportional,
        Users::B(_) => Mechanism::X,
    }
}

fn sweep(
    instance: &Instance,
    user: u32,
    grid: &GridSpec,
    policy: &OrderPolicy,
    mode: AuditMode,
    tolerance: f64,
) -> Result<AuditEntry> {
    let pos = instance.position(user)?;
    let true_value = instance.users.true_values()[pos];
    let mechanism = mechanism_for(instance);
    let truthful = outcome_with_order(instance, &[], mechanism, policy)?;
    let base = truthful
        .user(user)
        .expect("user is in the instance")
        .clone();

    let mut points = Vec::new();
    let mut order_method = truthful.order_method;
    for factor in grid.factors() {
        let announced = true_value * factor;
        let out = outcome_with_order(
            instance,
            &[Announcement::new(user, announced)],
            mechanism,
            policy,
        )?;
        if factor == 1.0 {
            order_method = out.order_method;
        }
        let u = out.user(user).expect("user is in the instance");
        points.push(GridPoint {
            factor,
            announced,
            share: u.share,
            completion: u.announced_time.unwrap_or(f64::NAN),
            welfare: u.welfare,
            gain: u.welfare - base.welfare,
            order_changed: out.execution_order != truthful.execution_order,
        });
    }
    let best = points
        .iter()
        .max_by(|a, b| a.gain.total_cmp(&b.gain))
        .expect("grid always contains the truth");
    Ok(AuditEntry {
        user,
        mode,
        order_method,
        true_value,
        truthful_welfare: base.welfare,
        truthful_share: base.share,
        max_gain: best.gain,
        argmax_announced: best.announced,
        tolerance,
        truthful_best_response: best.gain <= tolerance,
        points,
    })
}

/// Sweeps a deadline user's announced deadline under the proportional mechanism.
pub fn best_response_a(instance: &Instance, user: u32, grid: &GridSpec) -> Result<AuditEntry> {
    expect_type(instance, "A")?;
    sweep(
        instance,
        user,
        grid,
        &OrderPolicy::Optimize,
        AuditMode::Deadline,
        TOL_GAIN_A,
    )
}

fn expect_type(instance: &Instance, wanted: &'static str) -> Result<()> {
    if instance.user_type().as_str() == wanted {
        Ok(())
    } else {
        Err(Error::MechanismMismatch {
            mechanism: if wanted == "A" { "proportional" } else { "x" },
            user_type: instance.user_type().as_str(),
        })
    }
}

/// The order the regulator picks under truthful announcements, as ids.
fn truthful_order(instance: &Instance) -> Result<Vec<u32>> {
    Ok(outcome_with_order(instance, &[], Mechanism::X, &OrderPolicy::Optimize)?.execution_order)
}

/// Sweeps a penalty user's announced penalty under mechanism X.
pub fn best_response_b(
    instance: &Instance,
    user: u32,
    grid: &GridSpec,
    mode: AuditMode,
) -> Result<AuditEntry> {
    expect_type(instance, "B")?;
    let policy = match mode {
        AuditMode::Reorder => OrderPolicy::Optimize,
        _ => OrderPolicy::Fixed(truthful_order(instance)?),
    };
    let mode = if mode == AuditMode::Reorder {
        AuditMode::Reorder
    } else {
        AuditMode::Fixed
    };
    sweep(instance, user, grid, &policy, mode, TOL_GAIN_B)
}

/// Finite-difference view of a penalty user's welfare at the truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FocReport {
    pub user: u32,
    pub h: f64,
    /// `(W(p + h) - W(p - h)) / 2h`.
    pub derivative: f64,
    /// `(W(p + h) - 2 W(p) + W(p - h)) / h^2`.
    pub second_difference: f64,
    pub tolerance: f64,
    pub passes: bool,
}

/// Central finite differences of a user's welfare in their own announced
/// penalty, with the truthful order held fixed. The differences are taken
/// from exact welfare increments rather than from subtracted welfares.
pub fn foc_check_b(instance: &Instance, user: u32, h: Option<f64>) -> Result<FocReport> {
    expect_type(instance, "B")?;
    let pos = instance.position(user)?;
    let p = instance.users.true_values()[pos];
    let h = h.unwrap_or(FD_REL_STEP * p);
    if !(h > 0.0 && h < p / 10.0) {
        return Err(Error::StepTooLarge { h, value: p });
    }
    let order = truthful_order(instance)?
        .iter()
        .map(|&id| instance.position(id))
        .collect::<Result<Vec<_>>>()?;
    let (workloads, truth) = (instance.users.workloads(), instance.users.true_values());
    let step = |delta: f64| {
        mechanism_x_welfare_delta(&order, &workloads, &truth, p, pos, delta, instance.alpha)
    };
    let (up, down) = (step(h)?, step(-h)?);
    let derivative = (up - down) / (2.0 * h);
    let second_difference = (up + down) / (h * h);
    let tolerance = FD_REL_TOL * p;
    Ok(FocReport {
        user,
        h,
        derivative,
        second_difference,
        tolerance,
        passes: derivative.abs() <= tolerance && second_difference <= 0.0,
    })
}

/// Which side of the true deadline the announcement falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Claim {
    Earlier,
    Truthful,
    Later,
}

/// Where the regulator places the completion relative to the announcement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    BeforeAnnounced,
    AtAnnounced,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayoffCell {
    pub claim: Claim,
    pub placement: Placement,
    pub announced: f64,
    pub completion: f64,
    pub previous_completion: f64,
    pub share: f64,
    /// Formula the share reduces to in this cell.
    pub formula: &'static str,
    pub formula_value: f64,
    pub deadline_met: bool,
    pub quality: f64,
    pub welfare: f64,
}

/// A deadline user's payoffs across the claim / placement cases. Cells no
/// announcement in the search range reaches stay empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayoffTable {
    pub user: u32,
    pub true_deadline: f64,
    pub truthful_welfare: f64,
    /// Rows: placement before / at the announced deadline. Columns: earlier,
    /// truthful, later claim.
    pub cells: [[Option<PayoffCell>; 3]; 2],
}

fn previous_completion(out: &MechanismOutcome, user: u32) -> f64 {
    let pos = out
        .execution_order
        .iter()
        .position(|&id| id == user)
        .expect("user scheduled");
    if pos == 0 {
        0.0
    } else {
        out.user(out.execution_order[pos - 1])
            .and_then(|u| u.announced_time)
            .expect("scheduled user has a time")
    }
}

/// Probes announcements between a quarter and four times the true deadline
/// and fills each cell with the probe closest to the truth.
pub fn payoff_table_a(instance: &Instance, user: u32) -> Result<PayoffTable> {
    expect_type(instance, "A")?;
    let pos = instance.position(user)?;
    let Users::A(jobs) = &instance.users else {
        unreachable!()
    };
    let job = jobs[pos];
    let a = instance.alpha.value();
    let policy = OrderPolicy::Optimize;

    let probes = 801;
    let mut factors: Vec<f64> = (0..probes)
        .map(|k| 4f64.powf(2.0 * k as f64 / (probes - 1) as f64 - 1.0))
        .collect();
    factors.push(1.0);

    let mut cells: [[Option<PayoffCell>; 3]; 2] = Default::default();
    let mut closeness = [[f64::INFINITY; 3]; 2];
    let mut truthful_welfare = f64::NAN;
    for factor in factors {
        let announced = if factor == 1.0 { job.d } else { job.d * factor };
        let out = outcome_with_order(
            instance,
            &[Announcement::new(user, announced)],
            Mechanism::Proportional,
            &policy,
        )?;
        let u = out.user(user).expect("user in instance");
        let t = u.announced_time.expect("participating");
        let prev = previous_completion(&out, user);
        let (claim, col) = if announced < job.d {
            (Claim::Earlier, 0)
        } else if announced == job.d {
            truthful_welfare = u.welfare;
            (Claim::Truthful, 1)
        } else {
            (Claim::Later, 2)
        };
        let (placement, row) = if rel_close(t, announced, REL_TOL) {
            (Placement::AtAnnounced, 1)
        } else {
            (Placement::BeforeAnnounced, 0)
        };
        let (formula, end) = match (claim, placement) {
            (_, Placement::BeforeAnnounced) => ("(t - t_prev)^(1-alpha) * w^alpha", t),
            (Claim::Earlier, Placement::AtAnnounced) => {
                ("(d_hat - t_prev)^(1-alpha) * w^alpha", announced)
            }
            (Claim::Truthful, Placement::AtAnnounced) => {
                ("(d - t_prev)^(1-alpha) * w^alpha", job.d)
            }
            (Claim::Later, Placement::AtAnnounced) => {
                ("quality 0: completes after the true deadline", announced)
            }
        };
        let distance = factor.ln().abs();
        if distance < closeness[row][col] {
            closeness[row][col] = distance;
            cells[row][col] = Some(PayoffCell {
                claim,
                placement,
                announced,
                completion: t,
                previous_completion: prev,
                share: u.share,
                formula,
                formula_value: (end - prev).powf(1.0 - a) * job.w.powf(a),
                deadline_met: u.quality > 0.0,
                quality: u.quality,
                welfare: u.welfare,
            });
        }
    }
    Ok(PayoffTable {
        user,
        true_deadline: job.d,
        truthful_welfare,
        cells,
    })
}

/// Audit of every user of an instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub entries: Vec<AuditEntry>,
    pub foc: Vec<FocReport>,
    pub payoff_tables: Vec<PayoffTable>,
    /// Every entry (and every finite-difference check) passes.
    pub truthful_everywhere: bool,
}

pub fn audit_a(instance: &Instance, grid: &GridSpec) -> Result<AuditReport> {
    let mut entries = Vec::new();
    let mut payoff_tables = Vec::new();
    for id in instance.users.ids() {
        entries.push(best_response_a(instance, id, grid)?);
        payoff_tables.push(payoff_table_a(instance, id)?);
    }
    let truthful_everywhere = entries.iter().all(|e| e.truthful_best_response);
    Ok(AuditReport {
        entries,
        foc: Vec::new(),
        payoff_tables,
        truthful_everywhere,
    })
}

/// In reorder mode the verdict only reflects the grid search; findings there
/// are observations, since truthfulness is only claimed for a fixed order.
pub fn audit_b(instance: &Instance, grid: &GridSpec, mode: AuditMode) -> Result<AuditReport> {
    let mut entries = Vec::new();
    let mut foc = Vec::new();
    for id in instance.users.ids() {
        entries.push(best_response_b(instance, id, grid, mode)?);
        if mode != AuditMode::Reorder {
            foc.push(foc_check_b(instance, id, None)?);
        }
    }
    let truthful_everywhere =
        entries.iter().all(|e| e.truthful_best_response) && foc.iter().all(|f| f.passes);
    Ok(AuditReport {
        entries,
        foc,
        payoff_tables: Vec::new(),
        truthful_everywhere,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{JobA, JobB};

    fn three_jobs() -> Instance {
        Instance::type_a(
            2.0,
            vec![
                JobA {
                    id: 1,
                    w: 1.0,
                    d: 1.0,
                    u: 10.0,
                },
                JobA {
                    id: 2,
                    w: 3.0,
                    d: 2.0,
                    u: 10.0,
                },
                JobA {
                    id: 3,
                    w: 1.0,
                    d: 4.0,
                    u: 10.0,
                },
            ],
        )
        .unwrap()
    }

    fn two_b() -> Instance {
        Instance::type_b(
            2.0,
            vec![
                JobB {
                    id: 1,
                    w: 1.0,
                    p: 3.0,
                    u: 10.0,
                },
                JobB {
                    id: 2,
                    w: 2.0,
                    p: 1.0,
                    u: 10.0,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn grid_contains_truth_once() {
        let f = GridSpec::default().factors();
        assert_eq!(f.len(), 202);
        assert_eq!(f.iter().filter(|&&x| x == 1.0).count(), 1);
        assert_eq!((f[0], f[201]), (0.5, 2.0));
    }

    #[test]
    fn truth_is_dominant_for_first_user() {
        let e = best_response_a(&three_jobs(), 1, &GridSpec::default()).unwrap();
        assert!(e.truthful_best_response, "gain {}", e.max_gain);
        assert!(e.max_gain <= TOL_GAIN_A);
    }

    #[test]
    fn earlier_claims_never_lower_the_share() {
        let inst = three_jobs();
        for id in 1..=3 {
            let e = best_response_a(&inst, id, &GridSpec::default()).unwrap();
            for pt in e.points.iter().filter(|p| p.factor < 1.0) {
                assert!(pt.share >= e.truthful_share * (1.0 - 1e-12));
                assert!(pt.gain <= TOL_GAIN_A);
            }
        }
    }

    #[test]
    fn late_completion_costs_the_quality() {
        // user 3 runs alone in the last block, so a later claim slows it down
        let e = best_response_a(&three_jobs(), 3, &GridSpec::default()).unwrap();
        let late: Vec<_> = e
            .points
            .iter()
            .filter(|p| p.completion > 4.0 * (1.0 + 1e-9))
            .collect();
        assert!(!late.is_empty());
        for p in late {
            assert_eq!(p.welfare, -p.share);
            assert!(p.welfare < e.truthful_welfare);
        }
    }

    #[test]
    fn type_b_fixed_order_truth_is_best() {
        for id in [1, 2] {
            let e = best_response_b(&two_b(), id, &GridSpec::default(), AuditMode::Fixed).unwrap();
            assert!(e.truthful_best_response, "user {id}: gain {}", e.max_gain);
        }
    }

    #[test]
    fn single_user_truth_is_best() {
        let inst = Instance::type_b(
            2.5,
            vec![JobB {
                id: 1,
                w: 0.7,
                p: 0.4,
                u: 5.0,
            }],
        )
        .unwrap();
        let e = best_response_b(&inst, 1, &GridSpec::default(), AuditMode::Fixed).unwrap();
        assert!(e.truthful_best_response);
        assert_eq!(e.argmax_announced, 0.4);
        let f = foc_check_b(&inst, 1, None).unwrap();
        assert!(f.passes, "{f:?}");
        assert!(f.second_difference < 0.0);
    }

    #[test]
    fn identical_users_are_symmetric() {
        let inst = Instance::type_b(
            2.0,
            vec![
                JobB {
                    id: 1,
                    w: 1.0,
                    p: 1.0,
                    u: 10.0,
                },
                JobB {
                    id: 2,
                    w: 1.0,
                    p: 1.0,
                    u: 10.0,
                },
            ],
        )
        .unwrap();
        for id in [1, 2] {
            let e = best_response_b(&inst, id, &GridSpec::default(), AuditMode::Fixed).unwrap();
            assert!(e.truthful_best_response);
            assert!(foc_check_b(&inst, id, None).unwrap().passes);
        }
    }

    #[test]
    fn foc_example() {
        let f = foc_check_b(&two_b(), 1, Some(3e-5)).unwrap();
        assert!(f.derivative.abs() <= 1e-4 * 3.0, "{f:?}");
        assert!(f.second_difference <= 0.0);
        assert!(matches!(
            foc_check_b(&two_b(), 1, Some(0.3)).unwrap_err(),
            Error::StepTooLarge { .. }
        ));
    }

    #[test]
    fn reorder_mode_reports_order_method() {
        let e = best_response_b(&two_b(), 2, &GridSpec::default(), AuditMode::Reorder).unwrap();
        assert_eq!(e.mode, AuditMode::Reorder);
        assert_eq!(e.order_method, OrderMethod::BruteForce);
    }

    #[test]
    fn payoff_table_cells() {
        let inst = three_jobs();
        let table = payoff_table_a(&inst, 2).unwrap();
        // truthful: job 2 finishes exactly at its deadline
        let truth = table.cells[1][1].as_ref().unwrap();
        assert_eq!(truth.share, 6.0);
        assert!((truth.formula_value - truth.share).abs() < 1e-12);
        assert!(table.cells[0][1].is_none());

        let later_at = table.cells[1][2]
            .as_ref()
            .expect("late placement reachable");
        assert_eq!(later_at.quality, 0.0);

        let earlier_at = table.cells[1][0].as_ref().expect("earlier claim binds");
        assert!(earlier_at.deadline_met);
        assert!((earlier_at.formula_value - earlier_at.share).abs() <= 1e-9 * earlier_at.share);
        assert!(earlier_at.welfare <= table.truthful_welfare);
    }
}
