//! One function per subcommand. Each builds a structured JSON report, a flat
//! CSV table for plotting, and a one-line-per-fact summary for the terminal.

use serde::Serialize;

use super::{HarnessError, LoadedInstance};
use crate::audit::{self, AuditMode, FocReport, GridSpec, PayoffTable};
use crate::mechanisms::{budget_balance_ratio, outcome};
use crate::model::{
    rel_diff, Announcement, Block, Instance, Mechanism, MechanismOutcome, OrderMethod, UserOutcome,
    UserType, Users, REL_TOL,
};
use crate::{typea, typeb};

pub const REPORT_VERSION: u32 = 1;
/// Smith's rule guarantee `(sqrt(3) + 1) / 2` plus slack.
pub const SMITH_BOUND: f64 = 1.3661;
/// Agreement required between the coordinate-descent and closed-form lengths.
pub const DESCENT_TOL: f64 = 1e-6;

pub struct CommandOutput {
    pub command: &'static str,
    pub json: String,
    pub csv: String,
    pub summary: String,
    /// A check failed: infeasible schedule, violated property, oracle mismatch.
    pub findings: bool,
}

#[derive(Serialize)]
struct Units {
    work: &'static str,
    time: &'static str,
    speed: &'static str,
    energy: &'static str,
    share: &'static str,
    welfare: &'static str,
    penalty: &'static str,
    ratio: &'static str,
}

const UNITS: Units = Units {
    work: "work units",
    time: "time units",
    speed: "work units per time unit",
    energy: "energy units (work^alpha * time^(1-alpha))",
    share: "utility units",
    welfare: "utility units",
    penalty: "utility units per time unit",
    ratio: "dimensionless",
};

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    version: u32,
    command: &'a str,
    input: &'a str,
    alpha: f64,
    alpha_atypical: bool,
    user_type: UserType,
    units: &'a Units,
    #[serde(flatten)]
    body: T,
    findings: &'a [String],
}

fn finish<T: Serialize>(
    command: &'static str,
    input: &str,
    instance: &Instance,
    body: T,
    csv: String,
    mut summary: Vec<String>,
    findings: Vec<String>,
) -> CommandOutput {
    let report = Report {
        version: REPORT_VERSION,
        command,
        input,
        alpha: instance.alpha.value(),
        alpha_atypical: instance.alpha.is_atypical(),
        user_type: instance.user_type(),
        units: &UNITS,
        body,
        findings: &findings,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("reports serialise");
    json.push('\n');
    if instance.alpha.is_atypical() {
        summary.push(format!(
            "warning: alpha = {} lies outside [2, 3]",
            instance.alpha
        ));
    }
    summary.extend(findings.iter().map(|f| format!("finding: {f}")));
    CommandOutput {
        command,
        json,
        csv,
        summary: summary.join("\n"),
        findings: !findings.is_empty(),
    }
}

fn to_csv<R: Serialize>(rows: &[R]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows serialise");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

fn require(instance: &Instance, wanted: UserType, command: &str) -> Result<(), HarnessError> {
    if instance.user_type() == wanted {
        Ok(())
    } else {
        Err(HarnessError::Usage(format!(
            "{command} needs a type {wanted} instance, got type {}",
            instance.user_type()
        )))
    }
}

/// Instance positions of participating users; position `k` of the result is
/// participant index `k` of the outcome's schedule.
fn participants(out: &MechanismOutcome) -> Vec<usize> {
    (0..out.users.len())
        .filter(|&i| out.users[i].participate)
        .collect()
}

fn opted_out(out: &MechanismOutcome) -> Vec<u32> {
    out.users
        .iter()
        .filter(|u| !u.participate)
        .map(|u| u.id)
        .collect()
}

#[derive(Serialize)]
struct BlockRow {
    index: usize,
    work: f64,
    duration: f64,
    speed: f64,
    energy: f64,
}

fn block_rows(blocks: &[Block], alpha: f64) -> Vec<BlockRow> {
    blocks
        .iter()
        .enumerate()
        .map(|(index, b)| BlockRow {
            index,
            work: b.work,
            duration: b.duration,
            speed: b.speed(),
            energy: b.energy(alpha),
        })
        .collect()
}

#[derive(Serialize)]
struct JobRowA {
    id: u32,
    rank: usize,
    w: f64,
    announced_deadline: f64,
    true_deadline: f64,
    completion: f64,
    block: usize,
    slack: f64,
}

#[derive(Serialize)]
struct SolveABody {
    blocks: Vec<BlockRow>,
    jobs: Vec<JobRowA>,
    energy: f64,
    feasible: bool,
    opted_out: Vec<u32>,
}

fn solve_a_body(
    instance: &Instance,
    announcements: &[Announcement],
) -> Result<(SolveABody, Vec<String>), HarnessError> {
    let Users::A(jobs) = &instance.users else {
        unreachable!()
    };
    let out = outcome(instance, announcements, Mechanism::Proportional)?;
    let mut findings = Vec::new();
    let body = match &out.schedule {
        None => SolveABody {
            blocks: Vec::new(),
            jobs: Vec::new(),
            energy: 0.0,
            feasible: true,
            opted_out: opted_out(&out),
        },
        Some(s) => {
            let parts = participants(&out);
            let w: Vec<f64> = s.order.iter().map(|&k| jobs[parts[k]].w).collect();
            let d: Vec<f64> = s
                .order
                .iter()
                .map(|&k| out.users[parts[k]].announced.unwrap())
                .collect();
            let feas = typea::feasibility_check(&s.profile, &w, &d);
            if let Some(i) = feas.first_violation {
                findings.push(format!(
                    "announced deadline of user {} is missed",
                    jobs[parts[s.order[i]]].id
                ));
            }
            let rows = s
                .order
                .iter()
                .enumerate()
                .map(|(rank, &k)| {
                    let job = jobs[parts[k]];
                    JobRowA {
                        id: job.id,
                        rank: rank + 1,
                        w: job.w,
                        announced_deadline: d[rank],
                        true_deadline: job.d,
                        completion: s.completion[k],
                        block: s.block_of[k],
                        slack: feas.slack[rank],
                    }
                })
                .collect();
            SolveABody {
                blocks: block_rows(s.profile.blocks(), instance.alpha.value()),
                jobs: rows,
                energy: s.energy,
                feasible: feas.feasible,
                opted_out: opted_out(&out),
            }
        }
    };
    Ok((body, findings))
}

pub fn solve_a(loaded: &LoadedInstance, input: &str) -> Result<CommandOutput, HarnessError> {
    let inst = &loaded.instance;
    require(inst, UserType::A, "solve-a")?;
    let (body, findings) = solve_a_body(inst, &loaded.announcements)?;
    let summary = vec![
        format!(
            "blocks: {}",
            body.blocks
                .iter()
                .map(|b| format!("({}, {})", b.work, b.duration))
                .collect::<Vec<_>>()
                .join(" ")
        ),
        format!("energy: {}", body.energy),
        format!("feasible: {}", if body.feasible { "yes" } else { "no" }),
    ];
    let csv = to_csv(&body.jobs);
    Ok(finish("solve-a", input, inst, body, csv, summary, findings))
}

#[derive(Serialize)]
struct JobRowB {
    id: u32,
    rank: usize,
    w: f64,
    announced_penalty: f64,
    true_penalty: f64,
    length: f64,
    speed: f64,
    completion: f64,
}

#[derive(Serialize)]
struct SolveBBody {
    order_method: OrderMethod,
    order: Vec<u32>,
    jobs: Vec<JobRowB>,
    energy: f64,
    /// Sum of announced penalty times completion time.
    penalty_cost: f64,
    social_cost_closed_form: f64,
    social_cost_direct: f64,
    opted_out: Vec<u32>,
}

fn solve_b_body(
    instance: &Instance,
    announcements: &[Announcement],
) -> Result<(SolveBBody, Vec<String>), HarnessError> {
    let Users::B(jobs) = &instance.users else {
        unreachable!()
    };
    let out = outcome(instance, announcements, Mechanism::X)?;
    let mut findings = Vec::new();
    let body = match &out.schedule {
        None => SolveBBody {
            order_method: out.order_method,
            order: Vec::new(),
            jobs: Vec::new(),
            energy: 0.0,
            penalty_cost: 0.0,
            social_cost_closed_form: 0.0,
            social_cost_direct: 0.0,
            opted_out: opted_out(&out),
        },
        Some(s) => {
            let parts = participants(&out);
            let w: Vec<f64> = parts.iter().map(|&i| jobs[i].w).collect();
            let p: Vec<f64> = parts
                .iter()
                .map(|&i| out.users[i].announced.unwrap())
                .collect();
            let penalty_cost: f64 = (0..w.len()).map(|k| p[k] * s.completion[k]).sum();
            let closed = typeb::social_cost(&s.order, &w, &p, instance.alpha)?;
            let direct = penalty_cost + s.energy;
            if rel_diff(closed, direct) > REL_TOL {
                findings.push(format!(
                    "closed-form social cost {closed} differs from direct {direct}"
                ));
            }
            let rows = s
                .order
                .iter()
                .enumerate()
                .map(|(rank, &k)| {
                    let job = jobs[parts[k]];
                    JobRowB {
                        id: job.id,
                        rank: rank + 1,
                        w: job.w,
                        announced_penalty: p[k],
                        true_penalty: job.p,
                        length: s.lengths[k],
                        speed: job.w / s.lengths[k],
                        completion: s.completion[k],
                    }
                })
                .collect();
            SolveBBody {
                order_method: out.order_method,
                order: out.execution_order.clone(),
                jobs: rows,
                energy: s.energy,
                penalty_cost,
                social_cost_closed_form: closed,
                social_cost_direct: direct,
                opted_out: opted_out(&out),
            }
        }
    };
    Ok((body, findings))
}

pub fn solve_b(loaded: &LoadedInstance, input: &str) -> Result<CommandOutput, HarnessError> {
    let inst = &loaded.instance;
    require(inst, UserType::B, "solve-b")?;
    let (body, findings) = solve_b_body(inst, &loaded.announcements)?;
    let summary = vec![
        format!("order ({:?}): {:?}", body.order_method, body.order),
        format!(
            "lengths: {:?}",
            body.jobs.iter().map(|j| j.length).collect::<Vec<_>>()
        ),
        format!("energy: {}", body.energy),
        format!("social cost: {}", body.social_cost_closed_form),
    ];
    let csv = to_csv(&body.jobs);
    Ok(finish("solve-b", input, inst, body, csv, summary, findings))
}

#[derive(Serialize)]
struct SharesBody {
    mechanism: Mechanism,
    order_method: OrderMethod,
    execution_order: Vec<u32>,
    users: Vec<UserOutcome>,
    energy: f64,
    total_share: f64,
    bb_ratio: Option<f64>,
    bb_violated: bool,
    total_welfare: f64,
}

fn shares_body(
    instance: &Instance,
    announcements: &[Announcement],
    mechanism: Mechanism,
) -> Result<(SharesBody, Vec<String>), HarnessError> {
    let out = outcome(instance, announcements, mechanism)?;
    let shares: Vec<f64> = out
        .users
        .iter()
        .filter(|u| u.participate)
        .map(|u| u.share)
        .collect();
    let bb_violated = out.schedule.is_some() && budget_balance_ratio(&shares, out.energy)?.violated;
    let mut findings = Vec::new();
    if bb_violated {
        findings.push(format!(
            "shares {} do not cover the energy {}",
            out.total_share, out.energy
        ));
    }
    Ok((
        SharesBody {
            mechanism,
            order_method: out.order_method,
            execution_order: out.execution_order,
            users: out.users,
            energy: out.energy,
            total_share: out.total_share,
            bb_ratio: out.bb_ratio,
            bb_violated,
            total_welfare: out.total_welfare,
        },
        findings,
    ))
}

pub fn shares(
    loaded: &LoadedInstance,
    input: &str,
    mechanism: Mechanism,
) -> Result<CommandOutput, HarnessError> {
    let inst = &loaded.instance;
    let (body, findings) = shares_body(inst, &loaded.announcements, mechanism)?;
    let summary = vec![
        format!(
            "shares: {}",
            body.users
                .iter()
                .map(|u| format!("{}={}", u.id, u.share))
                .collect::<Vec<_>>()
                .join(" ")
        ),
        format!(
            "bb_ratio: {}",
            body.bb_ratio.map_or("n/a".to_string(), |r| r.to_string())
        ),
        format!("total welfare: {}", body.total_welfare),
    ];
    let csv = to_csv(&body.users);
    Ok(finish("shares", input, inst, body, csv, summary, findings))
}

#[derive(Serialize)]
struct EntrySummary {
    user: u32,
    true_value: f64,
    truthful_welfare: f64,
    truthful_share: f64,
    max_gain: f64,
    argmax_announced: f64,
    tolerance: f64,
    truthful_best_response: bool,
    order_method: OrderMethod,
    /// Grid points at which the regulator ran a different order.
    order_changes: usize,
}

#[derive(Serialize)]
struct PointRow {
    user: u32,
    factor: f64,
    announced: f64,
    share: f64,
    completion: f64,
    welfare: f64,
    gain: f64,
    order_changed: bool,
}

#[derive(Serialize)]
struct AuditBody {
    mode: AuditMode,
    grid: GridSpec,
    truthful_everywhere: bool,
    entries: Vec<EntrySummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    foc: Vec<FocReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    payoff_tables: Vec<PayoffTable>,
    /// Deviations that pay off only because the order changes; reported,
    /// not counted as findings.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    observations: Vec<String>,
}

fn audit_body(
    instance: &Instance,
    mode: AuditMode,
) -> Result<(AuditBody, Vec<PointRow>, Vec<String>), HarnessError> {
    let grid = GridSpec::default();
    let report = match mode {
        AuditMode::Deadline => audit::audit_a(instance, &grid)?,
        m => audit::audit_b(instance, &grid, m)?,
    };
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    let mut findings = Vec::new();
    let mut observations = Vec::new();
    for e in &report.entries {
        rows.extend(e.points.iter().map(|p| PointRow {
            user: e.user,
            factor: p.factor,
            announced: p.announced,
            share: p.share,
            completion: p.completion,
            welfare: p.welfare,
            gain: p.gain,
            order_changed: p.order_changed,
        }));
        if !e.truthful_best_response {
            let msg = format!(
                "user {} gains {} by announcing {} instead of {}",
                e.user, e.max_gain, e.argmax_announced, e.true_value
            );
            if mode == AuditMode::Reorder {
                observations.push(msg);
            } else {
                findings.push(msg);
            }
        }
        entries.push(EntrySummary {
            user: e.user,
            true_value: e.true_value,
            truthful_welfare: e.truthful_welfare,
            truthful_share: e.truthful_share,
            max_gain: e.max_gain,
            argmax_announced: e.argmax_announced,
            tolerance: e.tolerance,
            truthful_best_response: e.truthful_best_response,
            order_method: e.order_method,
            order_changes: e.points.iter().filter(|p| p.order_changed).count(),
        });
    }
    for f in report.foc.iter().filter(|f| !f.passes) {
        findings.push(format!(
            "user {}: derivative {} (tolerance {}), second difference {}",
            f.user, f.derivative, f.tolerance, f.second_difference
        ));
    }
    Ok((
        AuditBody {
            mode,
            grid,
            truthful_everywhere: findings.is_empty() && observations.is_empty(),
            entries,
            foc: report.foc,
            payoff_tables: report.payoff_tables,
            observations,
        },
        rows,
        findings,
    ))
}

fn audit_summary(body: &AuditBody) -> Vec<String> {
    body.entries
        .iter()
        .map(|e| {
            format!(
                "user {}: truthful best response: {} (max gain {})",
                e.user,
                if e.truthful_best_response {
                    "yes"
                } else {
                    "no"
                },
                e.max_gain
            )
        })
        .collect()
}

pub fn audit_a(loaded: &LoadedInstance, input: &str) -> Result<CommandOutput, HarnessError> {
    let inst = &loaded.instance;
    require(inst, UserType::A, "audit-a")?;
    let (body, rows, findings) = audit_body(inst, AuditMode::Deadline)?;
    let summary = audit_summary(&body);
    Ok(finish(
        "audit-a",
        input,
        inst,
        body,
        to_csv(&rows),
        summary,
        findings,
    ))
}

pub fn audit_b(
    loaded: &LoadedInstance,
    input: &str,
    mode: AuditMode,
) -> Result<CommandOutput, HarnessError> {
    let inst = &loaded.instance;
    require(inst, UserType::B, "audit-b")?;
    let (body, rows, findings) = audit_body(inst, mode)?;
    let mut summary = audit_summary(&body);
    summary.extend(
        body.observations
            .iter()
            .map(|o| format!("observation: {o}")),
    );
    Ok(finish(
        "audit-b",
        input,
        inst,
        body,
        to_csv(&rows),
        summary,
        findings,
    ))
}

#[derive(Serialize)]
struct OracleABody {
    n: usize,
    stack_blocks: Vec<BlockRow>,
    oracle_blocks: Vec<BlockRow>,
    stack_energy: f64,
    oracle_energy: f64,
    rel_diff: f64,
    tolerance: f64,
    matches: bool,
}

#[derive(Serialize)]
struct OracleARow {
    source: &'static str,
    index: usize,
    work: f64,
    duration: f64,
    speed: f64,
}

pub fn oracle_a(loaded: &LoadedInstance, input: &str) -> Result<CommandOutput, HarnessError> {
    let inst = &loaded.instance;
    require(inst, UserType::A, "oracle-a")?;
    let Users::A(jobs) = &inst.users else {
        unreachable!()
    };
    let w: Vec<f64> = jobs.iter().map(|j| j.w).collect();
    let d: Vec<f64> = jobs.iter().map(|j| j.d).collect();
    let stack = typea::optimal_profile(&w, &d)?;
    let oracle = typea::exhaustive_oracle(&w, &d, inst.alpha)?;
    let (es, eo) = (
        crate::energy(&stack, inst.alpha),
        crate::energy(&oracle, inst.alpha),
    );
    let diff = rel_diff(es, eo);
    let matches = diff <= REL_TOL;
    let a = inst.alpha.value();
    let body = OracleABody {
        n: w.len(),
        stack_blocks: block_rows(stack.blocks(), a),
        oracle_blocks: block_rows(oracle.blocks(), a),
        stack_energy: es,
        oracle_energy: eo,
        rel_diff: diff,
        tolerance: REL_TOL,
        matches,
    };
    let rows: Vec<OracleARow> = [
        ("stack", &body.stack_blocks),
        ("oracle", &body.oracle_blocks),
    ]
    .into_iter()
    .flat_map(|(source, blocks)| {
        blocks.iter().map(move |b| OracleARow {
            source,
            index: b.index,
            work: b.work,
            duration: b.duration,
            speed: b.speed,
        })
    })
    .collect();
    let findings = if matches {
        Vec::new()
    } else {
        vec![format!("stack energy {es} differs from oracle energy {eo}")]
    };
    let summary = vec![
        format!("stack energy: {es}"),
        format!("oracle energy: {eo}"),
        format!("match: {}", if matches { "yes" } else { "no" }),
    ];
    Ok(finish(
        "oracle-a",
        input,
        inst,
        body,
        to_csv(&rows),
        summary,
        findings,
    ))
}

#[derive(Serialize)]
struct OrderCost {
    order: Vec<u32>,
    cost: f64,
}

#[derive(Serialize)]
struct SmithCheck {
    order: Vec<u32>,
    cost: f64,
    ratio: f64,
    bound: f64,
}

#[derive(Serialize)]
struct ClassicalCheck {
    beta: f64,
    scaling_factor: f64,
    order: Vec<u32>,
    cost: f64,
    scaled_cost: f64,
    /// The reversed classical optimum is the speed-scaling optimum, or ties with it.
    reversed_matches: bool,
    rel_diff: f64,
}

#[derive(Serialize)]
struct DescentCheck {
    max_rel_diff: f64,
    tolerance: f64,
}

#[derive(Serialize)]
struct OracleBBody {
    brute_force: OrderCost,
    smith: SmithCheck,
    classical: ClassicalCheck,
    coordinate_descent: DescentCheck,
    checks_pass: bool,
}

#[derive(Serialize)]
struct OracleBRow {
    rank: usize,
    id: u32,
    closed_form_length: f64,
    numeric_length: f64,
}

pub fn oracle_b(loaded: &LoadedInstance, input: &str) -> Result<CommandOutput, HarnessError> {
    let inst = &loaded.instance;
    require(inst, UserType::B, "oracle-b")?;
    let Users::B(jobs) = &inst.users else {
        unreachable!()
    };
    let ids: Vec<u32> = jobs.iter().map(|j| j.id).collect();
    let as_ids = |o: &[usize]| o.iter().map(|&k| ids[k]).collect::<Vec<_>>();
    let w: Vec<f64> = jobs.iter().map(|j| j.w).collect();
    let p: Vec<f64> = jobs.iter().map(|j| j.p).collect();
    let alpha = inst.alpha;

    let (best, best_cost) = typeb::brute_force_order(&w, &p, alpha)?;
    let smith = typeb::smith_order(&w, &p);
    let smith_cost = typeb::social_cost(&smith, &w, &p, alpha)?;
    let ratio = smith_cost / best_cost;

    let classical = typeb::to_classical(&w, &p, alpha);
    let (c_order, c_cost) = classical.brute_force()?;
    let factor = typeb::scaling_factor(alpha);
    let reversed = typeb::ClassicalInstance::to_speed_order(&c_order);
    let reversed_cost = typeb::social_cost(&reversed, &w, &p, alpha)?;
    let diff = rel_diff(c_cost * factor, reversed_cost);
    let reversed_matches = reversed == best || rel_diff(reversed_cost, best_cost) <= REL_TOL;

    let exact = typeb::interval_lengths(&best, &w, &p, alpha)?;
    let numeric = typeb::coordinate_descent_lengths(&best, &w, &p, alpha)?;
    let cd_diff = exact
        .iter()
        .zip(&numeric)
        .map(|(x, y)| rel_diff(*x, *y))
        .fold(0.0, f64::max);

    let mut findings = Vec::new();
    if ratio > SMITH_BOUND {
        findings.push(format!("Smith ratio {ratio} exceeds {SMITH_BOUND}"));
    }
    if diff > REL_TOL || !reversed_matches {
        findings.push(format!(
            "classical reduction mismatch (relative difference {diff})"
        ));
    }
    if cd_diff > DESCENT_TOL {
        findings.push(format!(
            "coordinate descent differs from closed form by {cd_diff}"
        ));
    }
    let rows: Vec<OracleBRow> = best
        .iter()
        .enumerate()
        .map(|(r, &k)| OracleBRow {
            rank: r + 1,
            id: ids[k],
            closed_form_length: exact[r],
            numeric_length: numeric[r],
        })
        .collect();
    let body = OracleBBody {
        brute_force: OrderCost {
            order: as_ids(&best),
            cost: best_cost,
        },
        smith: SmithCheck {
            order: as_ids(&smith),
            cost: smith_cost,
            ratio,
            bound: SMITH_BOUND,
        },
        classical: ClassicalCheck {
            beta: classical.beta,
            scaling_factor: factor,
            order: as_ids(&c_order),
            cost: c_cost,
            scaled_cost: c_cost * factor,
            reversed_matches,
            rel_diff: diff,
        },
        coordinate_descent: DescentCheck {
            max_rel_diff: cd_diff,
            tolerance: DESCENT_TOL,
        },
        checks_pass: findings.is_empty(),
    };
    let summary = vec![
        format!(
            "optimal order: {:?}, cost {best_cost}",
            body.brute_force.order
        ),
        format!("smith order: {:?}, ratio {ratio}", body.smith.order),
        format!("classical cost x {factor}: {}", c_cost * factor),
    ];
    Ok(finish(
        "oracle-b",
        input,
        inst,
        body,
        to_csv(&rows),
        summary,
        findings,
    ))
}

#[derive(Serialize)]
#[serde(untagged)]
enum SolveBody {
    A(SolveABody),
    B(SolveBBody),
}

#[derive(Serialize)]
struct FullBody {
    solve: SolveBody,
    shares: SharesBody,
    audit: AuditBody,
}

/// Solve, charge and audit in one report.
pub fn report(loaded: &LoadedInstance, input: &str) -> Result<CommandOutput, HarnessError> {
    let inst = &loaded.instance;
    let ann = &loaded.announcements;
    let (solve, mut findings, mechanism, mode) = match inst.user_type() {
        UserType::A => {
            let (b, f) = solve_a_body(inst, ann)?;
            (
                SolveBody::A(b),
                f,
                Mechanism::Proportional,
                AuditMode::Deadline,
            )
        }
        UserType::B => {
            let (b, f) = solve_b_body(inst, ann)?;
            (SolveBody::B(b), f, Mechanism::X, AuditMode::Fixed)
        }
    };
    let (shares, f) = shares_body(inst, ann, mechanism)?;
    findings.extend(f);
    let (audit, _, f) = audit_body(inst, mode)?;
    findings.extend(f);
    let mut summary = vec![
        format!("energy: {}", shares.energy),
        format!(
            "bb_ratio: {}",
            shares.bb_ratio.map_or("n/a".to_string(), |r| r.to_string())
        ),
        format!("total welfare: {}", shares.total_welfare),
    ];
    summary.extend(audit_summary(&audit));
    let csv = to_csv(&shares.users);
    let body = FullBody {
        solve,
        shares,
        audit,
    };
    Ok(finish("report", input, inst, body, csv, summary, findings))
}
