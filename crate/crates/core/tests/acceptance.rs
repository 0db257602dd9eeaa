//! Acceptance suite: one test per exit criterion, each printing a PASS/FAIL
//! line. Run with `cargo test --test acceptance -- --nocapture` to see them.

use std::path::{Path, PathBuf};
use std::process::Command;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use speedscale::audit::{best_response_a, best_response_b, foc_check_b, AuditMode, GridSpec};
use speedscale::harness::{emit_instance, generate_instance, parse_instance_str};
use speedscale::mechanisms::{
    budget_balance_ratio, mechanism_x_direct, mechanism_x_equivalent, outcome, proportional_shares,
};
use speedscale::model::{rel_diff, Alpha, Instance, JobB, Mechanism, UserType, Users};
use speedscale::{energy, typea, typeb};

const ALPHAS: [f64; 3] = [2.0, 2.5, 3.0];

fn report(criterion: u32, name: &str, failures: &[String], detail: String) {
    let verdict = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!("[{verdict}] criterion {criterion:>2}: {name} ({detail})");
    for f in failures.iter().take(10) {
        println!("        {f}");
    }
    assert!(
        failures.is_empty(),
        "criterion {criterion} failed: {} cases",
        failures.len()
    );
}

fn instance(seed: u64, n: usize, user_type: UserType) -> Instance {
    let alpha = ALPHAS[(seed % 3) as usize];
    generate_instance(seed, n, user_type, alpha)
        .unwrap()
        .into_instance()
        .unwrap()
        .instance
}

fn type_a_data(inst: &Instance) -> (Vec<f64>, Vec<f64>) {
    let Users::A(jobs) = &inst.users else {
        panic!("type A expected")
    };
    (
        jobs.iter().map(|j| j.w).collect(),
        jobs.iter().map(|j| j.d).collect(),
    )
}

fn type_b_data(inst: &Instance) -> (Vec<f64>, Vec<f64>) {
    let Users::B(jobs) = &inst.users else {
        panic!("type B expected")
    };
    (
        jobs.iter().map(|j| j.w).collect(),
        jobs.iter().map(|j| j.p).collect(),
    )
}

fn criterion_1_instances() -> impl Iterator<Item = Instance> {
    (0..1000u64).map(|seed| instance(10_000 + seed, 1 + (seed % 10) as usize, UserType::A))
}

#[test]
fn criterion_01_type_a_optimality() {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for (k, inst) in criterion_1_instances().enumerate() {
        let (w, d) = type_a_data(&inst);
        let stack = typea::optimal_profile(&w, &d).unwrap();
        let oracle = typea::exhaustive_oracle(&w, &d, inst.alpha).unwrap();
        let diff = rel_diff(energy(&stack, inst.alpha), energy(&oracle, inst.alpha));
        worst = worst.max(diff);
        if diff > 1e-9 {
            failures.push(format!("instance {k}: energy differs by {diff:e}"));
        }
        if stack.speeds().windows(2).any(|s| s[1] >= s[0]) {
            failures.push(format!("instance {k}: speeds not strictly decreasing"));
        }
        let feas = typea::feasibility_check(&stack, &w, &d);
        if !feas.feasible {
            failures.push(format!(
                "instance {k}: deadline {:?} missed",
                feas.first_violation
            ));
        }
        // The last job of each block finishes at the block end with zero slack.
        let sched = typea::schedule(&w, &d, inst.alpha).unwrap();
        let mut due = 0.0;
        for i in 0..w.len() {
            due += w[i];
            let closes_block = i + 1 == w.len() || sched.block_of[i + 1] != sched.block_of[i];
            if closes_block && feas.slack[i].abs() > 1e-9 * due {
                failures.push(format!(
                    "instance {k}: slack {} at block boundary",
                    feas.slack[i]
                ));
            }
        }
    }
    report(
        1,
        "type A stack vs exhaustive oracle",
        &failures,
        format!("1000 instances, worst energy gap {worst:e}"),
    );
}

#[test]
fn criterion_02_proportional_budget_balance() {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for (k, inst) in criterion_1_instances().enumerate() {
        let (w, d) = type_a_data(&inst);
        let sched = typea::schedule(&w, &d, inst.alpha).unwrap();
        let shares = proportional_shares(&sched, &w, inst.alpha);
        let diff = rel_diff(shares.total(), sched.energy);
        worst = worst.max(diff);
        if diff > 1e-9 {
            failures.push(format!(
                "instance {k}: shares {} vs energy {}",
                shares.total(),
                sched.energy
            ));
        }
    }
    report(
        2,
        "proportional shares sum to energy",
        &failures,
        format!("1000 instances, worst gap {worst:e}"),
    );
}

#[test]
fn criterion_03_type_a_strategyproofness() {
    let mut failures = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    let mut audited = 0;
    for seed in 0..200u64 {
        let inst = instance(20_000 + seed, 1 + (seed % 8) as usize, UserType::A);
        for id in inst.users.ids() {
            let e = best_response_a(&inst, id, &GridSpec::default()).unwrap();
            assert_eq!(e.points.len(), 202);
            audited += 1;
            worst = worst.max(e.max_gain);
            if e.max_gain > 1e-9 {
                failures.push(format!(
                    "seed {seed} user {id}: gain {:e} announcing {} (truth {})",
                    e.max_gain, e.argmax_announced, e.true_value
                ));
            }
        }
    }
    report(
        3,
        "no profitable deadline deviation",
        &failures,
        format!("{audited} users, worst gain {worst:e}"),
    );
}

fn random_order(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

#[test]
fn criterion_04_type_b_closed_form() {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_foc, mut worst_cost, mut worst_cd): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for k in 0..1000u64 {
        let inst = instance(40_000 + k, 1 + (k % 9) as usize, UserType::B);
        let (w, p) = type_b_data(&inst);
        let a = inst.alpha.value();
        let order = random_order(w.len(), &mut rng);
        let l = typeb::interval_lengths(&order, &w, &p, inst.alpha).unwrap();
        for r in 0..order.len() {
            let tail: f64 = order[r..].iter().map(|&j| p[j]).sum();
            let lhs = (a - 1.0) * w[order[r]].powf(a) * l[r].powf(-a);
            let res = (lhs - tail).abs() / tail;
            worst_foc = worst_foc.max(res);
            if res > 1e-9 {
                failures.push(format!("instance {k} rank {r}: FOC residual {res:e}"));
            }
        }
        let closed = typeb::social_cost(&order, &w, &p, inst.alpha).unwrap();
        let direct = typeb::direct_cost(&order, &w, &p, &l, inst.alpha);
        let diff = rel_diff(closed, direct);
        worst_cost = worst_cost.max(diff);
        if diff > 1e-9 {
            failures.push(format!("instance {k}: closed {closed} vs direct {direct}"));
        }
        if k < 100 {
            let numeric = typeb::coordinate_descent_lengths(&order, &w, &p, inst.alpha).unwrap();
            for (x, y) in numeric.iter().zip(&l) {
                let d = rel_diff(*x, *y);
                worst_cd = worst_cd.max(d);
                if d > 1e-6 {
                    failures.push(format!("instance {k}: descent {x} vs closed form {y}"));
                }
            }
        }
    }
    report(
        4,
        "type B first-order conditions and closed form",
        &failures,
        format!("FOC {worst_foc:e}, cost {worst_cost:e}, descent {worst_cd:e}"),
    );
}

fn all_orders(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in all_orders(n - 1) {
        for pos in 0..=rest.len() {
            let mut o = rest.clone();
            o.insert(pos, n - 1);
            out.push(o);
        }
    }
    out
}

#[test]
fn criterion_05_classical_reduction() {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for k in 0..200u64 {
        let inst = instance(50_000 + k, 1 + (k % 7) as usize, UserType::B);
        let (w, p) = type_b_data(&inst);
        let classical = typeb::to_classical(&w, &p, inst.alpha);
        let factor = typeb::scaling_factor(inst.alpha);
        for order in all_orders(w.len()) {
            let reversed = typeb::ClassicalInstance::to_speed_order(&order);
            let lhs = classical.cost(&order) * factor;
            let rhs = typeb::social_cost(&reversed, &w, &p, inst.alpha).unwrap();
            let d = rel_diff(lhs, rhs);
            worst = worst.max(d);
            checked += 1;
            if d > 1e-9 {
                failures.push(format!("instance {k} order {order:?}: {lhs} vs {rhs}"));
            }
        }
        let (c_best, _) = classical.brute_force().unwrap();
        let (s_best, s_cost) = typeb::brute_force_order(&w, &p, inst.alpha).unwrap();
        let reversed = typeb::ClassicalInstance::to_speed_order(&c_best);
        if reversed != s_best {
            let rc = typeb::social_cost(&reversed, &w, &p, inst.alpha).unwrap();
            if rel_diff(rc, s_cost) > 1e-9 {
                failures.push(format!(
                    "instance {k}: argmin {c_best:?} does not reverse to {s_best:?}"
                ));
            }
        }
    }
    report(
        5,
        "classical reduction under order reversal",
        &failures,
        format!("{checked} orders, worst gap {worst:e}"),
    );
}

#[test]
fn criterion_06_smith_bound() {
    let mut failures = Vec::new();
    let mut worst: f64 = 1.0;
    for k in 0..500u64 {
        let inst = instance(60_000 + k, 1 + (k % 9) as usize, UserType::B);
        let (w, p) = type_b_data(&inst);
        let smith = typeb::smith_order(&w, &p);
        let sc = typeb::social_cost(&smith, &w, &p, inst.alpha).unwrap();
        let (_, best) = typeb::brute_force_order(&w, &p, inst.alpha).unwrap();
        let ratio = sc / best;
        worst = worst.max(ratio);
        if ratio > 1.3661 {
            failures.push(format!("instance {k}: ratio {ratio}"));
        }
        if ratio < 1.0 - 1e-12 {
            failures.push(format!("instance {k}: Smith beats brute force ({ratio})"));
        }
    }
    report(
        6,
        "Smith's rule within (sqrt 3 + 1)/2",
        &failures,
        format!("500 instances, worst ratio {worst:.6}"),
    );
}

#[test]
fn criterion_07_mechanism_x_strategyproofness() {
    let mut failures = Vec::new();
    let (mut worst_d, mut worst_gain, mut worst_second) =
        (0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut users = 0;
    for k in 0..200u64 {
        let inst = instance(70_000 + k, 1 + (k % 6) as usize, UserType::B);
        for id in inst.users.ids() {
            users += 1;
            let f = foc_check_b(&inst, id, None).unwrap();
            let p = inst.users.true_values()[inst.position(id).unwrap()];
            worst_d = worst_d.max(f.derivative.abs() / p);
            worst_second = worst_second.max(f.second_difference);
            if f.derivative.abs() > 1e-4 * p {
                failures.push(format!(
                    "instance {k} user {id}: derivative {:e}",
                    f.derivative
                ));
            }
            if f.second_difference > 0.0 {
                failures.push(format!(
                    "instance {k} user {id}: second difference {:e}",
                    f.second_difference
                ));
            }
            let e =
                best_response_b(&inst, id, &GridSpec::around_truth(0.2), AuditMode::Fixed).unwrap();
            worst_gain = worst_gain.max(e.max_gain);
            if e.max_gain > 1e-7 {
                failures.push(format!(
                    "instance {k} user {id}: grid gain {:e}",
                    e.max_gain
                ));
            }
        }
    }
    report(
        7,
        "mechanism X truthful at fixed order",
        &failures,
        format!("{users} users, |dW|/p {worst_d:e}, max second diff {worst_second:e}, max gain {worst_gain:e}"),
    );
}

#[test]
fn criterion_08_mechanism_x_identities() {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for k in 0..1000u64 {
        let inst = instance(80_000 + k, 1 + (k % 9) as usize, UserType::B);
        let (w, p) = type_b_data(&inst);
        let order = random_order(w.len(), &mut rng);
        let direct = mechanism_x_direct(&order, &w, &p, inst.alpha).unwrap();
        let equiv = mechanism_x_equivalent(&order, &w, &p, inst.alpha).unwrap();
        for (x, y) in direct.iter().zip(&equiv) {
            let d = rel_diff(*x, *y);
            worst = worst.max(d);
            if d > 1e-9 {
                failures.push(format!("instance {k}: forms differ {x} vs {y}"));
            }
        }
    }
    let mut worst_single: f64 = 0.0;
    for k in 0..300u64 {
        let inst = instance(85_000 + k, 1, UserType::B);
        let out = outcome(&inst, &[], Mechanism::X).unwrap();
        let d = rel_diff(out.total_share, out.energy);
        worst_single = worst_single.max(d);
        if d > 1e-12 {
            failures.push(format!(
                "single user {k}: share {} vs energy {}",
                out.total_share, out.energy
            ));
        }
    }
    report(
        8,
        "mechanism X dual forms and single-user balance",
        &failures,
        format!("dual gap {worst:e}, single-user gap {worst_single:e}"),
    );
}

#[test]
fn criterion_09_worked_example() {
    let alpha = Alpha::new(2.0).unwrap();
    let (w, p) = ([1.0, 2.0], [3.0, 1.0]);
    let mut failures = Vec::new();
    let mut check = |what: &str, got: f64, want: f64| {
        if (got - want).abs() > 1e-9 * want.abs().max(1.0) {
            failures.push(format!("{what}: got {got}, want {want}"));
        }
    };
    let inst = Instance::type_b(
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
    .unwrap();
    let out = outcome(&inst, &[], Mechanism::X).unwrap();
    let sched = out.schedule.as_ref().unwrap();
    check("l1", sched.lengths[0], 0.5);
    check("l2", sched.lengths[1], 2.0);
    check("t1", sched.completion[0], 0.5);
    check("t2", sched.completion[1], 2.5);
    check("energy", sched.energy, 4.0);
    check(
        "social cost",
        typeb::social_cost(&sched.order, &w, &p, alpha).unwrap(),
        8.0,
    );
    check("share 1", out.users[0].share, 2.5);
    check("share 2", out.users[1].share, 5.5);
    check("bb ratio", out.bb_ratio.unwrap(), 2.0);
    check(
        "bb ratio (direct)",
        budget_balance_ratio(&[out.users[0].share, out.users[1].share], sched.energy)
            .unwrap()
            .ratio,
        2.0,
    );
    report(
        9,
        "worked two-job example",
        &failures,
        "l, t, E, cost, shares, bb_ratio".into(),
    );
}

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_speedscale")
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Runs one subcommand into a scratch directory and compares both outputs
/// with the golden copies. `UPDATE_GOLDEN=1` rewrites the goldens instead.
fn golden_case(args: &[&str], input: &str, base: &str, golden: &str) -> Vec<String> {
    let dir = tempfile::tempdir().unwrap();
    let mut cmd = Command::new(binary());
    cmd.arg("--out-dir")
        .arg(dir.path())
        .args(args)
        .arg(fixtures().join(input));
    let status = cmd.output().unwrap().status;
    let mut failures = Vec::new();
    if status.code() != Some(0) {
        failures.push(format!("{args:?}: exit {:?}", status.code()));
    }
    for ext in ["json", "csv"] {
        let name = format!("{base}.{ext}");
        let produced = std::fs::read_to_string(dir.path().join(&name)).unwrap_or_default();
        let golden_path = golden_dir().join(format!("{golden}.{ext}"));
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::write(&golden_path, &produced).unwrap();
            continue;
        }
        let golden = std::fs::read_to_string(&golden_path).unwrap_or_default();
        if produced.is_empty() || produced != golden {
            failures.push(format!(
                "{args:?}: {name} differs from {}",
                golden_path.display()
            ));
        }
    }
    failures
}

#[test]
fn criterion_10_cli() {
    let mut failures = Vec::new();
    let cases: &[(&[&str], &str, &str, &str)] = &[
        (&["solve-a"], "3job.json", "3job.solve-a", "3job.solve-a"),
        (
            &["solve-b"],
            "twojob.json",
            "twojob.solve-b",
            "twojob.solve-b",
        ),
        (
            &["shares", "--mechanism", "proportional"],
            "3job.json",
            "3job.shares",
            "3job.shares",
        ),
        (
            &["shares", "--mechanism", "x"],
            "twojob.json",
            "twojob.shares",
            "twojob.shares",
        ),
        (&["audit-a"], "3job.json", "3job.audit-a", "3job.audit-a"),
        (
            &["audit-b", "--mode", "fixed"],
            "twojob.json",
            "twojob.audit-b",
            "twojob.audit-b-fixed",
        ),
        (
            &["audit-b", "--mode", "reorder"],
            "twojob.json",
            "twojob.audit-b",
            "twojob.audit-b-reorder",
        ),
        (&["oracle-a"], "3job.json", "3job.oracle-a", "3job.oracle-a"),
        (
            &["oracle-b"],
            "twojob.json",
            "twojob.oracle-b",
            "twojob.oracle-b",
        ),
        (&["report"], "3job.json", "3job.report", "3job.report"),
        (&["report"], "twojob.json", "twojob.report", "twojob.report"),
    ];
    for (args, input, base, golden) in cases {
        failures.extend(golden_case(args, input, base, golden));
    }

    // generation: byte-identical per seed, matching the golden, and
    // parse(emit(x)) == x for the generated instances
    let golden_gen = golden_dir().join("gen-seed42-n5-B.json");
    let run_gen = || {
        Command::new(binary())
            .args(["gen", "--seed", "42", "--n", "5", "--type", "B"])
            .output()
            .unwrap()
            .stdout
    };
    let (first, second) = (run_gen(), run_gen());
    if first != second {
        failures.push("gen is not deterministic".into());
    }
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden_gen, &first).unwrap();
    } else if std::fs::read(&golden_gen).unwrap_or_default() != first {
        failures.push("gen output differs from golden".into());
    }
    for seed in 0..50u64 {
        for t in [UserType::A, UserType::B] {
            let loaded = parse_instance_str(
                &generate_instance(seed, 1 + (seed % 7) as usize, t, 2.5)
                    .unwrap()
                    .to_json(),
            )
            .unwrap();
            let again = parse_instance_str(&emit_instance(&loaded.instance, &loaded.announcements))
                .unwrap();
            if again != loaded {
                failures.push(format!("round trip failed for seed {seed} type {t}"));
            }
        }
    }
    report(
        10,
        "CLI goldens, round trip, deterministic generation",
        &failures,
        format!("{} golden cases", cases.len()),
    );
}
