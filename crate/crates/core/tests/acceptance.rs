//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line.
//!
//! The scenario-ordering run (criteria 4 and 5) trains 2e5 episodes on ten
//! seeds and takes over an hour on one core, so it is ignored by default:
//!
//! ```text
//! cargo test --release -p mmwave-ho --test acceptance -- --ignored --nocapture
//! ```

use std::process::Command;
use std::time::Instant;

use mmwave_ho::harness::checks;
use mmwave_ho::harness::experiment::{evaluate_threshold, run_experiment, tune_threshold, PolicySummary};
use mmwave_ho::harness::{PolicyKind, SimConfig, World};
use mmwave_ho::rng::stream;
use mmwave_ho::skeleton::{find_volunteer, golden_section_max, PathSkeleton, SkeletonDatabase};

fn report(n: u32, passed: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if passed { "PASS" } else { "FAIL" });
    assert!(passed, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_1_handover_example() {
    let t = Instant::now();
    let c = checks::handover_example();
    let secs = t.elapsed().as_secs_f64();
    report(1, c.passed && secs < 1.0, format!("{} ({secs:.3} s)", c.detail));
}

#[test]
fn criterion_2_beam_search_equivalence() {
    let t = Instant::now();
    let gap = checks::beam_search_gap(1000, 2024).unwrap();
    let secs = t.elapsed().as_secs_f64();
    report(2, gap < 1e-10 && secs < 60.0, format!("worst relative gap {gap:.2e} over 1000 channels ({secs:.1} s)"));
}

#[test]
fn criterion_3_q_learning_matches_value_iteration() {
    let t = Instant::now();
    // 1000 episodes of 100 steps: 1e5 steps.
    let err = checks::q_learning_error(1000, 100, 5).unwrap();
    let secs = t.elapsed().as_secs_f64();
    report(3, err < 1e-3 && secs < 30.0, format!("sup error {err:.2e} after 1e5 steps ({secs:.1} s)"));
}

fn summary(s: &[PolicySummary], p: PolicyKind) -> &PolicySummary {
    s.iter().find(|x| x.policy == p).expect("policy evaluated")
}

#[test]
#[ignore = "trains ten seeds at full scale; run with --ignored"]
fn criteria_4_and_5_scenario_ordering() {
    let t = Instant::now();
    let mut ordered = 0;
    let mut within = 0;
    let mut ho_ok = 0;
    let mut fluct_ok = 0;
    let mut ho_ucb_ok = 0;
    let mut ho_mc_ok = 0;
    let seeds = 1..=10u64;
    for seed in seeds.clone() {
        let mut cfg = SimConfig::default();
        cfg.experiment.seed = seed;
        cfg.learning.episodes = 200_000;
        cfg.experiment.replications = 500;
        let out = run_experiment(&cfg).unwrap();
        let s = &out.summaries;
        let (ours, ed, mc, ucb) = (
            summary(s, PolicyKind::Ours),
            summary(s, PolicyKind::OursEd),
            summary(s, PolicyKind::MultiConnectivity),
            summary(s, PolicyKind::SmartUcb),
        );
        let r = |x: &PolicySummary| x.mean_r_traj;
        let ord = r(ucb) <= r(ed) && r(ed) <= r(ours) && r(ours) <= r(mc);
        let gap = (r(mc) - r(ours)) / r(mc);
        ordered += ord as u32;
        within += (gap <= 0.05) as u32;
        let lt_ucb = ours.median_handovers < ucb.median_handovers;
        let lt_mc = ours.median_handovers < mc.median_handovers;
        ho_ucb_ok += lt_ucb as u32;
        ho_mc_ok += lt_mc as u32;
        ho_ok += (lt_ucb && lt_mc) as u32;
        fluct_ok += (ours.rate_fluctuation < ucb.rate_fluctuation) as u32;
        println!(
            "seed {seed}: T_D {:.3}  R_traj Gbps ucb {:.3} ed {:.3} ours {:.3} mc {:.3}  gap {:.1}%  \
             median HO ours {} ucb {} mc {}  fluctuation Gbps ours {:.3} ucb {:.3}",
            out.t_d,
            r(ucb) * 1e-9,
            r(ed) * 1e-9,
            r(ours) * 1e-9,
            r(mc) * 1e-9,
            100.0 * gap,
            ours.median_handovers,
            ucb.median_handovers,
            mc.median_handovers,
            ours.rate_fluctuation * 1e-9,
            ucb.rate_fluctuation * 1e-9,
        );
    }
    let n = seeds.count() as u32;
    let mins = t.elapsed().as_secs_f64() / 60.0;
    let c4 = ordered >= 8 && within >= 8 && mins <= 120.0;
    let c5 = ho_ok == n && fluct_ok == n;
    println!(
        "criterion 4: {} ordering held in {ordered}/{n} seeds, ours within 5% of multi-connectivity in {within}/{n} ({mins:.1} min)",
        if c4 { "PASS" } else { "FAIL" }
    );
    println!(
        "criterion 5: {} median handovers below SMART-UCB in {ho_ucb_ok}/{n} and below multi-connectivity in {ho_mc_ok}/{n}, \
         fluctuation below SMART-UCB in {fluct_ok}/{n}",
        if c5 { "PASS" } else { "FAIL" }
    );
    assert!(c4 && c5, "criteria 4/5 failed");
}

#[test]
fn criterion_6_threshold_optimizer() {
    let t = Instant::now();
    let cfg = SimConfig::default();
    let world = World::build(&cfg).unwrap();
    let tuned = tune_threshold(&world, &cfg).unwrap();
    // Independent re-evaluation of the returned threshold on the same set.
    let check = evaluate_threshold(&world, &cfg, tuned.t_d).unwrap();
    let (x, _, _) = golden_section_max(0.0, 10.0, 1e-6, |x| Ok(-(x - 3.0) * (x - 3.0))).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let ok = check.exceed_prob <= cfg.skeleton.budget.delta && (x - 3.0).abs() <= 1e-4 && secs < 600.0;
    report(
        6,
        ok,
        format!("T_D* = {:.4}, Pr{{U > 10}} = {:.3}, surrogate maximizer {x:.6} ({secs:.1} s)", tuned.t_d, check.exceed_prob),
    );
}

#[test]
fn criterion_7_formulas() {
    let t = Instant::now();
    let c = checks::run_all().into_iter().find(|c| c.name == "formulas").unwrap();
    let secs = t.elapsed().as_secs_f64();
    report(7, c.passed && secs < 1.0, format!("{} ({secs:.3} s)", c.detail));
}

#[test]
fn criterion_8_database_protocol() {
    let t = Instant::now();
    let mut db = SkeletonDatabase::new(5.0, 2).unwrap();
    db.query(3, || Some(PathSkeleton::default())).unwrap();
    db.tick();
    db.tick();
    let before = db.in_watch(3);
    db.tick();
    let migrated = !before && db.in_watch(3);

    let trials = 100_000;
    let (p, u, t_aging) = (0.5, 1, 2);
    let mut rng = stream(8, &[0xacc]);
    let zeros = (0..trials).filter(|_| find_volunteer(p, u, t_aging, &mut rng).is_none()).count();
    let expected = (1.0f64 - p).powi((u * t_aging) as i32);
    let freq = zeros as f64 / trials as f64;
    let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
    let secs = t.elapsed().as_secs_f64();
    let ok = migrated && (freq - expected).abs() <= 3.0 * sigma && secs < 30.0;
    report(8, ok, format!("migration {migrated}, zero-acceptance {freq:.4} vs {expected} ± {:.4} ({secs:.2} s)", 3.0 * sigma));
}

#[test]
fn criterion_9_determinism() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    // Short training keeps every policy in the file under the time limit.
    let mut cfg = SimConfig::default();
    cfg.learning.episodes = 5_000;
    cfg.experiment.replications = 100;
    let config = dir.path().join("scenario.toml");
    std::fs::write(&config, cfg.to_toml_string()).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_mmwave-ho"))
            .args(["evaluate", "--seed", "7", "--config"])
            .arg(&config)
            .arg("-o")
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    let secs = t.elapsed().as_secs_f64();
    report(9, a == b && !a.is_empty() && secs < 300.0, format!("{} bytes, identical {} ({secs:.1} s)", a.len(), a == b));
}
