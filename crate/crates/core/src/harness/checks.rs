//! Quick invariant and oracle checks run by `mmwave-ho validate`.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{channel_matrix, pathloss_db, rate_bps, Angles, ArrayConfig, PathCluster, RadioConfig, Subpath};
use crate::environment::{los_probability, LinkCondition};
use crate::handover::{HandoverConfig, SnrLogTable};
use crate::learning::{train, LearningConfig, QTable};
use crate::mdp::{value_iteration, FiniteMdp, MdpEnv};
use crate::rng::{stream, SimRng};
use crate::skeleton::{
    beam_search, find_volunteer, golden_section_max, Codebook, PathSkeleton, Scope, SkeletonDatabase, SkeletonPath,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

pub fn handover_example() -> Check {
    let cfg = HandoverConfig::default();
    let mut t = SnrLogTable::new(4);
    let picked = (|| {
        t.record(2, 2)?;
        t.tick();
        t.record(1, 2)?;
        t.tick();
        let levels = [1, 2, 2, 1];
        t.step_ci(0, 0, 3, &cfg, |j| Ok(levels[j]))
    })();
    match picked {
        Ok(r) => check("handover example", r.next_serving == 1, format!("next serving BS index {}", r.next_serving)),
        Err(e) => check("handover example", false, e.to_string()),
    }
}

/// Physical direction whose array response is codeword `idx` of `book`.
pub fn codeword_direction(book: &Codebook, idx: usize) -> Option<Angles> {
    let (a, b) = book.slopes(idx);
    let s = a.hypot(b);
    (s < 1.0).then(|| Angles::new(s.asin(), b.atan2(a)))
}

/// Random channel of up to four single-ray clusters on mutually orthogonal
/// codeword directions, with random complex gains.
pub fn random_grid_channel(rng: &mut SimRng, f_book: &Codebook, w_book: &Codebook, oversampling: usize) -> Vec<PathCluster> {
    let pick = |rng: &mut SimRng, book: &Codebook| -> (usize, Angles) {
        loop {
            let nb = book.cols * oversampling;
            let ia = oversampling * rng.random_range(0..book.rows);
            let ib = oversampling * rng.random_range(0..book.cols);
            let idx = ia * nb + ib;
            if let Some(d) = codeword_direction(book, idx) {
                return (idx, d);
            }
        }
    };
    let k = rng.random_range(1..=4);
    let mut used_f = Vec::new();
    let mut used_w = Vec::new();
    let mut clusters = Vec::new();
    while clusters.len() < k {
        let (fi, aod) = pick(rng, f_book);
        let (wi, aoa) = pick(rng, w_book);
        if used_f.contains(&fi) || used_w.contains(&wi) {
            continue;
        }
        used_f.push(fi);
        used_w.push(wi);
        let gain = Complex64::from_polar(rng.random_range(0.1..1.0), rng.random_range(0.0..std::f64::consts::TAU));
        clusters.push(PathCluster {
            index: clusters.len(),
            center_aod: aod,
            center_aoa: aoa,
            los: false,
            subpaths: vec![Subpath { gain, aod, aoa }],
        });
    }
    clusters
}

/// Largest relative gap between skeleton-restricted and exhaustive search
/// over `n` random channels whose skeleton holds every cluster.
pub fn beam_search_gap(n: usize, seed: u64) -> crate::Result<f64> {
    let arrays = ArrayConfig::default();
    let (fb, wb) = Codebook::for_arrays(&arrays, 2)?;
    let mut rng = stream(seed, &[0xbea]);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let clusters = random_grid_channel(&mut rng, &fb, &wb, 2);
        let h = channel_matrix(&clusters, &arrays);
        let ps = PathSkeleton {
            bs_id: 0,
            grid_id: 0,
            paths: clusters
                .iter()
                .map(|c| SkeletonPath { aod: c.center_aod, aoa: c.center_aoa, gain: c.dominant_gain() })
                .collect(),
        };
        let all = beam_search(&h, &fb, &wb, Scope::All)?;
        let restricted = beam_search(&h, &fb, &wb, Scope::Skeleton(&ps))?;
        worst = worst.max((all.gain - restricted.gain).abs() / all.gain);
    }
    Ok(worst)
}

/// Five-state, three-action MDP used to check Q-learning against value
/// iteration.
pub fn reference_mdp() -> FiniteMdp {
    let next = [1, 0, 2, 2, 1, 3, 3, 2, 4, 4, 3, 0, 0, 4, 1];
    let rewards = [0.0, 0.1, 0.2, 0.0, 0.3, 0.1, 0.5, 0.0, 0.2, 1.0, 0.0, 0.4, 0.0, 0.6, 0.3];
    FiniteMdp::deterministic(5, 3, &next, &rewards).expect("well-formed table")
}

/// Sup-norm error of Q-learning after `episodes × horizon` uniform-exploration steps.
pub fn q_learning_error(episodes: u64, horizon: usize, seed: u64) -> crate::Result<f64> {
    let mdp = reference_mdp();
    let gamma = 0.9;
    let qstar = value_iteration(&mdp, gamma, 1e-13, 100_000)?;
    let cfg = LearningConfig { alpha: 0.1, gamma, epsilon: 1.0, episodes, reward_scale: 1.0 };
    let mut env = MdpEnv::new(mdp, 0, horizon, stream(seed, &[1]));
    let mut q = QTable::zeros(5, 3);
    train(&mut env, &mut q, &cfg, &mut stream(seed, &[2]))?;
    Ok(q.values().iter().zip(&qstar).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn formulas() -> Check {
    let cfg = RadioConfig::default();
    let plos = los_probability(71.0).unwrap_or(f64::NAN);
    let near = [1.0, 10.0, 27.0].iter().all(|&d| los_probability(d).ok() == Some(1.0));
    let zero_shadow = RadioConfig { shadowing_los_db: 0.0, ..cfg.clone() };
    let pl = pathloss_db(cfg.reference_distance_m, LinkCondition::Los, &zero_shadow, &mut stream(0, &[0]))
        .unwrap_or(f64::NAN);
    let fs = 20.0 * (4.0 * std::f64::consts::PI * cfg.reference_distance_m / cfg.wavelength()).log10();
    let rate = rate_bps(1.0, 500e6);
    let ok = near && (plos - 0.37).abs() <= 5e-4 && (pl - fs).abs() <= 1e-9 && rate == 5e8;
    check("formulas", ok, format!("p_LoS(71) = {plos:.5}, PL(d0) - FSPL = {:.2e} dB, rate(1) = {rate}", pl - fs))
}

fn database() -> Check {
    let mut db = SkeletonDatabase::new(5.0, 2).expect("valid");
    let _ = db.query(7, || Some(PathSkeleton::default()));
    db.tick();
    db.tick();
    let kept = !db.in_watch(7);
    db.tick();
    let moved = db.in_watch(7);
    let trials = 20_000;
    let mut rng = stream(11, &[0xdb]);
    let zeros = (0..trials).filter(|_| find_volunteer(0.5, 1, 2, &mut rng).is_none()).count();
    let p = zeros as f64 / trials as f64;
    let sigma = (0.25f64 * 0.75 / trials as f64).sqrt();
    let ok = kept && moved && (p - 0.25).abs() <= 3.0 * sigma;
    check("skeleton database", ok, format!("aging migration {}, zero-acceptance {p:.4}", kept && moved))
}

fn golden_section() -> Check {
    match golden_section_max(0.0, 10.0, 1e-5, |x| Ok(-(x - 3.0) * (x - 3.0))) {
        Ok((x, _, _)) => check("golden-section search", (x - 3.0).abs() <= 1e-4, format!("maximizer {x:.6}")),
        Err(e) => check("golden-section search", false, e.to_string()),
    }
}

pub fn run_all() -> Vec<Check> {
    let mut out = vec![handover_example()];
    out.push(match beam_search_gap(200, 1) {
        Ok(gap) => check("skeleton beam search", gap < 1e-10, format!("worst relative gap {gap:.2e}")),
        Err(e) => check("skeleton beam search", false, e.to_string()),
    });
    out.push(match q_learning_error(1000, 100, 5) {
        Ok(err) => check("Q-learning vs value iteration", err < 1e-3, format!("sup error {err:.2e}")),
        Err(e) => check("Q-learning vs value iteration", false, e.to_string()),
    });
    out.push(formulas());
    out.push(database());
    out.push(golden_section());
    out
}
