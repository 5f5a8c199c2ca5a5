//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_UNATTAINABLE` are still run and reported; their
//! failure does not fail the process unless `ACCEPTANCE_STRICT=1` is set.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::thread;
use std::time::Instant;

use bridgesim::runner::run_to_dir;
use bridgesim_core::bridge::{fit_bridging, FitConfig, Rating, RatingLevel};
use bridgesim_core::curation::{match_note, MatchDecision, MatchThresholds};
use bridgesim_core::harness::{run_scenario, ScenarioConfig, ScenarioOutput};
use bridgesim_core::ids::{NoteId, NoteOrigin, PostId, RaterId, WriterId};
use bridgesim_core::population::CapacityDist;
use bridgesim_core::rlcf::{
    expected_intercept, rlcf_update_with, PolicyUpdateConfig, RaterArchetype, RewardModel,
};
use bridgesim_core::writers::{NoteVector, Post, WriterPolicy};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const KNOWN_UNATTAINABLE: &[u32] = &[2];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------------------
// Independent helpers (deliberately not the core crate's implementations).

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|a, b| xs[*a].partial_cmp(&xs[*b]).unwrap());
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = r;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx * syy).sqrt()
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// One observed cell of a rating grid: (rater index, note index, value).
type Cell = (usize, usize, f64);

struct Optimum {
    loss: f64,
    note_intercepts: Vec<f64>,
}

/// Full-batch gradient descent (diagonally scaled) on
/// `sum (r - mu - i_u - i_n - f_u f_n)^2 + li (sum i_u^2 + sum i_n^2) + lf (sum f_u^2 + sum f_n^2)`
/// with d = 1, run until the gradient vanishes.
fn gd_oracle(cells: &[Cell], nu: usize, nn: usize, li: f64, lf: f64, seed: u64) -> Optimum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mu = cells.iter().map(|c| c.2).sum::<f64>() / cells.len() as f64;
    let mut iu: Vec<f64> = (0..nu).map(|_| rng.random_range(-0.1..0.1)).collect();
    let mut inn: Vec<f64> = (0..nn).map(|_| rng.random_range(-0.1..0.1)).collect();
    let mut fu: Vec<f64> = (0..nu).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mut fnn: Vec<f64> = (0..nn).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mut cu = vec![0.0; nu];
    let mut cn = vec![0.0; nn];
    for &(u, n, _) in cells {
        cu[u] += 1.0;
        cn[n] += 1.0;
    }
    let total = cells.len() as f64;
    for _ in 0..500_000 {
        let mut gmu = 0.0;
        let mut giu = vec![0.0; nu];
        let mut gin = vec![0.0; nn];
        let mut gfu = vec![0.0; nu];
        let mut gfn = vec![0.0; nn];
        for &(u, n, v) in cells {
            let e = v - mu - iu[u] - inn[n] - fu[u] * fnn[n];
            gmu -= 2.0 * e;
            giu[u] -= 2.0 * e;
            gin[n] -= 2.0 * e;
            gfu[u] -= 2.0 * e * fnn[n];
            gfn[n] -= 2.0 * e * fu[u];
        }
        let mut norm2 = gmu * gmu;
        for u in 0..nu {
            giu[u] += 2.0 * li * iu[u];
            gfu[u] += 2.0 * lf * fu[u];
            norm2 += giu[u] * giu[u] + gfu[u] * gfu[u];
        }
        for n in 0..nn {
            gin[n] += 2.0 * li * inn[n];
            gfn[n] += 2.0 * lf * fnn[n];
            norm2 += gin[n] * gin[n] + gfn[n] * gfn[n];
        }
        if norm2 < 1e-24 {
            break;
        }
        let s = 0.1;
        mu -= s * gmu / (2.0 * total);
        for u in 0..nu {
            iu[u] -= s * giu[u] / (2.0 * (cu[u] + li));
            fu[u] -= s * gfu[u] / (2.0 * (cu[u] + lf));
        }
        for n in 0..nn {
            inn[n] -= s * gin[n] / (2.0 * (cn[n] + li));
            fnn[n] -= s * gfn[n] / (2.0 * (cn[n] + lf));
        }
    }
    let mut loss = 0.0;
    for &(u, n, v) in cells {
        let e = v - mu - iu[u] - inn[n] - fu[u] * fnn[n];
        loss += e * e;
    }
    loss += li * (iu.iter().map(|x| x * x).sum::<f64>() + inn.iter().map(|x| x * x).sum::<f64>());
    loss += lf * (fu.iter().map(|x| x * x).sum::<f64>() + fnn.iter().map(|x| x * x).sum::<f64>());
    Optimum {
        loss,
        note_intercepts: inn,
    }
}

fn best_of_restarts(cells: &[Cell], nu: usize, nn: usize, li: f64, lf: f64, restarts: u64) -> Optimum {
    (0..restarts)
        .map(|s| gd_oracle(cells, nu, nn, li, lf, 1000 + s))
        .min_by(|a, b| a.loss.partial_cmp(&b.loss).unwrap())
        .unwrap()
}

fn level_of(v: f64) -> RatingLevel {
    if v == 1.0 {
        RatingLevel::Helpful
    } else if v == 0.5 {
        RatingLevel::SomewhatHelpful
    } else {
        RatingLevel::NotHelpful
    }
}

fn quantize(x: f64) -> f64 {
    if x >= 0.75 {
        1.0
    } else if x >= 0.25 {
        0.5
    } else {
        0.0
    }
}

fn to_ratings(cells: &[Cell]) -> Vec<Rating> {
    cells
        .iter()
        .map(|&(u, n, v)| Rating::new(RaterId(u as u64), NoteId(n as u64), level_of(v), 0))
        .collect()
}

fn fitted_note_intercepts(cells: &[Cell], nn: usize, config: &FitConfig) -> Vec<f64> {
    let model = fit_bridging(&to_ratings(cells), config).expect("fit");
    (0..nn).map(|n| model.notes[&NoteId(n as u64)].intercept).collect()
}

/// Runs `f(seed)` for every seed on its own thread, returning results in
/// seed order.
fn par_seeds<T: Send, F: Fn(u64) -> T + Sync>(seeds: std::ops::Range<u64>, f: F) -> Vec<T> {
    thread::scope(|s| {
        let f = &f;
        let handles: Vec<_> = seeds.map(|seed| s.spawn(move || f(seed))).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

/// Per-round, per-rater rating counts never exceed capacity and no rater
/// rates a note twice.
fn capacity_respected(out: &ScenarioOutput) -> bool {
    let caps: BTreeMap<RaterId, u32> = out
        .population
        .iter()
        .map(|r| (r.rater_id, r.capacity_per_round))
        .collect();
    let mut per_round: BTreeMap<(u32, RaterId), u32> = BTreeMap::new();
    let mut pairs = BTreeSet::new();
    for r in &out.ratings {
        *per_round.entry((r.round, r.rater_id)).or_default() += 1;
        if !pairs.insert((r.rater_id, r.note_id)) {
            return false;
        }
    }
    per_round.iter().all(|((_, rater), n)| caps.get(rater).is_some_and(|c| n <= c))
}

// ---------------------------------------------------------------------------

fn criterion_1() -> Outcome {
    let config = FitConfig::default();
    let mut worst_rho = f64::INFINITY;
    let mut worst_gap = 0.0f64;
    for grid in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + grid);
        let nu = rng.random_range(10..=30);
        let nn = rng.random_range(5..=10);
        let t_in: Vec<f64> = (0..nn).map(|_| rng.random_range(-0.3..0.3)).collect();
        let t_fn: Vec<f64> = (0..nn).map(|_| rng.random_range(-0.5..0.5)).collect();
        let t_fu: Vec<f64> = (0..nu)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 } * rng.random_range(0.5..1.0))
            .collect();
        let mut cells = Vec::new();
        for u in 0..nu {
            for n in 0..nn {
                let x = 0.5 + t_in[n] + t_fu[u] * t_fn[n] + rng.random_range(-0.2..0.2);
                cells.push((u, n, quantize(x)));
            }
        }
        let oracle = best_of_restarts(&cells, nu, nn, config.l2_intercept, config.l2_factor, 5);
        let fitted = fitted_note_intercepts(&cells, nn, &FitConfig { seed: grid, ..config.clone() });
        worst_rho = worst_rho.min(spearman(&fitted, &oracle.note_intercepts));
        for (a, b) in fitted.iter().zip(&oracle.note_intercepts) {
            worst_gap = worst_gap.max((a - b).abs());
        }
    }
    outcome(
        worst_rho >= 0.99 && worst_gap <= 0.02,
        format!("min spearman {worst_rho:.4} (>= 0.99), max |di_n| {worst_gap:.4} (<= 0.02) over 10 grids"),
    )
}

fn criterion_2() -> Outcome {
    // Raters 0-2 form one faction, 3-5 the other. Note 0 (polarized) is
    // Helpful to the first faction and NotHelpful to the second; note 1
    // (consensus) is SomewhatHelpful to everyone.
    let mut cells = Vec::new();
    for u in 0..6 {
        cells.push((u, 0, if u < 3 { 1.0 } else { 0.0 }));
        cells.push((u, 1, 0.5));
    }
    let base = FitConfig::default();
    let diffs: Vec<f64> = (0..10)
        .map(|seed| {
            let i = fitted_note_intercepts(&cells, 2, &FitConfig { seed, ..base.clone() });
            i[1] - i[0]
        })
        .collect();
    let wins = diffs.iter().filter(|d| **d > 0.0).count();
    let oracle = best_of_restarts(&cells, 6, 2, base.l2_intercept, base.l2_factor, 10);
    let oracle_gap = oracle.note_intercepts[1] - oracle.note_intercepts[0];
    let max_abs = diffs.iter().map(|d| d.abs()).fold(0.0, f64::max);
    outcome(
        wins == 10,
        format!(
            "i_n(consensus) - i_n(polarized) > 0 in {wins}/10 seeds (need 10); max |gap| {max_abs:.1e}; \
             oracle gap {oracle_gap:.1e}: the instance is symmetric under swapping factions and \
             reflecting ratings, so the optimum ties the two notes"
        ),
    )
}

fn criterion_3() -> Outcome {
    let config = FitConfig {
        l2_intercept: 1e-4,
        l2_factor: 1e-4,
        ..FitConfig::default()
    };
    let rhos: Vec<f64> = (0..10u64)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(9000 + seed);
            let (nu, nn) = (50, 20);
            // Rater intercepts span one quantization half-step, which dithers
            // the three rating levels.
            let t_iu: Vec<f64> = (0..nu).map(|_| rng.random_range(-0.25..0.25)).collect();
            let t_in: Vec<f64> = (0..nn).map(|_| rng.random_range(-0.3..0.3)).collect();
            let t_fu: Vec<f64> = (0..nu).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t_fn: Vec<f64> = (0..nn).map(|_| rng.random_range(-0.3..0.3)).collect();
            let mut cells = Vec::new();
            for u in 0..nu {
                for n in 0..nn {
                    cells.push((u, n, quantize(0.5 + t_iu[u] + t_in[n] + t_fu[u] * t_fn[n])));
                }
            }
            let fitted = fitted_note_intercepts(&cells, nn, &FitConfig { seed, ..config.clone() });
            spearman(&fitted, &t_in)
        })
        .collect();
    let passing = rhos.iter().filter(|r| **r >= 0.9).count();
    let min = rhos.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        passing == 10,
        format!("spearman >= 0.9 in {passing}/10 seeds (need 10), min {min:.3}"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = rng.random_range(1..=2usize);
        let k = rng.random_range(d + 1..=6usize);
        let archetypes: Vec<RaterArchetype> = (0..k)
            .map(|a| RaterArchetype {
                archetype_id: a,
                centroid_intercept: rng.random_range(-0.3..0.3),
                centroid_factor: (0..d).map(|_| rng.random_range(-1.5..1.5)).collect(),
                member_count: rng.random_range(1..50),
            })
            .collect();
        let maps: Vec<[f64; 4]> = (0..k)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect();
        let mu = rng.random_range(0.2..0.8);
        let bias = rng.random_range(0.0..0.5);
        let rm = RewardModel::from_parts(mu, bias, archetypes.clone(), maps.clone());
        let note = NoteVector {
            note_id: NoteId(1),
            post_id: PostId(1),
            accuracy: rng.random_range(0.0..1.0),
            polish: rng.random_range(0.0..1.0),
            slant: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            style: vec![0.0; 2],
            claim: vec![1.0; 2],
            origin: NoteOrigin::FullyAI,
            adapted_from: None,
            writer_id: WriterId(0),
            round_created: 0,
        };
        let got = expected_intercept(&note, &rm).expect("enough archetypes");

        // Weighted normal equations X^T W X b = X^T W y, rows (1, f_u).
        let proxy = note.accuracy + bias * (note.polish - 0.5);
        let mut x = DMatrix::<f64>::zeros(k, 1 + d);
        let mut y = DVector::<f64>::zeros(k);
        let mut w = DMatrix::<f64>::zeros(k, k);
        for (a, (arch, m)) in archetypes.iter().zip(&maps).enumerate() {
            let norm = arch.centroid_factor.iter().map(|v| v * v).sum::<f64>().sqrt();
            let along: f64 = note
                .slant
                .iter()
                .zip(&arch.centroid_factor)
                .map(|(s, f)| s * f / norm)
                .sum();
            let predicted = m[0] * proxy + m[1] * note.polish + m[2] * along + m[3];
            x[(a, 0)] = 1.0;
            for j in 0..d {
                x[(a, 1 + j)] = arch.centroid_factor[j];
            }
            y[a] = predicted - mu - arch.centroid_intercept;
            w[(a, a)] = f64::from(arch.member_count);
        }
        let lhs = x.transpose() * &w * &x;
        let rhs = x.transpose() * &w * &y;
        let b = lhs.lu().solve(&rhs).expect("nonsingular panel");
        worst = worst.max((got - b[0]).abs());
    }
    outcome(worst <= 1e-9, format!("max |error| {worst:.2e} over 100 panels (<= 1e-9)"))
}

fn criterion_5() -> Outcome {
    let target = [0.7, 0.35];
    let config = PolicyUpdateConfig {
        population_size: 16,
        perturbation_sd: 0.05,
        step_size: 0.01,
        ..PolicyUpdateConfig::default()
    };
    let quadratic = |p: &WriterPolicy| {
        let a = p.params.accuracy_mean - target[0];
        let q = p.params.polish_mean - target[1];
        -(a * a + q * q)
    };
    let mut converged = 0;
    let mut worst = 0.0f64;
    let mut shift_exact = true;
    for seed in 0..10u64 {
        let mut policy = WriterPolicy::fully_ai(WriterId(0), 1, 2);
        policy.capability = None;
        policy.params.accuracy_mean = 0.2;
        policy.params.polish_mean = 0.9;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shifted_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shifted = policy.clone();
        for _ in 0..200 {
            policy = rlcf_update_with(&policy, &config, &mut rng, quadratic).unwrap();
            shifted = rlcf_update_with(&shifted, &config, &mut shifted_rng, |p| quadratic(p) + 1.0).unwrap();
            shift_exact &= shifted == policy;
        }
        let a = policy.params.accuracy_mean - target[0];
        let q = policy.params.polish_mean - target[1];
        let dist = (a * a + q * q).sqrt();
        worst = worst.max(dist);
        if dist < 0.05 {
            converged += 1;
        }
    }
    outcome(
        converged >= 9 && shift_exact,
        format!(
            "{converged}/10 seeds within 0.05 after 200 iterations (need 9), worst {worst:.4}; \
             shift invariance bit-exact: {shift_exact}"
        ),
    )
}

fn hacking_config(seed: u64, polish_bias: f64, assist: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.set_all_seeds(seed);
    let b = &mut cfg.population.behavior;
    b.accuracy_weight.mean = 1.0;
    b.polish_weight.mean = 1.0;
    cfg.population.assist_quality = assist;
    cfg.polish_bias = polish_bias;
    cfg
}

fn criterion_6() -> Outcome {
    let rows = par_seeds(0..10, |seed| {
        let last = |cfg: ScenarioConfig| {
            let out = run_scenario(&cfg, &[]).expect("scenario");
            assert!(capacity_respected(&out));
            out.records.last().cloned().unwrap()
        };
        (
            last(hacking_config(seed, 0.0, 0.0)),
            last(hacking_config(seed, 0.4, 0.0)),
            last(hacking_config(seed, 0.4, 1.0)),
        )
    });
    let mut hacked = 0;
    let mut diffs = Vec::new();
    for (control, treated, assisted) in &rows {
        let polish_beats_accuracy = match (treated.corr_polish_scored, treated.corr_accuracy_scored) {
            (Some(p), Some(a)) => p > a,
            _ => false,
        };
        let less_accurate = match (treated.mean_published_accuracy, control.mean_published_accuracy) {
            (Some(t), Some(c)) => t < c,
            _ => false,
        };
        if polish_beats_accuracy && less_accurate {
            hacked += 1;
        }
        if let (Some(a), Some(c)) = (assisted.mean_published_accuracy, control.mean_published_accuracy) {
            diffs.push(a - c);
        }
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    let se = sd / n.sqrt();
    let assist_within_noise = diffs.len() == 10 && mean.abs() <= 2.0 * se;
    outcome(
        hacked >= 8 && assist_within_noise,
        format!(
            "hacking reproduced in {hacked}/10 paired seeds (need 8); assisted minus control mean \
             accuracy {mean:+.4} (2 SE = {:.4})",
            2.0 * se
        ),
    )
}

fn criterion_7() -> Outcome {
    let rows = par_seeds(0..10, |seed| {
        let run = |lambda: f64| {
            let mut cfg = ScenarioConfig::default();
            cfg.set_all_seeds(seed);
            let ai = cfg.writers.iter().find(|w| w.kind == NoteOrigin::FullyAI).cloned().unwrap();
            cfg.writers = vec![ai];
            cfg.policy_update.novelty_weight = lambda;
            let out = run_scenario(&cfg, &[]).expect("scenario");
            assert!(capacity_respected(&out));
            out.records.last().unwrap().homogenization_index
        };
        (run(0.0), run(0.5))
    });
    let wins = rows.iter().filter(|(a, b)| a < b).count();
    let mean_gap = rows.iter().map(|(a, b)| b - a).sum::<f64>() / rows.len() as f64;
    outcome(
        wins >= 8,
        format!("index(lambda=0) < index(lambda=0.5) in {wins}/10 paired seeds (need 8), mean gap {mean_gap:+.3}"),
    )
}

fn criterion_8() -> Outcome {
    let dim = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let gauss = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.sample(StandardNormal)).collect() };
    let cosine = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    };
    let corpus: Vec<NoteVector> = (0..25u64)
        .map(|i| NoteVector {
            note_id: NoteId(i),
            post_id: PostId(i),
            accuracy: 0.9,
            polish: 0.5,
            slant: vec![0.0],
            style: vec![0.0; 2],
            claim: gauss(&mut rng),
            origin: NoteOrigin::Human,
            adapted_from: None,
            writer_id: WriterId(0),
            round_created: 0,
        })
        .collect();
    let mut posts = Vec::new();
    for i in 0..50u64 {
        let claim = if i < 25 {
            // Near-duplicate of corpus note i: noise scale drawn so cosine
            // spans [0.9, 1); rejected until the bound holds.
            let base = &corpus[i as usize].claim;
            loop {
                let scale = rng.random_range(0.0..0.45);
                let c: Vec<f64> = base.iter().map(|x| x + scale * rng.sample::<f64, _>(StandardNormal)).collect();
                if cosine(&c, base) >= 0.9 {
                    break c;
                }
            }
        } else {
            gauss(&mut rng)
        };
        posts.push(Post {
            post_id: PostId(100 + i),
            claim,
            reach: 1.0,
            mislead_likelihood: 0.5,
            flagged: false,
            round_created: 0,
        });
    }

    let sweeps = [(0.95, 0.80), (0.90, 0.85), (0.99, 0.70)];
    let mut worst = (1.0f64, 1.0f64);
    let mut argmax_agrees = true;
    for (reuse, adapt) in sweeps {
        let thresholds = MatchThresholds { reuse, adapt };
        let (mut tp, mut fp, mut fneg) = (0, 0, 0);
        for post in &posts {
            // Exhaustive oracle: every post-note pair.
            let (best_id, best_sim) = corpus
                .iter()
                .map(|n| (n.note_id, cosine(&post.claim, &n.claim)))
                .fold((NoteId(u64::MAX), f64::NEG_INFINITY), |acc, (id, s)| if s > acc.1 { (id, s) } else { acc });
            let truth = best_sim >= adapt;
            let result = match_note(post, &corpus, &thresholds).unwrap();
            let predicted = matches!(result.decision, MatchDecision::Reuse | MatchDecision::Adapt);
            argmax_agrees &= result.note_id == Some(best_id);
            match (predicted, truth) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                _ => {}
            }
        }
        let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fneg == 0 { 1.0 } else { tp as f64 / (tp + fneg) as f64 };
        worst = (worst.0.min(precision), worst.1.min(recall));
    }
    // The 25 near-duplicates are exactly the oracle positives at the default
    // thresholds.
    let defaults = MatchThresholds::default();
    let planted_found = posts[..25]
        .iter()
        .enumerate()
        .all(|(i, p)| match_note(p, &corpus, &defaults).unwrap().note_id == Some(NoteId(i as u64)));
    outcome(
        worst.0 >= 0.95 && worst.1 >= 0.95 && argmax_agrees && planted_found,
        format!(
            "min precision {:.3}, min recall {:.3} over {} threshold pairs (>= 0.95); \
             best match agrees with oracle: {argmax_agrees}; near-duplicates matched to source: {planted_found}",
            worst.0,
            worst.1,
            sweeps.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let capacities = [16u32, 8, 4, 2, 1];
    let rows = par_seeds(0..10, |seed| {
        let mut respected = true;
        let overloads: Vec<f64> = capacities
            .iter()
            .map(|&c| {
                let mut cfg = ScenarioConfig::default();
                cfg.set_all_seeds(seed);
                cfg.population.n_raters = 50;
                cfg.population.capacity = CapacityDist { min: c, max: c };
                let out = run_scenario(&cfg, &[]).expect("scenario");
                respected &= capacity_respected(&out);
                out.records.iter().map(|r| r.overload).sum::<f64>() / out.records.len() as f64
            })
            .collect();
        (overloads, respected)
    });
    let monotone = rows
        .iter()
        .filter(|(o, _)| o.windows(2).all(|w| w[1] >= w[0]))
        .count();
    let respected = rows.iter().all(|(_, r)| *r);
    let mean_curve: Vec<String> = (0..capacities.len())
        .map(|i| format!("{:.3}", rows.iter().map(|(o, _)| o[i]).sum::<f64>() / rows.len() as f64))
        .collect();
    outcome(
        monotone == 10 && respected,
        format!(
            "overload nondecreasing under capacity halving in {monotone}/10 seeds; capacity respected: {respected}; \
             mean overload by capacity {capacities:?}: [{}]",
            mean_curve.join(", ")
        ),
    )
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let run = |name: &str, seed: u64| {
        let mut cfg = ScenarioConfig::default();
        cfg.set_all_seeds(seed);
        let out = dir.path().join(name);
        run_to_dir(&cfg, &[], &out).expect("run");
        fs::read(out.join("metrics.csv")).expect("metrics.csv")
    };
    let a = run("a", 1);
    let b = run("b", 1);
    let c = run("c", 2);
    outcome(
        a == b && a != c,
        format!("same seed byte-identical: {}; different seed differs: {}", a == b, a != c),
    )
}

fn main() {
    let started = Instant::now();
    let criteria: Vec<(u32, &str, fn() -> Outcome)> = vec![
        (1, "scoring oracle equivalence", criterion_1),
        (2, "bridging property", criterion_2),
        (3, "generative recovery", criterion_3),
        (4, "expected_intercept exactness", criterion_4),
        (5, "ES sanity", criterion_5),
        (6, "helpfulness hacking", criterion_6),
        (7, "homogenization/novelty tradeoff", criterion_7),
        (8, "matching quality", criterion_8),
        (9, "allocation and overload", criterion_9),
        (10, "end-to-end determinism", criterion_10),
    ];
    // ACCEPTANCE_ONLY=3,7 runs a subset.
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let results: Vec<(u32, &str, Outcome, f64)> = thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .filter(|(id, _, _)| only.as_ref().is_none_or(|o| o.contains(id)))
            .map(|(id, name, f)| {
                s.spawn(move || {
                    let t = Instant::now();
                    let o = f();
                    (*id, *name, o, t.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("criterion panicked")).collect()
    });

    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut unexpected = Vec::new();
    for (id, name, o, secs) in &results {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let known = !o.pass && KNOWN_UNATTAINABLE.contains(id);
        println!(
            "criterion {id:>2} {verdict}{} [{name}] {} ({secs:.1}s)",
            if known { " (known unattainable)" } else { "" },
            o.detail
        );
        if !o.pass && (strict || !known) {
            unexpected.push(*id);
        }
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!(
        "acceptance: {passed}/{} criteria pass in {:.1}s",
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if !unexpected.is_empty() {
        eprintln!("acceptance: unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
