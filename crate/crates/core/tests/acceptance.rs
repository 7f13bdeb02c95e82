//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. The training criteria run the full default
//! schedules and take a while on a single core.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use cer_core::agent::Algorithm;
use cer_core::gridworld::Observation;
use cer_core::harness::{run_experiment, tail_mean, ExperimentConfig, ExperimentResults};
use cer_core::qnet::{MlpParams, Sample};
use cer_core::replay::{
    cer_share, find_contrastive, percentile_gate, MemBuffer, PerBuffer, SumTree, Transition,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn say(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn experiment(id: u8, algorithms: &[Algorithm], dir: &Path) -> ExperimentResults {
    let mut config = ExperimentConfig::defaults(id).unwrap();
    config.algorithms = algorithms.to_vec();
    config.out_dir = dir.join(format!("exp{id}"));
    let started = Instant::now();
    let results = run_experiment(&config).unwrap();
    say(&format!(
        "  experiment {id}: {} runs of {} episodes in {:.0}s",
        results.runs.len(),
        config.agent.episodes,
        started.elapsed().as_secs_f64()
    ));
    assert_eq!(results.failures(), 0, "a run failed");
    results
}

/// Mean of the smoothed return over the final 100 episodes, per seed.
fn finals(results: &ExperimentResults, algorithm: Algorithm) -> Vec<f64> {
    results.runs_for(algorithm).map(|r| tail_mean(r.smoothed().unwrap(), 100)).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}

fn oracle_fidelity() -> Verdict {
    let started = Instant::now();
    let mut got = Vec::new();
    for (id, expected) in [(1, 9.86), (2, 9.72), (3, 9.78)] {
        let optimum = ExperimentConfig::defaults(id).unwrap().oracle().unwrap();
        got.push((id, optimum, (optimum - expected).abs() < 1e-9));
    }
    let secs = started.elapsed().as_secs_f64();
    let pass = got.iter().all(|g| g.2) && secs < 1.0;
    let text: Vec<String> = got.iter().map(|(id, v, _)| format!("exp{id}={v:.2}")).collect();
    verdict(pass, format!("{} in {secs:.3}s", text.join(", ")))
}

fn experiment_one(dir: &Path) -> Verdict {
    let results = experiment(1, &[Algorithm::Cer, Algorithm::Dqn], dir);
    let cer = finals(&results, Algorithm::Cer);
    let dqn = finals(&results, Algorithm::Dqn);
    let (c, d) = (mean(&cer), mean(&dqn));
    verdict(
        c >= 9.0 && c >= d,
        format!("cer {c:.3} (needs >= 9.0 and >= dqn), dqn {d:.3}; cer seeds [{}], dqn seeds [{}]", list(&cer), list(&dqn)),
    )
}

fn experiment_three(results: &ExperimentResults) -> Verdict {
    let optimum = 9.78;
    let cer = finals(results, Algorithm::Cer);
    let dqn = finals(results, Algorithm::Dqn);
    let (c, d) = (mean(&cer), mean(&dqn));
    let converged = cer.iter().filter(|v| (*v - optimum).abs() <= 0.3).count();
    verdict(
        (c - optimum).abs() <= 0.3 && converged == cer.len() && d < c,
        format!(
            "cer {c:.3} with {converged}/{} seeds within 0.3 of {optimum}, dqn {d:.3}; cer seeds [{}], dqn seeds [{}]",
            cer.len(),
            list(&cer),
            list(&dqn)
        ),
    )
}

fn experiment_four(dir: &Path) -> Verdict {
    let results = experiment(4, &Algorithm::ALL, dir);
    let m = |a| mean(&finals(&results, a));
    let (cer, per, dqn, ablation) =
        (m(Algorithm::Cer), m(Algorithm::Per), m(Algorithm::Dqn), m(Algorithm::CerNocontrast));
    let seeds: Vec<String> = Algorithm::ALL
        .iter()
        .map(|&a| format!("{} [{}]", a.name(), list(&finals(&results, a))))
        .collect();
    verdict(
        ablation < dqn && (cer - per).abs() <= 1.0,
        format!(
            "cer {cer:.3}, per {per:.3}, dqn {dqn:.3}, cer-nocontrast {ablation:.3}; {}",
            seeds.join(", ")
        ),
    )
}

/// First episode whose raw Q(up) - Q(right) gap below the waypoint exceeds 0.5.
fn first_separation(results: &ExperimentResults, algorithm: Algorithm) -> Vec<Option<usize>> {
    results
        .runs_for(algorithm)
        .map(|r| r.metrics().unwrap().probes.iter().position(|p| p[0][0] - p[0][1] > 0.5))
        .collect()
}

fn probe_discrimination(results: &ExperimentResults) -> Verdict {
    let optimum = 9.78;
    let finals_cer = finals(results, Algorithm::Cer);
    let final_gaps: Vec<f64> = results
        .runs_for(Algorithm::Cer)
        .map(|r| {
            let last = r.metrics().unwrap().probes.last().unwrap();
            last[0][0] - last[0][1]
        })
        .collect();
    let converged: Vec<f64> = final_gaps
        .iter()
        .zip(&finals_cer)
        .filter(|(_, f)| (*f - optimum).abs() <= 0.3)
        .map(|(g, _)| *g)
        .collect();
    let cer_first = first_separation(results, Algorithm::Cer);
    let dqn_first = first_separation(results, Algorithm::Dqn);
    let earlier = cer_first
        .iter()
        .zip(&dqn_first)
        .filter(|(c, d)| match (c, d) {
            (Some(c), Some(d)) => c < d,
            (Some(_), None) => true,
            _ => false,
        })
        .count();
    let show = |v: &[Option<usize>]| {
        v.iter().map(|e| e.map_or("-".into(), |e| e.to_string())).collect::<Vec<_>>().join(" ")
    };
    verdict(
        !converged.is_empty() && converged.iter().all(|&g| g > 0.0) && earlier >= 7,
        format!(
            "final gap > 0 in {}/{} converged cer runs; cer separates earlier in {earlier}/{} seeds (cer [{}], dqn [{}])",
            converged.iter().filter(|&&g| g > 0.0).count(),
            converged.len(),
            cer_first.len(),
            show(&cer_first),
            show(&dqn_first)
        ),
    )
}

fn preactivations_clear(p: &MlpParams, s: &[f64]) -> bool {
    let d = p.d_in();
    let mut h1 = [0.0; 32];
    for (j, h) in h1.iter_mut().enumerate() {
        let z = p.b1()[j] + (0..d).map(|i| p.w1()[j * d + i] * s[i]).sum::<f64>();
        if z.abs() < 1e-3 {
            return false;
        }
        *h = z.max(0.0);
    }
    (0..8).all(|k| (p.b2()[k] + (0..32).map(|j| p.w2()[k * 32 + j] * h1[j]).sum::<f64>()).abs() >= 1e-3)
}

fn gradient_check() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut passed = 0;
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let d_in = 3 + case % 2;
        let mut p = MlpParams::init(d_in, &mut rng);
        for v in p.values_mut() {
            *v += rng.gen_range(-0.1..0.1);
        }
        let mut states = Vec::new();
        while states.len() < 8 {
            let s: Vec<f64> = (0..d_in).map(|_| rng.gen_range(0.0..1.0)).collect();
            if preactivations_clear(&p, &s) {
                states.push(s);
            }
        }
        let labels: Vec<(usize, f64, f64)> = (0..8)
            .map(|_| (rng.gen_range(0..4), rng.gen_range(-5.0..10.0), rng.gen_range(0.1..2.0)))
            .collect();
        let loss = |p: &MlpParams| {
            let batch: Vec<Sample> = states
                .iter()
                .zip(&labels)
                .map(|(s, &(action, target, weight))| Sample { state: s, action, target, weight })
                .collect();
            p.loss_and_grads(&batch, None).unwrap()
        };
        let (_, grads) = loss(&p);
        let mut ok = true;
        for idx in 0..p.len() {
            let orig = p.values()[idx];
            p.values_mut()[idx] = orig + 1e-5;
            let up = loss(&p).0;
            p.values_mut()[idx] = orig - 1e-5;
            let down = loss(&p).0;
            p.values_mut()[idx] = orig;
            let numeric = (up - down) / 2e-5;
            let analytic = grads.values()[idx];
            let scale = analytic.abs().max(numeric.abs());
            if (analytic - numeric).abs() > 1e-4 * scale + 1e-7 {
                ok = false;
            }
            if scale > 1e-7 {
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
        passed += usize::from(ok);
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        passed == 100 && secs < 10.0,
        format!("{passed}/100 cases, worst relative error {worst:.2e}, {secs:.2}s"),
    )
}

fn obs(x: usize, y: usize, flag: bool) -> Observation {
    Observation::from_slice(&[x as f64 / 3.0, y as f64 / 3.0, f64::from(u8::from(flag))])
}

fn buffer_properties() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut notes = Vec::new();

    let mut tree = SumTree::new(777);
    for _ in 0..10_000 {
        tree.set(rng.gen_range(0..777), rng.gen_range(0.0..10.0));
    }
    let direct: f64 = (0..777).map(|k| tree.leaf(k)).sum();
    let tree_ok = (tree.total() - direct).abs() < 1e-9;
    notes.push(format!("sum tree {}", if tree_ok { "ok" } else { "off" }));

    let alpha = 0.6;
    let mut per = PerBuffer::new(16, alpha, 1e-3);
    let errors: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..4.0)).collect();
    for i in 0..10 {
        per.push(Transition { state: obs(0, 0, false), action: 0, target: i as f64, episode_id: 0, step_index: i });
    }
    per.update(&(0..10).collect::<Vec<_>>(), &errors).unwrap();
    let priorities: Vec<f64> = errors.iter().map(|e| (e.abs() + 1e-3).powf(alpha)).collect();
    let total: f64 = priorities.iter().sum();
    let draws = 100_000;
    let mut counts = [0usize; 10];
    for s in per.sample(draws, 1.0, &mut rng) {
        counts[s.slot] += 1;
    }
    let per_ok = priorities.iter().zip(counts).all(|(p, c)| {
        let q = p / total;
        (c as f64 - draws as f64 * q).abs() <= 3.0 * (draws as f64 * q * (1.0 - q)).sqrt()
    });
    notes.push(format!("per frequencies {}", if per_ok { "ok" } else { "off" }));

    let mut contrast_ok = true;
    for _ in 0..1000 {
        let cap = rng.gen_range(1..50);
        let mut mem = MemBuffer::new(cap);
        let mut all = Vec::new();
        for i in 0..rng.gen_range(0..80) {
            let t = Transition {
                state: obs(rng.gen_range(0..3), rng.gen_range(0..3), rng.gen_bool(0.5)),
                action: rng.gen_range(0..4),
                target: i as f64,
                episode_id: 0,
                step_index: i,
            };
            mem.push(t);
            all.push(t);
        }
        let anchor = Transition {
            state: obs(rng.gen_range(0..3), rng.gen_range(0..3), rng.gen_bool(0.5)),
            action: rng.gen_range(0..4),
            target: 0.0,
            episode_id: 1,
            step_index: 0,
        };
        let kept = &all[all.len().saturating_sub(cap)..];
        let expected = kept.iter().rev().find(|t| t.action != anchor.action && t.state == anchor.state).copied();
        contrast_ok &= find_contrastive(&anchor, &mem, 1e-9) == expected;
    }
    notes.push(format!("contrastive lookup {}", if contrast_ok { "ok" } else { "off" }));

    let mut gate_ok = true;
    for _ in 0..500 {
        let n: usize = rng.gen_range(1..200);
        let targets: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(-40i32..40)) / 4.0).collect();
        let mut mem = MemBuffer::new(1024);
        for &t in &targets {
            mem.push(Transition { state: obs(0, 0, false), action: 0, target: t, episode_id: 0, step_index: 0 });
        }
        let mut sorted = targets.clone();
        sorted.sort_by(f64::total_cmp);
        // psi = 10: smallest rank r with r >= n/10, and with r >= 9n/10.
        let low = sorted[n.div_ceil(10).max(1) - 1];
        let high = sorted[(9 * n).div_ceil(10).max(1) - 1];
        for _ in 0..10 {
            let t = f64::from(rng.gen_range(-44i32..44)) / 4.0;
            gate_ok &= percentile_gate(t, &mem, 10.0) == (t <= low || t >= high);
        }
    }
    notes.push(format!("percentile gate {}", if gate_ok { "ok" } else { "off" }));

    let share_ok = [(0.0, 1024), (0.25, 870), (0.5, 716), (1.0, 409)]
        .iter()
        .all(|&(eps, expected)| cer_share(4096, eps) == expected);
    notes.push(format!("cer share {}", if share_ok { "ok" } else { "off" }));

    verdict(tree_ok && per_ok && contrast_ok && gate_ok && share_ok, notes.join(", "))
}

fn determinism(dir: &Path) -> Verdict {
    let run = |name: &str| {
        let mut config = ExperimentConfig::defaults(1).unwrap();
        config.seeds = vec![3, 8];
        config.agent.episodes = 60;
        config.agent.kappa = 512;
        config.out_dir = dir.join(name);
        run_experiment(&config).unwrap();
        config.out_dir
    };
    let (a, b) = (run("first"), run("second"));
    let mut names: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    let differing: Vec<&String> =
        names.iter().filter(|n| fs::read(a.join(n)).unwrap() != fs::read(b.join(n)).unwrap()).collect();
    verdict(
        differing.is_empty() && names.len() == 12,
        format!("{} CSV files compared, {} differ", names.len(), differing.len()),
    )
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().unwrap();
    let mut verdicts: Vec<(u8, &str, Verdict)> = Vec::new();
    let mut report = |n: u8, name: &'static str, v: Verdict| {
        say(&format!("criterion {n} {name}: {} ({})", if v.pass { "PASS" } else { "FAIL" }, v.detail));
        verdicts.push((n, name, v));
    };

    report(1, "oracle fidelity", oracle_fidelity());
    report(6, "gradient correctness", gradient_check());
    report(7, "buffer properties", buffer_properties());
    report(8, "determinism", determinism(dir.path()));
    report(2, "experiment 1 reproduction", experiment_one(dir.path()));
    let exp3 = experiment(3, &[Algorithm::Cer, Algorithm::Dqn], dir.path());
    report(3, "experiment 3 reproduction", experiment_three(&exp3));
    report(5, "experiment 5 probe", probe_discrimination(&exp3));
    report(4, "experiment 4 ablation ordering", experiment_four(dir.path()));

    verdicts.sort_by_key(|v| v.0);
    say("acceptance summary:");
    for (n, name, v) in &verdicts {
        say(&format!("  {} criterion {n} {name}", if v.pass { "PASS" } else { "FAIL" }));
    }
    if verdicts.iter().all(|v| v.2.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
