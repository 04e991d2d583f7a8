//! Acceptance suite. Runs as a plain binary and prints one line per
//! criterion; the exit status is non-zero when any criterion fails.
//!
//! `cargo test --release -p reciprocity --test acceptance`

use std::collections::HashMap;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reciprocity::deep::{
    actor_objective_and_grad, td_loss_and_grad, train_deep, Batch, DeepAgent, DeepLog, DeepPRConfig,
    DeepTrainOptions, Experience, PointMassConfig,
};
use reciprocity::mdp::LocalSpace;
use reciprocity::oracle::{consensus_error, kappa_one_gap, value_iteration_averaged};
use reciprocity::tabular::{train_tabular, Reciprocity};
use reciprocity::{
    ActionId, AdjacencyConfig, AdjacencyMode, EnvSpec, Learner, LocalState,
    ObservationMatrix, OracleQ, PRConfig, QTable, ScheduleConfig, StateSpace, TrainOptions, TransitionModel,
};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const GAMMA: f64 = 0.8;
const EPOCHS: usize = 2000;
const INNER_STEPS: usize = 50;

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: String) -> Verdict {
    Verdict { ok, detail }
}

fn digital_env() -> EnvSpec {
    EnvSpec::Digital { n_states: 20, n_agents: 20, model_seed: 0 }
}

fn digital_cfg(kappa: f64, schedule: ScheduleConfig) -> PRConfig {
    PRConfig {
        kappa,
        gamma: GAMMA,
        epsilon_greedy: 0.5,
        schedule,
        adjacency: AdjacencyConfig::new(1, AdjacencyMode::CustomDigital),
        graph: Default::default(),
        init: Default::default(),
    }
}

fn experiment_schedule() -> ScheduleConfig {
    ScheduleConfig::polynomial(0.5, 2.0, 0.65, 0.35, 2.0)
}

struct TabularRun {
    log: reciprocity::TrainingLog<f64>,
    model: TransitionModel<f64>,
    bound: f64,
}

fn run_digital(kappa: f64, seed: u64) -> TabularRun {
    let mut env = digital_env().build::<f64>().unwrap();
    let mut opts = TrainOptions::new(EPOCHS, INNER_STEPS);
    opts.snapshot_every = Some(50);
    let log = train_tabular(env.as_mut(), &digital_cfg(kappa, experiment_schedule()), Learner::TabularPr, &opts, seed)
        .expect("digital run");
    TabularRun {
        bound: env.reward_bound() / (1.0 - GAMMA) + 1.0,
        model: env.model().unwrap().clone(),
        log,
    }
}

fn consensus_at(run: &TabularRun, epoch: usize) -> f64 {
    consensus_error(run.log.snapshot_at(epoch).unwrap()).unwrap()
}

fn criterion_consensus(runs: &[TabularRun]) -> Verdict {
    let ratios: Vec<f64> = runs.iter().map(|r| consensus_at(r, EPOCHS) / consensus_at(r, 50)).collect();
    let ok = ratios.iter().all(|&x| x < 0.10);
    verdict(ok, format!("consensus(2000)/consensus(50) per seed {ratios:.3?}, need < 0.10"))
}

fn criterion_optimality(runs: &[TabularRun]) -> Verdict {
    let mut rel = Vec::new();
    let mut min_visits = u64::MAX;
    for r in runs {
        let oracle: OracleQ<f64> = value_iteration_averaged(&r.model, GAMMA, 1e-10).unwrap();
        min_visits = min_visits.min(r.log.tables.iter().map(QTable::min_visits).min().unwrap());
        rel.push(oracle.max_gap(&r.log.tables).unwrap() / oracle.sup_norm());
    }
    let ok = min_visits >= 500 && rel.iter().all(|&x| x <= 0.05);
    verdict(ok, format!("relative sup gap per seed {rel:.4?} at min visits {min_visits}, need <= 0.05 after 500"))
}

fn criterion_kappa_gap(kappa_one: &[TabularRun], kappa_half: &[TabularRun]) -> Verdict {
    let sched = experiment_schedule();
    let ScheduleConfig::Polynomial { tau1, tau2, epsilon1, .. } = sched else { unreachable!() };
    let admissible = 2.0 * tau2 >= tau1 - 1.0 / (2.0 + epsilon1);
    let mut shrink = Vec::new();
    for (a, b) in kappa_half.iter().zip(kappa_one) {
        let gap = |e| kappa_one_gap(a.log.snapshot_at(e).unwrap(), b.log.snapshot_at(e).unwrap()).unwrap();
        shrink.push(gap(100) / gap(EPOCHS));
    }
    let ok = admissible && shrink.iter().all(|&x| x >= 5.0);
    verdict(ok, format!("gap(100)/gap(2000) per seed {shrink:.2?}, need >= 5"))
}

fn bitwise_equal(a: &[QTable<f64>], b: &[QTable<f64>]) -> bool {
    a.iter().zip(b).all(|(x, y)| {
        x.visit_counts() == y.visit_counts()
            && x.values().iter().zip(y.values()).all(|(p, q)| p.to_bits() == q.to_bits())
    })
}

fn criterion_reduction(bounds: &mut Vec<(f64, f64)>) -> Verdict {
    let mut landmarks = reciprocity::env::LandmarksConfig::new(4, 4, 2, 25);
    landmarks.layout_seed = 3;
    let cases = [
        (digital_env(), AdjacencyConfig::new(1, AdjacencyMode::CustomDigital)),
        (EnvSpec::GridLandmarks(landmarks), AdjacencyConfig::new(2, AdjacencyMode::SoftmaxWeighted)),
    ];
    let mut ok = true;
    let mut steps = 0;
    for (spec, adjacency) in cases {
        for seed in [0, 9] {
            let mut cfg = digital_cfg(0.5, ScheduleConfig::Constant { alpha: 0.1, beta: 0.0 });
            cfg.adjacency = adjacency;
            let mut opts = TrainOptions::new(20, 500);
            opts.snapshot_every = Some(1);
            let mut env_pr = spec.build::<f64>().unwrap();
            let mut env_iql = spec.build::<f64>().unwrap();
            let pr = train_tabular(env_pr.as_mut(), &cfg, Learner::TabularPr, &opts, seed).unwrap();
            let iql = train_tabular(env_iql.as_mut(), &cfg, Learner::Iql, &opts, seed).unwrap();
            steps = pr.steps;
            ok &= pr.snapshots.len() == iql.snapshots.len()
                && pr.snapshots.iter().zip(&iql.snapshots).all(|(x, y)| x.0 == y.0 && bitwise_equal(&x.1, &y.1));
            bounds.push((pr.max_abs_q, env_pr.reward_bound() / (1.0 - GAMMA) + 1.0));
            bounds.push((iql.max_abs_q, env_iql.reward_bound() / (1.0 - GAMMA) + 1.0));
        }
    }
    verdict(ok, format!("beta = 0 against IQL over {steps} steps, Digital and GridLandmarks, every epoch bitwise"))
}

/// Independent evaluation of the aggregates from lifted coordinates.
struct BruteForce {
    d: usize,
    level: usize,
    mode: AdjacencyMode,
    kappa: f64,
}

fn lifted(values: &[usize], rows: &[usize], d: usize) -> Vec<Option<usize>> {
    let mut out = vec![None; d];
    for (v, &r) in values.iter().zip(rows) {
        out[r] = Some(*v);
    }
    out
}

fn l0(a: &[Option<usize>], b: &[Option<usize>]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

impl BruteForce {
    /// `(value, contributed)` of peer `table` at the anchor.
    fn q_sharp(&self, anchor: &[usize], own_rows: &[usize], peer: &[Vec<usize>], peer_rows: &[usize], q: &[f64]) -> Option<f64> {
        let a = lifted(anchor, own_rows, self.d);
        let mut num = 0.0;
        let mut den = 0.0;
        let mut count = 0usize;
        for (k, pv) in peer.iter().enumerate() {
            let rho = match self.mode {
                AdjacencyMode::CustomDigital => {
                    if anchor[0].abs_diff(pv[0]) == 1 {
                        1
                    } else {
                        continue;
                    }
                }
                _ => l0(&a, &lifted(pv, peer_rows, self.d)),
            };
            if rho > self.level && self.mode != AdjacencyMode::CustomDigital {
                continue;
            }
            let w = match self.mode {
                AdjacencyMode::SoftmaxWeighted => (self.d as f64 - rho as f64).exp(),
                _ => 1.0,
            };
            num += w * q[k];
            den += w;
            count += 1;
        }
        (count > 0).then(|| num / den)
    }
}

fn criterion_aggregation() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    let mut evaluated = 0usize;
    for _ in 0..50 {
        let mode = [AdjacencyMode::SoftmaxWeighted, AdjacencyMode::SimpleAverage, AdjacencyMode::CustomDigital]
            [rng.random_range(0..3)];
        let (space, n_actions) = if mode == AdjacencyMode::CustomDigital {
            (StateSpace::flat(rng.random_range(2..7)).unwrap(), 2)
        } else {
            let d = rng.random_range(2..4);
            (StateSpace::new((0..d).map(|_| rng.random_range(2..4)).collect()).unwrap(), rng.random_range(1..4))
        };
        let d = space.dim();
        let n = rng.random_range(2..5);
        let level = if mode == AdjacencyMode::CustomDigital { 1 } else { rng.random_range(0..=d) };
        let kappa = rng.random::<f64>();
        let rows: Vec<Vec<usize>> = (0..n)
            .map(|_| {
                if mode == AdjacencyMode::CustomDigital || rng.random_bool(0.4) {
                    (0..d).collect()
                } else {
                    let drop = rng.random_range(0..d);
                    (0..d).filter(|&k| k != drop).collect()
                }
            })
            .collect();
        let spaces: Vec<LocalSpace> = rows
            .iter()
            .map(|r| LocalSpace::new(&space, Arc::new(ObservationMatrix::new(d, r.clone()).unwrap())).unwrap())
            .collect();
        let states: Vec<Vec<Vec<usize>>> = spaces
            .iter()
            .map(|s| s.states().map(|x: LocalState| x.values().to_vec()).collect())
            .collect();
        let tables: Vec<QTable<f64>> = spaces
            .iter()
            .map(|s| {
                let vals = (0..s.len() * n_actions).map(|_| rng.random_range(-5.0..5.0)).collect();
                QTable::from_values(s.len(), n_actions, vals).unwrap()
            })
            .collect();
        let cfg = AdjacencyConfig::new(level, mode);
        let rec = Reciprocity::new(&spaces, &cfg, kappa).unwrap();
        let bf = BruteForce { d, level, mode, kappa };
        let neighbours: Vec<usize> = (0..n).collect();

        for i in 0..n {
            for (s, anchor) in states[i].iter().enumerate() {
                for a in 0..n_actions {
                    let (mut same, mut n_same, mut sharp, mut n_sharp) = (0.0, 0, 0.0, 0);
                    for j in 0..n {
                        let col: Vec<f64> = (0..states[j].len()).map(|k| tables[j].get(k, ActionId(a))).collect();
                        let expected = bf.q_sharp(anchor, &rows[i], &states[j], &rows[j], &col);
                        let got = rec.q_sharp(i, j, &tables[j], s, ActionId(a));
                        match (expected, got) {
                            (Some(e), Ok(g)) => {
                                worst = worst.max((e - g).abs());
                                sharp += e;
                                n_sharp += 1;
                            }
                            (None, Err(_)) => {}
                            _ => return verdict(false, format!("q_sharp availability differs at agent {i} peer {j}")),
                        }
                        let anchor_lifted = lifted(anchor, &rows[i], d);
                        if let Some(k) = states[j].iter().position(|v| lifted(v, &rows[j], d) == anchor_lifted) {
                            same += col[k];
                            n_same += 1;
                        }
                    }
                    let expected = match (n_same, n_sharp) {
                        (0, 0) => None,
                        (_, 0) => Some(same / n_same as f64),
                        (0, _) => Some(sharp / n_sharp as f64),
                        _ => Some(bf.kappa * same / n_same as f64 + (1.0 - bf.kappa) * sharp / n_sharp as f64),
                    };
                    match (expected, rec.q_star(i, &tables, s, ActionId(a), &neighbours)) {
                        (Some(e), Ok(g)) => worst = worst.max((e - g).abs()),
                        (None, Err(_)) => {}
                        _ => return verdict(false, format!("q_star availability differs at agent {i}")),
                    }
                    evaluated += 1;
                }
            }
        }
    }
    verdict(worst <= 1e-12, format!("50 instances, {evaluated} (agent, s, a) cells, worst deviation {worst:.2e}"))
}

fn random_model(rng: &mut ChaCha8Rng) -> TransitionModel<f64> {
    let (ns, na, n) = (rng.random_range(2..12), rng.random_range(1..4), rng.random_range(1..5));
    let mut probs = Vec::with_capacity(ns * na * ns);
    for _ in 0..ns * na {
        let row: Vec<f64> = (0..ns).map(|_| rng.random::<f64>() + 1e-3).collect();
        let z: f64 = row.iter().sum();
        probs.extend(row.iter().map(|p| p / z));
    }
    let rewards = (0..n * ns * na).map(|_| rng.random_range(-3.0..3.0)).collect();
    TransitionModel::new(ns, na, n, probs, rewards, 0.5).unwrap()
}

fn criterion_contraction() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let model = random_model(&mut rng);
        let gamma = rng.random_range(0.5..0.95);
        let q = value_iteration_averaged(&model, gamma, 1e-10).unwrap();
        for w in q.residuals.windows(2) {
            worst = worst.max(w[1] - (gamma * w[0] + 1e-12));
        }
    }
    verdict(worst <= 0.0, format!("20 models, max excess over gamma * previous residual {worst:.2e}"))
}

fn fd_relative_error(analytic: &[f64], f: impl Fn(usize, f64) -> f64) -> f64 {
    let h = 1e-5;
    let fd: Vec<f64> = (0..analytic.len()).map(|k| (f(k, h) - f(k, -h)) / (2.0 * h)).collect();
    let diff = analytic.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let scale = reciprocity::deep::mlp::l2_norm(analytic).max(reciprocity::deep::mlp::l2_norm(&fd)).max(1e-12);
    diff / scale
}

fn criterion_gradients() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9a4d);
    let (mut critic_worst, mut actor_worst): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let n = rng.random_range(1..4);
        let state_dim = 2 * n;
        let hidden: Vec<usize> = (0..rng.random_range(0..3)).map(|_| rng.random_range(2..7)).collect();
        let mask: Vec<bool> = {
            let mut m: Vec<bool> = (0..state_dim).map(|_| rng.random_bool(0.7)).collect();
            m[0] = true;
            m
        };
        let obs_dim = mask.iter().filter(|&&b| b).count();
        let agent = DeepAgent::<f64>::new(obs_dim, state_dim, n, &hidden, &mut rng).unwrap();
        let i = rng.random_range(0..n);
        let batch_len = rng.random_range(1..6);
        let items: Vec<Experience<f64>> = (0..batch_len)
            .map(|_| Experience {
                state: (0..state_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                actions: (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect(),
                rewards: (0..n).map(|_| rng.random_range(-1.0..0.0)).collect(),
                next_state: (0..state_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                terminal: false,
            })
            .collect();
        let batch = Batch::new(
            (0..batch_len).collect(),
            items.iter().collect(),
            vec![vec![0.0; 2 * n]; batch_len],
        )
        .unwrap();
        let targets: Vec<f64> = (0..batch_len).map(|_| rng.random_range(-2.0..2.0)).collect();

        let (_, g) = td_loss_and_grad(&agent.critic, &batch, &targets).unwrap();
        critic_worst = critic_worst.max(fd_relative_error(&g, |k, h| {
            let mut c = agent.critic.clone();
            c.params_mut()[k] += h;
            td_loss_and_grad(&c, &batch, &targets).unwrap().0
        }));

        let (_, g) = actor_objective_and_grad(&agent, i, &mask, &batch).unwrap();
        actor_worst = actor_worst.max(fd_relative_error(&g, |k, h| {
            let mut a = agent.clone();
            a.actor.params_mut()[k] += h;
            actor_objective_and_grad(&a, i, &mask, &batch).unwrap().0
        }));
    }
    let ok = critic_worst < 1e-4 && actor_worst < 1e-4;
    verdict(ok, format!("100 configurations, worst relative error critic {critic_worst:.2e} actor {actor_worst:.2e}"))
}

fn smoke_cfg(kappa: f64) -> DeepPRConfig {
    let mut cfg = DeepPRConfig::new(kappa);
    cfg.hidden = vec![16, 16];
    cfg
}

fn criterion_deep_smoke() -> Verdict {
    let env = PointMassConfig::new(3);
    let opts = DeepTrainOptions::new(200);
    let mut notes = Vec::new();
    let mut ok = true;
    for seed in 0..3u64 {
        let log: DeepLog<f64> = match train_deep(&env, &smoke_cfg(0.5), &opts, seed) {
            Ok(l) => l,
            Err(e) => return verdict(false, format!("seed {seed}: {e}")),
        };
        let loss = |e: usize| log.epochs[e - 1].td_loss.unwrap_or(f64::NAN);
        ok &= loss(200) < loss(10);
        notes.push(format!("{:.3}->{:.3}", loss(10), loss(200)));

        let a: DeepLog<f64> = match train_deep(&env, &smoke_cfg(0.0), &opts, seed) {
            Ok(l) => l,
            Err(e) => return verdict(false, format!("seed {seed} kappa 0: {e}")),
        };
        let b: DeepLog<f64> = train_deep(&env, &smoke_cfg(0.0), &opts, seed).unwrap();
        ok &= a == b;
    }
    verdict(ok, format!("TD loss epoch 10->200 per seed [{}], kappa 0 paired reruns identical", notes.join(", ")))
}

fn criterion_boundedness(bounds: &[(f64, f64)]) -> Verdict {
    let worst = bounds.iter().map(|(q, b)| q / b).fold(0.0, f64::max);
    let ok = bounds.iter().all(|(q, b)| q <= b);
    verdict(ok, format!("{} tabular runs, largest |Q| / (r_max/(1-gamma) + 1) = {worst:.3}", bounds.len()))
}

fn report(id: usize, name: &str, started: Instant, v: &Verdict, table: &mut HashMap<usize, bool>) {
    println!(
        "{} criterion {id} ({name}): {} [{:.1}s]",
        if v.ok { "PASS" } else { "FAIL" },
        v.detail,
        started.elapsed().as_secs_f64()
    );
    table.insert(id, v.ok);
}

fn main() -> ExitCode {
    let mut results = HashMap::new();
    let mut bounds = Vec::new();

    let t = Instant::now();
    let kappa_one: Vec<TabularRun> = SEEDS.iter().map(|&s| run_digital(1.0, s)).collect();
    report(1, "consensus", t, &criterion_consensus(&kappa_one), &mut results);
    let t = Instant::now();
    report(2, "optimality", t, &criterion_optimality(&kappa_one), &mut results);

    let t = Instant::now();
    let kappa_half: Vec<TabularRun> = SEEDS.iter().map(|&s| run_digital(0.5, s)).collect();
    report(3, "kappa gap", t, &criterion_kappa_gap(&kappa_one, &kappa_half), &mut results);
    bounds.extend(kappa_one.iter().chain(&kappa_half).map(|r| (r.log.max_abs_q, r.bound)));

    let t = Instant::now();
    report(4, "reduction", t, &criterion_reduction(&mut bounds), &mut results);
    let t = Instant::now();
    report(5, "aggregation", t, &criterion_aggregation(), &mut results);
    let t = Instant::now();
    report(6, "contraction", t, &criterion_contraction(), &mut results);
    let t = Instant::now();
    report(7, "gradients", t, &criterion_gradients(), &mut results);
    let t = Instant::now();
    report(8, "deep smoke", t, &criterion_deep_smoke(), &mut results);
    let t = Instant::now();
    report(9, "boundedness", t, &criterion_boundedness(&bounds), &mut results);

    let failed: Vec<usize> = (1..=9).filter(|k| !results[k]).collect();
    println!("{} of 9 criteria pass", 9 - failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

