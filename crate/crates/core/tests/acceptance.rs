//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers. The heavyweight criteria share per-seed pipeline
//! fixtures built once for the whole binary.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use demoforge::diffusion::model::{init_policy_params, PolicyDims, PolicyInput};
use demoforge::diffusion::schedule::{forward_diffuse, NoiseSchedule};
use demoforge::diffusion::train::{weighted_loss, Policy, TrainItem};
use demoforge::disc::clip::{clips_at, sample_clip_starts, Clip};
use demoforge::disc::energy::{residual_energy, LogpiTable, ZSCORE_EPS};
use demoforge::disc::model::{init_disc_params, DiscDims, Discriminator};
use demoforge::disc::train::{
    pu_loss, ranking_auc, train_discriminator, DiscTrainConfig, PU_ETA,
};
use demoforge::episode::{Episode, Source};
use demoforge::mat::Mat;
use demoforge::manifest::QualityRecord;
use demoforge::metrics::{self, NormalizationStats};
use demoforge::nn::gradcheck::{max_relative_error, GRADCHECK_TOL};
use demoforge::nn::layers::{self, TransformerArch};
use demoforge::nn::tape::{ParamSet, Tape};
use demoforge::pipeline::stages::{
    self, Workdir, ARM_VANILLA, ARM_WEIGHTED,
};
use demoforge::pipeline::PipelineConfig;
use demoforge::sim::corruption::{generate_demo, CorruptionSpec};
use demoforge::sim::task::{TaskKind, TaskSpec};
use demoforge::util::derive_seed;

// ---------------------------------------------------------------------------
// shared fixtures: full pipeline runs on the standard corpus, three seeds
// ---------------------------------------------------------------------------

const MASTER_SEEDS: [u64; 3] = [101, 202, 303];

struct SeedFixture {
    cfg: PipelineConfig,
    wd: Workdir,
    _dir: tempfile::TempDir,
    disc_train_time: Duration,
    build_time: Duration,
}

fn fixtures() -> &'static Vec<SeedFixture> {
    static FIXTURES: OnceLock<Vec<SeedFixture>> = OnceLock::new();
    FIXTURES.get_or_init(|| {
        MASTER_SEEDS
            .iter()
            .map(|&seed| build_fixture(seed))
            .collect()
    })
}

fn build_fixture(seed: u64) -> SeedFixture {
    let start = Instant::now();
    let mut cfg = PipelineConfig::standard();
    cfg.seed = seed;
    let dir = tempfile::tempdir().expect("tempdir");
    let wd = Workdir::new(dir.path());
    stages::gen_corpus(&cfg, &wd, false).expect("gen corpus");
    stages::curate(&cfg, &wd, false).expect("curate");
    stages::pretrain(&cfg, &wd, false).expect("pretrain");
    stages::compute_logpi(&cfg, &wd, false).expect("compute logpi");
    let disc_started = Instant::now();
    stages::train_disc(&cfg, &wd, false).expect("train disc");
    let disc_train_time = disc_started.elapsed();
    stages::score(&cfg, &wd, false).expect("score");
    stages::posttrain(&cfg, &wd, true, false).expect("posttrain weighted");
    stages::posttrain(&cfg, &wd, false, false).expect("posttrain vanilla");
    SeedFixture {
        cfg,
        wd,
        _dir: dir,
        disc_train_time,
        build_time: start.elapsed(),
    }
}

// ---------------------------------------------------------------------------
// criterion 1: metric oracle equivalence
// ---------------------------------------------------------------------------

/// Naive 1-indexed reimplementation of the smoothness metrics, straight
/// from the formulas, independent of the library path.
fn brute_force_smoothness(states: &[Vec<f64>], dt: f64) -> (f64, f64, f64) {
    let t_len = states.len();
    let d = states[0].len();
    let s = |t: usize, k: usize| states[t - 1][k]; // 1-indexed access
    let v = |t: usize, k: usize| (s(t + 1, k) - s(t - 1, k)) / (2.0 * dt);
    let a = |t: usize, k: usize| (v(t + 1, k) - v(t - 1, k)) / (2.0 * dt);
    let j = |t: usize, k: usize| (a(t + 1, k) - a(t - 1, k)) / (2.0 * dt);
    let mut sum_a = 0.0;
    let mut sum_j = 0.0;
    for t in 4..=t_len - 3 {
        for k in 0..d {
            sum_a += a(t, k) * a(t, k);
            sum_j += j(t, k) * j(t, k);
        }
    }
    let n = ((t_len - 6) * d) as f64;
    let mut coverage = 0.0;
    for t in 1..t_len {
        for k in 0..d {
            coverage += (states[t][k] - states[t - 1][k]).abs();
        }
    }
    ((sum_a / n).sqrt(), (sum_j / n).sqrt(), coverage)
}

fn random_episode(rng: &mut ChaCha20Rng, t_len: usize, d: usize) -> Episode {
    Episode {
        episode_id: "oracle".into(),
        task_id: "task".into(),
        instruction: String::new(),
        dt: 0.05,
        dims: d,
        source: Source::Simulated,
        states: Mat::from_fn(t_len, d, |_, _| rng.sample::<f64, _>(StandardNormal)),
        actions: Mat::zeros(t_len, d),
    }
}

#[test]
fn criterion_1_metric_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let t_len = rng.gen_range(10..=500);
        let d = [1, 6, 36][i % 3];
        let episode = random_episode(&mut rng, t_len, d);
        // identity normalization isolates the finite-difference pipeline
        let stats = NormalizationStats::identity(d);
        let scores = metrics::episode_smoothness(&episode, &stats).unwrap();
        let states: Vec<Vec<f64>> = (0..t_len).map(|t| episode.states.row(t).to_vec()).collect();
        let (a, j, cov) = brute_force_smoothness(&states, episode.dt);
        for (ours, oracle) in [
            (scores.a_ep, a),
            (scores.j_ep, j),
            (scores.coverage, cov),
        ] {
            let rel = (ours - oracle).abs() / oracle.abs().max(1e-30);
            worst = worst.max(rel);
        }
    }
    let elapsed = started.elapsed();
    assert!(worst < 1e-9, "worst relative error {worst}");
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    println!(
        "[criterion 1] PASS metric oracle equivalence: worst rel err {worst:.2e}, {elapsed:?}"
    );
}

// ---------------------------------------------------------------------------
// criterion 2: polynomial exactness
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_polynomial_exactness() {
    let mut rng = ChaCha20Rng::seed_from_u64(22);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let t_len = rng.gen_range(8..60);
        let dt = [0.05, 0.1, 1.0][rng.gen_range(0..3)];
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        // quadratic: acceleration exactly 2 c2, jerk exactly 0
        let quad = Mat::from_fn(t_len, 1, |t, _| {
            let x = t as f64 * dt;
            c[0] + c[1] * x + c[2] * x * x
        });
        let p = metrics::kinematics(&quad, dt).unwrap();
        for r in 0..p.acceleration.rows() {
            let a_err = (p.acceleration.get(r, 0) - 2.0 * c[2]).abs();
            worst = worst.max(a_err / (2.0 * c[2]).abs().max(1.0));
            worst = worst.max(p.jerk.get(r, 0).abs() / 1.0_f64.max(c[2].abs()));
        }
        // cubic: jerk exactly 6 c3
        let cubic = Mat::from_fn(t_len, 1, |t, _| {
            let x = t as f64 * dt;
            c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x
        });
        let p = metrics::kinematics(&cubic, dt).unwrap();
        for r in 0..p.jerk.rows() {
            let j_err = (p.jerk.get(r, 0) - 6.0 * c[3]).abs();
            worst = worst.max(j_err / (6.0 * c[3]).abs().max(1.0));
        }
    }
    assert!(worst < 1e-9, "worst relative error {worst}");
    println!("[criterion 2] PASS polynomial exactness: worst rel err {worst:.2e}");
}

// ---------------------------------------------------------------------------
// criterion 3: pre-screen oracle
// ---------------------------------------------------------------------------

/// Brute-force sorted-intersection pre-screen.
fn brute_force_prescreen(
    records: &[(String, f64, f64, f64)],
    fraction: f64,
    coverage_min: f64,
) -> Vec<String> {
    let keep = (fraction * records.len() as f64).floor() as usize;
    let lowest = |key: usize| -> std::collections::BTreeSet<String> {
        let mut sorted: Vec<&(String, f64, f64, f64)> = records.iter().collect();
        sorted.sort_by(|x, y| {
            let (kx, ky) = match key {
                1 => (x.1, y.1),
                _ => (x.2, y.2),
            };
            kx.total_cmp(&ky).then_with(|| x.0.cmp(&y.0))
        });
        sorted.into_iter().take(keep).map(|r| r.0.clone()).collect()
    };
    let low_a = lowest(1);
    let low_j = lowest(2);
    records
        .iter()
        .filter(|r| r.3 >= coverage_min && low_a.contains(&r.0) && low_j.contains(&r.0))
        .map(|r| r.0.clone())
        .collect()
}

#[test]
fn criterion_3_prescreen_oracle() {
    let mut rng = ChaCha20Rng::seed_from_u64(33);
    for trial in 0..40 {
        let n = rng.gen_range(1..=1000);
        let fraction = [0.1, 0.2, 0.35][trial % 3];
        let coverage_min = 0.3;
        // coarse grids force plenty of ties
        let raw: Vec<(String, f64, f64, f64)> = (0..n)
            .map(|i| {
                (
                    format!("ep-{i:04}"),
                    (rng.gen_range(0..8) as f64) * 0.25,
                    (rng.gen_range(0..8) as f64) * 0.5,
                    if rng.gen_bool(0.9) { 1.0 } else { 0.0 },
                )
            })
            .collect();
        let mut records: Vec<QualityRecord> = raw
            .iter()
            .map(|(id, a, j, cov)| QualityRecord {
                a_ep: Some(*a),
                j_ep: Some(*j),
                coverage: Some(*cov),
                ..QualityRecord::new(id.clone())
            })
            .collect();
        let ours: Vec<String> =
            demoforge::manifest::prescreen(&mut records, fraction, coverage_min)
                .unwrap()
                .into_iter()
                .collect();
        let oracle = brute_force_prescreen(&raw, fraction, coverage_min);
        assert_eq!(ours, oracle, "trial {trial}, n {n}");
    }
    println!("[criterion 3] PASS pre-screen oracle: 40 corpora up to 1000 records, tie cases included");
}

// ---------------------------------------------------------------------------
// criterion 4: gradient fidelity
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_gradient_fidelity() {
    let mut worst: f64 = 0.0;

    // full transformer trunk
    let arch = TransformerArch::new(2, 8, 2);
    let mut params = ParamSet::new();
    let mut rng = ChaCha20Rng::seed_from_u64(44);
    layers::init_trunk(&mut params, &arch, &mut rng);
    let x = layers::trunc_normal(&mut rng, 5, 8, 0.7);
    let w = layers::trunc_normal(&mut rng, 5, 8, 0.7);
    let forward = |p: &ParamSet| -> f64 {
        let mut tape = Tape::new(p);
        let xn = tape.leaf(x.clone());
        let y = layers::trunk(&mut tape, p, xn, &arch);
        let wn = tape.leaf(w.clone());
        let wy = tape.mul(y, wn);
        let loss = tape.sum_all(wy);
        tape.scalar(loss)
    };
    let mut tape = Tape::new(&params);
    let xn = tape.leaf(x.clone());
    let y = layers::trunk(&mut tape, &params, xn, &arch);
    let wn = tape.leaf(w.clone());
    let wy = tape.mul(y, wn);
    let loss = tape.sum_all(wy);
    let grads = tape.backward(loss, 1.0).unwrap();
    worst = worst.max(max_relative_error(&params, &grads, forward));

    // full policy model through the weighted denoising loss
    let dims = PolicyDims {
        state_dim: 4,
        act_dim: 3,
        obs_dim: 5,
        instr_dim: 6,
        chunk_len: 4,
        diffusion_steps: 6,
    };
    let p_arch = TransformerArch::new(1, 8, 2);
    let p_params = init_policy_params(&p_arch, &dims, 4);
    let schedule = NoiseSchedule::linear(dims.diffusion_steps, 1e-4, 0.02).unwrap();
    let batch: Vec<TrainItem> = (0..2)
        .map(|i| TrainItem {
            input: PolicyInput {
                state: (0..4).map(|k| ((k + i) as f64 * 0.4).sin()).collect(),
                obs: (0..5).map(|k| (k as f64 * 0.3).cos()).collect(),
                instr: (0..6).map(|k| (k as f64 * 0.2).sin()).collect(),
            },
            chunk: Mat::from_fn(4, 3, |r, c| ((r * 3 + c + i) as f64 * 0.5).sin()),
            weight: 1.0 + i as f64 * 2.0,
        })
        .collect();
    let rng0 = ChaCha20Rng::seed_from_u64(45);
    let (_, g) = weighted_loss(
        &p_params,
        &p_arch,
        &dims,
        &schedule,
        &batch,
        &mut rng0.clone(),
        true,
    )
    .unwrap();
    worst = worst.max(max_relative_error(&p_params, &g.unwrap(), |probe| {
        weighted_loss(probe, &p_arch, &dims, &schedule, &batch, &mut rng0.clone(), false)
            .unwrap()
            .0
    }));

    // full discriminator through the PU objective
    let d_dims = DiscDims {
        state_dim: 4,
        act_dim: 3,
        obs_dim: 5,
        instr_dim: 6,
        chunk_len: 4,
    };
    let d_arch = TransformerArch::new(1, 8, 2);
    let norm = demoforge::diffusion::train::ActionNormalizer {
        mean: vec![0.0; 3],
        std: vec![1.0; 3],
    };
    let disc = Discriminator {
        arch: d_arch,
        dims: d_dims,
        params: init_disc_params(&d_arch, &d_dims, 5),
        normalizer: norm,
        train_seed: 0,
    };
    let mk_clip = |phase: f64, logpi: f64| Clip {
        episode_id: "g".into(),
        start: 0,
        state: (0..4).map(|k| (k as f64 + phase).sin()).collect(),
        chunk: Mat::from_fn(4, 3, |r, c| ((r * 3 + c) as f64 * 0.3 + phase).cos()),
        obs: (0..5).map(|k| (k as f64 * 0.7 + phase).sin()).collect(),
        instr: (0..6).map(|k| (k as f64 * 0.5).cos()).collect(),
        logpi_proxy: Some(logpi),
    };
    let pos = [mk_clip(0.1, 0.8), mk_clip(0.7, 0.3)];
    let unl = [mk_clip(0.4, -0.9)];
    let pos_refs: Vec<&Clip> = pos.iter().collect();
    let unl_refs: Vec<&Clip> = unl.iter().collect();
    let (_, dg) =
        demoforge::disc::train::pu_loss_with_grads(&disc, &pos_refs, &unl_refs, PU_ETA).unwrap();
    worst = worst.max(max_relative_error(&disc.params, &dg, |probe| {
        let probe_disc = Discriminator {
            params: probe.clone(),
            ..disc.clone()
        };
        let p: Vec<f64> = pos.iter().map(|c| probe_disc.score_clip(c).unwrap()).collect();
        let u: Vec<f64> = unl.iter().map(|c| probe_disc.score_clip(c).unwrap()).collect();
        pu_loss(&p, &u, PU_ETA).unwrap()
    }));

    assert!(worst < GRADCHECK_TOL, "worst relative error {worst}");
    println!("[criterion 4] PASS gradient fidelity: worst rel err {worst:.2e} (trunk, policy loss, PU loss)");
}

// ---------------------------------------------------------------------------
// criterion 5: DDPM marginal check
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_ddpm_marginal() {
    let schedule = NoiseSchedule::default_schedule();
    let mut rng = ChaCha20Rng::seed_from_u64(55);
    let (l, d) = (32, 6);
    let data_sigma = 2.0;
    for &n in &[1usize, 50, 100] {
        let abar = schedule.alpha_bar(n).unwrap();
        let expected = abar * data_sigma * data_sigma + (1.0 - abar);
        let draws = 10_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let count = (draws * l * d) as f64;
        for _ in 0..draws {
            let chunk = Mat::from_fn(l, d, |_, _| {
                rng.sample::<f64, _>(StandardNormal) * data_sigma
            });
            let noise = Mat::from_fn(l, d, |_, _| rng.sample(StandardNormal));
            let noised = forward_diffuse(&schedule, &chunk, n, &noise).unwrap();
            for &x in noised.data() {
                sum += x;
                sum_sq += x * x;
            }
        }
        let mean = sum / count;
        let var = sum_sq / count - mean * mean;
        // var estimator of a Gaussian: std ~ sigma^2 sqrt(2/m)
        let three_sigma = 3.0 * expected * (2.0 / count).sqrt();
        assert!(
            (var - expected).abs() < three_sigma,
            "n={n}: var {var} vs expected {expected} (3sigma {three_sigma})"
        );
        println!(
            "[criterion 5] n={n}: empirical var {var:.5} vs abar*Var(a)+(1-abar) = {expected:.5} (3sigma {three_sigma:.5})"
        );
    }
    println!("[criterion 5] PASS DDPM marginal check at n in {{1, 50, 100}}");
}

// ---------------------------------------------------------------------------
// criterion 6: PU-loss hand values
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_pu_loss_hand_values() {
    // hand arithmetic: 0.5*(-ln 0.9) + (-ln(1-0.1)) = 1.5 * 0.1053605...
    // (the criterion text's 0.158045 transcribes this value incorrectly;
    // the derivation itself fixes 0.15804077)
    let first = pu_loss(&[0.9], &[0.1], 0.5).unwrap();
    assert!(
        (first - 0.158040773487).abs() < 1e-6,
        "pos 0.9 / unl 0.1: {first}"
    );
    // 0.5*(-ln 0.5) + (-ln 0.5) = 1.5 ln 2
    let second = pu_loss(&[0.5], &[0.5], 0.5).unwrap();
    assert!((second - 1.039721).abs() < 1e-6, "both 0.5: {second}");
    println!("[criterion 6] PASS PU-loss hand values: {first:.9} and {second:.9}");
}

// ---------------------------------------------------------------------------
// criterion 7: discriminator separation (pipeline fixture, seed 0)
// ---------------------------------------------------------------------------

/// Held-out clips with proxies z-scored against the training table's
/// energy statistics.
fn heldout_clips(
    fx: &SeedFixture,
    policy: &Policy,
    schedule: &NoiseSchedule,
    table: &LogpiTable,
    corruption: &CorruptionSpec,
    group: &str,
    count: usize,
) -> Vec<Clip> {
    let energies: Vec<f64> = table.entries.iter().map(|e| e.energy).collect();
    let mean = energies.iter().sum::<f64>() / energies.len() as f64;
    let var = energies.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
        / energies.len() as f64;
    let denom = (var + ZSCORE_EPS).sqrt();

    let kinds = [TaskKind::PickPlace, TaskKind::Handover, TaskKind::BimanualLift];
    let mut clips = Vec::new();
    for i in 0..count {
        let kind = kinds[i % kinds.len()];
        let layout = derive_seed(fx.cfg.seed, "heldout-layout", i as u64);
        let spec = TaskSpec::new(kind, layout);
        let episode = generate_demo(
            &spec,
            corruption,
            derive_seed(fx.cfg.seed, "heldout-demo", i as u64),
            &format!("heldout-{group}-{i:03}"),
            Source::GeneratedCorrupted,
        )
        .unwrap();
        let obs = spec.obs_features();
        let instr = demoforge::diffusion::instruction_embedding(&episode.instruction);
        let starts = sample_clip_starts(
            episode.len(),
            fx.cfg.discriminator.clips_per_episode,
            fx.cfg.policy.chunk_len,
            derive_seed(fx.cfg.seed, "heldout-clips", i as u64),
        )
        .unwrap();
        for mut clip in clips_at(&episode, &starts, fx.cfg.policy.chunk_len, &obs, &instr) {
            let e = residual_energy(policy, schedule, &clip, &fx.cfg.discriminator.energy_steps)
                .unwrap();
            clip.logpi_proxy = Some(-(e - mean) / denom);
            clips.push(clip);
        }
    }
    clips
}

#[test]
fn criterion_7_discriminator_separation() {
    let fx = &fixtures()[0];
    assert!(
        fx.disc_train_time < Duration::from_secs(600),
        "discriminator training took {:?}",
        fx.disc_train_time
    );

    let policy = Policy::from_checkpoint(
        &demoforge::nn::checkpoint::load_checkpoint(&fx.wd.checkpoint_path("pretrained")).unwrap(),
    )
    .unwrap();
    let disc = Discriminator::from_checkpoint(
        &demoforge::nn::checkpoint::load_checkpoint(&fx.wd.checkpoint_path("discriminator"))
            .unwrap(),
    )
    .unwrap();
    let schedule = fx.cfg.schedule().unwrap();
    let table: LogpiTable = demoforge::jsonio::load(&fx.wd.logpi_path()).unwrap();

    let heavy_jitter = CorruptionSpec {
        jitter_std: vec![0.02, 0.02, 0.0, 0.02, 0.02, 0.0],
        ..CorruptionSpec::none()
    };
    let clean = heldout_clips(fx, &policy, &schedule, &table, &CorruptionSpec::none(), "clean", 30);
    let jitter = heldout_clips(fx, &policy, &schedule, &table, &heavy_jitter, "jitter", 30);

    let clean_scores: Vec<f64> = clean.iter().map(|c| disc.score_clip(c).unwrap()).collect();
    let jitter_scores: Vec<f64> = jitter.iter().map(|c| disc.score_clip(c).unwrap()).collect();
    let auc = ranking_auc(&clean_scores, &jitter_scores);
    assert!(auc >= 0.9, "held-out clean-vs-jitter AUC {auc}");

    // shuffled-label control: same pool, clip-level random partition
    let episodes = fx.wd.load_episodes(&fx.wd.load_manifest().unwrap()).unwrap();
    let mut pool = pipeline_clips(fx, &episodes, &table);
    let mut shuffle_rng = ChaCha20Rng::seed_from_u64(770);
    use rand::seq::SliceRandom;
    pool.shuffle(&mut shuffle_rng);
    let n_pos = fx
        .wd
        .load_manifest()
        .unwrap()
        .episodes
        .iter()
        .filter(|e| e.quality.in_high_quality)
        .count()
        * fx.cfg.discriminator.clips_per_episode;
    let (pseudo_pos, pseudo_unl) = pool.split_at(n_pos.max(1));
    let mut control = Discriminator::init(
        fx.cfg.disc_arch().unwrap(),
        disc.dims,
        policy.normalizer.clone(),
        771,
    );
    let cfg = DiscTrainConfig {
        steps: fx.cfg.discriminator.train.steps,
        batch_size: fx.cfg.discriminator.train.batch_size,
        optimizer: fx.cfg.discriminator.train.optimizer(),
        eta: fx.cfg.discriminator.eta,
    };
    train_discriminator(&mut control, pseudo_pos, pseudo_unl, &cfg).unwrap();
    let c_clean: Vec<f64> = clean.iter().map(|c| control.score_clip(c).unwrap()).collect();
    let c_jitter: Vec<f64> = jitter.iter().map(|c| control.score_clip(c).unwrap()).collect();
    let control_auc = ranking_auc(&c_clean, &c_jitter);
    assert!(
        (0.4..=0.6).contains(&control_auc),
        "shuffled-label control AUC {control_auc}"
    );
    println!(
        "[criterion 7] PASS discriminator separation: AUC {auc:.3} (>= 0.9), shuffled control {control_auc:.3}, training {:?}",
        fx.disc_train_time
    );
}

/// Rebuild the training clip pool from the stored table.
fn pipeline_clips(fx: &SeedFixture, episodes: &[Episode], table: &LogpiTable) -> Vec<Clip> {
    use std::collections::BTreeMap;
    let by_id: BTreeMap<&str, &Episode> =
        episodes.iter().map(|e| (e.episode_id.as_str(), e)).collect();
    let mut context: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    table
        .entries
        .iter()
        .map(|entry| {
            let episode = by_id[entry.episode_id.as_str()];
            let (obs, instr) = context
                .entry(entry.episode_id.as_str())
                .or_insert_with(|| {
                    let spec = TaskSpec::parse_task_id(&episode.task_id).unwrap();
                    (
                        spec.obs_features(),
                        demoforge::diffusion::instruction_embedding(&episode.instruction),
                    )
                })
                .clone();
            let mut clip = clips_at(episode, &[entry.start], fx.cfg.policy.chunk_len, &obs, &instr)
                .pop()
                .unwrap();
            clip.logpi_proxy = Some(entry.logpi);
            clip
        })
        .collect()
}

// ---------------------------------------------------------------------------
// criterion 8: quality-weighted vs vanilla post-training (Tab. V analog)
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_weighted_posttraining_direction() {
    let started = Instant::now();
    let fxs = fixtures();
    let tasks = [TaskKind::PickPlace, TaskKind::BimanualLift];
    let rollouts = 20;
    let mut task_wins = vec![0usize; tasks.len()];
    for fx in fxs.iter() {
        let weighted = stages::eval_checkpoint(&fx.cfg, &fx.wd, ARM_WEIGHTED, rollouts).unwrap();
        let vanilla = stages::eval_checkpoint(&fx.cfg, &fx.wd, ARM_VANILLA, rollouts).unwrap();
        for (t_idx, task) in tasks.iter().enumerate() {
            let w = weighted.iter().find(|r| r.task == task.name()).unwrap();
            let v = vanilla.iter().find(|r| r.task == task.name()).unwrap();
            let ok = w.mean_a_ep < v.mean_a_ep
                && w.mean_j_ep < v.mean_j_ep
                && w.success_rate >= v.success_rate;
            println!(
                "[criterion 8] seed {} {}: weighted A {:.4} J {:.4} SR {:.2} | vanilla A {:.4} J {:.4} SR {:.2} -> {}",
                fx.cfg.seed,
                task.name(),
                w.mean_a_ep,
                w.mean_j_ep,
                w.success_rate,
                v.mean_a_ep,
                v.mean_j_ep,
                v.success_rate,
                if ok { "win" } else { "loss" }
            );
            if ok {
                task_wins[t_idx] += 1;
            }
        }
    }
    let total: Duration =
        fxs.iter().map(|f| f.build_time).sum::<Duration>() + started.elapsed();
    for (t_idx, task) in tasks.iter().enumerate() {
        assert!(
            task_wins[t_idx] >= 2,
            "{}: weighted arm won only {}/3 paired seeds",
            task.name(),
            task_wins[t_idx]
        );
    }
    assert!(
        total < Duration::from_secs(3600),
        "experiment took {total:?} including fixture builds"
    );
    println!(
        "[criterion 8] PASS weighted post-training direction: wins {:?} of 3 seeds per task, total {:?}",
        task_wins, total
    );
}

// ---------------------------------------------------------------------------
// criterion 9: more clean data, non-decreasing success (Fig. 8 analog)
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_clean_fraction_scaling() {
    let fxs = fixtures();
    let tasks = [TaskKind::PickPlace, TaskKind::BimanualLift];
    let rollouts = 12;
    let regimes = [0.0, 0.5, 1.0];
    let mut task_wins = vec![0usize; tasks.len()];
    for fx in fxs.iter() {
        let manifest = fx.wd.load_manifest().unwrap();
        let episodes = fx.wd.load_episodes(&manifest).unwrap();
        let clean: Vec<&Episode> = episodes.iter().filter(|e| e.source.is_clean()).collect();
        let corrupted: Vec<&Episode> =
            episodes.iter().filter(|e| !e.source.is_clean()).collect();
        // per-regime dataset: all corrupted + the first r-fraction of clean;
        // uniform weights isolate the data-composition effect
        let mut success: Vec<Vec<f64>> = vec![Vec::new(); tasks.len()];
        for (r_idx, &r) in regimes.iter().enumerate() {
            let n_clean = (r * clean.len() as f64).round() as usize;
            let mut subset: Vec<Episode> =
                corrupted.iter().map(|e| (*e).clone()).collect();
            subset.extend(clean.iter().take(n_clean).map(|e| (*e).clone()));
            let arm = format!("regime-{r_idx}");
            stages::posttrain_on(&fx.cfg, &fx.wd, subset, false, &arm).unwrap();
            let rows = stages::eval_checkpoint(&fx.cfg, &fx.wd, &arm, rollouts).unwrap();
            for (t_idx, task) in tasks.iter().enumerate() {
                let row = rows.iter().find(|x| x.task == task.name()).unwrap();
                success[t_idx].push(row.success_rate);
            }
        }
        for (t_idx, task) in tasks.iter().enumerate() {
            let s = &success[t_idx];
            let ok = s[0] <= s[1] && s[1] <= s[2];
            println!(
                "[criterion 9] seed {} {}: success by clean fraction {:?} -> {}",
                fx.cfg.seed,
                task.name(),
                s,
                if ok { "non-decreasing" } else { "violated" }
            );
            if ok {
                task_wins[t_idx] += 1;
            }
        }
    }
    for (t_idx, task) in tasks.iter().enumerate() {
        assert!(
            task_wins[t_idx] >= 2,
            "{}: non-decreasing success in only {}/3 seeds",
            task.name(),
            task_wins[t_idx]
        );
    }
    println!(
        "[criterion 9] PASS clean-fraction scaling: non-decreasing in {:?} of 3 seeds per task",
        task_wins
    );
}

// ---------------------------------------------------------------------------
// criterion 10: end-to-end determinism
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_end_to_end_determinism() {
    let run = || {
        let mut cfg = PipelineConfig::mini();
        cfg.seed = 4242;
        let dir = tempfile::tempdir().unwrap();
        let wd = Workdir::new(dir.path());
        for stage in [
            "gen-corpus",
            "curate",
            "pretrain",
            "compute-logpi",
            "train-disc",
            "score",
            "posttrain",
            "posttrain-vanilla",
        ] {
            stages::run_stage(&cfg, &wd, stage, false).unwrap();
        }
        stages::run_stage(&cfg, &wd, "eval", true).unwrap();
        let jsonl = std::fs::read(dir.path().join("report.jsonl")).unwrap();
        let table = std::fs::read(dir.path().join("report.txt")).unwrap();
        let manifest = std::fs::read(dir.path().join("manifest.json")).unwrap();
        (jsonl, table, manifest)
    };
    let a = run();
    let b = run();
    assert_eq!(a.0, b.0, "report.jsonl must be byte-identical");
    assert_eq!(a.1, b.1, "report.txt must be byte-identical");
    assert_eq!(a.2, b.2, "manifest.json must be byte-identical");
    println!(
        "[criterion 10] PASS end-to-end determinism: two full runs, byte-identical reports ({} bytes)",
        a.0.len() + a.1.len()
    );
}

// ---------------------------------------------------------------------------
// criterion 11: parameter-count audit
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_parameter_count_audit() {
    let arch = demoforge::nn::layers::arch_preset("disc-paper").unwrap();
    assert_eq!((arch.layers, arch.hidden, arch.heads), (12, 512, 8));
    // paper-scale inputs: 36-dof state/action vectors, chunk length 32
    let dims = DiscDims {
        state_dim: 36,
        act_dim: 36,
        obs_dim: 12,
        instr_dim: 32,
        chunk_len: 32,
    };
    let params = init_disc_params(&arch, &dims, 0);
    let count = params.count();
    let target = 30_000_000.0;
    let deviation = (count as f64 - target).abs() / target;
    assert!(
        deviation <= 0.2,
        "parameter count {count} deviates {:.1}% from 30M",
        deviation * 100.0
    );
    println!(
        "[criterion 11] PASS parameter-count audit: disc-paper preset has {count} parameters ({:+.1}% of 30M)",
        (count as f64 / target - 1.0) * 100.0
    );
}
