//! Dev harness: probe policy learning quality across training settings.
//! Not part of the pipeline; kept for tuning experiments.

use demoforge::diffusion::model::PolicyDims;
use demoforge::diffusion::sample::PolicyController;
use demoforge::diffusion::train::{
    train_policy, ActionNormalizer, ChunkSource, Policy, PolicyTrainConfig,
};
use demoforge::diffusion::{NoiseSchedule, INSTRUCTION_DIM};
use demoforge::episode::{Episode, Source};
use demoforge::metrics;
use demoforge::nn::adamw::{AdamWConfig, OptimizerState};
use demoforge::nn::layers::TransformerArch;
use demoforge::sim::corruption::{generate_demo, CorruptionSpec};
use demoforge::sim::rollout::rollout_policy;
use demoforge::sim::task::{TaskKind, TaskSpec, OBS_FEATURES_LEN};
use demoforge::sim::world::TOY_DIMS;
use demoforge::util::derive_seed;

fn gen_clean(kind: TaskKind, n: usize, seed_base: u64) -> Vec<Episode> {
    (0..n)
        .map(|i| {
            let spec = TaskSpec::new(kind, derive_seed(seed_base, "lay", i as u64));
            generate_demo(
                &spec,
                &CorruptionSpec::none(),
                derive_seed(seed_base, "demo", i as u64),
                &format!("clean-{}-{i:04}", kind.name()),
                Source::GeneratedExpert,
            )
            .unwrap()
        })
        .collect()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(700);
    let layers: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2);
    let hidden: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(64);
    let lr: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(6e-4);
    let n_demos: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(67);
    let multitask: bool = args.get(6).map(|s| s == "multi").unwrap_or(false);

    let kinds: Vec<TaskKind> = if multitask {
        vec![TaskKind::PickPlace, TaskKind::Handover, TaskKind::BimanualLift]
    } else {
        vec![TaskKind::PickPlace]
    };
    let mut episodes = Vec::new();
    for &k in &kinds {
        episodes.extend(gen_clean(k, n_demos, 1000 + k as u64));
    }
    let stats = metrics::compute_normalization_stats(&episodes).unwrap();
    let normalizer = ActionNormalizer::fit(episodes.iter()).unwrap();
    let source = ChunkSource::prepare(episodes, None, 32).unwrap();
    let arch = TransformerArch::new(layers, hidden, 4);
    let dims = PolicyDims {
        state_dim: TOY_DIMS,
        act_dim: TOY_DIMS,
        obs_dim: OBS_FEATURES_LEN,
        instr_dim: INSTRUCTION_DIM,
        chunk_len: 32,
        diffusion_steps: 100,
    };
    let mut policy = Policy::init(arch, dims, normalizer, 7);
    let mut opt = OptimizerState::zeros(&policy.params);
    let cfg = PolicyTrainConfig {
        steps,
        batch_size: 32,
        optimizer: AdamWConfig {
            lr,
            ..AdamWConfig::default()
        },
        warmup_steps: 0,
    };
    let schedule = NoiseSchedule::default_schedule();
    let t0 = std::time::Instant::now();
    let curve = train_policy(&mut policy, &mut opt, &schedule, &source, &cfg, false, 0).unwrap();
    println!(
        "train {} steps in {:?}: loss {:.2} -> {:.2}",
        steps,
        t0.elapsed(),
        curve.first().unwrap().loss,
        curve.last().unwrap().loss
    );

    for (label, base) in [("train-layouts", 1000 + kinds[0] as u64), ("fresh-layouts", 999_999)] {
        for &kind in &kinds {
            let mut controller = PolicyController {
                policy: policy.clone(),
                schedule: schedule.clone(),
            };
            let mut success = 0;
            let mut a_sum = 0.0;
            let mut j_sum = 0.0;
            let n = 15;
            for i in 0..n {
                let layout = if label == "train-layouts" {
                    derive_seed(1000 + kind as u64, "lay", i as u64)
                } else {
                    derive_seed(base, "lay", 777 + i as u64)
                };
                let spec = TaskSpec::new(kind, layout);
                let out =
                    rollout_policy(&mut controller, &spec, &stats, derive_seed(5, "r", i as u64))
                        .unwrap();
                if out.success && out.collision_free {
                    success += 1;
                }
                a_sum += out.a_ep;
                j_sum += out.j_ep;
            }
            println!(
                "{label} {}: success {}/{} | mean A {:.3} J {:.3}",
                kind.name(),
                success,
                n,
                a_sum / n as f64,
                j_sum / n as f64
            );
        }
    }
}
