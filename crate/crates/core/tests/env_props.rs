//! Environment soundness over many randomized episodes.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use costsearch::benchgen::{build_benchmark, BenchConfig};
use costsearch::cost::{action_cost, trajectory_return};
use costsearch::env::{run_episode, Action, EnvConfig, Episode};
use costsearch::policy::{Policy, RandomPolicy};
use costsearch::scene::{distance, SceneGraph, Task};

fn pool() -> Vec<(Arc<SceneGraph>, Arc<Task>)> {
    let config = BenchConfig {
        n_train_scenes: 10,
        n_test_scenes: 5,
        tasks_per_scene: 5,
        n_test_tasks: 20,
        ..BenchConfig::desk()
    };
    let bench = build_benchmark(&config).unwrap();
    bench.train_pairs().into_iter().chain(bench.test_pairs()).collect()
}

/// Random play with occasional malformed output, checking every step.
fn checked_episode(scene: &Arc<SceneGraph>, task: &Arc<Task>, env: &EnvConfig, seed: u64) {
    let (mut ep, mut obs) = Episode::reset(scene.clone(), task.clone(), *env, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
    let mut policy = RandomPolicy;
    let mut prev = ep.belief().remaining.clone();
    let mut agent = ep.belief().agent_location;
    let mut n_asks = 0;
    let mut summed = 0.0;
    while !ep.is_done() {
        assert!(prev.contains(&task.gt_target_id));
        let (res, expected) = if rng.gen_bool(0.05) {
            (ep.reject("noise").unwrap(), env.cost.c_format)
        } else {
            let action = policy.decide(&obs, &mut rng).unwrap().action.unwrap();
            let d = match &action {
                Action::Navigate { location } => Some(distance(scene, agent, *location).unwrap()),
                _ => None,
            };
            let price = action_cost(&action, n_asks, d, &env.cost).unwrap();
            let res = ep.step(&action).unwrap();
            if res.malformed.is_some() {
                (res, env.cost.c_format)
            } else {
                match action {
                    Action::Ask { .. } => n_asks += 1,
                    Action::Navigate { location } => agent = location,
                    _ => {}
                }
                (res, price)
            }
        };
        assert!((res.cost - expected).abs() < 1e-12, "step cost {} != {expected}", res.cost);
        summed += res.cost;
        assert_eq!(ep.belief().n_asks, n_asks);
        assert_eq!(ep.belief().agent_location, agent);
        let now = &ep.belief().remaining;
        assert!(!now.is_empty());
        assert!(now.iter().all(|id| prev.contains(id)), "candidate set grew");
        assert!(now.contains(&task.gt_target_id), "ground truth pruned");
        prev = now.clone();
        obs = res.observation;
    }
    assert!((ep.total_cost() - summed).abs() < 1e-9);
}

#[test]
fn belief_and_costs_stay_sound() {
    let env = EnvConfig::default();
    let pool = pool();
    let mut n = 0;
    for (i, (scene, task)) in pool.iter().enumerate() {
        for r in 0..(1000 / pool.len() + 1) as u64 {
            checked_episode(scene, task, &env, (i as u64) << 16 | r);
            n += 1;
        }
    }
    assert!(n >= 1000);
}

#[test]
fn logged_trajectories_reprice_and_replay() {
    let env = EnvConfig::default();
    let pool = pool();
    let mut n = 0;
    for (i, (scene, task)) in pool.iter().enumerate() {
        for r in 0..(1000 / pool.len() + 1) as u64 {
            let seed = 77 + ((i as u64) << 16 | r);
            let a = run_episode(&mut RandomPolicy, scene, task, &env, seed).unwrap();
            let b = run_episode(&mut RandomPolicy, scene, task, &env, seed).unwrap();
            assert_eq!(a, b, "same seed, different episode");
            let summed: f64 = a.steps.iter().map(|s| s.cost).sum();
            assert!((summed - a.total_cost).abs() < 1e-9);
            assert_eq!(trajectory_return(&a, &env.cost).unwrap(), a.return_value);
            n += 1;
        }
    }
    assert!(n >= 1000);
}
