use flavorbench_core::agent::*;
use flavorbench_core::env::*;
use flavorbench_core::nn::*;
use flavorbench_core::rng::Rng;

#[test]
fn throughput() {
    let agent = AgentConfig {
        gamma: 0.99,
        step_size: 0.00025,
        batch_size: 32,
        learn_frequency: 4,
        target_sync_interval: 1000,
        frame_stack: 2,
        buffer_capacity: 50_000,
        schedule: EpsilonSchedule { eps_initial: 1.0, eps_final: 0.01, decay_span_frames: 50_000 },
        reg: RegularizationConfig::OFF,
        learn_start_factor: 10,
    };
    let settings = TrainSettings {
        agent,
        frame_skip: 1,
        sticky_prob: 0.25,
        total_frames: 30_000,
        checkpoint_interval: 10_000,
        log_interval: 1_000,
    };
    let arch = network_profile("desk-default", (4, 7, 9), 3).unwrap();
    let params = xavier_init::<f64>(&arch, &mut Rng::from_seed(1)).unwrap();
    let env = make_env(Flavour::new(Game::MiniCrossing, 0, 0), 3).unwrap();
    let t0 = std::time::Instant::now();
    let out = train(&settings, &arch, params, env, 7).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!(
        "30k frames in {:.2}s -> {:.0} frames/s; updates {} performed {}; episodes {}; last rows:",
        dt, 30_000.0 / dt, out.updates, out.updates_performed, out.episodes_completed
    );
    for row in out.log.rows.iter().rev().take(5).collect::<Vec<_>>().iter().rev() {
        println!("  frame {} eps {:.3} loss {:?} ret {:?} eps_done {}", row.frame, row.epsilon, row.loss_mean, row.episode_return_mean, row.episodes_completed);
    }
}
