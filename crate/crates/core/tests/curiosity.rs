use cmrl::controllers::{run_trial, Agent};
use cmrl::curiosity::{probe, CuriosityConfig};
use cmrl::env::{Env, EnvSpec, Observation};
use cmrl::history::{HistoryStore, StepRecord};
use cmrl::orchestrator::{Run, RunConfig};
use cmrl::rng::stream;
use cmrl::world_model::WorldModel;

/// Heads for one room and stays there.
struct Stay(usize);

impl Agent for Stay {
    fn begin(&mut self) -> cmrl::Result<()> {
        Ok(())
    }

    fn act(&mut self, _: &Observation, _: &mut dyn rand::RngCore) -> cmrl::Result<usize> {
        Ok(self.0)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    0.5 * (v[(v.len() - 1) / 2] + v[v.len() / 2])
}

#[test]
fn noise_trials_earn_almost_nothing_next_to_regular_ones() {
    let spec = EnvSpec::two_room().with_seed(21);
    let mut env = Env::new(&spec).unwrap();
    let defaults = RunConfig::default();
    let model = WorldModel::new(
        env.dims(),
        defaults.model_hidden,
        defaults.model_arch,
        defaults.coding,
        &mut stream(21, "model", &[]),
    )
    .unwrap();
    let cfg = CuriosityConfig {
        enabled: true,
        ..CuriosityConfig::default()
    };
    let mut reward = |action: usize| -> Vec<f64> {
        (0..20u64)
            .map(|k| {
                let run = run_trial(&mut env, 100 + k, &mut Stay(action), &mut stream(0, "stay", &[])).unwrap();
                probe(&model, &run.records, &cfg).unwrap().intrinsic
            })
            .collect()
    };
    let regular = median(reward(0));
    let noise = median(reward(1));
    assert!(regular > 0.0);
    assert!(noise < 0.05 * regular, "noise {noise} vs regular {regular}");
}

#[test]
fn intrinsic_reward_stays_out_of_what_the_model_sees() {
    let cfg = RunConfig::parse(
        "env.name = two_room\ncontroller.variant = C2\ncuriosity.enabled = true\n\
         run.phases = 2\nrun.stop_on_optimal = false\nrun.seed = 4\n",
    )
    .unwrap();
    let mut run = Run::new(cfg).unwrap();
    run.run_to_end().unwrap();
    let spans = run.history.trials().to_vec();
    let intrinsic: f64 = spans.iter().map(|s| run.history.intrinsic_return(s).unwrap().abs()).sum();
    assert!(intrinsic > 0.0);

    // Zeroing every intrinsic entry leaves the code length untouched.
    let mut scrubbed = HistoryStore::new(3, 1, 3, run.history.seed());
    for s in &spans {
        let records = run.history.replay(s).unwrap().iter().map(|r| StepRecord { intrinsic: 0.0, ..r.clone() }).collect();
        scrubbed.append_trial(&s.task_tag, records).unwrap();
    }
    let a = run.model.code_length(&run.history, &spans).unwrap();
    let b = run.model.code_length(&scrubbed, scrubbed.trials()).unwrap();
    assert_eq!(a, b);
    // Reward channels hold only what the environment pays: the step cost, or
    // nothing before the first action.
    let cost = run.env_spec.param("step_cost").unwrap();
    assert!(run.history.records().iter().all(|r| r.r_vec[0] == 0.0 || (r.r_vec[0] + cost).abs() < 1e-12));
}
