//! Steps through the resolution environment by hand and then samples a few
//! episodes under the uniform policy (all-zero scorer parameters), printing one trace record per step.
//!
//! cargo run --example mdp_episode

use std::sync::Arc;

use dproflog::logic::{parse_program, parse_query};
use dproflog::mdp::{Env, EnvAction};
use dproflog::pg::sample_masked;
use dproflog::scorer::{FeatureStore, NeuralPolicy, ScorerConfig, ScorerParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dproflog::Result<()> {
    let mut program = parse_program(
        "locIn(X,Y) :- neighOf(X,Z), locIn(Z,Y).
         neighOf(it,fr). neighOf(fr,it).
         locIn(fr,eu).",
    )?;
    let query = parse_query("locIn(it,eu)", &mut program)?;
    let env = Env::new(&program, 8);

    // the proof, one chosen clause at a time
    let mut s = env.reset(&query, true, 0)?;
    for choice in [0, 0, 0] {
        let r = env.step(&s, EnvAction::Choose(choice))?;
        println!(
            "{} -> {} reward {}",
            program.goal_to_string(&s.goal),
            program.goal_to_string(&r.next_state.goal),
            r.reward
        );
        s = r.next_state;
    }

    let params = ScorerParams::zeros(
        &program,
        ScorerConfig {
            dim: 8,
            ..Default::default()
        },
    )?;
    let store = FeatureStore::new(0);
    let policy = NeuralPolicy::new(&params, &store);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    // sample until a proof is found under each label; print those traces
    let mut pending = vec![true, false];
    let mut episodes = 0;
    while !pending.is_empty() && episodes < 1000 {
        let label = pending[episodes % pending.len()];
        episodes += 1;
        let mut s = env.reset(&query, label, episodes)?;
        let mut trace = Vec::new();
        let reward = loop {
            let cands = Arc::new(env.legal_actions(&s));
            let dist = policy.distribution(&cands)?;
            let (k, _) = sample_masked(&dist.log_probs, None, &mut rng).expect("non-empty candidate set");
            let r = env.step_index(&s, &cands, k)?;
            trace.push(env.trace_record(&s, &cands, k, &r));
            if r.done {
                break r.reward;
            }
            s = r.next_state;
        };
        if reward != 0.0 {
            for t in &trace {
                println!("{t}");
            }
            println!("  label {label} return {reward}");
            pending.retain(|l| *l != label);
        }
    }
    println!("{episodes} episodes sampled");
    Ok(())
}
