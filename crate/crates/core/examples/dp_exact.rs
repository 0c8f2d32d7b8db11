//! Exact success probabilities by dynamic programming over the goal graph,
//! checked against brute-force enumeration, followed by a few full-batch
//! gradient steps on the labeled queries.
//!
//! cargo run --example dp_exact

use dproflog::dp::{dp_train_epoch, solve, DpConfig, LabeledQuery};
use dproflog::logic::{parse_program, parse_query};
use dproflog::optim::Optimizer;
use dproflog::scorer::{FeatureStore, NeuralPolicy, ScorerConfig, ScorerParams};
use dproflog::sld::{success_probability_bruteforce, EnumerateOptions};

fn main() -> dproflog::Result<()> {
    let mut program = parse_program(
        "locIn(X,Y) :- neighOf(X,Z), locIn(Z,Y).
         neighOf(it,fr). neighOf(fr,it).
         locIn(fr,eu). locIn(tr,gr). locIn(gr,eu).",
    )?;
    let data = vec![
        LabeledQuery::new(parse_query("locIn(it,eu)", &mut program)?, true),
        LabeledQuery::new(parse_query("locIn(fr,eu)", &mut program)?, true),
        LabeledQuery::new(parse_query("locIn(eu,it)", &mut program)?, false),
    ];
    let config = ScorerConfig {
        dim: 8,
        init_std: 0.5,
        ..Default::default()
    };
    let mut params = ScorerParams::new(&program, config, 1)?;
    let store = FeatureStore::new(0);
    let cfg = DpConfig::new(6);

    {
        let policy = NeuralPolicy::new(&params, &store);
        for q in &data {
            let table = solve(&q.goal, &program, &policy, &cfg)?;
            let bf = success_probability_bruteforce(&q.goal, &program, &policy, 6, &EnumerateOptions::mdp())?;
            println!(
                "{:<16} dp {:.12} brute force {:.12} states {} goals {} cyclic {}",
                program.goal_to_string(&q.goal),
                table.success_probability(),
                bf,
                table.states(),
                table.reachable_goals(),
                table.is_cyclic()
            );
        }
    }

    let mut opt = Optimizer::adam(0.05);
    for epoch in 1..=30 {
        let s = dp_train_epoch(&data, &program, &mut params, &store, &mut opt, &cfg)?;
        if epoch % 5 == 0 {
            println!(
                "epoch {epoch:2} loss {:+.4} mean p(pos) {:.4} mean p(neg) {:.4} |grad| {:.4}",
                s.loss, s.mean_p_pos, s.mean_p_neg, s.grad_norm
            );
        }
    }
    Ok(())
}
