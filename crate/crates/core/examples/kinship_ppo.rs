//! Trains a clause-selection policy with PPO on a small synthetic kinship
//! graph and ranks held-out `uncle` facts against 20 corruptions each.
//!
//! cargo run --release --example kinship_ppo [iterations] [seed]

use dproflog::scorer::{FeatureStore, NeuralPolicy};
use dproflog::sld::UniformModel;
use dproflog::tasks::kg::{generate_kinship, rank_metrics};
use dproflog::tasks::kg_train::{
    evaluate_kg, mean_positive_return, probability_scorer, rank_split, train_kg, training_queries, KgConfig,
};
use dproflog::tasks::{beam_search, Proof};

fn main() -> dproflog::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let iterations = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = KgConfig {
        iterations,
        seed,
        ..Default::default()
    };
    let ds = generate_kinship(50, 0.15, seed)?.dataset()?;
    println!(
        "entities {} train {} valid {} test {}",
        ds.entities.len(),
        ds.train.len(),
        ds.valid.len(),
        ds.test.len()
    );
    let uniform = rank_split(
        &ds,
        &ds.test,
        &cfg,
        probability_scorer(&ds, &UniformModel, cfg.max_depth, None, 0.0),
    )?;
    println!("uniform policy mrr {:.4}", rank_metrics(&uniform, &[1])?.mrr);

    let (_, queries) = training_queries(&ds, &cfg)?;
    let store = FeatureStore::new(0);
    let start = std::time::Instant::now();
    let model = train_kg(&ds, &cfg, |it, m| {
        if it.iteration % 5 == 4 {
            let policy = NeuralPolicy::new(&m.params, &store);
            let ret = mean_positive_return(&ds.program, &queries, &policy, cfg.max_depth)?;
            let (metrics, _) = evaluate_kg(&ds, &ds.valid, &m.params, &store, &cfg, None)?;
            println!(
                "iter {:3} success {:.3} entropy {:.3} pos-return {:.4} valid-mrr {:.4} ({:.1?})",
                it.iteration + 1,
                it.stats.success_rate,
                it.stats.entropy,
                ret,
                metrics.mrr,
                start.elapsed()
            );
        }
        Ok(())
    })?;
    let (metrics, results) = evaluate_kg(&ds, &ds.test, &model.params, &store, &cfg, None)?;
    print!("{}", metrics.report());

    let policy = NeuralPolicy::new(&model.params, &store);
    if let Some((t, r)) = ds.test.iter().zip(&results).find(|(_, r)| r.true_score > 0.0) {
        let q = ds.labeled(t, true)?;
        println!("best proof of {t} (score {:.4}):", r.true_score);
        let found = beam_search(&q.goal, &ds.program, &policy, cfg.max_depth, 8, &q.banned)?;
        if let Some((d, p)) = found.first() {
            let proof = Proof::from_derivation(d, &ds.program)?.with_probability(*p);
            print!("{}", proof.to_text());
        }
    }
    Ok(())
}
