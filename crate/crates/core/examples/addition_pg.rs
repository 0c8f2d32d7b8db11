//! The addition task trained by sampling: digits are drawn under a mask that
//! keeps the observed sum reachable, and masked off-policy REINFORCE corrects
//! for the masking with clipped importance weights.
//!
//! cargo run --release --example addition_pg [epochs]

use dproflog::optim::Optimizer;
use dproflog::tasks::addition::{
    addition_pg_epoch, addition_program, default_reinforce, evaluate_addition, generate_addition_dataset,
    init_classifier,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dproflog::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let mut data = generate_addition_dataset(2500, 2, 16, 0.5, 7)?;
    let test = data.split_off(500);
    let program = addition_program();
    let mut params = init_classifier(&program, 16, 16, 1)?;
    let mut opt = Optimizer::adam(3e-3);
    let mut reinforce = default_reinforce();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = std::time::Instant::now();
    for epoch in 1..=epochs {
        let e = addition_pg_epoch(
            &data.samples,
            &data.store,
            &mut params,
            &mut opt,
            &mut reinforce,
            32,
            4,
            &mut rng,
        )?;
        let m = evaluate_addition(&params, &data.store, &test)?;
        println!(
            "epoch {epoch:3} return {:.4} mean weight {:.4} test sum acc {:.4} digit acc {:.4} ({:.1?})",
            e.objective,
            e.mean_weight,
            m.sum_accuracy,
            m.digit_accuracy,
            start.elapsed()
        );
    }
    Ok(())
}
