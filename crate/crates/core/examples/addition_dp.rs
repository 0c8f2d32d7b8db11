//! Learns to read digits from the sums of two-digit numbers alone, using the
//! exact carry recursion for the sum probability.
//!
//! cargo run --release --example addition_dp [epochs] [digits]

use dproflog::optim::Optimizer;
use dproflog::tasks::addition::{
    addition_dp_epoch, addition_program, evaluate_addition, generate_addition_dataset, init_classifier,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dproflog::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let epochs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let n = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2);
    let mut data = generate_addition_dataset(2500, n, 16, 0.5, 7)?;
    let test = data.split_off(500);
    let program = addition_program();
    let mut params = init_classifier(&program, 16, 16, 1)?;
    let mut opt = Optimizer::adam(3e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = std::time::Instant::now();
    for epoch in 1..=epochs {
        let p = addition_dp_epoch(&data.samples, &data.store, &mut params, &mut opt, 32, &mut rng)?;
        let m = evaluate_addition(&params, &data.store, &test)?;
        println!(
            "epoch {epoch:3} mean p(sum) {p:.4} test sum acc {:.4} digit acc {:.4} ({:.1?})",
            m.sum_accuracy,
            m.digit_accuracy,
            start.elapsed()
        );
    }
    Ok(())
}
