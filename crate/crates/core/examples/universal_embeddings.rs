//! Builds explicit embeddings that make the dot-product softmax reproduce an
//! arbitrary transition distribution on a derivation tree.
//!
//! cargo run --example universal_embeddings

use dproflog::scorer::{construct_universal_embeddings, tree_transition_probabilities, DerivationTree};

fn main() -> dproflog::Result<()> {
    let mut tree = DerivationTree::new();
    let a = tree.add_child(0, 0.7)?;
    let b = tree.add_child(0, 0.2)?;
    tree.add_child(0, 0.1)?;
    tree.add_child(a, 0.5)?;
    tree.add_child(a, 0.5)?;
    tree.add_child(b, 1.0)?;
    tree.validate(1e-12)?;

    let emb = construct_universal_embeddings(&tree, tree.len())?;
    for (i, e) in emb.iter().enumerate() {
        let row: Vec<String> = e.iter().map(|v| format!("{v:6.3}")).collect();
        println!("e{i} [{}]", row.join(" "));
    }
    for node in 0..tree.len() {
        let kids = tree.children(node);
        if kids.is_empty() {
            continue;
        }
        let probs = tree_transition_probabilities(&tree, &emb, node)?;
        for (c, p) in kids.iter().zip(probs) {
            println!(
                "p({c} | {node}) target {:.3} softmax {p:.12}",
                tree.edge_probability(*c)
            );
        }
    }
    Ok(())
}
