//! Parses a small program, lists the resolvents of a query and enumerates
//! every derivation with its probability under the uniform transition model.
//!
//! cargo run --example sld_basics

use dproflog::logic::{parse_program, parse_query};
use dproflog::sld::{
    candidate_next_goals, derivation_probability, enumerate_derivations, CandidateOptions, EnumerateOptions,
    UniformModel,
};

fn main() -> dproflog::Result<()> {
    let mut program = parse_program(
        "locIn(X,Y) :- neighOf(X,Z), locIn(Z,Y).
         neighOf(it,fr).
         neighOf(fr,it).
         locIn(fr,eu).
         locIn(tr,gr).
         locIn(gr,eu).",
    )?;
    print!("{}", program.to_source());
    let query = parse_query("locIn(it,eu)", &mut program)?;

    println!("\nresolvents of {}:", program.goal_to_string(&query));
    for c in &candidate_next_goals(&query, &program, &CandidateOptions::with_false()).candidates {
        println!("  {:<10} -> {}", c.action.label(), program.goal_to_string(&c.next_goal));
    }

    println!("\nderivations within 6 steps:");
    let mut total = 0.0;
    for d in enumerate_derivations(&query, &program, 6, &EnumerateOptions::mdp())? {
        let p = derivation_probability(&d, &UniformModel)?;
        let path: Vec<String> = d.actions().map(|a| a.label()).collect();
        println!("  {:?} p={p:.5} {}", d.outcome, path.join(" "));
        if d.is_success() {
            total += p;
        }
    }
    println!("success probability {total:.6}");
    Ok(())
}
