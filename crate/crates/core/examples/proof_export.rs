//! Finds the most probable proof of a recursive kinship query and exports it
//! as an indented tree and as JSON, then replays it against the program.
//!
//! cargo run --example proof_export

use dproflog::logic::{parse_program, parse_query};
use dproflog::sld::UniformModel;
use dproflog::tasks::kg::KINSHIP_RULES;
use dproflog::tasks::{beam_search, Proof};

fn main() -> dproflog::Result<()> {
    let source = format!("{KINSHIP_RULES}brother(2260, 2252).\nsister(2262, 2260).\nuncle(2266, 2262).\n");
    let mut program = parse_program(&source)?;
    let query = parse_query("uncle(2266, 2252)", &mut program)?;

    let found = beam_search(&query, &program, &UniformModel, 6, 8, &[])?;
    let Some((derivation, p)) = found.first() else {
        println!("no proof within 6 steps");
        return Ok(());
    };
    let proof = Proof::from_derivation(derivation, &program)?.with_probability(*p);
    print!("{}", proof.to_text());
    println!("{}", proof.to_json()?);

    let reread = Proof::from_text(&proof.to_text(), &program)?;
    reread.check(&query, &program)?;
    println!("replayed to true");
    Ok(())
}
