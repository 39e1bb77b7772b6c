//! Entity extraction and question generation on a single utterance, then a
//! seeded uniform pick among the candidate questions.

use aih::backends::{GazetteerNer, TemplateQuestions};
use aih::inquirer::Inquirer;
use aih::model::{Role, Utterance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "I am flying to New York on Monday to see Metallica with my friend Anna.".into());

    for e in GazetteerNer::default().extract_entities(&text) {
        println!("{:<12} {:<24} -> {}", e.label.as_str(), e.surface, TemplateQuestions::render(&e));
    }

    let u2k = Utterance::natural(Role::Bot2, 1, &text);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    match Inquirer::builtin().inquire(&u2k, &mut rng).expect("builtin NER does not fail") {
        Some(draft) => println!("\nselected: {}", draft.question()),
        None => println!("\nno entity, no inquiry"),
    }
}
