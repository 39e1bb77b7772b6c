//! Scores (premise, hypothesis) pairs with the builtin contradiction scorer
//! and thresholds them.

use aih::backends::RuleNli;
use aih::recognition::Threshold;

fn main() {
    let pairs = [
        ("I have two cats at home.", "I do not have any cats."),
        ("I have two cats at home.", "Yes, two cats."),
        ("I would love to visit Paris.", "I have never been to Paris."),
        ("My favorite band is Metallica.", "I love Metallica."),
        ("I work on Monday.", "The weather is nice."),
    ];
    let tau = Threshold::default();
    println!("tau = {}", tau.value());
    for (premise, hypothesis) in pairs {
        let y = RuleNli::score(premise, hypothesis).expect("non-empty inputs");
        let mark = if tau.decide(y) { "contradiction" } else { "consistent" };
        println!("{y:.2}  {mark:<13}  {premise} / {hypothesis}");
    }
}
