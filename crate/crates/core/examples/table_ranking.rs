//! Overall contradiction rates and the ranking from a published table of
//! pair rates (rows: partner, columns: evaluated bot).

use aih::metrics::{overall_rates, rank_bots, PairTable, RateGrid};
use aih::model::BotId;

fn main() {
    let bots: Vec<BotId> = ["BL", "PL", "DG", "DF"].iter().map(|b| BotId::new(*b).unwrap()).collect();
    let rows = vec![
        vec![0.431, 0.240, 0.324, 0.362],
        vec![0.431, 0.263, 0.293, 0.357],
        vec![0.425, 0.251, 0.344, 0.345],
        vec![0.427, 0.264, 0.344, 0.371],
    ];

    let table = PairTable::new("contradiction rate", bots.clone(), rows.iter().map(|r| r.iter().map(|&x| Some(x)).collect()).collect());
    println!("{}", table.to_text(3));

    let grid = RateGrid::from_rates(bots, &rows).expect("square table");
    let ranking = rank_bots(&overall_rates(&grid).expect("every cell defined"));
    for (place, bot) in ranking.order.iter().enumerate() {
        println!("{}. {bot} {:.4}", place + 1, ranking.overall.get(bot.as_str()).unwrap());
    }
}
