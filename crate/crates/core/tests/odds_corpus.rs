use oddsmix::odds::{basic_normalize, estimate_shin_z, OddsTriple};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus(n: usize, seed: u64) -> Vec<OddsTriple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let raw: [f64; 3] = [rng.random_range(0.05..1.0), rng.random_range(0.05..1.0), rng.random_range(0.05..1.0)];
            let s: f64 = raw.iter().sum();
            let beta = rng.random_range(1.01..1.15);
            OddsTriple::new(raw[0] / s * beta, raw[1] / s * beta, raw[2] / s * beta)
        })
        .collect()
}

#[test]
fn shin_boosts_the_favourite() {
    let triples = corpus(1000, 17);
    let mut boosted = 0;
    for o in &triples {
        let fav = (0..3).max_by(|&i, &j| o.as_array()[i].total_cmp(&o.as_array()[j])).unwrap();
        let shin = estimate_shin_z(*o).unwrap().probs.as_array();
        let basic = basic_normalize(*o).unwrap().as_array();
        if shin[fav] >= basic[fav] - 1e-9 {
            boosted += 1;
        }
    }
    println!("favourite boosted in {boosted}/1000");
    assert!(boosted >= 950);
}

#[test]
fn shin_trims_the_draw_when_one_side_is_favoured() {
    let triples: Vec<OddsTriple> = corpus(5000, 18)
        .into_iter()
        .filter(|o| {
            let p = basic_normalize(*o).unwrap();
            // Quoted draw prices rarely go above one in three.
            p.win.max(p.loss) >= 0.5 && p.draw <= 0.32
        })
        .collect();
    assert!(triples.len() >= 200);
    let trimmed = triples
        .iter()
        .filter(|o| estimate_shin_z(**o).unwrap().probs.draw <= basic_normalize(**o).unwrap().draw + 1e-12)
        .count();
    println!("draw trimmed in {trimmed}/{}", triples.len());
    assert!(trimmed as f64 >= 0.95 * triples.len() as f64);
}
