//! Seeded speaking order.
//!
//! One ChaCha8 stream per session, seeded with `ChaCha8Rng::seed_from_u64(seed)`.
//! Round 1 is p1 followed by a shuffle of the other parties; every later round
//! is a shuffle of all parties. Shuffles are `rand`'s Fisher-Yates
//! (`SliceRandom::shuffle`), drawn from the same stream in round order.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Zero-based speaking order for each negotiation round.
pub fn speaking_orders(n_parties: usize, p1: usize, rounds: u32, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut orders = Vec::with_capacity(rounds as usize);
    for round in 1..=rounds {
        let order = if round == 1 {
            let mut rest: Vec<usize> = (0..n_parties).filter(|&p| p != p1).collect();
            rest.shuffle(&mut rng);
            std::iter::once(p1).chain(rest).collect()
        } else {
            let mut all: Vec<usize> = (0..n_parties).collect();
            all.shuffle(&mut rng);
            all
        };
        orders.push(order);
    }
    orders
}
