//! Bundled synthetic dataset in the MovieLens file formats, small enough
//! for fast end-to-end tests.
//!
//! 50 users, 8 genres, 512 items. Most items list all eight genres, so a
//! user's training mix sits at the uniform distribution; every sixteenth
//! item lists only seven. Users divisible by three consume exactly one
//! seven-genre item (first in their history, so it always lands on the
//! train side of the split), which nudges their mix off uniform by a few
//! parts in ten thousand. That keeps the population spread strictly
//! positive while every user stays within 1e-6 KL of the typical
//! preference, the regime where an identity oracle must drive all audit
//! measures to zero. Most users additionally consume a balanced block of
//! eight seven-genre items (one per missing genre, summing back to an
//! exactly uniform contribution), so recommenders surface popular
//! off-uniform items to the users who skipped the block and predicted
//! mixes get real spread. Low ratings and duplicate timestamps are
//! sprinkled in to exercise binarization and tie-breaking.

use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TOY_SEED: u64 = 7;
const N_USERS: u32 = 50;
const N_ITEMS: u32 = 512;
const GENRES: [&str; 8] = [
    "Action", "Comedy", "Crime", "Drama", "Horror", "Romance", "Sci-Fi", "Thriller",
];
const AGE_CODES: [u8; 7] = [1, 18, 25, 35, 45, 50, 56];

fn is_seven_genre(item: u32) -> bool {
    item.is_multiple_of(16)
}

/// Writes `ratings.dat`, `movies.dat` and `users.dat` under `dir`.
pub fn write_toy_dataset(dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;

    let mut movies = String::new();
    for item in 1..=N_ITEMS {
        let listed: Vec<&str> = if is_seven_genre(item) {
            let missing = ((item / 16) % 8) as usize;
            GENRES
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != missing)
                .map(|(_, name)| *name)
                .collect()
        } else {
            GENRES.to_vec()
        };
        movies.push_str(&format!(
            "{item}::Synthetic Feature #{item} ({})::{}\n",
            1970 + item % 50,
            listed.join("|")
        ));
    }
    fs::write(dir.join("movies.dat"), movies)?;

    let mut users = String::new();
    for u in 1..=N_USERS {
        let gender = if u % 2 == 0 { "F" } else { "M" };
        let age = AGE_CODES[(u as usize - 1) % AGE_CODES.len()];
        users.push_str(&format!("{u}::{gender}::{age}::{}::48{:03}\n", u % 21, u));
    }
    fs::write(dir.join("users.dat"), users)?;

    let omni_items: Vec<u32> = (1..=N_ITEMS).filter(|&i| !is_seven_genre(i)).collect();
    let mut ratings = String::new();
    for u in 1..=N_USERS {
        let mut rng = ChaCha8Rng::seed_from_u64(TOY_SEED.wrapping_add(u as u64));
        let mut pool = omni_items.clone();
        pool.shuffle(&mut rng);

        let deficient = (u % 3 == 0).then(|| 16 * (u / 3));
        let n_pos = if deficient.is_some() {
            400
        } else {
            300 + (u as usize * 37) % 61
        };

        let mut positives: Vec<u32> = Vec::with_capacity(n_pos + 8);
        if let Some(item) = deficient {
            positives.push(item);
        }
        if u % 5 != 0 {
            // ids 384..=496 step 16 miss each genre exactly once, so the
            // block sums to a uniform contribution. Consumed by 80% of
            // users, these items outrank ordinary all-genre items for the
            // users who skipped them and pull predicted mixes off uniform.
            positives.extend((0..8).map(|g| 384 + 16 * g));
        }
        let fill = n_pos - positives.len().min(n_pos);
        positives.extend(pool.drain(..fill));

        let base_ts = 1_000_000_000 + u as i64 * 100_000;
        let mut ts = base_ts;
        for (j, &item) in positives.iter().enumerate() {
            // every 11th pair shares a timestamp to exercise tie-breaking
            if j % 11 != 10 {
                ts += 7;
            }
            let rating = 4 + (u as usize + j) % 2;
            ratings.push_str(&format!("{u}::{item}::{rating}::{ts}\n"));
        }
        // a handful of sub-threshold ratings that preprocessing must drop
        for (j, item) in pool.drain(..6).enumerate() {
            let rating = 1 + (u as usize + j) % 3;
            ts += 7;
            ratings.push_str(&format!("{u}::{item}::{rating}::{ts}\n"));
        }
    }
    fs::write(dir.join("ratings.dat"), ratings)?;
    Ok(())
}
