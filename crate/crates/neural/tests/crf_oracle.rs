//! The forward algorithm and Viterbi against enumeration of all 3^n paths.

use ontoshop_neural::activation::log_sum_exp;
use ontoshop_neural::crf::{is_valid_path, Crf, Emission, NUM_TAGS};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn all_paths(n: usize) -> Vec<Vec<usize>> {
    (0..NUM_TAGS.pow(n as u32))
        .map(|mut code| {
            let mut path = vec![0; n];
            for slot in path.iter_mut().rev() {
                *slot = code % NUM_TAGS;
                code /= NUM_TAGS;
            }
            path
        })
        .collect()
}

/// Score written out from the definition, independent of `Crf` helpers.
fn brute_score(crf: &Crf, e: &[Emission], path: &[usize]) -> f64 {
    if !is_valid_path(path) {
        return f64::NEG_INFINITY;
    }
    let a = |i: usize, j: usize| crf.transitions.data[i * NUM_TAGS + j];
    let mut s = crf.start.data[path[0]] + e[0][path[0]];
    for t in 1..path.len() {
        s = s + a(path[t - 1], path[t]) + e[t][path[t]];
    }
    s + crf.end.data[path[path.len() - 1]]
}

/// Best path; among equal scores the one whose reversed tag tuple is
/// smallest, matching the lower-index backtrack tie-break.
fn brute_argmax(crf: &Crf, e: &[Emission]) -> (Vec<usize>, f64) {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for path in all_paths(e.len()) {
        let s = brute_score(crf, e, &path);
        let better = match &best {
            None => true,
            Some((bp, bs)) => {
                s > *bs || (s == *bs && path.iter().rev().lt(bp.iter().rev()))
            }
        };
        if better {
            best = Some((path, s));
        }
    }
    best.expect("at least one path")
}

fn brute_log_partition(crf: &Crf, e: &[Emission]) -> f64 {
    log_sum_exp(all_paths(e.len()).iter().map(|p| brute_score(crf, e, p)))
}

fn random_emissions(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Emission> {
    (0..n)
        .map(|_| std::array::from_fn(|_| rng.random_range(-scale..=scale)))
        .collect()
}

#[test]
fn two_hundred_draws_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let crf = Crf::random(2.0, &mut rng);
        for n in 1..=5 {
            let e = random_emissions(&mut rng, n, 3.0);
            let (path, score) = crf.viterbi(&e).unwrap();
            let (bp, bs) = brute_argmax(&crf, &e);
            assert_eq!(path, bp);
            assert!((score - bs).abs() < 1e-9);
            let z = crf.log_partition(&e).unwrap();
            assert!((z - brute_log_partition(&crf, &e)).abs() < 1e-8);
        }
    }
}

#[test]
fn ties_break_towards_lower_tags() {
    let crf = Crf::zeros();
    for n in 1..=5 {
        let e = vec![[0.0; NUM_TAGS]; n];
        assert_eq!(crf.viterbi(&e).unwrap().0, brute_argmax(&crf, &e).0);
        assert_eq!(crf.viterbi(&e).unwrap().0, vec![0; n]);
    }
    // Equal emissions: every valid path ties.
    let e = vec![[1.0, 1.0, 1.0]; 3];
    assert_eq!(crf.viterbi(&e).unwrap().0, brute_argmax(&crf, &e).0);
}

#[test]
fn path_probabilities_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=5 {
        let crf = Crf::random(1.5, &mut rng);
        let e = random_emissions(&mut rng, n, 2.0);
        let total: f64 = all_paths(n)
            .iter()
            .filter(|p| is_valid_path(p))
            .map(|p| crf.log_likelihood(&e, p).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-8);
    }
}

proptest! {
    #[test]
    fn viterbi_dominates_any_valid_path(seed in 0u64..10_000, n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let crf = Crf::random(2.0, &mut rng);
        let e = random_emissions(&mut rng, n, 3.0);
        let (path, best) = crf.viterbi(&e).unwrap();
        prop_assert!(is_valid_path(&path));
        let mut other: Vec<usize> = (0..n).map(|_| rng.random_range(0..NUM_TAGS)).collect();
        for t in 0..n {
            if !is_valid_path(&other[..=t]) {
                other[t] = 1;
            }
        }
        prop_assert!(is_valid_path(&other));
        prop_assert!(best >= crf.path_score(&e, &other).unwrap() - 1e-9);
    }
}
