//! Distinguishers against exact advantages and their own determinism.

use proptest::prelude::*;
use rug::Rational;

use truncdist::distinguish::{
    decide, empirical_q_half, hall_s_params, mc_advantage, Distinguisher, SParams,
};
use truncdist::exact::{exact_advantage, exact_q_half};
use truncdist::profile::expected_col;
use truncdist::{Params, ReplySequence, World};

fn p(n: u32, m: u32, q: u64) -> Params {
    Params::new(n, m, q).unwrap()
}

fn exact_f64(params: &Params) -> f64 {
    exact_advantage(params).unwrap().advantage.to_f64()
}

/// `P_p(omega) - P_f(omega)` by sequential conditioning.
fn mass_gap(params: &Params, omega: &[u64]) -> Rational {
    let pf = Rational::from((1, params.alphabet_size().pow(params.q() as u32)));
    let mut pp = Rational::from(1);
    for (i, r) in omega.iter().enumerate() {
        let earlier = omega[..i].iter().filter(|x| *x == r).count() as u64;
        if earlier >= params.bucket_capacity() {
            pp = Rational::new();
            break;
        }
        pp *= Rational::from((
            params.bucket_capacity() - earlier,
            params.domain_size() - i as u64,
        ));
    }
    pp - pf
}

fn all_sequences(params: &Params) -> impl Iterator<Item = Vec<u64>> + '_ {
    let a = params.alphabet_size();
    let q = params.q() as u32;
    (0..a.pow(q)).map(move |mut code| {
        (0..q)
            .map(|_| {
                let r = code % a;
                code /= a;
                r
            })
            .collect()
    })
}

#[test]
fn likelihood_ratio_region_has_exact_advantage() {
    for params in [p(3, 1, 4), p(4, 2, 5), p(4, 0, 4), p(5, 3, 4)] {
        let d = Distinguisher::LikelihoodRatio.compile(&params);
        let mut adv = Rational::new();
        for omega in all_sequences(&params) {
            let seq = ReplySequence::new(&params, omega.clone()).unwrap();
            if d.decide(&seq) == World::Permutation {
                adv += mass_gap(&params, &omega);
            }
        }
        assert_eq!(adv, exact_advantage(&params).unwrap().advantage, "{params}");
    }
}

#[test]
fn smallest_instance_covers_one_sixth() {
    let est = mc_advantage(&Distinguisher::LikelihoodRatio, &p(2, 1, 2), 1_000_000, 7).unwrap();
    assert!(est.covers(1.0 / 6.0), "{est:?}");
}

#[test]
fn likelihood_ratio_converges_on_small_instances() {
    let instances = [
        p(2, 1, 2),
        p(3, 1, 3),
        p(4, 1, 4),
        p(4, 2, 6),
        p(5, 2, 5),
        p(6, 0, 8),
        p(6, 3, 10),
        p(8, 2, 16),
        p(8, 4, 24),
        p(10, 3, 30),
    ];
    let covered = instances
        .iter()
        .enumerate()
        .filter(|(i, params)| {
            let est = mc_advantage(
                &Distinguisher::LikelihoodRatio,
                params,
                100_000,
                1000 + *i as u64,
            )
            .unwrap();
            est.covers(exact_f64(params))
        })
        .count();
    assert!(
        covered >= 9,
        "only {covered}/10 intervals cover the exact advantage"
    );
}

#[test]
fn no_distinguisher_beats_the_exact_advantage() {
    for params in [p(4, 1, 6), p(6, 2, 12), p(8, 3, 20)] {
        let exact = exact_f64(&params);
        let mean = expected_col(&params, 2).to_f64();
        let mut family = vec![
            Distinguisher::Constant(World::Permutation),
            Distinguisher::Constant(World::Function),
            Distinguisher::SMembership(hall_s_params(&params, 1.0).unwrap()),
            Distinguisher::SMembership(SParams::new(3, vec![mean, mean], 1.0).unwrap()),
        ];
        for theta in [0.5, 1.0, mean, mean + 1.0, 2.0 * mean] {
            family.push(Distinguisher::Col2Threshold { theta });
        }
        for (i, d) in family.iter().enumerate() {
            let est = mc_advantage(d, &params, 40_000, 50 + i as u64).unwrap();
            assert!(
                est.point <= exact + est.ci_half_width,
                "{} at {params}: {est:?} vs {exact}",
                d.label()
            );
        }
    }
}

#[test]
fn constant_guess_has_zero_advantage() {
    for world in World::BOTH {
        let est = mc_advantage(&Distinguisher::Constant(world), &p(6, 2, 9), 5_000, 3).unwrap();
        assert_eq!(est.point, 0.0);
        assert_eq!(est.ci_half_width, 0.0);
    }
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let params = p(8, 2, 18);
    let d = Distinguisher::Col2Threshold { theta: 1.0 };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_advantage(&d, &params, 20_000, 99).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn empirical_q_half_brackets_the_exact_value() {
    let exact = exact_q_half(8, 0, 1 << 20).unwrap().unwrap();
    let est = empirical_q_half(|_| Distinguisher::LikelihoodRatio, 8, 0, 256, 20_000, 5).unwrap();
    let q = est.q().unwrap();
    assert!(
        q + 1 >= exact && q <= exact + 8,
        "empirical {q} vs exact {exact}"
    );
}

#[test]
fn zero_trials_is_an_error() {
    assert!(mc_advantage(&Distinguisher::LikelihoodRatio, &p(4, 1, 2), 0, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn decisions_ignore_query_order(
        n in 4u32..10,
        m_seed: u32,
        raw in proptest::collection::vec(any::<u64>(), 2..14),
        shuffle_seed: u64,
    ) {
        let m = m_seed % n;
        let params = p(n, m, raw.len() as u64);
        let a = params.alphabet_size();
        let replies: Vec<u64> = raw.iter().map(|r| r % a).collect();
        let mut shuffled = replies.clone();
        // Rotate then reverse a prefix: a deterministic reordering.
        let k = (shuffle_seed as usize) % shuffled.len();
        shuffled.rotate_left(k);
        shuffled[..k.max(1)].reverse();

        let a_seq = ReplySequence::new(&params, replies).unwrap();
        let b_seq = ReplySequence::new(&params, shuffled).unwrap();
        let mean = expected_col(&params, 2).to_f64();
        for d in [
            Distinguisher::LikelihoodRatio,
            Distinguisher::Col2Threshold { theta: mean },
            Distinguisher::SMembership(hall_s_params(&params, 1.0).unwrap()),
            Distinguisher::SMembership(SParams::new(3, vec![mean + 0.5, 1.0], 0.0).unwrap()),
        ] {
            prop_assert_eq!(decide(&d, &a_seq, &params), decide(&d, &b_seq, &params));
        }
    }
}
