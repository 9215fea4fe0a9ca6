use capillary_core::fecsizing::{
    decoding_failure_prob, fec_block_size, large_block_rate, rate_increase, FecProfile, FecSizer,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

/// Exact tail `Σ_{k ≥ n−m+1} C(n,k) a^k (d−a)^(n−k) / d^n` for every `m`
/// in `1..=max_m` (index `m − 1`), with loss rate `p = a/d`.
fn exact_tails(n: u32, a: u32, d: u32, max_m: u32) -> Vec<f64> {
    let (a, b) = (BigInt::from(a), BigInt::from(d - a));
    let denom = num_traits::pow(BigInt::from(d), n as usize);
    let mut out = Vec::new();
    let mut acc = BigInt::from(0);
    // C(n, n−i) = C(n, i), built up from i = 0.
    let mut binom = BigInt::one();
    for i in 0..max_m.min(n) {
        if i > 0 {
            binom = binom * BigInt::from(n - i + 1) / BigInt::from(i);
        }
        let k = n - i;
        acc += &binom
            * num_traits::pow(a.clone(), k as usize)
            * num_traits::pow(b.clone(), i as usize);
        out.push(
            BigRational::new(acc.clone(), denom.clone())
                .to_f64()
                .unwrap(),
        );
    }
    out
}

fn exact_tail(n: u32, m: u32, a: u32, d: u32) -> f64 {
    exact_tails(n, a, d, m)[m as usize - 1]
}

/// Smallest block size whose exact tail is within `der`.
fn exact_block_size(m: u32, a: u32, d: u32, der: f64) -> u32 {
    (m..).find(|&n| exact_tail(n, m, a, d) <= der).unwrap()
}

#[test]
fn tail_matches_exact_rational_sum() {
    let mut worst = 0.0f64;
    for n in 1..=200u32 {
        for j in 1..=50u32 {
            let p = j as f64 / 100.0;
            let exact = exact_tails(n, j, 100, 30);
            for (i, &e) in exact.iter().enumerate() {
                let m = i as u32 + 1;
                let got = decoding_failure_prob(n, m, p);
                worst = worst.max((got - e).abs());
                assert!((got - e).abs() <= 1e-12, "n={n} m={m} p={p}: {got} vs {e}");
            }
        }
    }
    assert!(worst <= 1e-12);
}

#[test]
fn rs_30_23_shape() {
    let exact = exact_tail(30, 23, 1, 10);
    assert!((decoding_failure_prob(30, 23, 0.1) - exact).abs() <= 1e-15);
}

#[test]
fn monte_carlo_agrees_within_four_standard_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0201);
    for (n, m, p) in [(30u32, 23u32, 0.1f64), (25, 20, 0.1), (10, 5, 0.3)] {
        let delta = decoding_failure_prob(n, m, p);
        let losses = Binomial::new(n as u64, p).unwrap();
        let trials = 1_000_000u32;
        let failures = (0..trials)
            .filter(|_| losses.sample(&mut rng) > (n - m) as u64)
            .count();
        let freq = failures as f64 / trials as f64;
        let se = (delta * (1.0 - delta) / trials as f64).sqrt();
        assert!(
            (freq - delta).abs() <= 4.0 * se,
            "({n},{m},{p}): {freq} vs {delta}"
        );
    }
}

#[test]
fn single_source_packet_is_ceiling_log() {
    for der in [1e-2, 1e-3, 1e-5, 1e-7] {
        for j in 1..=50u32 {
            let p = j as f64 / 100.0;
            let profile = FecProfile::new(1, der, 0.0).unwrap();
            let n = fec_block_size(&profile, p).unwrap();
            // Smallest integer n with p^n ≤ der, found by exact powers.
            let mut expected = 1;
            while p.powi(expected) > der * (1.0 + 1e-9) {
                expected += 1;
            }
            assert_eq!(n, expected as u32, "p={p} der={der}");
        }
    }
    let profile = FecProfile::new(1, 1e-5, 0.0).unwrap();
    assert_eq!(fec_block_size(&profile, 0.1).unwrap(), 5);
}

#[test]
fn block_size_respects_large_block_bound() {
    for der in [1e-3, 1e-5, 1e-7] {
        for m in 1..=30u32 {
            let profile = FecProfile::new(m, der, 0.0).unwrap();
            for j in 0..=50u32 {
                let p = j as f64 / 100.0;
                let n = fec_block_size(&profile, p).unwrap();
                assert!(
                    n as f64 / m as f64 >= large_block_rate(p).unwrap() - 1e-12,
                    "m={m} p={p} der={der} n={n}"
                );
            }
        }
    }
}

#[test]
fn large_block_bound_needs_a_small_target() {
    // A single packet already meets a target above its loss rate.
    let profile = FecProfile::new(1, 0.4, 0.0).unwrap();
    assert_eq!(fec_block_size(&profile, 0.05).unwrap(), 1);
    assert!(1.0 < large_block_rate(0.05).unwrap());
}

fn ratio(m: u32, p: f64, der: f64) -> f64 {
    let profile = FecProfile::new(m, der, 0.0).unwrap();
    fec_block_size(&profile, p).unwrap() as f64 / m as f64
}

#[test]
fn rate_per_source_packet_shrinks_along_multiples() {
    for der in [1e-3, 1e-5, 1e-7] {
        for j in 1..=50u32 {
            let p = j as f64 / 100.0;
            let ratios: Vec<f64> = (1..=30u32).map(|m| ratio(m, p, der)).collect();
            for a in 1..=30usize {
                for b in (2 * a..=30).step_by(a) {
                    assert!(
                        ratios[b - 1] <= ratios[a - 1] + 1e-12,
                        "der={der} p={p}: N/M at M={b} exceeds M={a}"
                    );
                }
            }
        }
    }
}

#[test]
fn rate_per_source_packet_is_a_sawtooth_between_neighbours() {
    assert_eq!(ratio(4, 0.01, 1e-3), 1.25);
    assert_eq!(ratio(5, 0.01, 1e-3), 1.4);
}

#[test]
fn block_size_is_monotone_in_loss_rate() {
    let profile = FecProfile::new(20, 1e-5, 0.0).unwrap();
    let ns: Vec<u32> = (5..=50u32)
        .map(|j| fec_block_size(&profile, j as f64 / 100.0).unwrap())
        .collect();
    assert!(ns.windows(2).all(|w| w[0] <= w[1]), "{ns:?}");
}

#[test]
fn m20_p005_is_minimal() {
    let profile = FecProfile::new(20, 1e-5, 0.0).unwrap();
    let n = fec_block_size(&profile, 0.05).unwrap();
    assert_eq!(n, PINNED_M20_P005);
    assert_eq!(n, exact_block_size(20, 5, 100, 1e-5));
}

const PINNED_M20_P005: u32 = 28;

#[test]
fn overhead_at_quarter_loss() {
    let profile = FecProfile::new(20, 1e-5, 0.036).unwrap();
    let r = rate_increase(&profile, 0.25).unwrap();
    assert_eq!(r.fec_p, exact_block_size(20, 1, 4, 1e-5));
    assert_eq!(r.fec_t, exact_block_size(20, 36, 1000, 1e-5));
    assert_eq!((r.fec_p, r.fec_t), PINNED_QUARTER);
    println!(
        "fec_p={} fec_t={} overhead={}",
        r.fec_p,
        r.fec_t,
        r.overhead()
    );
    let sizer = FecSizer::new(profile).unwrap();
    assert_eq!(sizer.rate_increase(0.25).unwrap(), r);
}

const PINNED_QUARTER: (u32, u32) = (44, 27);
