use std::f64::consts::PI;

use pcrx::channel::{taps, ChannelGeometry, MemoryPolicy, TapVector};
use pcrx::link::*;
use pcrx::optimize::LinkParams;
use pcrx::Execution;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

fn base_geometry() -> ChannelGeometry {
    ChannelGeometry::new(10.0, 5.0, 80.0).unwrap()
}

fn literal_taps(values: Vec<f64>) -> TapVector {
    let total = values.iter().sum();
    TapVector::from_parts(values, 0.1, PI, base_geometry(), total).unwrap()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn received_count_expectation() {
    let cfg = LinkConfig::new(literal_taps(vec![0.3, 0.1]), 100, 0, 1, 10, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws: Vec<f64> = (0..100_000)
        .map(|_| received_count(&[true, true], 1, &cfg, &mut rng) as f64)
        .collect();
    let (mean, _) = mean_var(&draws);
    let var = 100.0 * 0.3 * 0.7 + 100.0 * 0.1 * 0.9;
    assert!((mean - 40.0).abs() < 3.0 * (var / 1e5f64).sqrt(), "mean {mean}");
}

#[test]
fn received_count_binomial_moments() {
    let cfg = LinkConfig::new(literal_taps(vec![0.5]), 10, 0, 1, 10, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    let draws: Vec<f64> = (0..n)
        .map(|_| received_count(&[true], 0, &cfg, &mut rng) as f64)
        .collect();
    let (mean, var) = mean_var(&draws);
    assert!((mean - 5.0).abs() < 3.0 * (2.5 / n as f64).sqrt(), "mean {mean}");
    // Var(s²) ≈ (μ₄ − σ⁴)/n with μ₄ = 17.5 for Binomial(10, 1/2)
    assert!(
        (var - 2.5).abs() < 3.0 * ((17.5 - 6.25) / n as f64).sqrt(),
        "variance {var}"
    );
    let silent = LinkConfig::new(literal_taps(vec![0.5]), 10, 0, 1, 10, 0).unwrap();
    assert_eq!(received_count(&[false, false], 1, &silent, &mut rng), 0);
}

#[test]
fn transmitted_counts_have_binomial_slot_marginals() {
    // per-slot mean and variance of a steady-state slot with i.i.d. bits
    let p = vec![0.2, 0.1, 0.05, 0.02];
    let (n1, prior) = (50u64, 0.5);
    let cfg = LinkConfig::new(literal_taps(p.clone()), n1, 0, 1, 200_000, 9)
        .unwrap()
        .with_tail(TailModel::Ignore);
    let tx = transmit(&cfg, 9, Execution::default()).unwrap();
    let counts: Vec<f64> = tx.counts[p.len()..].iter().map(|&c| c as f64).collect();
    let (mean, var) = mean_var(&counts);
    let a = n1 as f64;
    let want_mean: f64 = p.iter().map(|pj| prior * a * pj).sum();
    let want_var: f64 = p
        .iter()
        .map(|pj| prior * a * pj * (1.0 - pj) + a * a * pj * pj * prior * (1.0 - prior))
        .sum();
    let n = counts.len() as f64;
    assert!(
        (mean - want_mean).abs() < 4.0 * (want_var / n).sqrt(),
        "mean {mean} vs {want_mean}"
    );
    assert!((var / want_var - 1.0).abs() < 0.03, "variance {var} vs {want_var}");
    // per-slot marginals agree with the literal definition
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let literal: Vec<f64> = (0..50_000)
        .map(|i| received_count(&tx.bits[i..i + 4], 3, &cfg, &mut rng) as f64)
        .collect();
    let (lm, _) = mean_var(&literal);
    assert!((lm - want_mean).abs() < 4.0 * (want_var / 5e4).sqrt());
}

#[test]
fn ber_is_seed_invariant_within_confidence() {
    let params = LinkParams {
        n_bits: 200_000,
        seed: 1,
        ..Default::default()
    };
    let a = params
        .ber(&base_geometry(), PI / 4.0, 0.15, Execution::default())
        .unwrap();
    let b = LinkParams { seed: 2, ..params }
        .ber(&base_geometry(), PI / 4.0, 0.15, Execution::default())
        .unwrap();
    let hw = (a.confidence_halfwidth_95.powi(2) + b.confidence_halfwidth_95.powi(2)).sqrt();
    assert!((a.ber - b.ber).abs() < 3.0 * hw, "{} vs {}", a.ber, b.ber);
    let again = params
        .ber(&base_geometry(), PI / 4.0, 0.15, Execution::default())
        .unwrap();
    assert_eq!(again, a);
}

#[test]
fn ber_nonincreasing_in_amount() {
    let g = base_geometry();
    let tv = taps(&g, PI / 3.0, 0.15, 100).unwrap();
    let mut prev: Option<BerResult> = None;
    for n1 in [20u64, 50, 100, 200, 400] {
        let cfg = LinkConfig::new(tv.clone(), n1, 0, 1, 200_000, 4).unwrap();
        let r = ber_with_optimal_threshold(&cfg, Execution::default()).unwrap();
        if let Some(p) = prev {
            let hw = (p.confidence_halfwidth_95.powi(2) + r.confidence_halfwidth_95.powi(2)).sqrt();
            assert!(r.ber <= p.ber + hw, "n1 = {n1}: {} after {}", r.ber, p.ber);
        }
        prev = Some(r);
    }
}

#[test]
fn extending_memory_does_not_move_ber() {
    let g = base_geometry();
    let base = LinkParams {
        n_bits: 1_000_000,
        seed: 5,
        threshold: pcrx::optimize::ThresholdPolicy::Fixed(9),
        ..Default::default()
    };
    let short = base.ber(&g, PI / 3.0, 0.15, Execution::default()).unwrap();
    let long = LinkParams {
        memory: MemoryPolicy {
            max_taps: 200,
            ..Default::default()
        },
        ..base
    }
    .ber(&g, PI / 3.0, 0.15, Execution::default())
    .unwrap();
    assert!(
        (short.ber - long.ber).abs() < short.confidence_halfwidth_95,
        "{} vs {}",
        short.ber,
        long.ber
    );
}

#[test]
fn ber_reports_its_confidence() {
    let cfg = LinkConfig::new(
        taps(&base_geometry(), PI / 2.0, 0.15, 50).unwrap(),
        100,
        0,
        6,
        100_000,
        7,
    )
    .unwrap();
    let r = ber_monte_carlo(&cfg).unwrap();
    assert_eq!(r.bits, 100_000);
    assert!((r.ber - r.errors as f64 / 1e5).abs() < 1e-15);
    assert!((r.confidence_halfwidth_95 - 1.96 * (r.ber * (1.0 - r.ber) / 1e5).sqrt()).abs() < 1e-15);
    assert_eq!(r.threshold, 6);
}
