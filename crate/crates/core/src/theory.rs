// SPDX-License-Identifier: Apache-2.0

//! Monte Carlo estimators with closed-form references for the statistical
//! behaviour of hypervector operations.
//!
//! Every estimator draws trial `t` from `stream.split(name, t)`, so results do
//! not depend on how trials are scheduled across threads.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::encoder::{EncoderConfig, EncoderModel, FeatureQuantizer};
use crate::error::{Error, Result};
use crate::hv::{Hypervector, SeededStream};

/// Absolute tolerance for mean-distance estimators at D = 10,000.
pub const MEAN_TOLERANCE: f64 = 0.01;
/// Tolerance for the random-pair and bind-distance means.
pub const PAIR_MEAN_TOLERANCE: f64 = 0.005;
/// No single random-pair sample may stray further than this from 0.5.
pub const PAIR_SAMPLE_BOUND: f64 = 0.03;
/// Allowed dip between successive points of the noise curve.
pub const CURVE_SLACK: f64 = 0.005;
/// Largest N for which `p_of_n` is exact in 128-bit integers.
pub const MAX_EXACT_N: u32 = 127;

/// Outcome of one estimator run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub name: String,
    pub trials: usize,
    pub dim: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub reference: f64,
    pub tolerance: f64,
    /// Per-sample bound on |sample - reference|, when the check has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_bound: Option<f64>,
    pub pass: bool,
}

impl TrialReport {
    fn from_samples(
        name: impl Into<String>,
        dim: usize,
        samples: &[f64],
        reference: f64,
        tolerance: f64,
        sample_bound: Option<f64>,
    ) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let within_bound = sample_bound
            .is_none_or(|b| (min - reference).abs() <= b && (max - reference).abs() <= b);
        TrialReport {
            name: name.into(),
            trials: n,
            dim,
            mean,
            std,
            min,
            max,
            reference,
            tolerance,
            sample_bound,
            pass: (mean - reference).abs() <= tolerance && within_bound,
        }
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    Ok(())
}

fn check_rate(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

fn run_trials<F>(stream: &SeededStream, name: &str, trials: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(SeededStream) -> Result<f64> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| f(stream.split(name, t as u64)))
        .collect()
}

/// `2^-N * C(N-1, (N-1)/2)`: the per-bit agreement excess between a majority
/// bundle of N random vectors and one of its constituents.
pub fn p_of_n(n: u32) -> Result<f64> {
    if n == 0 || n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("N must be odd and positive, got {n}")));
    }
    if n > MAX_EXACT_N {
        return Err(Error::InvalidArgument(format!(
            "N = {n} exceeds the exact range (at most {MAX_EXACT_N})"
        )));
    }
    let m = (n - 1) as u128;
    let k = m / 2;
    // C(m, k) built incrementally. Dividing out the gcd first keeps every
    // intermediate bounded by the next binomial, so nothing overflows.
    let mut c: u128 = 1;
    for i in 0..k {
        let g = gcd(c, i + 1);
        c = (c / g) * ((m - i) / ((i + 1) / g));
    }
    Ok(c as f64 / 2f64.powi(n as i32))
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn bundle_of(n: u32, dim: usize, mut s: SeededStream) -> Result<(Hypervector, Hypervector, Hypervector)> {
    let items = (0..n)
        .map(|_| Hypervector::random(dim, &mut s))
        .collect::<Result<Vec<_>>>()?;
    let ties = s.split("ties", 0);
    let bundle = crate::hv::bundle(items.iter(), &ties, 0)?;
    let stranger = Hypervector::random(dim, &mut s)?;
    let first = items.into_iter().next().expect("n >= 1");
    Ok((bundle, first, stranger))
}

fn check_bundle_args(n: u32, dim: usize, trials: usize) -> Result<()> {
    check_trials(trials)?;
    p_of_n(n)?;
    if dim < 1000 {
        return Err(Error::InvalidArgument(format!("D must be at least 1000, got {dim}")));
    }
    Ok(())
}

/// Mean distance from a majority bundle of N random vectors to its first
/// constituent. Reference `0.5 - p_of_n(N)`.
pub fn estimate_bundle_distance(
    n: u32,
    dim: usize,
    trials: usize,
    stream: &SeededStream,
) -> Result<TrialReport> {
    check_bundle_args(n, dim, trials)?;
    let samples = run_trials(stream, "bundle", trials, |s| {
        let (c, first, _) = bundle_of(n, dim, s)?;
        c.hamming(&first)
    })?;
    Ok(TrialReport::from_samples(
        format!("bundle-distance-n{n}"),
        dim,
        &samples,
        0.5 - p_of_n(n)?,
        MEAN_TOLERANCE,
        None,
    ))
}

/// Fraction of trials where a bundle is strictly closer to its first
/// constituent than to an unrelated random vector. Reference 1.0.
pub fn estimate_bundle_proximity(
    n: u32,
    dim: usize,
    trials: usize,
    stream: &SeededStream,
) -> Result<TrialReport> {
    check_bundle_args(n, dim, trials)?;
    let samples = run_trials(stream, "bundle", trials, |s| {
        let (c, first, stranger) = bundle_of(n, dim, s)?;
        Ok(f64::from(u8::from(c.hamming_count(&first)? < c.hamming_count(&stranger)?)))
    })?;
    Ok(TrialReport::from_samples(
        format!("bundle-proximity-n{n}"),
        dim,
        &samples,
        1.0,
        MEAN_TOLERANCE,
        None,
    ))
}

fn exact_count(d: f64, dim: usize) -> Result<usize> {
    check_rate("d", d)?;
    let scaled = d * dim as f64;
    let count = scaled.round();
    if (scaled - count).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("d * D = {scaled} is not an integer")));
    }
    Ok(count as usize)
}

/// Mean distance between a vector and a flipped copy of a partner that
/// started at exact distance `d`. Reference `d(1 - 2p) + p`.
pub fn estimate_flip_law(
    d: f64,
    p: f64,
    dim: usize,
    trials: usize,
    stream: &SeededStream,
) -> Result<TrialReport> {
    check_trials(trials)?;
    let count = exact_count(d, dim)?;
    check_rate("p", p)?;
    let samples = run_trials(stream, "flip-law", trials, |mut s| {
        let a = Hypervector::random(dim, &mut s)?;
        let b = a.flip_count(count, &mut s).flip_bits(p, &mut s)?;
        a.hamming(&b)
    })?;
    Ok(TrialReport::from_samples(
        format!("flip-law-d{d}-p{p}"),
        dim,
        &samples,
        d * (1.0 - 2.0 * p) + p,
        MEAN_TOLERANCE,
        None,
    ))
}

/// Fraction of trials where the prototype at distance `d1` from a query is
/// still strictly closer than the one at `d2` after both are flipped at
/// rate `p`. Reference 1.0 (one-sided, since the fraction cannot exceed it).
pub fn estimate_ordering_preservation(
    d1: f64,
    d2: f64,
    p: f64,
    dim: usize,
    trials: usize,
    stream: &SeededStream,
) -> Result<TrialReport> {
    check_trials(trials)?;
    check_rate("d1", d1)?;
    check_rate("d2", d2)?;
    if d2 <= d1 {
        return Err(Error::InvalidArgument(format!("need d2 > d1, got d1 = {d1}, d2 = {d2}")));
    }
    if !(0.0..0.5).contains(&p) {
        return Err(Error::InvalidArgument(format!("p must lie in [0, 0.5), got {p}")));
    }
    let c1 = (d1 * dim as f64).round() as usize;
    let c2 = (d2 * dim as f64).round() as usize;
    let samples = run_trials(stream, "ordering", trials, |mut s| {
        let q = Hypervector::random(dim, &mut s)?;
        let near = q.flip_count(c1, &mut s).flip_bits(p, &mut s)?;
        let far = q.flip_count(c2, &mut s).flip_bits(p, &mut s)?;
        Ok(f64::from(u8::from(q.hamming_count(&near)? < q.hamming_count(&far)?)))
    })?;
    Ok(TrialReport::from_samples(
        format!("ordering-d{d1}-{d2}-p{p}"),
        dim,
        &samples,
        1.0,
        MEAN_TOLERANCE,
        None,
    ))
}

/// Distances between independent random pairs. Reference 0.5.
pub fn estimate_random_pair_distance(
    dim: usize,
    trials: usize,
    stream: &SeededStream,
) -> Result<TrialReport> {
    check_trials(trials)?;
    let samples = run_trials(stream, "random-pair", trials, |mut s| {
        let a = Hypervector::random(dim, &mut s)?;
        let b = Hypervector::random(dim, &mut s)?;
        a.hamming(&b)
    })?;
    Ok(TrialReport::from_samples(
        "random-pair-distance",
        dim,
        &samples,
        0.5,
        PAIR_MEAN_TOLERANCE,
        Some(PAIR_SAMPLE_BOUND),
    ))
}

/// Distance from A to A bound with a random B. Reference 0.5.
pub fn estimate_bind_distance(
    dim: usize,
    trials: usize,
    stream: &SeededStream,
) -> Result<TrialReport> {
    check_trials(trials)?;
    let samples = run_trials(stream, "bind-distance", trials, |mut s| {
        let a = Hypervector::random(dim, &mut s)?;
        let b = Hypervector::random(dim, &mut s)?;
        a.hamming(&a.bind(&b)?)
    })?;
    Ok(TrialReport::from_samples(
        "bind-distance",
        dim,
        &samples,
        0.5,
        PAIR_MEAN_TOLERANCE,
        Some(PAIR_SAMPLE_BOUND),
    ))
}

/// Encoding distance as a function of bounded input noise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseCurve {
    pub deltas: Vec<f64>,
    pub points: Vec<TrialReport>,
    /// Each mean is at least the previous one minus `CURVE_SLACK`.
    pub monotone: bool,
    /// Every trial at delta = 0 gave distance exactly 0 (vacuous without a zero delta).
    pub zero_at_origin: bool,
    pub pass: bool,
}

/// Encode random feature vectors in [0, 1]^d and copies perturbed by uniform
/// noise within +/- delta of the (unit) threshold span, and report the mean
/// encoding distance per delta. All deltas share the same draws, so the
/// curve differs only through delta.
///
/// Points at delta > 0 pass when the mean lies in [0, 0.5] (reference 0.25,
/// tolerance 0.25); the point at delta = 0 must be exactly 0.
pub fn estimate_noise_curve(
    config: &EncoderConfig,
    features: usize,
    deltas: &[f64],
    trials: usize,
    stream: &SeededStream,
) -> Result<NoiseCurve> {
    check_trials(trials)?;
    if features == 0 {
        return Err(Error::InvalidArgument("features must be at least 1".into()));
    }
    for &delta in deltas {
        check_rate("delta", delta)?;
    }
    let quantizer =
        FeatureQuantizer::from_thresholds(vec![0.0; features], vec![1.0; features], config.levels)?;
    let encoder = EncoderModel::new(*config, quantizer)?;
    let draws: Vec<(Vec<f64>, Vec<f64>)> = (0..trials)
        .map(|t| {
            let mut s = stream.split("noise-curve", t as u64);
            let x: Vec<f64> = (0..features).map(|_| s.next_f64()).collect();
            let u: Vec<f64> = (0..features).map(|_| 2.0 * s.next_f64() - 1.0).collect();
            (x, u)
        })
        .collect();
    let clean = encoder.encode_batch(&draws.iter().map(|(x, _)| x.clone()).collect::<Vec<_>>())?;

    let mut points = Vec::with_capacity(deltas.len());
    let mut zero_at_origin = true;
    for &delta in deltas {
        let noisy: Vec<Vec<f64>> = draws
            .iter()
            .map(|(x, u)| x.iter().zip(u).map(|(xi, ui)| xi + delta * ui).collect())
            .collect();
        let encoded = encoder.encode_batch(&noisy)?;
        let samples = clean
            .iter()
            .zip(&encoded)
            .map(|(a, b)| a.hamming(b))
            .collect::<Result<Vec<_>>>()?;
        let (reference, tolerance) = if delta == 0.0 { (0.0, 0.0) } else { (0.25, 0.25) };
        let report = TrialReport::from_samples(
            format!("noise-curve-delta{delta}"),
            config.dim,
            &samples,
            reference,
            tolerance,
            None,
        );
        if delta == 0.0 && report.max != 0.0 {
            zero_at_origin = false;
        }
        points.push(report);
    }
    let monotone = points.windows(2).all(|w| w[1].mean >= w[0].mean - CURVE_SLACK);
    let pass = monotone && zero_at_origin && points.iter().all(|p| p.pass);
    Ok(NoiseCurve {
        deltas: deltas.to_vec(),
        points,
        monotone,
        zero_at_origin,
        pass,
    })
}

/// Chi-square check that per-bit disagreement between pairs at exact
/// distance `d` looks like Bernoulli(d). Advisory only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernoulliCheck {
    pub d: f64,
    pub dim: usize,
    pub trials: usize,
    pub mean_rate: f64,
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub critical_value: f64,
    pub pass: bool,
}

pub fn bernoulli_chi_square(
    d: f64,
    dim: usize,
    trials: usize,
    stream: &SeededStream,
) -> Result<BernoulliCheck> {
    check_trials(trials)?;
    let count = exact_count(d, dim)?;
    if count == 0 || count == dim || dim < 2 {
        return Err(Error::InvalidArgument("d must lie strictly inside (0, 1) and D >= 2".into()));
    }
    let mut disagreements = vec![0u64; dim];
    for t in 0..trials {
        let mut s = stream.split("bernoulli", t as u64);
        let a = Hypervector::random(dim, &mut s)?;
        let b = a.flip_count(count, &mut s);
        for (i, slot) in disagreements.iter_mut().enumerate() {
            if a.get(i) != b.get(i) {
                *slot += 1;
            }
        }
    }
    let expected = trials as f64 * d;
    let variance = expected * (1.0 - d);
    let statistic = disagreements
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / variance)
        .sum::<f64>();
    // Row totals are fixed at exactly count, which removes one degree of freedom.
    let dof = dim - 1;
    let critical_value = ChiSquared::new(dof as f64)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .inverse_cdf(0.95);
    let mean_rate = disagreements.iter().sum::<u64>() as f64 / (trials * dim) as f64;
    Ok(BernoulliCheck {
        d,
        dim,
        trials,
        mean_rate,
        statistic,
        degrees_of_freedom: dof,
        critical_value,
        pass: statistic <= critical_value,
    })
}

/// Every estimator at its reference configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryReport {
    pub seed: u64,
    pub trials: usize,
    pub reports: Vec<TrialReport>,
    pub noise_curve: NoiseCurve,
    /// Advisory: excluded from `pass`.
    pub bernoulli: BernoulliCheck,
    pub pass: bool,
}

impl TheoryReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("theory report serializes")
    }
}

pub const THEORY_DIM: usize = 10_000;
pub const NOISE_CURVE_DELTAS: [f64; 5] = [0.0, 0.05, 0.1, 0.2, 0.4];
pub const NOISE_CURVE_FEATURES: usize = 30;

/// Run the full battery with `trials` trials per estimator.
pub fn run_theory_checks(trials: usize, seed: u64) -> Result<TheoryReport> {
    check_trials(trials)?;
    let root = SeededStream::new(seed).split("theory", 0);
    let dim = THEORY_DIM;
    let mut reports = vec![
        estimate_random_pair_distance(dim, trials, &root)?,
        estimate_bind_distance(dim, trials, &root)?,
    ];
    for n in [1, 3, 5, 9] {
        reports.push(estimate_bundle_distance(n, dim, trials, &root)?);
        reports.push(estimate_bundle_proximity(n, dim, trials, &root)?);
    }
    for (d, p) in [(0.2, 0.1), (0.2, 0.2), (0.4, 0.1), (0.0, 0.3), (0.3, 0.5)] {
        reports.push(estimate_flip_law(d, p, dim, trials, &root)?);
    }
    reports.push(estimate_ordering_preservation(0.2, 0.3, 0.2, dim, trials, &root)?);
    let config = EncoderConfig {
        dim,
        levels: crate::encoder::DEFAULT_LEVELS,
        seed,
    };
    let noise_curve =
        estimate_noise_curve(&config, NOISE_CURVE_FEATURES, &NOISE_CURVE_DELTAS, trials, &root)?;
    let bernoulli = bernoulli_chi_square(0.2, 1000, trials, &root)?;
    let pass = reports.iter().all(|r| r.pass) && noise_curve.pass;
    Ok(TheoryReport {
        seed,
        trials,
        reports,
        noise_curve,
        bernoulli,
        pass,
    })
}
