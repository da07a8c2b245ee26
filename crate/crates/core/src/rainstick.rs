//! The rainstick process on the positive integers.
//!
//! Drops land at i.i.d. positions `X ≥ 1` and wet the site they hit. `T` is
//! the first time the wet set is one block `{1, ..., K}`.
//!
//! Most drops in a long run land on sites that are already wet. [`run`]
//! skips them exactly: the number of drops until one lands on a dry site is
//! geometric with parameter `q = P(X dry)`, and that drop's position follows
//! the law of `X` conditioned on the dry set. This gives the same joint law of
//! `(T, K)` as dropping one at a time, at a cost proportional to the number
//! of drops that change the wet set.

use std::collections::BTreeMap;

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::StreamKey;
use crate::stats::linear_fit;

/// Run-length encoded subset of `{1, 2, ...}`: maximal runs keyed by start.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WetSet {
    runs: BTreeMap<u64, u64>,
}

impl WetSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, k: u64) -> bool {
        self.runs.range(..=k).next_back().is_some_and(|(_, &end)| k <= end)
    }

    /// Wet site `k`; false if it was already wet.
    pub fn insert(&mut self, k: u64) -> bool {
        assert!(k >= 1, "sites start at 1");
        if self.contains(k) {
            return false;
        }
        let mut start = k;
        let mut end = k;
        if let Some((&s, &e)) = self.runs.range(..k).next_back() {
            if e + 1 == k {
                start = s;
                self.runs.remove(&s);
            }
        }
        if let Some(&e) = self.runs.get(&(k + 1)) {
            end = e;
            self.runs.remove(&(k + 1));
        }
        self.runs.insert(start, end);
        true
    }

    pub fn run_count(&self) -> usize {
        self.runs.len()
    }

    /// Inclusive runs in increasing order.
    pub fn runs(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.runs.iter().map(|(&s, &e)| (s, e))
    }

    pub fn len(&self) -> u64 {
        self.runs().map(|(s, e)| e - s + 1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// `Some(K)` if the set is exactly `{1, ..., K}`.
    pub fn initial_block(&self) -> Option<u64> {
        match (self.runs.len(), self.runs.iter().next()) {
            (1, Some((&1, &end))) => Some(end),
            _ => None,
        }
    }

    /// Dry intervals `[a, b]`; the last one is unbounded (`b = None`).
    fn gaps(&self) -> Vec<(u64, Option<u64>)> {
        let mut gaps = Vec::with_capacity(self.runs.len() + 1);
        let mut next = 1;
        for (s, e) in self.runs() {
            if s > next {
                gaps.push((next, Some(s - 1)));
            }
            next = e + 1;
        }
        gaps.push((next, None));
        gaps
    }
}

/// Law of a drop position through its survival function `S(k) = P(X > k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum DropLaw {
    /// `P(X = k) = (1-p)^(k-1) p`
    Geometric { p: f64 },
    /// `P(X > k) = exp(-k^β)`
    StretchedExponential { beta: f64 },
}

impl DropLaw {
    /// `ln S(k)`
    fn log_survival(&self, k: u64) -> f64 {
        match *self {
            DropLaw::Geometric { p } => k as f64 * (-p).ln_1p(),
            DropLaw::StretchedExponential { beta } => -(k as f64).powf(beta),
        }
    }

    /// `P(a ≤ X ≤ b)`, with `b = None` for no upper bound.
    fn mass(&self, a: u64, b: Option<u64>) -> f64 {
        let upper = self.log_survival(a - 1);
        match b {
            None => upper.exp(),
            Some(b) => upper.exp() * -(self.log_survival(b) - upper).exp_m1(),
        }
    }

    /// Real `x` with `S(x) = u`, extending S continuously.
    fn inverse_survival(&self, log_u: f64) -> f64 {
        match *self {
            DropLaw::Geometric { p } => log_u / (-p).ln_1p(),
            DropLaw::StretchedExponential { beta } => (-log_u).powf(1.0 / beta),
        }
    }

    /// One unconditioned drop.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            DropLaw::Geometric { p } => {
                Geometric::new(p).expect("validated p").sample(rng).saturating_add(1)
            }
            DropLaw::StretchedExponential { .. } => self.sample_in(1, None, rng),
        }
    }

    /// A drop conditioned on `a ≤ X ≤ b`, by inversion.
    fn sample_in<R: Rng + ?Sized>(&self, a: u64, b: Option<u64>, rng: &mut R) -> u64 {
        let hi = self.log_survival(a - 1);
        let lo = b.map_or(f64::NEG_INFINITY, |b| self.log_survival(b));
        // ln U for U uniform on (S(b), S(a-1)].
        let v: f64 = 1.0 - rng.random::<f64>();
        let log_u = if lo == f64::NEG_INFINITY {
            hi + v.ln()
        } else {
            hi + (v * -(lo - hi).exp_m1()).ln_1p().max(lo - hi)
        };
        let k = self.inverse_survival(log_u).ceil().max(a as f64);
        let k = if k >= u64::MAX as f64 { u64::MAX } else { k as u64 };
        b.map_or(k, |b| k.min(b))
    }

    fn validate(&self) -> Result<()> {
        match *self {
            DropLaw::Geometric { p } if !(p > 0.0 && p < 1.0) => {
                Err(invalid("p", format!("must lie in (0, 1), got {p}")))
            }
            DropLaw::StretchedExponential { beta } if !(beta > 0.0 && beta < 1.0) => {
                Err(invalid("beta", format!("must lie in (0, 1), got {beta}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RainstickResult {
    /// Drops until the wet set is `{1, ..., K}`; the budget if capped.
    #[serde(rename = "T")]
    pub t: u64,
    /// Length of the block; for a capped run, the largest wet site.
    #[serde(rename = "K")]
    pub k: u64,
    pub capped: bool,
    /// Drops that landed on a dry site.
    pub effective_drops: u64,
}

fn check_budget(step_budget: u64) -> Result<()> {
    if step_budget == 0 {
        return Err(invalid("step_budget", "must be at least 1"));
    }
    Ok(())
}

/// Run until the wet set is an initial block or `step_budget` drops have fallen.
pub fn simulate<R: Rng + ?Sized>(law: DropLaw, step_budget: u64, rng: &mut R) -> Result<RainstickResult> {
    law.validate()?;
    check_budget(step_budget)?;
    let mut wet = WetSet::new();
    let mut t: u64 = 0;
    let mut effective = 0;
    loop {
        let gaps = wet.gaps();
        let masses: Vec<f64> = gaps.iter().map(|&(a, b)| law.mass(a, b)).collect();
        let q: f64 = masses.iter().sum();
        let wait = if q >= 1.0 {
            1
        } else if q <= 0.0 {
            u64::MAX
        } else {
            let u: f64 = 1.0 - rng.random::<f64>();
            let w = (u.ln() / (-q).ln_1p()).ceil().max(1.0);
            if w >= u64::MAX as f64 { u64::MAX } else { w as u64 }
        };
        if wait > step_budget - t {
            let k = wet.runs().last().map_or(0, |(_, e)| e);
            return Ok(RainstickResult {
                t: step_budget,
                k,
                capped: true,
                effective_drops: effective,
            });
        }
        t += wait;
        let mut pick = rng.random::<f64>() * q;
        let mut gap = gaps.len() - 1;
        for (i, m) in masses.iter().enumerate() {
            if pick < *m {
                gap = i;
                break;
            }
            pick -= m;
        }
        let (a, b) = gaps[gap];
        wet.insert(law.sample_in(a, b, rng));
        effective += 1;
        if let Some(k) = wet.initial_block() {
            return Ok(RainstickResult {
                t,
                k,
                capped: false,
                effective_drops: effective,
            });
        }
    }
}

/// The same process one drop at a time, reporting every drop to `observe`.
pub fn simulate_stepwise<R: Rng + ?Sized>(
    law: DropLaw,
    step_budget: u64,
    rng: &mut R,
    mut observe: impl FnMut(u64, &WetSet),
) -> Result<RainstickResult> {
    law.validate()?;
    check_budget(step_budget)?;
    let mut wet = WetSet::new();
    let mut effective = 0;
    for t in 1..=step_budget {
        let x = law.sample(rng);
        if wet.insert(x) {
            effective += 1;
        }
        observe(x, &wet);
        if let Some(k) = wet.initial_block() {
            return Ok(RainstickResult {
                t,
                k,
                capped: false,
                effective_drops: effective,
            });
        }
    }
    Ok(RainstickResult {
        t: step_budget,
        k: wet.runs().last().map_or(0, |(_, e)| e),
        capped: true,
        effective_drops: effective,
    })
}

fn run_key(seed: u64, law: &DropLaw) -> StreamKey {
    let root = StreamKey::new(seed).tag("rainstick");
    match *law {
        DropLaw::Geometric { p } => root.tag("geometric").child(p.to_bits()),
        DropLaw::StretchedExponential { beta } => root.tag("stretched").child(beta.to_bits()),
    }
}

/// Geometric drops with parameter `p`.
pub fn run(p: f64, seed: u64, step_budget: u64) -> Result<RainstickResult> {
    let law = DropLaw::Geometric { p };
    simulate(law, step_budget, &mut run_key(seed, &law).sequential())
}

/// Drops with `P(X > k) = exp(-k^β)`; `capped` means the run never formed a block.
pub fn stretched_tail_run(beta: f64, step_budget: u64, seed: u64) -> Result<RainstickResult> {
    let law = DropLaw::StretchedExponential { beta };
    simulate(law, step_budget, &mut run_key(seed, &law).sequential())
}

/// Replicate `r` of a batch seeded by `seed`.
pub fn replicate_seed(seed: u64, r: u64) -> u64 {
    StreamKey::new(seed).tag("rainstick-replicate").child(r).raw()
}

pub fn run_batch(law: DropLaw, replicates: u64, seed: u64, step_budget: u64) -> Result<Vec<RainstickResult>> {
    law.validate()?;
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let key = run_key(replicate_seed(seed, r), &law);
            simulate(law, step_budget, &mut key.sequential())
        })
        .collect()
}

/// How a sample of block lengths is summarized before the fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KSummary {
    /// `ln(mean K)`
    #[default]
    LogMean,
    /// `mean(ln K)`
    MeanLog,
    /// `ln(median K)`
    LogMedian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RainstickPoint {
    pub p: f64,
    pub completed: u64,
    pub capped: u64,
    pub mean_k: f64,
    pub mean_log_k: f64,
    pub median_k: f64,
}

impl RainstickPoint {
    pub fn from_results(p: f64, results: &[RainstickResult]) -> Self {
        let mut ks: Vec<f64> = results.iter().filter(|r| !r.capped).map(|r| r.k as f64).collect();
        ks.sort_by(f64::total_cmp);
        let n = ks.len();
        let median_k = match n {
            0 => f64::NAN,
            _ if n % 2 == 1 => ks[n / 2],
            _ => (ks[n / 2 - 1] + ks[n / 2]) / 2.0,
        };
        RainstickPoint {
            p,
            completed: n as u64,
            capped: (results.len() - n) as u64,
            mean_k: ks.iter().sum::<f64>() / n as f64,
            mean_log_k: ks.iter().map(|k| k.ln()).sum::<f64>() / n as f64,
            median_k,
        }
    }

    pub fn summary(&self, how: KSummary) -> f64 {
        match how {
            KSummary::LogMean => self.mean_k.ln(),
            KSummary::MeanLog => self.mean_log_k,
            KSummary::LogMedian => self.median_k.ln(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CEstimate {
    pub c: f64,
    pub c_se: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub summary: KSummary,
    pub points: Vec<RainstickPoint>,
    /// p values left out because every run was capped.
    pub excluded: Vec<f64>,
}

/// Slope of `summary(K)` against `1/p`.
pub fn fit_c(points: &[RainstickPoint], how: KSummary) -> Result<CEstimate> {
    let used: Vec<&RainstickPoint> = points.iter().filter(|pt| pt.completed > 0).collect();
    let excluded: Vec<f64> = points.iter().filter(|pt| pt.completed == 0).map(|pt| pt.p).collect();
    if used.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} usable p values, need at least 2",
            used.len()
        )));
    }
    let xs: Vec<f64> = used.iter().map(|pt| 1.0 / pt.p).collect();
    let ys: Vec<f64> = used.iter().map(|pt| pt.summary(how)).collect();
    let fit = linear_fit(&xs, &ys).ok_or_else(|| Error::FitFailure("repeated p values".into()))?;
    Ok(CEstimate {
        c: fit.slope,
        c_se: fit.slope_se,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        summary: how,
        points: points.to_vec(),
        excluded,
    })
}

/// Simulate every p and fit `c` with the default summary.
pub fn estimate_c(p_values: &[f64], replicates: u64, seed: u64, step_budget: u64) -> Result<CEstimate> {
    let points = simulate_points(p_values, replicates, seed, step_budget)?;
    fit_c(&points, KSummary::default())
}

pub fn simulate_points(p_values: &[f64], replicates: u64, seed: u64, step_budget: u64) -> Result<Vec<RainstickPoint>> {
    if p_values.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} p values, need at least 3",
            p_values.len()
        )));
    }
    if replicates == 0 {
        return Err(invalid("replicates", "must be at least 1"));
    }
    let mut points = Vec::with_capacity(p_values.len());
    for &p in p_values {
        let results = run_batch(DropLaw::Geometric { p }, replicates, seed, step_budget)?;
        let point = RainstickPoint::from_results(p, &results);
        if point.completed == 0 {
            warn!("every run at p = {p} hit the step budget; p excluded from the fit");
        } else if point.capped > 0 {
            warn!("{} of {} runs at p = {p} hit the step budget", point.capped, replicates);
        }
        points.push(point);
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wet_set_merges_runs() {
        let mut w = WetSet::new();
        assert!(w.insert(3));
        assert!(w.insert(5));
        assert_eq!(w.run_count(), 2);
        assert!(w.insert(4));
        assert_eq!(w.runs().collect::<Vec<_>>(), vec![(3, 5)]);
        assert!(!w.insert(4));
        assert_eq!(w.initial_block(), None);
        assert!(w.insert(1) && w.insert(2));
        assert_eq!(w.initial_block(), Some(5));
        assert_eq!(w.len(), 5);
        assert_eq!(w.gaps(), vec![(6, None)]);
    }

    #[test]
    fn gap_masses_sum_to_one() {
        let mut w = WetSet::new();
        for k in [2, 3, 7, 20] {
            w.insert(k);
        }
        for law in [DropLaw::Geometric { p: 0.3 }, DropLaw::StretchedExponential { beta: 0.5 }] {
            let dry: f64 = w.gaps().iter().map(|&(a, b)| law.mass(a, b)).sum();
            let wet: f64 = w.runs().map(|(a, b)| law.mass(a, Some(b))).sum();
            assert!((dry + wet - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_samples_stay_in_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let law = DropLaw::Geometric { p: 0.4 };
        for _ in 0..2000 {
            let k = law.sample_in(5, Some(9), &mut rng);
            assert!((5..=9).contains(&k));
            assert!(law.sample_in(12, None, &mut rng) >= 12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(run(0.0, 1, 10).is_err());
        assert!(run(1.0, 1, 10).is_err());
        assert!(run(0.5, 1, 0).is_err());
        assert!(stretched_tail_run(1.0, 10, 1).is_err());
        assert!(stretched_tail_run(0.0, 10, 1).is_err());
    }

    #[test]
    fn single_drop_budget() {
        for seed in 0..200 {
            let r = run(0.5, seed, 1).unwrap();
            assert_eq!(r.capped, r.k != 1 || r.t != 1);
            assert!(r.t == 1);
        }
    }

    #[test]
    fn results_satisfy_invariants() {
        for seed in 0..200 {
            let r = run(0.6, seed, 1_000_000).unwrap();
            assert!(!r.capped);
            assert!(r.t >= r.k && r.k >= 1 && r.effective_drops >= r.k);
        }
    }

    #[test]
    fn synthetic_fit() {
        let points: Vec<RainstickPoint> = [0.35, 0.45, 0.55]
            .iter()
            .map(|&p| {
                let k = (1.1524f64 / p).exp();
                RainstickPoint { p, completed: 1, capped: 0, mean_k: k, mean_log_k: k.ln(), median_k: k }
            })
            .collect();
        for how in [KSummary::LogMean, KSummary::MeanLog, KSummary::LogMedian] {
            assert!((fit_c(&points, how).unwrap().c - 1.1524).abs() < 1e-9);
        }
        assert!(estimate_c(&[0.5], 10, 0, 1000).is_err());
    }
}
