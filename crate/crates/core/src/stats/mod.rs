//! Reproducible randomness, empirical distributions and the statistical
//! comparisons used by the verification suites.

mod rng;

pub use rng::{Lane, RandomStream};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Default significance threshold for p-value tests.
pub const P_THRESHOLD: f64 = 0.01;

/// Outcome of one statistical or deterministic check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    pub statistic: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub runtime_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TestReport {
    fn base(statistic: &str, value: f64, threshold: f64, pass: bool, n: usize) -> Self {
        Self {
            test: String::new(),
            statistic: statistic.to_string(),
            value,
            p: None,
            z: None,
            threshold,
            pass,
            n,
            n2: None,
            seed: None,
            runtime_ms: 0.0,
            note: None,
        }
    }

    /// Deterministic check: passes when `value ≤ tolerance`.
    pub fn tolerance(test: &str, value: f64, tolerance: f64) -> Self {
        let mut r = Self::base("tolerance", value, tolerance, value <= tolerance, 1);
        r.test = test.to_string();
        r
    }

    /// Boolean check with an informative value.
    pub fn check(test: &str, value: f64, pass: bool) -> Self {
        let mut r = Self::base("check", value, f64::NAN, pass, 1);
        r.test = test.to_string();
        r
    }

    pub fn named(mut self, test: impl Into<String>) -> Self {
        self.test = test.into();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_runtime(mut self, ms: f64) -> Self {
        self.runtime_ms = ms;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    /// One human-readable line.
    pub fn summary(&self) -> String {
        let stat = match (self.p, self.z) {
            (Some(p), _) => format!("{}={:.4} p={:.4}", self.statistic, self.value, p),
            (None, Some(z)) => format!("{} z={:+.3} (|z|≤{})", self.statistic, z, self.threshold),
            _ if self.threshold.is_nan() => format!("{}={:.4e}", self.statistic, self.value),
            _ => format!("{}={:.3e} (≤{:.1e})", self.statistic, self.value, self.threshold),
        };
        format!(
            "[{}] {} {} n={}{}",
            if self.pass { "PASS" } else { "FAIL" },
            self.test,
            stat,
            self.n,
            self.seed.map(|s| format!(" seed={s}")).unwrap_or_default()
        )
    }
}

/// Sorted sample with a count of exact zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
    zeros: usize,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Degenerate("empty sample".into()));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::Degenerate("NaN in sample".into()));
        }
        samples.sort_by(f64::total_cmp);
        let zeros = samples.iter().filter(|&&x| x == 0.0).count();
        Ok(Self { sorted: samples, zeros })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn zeros(&self) -> usize {
        self.zeros
    }

    /// Fraction `≤ x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }

    /// Fraction `> x`.
    pub fn survival(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.len() as f64
    }
}

/// Asymptotic Kolmogorov tail `P(K > λ)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// p-value for a KS distance with effective size `n` (Stephens' correction).
pub fn ks_p_value(d: f64, n: f64) -> f64 {
    let sn = n.sqrt();
    kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d)
}

/// Point mass in a target law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

fn ks_distance_sorted(sorted: &[f64], cdf: &dyn Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}

/// Minimum sample size accepted by the asymptotic tests.
pub const MIN_SAMPLES: usize = 100;

/// One-sample KS against `cdf`. With an atom, the atom mass is tested by
/// a binomial z-test and the remaining values by KS against the
/// conditional continuous law; both must pass.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64, atom: Option<Atom>) -> Result<TestReport> {
    if samples.is_empty() {
        return Err(Error::Degenerate("empty sample".into()));
    }
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Degenerate(format!("need at least {MIN_SAMPLES} samples")));
    }
    let n = samples.len();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    match atom {
        None => {
            let d = ks_distance_sorted(&sorted, &cdf);
            let p = ks_p_value(d, n as f64);
            let mut r = TestReport::base("ks_one_sample", d, P_THRESHOLD, p > P_THRESHOLD, n);
            r.p = Some(p);
            Ok(r)
        }
        Some(atom) => {
            let hits = sorted.iter().filter(|&&x| x == atom.location).count();
            let p_atom = proportion_p_value(hits, n, atom.mass);
            let rest: Vec<f64> = sorted.into_iter().filter(|&x| x != atom.location).collect();
            let cont_mass = 1.0 - atom.mass;
            let (d, p_ks) = if rest.len() >= MIN_SAMPLES.min(n / 10).max(20) && cont_mass > 0.0 {
                let cond = |x: f64| {
                    let jump = if x >= atom.location { atom.mass } else { 0.0 };
                    ((cdf(x) - jump) / cont_mass).clamp(0.0, 1.0)
                };
                let d = ks_distance_sorted(&rest, &cond);
                (d, ks_p_value(d, rest.len() as f64))
            } else {
                (0.0, 1.0)
            };
            let p = p_atom.min(p_ks);
            let mut r = TestReport::base(
                "ks_one_sample+atom",
                d,
                P_THRESHOLD,
                p_atom > P_THRESHOLD && p_ks > P_THRESHOLD,
                n,
            );
            r.p = Some(p);
            r.n2 = Some(rest.len());
            r.note = Some(format!(
                "atom: {hits}/{n} observed vs mass {:.6} (p={p_atom:.4}); continuous KS p={p_ks:.4}",
                atom.mass
            ));
            Ok(r)
        }
    }
}

/// Two-sample KS distance (ties handled by advancing through equal values).
pub fn ks_two_sample_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Degenerate("empty sample".into()));
    }
    if a.len() < MIN_SAMPLES || b.len() < MIN_SAMPLES {
        return Err(Error::Degenerate(format!("need at least {MIN_SAMPLES} samples")));
    }
    let d = ks_two_sample_distance(a, b);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let p = ks_p_value(d, n * m / (n + m));
    let mut r = TestReport::base("ks_two_sample", d, P_THRESHOLD, p > P_THRESHOLD, a.len());
    r.p = Some(p);
    r.n2 = Some(b.len());
    Ok(r)
}

fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

fn proportion_p_value(hits: usize, n: usize, p: f64) -> f64 {
    let nf = n as f64;
    let var = nf * p * (1.0 - p);
    if var <= 0.0 {
        let expected_all = if p >= 1.0 { hits == n } else { hits == 0 };
        return if expected_all { 1.0 } else { 0.0 };
    }
    two_sided_p((hits as f64 - nf * p) / var.sqrt())
}

/// z-test of a sample mean against `target`; passes when `|z| ≤ tol_se`.
pub fn mean_z(samples: &[f64], target: f64, tol_se: f64) -> Result<TestReport> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Degenerate("need at least two samples".into()));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let z = if se > 0.0 {
        (mean - target) / se
    } else if mean == target {
        0.0
    } else {
        f64::INFINITY
    };
    let mut r = TestReport::base("mean_z", mean, tol_se, z.abs() <= tol_se, n);
    r.z = Some(z);
    r.note = Some(format!("target {target:.6}, se {se:.3e}"));
    Ok(r)
}

/// z-test of an observed frequency `hits / n` against probability `p`.
pub fn proportion_z(hits: usize, n: usize, p: f64, tol_se: f64) -> Result<TestReport> {
    if n == 0 {
        return Err(Error::Degenerate("empty sample".into()));
    }
    let nf = n as f64;
    let se = (p * (1.0 - p) / nf).sqrt();
    let freq = hits as f64 / nf;
    let z = if se > 0.0 {
        (freq - p) / se
    } else if freq == p {
        0.0
    } else {
        f64::INFINITY
    };
    let mut r = TestReport::base("proportion_z", freq, tol_se, z.abs() <= tol_se, n);
    r.z = Some(z);
    r.note = Some(format!("target {p:.6}, se {se:.3e}"));
    Ok(r)
}

/// Least-squares line through `(x, y)` with the slope's standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

pub fn slope_fit(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Degenerate("slope fit needs at least three paired points".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite point in slope fit".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all abscissae equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let slope_se = (rss / (n - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, intercept, slope_se })
}

/// True when at least `need` of the reports pass.
pub fn majority(reports: &[TestReport], need: usize) -> bool {
    reports.iter().filter(|r| r.pass).count() >= need
}
