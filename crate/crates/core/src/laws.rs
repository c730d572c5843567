//! Closed-form laws of one-dimensional bridge functionals and the
//! multi-point formulas built from them, with exact inverse-CDF samplers.
//!
//! Samplers never own randomness: callers pass a uniform variate in (0, 1).
//! Atoms are realized exactly (a local time of exactly `0.0`).

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::network::{cross_conductance_of, BoundarySpec, KernelMatrix, Network};

/// Survival values below this are reported as zero with `underflow` set.
pub const UNDERFLOW: f64 = 1e-300;

/// Brownian bridge from `start` to `end` over a time (resistance) `length`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeSpec {
    pub start: f64,
    pub end: f64,
    pub length: f64,
}

impl BridgeSpec {
    pub fn new(start: f64, end: f64, length: f64) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidArgument(format!("bridge length {length} must be positive")));
        }
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::InvalidArgument("bridge endpoints must be finite".into()));
        }
        Ok(Self { start, end, length })
    }
}

/// A probability computed in log space, clamped to zero on underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tail {
    pub value: f64,
    pub underflow: bool,
}

impl Tail {
    fn from_log(log_p: f64) -> Self {
        let value = log_p.min(0.0).exp();
        if value < UNDERFLOW {
            Self { value: 0.0, underflow: true }
        } else {
            Self { value, underflow: false }
        }
    }
}

fn check_uniform(u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("uniform variate {u} outside (0, 1)")))
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `ln Φ(z)`, accurate far into the lower tail.
pub fn log_normal_cdf(z: f64) -> f64 {
    if z > -30.0 {
        normal_cdf(z).ln()
    } else {
        // Mills-ratio expansion
        let z2 = z * z;
        -0.5 * z2 - (-z).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

fn local_time_log_survival(b: &BridgeSpec, level: f64) -> f64 {
    let s = b.start.abs() + b.end.abs() + level;
    let d = b.start - b.end;
    -(s * s - d * d) / (2.0 * b.length)
}

/// `P(L_T > ℓ)` for the local time at zero of the bridge.
pub fn local_time_survival(b: &BridgeSpec, level: f64) -> f64 {
    local_time_tail(b, level).value
}

pub fn local_time_tail(b: &BridgeSpec, level: f64) -> Tail {
    if level < 0.0 {
        return Tail { value: 1.0, underflow: false };
    }
    Tail::from_log(local_time_log_survival(b, level))
}

/// Exact inverse-CDF draw of the local time at zero; `u` is the survival
/// level, so `P(L_T > sample(u)) = u` whenever the sample is positive.
pub fn sample_local_time(b: &BridgeSpec, u: f64) -> Result<f64> {
    check_uniform(u)?;
    let d = b.start - b.end;
    let root = (d * d - 2.0 * b.length * u.ln()).sqrt();
    Ok((root - b.start.abs() - b.end.abs()).max(0.0))
}

/// `P(min W > level)`. Zero once the level reaches an endpoint.
pub fn bridge_min_survival(b: &BridgeSpec, level: f64) -> f64 {
    let lo = b.start.min(b.end);
    if level >= lo {
        return 0.0;
    }
    let x = -2.0 * (b.start - level) * (b.end - level) / b.length;
    -x.exp_m1()
}

/// Probability that the bridge touches `level`.
pub fn bridge_touch_probability(b: &BridgeSpec, level: f64) -> f64 {
    1.0 - bridge_min_survival(b, level)
}

/// Exact inverse-CDF draw of the bridge minimum: `P(min ≤ sample(u)) = u`.
pub fn sample_bridge_min(b: &BridgeSpec, u: f64) -> Result<f64> {
    check_uniform(u)?;
    let (p, q) = (b.start, b.end);
    let c = -0.5 * b.length * u.ln();
    let disc = ((p - q) * (p - q) + 4.0 * c).sqrt();
    Ok(0.5 * ((p + q) - disc).min(2.0 * p.min(q)))
}

/// One boundary pair of a two-set law: kernel weight and the two values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm {
    pub conductance: f64,
    pub hat_value: f64,
    pub check_value: f64,
}

/// Law of the pseudo-distance between the two blocks of a boundary
/// partition with sign-constant data.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSetLaw {
    pub terms: Vec<PairTerm>,
}

impl TwoSetLaw {
    pub fn new(kernel: &KernelMatrix, net: &Network, bc: &BoundarySpec) -> Result<Self> {
        let p = bc.check_sign_constancy()?;
        let pos = |v: usize| -> Result<usize> {
            kernel
                .position(net.name(v))
                .ok_or_else(|| Error::InvalidArgument(format!("kernel lacks `{}`", net.name(v))))
        };
        let mut terms = Vec::with_capacity(p.hat.len() * p.check.len());
        for &x in &p.hat {
            for &y in &p.check {
                terms.push(PairTerm {
                    conductance: kernel.get(pos(x)?, pos(y)?),
                    hat_value: bc.value(x).unwrap_or(0.0),
                    check_value: bc.value(y).unwrap_or(0.0),
                });
            }
        }
        Ok(Self { terms })
    }

    /// Computes the boundary kernel and builds the law.
    pub fn from_network(net: &Network, bc: &BoundarySpec) -> Result<Self> {
        let kernel = crate::network::effective_kernel(net, bc.boundary())?;
        Self::new(&kernel, net, bc)
    }

    pub fn log_survival(&self, level: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let s = t.hat_value.abs() + t.check_value.abs() + level;
                let d = t.hat_value - t.check_value;
                -0.5 * t.conductance * (s * s - d * d)
            })
            .sum()
    }

    /// `P(δ > ℓ)`; at `ℓ = 0` this is the probability the blocks are
    /// separated.
    pub fn survival(&self, level: f64) -> f64 {
        self.tail(level).value
    }

    pub fn tail(&self, level: f64) -> Tail {
        if level < 0.0 {
            return Tail { value: 1.0, underflow: false };
        }
        Tail::from_log(self.log_survival(level))
    }

    /// Exact inverse-CDF draw; zero on the connection atom.
    pub fn sample(&self, u: f64) -> Result<f64> {
        check_uniform(u)?;
        // Σc(s+ℓ)² − Σc d² = −2 ln u is quadratic in ℓ.
        let (mut a, mut b, mut c0) = (0.0, 0.0, 0.0);
        for t in &self.terms {
            let s = t.hat_value.abs() + t.check_value.abs();
            let d = t.hat_value - t.check_value;
            a += t.conductance;
            b += t.conductance * s;
            c0 += t.conductance * (s * s - d * d);
        }
        let rhs = -2.0 * u.ln() - c0;
        if rhs <= 0.0 {
            return Ok(0.0);
        }
        Ok((-b + (b * b + a * rhs).sqrt()) / a)
    }
}

/// `P(δ_{Â,Ǎ} > ℓ)` for the network's boundary partition.
pub fn two_set_survival(net: &Network, bc: &BoundarySpec, level: f64) -> Result<f64> {
    Ok(TwoSetLaw::from_network(net, bc)?.survival(level))
}

/// Laplace transform `E[exp(-u C^eff(Λ_a, Ǎ))]` of the first-passage-set
/// conductance.
pub fn fps_laplace(cross_conductance: f64, mean: f64, check_value: f64, level: f64, u: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::InvalidArgument(format!("Laplace argument {u} must be positive")));
    }
    let root = ((check_value - level).powi(2) + 2.0 * u).sqrt();
    let s = mean - level + root;
    let d = mean - check_value;
    Ok((-0.5 * cross_conductance * (s * s - d * d)).exp())
}

/// Parameters of the first-passage-set law read off a partitioned network
/// with constant data on the check block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpsLawParams {
    pub cross_conductance: f64,
    pub mean: f64,
    pub check_value: f64,
}

impl FpsLawParams {
    pub fn from_network(net: &Network, bc: &BoundarySpec) -> Result<Self> {
        let p = bc
            .partition()
            .ok_or_else(|| Error::InvalidArgument("partition required".into()))?;
        let check_value = bc.value(p.check[0]).unwrap_or(0.0);
        if p.check.iter().any(|&v| bc.value(v) != Some(check_value)) {
            return Err(Error::InvalidArgument("boundary values not constant on check block".into()));
        }
        let kernel = crate::network::effective_kernel(net, bc.boundary())?;
        Ok(Self {
            cross_conductance: cross_conductance_of(&kernel, bc),
            mean: crate::network::boundary_mean(net, bc)?,
            check_value,
        })
    }

    pub fn laplace(&self, level: f64, u: f64) -> Result<f64> {
        fps_laplace(self.cross_conductance, self.mean, self.check_value, level, u)
    }

    /// The equivalent one-edge bridge: from the check value to the mean.
    pub fn bridge(&self) -> BridgeSpec {
        BridgeSpec {
            start: self.check_value,
            end: self.mean,
            length: 1.0 / self.cross_conductance,
        }
    }
}

/// `P(T_a ≤ t)` for standard Brownian motion started at `start`.
pub fn bm_hitting_cdf(start: f64, level: f64, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("time {t} must be nonnegative")));
    }
    if start == level {
        return Ok(1.0);
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(erfc((start - level).abs() / (2.0 * t).sqrt()))
}

/// CDF of the last visit time of `level` by the bridge, with an atom at 0
/// of mass equal to the probability the bridge never visits `level`.
pub fn last_visit_cdf(b: &BridgeSpec, level: f64, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("time {t} must be nonnegative")));
    }
    if t >= b.length {
        return Ok(1.0);
    }
    // Orient so the bridge ends strictly above the level.
    let (alpha, beta) = if b.end > level {
        (b.start - level, b.end - level)
    } else if b.end < level {
        (level - b.start, level - b.end)
    } else {
        return Ok(0.0);
    };
    let s = t / b.length;
    if s == 0.0 {
        return Ok(if alpha > 0.0 {
            -(-2.0 * alpha * beta / b.length).exp_m1()
        } else {
            0.0
        });
    }
    let sigma = (b.length * s * (1.0 - s)).sqrt();
    let z1 = (alpha * (1.0 - s) + beta * s) / sigma;
    let z2 = (alpha * (1.0 - s) - beta * s) / sigma;
    let second = (-2.0 * alpha * beta / b.length + log_normal_cdf(z2)).exp();
    Ok((normal_cdf(z1) - second).clamp(0.0, 1.0))
}
