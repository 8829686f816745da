//! Sample-compression generalization bound for zero-training-error networks.
//!
//! With `m` samples, `n` hidden neurons and `s` support vectors:
//!
//! ```text
//! F(m, n, s, δ) = (n + ns + s + s·ln(m/s) + ln(1/δ)) / (m − s)
//! ```

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub delta: f64,
}

impl BoundInputs {
    pub fn new(m: usize, n: usize, s: usize, delta: f64) -> Result<Self> {
        let b = BoundInputs { m, n, s, delta };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.s >= self.m {
            return Err(Error::OutOfRange(format!(
                "support count s={} must be below sample count m={}",
                self.s, self.m
            )));
        }
        if self.n == 0 {
            return Err(Error::OutOfRange("neuron count must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::OutOfRange(format!("delta={} must lie in (0, 1]", self.delta)));
        }
        Ok(())
    }

    fn confidence(&self) -> f64 {
        (1.0 / self.delta).ln()
    }

    fn denominator(&self) -> f64 {
        (self.m - self.s) as f64
    }
}

/// Support-vector selection cost `s·ln(m/s) + s`, zero when `s = 0`.
pub fn nsv_contribution(m: f64, s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s * (m / s).ln() + s
    }
}

pub fn bound_value(b: &BoundInputs) -> Result<f64> {
    Ok((breakdown(b)?.total() + b.confidence()) / b.denominator())
}

/// `ln C(m, s)` by direct summation.
pub fn ln_binomial(m: usize, s: usize) -> f64 {
    assert!(s <= m);
    let s = s.min(m - s);
    (1..=s).map(|k| ((m - s + k) as f64 / k as f64).ln()).sum()
}

/// Bound with `ln C(m, s)` and the `ln 2` factors kept, before the
/// `C(m, s) ≤ (me/s)^s` approximation:
/// `(ln C(m,s) + (n + ns)·ln 2 + ln(1/δ)) / (m − s)`.
pub fn bound_value_tight(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let bits = (b.n + b.n * b.s) as f64;
    Ok((ln_binomial(b.m, b.s) + bits * std::f64::consts::LN_2 + b.confidence()) / b.denominator())
}

/// `1 − exp(−(kl_budget + ln(1/δ)) / (m − s))`.
pub fn bound_exact_zte(kl_budget: f64, m: usize, s: usize, delta: f64) -> Result<f64> {
    if !(kl_budget >= 0.0) || !kl_budget.is_finite() {
        return Err(Error::OutOfRange(format!("kl budget {kl_budget} must be finite and nonnegative")));
    }
    if s >= m {
        return Err(Error::OutOfRange(format!("s={s} must be below m={m}")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::OutOfRange(format!("delta={delta} must lie in (0, 1]")));
    }
    let x = (kl_budget + (1.0 / delta).ln()) / (m - s) as f64;
    Ok(-(-x).exp_m1())
}

/// One step of the counting argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub step: String,
    /// Number of choices at this step.
    pub ways: String,
    /// Contribution to the numerator, in nats.
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundBreakdown {
    pub rows: Vec<BreakdownRow>,
}

impl BoundBreakdown {
    pub fn total(&self) -> f64 {
        self.rows.iter().map(|r| r.contribution).sum()
    }
}

pub fn breakdown(b: &BoundInputs) -> Result<BoundBreakdown> {
    b.validate()?;
    let (n, s) = (b.n as f64, b.s as f64);
    let row = |step: &str, ways: &str, contribution: f64| BreakdownRow {
        step: step.into(),
        ways: ways.into(),
        contribution,
    };
    Ok(BoundBreakdown {
        rows: vec![
            row("training set -> support vectors", "2^s * C(m,s)", nsv_contribution(b.m as f64, s)),
            row("support vectors -> path weights", "2^(n*s)", n * s),
            row("path weights -> classifier", "2^n", n),
        ],
    })
}

/// Everything the CLI reports for one bound evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "F_exact")]
    pub f_exact: f64,
    #[serde(rename = "F_tight", skip_serializing_if = "Option::is_none")]
    pub f_tight: Option<f64>,
    pub breakdown: BoundBreakdown,
    /// True when `F` exceeds 1; the value is still reported unclamped.
    pub vacuous: bool,
}

pub fn bound_report(b: &BoundInputs, tight: bool) -> Result<BoundReport> {
    let f = bound_value(b)?;
    Ok(BoundReport {
        inputs: *b,
        f,
        f_exact: -(-f).exp_m1(),
        f_tight: if tight { Some(bound_value_tight(b)?) } else { None },
        breakdown: breakdown(b)?,
        vacuous: f > 1.0,
    })
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::OutOfRange(format!("{name}={v} must lie in [0, 1]")));
    }
    Ok(())
}

fn xlogy_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if y == 0.0 {
        f64::INFINITY
    } else {
        x * (x / y).ln()
    }
}

/// Bernoulli divergence `kl(q ‖ p)`.
pub fn kl_bernoulli(q: f64, p: f64) -> Result<f64> {
    check_unit("q", q)?;
    check_unit("p", p)?;
    Ok(xlogy_ratio(q, p) + xlogy_ratio(1.0 - q, 1.0 - p))
}

/// Largest `p ≥ q` with `kl(q ‖ p) ≤ budget`, by bisection.
pub fn kl_inverse(q: f64, budget: f64) -> Result<f64> {
    check_unit("q", q)?;
    if !(budget >= 0.0) {
        return Err(Error::OutOfRange(format!("budget={budget} must be nonnegative")));
    }
    if kl_bernoulli(q, 1.0)? <= budget {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (q, 1.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if kl_bernoulli(q, mid)? <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
