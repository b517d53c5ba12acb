//! Closed-form predictions for the heralded amplification protocol.
//!
//! For `n` signal modes carrying a single shared photon with survival
//! probability `eta`, and variable splitters of transmission `t`:
//!
//! * success probability `P = eta (1-t) t^(n-1) + (1-eta) t^n`,
//! * heralded survival `eta' = eta (1-t) t^(n-1) / P`, which simplifies to
//!   `eta (1-t) / (eta (1-t) + (1-eta) t)` and does not depend on `n`,
//! * gain `G = eta' / eta = (1-t) / (eta (1-t) + (1-eta) t)`.
//!
//! `G > 1` exactly when `t < 1/2`, `G = 1` at `t = 1/2`, and `G -> 1/eta`
//! as `t -> 0`: full restoration of the input at vanishing success rate.

use crate::error::{Error, Result};

/// Relative tolerance for the internal agreement check between the
/// n-dependent and simplified forms of the heralded survival probability.
const FORM_AGREEMENT_TOL: f64 = 1e-9;

fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::OutOfRange {
            name,
            value,
            range: "[0, 1]",
        });
    }
    Ok(())
}

fn check_n(n: u32) -> Result<()> {
    if n < 2 {
        return Err(Error::TooFewModes(n));
    }
    Ok(())
}

/// Amplification gain together with a boundary marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gain {
    /// The gain `G = eta' / eta`.
    pub value: f64,
    /// True when `(eta, t)` lies on the boundary of the unit square, where
    /// the value is a continuous limit or a degenerate exact value rather
    /// than an interior operating point.
    pub is_limit: bool,
}

/// Gain of the heralded channel over the bare loss channel.
///
/// Boundary handling: at `t = 0` the gain is the limit `1/eta`; at
/// `eta = 0` it is the limit `(1-t)/t`; both carry `is_limit = true`, as do
/// the degenerate lines `t = 1` (gain 0) and `eta = 1` (gain 1). The two
/// corners `(eta, t) = (0, 0)` and `(1, 1)` have no continuous limit and
/// are rejected.
pub fn gain(eta: f64, t: f64) -> Result<Gain> {
    check_unit_interval("eta", eta)?;
    check_unit_interval("t", t)?;
    let corner = (eta == 0.0 && t == 0.0) || (eta == 1.0 && t == 1.0);
    if corner {
        return Err(Error::UndefinedLimit {
            quantity: "gain",
            eta,
            t,
        });
    }
    let is_limit = eta == 0.0 || eta == 1.0 || t == 0.0 || t == 1.0;
    let value = if t == 0.0 {
        1.0 / eta
    } else if eta == 0.0 {
        (1.0 - t) / t
    } else {
        (1.0 - t) / (eta * (1.0 - t) + (1.0 - eta) * t)
    };
    Ok(Gain { value, is_limit })
}

/// Survival probability of the signal photon conditioned on heralding.
///
/// Computed from the n-independent simplified form; when the n-dependent
/// quotient is numerically meaningful the two are checked against each
/// other. Boundaries follow the same rules as [`gain`]: the two corners
/// `(0, 0)` and `(1, 1)` are rejected, `t = 0` yields the limit 1.
pub fn eta_prime(eta: f64, t: f64, n: u32) -> Result<f64> {
    check_n(n)?;
    check_unit_interval("eta", eta)?;
    check_unit_interval("t", t)?;
    if (eta == 0.0 && t == 0.0) || (eta == 1.0 && t == 1.0) {
        return Err(Error::UndefinedLimit {
            quantity: "eta_prime",
            eta,
            t,
        });
    }
    let value = eta * (1.0 - t) / (eta * (1.0 - t) + (1.0 - eta) * t);
    let p = success_prob(eta, t, n)?;
    if p > 0.0 {
        let quotient = eta * (1.0 - t) * t.powi(n as i32 - 1) / p;
        assert!(
            (quotient - value).abs() <= FORM_AGREEMENT_TOL * value.max(1.0),
            "survival probability forms disagree: {quotient} vs {value} \
             at eta = {eta}, t = {t}, n = {n}"
        );
    }
    Ok(value)
}

/// Probability that every detector pair heralds success.
///
/// `P = eta (1-t) t^(n-1) + (1-eta) t^n`, valid on the whole closed unit
/// square including its boundary.
pub fn success_prob(eta: f64, t: f64, n: u32) -> Result<f64> {
    check_n(n)?;
    check_unit_interval("eta", eta)?;
    check_unit_interval("t", t)?;
    Ok(eta * (1.0 - t) * t.powi(n as i32 - 1) + (1.0 - eta) * t.powi(n as i32))
}

/// Whether the heralded channel beats the bare one, i.e. `G > 1`.
///
/// Equivalent to `t < 1/2` whenever `eta < 1`; at `eta = 1` nothing can be
/// gained and this returns false.
pub fn is_amplifying(eta: f64, t: f64) -> Result<bool> {
    Ok(gain(eta, t)?.value > 1.0)
}

/// Quantity a sweep can tabulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// The gain `G`.
    Gain,
    /// The success probability `P`.
    SuccessProb,
}

impl Quantity {
    /// Stable name used in tabular output.
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Gain => "gain",
            Quantity::SuccessProb => "success_prob",
        }
    }
}

/// One tabulated point of an analytic curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub value: f64,
    /// See [`Gain::is_limit`]; always false for the success probability,
    /// whose formula is exact on the whole closed square.
    pub is_limit: bool,
}

/// Tabulates a quantity over the given transmissions at fixed `eta` and `n`.
pub fn curve(quantity: Quantity, n: u32, eta: f64, ts: &[f64]) -> Result<Vec<CurvePoint>> {
    check_n(n)?;
    let mut out = Vec::with_capacity(ts.len());
    for &t in ts {
        let point = match quantity {
            Quantity::Gain => {
                let g = gain(eta, t)?;
                CurvePoint {
                    t,
                    value: g.value,
                    is_limit: g.is_limit,
                }
            }
            Quantity::SuccessProb => CurvePoint {
                t,
                value: success_prob(eta, t, n)?,
                is_limit: false,
            },
        };
        out.push(point);
    }
    Ok(out)
}
