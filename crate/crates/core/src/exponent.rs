//! Closed-form error-exponent bounds, root solving and regime
//! classification for the AWGN channel with rate-limited feedback.
//!
//! All rates are in nats per channel use and the noise variance is fixed at
//! one, so the power `P` doubles as the SNR. The central objects are:
//!
//! * `capacity` — `C = log(1 + P) / 2`;
//! * `shannon_exponent_lower` — the achievable non-feedback exponent
//!   `E(R, P) = (P/4)(1 - sqrt(1 - e^{-2R}))`, valid only below
//!   [`rate_validity_threshold`];
//! * `chernoff_exponent` / `solve_tau0` — the chi-square large-deviation
//!   rate `E_c(tau) = (tau - 1 - log tau)/2` and its inverse at `R_FB`;
//! * `exponent_upper_bound` — `E_up = 4P + tau0/2 + R_FB`, the cap on the
//!   first-order exponent when `R_FB < R`;
//! * `fb_exponent_lower_bound` — `E(R, P) + R_FB`, the feedback gain
//!   achievable with compressed feedback (the non-feedback exponent has no
//!   closed form, so the Shannon-style bound above stands in for it and the
//!   naming makes the proxy explicit);
//! * `classify_regime` / `bound_curve` — the finite/unbounded split of the
//!   exponent as a function of `R_FB`, which jumps at `R_FB = R`.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Absolute tolerance on the root `tau0` returned by [`solve_tau0`].
pub const TAU_TOLERANCE: f64 = 1e-12;

/// Guaranteed residual of the root in exponent units.
pub const ROOT_RESIDUAL: f64 = 1e-10;

/// Operating point of one channel: power budget, forward rate, feedback rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Average power constraint (unitless SNR; noise variance is 1).
    pub power: f64,
    /// Forward rate in nats per channel use.
    pub rate: f64,
    /// Feedback rate in nats per channel use.
    pub feedback_rate: f64,
}

impl ChannelParams {
    pub fn new(power: f64, rate: f64, feedback_rate: f64) -> Result<Self> {
        if !(power > 0.0) || !power.is_finite() {
            return Err(Error::invalid(format!("power must be positive and finite, got {power}")));
        }
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::invalid(format!("rate must be nonnegative and finite, got {rate}")));
        }
        if !(feedback_rate >= 0.0) || !feedback_rate.is_finite() {
            return Err(Error::invalid(format!(
                "feedback rate must be nonnegative and finite, got {feedback_rate}"
            )));
        }
        Ok(ChannelParams { power, rate, feedback_rate })
    }
}

/// Channel capacity `C = log(1 + P) / 2` in nats per use.
pub fn capacity(power: f64) -> Result<f64> {
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::invalid(format!("power must be positive and finite, got {power}")));
    }
    Ok(0.5 * power.ln_1p())
}

/// Rate threshold below which the achievable exponent formula applies:
/// `log((2 + sqrt(P^2 + 4)) / 4) / 2`.
pub fn rate_validity_threshold(power: f64) -> Result<f64> {
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::invalid(format!("power must be positive and finite, got {power}")));
    }
    Ok(0.5 * ((2.0 + (power * power + 4.0).sqrt()) / 4.0).ln())
}

/// Achievable non-feedback error exponent `E(R, P) = (P/4)(1 - sqrt(1 - e^{-2R}))`.
///
/// Only proven for `0 < R < rate_validity_threshold(P)`. Outside that
/// region the call returns [`Error::OutOfValidity`], which still carries the
/// formula value for diagnostic use; this is a signal distinct from a
/// parameter error, so sweeps can render partial curves.
pub fn shannon_exponent_lower(rate: f64, power: f64) -> Result<f64> {
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::invalid(format!("power must be positive and finite, got {power}")));
    }
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::invalid(format!("rate must be nonnegative and finite, got {rate}")));
    }
    let value = power / 4.0 * (1.0 - (1.0 - (-2.0 * rate).exp()).sqrt());
    let threshold = rate_validity_threshold(power)?;
    if rate >= threshold {
        return Err(Error::OutOfValidity { rate, threshold, value });
    }
    Ok(value)
}

/// Chernoff exponent of the unit chi-square tail,
/// `E_c(tau) = (tau - 1 - log tau) / 2`.
///
/// Zero at `tau = 1` and strictly increasing for `tau > 1`.
pub fn chernoff_exponent(tau: f64) -> Result<f64> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("tau must be positive and finite, got {tau}")));
    }
    Ok(0.5 * (tau - 1.0 - tau.ln()))
}

/// Solves `E_c(tau0) = R_FB` for the unique root `tau0 >= 1`.
///
/// Bracketed bisection on `[1, 1 + 2 R_FB + 2 max(1, log(1 + 2 R_FB)) * 2]`,
/// expanding the bracket until a sign change, then bisecting to
/// [`TAU_TOLERANCE`] in `tau`. Monotonicity of `E_c` on `tau >= 1` makes
/// convergence unconditional.
pub fn solve_tau0(feedback_rate: f64) -> Result<f64> {
    if !(feedback_rate >= 0.0) || !feedback_rate.is_finite() {
        return Err(Error::invalid(format!(
            "feedback rate must be nonnegative and finite, got {feedback_rate}"
        )));
    }
    if feedback_rate == 0.0 {
        return Ok(1.0);
    }
    let f = |tau: f64| 0.5 * (tau - 1.0 - tau.ln()) - feedback_rate;
    let mut lo = 1.0;
    let mut hi = 1.0 + 2.0 * feedback_rate + 2.0 * (1.0f64).max((1.0 + 2.0 * feedback_rate).ln()) * 2.0;
    let mut expansions = 0;
    while f(hi) < 0.0 {
        hi = 1.0 + (hi - 1.0) * 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::NumericFailure { lo, hi });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= TAU_TOLERANCE {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::NumericFailure { lo, hi })
}

/// Upper bound on the first-order exponent for `R_FB < R`:
/// `E_up(R_FB, P) = 4P + tau0/2 + R_FB`.
///
/// The formula itself does not involve the forward rate; callers assert the
/// regime `R > R_FB` before treating it as a bound.
pub fn exponent_upper_bound(feedback_rate: f64, power: f64) -> Result<f64> {
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::invalid(format!("power must be positive and finite, got {power}")));
    }
    let tau0 = solve_tau0(feedback_rate)?;
    Ok(4.0 * power + tau0 / 2.0 + feedback_rate)
}

/// Achievable exponent with compressed feedback in the `R_FB < R` regime:
/// the non-feedback proxy exponent plus `R_FB`.
///
/// The true non-feedback exponent has no closed form here;
/// [`shannon_exponent_lower`] stands in for it, so this bound inherits that
/// formula's validity region.
pub fn fb_exponent_lower_bound(rate: f64, feedback_rate: f64, power: f64) -> Result<f64> {
    let cap = capacity(power)?;
    if !(feedback_rate >= 0.0) || !feedback_rate.is_finite() {
        return Err(Error::invalid(format!(
            "feedback rate must be nonnegative and finite, got {feedback_rate}"
        )));
    }
    if feedback_rate >= rate {
        return Err(Error::invalid(format!(
            "regime violation: feedback rate {feedback_rate} must be below forward rate {rate}"
        )));
    }
    if rate >= cap {
        return Err(Error::invalid(format!("regime violation: rate {rate} is at or above capacity {cap}")));
    }
    let base = shannon_exponent_lower(rate, power)?;
    Ok(base + feedback_rate)
}

/// Feasibility/order classification of an operating point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Regime {
    /// `R_FB >= R` and `R < C`: the first-order exponent is unbounded and an
    /// exponential order up to `max_order` is achievable.
    Subcritical { max_order: u32 },
    /// `R_FB < R < C`: finite first-order exponent, capped by `E_up`.
    SupercriticalFinite,
    /// `R >= C`: no reliable communication at all.
    Infeasible,
}

impl Regime {
    /// Token used in CSV output.
    pub fn token(&self) -> &'static str {
        match self {
            Regime::Subcritical { .. } => "SUBCRITICAL",
            Regime::SupercriticalFinite => "SUPERCRITICAL-FINITE",
            Regime::Infeasible => "INFEASIBLE",
        }
    }
}

/// Classifies the operating point and, in the subcritical regime, reports
/// the largest achievable exponential order `L` (largest integer with
/// `R <= R_FB / (L - 1)`).
pub fn classify_regime(params: &ChannelParams) -> Result<Regime> {
    let cap = capacity(params.power)?;
    if params.rate >= cap {
        return Ok(Regime::Infeasible);
    }
    if !(params.rate > 0.0) {
        return Err(Error::invalid("forward rate must be positive to classify the regime".to_string()));
    }
    if params.feedback_rate < params.rate {
        return Ok(Regime::SupercriticalFinite);
    }
    // Start from floor(R_FB / R) + 1 and settle the boundary with the
    // defining inequality so the result matches an exhaustive scan.
    let ratio = (params.feedback_rate / params.rate).floor().min(u32::MAX as f64 - 2.0);
    let mut order = ratio as u32 + 1;
    while order < u32::MAX - 1 && params.rate <= params.feedback_rate / order as f64 {
        order += 1;
    }
    while order > 2 && params.rate > params.feedback_rate / (order as f64 - 1.0) {
        order -= 1;
    }
    Ok(Regime::Subcritical { max_order: order.max(2) })
}

/// A bound value that may sit outside its proven region or be unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum BoundValue {
    Finite(f64),
    Unbounded,
    /// The formula value is carried for diagnostics but not proven here.
    OutOfValidity(f64),
    Unavailable,
}

impl BoundValue {
    /// CSV cell rendering; unbounded values become the literal token `inf`.
    pub fn csv_cell(&self, scale: f64) -> String {
        match self {
            BoundValue::Finite(v) => format!("{}", v / scale),
            BoundValue::Unbounded => "inf".to_string(),
            BoundValue::OutOfValidity(_) | BoundValue::Unavailable => String::new(),
        }
    }

    pub fn as_finite(&self) -> Option<f64> {
        match self {
            BoundValue::Finite(v) => Some(*v),
            _ => None,
        }
    }
}

/// Per-point status of a bound sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowStatus {
    Ok,
    /// `R_FB >= R`: the exponent is unbounded at this point.
    Unbounded,
    /// Lower bound outside its validity region; upper bound still given.
    OutOfValidity,
    Infeasible,
}

impl RowStatus {
    pub fn token(&self) -> &'static str {
        match self {
            RowStatus::Ok => "OK",
            RowStatus::Unbounded => "UNBOUNDED",
            RowStatus::OutOfValidity => "OUT_OF_VALIDITY",
            RowStatus::Infeasible => "INFEASIBLE",
        }
    }
}

/// One row of a bound sweep over feedback rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub feedback_rate: f64,
    pub lower: BoundValue,
    pub upper: BoundValue,
    pub regime: Regime,
    pub status: RowStatus,
}

/// Full evaluation of every bound at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub params: ChannelParams,
    pub capacity: f64,
    pub rate_validity_threshold: f64,
    /// Non-feedback proxy exponent; out-of-validity above the threshold.
    pub shannon_lower: BoundValue,
    pub tau0: f64,
    pub chernoff_at_tau0: f64,
    /// `4P + tau0/2 + R_FB`, the first-order cap in the supercritical regime.
    pub e_up: f64,
    /// Achievable exponent with feedback (`shannon proxy + R_FB`) where the
    /// regime and validity permit.
    pub fb_lower_bound: BoundValue,
    pub regime: Regime,
}

/// Evaluates every bound at `params`.
pub fn report(params: &ChannelParams) -> Result<ExponentReport> {
    let cap = capacity(params.power)?;
    let threshold = rate_validity_threshold(params.power)?;
    let tau0 = solve_tau0(params.feedback_rate)?;
    let chernoff_at_tau0 = chernoff_exponent(tau0)?;
    let e_up = 4.0 * params.power + tau0 / 2.0 + params.feedback_rate;
    let regime = classify_regime(params)?;
    let shannon_lower = match shannon_exponent_lower(params.rate, params.power) {
        Ok(v) => BoundValue::Finite(v),
        Err(Error::OutOfValidity { value, .. }) => BoundValue::OutOfValidity(value),
        Err(e) => return Err(e),
    };
    let fb_lower_bound = match regime {
        Regime::Subcritical { .. } => BoundValue::Unbounded,
        Regime::Infeasible => BoundValue::Unavailable,
        Regime::SupercriticalFinite => {
            match fb_exponent_lower_bound(params.rate, params.feedback_rate, params.power) {
                Ok(v) => BoundValue::Finite(v),
                Err(Error::OutOfValidity { .. }) => BoundValue::Unavailable,
                Err(e) => return Err(e),
            }
        }
    };
    Ok(ExponentReport {
        params: *params,
        capacity: cap,
        rate_validity_threshold: threshold,
        shannon_lower,
        tau0,
        chernoff_at_tau0,
        e_up,
        fb_lower_bound,
        regime,
    })
}

/// Evaluates lower and upper exponent bounds over a grid of feedback rates.
///
/// Rows with `R_FB >= R` are marked unbounded (both columns), reproducing
/// the discontinuity of the exponent at `R_FB = R`. Per-point problems are
/// reported in the row status instead of aborting the sweep.
pub fn bound_curve(rate: f64, power: f64, rfb_grid: &[f64]) -> Result<Vec<BoundPoint>> {
    capacity(power)?; // validates the power
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::invalid(format!("rate must be positive and finite, got {rate}")));
    }
    for &r in rfb_grid {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::invalid(format!("grid values must be nonnegative and finite, got {r}")));
        }
    }
    let mut rows = Vec::with_capacity(rfb_grid.len());
    for &r_fb in rfb_grid {
        let params = ChannelParams { power, rate, feedback_rate: r_fb };
        let regime = classify_regime(&params)?;
        let row = match regime {
            Regime::Infeasible => BoundPoint {
                feedback_rate: r_fb,
                lower: BoundValue::Unavailable,
                upper: BoundValue::Unavailable,
                regime,
                status: RowStatus::Infeasible,
            },
            Regime::Subcritical { .. } => BoundPoint {
                feedback_rate: r_fb,
                lower: BoundValue::Unbounded,
                upper: BoundValue::Unbounded,
                regime,
                status: RowStatus::Unbounded,
            },
            Regime::SupercriticalFinite => {
                let upper = BoundValue::Finite(exponent_upper_bound(r_fb, power)?);
                match fb_exponent_lower_bound(rate, r_fb, power) {
                    Ok(v) => BoundPoint {
                        feedback_rate: r_fb,
                        lower: BoundValue::Finite(v),
                        upper,
                        regime,
                        status: RowStatus::Ok,
                    },
                    Err(Error::OutOfValidity { value, .. }) => BoundPoint {
                        feedback_rate: r_fb,
                        lower: BoundValue::OutOfValidity(value),
                        upper,
                        regime,
                        status: RowStatus::OutOfValidity,
                    },
                    Err(e) => return Err(e),
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}
