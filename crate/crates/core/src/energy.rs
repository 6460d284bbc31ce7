//! Transmit-energy model and the prefetching policy.
//!
//! Sending `b` bits in `t` seconds at channel gain `h` costs
//! `λ b^ℓ / (h t^(ℓ−1))` joules. During the `τ`-second training window of
//! round `k` the device may prefetch the next feature of `p` of the `s`
//! current candidates; the candidates that survive the round and were not
//! prefetched are sent afterwards in the remaining `t = t0 − τ` seconds.
//! Each candidate survives independently with probability `ρ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::binomial_moment;

/// Largest candidate count for which [`prefetch_oracle_exact`] is allowed.
pub const EXACT_ORACLE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams<T> {
    /// Energy coefficient λ.
    pub lambda: T,
    /// Monomial order ℓ, typically 2..=5.
    pub ell: u32,
    /// Bits per transmitted feature α.
    pub alpha: T,
}

impl<T: Scalar> EnergyParams<T> {
    pub fn new(lambda: T, ell: u32, alpha: T) -> Result<Self> {
        if !(lambda > T::zero()) || !(alpha > T::zero()) || ell < 2 {
            return Err(Error::InvalidParameter(format!(
                "energy parameters need λ > 0, α > 0, ℓ >= 2 (got λ = {lambda}, ℓ = {ell}, α = {alpha})"
            )));
        }
        Ok(EnergyParams { lambda, ell, alpha })
    }

    /// `λ α^ℓ`, the factor that turns feature counts into joules.
    pub fn scale(&self) -> T {
        self.lambda * self.alpha.powi(self.ell as i32)
    }
}

impl Default for EnergyParams<f64> {
    fn default() -> Self {
        EnergyParams {
            lambda: 1e-17,
            ell: 3,
            alpha: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundTiming<T> {
    /// Round duration t0.
    pub t0: T,
    /// Training (and prefetch) window τ.
    pub tau: T,
    /// Post-training offload window, `t0 − τ`.
    pub t_offload: T,
}

impl<T: Scalar> RoundTiming<T> {
    pub fn new(t0: T, tau: T) -> Result<Self> {
        if !(tau > T::zero() && tau < t0) {
            return Err(Error::InvalidParameter(format!(
                "timing requires 0 < τ < t0 (got τ = {tau}, t0 = {t0})"
            )));
        }
        Ok(RoundTiming {
            t0,
            tau,
            t_offload: t0 - tau,
        })
    }
}

/// State of round `k` when the prefetch amount is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefetchInputs<T> {
    /// Number of current candidates s_k.
    pub s: usize,
    /// Survival ratio ρ_k.
    pub rho: T,
    /// Current channel gain h_k.
    pub h: T,
    /// ν = E[1/h].
    pub nu: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefetchDecision<T> {
    pub inputs: PrefetchInputs<T>,
    pub phi: T,
    /// Unclamped stationary point of the bounded objective.
    pub p_continuous: T,
    /// Clamped to `[0, s]` and rounded to the nearest integer.
    pub p_star: usize,
}

/// `λ b^ℓ / (h t^(ℓ−1))` for `b` bits.
pub fn tx_energy<T: Scalar>(bits: T, duration: T, gain: T, params: &EnergyParams<T>) -> Result<T> {
    if !(duration > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "transmission time must be positive, got {duration}"
        )));
    }
    if !(gain > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "channel gain must be positive, got {gain}"
        )));
    }
    if bits < T::zero() {
        return Err(Error::InvalidParameter(format!("negative bit count {bits}")));
    }
    let ell = params.ell as i32;
    Ok(params.lambda * bits.powi(ell) / (gain * duration.powi(ell - 1)))
}

/// `φ = (h ν)^(1/(ℓ−1)) τ / t`.
pub fn phi<T: Scalar>(inputs: &PrefetchInputs<T>, timing: &RoundTiming<T>, ell: u32) -> T {
    let e = T::one() / T::of(ell as f64 - 1.0);
    (inputs.h * inputs.nu).powf(e) * timing.tau / timing.t_offload
}

/// Closed-form minimizer of the bounded prefetch objective:
/// `p* = φ ρ^(1/(ℓ−1)) / (1 + φ ρ^(ℓ/(ℓ−1))) · (s ρ + ℓ/2)`.
pub fn optimal_prefetch<T: Scalar>(
    inputs: &PrefetchInputs<T>,
    timing: &RoundTiming<T>,
    params: &EnergyParams<T>,
) -> PrefetchDecision<T> {
    let ell = params.ell;
    let lf = T::of(ell as f64);
    let phi = phi(inputs, timing, ell);
    let rho = inputs.rho;
    let p_continuous = if rho <= T::zero() {
        T::zero()
    } else {
        let a = phi * rho.powf(T::one() / (lf - T::one()));
        let b = T::one() + phi * rho.powf(lf / (lf - T::one()));
        a / b * (T::of_usize(inputs.s) * rho + lf / T::of(2.0))
    };
    let clamped = p_continuous.max(T::zero()).min(T::of_usize(inputs.s));
    let p_star = clamped.round().to_usize().unwrap_or(0).min(inputs.s);
    PrefetchDecision {
        inputs: *inputs,
        phi,
        p_continuous,
        p_star,
    }
}

/// Bounded objective `p^ℓ/(h τ^(ℓ−1)) + ν/t^(ℓ−1) ((s − p)ρ + ℓ/2)^ℓ`,
/// without the common `λ α^ℓ` factor.
pub fn prefetch_objective<T: Scalar>(p: T, inputs: &PrefetchInputs<T>, timing: &RoundTiming<T>, ell: u32) -> T {
    let l = ell as i32;
    let lf = T::of(ell as f64);
    let remaining = (T::of_usize(inputs.s) - p) * inputs.rho + lf / T::of(2.0);
    p.powi(l) / (inputs.h * timing.tau.powi(l - 1)) + inputs.nu / timing.t_offload.powi(l - 1) * remaining.powi(l)
}

/// Derivative of [`prefetch_objective`] in `p`; zero at the interior optimum.
pub fn prefetch_stationarity<T: Scalar>(p: T, inputs: &PrefetchInputs<T>, timing: &RoundTiming<T>, ell: u32) -> (T, T) {
    let l = ell as i32;
    let lf = T::of(ell as f64);
    let remaining = (T::of_usize(inputs.s) - p) * inputs.rho + lf / T::of(2.0);
    let prefetch_term = lf * p.powi(l - 1) / (inputs.h * timing.tau.powi(l - 1));
    let offload_term = lf * inputs.nu * inputs.rho / timing.t_offload.powi(l - 1) * remaining.powi(l - 1);
    (prefetch_term, offload_term)
}

/// Exact expected cost of prefetching `p` samples:
/// `p^ℓ/(h τ^(ℓ−1)) + ν/t^(ℓ−1) E[n^ℓ]`, `n ~ Binomial(s − p, ρ)`,
/// without the common `λ α^ℓ` factor.
pub fn expected_prefetch_cost<T: Scalar>(p: usize, inputs: &PrefetchInputs<T>, timing: &RoundTiming<T>, ell: u32) -> T {
    let l = ell as i32;
    let p_t = T::of_usize(p);
    let remaining = inputs.s.saturating_sub(p);
    p_t.powi(l) / (inputs.h * timing.tau.powi(l - 1))
        + inputs.nu / timing.t_offload.powi(l - 1) * binomial_moment(remaining, inputs.rho, ell)
}

/// Exhaustive search of the exact expected cost over integer `p ∈ [0, s]`;
/// ties go to the smaller `p`.
pub fn prefetch_oracle_exact<T: Scalar>(
    inputs: &PrefetchInputs<T>,
    timing: &RoundTiming<T>,
    ell: u32,
) -> Result<usize> {
    if inputs.s > EXACT_ORACLE_LIMIT {
        return Err(Error::UseClosedForm(inputs.s));
    }
    let mut best = 0;
    let mut best_cost = expected_prefetch_cost(0, inputs, timing, ell);
    for p in 1..=inputs.s {
        let cost = expected_prefetch_cost(p, inputs, timing, ell);
        if cost < best_cost {
            best = p;
            best_cost = cost;
        }
    }
    Ok(best)
}

/// Expected energy of one-shot compression: every sample's features 1..K,
/// K − 1 rounds over the full `t0` and the last one over `t0 − τ`.
pub fn expected_energy_osc<T: Scalar>(
    samples: usize,
    rounds: usize,
    timing: &RoundTiming<T>,
    nu: T,
    params: &EnergyParams<T>,
) -> Result<T> {
    if rounds == 0 {
        return Err(Error::InvalidParameter("need at least one round".into()));
    }
    let l = params.ell as i32;
    let volume = (params.alpha * T::of_usize(samples)).powi(l);
    let per_full = params.lambda * nu * volume / timing.t0.powi(l - 1);
    let last = params.lambda * nu * volume / timing.t_offload.powi(l - 1);
    Ok(T::of_usize(rounds - 1) * per_full + last)
}

/// Per-round OSC energy over a full round, `λ ν (α M)^ℓ / t0^(ℓ−1)`.
pub fn osc_round_energy<T: Scalar>(samples: usize, timing: &RoundTiming<T>, nu: T, params: &EnergyParams<T>) -> T {
    let l = params.ell as i32;
    params.lambda * nu * (params.alpha * T::of_usize(samples)).powi(l) / timing.t0.powi(l - 1)
}

/// Upper bound on the expected energy spent on feature `k + 1`:
/// `λ ν α^ℓ ((s ρ)^ℓ/τ^(ℓ−1) + (s ρ (1 − ρ))^ℓ/t^(ℓ−1))`.
pub fn jd2p_energy_bound<T: Scalar>(s: usize, rho: T, timing: &RoundTiming<T>, nu: T, params: &EnergyParams<T>) -> T {
    let l = params.ell as i32;
    let sr = T::of_usize(s) * rho;
    params.lambda
        * nu
        * params.alpha.powi(l)
        * (sr.powi(l) / timing.tau.powi(l - 1) + (sr * (T::one() - rho)).powi(l) / timing.t_offload.powi(l - 1))
}

/// The bound of [`jd2p_energy_bound`] with `s = M`, divided by the OSC
/// per-round energy, as a function of `γ = τ/t0`.
pub fn pairwise_bound_ratio<T: Scalar>(gamma: T, rho: T, ell: u32) -> T {
    let l = ell as i32;
    ((T::one() / gamma).powi(l - 1) + (T::one() / (T::one() - gamma)).powi(l - 1) * (T::one() - rho).powi(l))
        * rho.powi(l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCheck<T> {
    pub holds: bool,
    /// `1 − (ρ(1 − ρ))^(ℓ/(ℓ−1))`.
    pub rhs: T,
    /// `rhs − τ/t0`; positive when the condition holds.
    pub margin: T,
}

/// Checks `τ/t0 < 1 − (ρ(1 − ρ))^(ℓ/(ℓ−1))`.
pub fn efficiency_condition<T: Scalar>(tau: T, t0: T, rho: T, ell: u32) -> EfficiencyCheck<T> {
    let lf = T::of(ell as f64);
    let rhs = T::one() - (rho * (T::one() - rho)).powf(lf / (lf - T::one()));
    let margin = rhs - tau / t0;
    EfficiencyCheck {
        holds: margin > T::zero(),
        rhs,
        margin,
    }
}

/// `10 log10(energy / reference)`.
pub fn to_db<T: Scalar>(energy: T, reference: T) -> T {
    T::of(10.0) * (energy / reference).log10()
}
