//! Conversion rates of the two down-conversion schemes, in the
//! continuous-wave, phase-matched-Lorentzian limit.
//!
//! Every rate is returned together with its named factor breakdown; the
//! product of the factors reproduces the rate value, which the self-check
//! suite verifies. The stimulated pair rate obeys an exact relation to the
//! spontaneous one, R_stim = R_spon * P_S / P_vac, with P_vac the vacuum
//! equivalent power of the seeded mode; the two sides are computed by
//! independent routes here and reconciled in tests.

use crate::error::{Error, Result};
use crate::physics::{ModeRole, ResonatorMode, RingResonator, Scheme};

/// Process parameters on top of a ring: which scheme, the nonlinear
/// coupling rate, and the channel powers driving it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessConfig {
    pub scheme: Scheme,
    pub ring: RingResonator,
    /// Nonlinear coupling rate Lambda, 1/s.
    pub lambda_nl: f64,
    /// Pump power in the channel, W. Drives mode T (degenerate) or P.
    pub p_pump: f64,
    /// Seed power in the channel for stimulated pair generation, W.
    pub p_seed: Option<f64>,
}

impl ProcessConfig {
    pub fn new(
        scheme: Scheme,
        ring: RingResonator,
        lambda_nl: f64,
        p_pump: f64,
        p_seed: Option<f64>,
    ) -> Result<Self> {
        if !lambda_nl.is_finite() {
            return Err(Error::schema(format!(
                "process.lambda_nl: must be finite, got {lambda_nl}"
            )));
        }
        if !p_pump.is_finite() || p_pump < 0.0 {
            return Err(Error::schema(format!(
                "process.p_pump: must be finite and >= 0, got {p_pump}"
            )));
        }
        if let Some(p) = p_seed {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::schema(format!(
                    "process.p_seed: must be finite and >= 0, got {p}"
                )));
            }
        }
        for role in scheme.required_roles() {
            ring.mode(*role)?;
        }
        Ok(ProcessConfig {
            scheme,
            ring,
            lambda_nl,
            p_pump,
            p_seed,
        })
    }

    fn require_scheme(&self, scheme: Scheme, op: &str) -> Result<()> {
        if self.scheme != scheme {
            return Err(Error::mode_misuse(format!(
                "{op} applies to the {scheme} scheme, but the process is configured as {}",
                self.scheme
            )));
        }
        Ok(())
    }

    fn seed_power(&self, op: &str) -> Result<f64> {
        self.p_seed.ok_or_else(|| {
            Error::schema(format!("process.p_seed is required for {op}"))
        })
    }
}

/// Which rate a result describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    SpontaneousDegenerate,
    SpontaneousNonDegenerate,
    Stimulated,
}

impl RateKind {
    pub fn label(self) -> &'static str {
        match self {
            RateKind::SpontaneousDegenerate => "spontaneous_degenerate",
            RateKind::SpontaneousNonDegenerate => "spontaneous_nondegenerate",
            RateKind::Stimulated => "stimulated",
        }
    }

    pub fn unit(self) -> &'static str {
        // All rates are photon (pair/triplet) counts per second.
        "1/s"
    }
}

/// One named multiplicative factor of a rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFactor {
    pub name: &'static str,
    pub value: f64,
}

/// A rate value with its multiplicative breakdown. `value` is the product
/// of `factors` in listed order.
#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    pub kind: RateKind,
    /// Events per second.
    pub value: f64,
    pub factors: Vec<RateFactor>,
}

impl RateResult {
    fn from_factors(kind: RateKind, factors: Vec<RateFactor>) -> Self {
        let value = factors.iter().fold(1.0, |acc, f| acc * f.value);
        RateResult {
            kind,
            value,
            factors,
        }
    }

    pub fn factor(&self, name: &str) -> Option<f64> {
        self.factors.iter().find(|f| f.name == name).map(|f| f.value)
    }
}

/// Knobs for the self-check suite to deliberately corrupt a formula and
/// prove the cross-checks catch it. Not part of the public model.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Halve the stimulated-rate prefactor.
    StimulatedPrefactor,
}

use crate::constants::HBAR;

/// Triplet generation rate of the degenerate scheme (photon triplets per
/// second leaving into the channel):
///
/// R = 2^5 |Lambda|^2 eta_F^3 eta_T * Q_F Q_T / (hbar w_T^2 w_F)
///     * P_pump * sinc^2(delta_kappa L / 2).
pub fn rate_spontaneous_degenerate(cfg: &ProcessConfig) -> Result<RateResult> {
    cfg.require_scheme(Scheme::Degenerate, "the degenerate triplet rate")?;
    let f = cfg.ring.mode(ModeRole::F)?;
    let t = cfg.ring.mode(ModeRole::T)?;
    let mismatch = cfg.ring.phase_mismatch(Scheme::Degenerate)?;
    let factors = vec![
        RateFactor {
            name: "prefactor",
            value: 32.0,
        },
        RateFactor {
            name: "lambda_sq",
            value: cfg.lambda_nl * cfg.lambda_nl,
        },
        RateFactor {
            name: "efficiency",
            value: f.escape_efficiency().powi(3) * t.escape_efficiency(),
        },
        RateFactor {
            name: "q_factor",
            value: f.q_loaded * t.q_loaded / (HBAR * t.omega.powi(2) * f.omega),
        },
        RateFactor {
            name: "power",
            value: cfg.p_pump,
        },
        RateFactor {
            name: "sinc_sq",
            value: mismatch.sinc_sq,
        },
    ];
    Ok(RateResult::from_factors(
        RateKind::SpontaneousDegenerate,
        factors,
    ))
}

/// Spontaneous pair generation rate of the non-degenerate scheme (pairs in
/// G, with the companion photon in S, per second):
///
/// R = 9 * 2^5 |Lambda|^2 eta_G^2 eta_S eta_P
///     * Q_G Q_S Q_P / (hbar w_P^2 (2 Q_S w_G + Q_G w_S))
///     * P_pump * sinc^2(delta_kappa L / 2).
pub fn rate_spontaneous_nondegenerate(cfg: &ProcessConfig) -> Result<RateResult> {
    cfg.require_scheme(Scheme::NonDegenerate, "the non-degenerate pair rate")?;
    let g = cfg.ring.mode(ModeRole::G)?;
    let s = cfg.ring.mode(ModeRole::S)?;
    let p = cfg.ring.mode(ModeRole::P)?;
    let mismatch = cfg.ring.phase_mismatch(Scheme::NonDegenerate)?;
    let q_denominator = 2.0 * s.q_loaded * g.omega + g.q_loaded * s.omega;
    let factors = vec![
        RateFactor {
            name: "prefactor",
            value: 288.0,
        },
        RateFactor {
            name: "lambda_sq",
            value: cfg.lambda_nl * cfg.lambda_nl,
        },
        RateFactor {
            name: "efficiency",
            value: g.escape_efficiency().powi(2) * s.escape_efficiency() * p.escape_efficiency(),
        },
        RateFactor {
            name: "q_factor",
            value: g.q_loaded * s.q_loaded * p.q_loaded
                / (HBAR * p.omega.powi(2) * q_denominator),
        },
        RateFactor {
            name: "power",
            value: cfg.p_pump,
        },
        RateFactor {
            name: "sinc_sq",
            value: mismatch.sinc_sq,
        },
    ];
    Ok(RateResult::from_factors(
        RateKind::SpontaneousNonDegenerate,
        factors,
    ))
}

/// Stimulated pair generation rate with a seed of power `p_seed` in S:
///
/// R = 9 * 2^6 |Lambda|^2 eta_G^2 eta_S eta_P
///     * Q_G Q_S Q_P / (hbar^2 w_P^2 w_G w_S^2)
///     * P_pump P_seed * sinc^2(delta_kappa L / 2).
pub fn rate_stimulated(cfg: &ProcessConfig) -> Result<RateResult> {
    rate_stimulated_with_fault(cfg, None)
}

#[doc(hidden)]
pub fn rate_stimulated_with_fault(cfg: &ProcessConfig, fault: Option<Fault>) -> Result<RateResult> {
    cfg.require_scheme(Scheme::NonDegenerate, "the stimulated pair rate")?;
    let p_seed = cfg.seed_power("the stimulated pair rate")?;
    let g = cfg.ring.mode(ModeRole::G)?;
    let s = cfg.ring.mode(ModeRole::S)?;
    let p = cfg.ring.mode(ModeRole::P)?;
    let mismatch = cfg.ring.phase_mismatch(Scheme::NonDegenerate)?;
    let prefactor = match fault {
        None => 576.0,
        Some(Fault::StimulatedPrefactor) => 288.0,
    };
    let factors = vec![
        RateFactor {
            name: "prefactor",
            value: prefactor,
        },
        RateFactor {
            name: "lambda_sq",
            value: cfg.lambda_nl * cfg.lambda_nl,
        },
        RateFactor {
            name: "efficiency",
            value: g.escape_efficiency().powi(2) * s.escape_efficiency() * p.escape_efficiency(),
        },
        RateFactor {
            name: "q_factor",
            value: g.q_loaded * s.q_loaded * p.q_loaded
                / (HBAR * HBAR * p.omega.powi(2) * g.omega * s.omega.powi(2)),
        },
        RateFactor {
            name: "power",
            value: cfg.p_pump * p_seed,
        },
        RateFactor {
            name: "sinc_sq",
            value: mismatch.sinc_sq,
        },
    ];
    Ok(RateResult::from_factors(RateKind::Stimulated, factors))
}

/// Vacuum equivalent power of the seeded mode: the seed power at which
/// stimulated emission matches spontaneous emission into the same spectral
/// window,
///
/// P_vac = hbar w_S / (2 / Gbar_S + 1 / Gbar_G),   W.
pub fn vacuum_power(generated: &ResonatorMode, seeded: &ResonatorMode) -> f64 {
    let inverse_widths = 2.0 / seeded.half_linewidth() + 1.0 / generated.half_linewidth();
    HBAR * seeded.omega / inverse_widths
}

/// Ratio of stimulated to spontaneous pair generation, P_seed / P_vac.
pub fn stimulation_enhancement(cfg: &ProcessConfig) -> Result<f64> {
    cfg.require_scheme(Scheme::NonDegenerate, "the stimulation enhancement")?;
    let p_seed = cfg.seed_power("the stimulation enhancement")?;
    let g = cfg.ring.mode(ModeRole::G)?;
    let s = cfg.ring.mode(ModeRole::S)?;
    Ok(p_seed / vacuum_power(g, s))
}
