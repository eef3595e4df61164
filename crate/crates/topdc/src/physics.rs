//! Ring-resonator mode model.
//!
//! Each resonance is linearized around its resonant wavenumber K:
//! w(k) = w0 + v (k - K). Coupling to the channel waveguide gives every
//! mode a Lorentzian response of half-linewidth Gbar = w0/(2 Q), of which
//! the coupling channel contributes Gbar_C = w0/(2 Q_C); the escape
//! efficiency Q/Q_C is the fraction of generated photons that reach the
//! channel. The field enhancement F(k) captures the channel-ring transfer
//! near resonance and enters every spectral amplitude in this crate.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::constants::{HBAR, SPEED_OF_LIGHT, VACUUM_PERMITTIVITY};
use crate::error::{Error, Result};
use crate::util::sinc;

/// Role a resonance plays in a down-conversion process.
///
/// `F` and `T` form the fully degenerate scheme: a pump photon in the
/// third-harmonic mode T decays into a triplet in F. `G`, `S` and `P` form
/// the non-degenerate scheme: a pump photon in P decays into a pair in G
/// and one photon in the seeded mode S.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModeRole {
    F,
    T,
    G,
    S,
    P,
}

impl ModeRole {
    pub const ALL: [ModeRole; 5] = [ModeRole::F, ModeRole::T, ModeRole::G, ModeRole::S, ModeRole::P];

    pub fn as_str(self) -> &'static str {
        match self {
            ModeRole::F => "F",
            ModeRole::T => "T",
            ModeRole::G => "G",
            ModeRole::S => "S",
            ModeRole::P => "P",
        }
    }
}

impl fmt::Display for ModeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModeRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F" => Ok(ModeRole::F),
            "T" => Ok(ModeRole::T),
            "G" => Ok(ModeRole::G),
            "S" => Ok(ModeRole::S),
            "P" => Ok(ModeRole::P),
            other => Err(Error::schema(format!(
                "unknown mode role '{other}' (expected one of F, T, G, S, P)"
            ))),
        }
    }
}

/// One resonance of the ring near a process wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorMode {
    pub role: ModeRole,
    /// Resonance angular frequency w0, rad/s.
    pub omega: f64,
    /// Loaded (total) quality factor.
    pub q_loaded: f64,
    /// Coupling quality factor; never below `q_loaded`.
    pub q_coupling: f64,
    /// Group velocity v at the resonance, m/s.
    pub v_group: f64,
    /// Resonant wavenumber K, rad/m.
    pub k_res: f64,
    /// Propagation constant kappa inside the ring, rad/m. Enters the
    /// phase-mismatch combination; equals `k_res` for a uniform waveguide.
    pub kappa_ring: f64,
    /// Characteristic refractive index entering the coupling rate.
    pub n_char: f64,
}

impl ResonatorMode {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        role: ModeRole,
        omega: f64,
        q_loaded: f64,
        q_coupling: f64,
        v_group: f64,
        k_res: f64,
        kappa_ring: f64,
        n_char: f64,
    ) -> Result<Self> {
        let m = ResonatorMode {
            role,
            omega,
            q_loaded,
            q_coupling,
            v_group,
            k_res,
            kappa_ring,
            n_char,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let role = self.role;
        for (name, v) in [
            ("omega", self.omega),
            ("q_loaded", self.q_loaded),
            ("q_coupling", self.q_coupling),
            ("v_group", self.v_group),
            ("n_char", self.n_char),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::schema(format!(
                    "modes.{role}.{name}: must be finite and > 0, got {v}"
                )));
            }
        }
        for (name, v) in [("k_res", self.k_res), ("kappa_ring", self.kappa_ring)] {
            if !v.is_finite() {
                return Err(Error::schema(format!(
                    "modes.{role}.{name}: must be finite, got {v}"
                )));
            }
        }
        if self.q_coupling < self.q_loaded {
            return Err(Error::physics(format!(
                "modes.{role}: q_coupling ({}) below q_loaded ({}) implies an escape \
                 efficiency above one",
                self.q_coupling, self.q_loaded
            )));
        }
        Ok(())
    }

    /// Total half-linewidth Gbar = w0/(2 Q), rad/s.
    pub fn half_linewidth(&self) -> f64 {
        self.omega / (2.0 * self.q_loaded)
    }

    /// Coupling contribution to the half-linewidth, w0/(2 Q_C), rad/s.
    pub fn coupling_half_linewidth(&self) -> f64 {
        self.omega / (2.0 * self.q_coupling)
    }

    /// Fraction of generated photons escaping into the channel, Q/Q_C.
    /// In (0, 1] by construction.
    pub fn escape_efficiency(&self) -> f64 {
        self.q_loaded / self.q_coupling
    }

    /// Linearized dispersion: w(k) = w0 + v (k - K).
    pub fn frequency_at(&self, k: f64) -> f64 {
        self.omega + self.v_group * (k - self.k_res)
    }

    /// Half-linewidth expressed as a wavenumber width, Gbar/v, rad/m.
    pub fn linewidth_wavenumber(&self) -> f64 {
        self.half_linewidth() / self.v_group
    }

    /// Vacuum wavelength of the resonance, m.
    pub fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / self.omega
    }
}

/// Ring-channel coupling constant gamma for one mode, stored as a
/// magnitude-squared and a phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingGamma {
    magnitude_sq: f64,
    phase: f64,
}

impl CouplingGamma {
    pub fn new(magnitude_sq: f64, phase: f64) -> Result<Self> {
        if !magnitude_sq.is_finite() || magnitude_sq < 0.0 {
            return Err(Error::schema(format!(
                "coupling gamma magnitude squared must be finite and >= 0, got {magnitude_sq}"
            )));
        }
        if !phase.is_finite() {
            return Err(Error::schema(format!(
                "coupling gamma phase must be finite, got {phase}"
            )));
        }
        Ok(CouplingGamma {
            magnitude_sq,
            phase: phase.rem_euclid(2.0 * std::f64::consts::PI),
        })
    }

    /// Point-coupling value consistent with the mode's linewidth budget:
    /// |gamma|^2 = 2 v Gbar_C, phase zero. With this choice the
    /// on-resonance enhancement reproduces the add-drop transfer result.
    pub fn standard_for(mode: &ResonatorMode) -> Self {
        CouplingGamma {
            magnitude_sq: 2.0 * mode.v_group * mode.coupling_half_linewidth(),
            phase: 0.0,
        }
    }

    pub fn magnitude_sq(&self) -> f64 {
        self.magnitude_sq
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.magnitude_sq.sqrt(), self.phase)
    }
}

/// Direction of the channel-ring transfer described by a field enhancement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldDirection {
    /// Channel photon entering the ring (pump, seed).
    Incoming,
    /// Ring photon leaving into the channel (generated light).
    Outgoing,
}

/// Lorentzian field enhancement of mode `mode` at wavenumber `k`:
///
/// F(k) = (1/sqrt(L)) gamma* / (v (K - k) + i Gbar)   incoming,
/// F(k) = (1/sqrt(L)) gamma* / (v (K - k) - i Gbar)   outgoing,
///
/// with L the ring circumference. Peak magnitude sits at k = K and falls to
/// half the peak power at detunings of one half-linewidth, v|K - k| = Gbar.
pub fn field_enhancement(
    mode: &ResonatorMode,
    gamma: &CouplingGamma,
    k: f64,
    direction: FieldDirection,
    ring_length: f64,
) -> Complex64 {
    debug_assert!(ring_length > 0.0);
    let detuning = mode.v_group * (mode.k_res - k);
    let half_linewidth = mode.half_linewidth();
    let denom = match direction {
        FieldDirection::Incoming => Complex64::new(detuning, half_linewidth),
        FieldDirection::Outgoing => Complex64::new(detuning, -half_linewidth),
    };
    gamma.value().conj() / (ring_length.sqrt() * denom)
}

/// Which down-conversion scheme a computation addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Triplet generation F^3 from the third-harmonic pump T.
    Degenerate,
    /// Pair generation G^2 S from the pump P, seeded in S.
    NonDegenerate,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Degenerate => "degenerate",
            Scheme::NonDegenerate => "non_degenerate",
        }
    }

    /// Roles a ring must provide for this scheme.
    pub fn required_roles(self) -> &'static [ModeRole] {
        match self {
            Scheme::Degenerate => &[ModeRole::F, ModeRole::T],
            Scheme::NonDegenerate => &[ModeRole::G, ModeRole::S, ModeRole::P],
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "degenerate" => Ok(Scheme::Degenerate),
            "non_degenerate" => Ok(Scheme::NonDegenerate),
            other => Err(Error::schema(format!(
                "process.scheme: unknown scheme '{other}' (expected 'degenerate' or \
                 'non_degenerate')"
            ))),
        }
    }
}

/// Momentum mismatch of a scheme and the sinc^2 suppression it causes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMismatch {
    /// delta_kappa, rad/m: kappa_T - 3 kappa_F (degenerate) or
    /// kappa_P - kappa_S - 2 kappa_G (non-degenerate).
    pub delta_kappa: f64,
    /// sinc^2(delta_kappa L / 2), in [0, 1]; 1 exactly on phase matching.
    pub sinc_sq: f64,
}

/// Optical nonlinearity of the ring waveguide, used when the coupling rate
/// is derived from material parameters rather than given directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nonlinearity {
    /// Effective chi3, m^2/V^2.
    pub chi3: f64,
    /// Effective transverse mode area, m^2.
    pub a_eff: f64,
}

impl Nonlinearity {
    pub fn new(chi3: f64, a_eff: f64) -> Result<Self> {
        if !chi3.is_finite() {
            return Err(Error::schema(format!(
                "ring.chi3: must be finite, got {chi3}"
            )));
        }
        if !a_eff.is_finite() || a_eff <= 0.0 {
            return Err(Error::schema(format!(
                "ring.a_eff: must be finite and > 0, got {a_eff}"
            )));
        }
        Ok(Nonlinearity { chi3, a_eff })
    }
}

/// A ring resonator with the set of modes participating in a process.
#[derive(Debug, Clone, PartialEq)]
pub struct RingResonator {
    /// Ring circumference L, m.
    length: f64,
    nonlinearity: Option<Nonlinearity>,
    modes: BTreeMap<ModeRole, ResonatorMode>,
}

impl RingResonator {
    pub fn new(
        length: f64,
        nonlinearity: Option<Nonlinearity>,
        modes: impl IntoIterator<Item = ResonatorMode>,
    ) -> Result<Self> {
        if !length.is_finite() || length <= 0.0 {
            return Err(Error::schema(format!(
                "ring.length: must be finite and > 0, got {length}"
            )));
        }
        let mut map = BTreeMap::new();
        for mode in modes {
            mode.validate()?;
            if map.insert(mode.role, mode).is_some() {
                return Err(Error::schema(format!(
                    "modes.{}: role listed more than once",
                    mode.role
                )));
            }
        }
        Ok(RingResonator {
            length,
            nonlinearity,
            modes: map,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn nonlinearity(&self) -> Option<&Nonlinearity> {
        self.nonlinearity.as_ref()
    }

    pub fn mode(&self, role: ModeRole) -> Result<&ResonatorMode> {
        self.modes.get(&role).ok_or_else(|| {
            Error::schema(format!("modes.{role}: required mode is not configured"))
        })
    }

    pub fn try_mode(&self, role: ModeRole) -> Option<&ResonatorMode> {
        self.modes.get(&role)
    }

    /// Modes in role order (F, T, G, S, P).
    pub fn modes(&self) -> impl Iterator<Item = &ResonatorMode> {
        self.modes.values()
    }

    /// Replace or insert a mode; used by parameter sweeps.
    pub fn set_mode(&mut self, mode: ResonatorMode) -> Result<()> {
        mode.validate()?;
        self.modes.insert(mode.role, mode);
        Ok(())
    }

    /// Field enhancement of `role` with the standard point coupling.
    pub fn field_enhancement(
        &self,
        role: ModeRole,
        k: f64,
        direction: FieldDirection,
    ) -> Result<Complex64> {
        let mode = self.mode(role)?;
        let gamma = CouplingGamma::standard_for(mode);
        Ok(field_enhancement(mode, &gamma, k, direction, self.length))
    }

    /// Momentum mismatch of `scheme` on this ring.
    pub fn phase_mismatch(&self, scheme: Scheme) -> Result<PhaseMismatch> {
        let delta_kappa = match scheme {
            Scheme::Degenerate => {
                let f = self.mode(ModeRole::F)?;
                let t = self.mode(ModeRole::T)?;
                t.kappa_ring - 3.0 * f.kappa_ring
            }
            Scheme::NonDegenerate => {
                let g = self.mode(ModeRole::G)?;
                let s = self.mode(ModeRole::S)?;
                let p = self.mode(ModeRole::P)?;
                p.kappa_ring - s.kappa_ring - 2.0 * g.kappa_ring
            }
        };
        let sinc_sq = sinc(delta_kappa * self.length / 2.0).powi(2);
        Ok(PhaseMismatch {
            delta_kappa,
            sinc_sq,
        })
    }

    /// Nonlinear coupling rate of a four-photon process with one photon in
    /// the high-frequency mode and three in the low-frequency one:
    ///
    /// Lambda = hbar sqrt(w_high w_low^3) / (4 eps0 c^2)
    ///          * sqrt(v_low^3 v_high / (n_low^3 n_high))
    ///          * chi3 / (L A_eff),   1/s.
    ///
    /// Requires the ring's material nonlinearity to be set.
    pub fn nonlinear_coupling_rate(&self, high: ModeRole, low: ModeRole) -> Result<f64> {
        let nl = self.nonlinearity.as_ref().ok_or_else(|| {
            Error::schema(
                "ring.chi3 and ring.a_eff are required to derive the nonlinear coupling rate"
                    .to_string(),
            )
        })?;
        let high = self.mode(high)?;
        let low = self.mode(low)?;
        let freq = HBAR * (high.omega * low.omega.powi(3)).sqrt()
            / (4.0 * VACUUM_PERMITTIVITY * SPEED_OF_LIGHT.powi(2));
        let group = (low.v_group.powi(3) * high.v_group / (low.n_char.powi(3) * high.n_char)).sqrt();
        Ok(freq * group * nl.chi3 / (self.length * nl.a_eff))
    }
}

#[cfg(test)]
pub(crate) mod test_fixtures {
    use super::*;

    /// Mode at 1550 nm with Q = 4e5 at critical coupling, group index 2.
    pub fn mode_1550(role: ModeRole) -> ResonatorMode {
        let omega = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / 1550e-9;
        let k_res = 2.0 * omega / SPEED_OF_LIGHT;
        ResonatorMode::new(
            role,
            omega,
            4e5,
            8e5,
            SPEED_OF_LIGHT / 2.0,
            k_res,
            k_res,
            2.0,
        )
        .unwrap()
    }

    /// Non-degenerate ring: G and S at 1550 nm, P at the energy-conserving
    /// third harmonic, all at critical coupling.
    pub fn ring_nondegenerate() -> RingResonator {
        let g = mode_1550(ModeRole::G);
        let s = mode_1550(ModeRole::S);
        let omega_p = 2.0 * g.omega + s.omega;
        let k_p = 2.0 * omega_p / SPEED_OF_LIGHT;
        let p = ResonatorMode::new(
            ModeRole::P,
            omega_p,
            6.4e4,
            1.28e5,
            SPEED_OF_LIGHT / 2.0,
            k_p,
            k_p,
            2.0,
        )
        .unwrap();
        RingResonator::new(1.445e-4, None, [g, s, p]).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_fixtures::*;
    use super::*;
    use approx::assert_relative_eq;

    fn mode_with_q(q_loaded: f64, q_coupling: f64) -> ResonatorMode {
        let mut m = mode_1550(ModeRole::G);
        m.q_loaded = q_loaded;
        m.q_coupling = q_coupling;
        m.validate().unwrap();
        m
    }

    #[test]
    fn half_linewidth_matches_hand_evaluation() {
        // w = 1.2153e15 rad/s (1550 nm), Q = 4e5 gives 1.5191e9 rad/s.
        let mut m = mode_1550(ModeRole::G);
        m.omega = 1.2153e15;
        assert_relative_eq!(m.half_linewidth(), 1.519125e9, max_relative = 1e-12);
    }

    #[test]
    fn doubling_q_halves_linewidth_exactly() {
        let m1 = mode_with_q(4e5, 8e5);
        let m2 = mode_with_q(8e5, 1.6e6);
        assert_eq!(m2.half_linewidth(), m1.half_linewidth() / 2.0);
    }

    #[test]
    fn escape_efficiency_known_values() {
        assert_eq!(mode_with_q(4e5, 8e5).escape_efficiency(), 0.5);
        assert_eq!(mode_with_q(4e5, 4e5).escape_efficiency(), 1.0);
        assert_eq!(mode_with_q(1e5, 4e5).escape_efficiency(), 0.25);
    }

    #[test]
    fn overcoupled_beyond_loaded_is_rejected() {
        let mut m = mode_1550(ModeRole::G);
        m.q_coupling = m.q_loaded / 2.0;
        let err = m.validate().unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn nonpositive_fields_are_rejected() {
        for field in 0..5 {
            let mut m = mode_1550(ModeRole::G);
            match field {
                0 => m.omega = 0.0,
                1 => m.q_loaded = -1.0,
                2 => m.q_coupling = f64::NAN,
                3 => m.v_group = 0.0,
                _ => m.n_char = -2.0,
            }
            assert!(m.validate().is_err());
        }
    }

    #[test]
    fn dispersion_is_linear_around_resonance() {
        let m = mode_1550(ModeRole::G);
        assert_eq!(m.frequency_at(m.k_res), m.omega);
        // Detunings of one linewidth are ~1e-6 of K, so k_res + dk loses
        // ~1e-10 of dk to rounding; compare at that precision.
        let dk = m.linewidth_wavenumber();
        assert_relative_eq!(
            m.frequency_at(m.k_res + dk),
            m.omega + m.half_linewidth(),
            max_relative = 1e-12
        );
        let up = m.frequency_at(m.k_res + dk) - m.omega;
        let up2 = m.frequency_at(m.k_res + 2.0 * dk) - m.omega;
        assert_relative_eq!(up2, 2.0 * up, max_relative = 1e-8);
    }

    #[test]
    fn standard_gamma_magnitude() {
        let m = mode_1550(ModeRole::G);
        let gamma = CouplingGamma::standard_for(&m);
        assert_relative_eq!(
            gamma.magnitude_sq(),
            2.0 * m.v_group * m.omega / (2.0 * m.q_coupling),
            max_relative = 1e-12
        );
        assert_eq!(gamma.phase(), 0.0);
    }

    #[test]
    fn enhancement_peak_value_on_resonance() {
        let m = mode_1550(ModeRole::G);
        let gamma = CouplingGamma::standard_for(&m);
        let length = 1.445e-4;
        let f = field_enhancement(&m, &gamma, m.k_res, FieldDirection::Incoming, length);
        let expected = gamma.magnitude_sq() / (length * m.half_linewidth().powi(2));
        assert_relative_eq!(f.norm_sqr(), expected, max_relative = 1e-12);
    }

    #[test]
    fn enhancement_half_power_at_one_half_linewidth() {
        let m = mode_1550(ModeRole::G);
        let gamma = CouplingGamma::standard_for(&m);
        let length = 1.445e-4;
        let peak = field_enhancement(&m, &gamma, m.k_res, FieldDirection::Incoming, length)
            .norm_sqr();
        for sign in [-1.0, 1.0] {
            let k = m.k_res + sign * m.linewidth_wavenumber();
            let f = field_enhancement(&m, &gamma, k, FieldDirection::Incoming, length);
            assert_relative_eq!(f.norm_sqr(), peak / 2.0, max_relative = 1e-8);
        }
    }

    #[test]
    fn incoming_and_outgoing_are_conjugate_for_real_gamma() {
        let m = mode_1550(ModeRole::G);
        let gamma = CouplingGamma::standard_for(&m);
        let length = 1.445e-4;
        let k = m.k_res + 3.7 * m.linewidth_wavenumber();
        let fin = field_enhancement(&m, &gamma, k, FieldDirection::Incoming, length);
        let fout = field_enhancement(&m, &gamma, k, FieldDirection::Outgoing, length);
        assert_eq!(fout, fin.conj());
    }

    #[test]
    fn enhancement_magnitude_is_even_in_detuning() {
        let m = mode_1550(ModeRole::G);
        let gamma = CouplingGamma::standard_for(&m);
        let length = 1.445e-4;
        for i in 1..50 {
            let dk = i as f64 * 0.73 * m.linewidth_wavenumber();
            let plus = field_enhancement(&m, &gamma, m.k_res + dk, FieldDirection::Incoming, length);
            let minus =
                field_enhancement(&m, &gamma, m.k_res - dk, FieldDirection::Incoming, length);
            assert_eq!(plus.norm_sqr(), minus.norm_sqr());
        }
    }

    #[test]
    fn enhancement_decreases_away_from_resonance() {
        let m = mode_1550(ModeRole::G);
        let gamma = CouplingGamma::standard_for(&m);
        let length = 1.445e-4;
        let mut last = f64::INFINITY;
        for i in 0..40 {
            let k = m.k_res + i as f64 * 0.5 * m.linewidth_wavenumber();
            let mag = field_enhancement(&m, &gamma, k, FieldDirection::Incoming, length).norm_sqr();
            assert!(mag < last);
            last = mag;
        }
    }

    #[test]
    fn phase_mismatch_zero_on_matched_ring() {
        let ring = ring_nondegenerate();
        let pm = ring.phase_mismatch(Scheme::NonDegenerate).unwrap();
        // kappa_P = 2 w_P / c with w_P = 2 w_G + w_S makes the combination
        // cancel except for rounding.
        assert!(pm.delta_kappa.abs() < 1e-6 * ring.mode(ModeRole::P).unwrap().kappa_ring);
        assert_relative_eq!(pm.sinc_sq, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn phase_mismatch_quarter_and_full_period() {
        // Power-of-two ring length and kappa_F = 0 make delta_kappa L / 2
        // land exactly on the target, so the sinc values are sharp.
        let length = 0.25;
        let mut f = mode_1550(ModeRole::F);
        f.kappa_ring = 0.0;
        let t0 = {
            let mut t = mode_1550(ModeRole::T);
            t.omega *= 3.0;
            t
        };
        for (target, expect, tol) in [
            (std::f64::consts::PI, 4.0 / std::f64::consts::PI.powi(2), 1e-12),
            (2.0 * std::f64::consts::PI, 0.0, 1e-30),
        ] {
            let mut t = t0;
            t.kappa_ring = target / length;
            let ring = RingResonator::new(length, None, [f, t]).unwrap();
            let pm = ring.phase_mismatch(Scheme::Degenerate).unwrap();
            assert_eq!(pm.delta_kappa * length / 2.0, target / 2.0);
            if expect == 0.0 {
                assert!(pm.sinc_sq < tol);
            } else {
                assert_relative_eq!(pm.sinc_sq, expect, max_relative = tol);
            }
        }
    }

    #[test]
    fn phase_mismatch_missing_mode_is_schema_error() {
        let ring = RingResonator::new(1e-4, None, [mode_1550(ModeRole::F)]).unwrap();
        let err = ring.phase_mismatch(Scheme::Degenerate).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("modes.T"));
    }

    #[test]
    fn coupling_rate_scales_inversely_with_area_and_length() {
        let build = |a_eff: f64, length: f64| {
            let g = mode_1550(ModeRole::G);
            let mut p = mode_1550(ModeRole::P);
            p.omega *= 3.0;
            RingResonator::new(length, Some(Nonlinearity::new(1e-21, a_eff).unwrap()), [g, p])
                .unwrap()
                .nonlinear_coupling_rate(ModeRole::P, ModeRole::G)
                .unwrap()
        };
        let base = build(5e-13, 1.445e-4);
        assert!(base > 0.0);
        assert_eq!(build(1e-12, 1.445e-4) * 2.0, base);
        assert_eq!(build(5e-13, 2.89e-4) * 2.0, base);
    }

    #[test]
    fn coupling_rate_group_velocity_scaling() {
        let build = |v_low: f64| {
            let mut g = mode_1550(ModeRole::G);
            g.v_group = v_low;
            let mut p = mode_1550(ModeRole::P);
            p.omega *= 3.0;
            RingResonator::new(
                1.445e-4,
                Some(Nonlinearity::new(1e-21, 5e-13).unwrap()),
                [g, p],
            )
            .unwrap()
            .nonlinear_coupling_rate(ModeRole::P, ModeRole::G)
            .unwrap()
        };
        let v = SPEED_OF_LIGHT / 2.0;
        // Lambda scales as v_low^(3/2): quadrupling v_low multiplies by 8.
        assert_relative_eq!(build(4.0 * v), 8.0 * build(v), max_relative = 1e-12);
    }

    #[test]
    fn coupling_rate_requires_material_parameters() {
        let ring = ring_nondegenerate();
        let err = ring
            .nonlinear_coupling_rate(ModeRole::P, ModeRole::G)
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn duplicate_roles_are_rejected() {
        let err =
            RingResonator::new(1e-4, None, [mode_1550(ModeRole::G), mode_1550(ModeRole::G)])
                .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
