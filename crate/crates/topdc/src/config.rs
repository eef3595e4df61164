//! TOML configuration: schema, resolution into the domain model, and a
//! canonical echo.
//!
//! The file format accepts physically convenient aliases (wavelength or
//! angular frequency, escape efficiency or coupling Q, group index or
//! group velocity, material nonlinearity or a direct coupling rate).
//! Resolution collapses each alias pair into the canonical member and
//! validates ranges and cross-field consistency. `canonical_toml` prints
//! the fully resolved configuration; parsing that output again yields a
//! bitwise-identical resolved configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::constants::SPEED_OF_LIGHT;
use crate::error::{Error, Result};
use crate::physics::{ModeRole, Nonlinearity, ResonatorMode, RingResonator, Scheme};
use crate::rates::ProcessConfig;
use crate::wavefunction::{KGrid, PairSource, PumpEnvelope};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    ring: RawRing,
    modes: BTreeMap<String, RawMode>,
    process: RawProcess,
    pump: RawPump,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    seed: RawSeed,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRing {
    length: f64,
    chi3: Option<f64>,
    a_eff: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMode {
    wavelength: Option<f64>,
    omega: Option<f64>,
    q_loaded: f64,
    q_coupling: Option<f64>,
    eta: Option<f64>,
    v_group: Option<f64>,
    group_index: Option<f64>,
    n_char: f64,
    k_res: Option<f64>,
    kappa_ring: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProcess {
    scheme: String,
    lambda_nl: Option<f64>,
    p_pump: f64,
    p_seed: Option<f64>,
    energy_tolerance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPump {
    kind: String,
    fwhm: Option<f64>,
    carrier_offset_linewidths: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawGrid {
    half_width_linewidths: f64,
    points: usize,
    triphoton_points: usize,
}

impl Default for RawGrid {
    fn default() -> Self {
        RawGrid {
            half_width_linewidths: 12.0,
            points: 401,
            triphoton_points: 101,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSeed {
    offset_linewidths: f64,
    scan_points: usize,
    scan_half_width_linewidths: f64,
}

impl Default for RawSeed {
    fn default() -> Self {
        RawSeed {
            offset_linewidths: 0.0,
            scan_points: 11,
            scan_half_width_linewidths: 12.0,
        }
    }
}

/// Shape of the pump drive, before a carrier wavenumber is attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PumpKind {
    Cw,
    /// Gaussian pulse with the given intensity FWHM in time, s.
    Gaussian { fwhm: f64 },
}

impl PumpKind {
    pub fn is_pulsed(&self) -> bool {
        matches!(self, PumpKind::Gaussian { .. })
    }
}

/// Wavenumber grid parameters, in units of the relevant mode linewidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub half_width_linewidths: f64,
    /// Points per axis of pair spectra. Odd, >= 3.
    pub points: usize,
    /// Points per axis of triplet spectra. Odd, >= 3.
    pub triphoton_points: usize,
}

/// Seeded-mode parameters: where the seed sits and how scans sample it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedSpec {
    /// Seed detuning from the S resonance in half-linewidths.
    pub offset_linewidths: f64,
    /// Number of seed positions in a scan. 1, or odd >= 3.
    pub scan_points: usize,
    pub scan_half_width_linewidths: f64,
}

/// A parsed, fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub ring: RingResonator,
    pub scheme: Scheme,
    /// Nonlinear coupling rate, 1/s; derived from chi3/a_eff when those
    /// were given instead.
    pub lambda_nl: f64,
    pub p_pump: f64,
    pub p_seed: Option<f64>,
    pub pump_kind: PumpKind,
    /// Pump carrier detuning from the pump resonance, in half-linewidths.
    pub carrier_offset_linewidths: f64,
    pub grid: GridSpec,
    pub seed: SeedSpec,
    /// Relative tolerance of the energy-conservation cross-check.
    pub energy_tolerance: f64,
    /// Momentum-offset override applied to spectral computations; not a
    /// file field, set by parameter sweeps.
    pub upsilon_override: Option<f64>,
}

impl ResolvedConfig {
    pub fn parse_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::schema(format!("cannot read configuration '{}': {e}", path.display()))
        })?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::schema(e.to_string().trim().replace('\n', " ")))?;
        resolve(raw)
    }

    /// The process-level view used by the rate formulas.
    pub fn process_config(&self) -> Result<ProcessConfig> {
        ProcessConfig::new(
            self.scheme,
            self.ring.clone(),
            self.lambda_nl,
            self.p_pump,
            self.p_seed,
        )
    }

    /// Pump envelope with the carrier resolved against the pump resonance
    /// of the configured scheme.
    pub fn envelope(&self) -> Result<PumpEnvelope> {
        let pump_role = match self.scheme {
            Scheme::Degenerate => ModeRole::T,
            Scheme::NonDegenerate => ModeRole::P,
        };
        let p = self.ring.mode(pump_role)?;
        let k_center =
            p.k_res + self.carrier_offset_linewidths * p.linewidth_wavenumber();
        match self.pump_kind {
            PumpKind::Cw => PumpEnvelope::cw(k_center),
            PumpKind::Gaussian { fwhm } => PumpEnvelope::gaussian(k_center, fwhm),
        }
    }

    /// Pair source for spectral computations. Requires the non-degenerate
    /// scheme and a pulsed pump.
    pub fn pair_source(&self) -> Result<PairSource> {
        if self.scheme != Scheme::NonDegenerate {
            return Err(Error::mode_misuse(
                "spectral computations model the non-degenerate scheme; \
                 set process.scheme = \"non_degenerate\""
                    .to_string(),
            ));
        }
        if !self.pump_kind.is_pulsed() {
            return Err(Error::mode_misuse(
                "spectral computations require a pulsed pump; set pump.kind = \"gaussian\""
                    .to_string(),
            ));
        }
        let source = PairSource::new(self.ring.clone(), self.envelope()?)?;
        Ok(match self.upsilon_override {
            Some(u) => source.with_upsilon_override(u),
            None => source,
        })
    }

    /// Seed wavenumber: the S resonance shifted by the configured offset.
    pub fn seed_wavenumber(&self) -> Result<f64> {
        let s = self.ring.mode(ModeRole::S)?;
        Ok(s.k_res + self.seed.offset_linewidths * s.linewidth_wavenumber())
    }

    pub fn pair_grid(&self) -> Result<KGrid> {
        let g = self.ring.mode(ModeRole::G)?;
        KGrid::centered(
            g.k_res,
            self.grid.half_width_linewidths * g.linewidth_wavenumber(),
            self.grid.points,
        )
    }

    pub fn triphoton_pair_grid(&self) -> Result<KGrid> {
        let g = self.ring.mode(ModeRole::G)?;
        KGrid::centered(
            g.k_res,
            self.grid.half_width_linewidths * g.linewidth_wavenumber(),
            self.grid.triphoton_points,
        )
    }

    pub fn triphoton_seed_grid(&self) -> Result<KGrid> {
        let s = self.ring.mode(ModeRole::S)?;
        KGrid::centered(
            s.k_res,
            self.grid.half_width_linewidths * s.linewidth_wavenumber(),
            self.grid.triphoton_points,
        )
    }

    /// Seed positions of a scan: `None` means a single-point scan at the
    /// configured seed wavenumber.
    pub fn scan_seed_grid(&self) -> Result<Option<KGrid>> {
        if self.seed.scan_points == 1 {
            return Ok(None);
        }
        let s = self.ring.mode(ModeRole::S)?;
        Ok(Some(KGrid::centered(
            self.seed_wavenumber()?,
            self.seed.scan_half_width_linewidths * s.linewidth_wavenumber(),
            self.seed.scan_points,
        )?))
    }

    /// Fully resolved configuration as TOML. Parsing the output again
    /// reproduces this configuration bitwise.
    pub fn canonical_toml(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[ring]");
        let _ = writeln!(out, "length = {}", toml_f64(self.ring.length()));
        match self.ring.nonlinearity() {
            Some(nl) => {
                let _ = writeln!(out, "chi3 = {}", toml_f64(nl.chi3));
                let _ = writeln!(out, "a_eff = {}", toml_f64(nl.a_eff));
            }
            None => {}
        }
        for mode in self.ring.modes() {
            let _ = writeln!(out);
            let _ = writeln!(out, "[modes.{}]", mode.role);
            let _ = writeln!(out, "omega = {}", toml_f64(mode.omega));
            let _ = writeln!(out, "q_loaded = {}", toml_f64(mode.q_loaded));
            let _ = writeln!(out, "q_coupling = {}", toml_f64(mode.q_coupling));
            let _ = writeln!(out, "v_group = {}", toml_f64(mode.v_group));
            let _ = writeln!(out, "n_char = {}", toml_f64(mode.n_char));
            let _ = writeln!(out, "k_res = {}", toml_f64(mode.k_res));
            let _ = writeln!(out, "kappa_ring = {}", toml_f64(mode.kappa_ring));
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "[process]");
        let _ = writeln!(out, "scheme = \"{}\"", self.scheme);
        if self.ring.nonlinearity().is_some() {
            // lambda_nl is re-derived from chi3/a_eff on parse; repeat the
            // resolved value here for the reader only.
            let _ = writeln!(out, "# lambda_nl resolved to {} 1/s", toml_f64(self.lambda_nl));
        } else {
            let _ = writeln!(out, "lambda_nl = {}", toml_f64(self.lambda_nl));
        }
        let _ = writeln!(out, "p_pump = {}", toml_f64(self.p_pump));
        if let Some(p) = self.p_seed {
            let _ = writeln!(out, "p_seed = {}", toml_f64(p));
        }
        let _ = writeln!(out, "energy_tolerance = {}", toml_f64(self.energy_tolerance));
        let _ = writeln!(out);
        let _ = writeln!(out, "[pump]");
        match self.pump_kind {
            PumpKind::Cw => {
                let _ = writeln!(out, "kind = \"cw\"");
            }
            PumpKind::Gaussian { fwhm } => {
                let _ = writeln!(out, "kind = \"gaussian\"");
                let _ = writeln!(out, "fwhm = {}", toml_f64(fwhm));
            }
        }
        let _ = writeln!(
            out,
            "carrier_offset_linewidths = {}",
            toml_f64(self.carrier_offset_linewidths)
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "[grid]");
        let _ = writeln!(
            out,
            "half_width_linewidths = {}",
            toml_f64(self.grid.half_width_linewidths)
        );
        let _ = writeln!(out, "points = {}", self.grid.points);
        let _ = writeln!(out, "triphoton_points = {}", self.grid.triphoton_points);
        let _ = writeln!(out);
        let _ = writeln!(out, "[seed]");
        let _ = writeln!(
            out,
            "offset_linewidths = {}",
            toml_f64(self.seed.offset_linewidths)
        );
        let _ = writeln!(out, "scan_points = {}", self.seed.scan_points);
        let _ = writeln!(
            out,
            "scan_half_width_linewidths = {}",
            toml_f64(self.seed.scan_half_width_linewidths)
        );
        out
    }
}

/// Format an f64 as a TOML float literal that round-trips bitwise.
fn toml_f64(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') || s.contains('E') || s.contains("inf") || s.contains("NaN")
    {
        s
    } else {
        format!("{s}.0")
    }
}

fn positive(section: &str, name: &str, v: f64) -> Result<f64> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::schema(format!(
            "{section}.{name}: must be finite and > 0, got {v}"
        )));
    }
    Ok(v)
}

fn resolve(raw: RawConfig) -> Result<ResolvedConfig> {
    let scheme = Scheme::from_str(&raw.process.scheme)?;

    let mut modes = Vec::new();
    for (key, raw_mode) in &raw.modes {
        let role = ModeRole::from_str(key)
            .map_err(|_| Error::schema(format!(
                "modes.{key}: unknown mode role (expected one of F, T, G, S, P)"
            )))?;
        modes.push(resolve_mode(role, raw_mode)?);
    }

    let nonlinearity = match (raw.ring.chi3, raw.ring.a_eff) {
        (Some(chi3), Some(a_eff)) => Some(Nonlinearity::new(chi3, positive("ring", "a_eff", a_eff)?)?),
        (None, None) => None,
        _ => {
            return Err(Error::schema(
                "ring.chi3 and ring.a_eff must be given together".to_string(),
            ))
        }
    };
    let length = positive("ring", "length", raw.ring.length)?;
    let ring = RingResonator::new(length, nonlinearity, modes)?;

    for role in scheme.required_roles() {
        ring.mode(*role)?;
    }

    let energy_tolerance = match raw.process.energy_tolerance {
        Some(t) => positive("process", "energy_tolerance", t)?,
        None => 1e-6,
    };
    check_energy_conservation(&ring, scheme, energy_tolerance)?;

    let lambda_nl = match (raw.process.lambda_nl, ring.nonlinearity()) {
        (Some(_), Some(_)) => {
            return Err(Error::schema(
                "give either process.lambda_nl or ring.chi3 with ring.a_eff, not both"
                    .to_string(),
            ))
        }
        (Some(l), None) => {
            if !l.is_finite() {
                return Err(Error::schema(format!(
                    "process.lambda_nl: must be finite, got {l}"
                )));
            }
            l
        }
        (None, Some(_)) => {
            let (high, low) = match scheme {
                Scheme::Degenerate => (ModeRole::T, ModeRole::F),
                Scheme::NonDegenerate => (ModeRole::P, ModeRole::G),
            };
            ring.nonlinear_coupling_rate(high, low)?
        }
        (None, None) => {
            return Err(Error::schema(
                "give process.lambda_nl, or ring.chi3 with ring.a_eff to derive it"
                    .to_string(),
            ))
        }
    };

    if !raw.process.p_pump.is_finite() || raw.process.p_pump < 0.0 {
        return Err(Error::schema(format!(
            "process.p_pump: must be finite and >= 0, got {}",
            raw.process.p_pump
        )));
    }
    if let Some(p) = raw.process.p_seed {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::schema(format!(
                "process.p_seed: must be finite and >= 0, got {p}"
            )));
        }
    }

    let pump_kind = match raw.pump.kind.as_str() {
        "cw" => {
            if raw.pump.fwhm.is_some() {
                return Err(Error::schema(
                    "pump.fwhm applies only to kind = \"gaussian\"".to_string(),
                ));
            }
            PumpKind::Cw
        }
        "gaussian" => {
            let fwhm = raw.pump.fwhm.ok_or_else(|| {
                Error::schema("pump.fwhm is required for kind = \"gaussian\"".to_string())
            })?;
            PumpKind::Gaussian {
                fwhm: positive("pump", "fwhm", fwhm)?,
            }
        }
        other => {
            return Err(Error::schema(format!(
                "pump.kind: unknown kind '{other}' (expected 'cw' or 'gaussian')"
            )))
        }
    };
    let carrier_offset_linewidths = raw.pump.carrier_offset_linewidths.unwrap_or(0.0);
    if !carrier_offset_linewidths.is_finite() {
        return Err(Error::schema(format!(
            "pump.carrier_offset_linewidths: must be finite, got {carrier_offset_linewidths}"
        )));
    }

    let grid = GridSpec {
        half_width_linewidths: positive(
            "grid",
            "half_width_linewidths",
            raw.grid.half_width_linewidths,
        )?,
        points: check_odd_points("grid.points", raw.grid.points)?,
        triphoton_points: check_odd_points("grid.triphoton_points", raw.grid.triphoton_points)?,
    };

    if !raw.seed.offset_linewidths.is_finite() {
        return Err(Error::schema(format!(
            "seed.offset_linewidths: must be finite, got {}",
            raw.seed.offset_linewidths
        )));
    }
    let scan_points = raw.seed.scan_points;
    if scan_points != 1 && (scan_points < 3 || scan_points % 2 == 0) {
        return Err(Error::schema(format!(
            "seed.scan_points: must be 1 or odd >= 3, got {scan_points}"
        )));
    }
    let seed = SeedSpec {
        offset_linewidths: raw.seed.offset_linewidths,
        scan_points,
        scan_half_width_linewidths: positive(
            "seed",
            "scan_half_width_linewidths",
            raw.seed.scan_half_width_linewidths,
        )?,
    };

    Ok(ResolvedConfig {
        ring,
        scheme,
        lambda_nl,
        p_pump: raw.process.p_pump,
        p_seed: raw.process.p_seed,
        pump_kind,
        carrier_offset_linewidths,
        grid,
        seed,
        energy_tolerance,
        upsilon_override: None,
    })
}

fn check_odd_points(field: &str, n: usize) -> Result<usize> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::schema(format!(
            "{field}: must be odd and >= 3, got {n}"
        )));
    }
    Ok(n)
}

fn check_energy_conservation(ring: &RingResonator, scheme: Scheme, tol: f64) -> Result<()> {
    match scheme {
        Scheme::Degenerate => {
            let f = ring.mode(ModeRole::F)?;
            let t = ring.mode(ModeRole::T)?;
            let mismatch = (t.omega - 3.0 * f.omega).abs() / t.omega;
            if mismatch > tol {
                return Err(Error::physics(format!(
                    "energy conservation: omega_T must equal 3 omega_F within {tol:e} \
                     (relative mismatch {mismatch:e})"
                )));
            }
        }
        Scheme::NonDegenerate => {
            let g = ring.mode(ModeRole::G)?;
            let s = ring.mode(ModeRole::S)?;
            let p = ring.mode(ModeRole::P)?;
            let mismatch = (p.omega - 2.0 * g.omega - s.omega).abs() / p.omega;
            if mismatch > tol {
                return Err(Error::physics(format!(
                    "energy conservation: omega_P must equal 2 omega_G + omega_S within {tol:e} \
                     (relative mismatch {mismatch:e})"
                )));
            }
        }
    }
    Ok(())
}

fn resolve_mode(role: ModeRole, raw: &RawMode) -> Result<ResonatorMode> {
    let omega = match (raw.wavelength, raw.omega) {
        (Some(_), Some(_)) => {
            return Err(Error::schema(format!(
                "modes.{role}: give either wavelength or omega, not both"
            )))
        }
        (Some(wl), None) => {
            let wl = positive(&format!("modes.{role}"), "wavelength", wl)?;
            2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / wl
        }
        (None, Some(om)) => positive(&format!("modes.{role}"), "omega", om)?,
        (None, None) => {
            return Err(Error::schema(format!(
                "modes.{role}: one of wavelength or omega is required"
            )))
        }
    };
    let q_loaded = positive(&format!("modes.{role}"), "q_loaded", raw.q_loaded)?;
    let q_coupling = match (raw.q_coupling, raw.eta) {
        (Some(_), Some(_)) => {
            return Err(Error::schema(format!(
                "modes.{role}: give either q_coupling or eta, not both"
            )))
        }
        (Some(qc), None) => positive(&format!("modes.{role}"), "q_coupling", qc)?,
        (None, Some(eta)) => {
            if !eta.is_finite() || eta <= 0.0 {
                return Err(Error::schema(format!(
                    "modes.{role}.eta: must be finite and > 0, got {eta}"
                )));
            }
            if eta > 1.0 {
                return Err(Error::physics(format!(
                    "modes.{role}.eta: escape efficiency {eta} exceeds one"
                )));
            }
            q_loaded / eta
        }
        (None, None) => {
            return Err(Error::schema(format!(
                "modes.{role}: one of q_coupling or eta is required"
            )))
        }
    };
    let n_char = positive(&format!("modes.{role}"), "n_char", raw.n_char)?;
    let v_group = match (raw.v_group, raw.group_index) {
        (Some(_), Some(_)) => {
            return Err(Error::schema(format!(
                "modes.{role}: give either v_group or group_index, not both"
            )))
        }
        (Some(v), None) => positive(&format!("modes.{role}"), "v_group", v)?,
        (None, Some(ng)) => {
            SPEED_OF_LIGHT / positive(&format!("modes.{role}"), "group_index", ng)?
        }
        (None, None) => SPEED_OF_LIGHT / n_char,
    };
    let k_res = match raw.k_res {
        Some(k) => positive(&format!("modes.{role}"), "k_res", k)?,
        None => n_char * omega / SPEED_OF_LIGHT,
    };
    let kappa_ring = match raw.kappa_ring {
        Some(k) => {
            if !k.is_finite() {
                return Err(Error::schema(format!(
                    "modes.{role}.kappa_ring: must be finite, got {k}"
                )));
            }
            k
        }
        None => k_res,
    };
    ResonatorMode::new(
        role, omega, q_loaded, q_coupling, v_group, k_res, kappa_ring, n_char,
    )
}
