//! Analysis of pair spectra: joint spectral intensities, Schmidt
//! decompositions, seeded-scan reconstruction of the triplet spectrum, and
//! one-parameter sweeps.
//!
//! The Schmidt number K = 1 / sum p_i^2 measures the effective number of
//! orthogonal mode pairs in a pair amplitude: exactly 1 for separable
//! spectra, N for a maximally entangled amplitude of rank N. It is
//! computed from the singular values of the gridded amplitude and
//! cross-checked against a refinement on a grid of doubled resolution.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{PumpKind, ResolvedConfig};
use crate::error::{Error, Result};
use crate::physics::{FieldDirection, ModeRole, Scheme};
use crate::rates::{self, RateResult};
use crate::util::compensated_sum;
use crate::wavefunction::{BiphotonAmplitude, KGrid, PairSource};

/// Joint spectral intensity |phi(k1, k2)|^2 on a wavenumber grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JsiMatrix {
    grid: KGrid,
    values: Vec<f64>,
    k_seed: f64,
    omega_axis: Option<Vec<f64>>,
}

impl JsiMatrix {
    pub fn grid(&self) -> &KGrid {
        &self.grid
    }

    /// Row-major intensities; sum times the grid cell is one.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.len() + j]
    }

    pub fn k_seed(&self) -> f64 {
        self.k_seed
    }

    /// Frequencies of the generated mode along the grid, when the
    /// amplitude came from a ring model.
    pub fn omega_axis(&self) -> Option<&[f64]> {
        self.omega_axis.as_deref()
    }
}

/// Intensity of a pair amplitude, with a frequency annotation of the axis
/// from the generated mode's linear dispersion.
pub fn jsi(amp: &BiphotonAmplitude) -> JsiMatrix {
    let omega_axis = amp
        .mode_g()
        .map(|g| (0..amp.grid().len()).map(|i| g.frequency_at(amp.grid().point(i))).collect());
    JsiMatrix {
        grid: *amp.grid(),
        values: amp.values().iter().map(|v| v.norm_sqr()).collect(),
        k_seed: amp.k_seed(),
        omega_axis,
    }
}

/// Schmidt decomposition of one gridded amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum {
    /// Mode probabilities p_i, descending, summing to one.
    pub coefficients: Vec<f64>,
    /// K = 1 / sum p_i^2, in [1, rank].
    pub schmidt_number: f64,
}

/// Singular-value route to the Schmidt spectrum.
pub fn schmidt_spectrum(amp: &BiphotonAmplitude) -> Result<SchmidtSpectrum> {
    let n = amp.grid().len();
    let dk = amp.grid().spacing();
    let mat = DMatrix::from_fn(n, n, |i, j| amp.value(i, j) * dk);
    let mut singular: Vec<f64> = mat.singular_values().iter().copied().collect();
    singular.sort_by(|a, b| b.partial_cmp(a).expect("singular values are finite"));
    let total = compensated_sum(singular.iter().map(|s| s * s));
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::numerics(format!(
            "singular spectrum of the pair amplitude is degenerate (sum {total})"
        )));
    }
    let coefficients: Vec<f64> = singular.iter().map(|s| s * s / total).collect();
    let purity = compensated_sum(coefficients.iter().map(|p| p * p));
    Ok(SchmidtSpectrum {
        schmidt_number: 1.0 / purity,
        coefficients,
    })
}

/// Largest |K_fine - K_coarse| accepted as converged.
pub const SCHMIDT_REFINEMENT_TOLERANCE: f64 = 1e-3;

/// Schmidt spectrum of `amp` plus a convergence probe: the same source
/// re-gridded at doubled resolution must move K by at most
/// `SCHMIDT_REFINEMENT_TOLERANCE`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtResult {
    /// Mode probabilities on the amplitude's own grid.
    pub coefficients: Vec<f64>,
    /// Schmidt number on the amplitude's own grid.
    pub schmidt_number: f64,
    /// Schmidt number on the refined grid.
    pub refined_schmidt_number: f64,
    /// |refined - coarse|.
    pub refinement_delta: f64,
    pub converged: bool,
}

pub fn schmidt(amp: &BiphotonAmplitude, source: &PairSource) -> Result<SchmidtResult> {
    let coarse = schmidt_spectrum(amp)?;
    let refined_amp = source.biphoton(amp.k_seed(), &amp.grid().refined())?;
    let refined = schmidt_spectrum(&refined_amp)?;
    let delta = (refined.schmidt_number - coarse.schmidt_number).abs();
    Ok(SchmidtResult {
        coefficients: coarse.coefficients,
        schmidt_number: coarse.schmidt_number,
        refined_schmidt_number: refined.schmidt_number,
        refinement_delta: delta,
        converged: delta <= SCHMIDT_REFINEMENT_TOLERANCE,
    })
}

/// Memory allowed for the direct triplet amplitude inside a seeded scan
/// before the cross-validation is skipped.
pub const DEFAULT_TRIPHOTON_BUDGET_BYTES: usize = 2 << 30;

/// Result of scanning the seed across its resonance and collecting the
/// stimulated pair spectrum at each position.
#[derive(Debug, Clone, PartialEq)]
pub struct SetScanResult {
    /// Seed wavenumbers of the scan.
    pub seed_points: Vec<f64>,
    /// Stimulated pair amplitude at each seed position.
    pub slices: Vec<BiphotonAmplitude>,
    /// Unnormalized weight of each slice in the triplet spectrum,
    /// |F_S(k_seed)|^2 / |N'|^2: how strongly this seed position
    /// contributes to the spontaneous rate density.
    pub slice_weights: Vec<f64>,
    /// Spacing of the seed scan when it is uniform.
    pub seed_spacing: Option<f64>,
    /// Per-slice worst-case relative deviation between the scan slice and
    /// the direct triplet amplitude slice; absent when the direct triplet
    /// was skipped.
    pub proportionality_residuals: Option<Vec<f64>>,
    /// Seed-axis marginal of the direct triplet amplitude, normalized as a
    /// density over the scan; absent when the direct triplet was skipped.
    pub direct_seed_marginal: Option<Vec<f64>>,
    /// Seed-axis marginal reconstructed from `slice_weights`, normalized
    /// as a density; absent for non-uniform scans.
    pub reconstructed_seed_marginal: Option<Vec<f64>>,
    /// L1 distance between the two marginals.
    pub marginal_l1_distance: Option<f64>,
    pub warnings: Vec<String>,
}

/// Scan with the default memory budget for the cross-validation.
pub fn set_scan(
    source: &PairSource,
    seed_grid: &KGrid,
    pair_grid: &KGrid,
) -> Result<SetScanResult> {
    set_scan_with_budget(source, seed_grid, pair_grid, DEFAULT_TRIPHOTON_BUDGET_BYTES)
}

pub fn set_scan_with_budget(
    source: &PairSource,
    seed_grid: &KGrid,
    pair_grid: &KGrid,
    budget_bytes: usize,
) -> Result<SetScanResult> {
    let seed_points = seed_grid.points();
    let mut result = scan_slices(source, &seed_points, pair_grid)?;
    result.seed_spacing = Some(seed_grid.spacing());

    // Normalized reconstruction of the seed marginal from the weights.
    let weight_sum = compensated_sum(result.slice_weights.iter().copied()) * seed_grid.spacing();
    if weight_sum > 0.0 && weight_sum.is_finite() {
        result.reconstructed_seed_marginal = Some(
            result
                .slice_weights
                .iter()
                .map(|w| w / weight_sum)
                .collect(),
        );
    }

    let n = pair_grid.len();
    let needed = seed_points.len() * n * n * std::mem::size_of::<Complex64>();
    if needed > budget_bytes {
        result.warnings.push(format!(
            "direct triplet cross-validation skipped: needs {needed} bytes, budget is \
             {budget_bytes}"
        ));
        return Ok(result);
    }

    let tri = source.triphoton(pair_grid, seed_grid)?;
    if let Some(w) = &tri.coverage().warning {
        result.warnings.push(format!("triplet amplitude: {w}"));
    }

    let mut residuals = Vec::with_capacity(seed_points.len());
    for (m, bi) in result.slices.iter().enumerate() {
        residuals.push(slice_deviation(tri.slice(m), bi, pair_grid));
    }
    result.proportionality_residuals = Some(residuals);

    let direct = tri.seed_marginal();
    let direct_sum = compensated_sum(direct.iter().copied()) * seed_grid.spacing();
    if direct_sum > 0.0 && direct_sum.is_finite() {
        let direct: Vec<f64> = direct.iter().map(|d| d / direct_sum).collect();
        if let Some(rec) = &result.reconstructed_seed_marginal {
            let l1 = compensated_sum(
                rec.iter().zip(&direct).map(|(r, d)| (r - d).abs()),
            ) * seed_grid.spacing();
            result.marginal_l1_distance = Some(l1);
        }
        result.direct_seed_marginal = Some(direct);
    }
    Ok(result)
}

/// Scan at explicit seed positions. The direct-triplet cross-validation
/// requires a uniform grid of at least three positions, so it is skipped
/// on this path.
pub fn set_scan_at(
    source: &PairSource,
    seed_points: &[f64],
    pair_grid: &KGrid,
) -> Result<SetScanResult> {
    if seed_points.is_empty() {
        return Err(Error::schema(
            "seed scan needs at least one seed wavenumber".to_string(),
        ));
    }
    scan_slices(source, seed_points, pair_grid)
}

fn scan_slices(
    source: &PairSource,
    seed_points: &[f64],
    pair_grid: &KGrid,
) -> Result<SetScanResult> {
    let slices: Vec<BiphotonAmplitude> = seed_points
        .iter()
        .map(|k| source.biphoton(*k, pair_grid))
        .collect::<Result<_>>()?;
    let mut warnings = Vec::new();
    if let Some(w) = slices
        .iter()
        .find_map(|s| s.coverage().warning.clone())
    {
        warnings.push(format!("pair slices: {w}"));
    }
    let weights: Result<Vec<f64>> = seed_points
        .iter()
        .zip(&slices)
        .map(|(k, slice)| {
            let f_s = source
                .ring()
                .field_enhancement(ModeRole::S, *k, FieldDirection::Outgoing)?;
            Ok(f_s.norm_sqr() / slice.norm_constant().norm_sqr())
        })
        .collect();
    Ok(SetScanResult {
        seed_points: seed_points.to_vec(),
        slices,
        slice_weights: weights?,
        seed_spacing: None,
        proportionality_residuals: None,
        direct_seed_marginal: None,
        reconstructed_seed_marginal: None,
        marginal_l1_distance: None,
        warnings,
    })
}

/// Worst-case pointwise relative deviation between a triplet slice and a
/// pair amplitude, after normalizing and phase-aligning the slice.
fn slice_deviation(slice: &[Complex64], bi: &BiphotonAmplitude, grid: &KGrid) -> f64 {
    let n = grid.len();
    let cell = grid.spacing().powi(2);
    let norm = compensated_sum(slice.iter().map(|v| v.norm_sqr())) * cell;
    if norm <= 0.0 {
        // A vanishing slice matches only a vanishing amplitude.
        let bi_norm = compensated_sum(bi.values().iter().map(|v| v.norm_sqr()));
        return if bi_norm == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let scale = 1.0 / norm.sqrt();
    let pivot = slice[grid.center_index() * n + grid.center_index()];
    let phase = if pivot == Complex64::default() {
        Complex64::new(1.0, 0.0)
    } else {
        pivot.conj() / pivot.norm()
    };
    let mut worst = 0.0f64;
    for (a, b) in slice.iter().zip(bi.values()) {
        let a = a * scale * phase;
        let denom = b.norm();
        if denom == 0.0 {
            if a.norm() != 0.0 {
                return f64::INFINITY;
            }
            continue;
        }
        worst = worst.max((a - b).norm() / denom);
    }
    worst
}

/// Parameter axes a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    /// pump.fwhm, s.
    PumpFwhm,
    /// Loaded Q of the pump resonance, escape efficiency held fixed.
    QPump,
    /// Loaded Q of the generated resonance, escape efficiency held fixed.
    QGenerated,
    /// Momentum-offset override Upsilon, rad/s.
    Upsilon,
    /// Seed detuning from the S resonance, in half-linewidths.
    KSeed,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::PumpFwhm => "pump_fwhm",
            SweepParameter::QPump => "q_pump",
            SweepParameter::QGenerated => "q_generated",
            SweepParameter::Upsilon => "upsilon",
            SweepParameter::KSeed => "k_seed",
        }
    }
}

impl std::fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pump_fwhm" => Ok(SweepParameter::PumpFwhm),
            "q_pump" => Ok(SweepParameter::QPump),
            "q_generated" => Ok(SweepParameter::QGenerated),
            "upsilon" => Ok(SweepParameter::Upsilon),
            "k_seed" => Ok(SweepParameter::KSeed),
            other => Err(Error::schema(format!(
                "unknown sweep parameter '{other}' (expected pump_fwhm, q_pump, q_generated, \
                 upsilon or k_seed)"
            ))),
        }
    }
}

/// One sweep evaluation. Rates are the continuous-wave values at the
/// configured channel powers, reported even under a pulsed envelope so
/// that spectral and rate trends can sit side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub schmidt_number: Option<f64>,
    pub converged: Option<bool>,
    pub rate_spontaneous: Option<f64>,
    pub rate_stimulated: Option<f64>,
    pub error: Option<String>,
}

/// Re-run the spectral pipeline and the rate formulas at each value of one
/// parameter. Per-value failures land in the row's `error` instead of
/// aborting the sweep.
pub fn sweep(base: &ResolvedConfig, param: SweepParameter, values: &[f64]) -> Vec<SweepRow> {
    values
        .par_iter()
        .map(|v| sweep_row(base, param, *v))
        .collect()
}

fn sweep_row(base: &ResolvedConfig, param: SweepParameter, value: f64) -> SweepRow {
    let mut row = SweepRow {
        value,
        schmidt_number: None,
        converged: None,
        rate_spontaneous: None,
        rate_stimulated: None,
        error: None,
    };
    let cfg = match apply_parameter(base, param, value) {
        Ok(cfg) => cfg,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    match compute_rates(&cfg) {
        Ok((spon, stim)) => {
            row.rate_spontaneous = Some(spon.value);
            row.rate_stimulated = stim.map(|r| r.value);
        }
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    }
    match compute_schmidt(&cfg) {
        Ok(result) => {
            row.schmidt_number = Some(result.schmidt_number);
            row.converged = Some(result.converged);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn apply_parameter(
    base: &ResolvedConfig,
    param: SweepParameter,
    value: f64,
) -> Result<ResolvedConfig> {
    let mut cfg = base.clone();
    match param {
        SweepParameter::PumpFwhm => {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::schema(format!(
                    "pump_fwhm sweep value must be finite and > 0, got {value}"
                )));
            }
            match cfg.pump_kind {
                PumpKind::Gaussian { .. } => {
                    cfg.pump_kind = PumpKind::Gaussian { fwhm: value };
                }
                PumpKind::Cw => {
                    return Err(Error::mode_misuse(
                        "pump_fwhm sweep needs a pulsed pump; set pump.kind = \"gaussian\""
                            .to_string(),
                    ))
                }
            }
        }
        SweepParameter::QPump | SweepParameter::QGenerated => {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::schema(format!(
                    "quality-factor sweep value must be finite and > 0, got {value}"
                )));
            }
            let role = match (param, cfg.scheme) {
                (SweepParameter::QPump, Scheme::Degenerate) => ModeRole::T,
                (SweepParameter::QPump, Scheme::NonDegenerate) => ModeRole::P,
                (_, Scheme::Degenerate) => ModeRole::F,
                (_, Scheme::NonDegenerate) => ModeRole::G,
            };
            let mut mode = *cfg.ring.mode(role)?;
            let eta = mode.escape_efficiency();
            mode.q_loaded = value;
            mode.q_coupling = value / eta;
            cfg.ring.set_mode(mode)?;
        }
        SweepParameter::Upsilon => {
            if !value.is_finite() {
                return Err(Error::schema(format!(
                    "upsilon sweep value must be finite, got {value}"
                )));
            }
            cfg.upsilon_override = Some(value);
        }
        SweepParameter::KSeed => {
            if !value.is_finite() {
                return Err(Error::schema(format!(
                    "k_seed sweep value must be finite, got {value}"
                )));
            }
            cfg.seed.offset_linewidths = value;
        }
    }
    Ok(cfg)
}

fn compute_rates(cfg: &ResolvedConfig) -> Result<(RateResult, Option<RateResult>)> {
    let process = cfg.process_config()?;
    match cfg.scheme {
        Scheme::Degenerate => Ok((rates::rate_spontaneous_degenerate(&process)?, None)),
        Scheme::NonDegenerate => {
            let spon = rates::rate_spontaneous_nondegenerate(&process)?;
            let stim = match process.p_seed {
                Some(_) => Some(rates::rate_stimulated(&process)?),
                None => None,
            };
            Ok((spon, stim))
        }
    }
}

fn compute_schmidt(cfg: &ResolvedConfig) -> Result<SchmidtResult> {
    let source = cfg.pair_source()?;
    let grid = cfg.pair_grid()?;
    let amp = source.biphoton(cfg.seed_wavenumber()?, &grid)?;
    schmidt(&amp, &source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::schmidt_number_direct;
    use crate::config::ResolvedConfig;
    use crate::physics::test_fixtures::ring_nondegenerate;
    use crate::wavefunction::PumpEnvelope;
    use approx::assert_relative_eq;

    fn small_source() -> PairSource {
        let ring = ring_nondegenerate();
        let p = ring.mode(ModeRole::P).unwrap();
        PairSource::new(ring, PumpEnvelope::gaussian(p.k_res, 1e-11).unwrap()).unwrap()
    }

    fn small_config(points: usize, triphoton_points: usize) -> ResolvedConfig {
        let text = crate::config::tests::BASE
            .replace(
                "kind = \"gaussian\"\nfwhm = 1e-11",
                &format!(
                    "kind = \"gaussian\"\nfwhm = 1e-11\n\n[grid]\npoints = {points}\n\
                     triphoton_points = {triphoton_points}"
                ),
            );
        ResolvedConfig::parse_str(&text).unwrap()
    }

    #[test]
    fn jsi_is_normalized_and_annotated() {
        let source = small_source();
        let s = source.ring().mode(ModeRole::S).unwrap();
        let grid = source.default_pair_grid(12.0, 61).unwrap();
        let amp = source.biphoton(s.k_res, &grid).unwrap();
        let intensity = jsi(&amp);
        let total = compensated_sum(intensity.values().iter().copied()) * grid.spacing().powi(2);
        assert!((total - 1.0).abs() <= 1e-10);
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                assert_eq!(intensity.value(i, j), intensity.value(j, i));
            }
        }
        let omega = intensity.omega_axis().unwrap();
        let g = source.ring().mode(ModeRole::G).unwrap();
        assert_eq!(omega[grid.center_index()], g.omega);
    }

    #[test]
    fn separable_amplitude_has_unit_schmidt_number() {
        let grid = KGrid::new(-1.0, 1.0, 9).unwrap();
        let f: Vec<Complex64> = (0..9)
            .map(|i| Complex64::new(1.0 / (1.0 + (i as f64 - 4.0).powi(2)), 0.3))
            .collect();
        let mut values = Vec::with_capacity(81);
        for i in 0..9 {
            for j in 0..9 {
                values.push(f[i] * f[j]);
            }
        }
        let amp = BiphotonAmplitude::from_values(grid, values, 0.0).unwrap();
        let spectrum = schmidt_spectrum(&amp).unwrap();
        assert!((spectrum.schmidt_number - 1.0).abs() <= 1e-10);
        assert_relative_eq!(spectrum.coefficients[0], 1.0, max_relative = 1e-10);
    }

    #[test]
    fn antidiagonal_amplitude_has_maximal_schmidt_number() {
        let n = 8;
        // Even sizes are rejected by the grid type, so embed the rank-8
        // antidiagonal in a 9-point grid with one empty row.
        let grid = KGrid::new(-1.0, 1.0, 9).unwrap();
        let mut values = vec![Complex64::default(); 81];
        for i in 0..n {
            values[i * 9 + (n - 1 - i)] = Complex64::new(1.0, 0.0);
        }
        let amp = BiphotonAmplitude::from_values(grid, values, 0.0).unwrap();
        let spectrum = schmidt_spectrum(&amp).unwrap();
        assert!((spectrum.schmidt_number - n as f64).abs() <= 1e-8);
    }

    #[test]
    fn schmidt_coefficients_sum_to_one_and_match_direct_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in [5usize, 9, 15] {
            let grid = KGrid::new(-1.0, 1.0, n).unwrap();
            let mut values = vec![Complex64::default(); n * n];
            for i in 0..n {
                for j in i..n {
                    let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    values[i * n + j] = v;
                    values[j * n + i] = v;
                }
            }
            let amp = BiphotonAmplitude::from_values(grid, values, 0.0).unwrap();
            let spectrum = schmidt_spectrum(&amp).unwrap();
            let sum = compensated_sum(spectrum.coefficients.iter().copied());
            assert!((sum - 1.0).abs() <= 1e-12);
            let direct = schmidt_number_direct(amp.values(), n, grid.spacing());
            assert!(
                (spectrum.schmidt_number - direct).abs() <= 1e-10,
                "svd {} vs direct {}",
                spectrum.schmidt_number,
                direct
            );
        }
    }

    #[test]
    fn schmidt_number_is_scale_and_phase_invariant() {
        let grid = KGrid::new(-1.0, 1.0, 7).unwrap();
        let base: Vec<Complex64> = (0..49)
            .map(|idx| {
                let (i, j) = (idx / 7, idx % 7);
                let (i, j) = (i.min(j), i.max(j));
                Complex64::new((i * 7 + j) as f64 * 0.1 + 0.3, (j as f64) * 0.05)
            })
            .collect();
        let amp1 = BiphotonAmplitude::from_values(grid, base.clone(), 0.0).unwrap();
        let rot = Complex64::from_polar(2.0, 0.9);
        let rotated: Vec<Complex64> = base.iter().map(|v| v * rot).collect();
        let amp2 = BiphotonAmplitude::from_values(grid, rotated, 0.0).unwrap();
        let k1 = schmidt_spectrum(&amp1).unwrap().schmidt_number;
        let k2 = schmidt_spectrum(&amp2).unwrap().schmidt_number;
        assert!((k1 - k2).abs() <= 1e-12);
    }

    #[test]
    fn refinement_probe_reports_convergence() {
        let source = small_source();
        let s = source.ring().mode(ModeRole::S).unwrap();
        let grid = source.default_pair_grid(12.0, 101).unwrap();
        let amp = source.biphoton(s.k_res, &grid).unwrap();
        let result = schmidt(&amp, &source).unwrap();
        assert!(result.schmidt_number >= 1.0);
        assert!(result.refinement_delta.is_finite());
        let sum = compensated_sum(result.coefficients.iter().copied());
        assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn set_scan_residuals_are_tiny() {
        let source = small_source();
        let seed_grid = source.default_seed_grid(6.0, 5).unwrap();
        let pair_grid = source.default_pair_grid(12.0, 31).unwrap();
        let result = set_scan(&source, &seed_grid, &pair_grid).unwrap();
        let residuals = result.proportionality_residuals.unwrap();
        assert_eq!(residuals.len(), 5);
        for r in &residuals {
            assert!(*r <= 1e-10, "residual {r}");
        }
        assert!(result.marginal_l1_distance.unwrap() <= 1e-6);
    }

    #[test]
    fn set_scan_budget_skips_cross_validation() {
        let source = small_source();
        let seed_grid = source.default_seed_grid(6.0, 5).unwrap();
        let pair_grid = source.default_pair_grid(12.0, 31).unwrap();
        let result = set_scan_with_budget(&source, &seed_grid, &pair_grid, 16).unwrap();
        assert!(result.proportionality_residuals.is_none());
        assert!(result.warnings.iter().any(|w| w.contains("skipped")));
        assert_eq!(result.slices.len(), 5);
    }

    #[test]
    fn single_point_scan_reduces_to_the_biphoton() {
        let source = small_source();
        let s = source.ring().mode(ModeRole::S).unwrap();
        let pair_grid = source.default_pair_grid(12.0, 31).unwrap();
        let scan = set_scan_at(&source, &[s.k_res], &pair_grid).unwrap();
        let direct = source.biphoton(s.k_res, &pair_grid).unwrap();
        assert_eq!(scan.slices.len(), 1);
        assert_eq!(scan.slices[0].values(), direct.values());
    }

    #[test]
    fn sweep_single_value_matches_direct_run() {
        let cfg = small_config(41, 21);
        let rows = sweep(&cfg, SweepParameter::KSeed, &[cfg.seed.offset_linewidths]);
        assert_eq!(rows.len(), 1);
        let row = &rows[0];
        assert!(row.error.is_none(), "{:?}", row.error);
        let direct = compute_schmidt(&cfg).unwrap();
        assert_eq!(row.schmidt_number.unwrap(), direct.schmidt_number);
        let process = cfg.process_config().unwrap();
        let spon = rates::rate_spontaneous_nondegenerate(&process).unwrap();
        assert_eq!(row.rate_spontaneous.unwrap(), spon.value);
        assert!(row.rate_stimulated.is_some());
    }

    #[test]
    fn sweep_records_per_row_errors() {
        let cfg = small_config(41, 21);
        let rows = sweep(&cfg, SweepParameter::PumpFwhm, &[1e-11, -1.0]);
        assert!(rows[0].error.is_none());
        assert!(rows[1].error.is_some());
        assert!(rows[1].schmidt_number.is_none());
    }

    #[test]
    fn sweep_parameter_names_round_trip() {
        use std::str::FromStr;
        for p in [
            SweepParameter::PumpFwhm,
            SweepParameter::QPump,
            SweepParameter::QGenerated,
            SweepParameter::Upsilon,
            SweepParameter::KSeed,
        ] {
            assert_eq!(SweepParameter::from_str(p.as_str()).unwrap(), p);
        }
        assert!(SweepParameter::from_str("nope").is_err());
    }

    #[test]
    fn longer_pulses_raise_schmidt_number() {
        // Longer pulses narrow the pump spectrum, which tightens the
        // k1 + k2 ridge and strengthens entanglement: K grows with fwhm.
        let cfg = small_config(61, 21);
        let rows = sweep(&cfg, SweepParameter::PumpFwhm, &[2.5e-12, 1e-11, 4e-11]);
        let ks: Vec<f64> = rows.iter().map(|r| r.schmidt_number.unwrap()).collect();
        assert!(ks[0] <= ks[1] && ks[1] <= ks[2], "K not monotone: {ks:?}");
    }
}
