//! Joint spectral amplitudes of the generated light.
//!
//! The triplet amplitude of the non-degenerate scheme factorizes on a
//! wavenumber grid into per-axis Lorentzian enhancements and a shared pump
//! amplitude evaluated at the energy-conserving pump wavenumber
//!
//! u(k1, k2, k3) = (v_G (k1 + k2) + v_S k3 + Upsilon) / v_P,
//! Upsilon = v_P K_P - v_S K_S - 2 v_G K_G.
//!
//! Fixing the seeded photon's wavenumber k3 = k_S yields the stimulated
//! pair amplitude over (k1, k2), proportional to the triplet amplitude's
//! slice. Both amplitudes are normalized to unit summed intensity on their
//! grid and phase-aligned so the grid-center value is real non-negative,
//! and both are exactly symmetric under k1 <-> k2 by construction: the
//! (i, j) and (j, i) entries are assembled from the same factors in a
//! commutative order, so they agree bitwise.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::physics::{FieldDirection, ModeRole, RingResonator};
use crate::util::compensated_sum;

/// Spectral envelope of the pump drive in the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PumpEnvelope {
    /// Monochromatic drive at the carrier wavenumber. Has no sampleable
    /// spectral density; rate formulas use this regime, spectral
    /// amplitudes reject it.
    Cw { k_center: f64 },
    /// Transform-limited Gaussian pulse.
    Gaussian {
        k_center: f64,
        /// Intensity full width at half maximum in time, s.
        fwhm: f64,
    },
}

impl PumpEnvelope {
    pub fn cw(k_center: f64) -> Result<Self> {
        if !k_center.is_finite() {
            return Err(Error::schema(format!(
                "pump carrier wavenumber must be finite, got {k_center}"
            )));
        }
        Ok(PumpEnvelope::Cw { k_center })
    }

    pub fn gaussian(k_center: f64, fwhm: f64) -> Result<Self> {
        if !k_center.is_finite() {
            return Err(Error::schema(format!(
                "pump carrier wavenumber must be finite, got {k_center}"
            )));
        }
        if !fwhm.is_finite() || fwhm <= 0.0 {
            return Err(Error::schema(format!(
                "pump.fwhm: must be finite and > 0, got {fwhm}"
            )));
        }
        Ok(PumpEnvelope::Gaussian { k_center, fwhm })
    }

    pub fn is_pulsed(&self) -> bool {
        matches!(self, PumpEnvelope::Gaussian { .. })
    }

    pub fn k_center(&self) -> f64 {
        match *self {
            PumpEnvelope::Cw { k_center } | PumpEnvelope::Gaussian { k_center, .. } => k_center,
        }
    }

    /// Gaussian temporal amplitude width, sigma_t = fwhm / (2 sqrt(ln 2)).
    pub fn sigma_t(&self) -> Option<f64> {
        match *self {
            PumpEnvelope::Cw { .. } => None,
            PumpEnvelope::Gaussian { fwhm, .. } => Some(fwhm / (2.0 * (2f64).ln().sqrt())),
        }
    }

    /// Spectral amplitude at wavenumber `k` for a pump propagating at
    /// `v_pump`: exp(-(v (k - k_c))^2 sigma_t^2 / 2), unit peak.
    ///
    /// A CW envelope is a delta line and cannot be sampled pointwise.
    pub fn spectral_amplitude(&self, v_pump: f64, k: f64) -> Result<Complex64> {
        match *self {
            PumpEnvelope::Cw { .. } => Err(Error::mode_misuse(
                "a continuous-wave pump has no sampleable spectral envelope; \
                 configure a pulsed pump for spectral computations"
                    .to_string(),
            )),
            PumpEnvelope::Gaussian { k_center, .. } => {
                let sigma_t = self.sigma_t().expect("gaussian has a width");
                let detuning = v_pump * (k - k_center);
                let exponent = -0.5 * (detuning * sigma_t).powi(2);
                Ok(Complex64::new(exponent.exp(), 0.0))
            }
        }
    }
}

/// Uniform symmetric wavenumber grid with an odd number of points, so the
/// center point sits exactly on a grid node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KGrid {
    k_min: f64,
    k_max: f64,
    n_points: usize,
}

impl KGrid {
    pub fn new(k_min: f64, k_max: f64, n_points: usize) -> Result<Self> {
        if !k_min.is_finite() || !k_max.is_finite() || k_min >= k_max {
            return Err(Error::schema(format!(
                "grid bounds must be finite with k_min < k_max, got [{k_min}, {k_max}]"
            )));
        }
        if n_points < 3 || n_points % 2 == 0 {
            return Err(Error::schema(format!(
                "grid.points: must be odd and >= 3, got {n_points}"
            )));
        }
        Ok(KGrid {
            k_min,
            k_max,
            n_points,
        })
    }

    /// Grid of `n_points` spanning `center +- half_width`.
    pub fn centered(center: f64, half_width: f64, n_points: usize) -> Result<Self> {
        if !half_width.is_finite() || half_width <= 0.0 {
            return Err(Error::schema(format!(
                "grid half-width must be finite and > 0, got {half_width}"
            )));
        }
        KGrid::new(center - half_width, center + half_width, n_points)
    }

    pub fn k_min(&self) -> f64 {
        self.k_min
    }

    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.k_max - self.k_min) / (self.n_points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        debug_assert!(i < self.n_points);
        self.k_min + i as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    pub fn center_index(&self) -> usize {
        self.n_points / 2
    }

    /// Canonical value of k_i + k_j for all index pairs with i + j = s.
    /// Evaluating the sum through this single expression (rather than
    /// point(i) + point(j)) keeps amplitudes bitwise symmetric.
    pub fn pair_sum(&self, s: usize) -> f64 {
        debug_assert!(s <= 2 * (self.n_points - 1));
        2.0 * self.k_min + s as f64 * self.spacing()
    }

    /// Same span at doubled resolution: 2n - 1 points halve the spacing
    /// exactly and keep every existing node (even indices) and the center.
    pub fn refined(&self) -> KGrid {
        KGrid {
            k_min: self.k_min,
            k_max: self.k_max,
            n_points: 2 * self.n_points - 1,
        }
    }
}

/// Estimated fraction of a marginal distribution captured inside the grid,
/// from a power-law extrapolation of its edge decay.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCoverage {
    /// Coverage estimate per axis, in (0, 1].
    pub axis_coverage: Vec<f64>,
    /// Set when any axis captures less than 99.9% of the estimated weight.
    pub warning: Option<String>,
}

const COVERAGE_THRESHOLD: f64 = 0.999;

/// Estimate what fraction of the full-line integral of `marginal` (sampled
/// on `grid`) the grid captures. Fits a local power law |k - center|^-p to
/// the outermost decade of each tail and integrates it beyond the edge.
fn estimate_coverage(marginal: &[f64], grid: &KGrid) -> f64 {
    let n = marginal.len();
    debug_assert_eq!(n, grid.len());
    let inside = compensated_sum(marginal.iter().copied());
    if inside <= 0.0 || !inside.is_finite() {
        return 1.0;
    }
    let center = grid.point(grid.center_index());
    let half_span = (grid.k_max() - grid.k_min()) / 2.0;
    let probe = (n / 8).max(2);
    let mut tail_total = 0.0;
    for (edge_idx, inner_idx) in [(n - 1, n - 1 - probe), (0, probe)] {
        let m_edge = marginal[edge_idx];
        let m_inner = marginal[inner_idx];
        let x_edge = (grid.point(edge_idx) - center).abs();
        let x_inner = (grid.point(inner_idx) - center).abs();
        if m_edge <= 0.0 || m_inner <= 0.0 || x_edge <= 0.0 || x_inner <= 0.0 {
            continue;
        }
        // Integral of m_edge (x/W)^-p from W to infinity is m_edge W/(p-1);
        // clamp shallow fits so the estimate stays finite.
        let p = ((m_inner / m_edge).ln() / (x_edge / x_inner).ln()).max(1.1);
        tail_total += m_edge * half_span / (p - 1.0) / grid.spacing();
    }
    inside / (inside + tail_total)
}

fn coverage_warning(axis_names: &[&str], axis_coverage: &[f64]) -> Option<String> {
    let mut lagging: Vec<String> = Vec::new();
    for (name, cov) in axis_names.iter().zip(axis_coverage) {
        if *cov < COVERAGE_THRESHOLD {
            lagging.push(format!("{name} axis ~{:.2}%", cov * 100.0));
        }
    }
    if lagging.is_empty() {
        None
    } else {
        Some(format!(
            "grid captures less than 99.9% of the estimated spectral weight ({}); \
             widen the grid half-width or add points",
            lagging.join(", ")
        ))
    }
}

/// Source of correlated photons: a ring, a pump envelope and an optional
/// momentum-offset override.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSource {
    ring: RingResonator,
    envelope: PumpEnvelope,
    upsilon_override: Option<f64>,
}

impl PairSource {
    pub fn new(ring: RingResonator, envelope: PumpEnvelope) -> Result<Self> {
        for role in [ModeRole::G, ModeRole::S, ModeRole::P] {
            ring.mode(role)?;
        }
        Ok(PairSource {
            ring,
            envelope,
            upsilon_override: None,
        })
    }

    /// Override the resonant momentum offset Upsilon, rad/s.
    pub fn with_upsilon_override(mut self, upsilon: f64) -> Self {
        self.upsilon_override = Some(upsilon);
        self
    }

    pub fn ring(&self) -> &RingResonator {
        &self.ring
    }

    pub fn envelope(&self) -> &PumpEnvelope {
        &self.envelope
    }

    /// Resonant momentum offset Upsilon = v_P K_P - v_S K_S - 2 v_G K_G,
    /// rad/s, unless overridden.
    pub fn upsilon(&self) -> f64 {
        if let Some(u) = self.upsilon_override {
            return u;
        }
        let g = self.ring.mode(ModeRole::G).expect("checked at construction");
        let s = self.ring.mode(ModeRole::S).expect("checked at construction");
        let p = self.ring.mode(ModeRole::P).expect("checked at construction");
        p.v_group * p.k_res - s.v_group * s.k_res - 2.0 * g.v_group * g.k_res
    }

    /// Pair grid centered on the G resonance, `half_width_linewidths` half
    /// linewidths wide on each side.
    pub fn default_pair_grid(&self, half_width_linewidths: f64, n_points: usize) -> Result<KGrid> {
        let g = self.ring.mode(ModeRole::G)?;
        KGrid::centered(
            g.k_res,
            half_width_linewidths * g.linewidth_wavenumber(),
            n_points,
        )
    }

    /// Seed grid centered on the S resonance.
    pub fn default_seed_grid(&self, half_width_linewidths: f64, n_points: usize) -> Result<KGrid> {
        let s = self.ring.mode(ModeRole::S)?;
        KGrid::centered(
            s.k_res,
            half_width_linewidths * s.linewidth_wavenumber(),
            n_points,
        )
    }

    /// Energy-conserving pump wavenumber for generated pair wavenumbers
    /// summing to `k_pair_sum` and seed wavenumber `k3`.
    fn pump_wavenumber(&self, k_pair_sum: f64, k3: f64) -> f64 {
        let g = self.ring.mode(ModeRole::G).expect("checked at construction");
        let s = self.ring.mode(ModeRole::S).expect("checked at construction");
        let p = self.ring.mode(ModeRole::P).expect("checked at construction");
        (g.v_group * k_pair_sum + s.v_group * k3 + self.upsilon()) / p.v_group
    }

    /// Shared per-diagonal pump factor F_P(u) alpha_P(u) for all pair sums
    /// on `grid` at seed wavenumber `k3`. Entry s covers every (i, j) with
    /// i + j = s.
    fn pump_factors(&self, grid: &KGrid, k3: f64) -> Result<Vec<Complex64>> {
        let p = self.ring.mode(ModeRole::P)?;
        (0..2 * grid.len() - 1)
            .map(|s| {
                let u = self.pump_wavenumber(grid.pair_sum(s), k3);
                let enhancement =
                    self.ring
                        .field_enhancement(ModeRole::P, u, FieldDirection::Incoming)?;
                let envelope = self.envelope.spectral_amplitude(p.v_group, u)?;
                Ok(enhancement * envelope)
            })
            .collect()
    }

    /// Outgoing enhancement factors conj(F(k_i)) of `role` over `grid`.
    fn outgoing_factors(&self, role: ModeRole, grid: &KGrid) -> Result<Vec<Complex64>> {
        (0..grid.len())
            .map(|i| {
                Ok(self
                    .ring
                    .field_enhancement(role, grid.point(i), FieldDirection::Outgoing)?
                    .conj())
            })
            .collect()
    }

    /// Stimulated pair amplitude over (k1, k2) at seed wavenumber `k_seed`.
    pub fn biphoton(&self, k_seed: f64, grid: &KGrid) -> Result<BiphotonAmplitude> {
        if !k_seed.is_finite() {
            return Err(Error::schema(format!(
                "seed wavenumber must be finite, got {k_seed}"
            )));
        }
        let f_g = self.outgoing_factors(ModeRole::G, grid)?;
        let pump = self.pump_factors(grid, k_seed)?;
        let n = grid.len();
        let mut values = vec![Complex64::default(); n * n];
        values
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| {
                let f_i = f_g[i];
                for (j, out) in row.iter_mut().enumerate() {
                    *out = (f_i * f_g[j]) * pump[i + j];
                }
            });
        let norm = normalize(&mut values, grid.spacing().powi(2))?;
        let center = grid.center_index();
        let norm = align_phase(&mut values, center * n + center, norm);
        let marginal = pair_marginal(&values, n, grid.spacing());
        let coverage = {
            let c = estimate_coverage(&marginal, grid);
            GridCoverage {
                axis_coverage: vec![c, c],
                warning: coverage_warning(&["k1", "k2"], &[c, c]),
            }
        };
        let norm_residual = {
            let total = compensated_sum(values.iter().map(|v| v.norm_sqr()))
                * grid.spacing().powi(2);
            (total - 1.0).abs()
        };
        Ok(BiphotonAmplitude {
            grid: *grid,
            k_seed,
            values,
            norm_constant: norm,
            norm_residual,
            coverage,
            mode_g: Some(*self.ring.mode(ModeRole::G)?),
        })
    }

    /// Triplet amplitude over (k1, k2, k3) with the pair axes on
    /// `pair_grid` and the seeded axis on `seed_grid`.
    pub fn triphoton(
        &self,
        pair_grid: &KGrid,
        seed_grid: &KGrid,
    ) -> Result<TriphotonAmplitude> {
        let f_g = self.outgoing_factors(ModeRole::G, pair_grid)?;
        let f_s = self.outgoing_factors(ModeRole::S, seed_grid)?;
        let n = pair_grid.len();
        let n_seed = seed_grid.len();
        // Slice-major layout: index (m, i, j) = m n^2 + i n + j, so each
        // fixed-k3 slice is a contiguous row-major (k1, k2) matrix.
        let mut values = vec![Complex64::default(); n_seed * n * n];
        let slices: Vec<Result<Vec<Complex64>>> = (0..n_seed)
            .into_par_iter()
            .map(|m| {
                let pump = self.pump_factors(pair_grid, seed_grid.point(m))?;
                let mut slice = vec![Complex64::default(); n * n];
                for i in 0..n {
                    let f_i = f_g[i];
                    for j in 0..n {
                        slice[i * n + j] = ((f_i * f_g[j]) * pump[i + j]) * f_s[m];
                    }
                }
                Ok(slice)
            })
            .collect();
        for (m, slice) in slices.into_iter().enumerate() {
            values[m * n * n..(m + 1) * n * n].copy_from_slice(&slice?);
        }
        let dk3 = pair_grid.spacing().powi(2) * seed_grid.spacing();
        let norm = normalize(&mut values, dk3)?;
        let center = pair_grid.center_index();
        let center_idx =
            seed_grid.center_index() * n * n + center * n + center;
        let norm = align_phase(&mut values, center_idx, norm);
        let norm_residual = {
            let total = compensated_sum(values.iter().map(|v| v.norm_sqr())) * dk3;
            (total - 1.0).abs()
        };
        let (pair_cov, seed_cov) = {
            let mut pair_marg = vec![0.0f64; n];
            let mut seed_marg = vec![0.0f64; n_seed];
            for m in 0..n_seed {
                for i in 0..n {
                    for j in 0..n {
                        let w = values[m * n * n + i * n + j].norm_sqr();
                        pair_marg[i] += w;
                        seed_marg[m] += w;
                    }
                }
            }
            (
                estimate_coverage(&pair_marg, pair_grid),
                estimate_coverage(&seed_marg, seed_grid),
            )
        };
        let axis_coverage = vec![pair_cov, pair_cov, seed_cov];
        let coverage = GridCoverage {
            warning: coverage_warning(&["k1", "k2", "k3"], &axis_coverage),
            axis_coverage,
        };
        Ok(TriphotonAmplitude {
            pair_grid: *pair_grid,
            seed_grid: *seed_grid,
            values,
            norm_constant: norm,
            norm_residual,
            coverage,
        })
    }
}

/// Scale `values` so the summed intensity times `cell` is one. Returns the
/// applied (real) normalization constant.
fn normalize(values: &mut [Complex64], cell: f64) -> Result<f64> {
    let total = compensated_sum(values.iter().map(|v| v.norm_sqr())) * cell;
    if !total.is_finite() {
        return Err(Error::numerics(
            "amplitude normalization overflowed; check mode parameters and grid span".to_string(),
        ));
    }
    if total <= 0.0 {
        return Err(Error::numerics(
            "amplitude vanishes on the whole grid; the pump envelope does not reach it"
                .to_string(),
        ));
    }
    let scale = 1.0 / total.sqrt();
    values.par_iter_mut().for_each(|v| *v *= scale);
    Ok(scale)
}

/// Rotate the global phase so values[pivot] is real non-negative. Returns
/// the full complex normalization constant including `scale`.
fn align_phase(values: &mut [Complex64], pivot: usize, scale: f64) -> Complex64 {
    let v = values[pivot];
    if v == Complex64::default() {
        return Complex64::new(scale, 0.0);
    }
    let phase = v.conj() / v.norm();
    values.par_iter_mut().for_each(|x| *x *= phase);
    phase * scale
}

fn pair_marginal(values: &[Complex64], n: usize, dk: f64) -> Vec<f64> {
    (0..n)
        .map(|i| compensated_sum(values[i * n..(i + 1) * n].iter().map(|v| v.norm_sqr())) * dk)
        .collect()
}

/// Normalized stimulated pair amplitude phi(k1, k2) at a fixed seed
/// wavenumber. Row-major over (k1, k2); exactly symmetric in its indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BiphotonAmplitude {
    grid: KGrid,
    k_seed: f64,
    values: Vec<Complex64>,
    norm_constant: Complex64,
    norm_residual: f64,
    coverage: GridCoverage,
    mode_g: Option<crate::physics::ResonatorMode>,
}

impl BiphotonAmplitude {
    /// Wrap explicit amplitude values (row-major over `grid` x `grid`).
    /// They must already be symmetric; normalization and phase alignment
    /// are applied here. Intended for synthetic spectra in tests and
    /// analysis utilities.
    pub fn from_values(grid: KGrid, mut values: Vec<Complex64>, k_seed: f64) -> Result<Self> {
        let n = grid.len();
        if values.len() != n * n {
            return Err(Error::schema(format!(
                "amplitude length {} does not match the {n}x{n} grid",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::numerics(
                "amplitude contains non-finite values".to_string(),
            ));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if values[i * n + j] != values[j * n + i] {
                    return Err(Error::physics(format!(
                        "pair amplitude must be exchange-symmetric; entries ({i}, {j}) and \
                         ({j}, {i}) differ"
                    )));
                }
            }
        }
        let norm = normalize(&mut values, grid.spacing().powi(2))?;
        let center = grid.center_index();
        let norm = align_phase(&mut values, center * n + center, norm);
        let marginal = pair_marginal(&values, n, grid.spacing());
        let c = estimate_coverage(&marginal, &grid);
        let norm_residual = {
            let total =
                compensated_sum(values.iter().map(|v| v.norm_sqr())) * grid.spacing().powi(2);
            (total - 1.0).abs()
        };
        Ok(BiphotonAmplitude {
            grid,
            k_seed,
            values,
            norm_constant: norm,
            norm_residual,
            coverage: GridCoverage {
                axis_coverage: vec![c, c],
                warning: coverage_warning(&["k1", "k2"], &[c, c]),
            },
            mode_g: None,
        })
    }

    pub fn grid(&self) -> &KGrid {
        &self.grid
    }

    pub fn k_seed(&self) -> f64 {
        self.k_seed
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.grid.len() + j]
    }

    /// Normalization constant applied to the raw factorized amplitude.
    pub fn norm_constant(&self) -> Complex64 {
        self.norm_constant
    }

    /// |sum |phi|^2 dk^2 - 1| recomputed after normalization.
    pub fn norm_residual(&self) -> f64 {
        self.norm_residual
    }

    pub fn coverage(&self) -> &GridCoverage {
        &self.coverage
    }

    /// Generated-mode resonance the amplitude was built around, if it came
    /// from a ring model (synthetic amplitudes have none).
    pub fn mode_g(&self) -> Option<&crate::physics::ResonatorMode> {
        self.mode_g.as_ref()
    }

    /// Marginal intensity along one pair axis (both axes agree by
    /// symmetry), integrated with the grid weight.
    pub fn marginal(&self) -> Vec<f64> {
        pair_marginal(&self.values, self.grid.len(), self.grid.spacing())
    }
}

/// Normalized triplet amplitude phi(k1, k2, k3), slice-major in k3.
/// Exactly symmetric under k1 <-> k2.
#[derive(Debug, Clone, PartialEq)]
pub struct TriphotonAmplitude {
    pair_grid: KGrid,
    seed_grid: KGrid,
    values: Vec<Complex64>,
    norm_constant: Complex64,
    norm_residual: f64,
    coverage: GridCoverage,
}

impl TriphotonAmplitude {
    pub fn pair_grid(&self) -> &KGrid {
        &self.pair_grid
    }

    pub fn seed_grid(&self) -> &KGrid {
        &self.seed_grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize, m: usize) -> Complex64 {
        let n = self.pair_grid.len();
        self.values[m * n * n + i * n + j]
    }

    /// Contiguous (k1, k2) slice at seed index `m`.
    pub fn slice(&self, m: usize) -> &[Complex64] {
        let n = self.pair_grid.len();
        &self.values[m * n * n..(m + 1) * n * n]
    }

    pub fn norm_constant(&self) -> Complex64 {
        self.norm_constant
    }

    pub fn norm_residual(&self) -> f64 {
        self.norm_residual
    }

    pub fn coverage(&self) -> &GridCoverage {
        &self.coverage
    }

    /// Marginal intensity along k1 (equals the k2 marginal by symmetry).
    pub fn pair_marginal(&self) -> Vec<f64> {
        let n = self.pair_grid.len();
        let cell = self.pair_grid.spacing() * self.seed_grid.spacing();
        (0..n)
            .map(|i| {
                let mut acc = Vec::with_capacity(self.seed_grid.len() * n);
                for m in 0..self.seed_grid.len() {
                    for j in 0..n {
                        acc.push(self.values[m * n * n + i * n + j].norm_sqr());
                    }
                }
                compensated_sum(acc) * cell
            })
            .collect()
    }

    /// Marginal intensity along the seeded axis k3.
    pub fn seed_marginal(&self) -> Vec<f64> {
        let n = self.pair_grid.len();
        let cell = self.pair_grid.spacing().powi(2);
        (0..self.seed_grid.len())
            .map(|m| {
                compensated_sum(self.slice(m).iter().map(|v| v.norm_sqr())) * cell
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::test_fixtures::ring_nondegenerate;
    use crate::physics::Scheme;
    use approx::assert_relative_eq;

    pub(crate) fn pulsed_source() -> PairSource {
        let ring = ring_nondegenerate();
        let p = ring.mode(ModeRole::P).unwrap();
        let envelope = PumpEnvelope::gaussian(p.k_res, 1e-11).unwrap();
        PairSource::new(ring, envelope).unwrap()
    }

    #[test]
    fn gaussian_width_conversion() {
        let env = PumpEnvelope::gaussian(1.0, 1e-11).unwrap();
        // fwhm 10 ps -> sigma_t = 6.0056e-12 s.
        assert_relative_eq!(env.sigma_t().unwrap(), 6.0056e-12, max_relative = 1e-4);
    }

    #[test]
    fn gaussian_peak_and_width_points() {
        let source = pulsed_source();
        let p = source.ring().mode(ModeRole::P).unwrap();
        let env = source.envelope();
        let peak = env.spectral_amplitude(p.v_group, env.k_center()).unwrap();
        assert_eq!(peak, Complex64::new(1.0, 0.0));
        // At detuning v (k - kc) = 1/sigma_t the amplitude is e^(-1/2).
        let sigma_t = env.sigma_t().unwrap();
        let k = env.k_center() + 1.0 / (sigma_t * p.v_group);
        let amp = env.spectral_amplitude(p.v_group, k).unwrap();
        assert_relative_eq!(amp.re, (-0.5f64).exp(), max_relative = 1e-9);
    }

    #[test]
    fn cw_envelope_cannot_be_sampled() {
        let env = PumpEnvelope::cw(1.0).unwrap();
        let err = env.spectral_amplitude(1e8, 1.0).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn grid_invariants() {
        let g = KGrid::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.point(g.center_index()), 0.0);
        assert_eq!(g.points().len(), 5);
        assert!(KGrid::new(-1.0, 1.0, 4).is_err());
        assert!(KGrid::new(-1.0, 1.0, 1).is_err());
        assert!(KGrid::new(1.0, -1.0, 5).is_err());
    }

    #[test]
    fn grid_refinement_halves_spacing_and_keeps_nodes() {
        let g = KGrid::new(-3.0, 5.0, 101).unwrap();
        let r = g.refined();
        assert_eq!(r.len(), 201);
        assert_eq!(r.spacing(), g.spacing() / 2.0);
        assert_eq!(r.center_index(), 2 * g.center_index());
        for i in 0..g.len() {
            assert_eq!(r.point(2 * i), g.point(i));
        }
    }

    #[test]
    fn pair_sum_is_consistent_with_points() {
        let g = KGrid::new(-2.0, 2.0, 9).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                assert_relative_eq!(
                    g.pair_sum(i + j),
                    g.point(i) + g.point(j),
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn upsilon_vanishes_on_energy_matched_ring() {
        let source = pulsed_source();
        let p = source.ring().mode(ModeRole::P).unwrap();
        let scale = p.v_group * p.k_res;
        assert!(source.upsilon().abs() < 1e-12 * scale);
        let overridden = source.clone().with_upsilon_override(3.25);
        assert_eq!(overridden.upsilon(), 3.25);
    }

    #[test]
    fn biphoton_is_bitwise_symmetric() {
        let source = pulsed_source();
        let s = source.ring().mode(ModeRole::S).unwrap();
        let grid = source.default_pair_grid(12.0, 41).unwrap();
        let amp = source.biphoton(s.k_res, &grid).unwrap();
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                assert_eq!(amp.value(i, j), amp.value(j, i));
            }
        }
    }

    #[test]
    fn biphoton_is_normalized_with_center_real() {
        let source = pulsed_source();
        let s = source.ring().mode(ModeRole::S).unwrap();
        let grid = source.default_pair_grid(12.0, 101).unwrap();
        let amp = source.biphoton(s.k_res, &grid).unwrap();
        assert!(amp.norm_residual() <= 1e-10, "residual {}", amp.norm_residual());
        let c = grid.center_index();
        let center = amp.value(c, c);
        assert!(center.im.abs() <= 1e-12 * center.re);
        assert!(center.re >= 0.0);
    }

    #[test]
    fn biphoton_peaks_at_grid_center_on_resonance() {
        let source = pulsed_source();
        let s = source.ring().mode(ModeRole::S).unwrap();
        let grid = source.default_pair_grid(12.0, 41).unwrap();
        let amp = source.biphoton(s.k_res, &grid).unwrap();
        let c = grid.center_index();
        let peak = amp.value(c, c).norm_sqr();
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                assert!(amp.value(i, j).norm_sqr() <= peak);
            }
        }
    }

    #[test]
    fn biphoton_norm_is_scale_invariant() {
        // Same source, grids differing only in resolution: the normalized
        // summed intensity is one on both.
        let source = pulsed_source();
        let s = source.ring().mode(ModeRole::S).unwrap();
        for n in [41, 81, 161] {
            let grid = source.default_pair_grid(12.0, n).unwrap();
            let amp = source.biphoton(s.k_res, &grid).unwrap();
            assert!(amp.norm_residual() <= 1e-10);
        }
    }

    #[test]
    fn refinement_changes_amplitude_by_little() {
        let source = pulsed_source();
        let s = source.ring().mode(ModeRole::S).unwrap();
        let grid = source.default_pair_grid(12.0, 101).unwrap();
        let coarse = source.biphoton(s.k_res, &grid).unwrap();
        let fine = source.biphoton(s.k_res, &grid.refined()).unwrap();
        // Compare on the shared nodes after renormalizing the subsampled
        // fine amplitude on the coarse grid.
        let n = grid.len();
        let nf = grid.refined().len();
        let mut sub = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                sub.push(fine.values()[(2 * i) * nf + 2 * j]);
            }
        }
        let dk2 = grid.spacing().powi(2);
        let sub_norm = compensated_sum(sub.iter().map(|v| v.norm_sqr())) * dk2;
        let scale = 1.0 / sub_norm.sqrt();
        let dist_sq: f64 = sub
            .iter()
            .zip(coarse.values())
            .map(|(f, c)| (f * scale - c).norm_sqr())
            .sum::<f64>()
            * dk2;
        assert!(dist_sq.sqrt() <= 1e-3, "L2 distance {}", dist_sq.sqrt());
    }

    #[test]
    fn triphoton_matches_biphoton_slices() {
        let source = pulsed_source();
        let pair_grid = source.default_pair_grid(12.0, 31).unwrap();
        let seed_grid = source.default_seed_grid(12.0, 11).unwrap();
        let tri = source.triphoton(&pair_grid, &seed_grid).unwrap();
        assert!(tri.norm_residual() <= 1e-10);
        let n = pair_grid.len();
        for m in [0, seed_grid.center_index(), seed_grid.len() - 1] {
            let bi = source.biphoton(seed_grid.point(m), &pair_grid).unwrap();
            let slice = tri.slice(m);
            let slice_norm =
                compensated_sum(slice.iter().map(|v| v.norm_sqr())) * pair_grid.spacing().powi(2);
            let scale = 1.0 / slice_norm.sqrt();
            let pivot = slice[pair_grid.center_index() * n + pair_grid.center_index()];
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
                    assert_eq!(a.norm(), 0.0);
                    continue;
                }
                worst = worst.max((a - b).norm() / denom);
            }
            assert!(worst <= 1e-10, "slice {m} deviates by {worst}");
        }
    }

    #[test]
    fn triphoton_symmetric_in_pair_axes() {
        let source = pulsed_source();
        let pair_grid = source.default_pair_grid(12.0, 21).unwrap();
        let seed_grid = source.default_seed_grid(12.0, 7).unwrap();
        let tri = source.triphoton(&pair_grid, &seed_grid).unwrap();
        for m in 0..seed_grid.len() {
            for i in 0..pair_grid.len() {
                for j in 0..pair_grid.len() {
                    assert_eq!(tri.value(i, j, m), tri.value(j, i, m));
                }
            }
        }
    }

    #[test]
    fn separable_limit_factorizes() {
        // A very short pump pulse makes the envelope flat over the grid, so
        // the amplitude approaches F(k1) F(k2) times a constant and the
        // cross ratio phi(i,j) phi(c,c) / (phi(i,c) phi(c,j)) tends to one.
        let ring = ring_nondegenerate();
        let p = ring.mode(ModeRole::P).unwrap();
        let envelope = PumpEnvelope::gaussian(p.k_res, 1e-14).unwrap();
        let source = PairSource::new(ring, envelope).unwrap();
        let s = source.ring().mode(ModeRole::S).unwrap();
        let grid = source.default_pair_grid(6.0, 21).unwrap();
        let amp = source.biphoton(s.k_res, &grid).unwrap();
        let c = grid.center_index();
        for i in (0..grid.len()).step_by(5) {
            for j in (0..grid.len()).step_by(5) {
                let ratio = amp.value(i, j) * amp.value(c, c)
                    / (amp.value(i, c) * amp.value(c, j));
                assert_relative_eq!(ratio.re, 1.0, max_relative = 1e-4);
                assert!(ratio.im.abs() < 1e-4);
            }
        }
    }

    #[test]
    fn from_values_rejects_asymmetry_and_normalizes() {
        let grid = KGrid::new(-1.0, 1.0, 3).unwrap();
        let mut vals = vec![Complex64::new(1.0, 0.0); 9];
        vals[1] = Complex64::new(2.0, 0.0);
        let err = BiphotonAmplitude::from_values(grid, vals, 0.0).unwrap_err();
        assert_eq!(err.exit_code(), 3);

        let vals = vec![Complex64::new(0.5, -0.25); 9];
        let amp = BiphotonAmplitude::from_values(grid, vals, 0.0).unwrap();
        assert!(amp.norm_residual() <= 1e-12);
        let c = amp.value(1, 1);
        assert!(c.re > 0.0 && c.im.abs() <= 1e-15);
    }

    #[test]
    fn coverage_flags_narrow_grids() {
        let source = pulsed_source();
        let s = source.ring().mode(ModeRole::S).unwrap();
        let narrow = source.default_pair_grid(2.0, 41).unwrap();
        let amp = source.biphoton(s.k_res, &narrow).unwrap();
        assert!(amp.coverage().warning.is_some());
        let wide = source.default_pair_grid(12.0, 101).unwrap();
        let amp = source.biphoton(s.k_res, &wide).unwrap();
        assert!(
            amp.coverage().axis_coverage.iter().all(|c| *c >= 0.999),
            "coverage {:?}",
            amp.coverage().axis_coverage
        );
    }

    #[test]
    fn cw_pump_rejected_for_spectra() {
        let ring = ring_nondegenerate();
        let p = ring.mode(ModeRole::P).unwrap();
        let source = PairSource::new(ring.clone(), PumpEnvelope::cw(p.k_res).unwrap()).unwrap();
        let s = ring.mode(ModeRole::S).unwrap();
        let grid = source.default_pair_grid(12.0, 11).unwrap();
        let err = source.biphoton(s.k_res, &grid).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        let _ = Scheme::NonDegenerate;
    }
}
