//! Randomized self-checks of the model's internal identities.
//!
//! Each suite draws physically valid configurations from a seeded RNG and
//! verifies a property that holds exactly in the model: the stimulated
//! rate identity, linearity in the drive powers, the symmetric-parameter
//! reduction between the two schemes, Lorentzian line-shape properties,
//! factor-breakdown consistency, and agreement of the two Schmidt-number
//! routes. A deliberate fault can be injected to demonstrate that the
//! identity checks have teeth.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::physics::{
    field_enhancement, CouplingGamma, FieldDirection, ModeRole, ResonatorMode, RingResonator,
    Scheme,
};
use crate::rates::{
    self, Fault, ProcessConfig, rate_spontaneous_degenerate, rate_spontaneous_nondegenerate,
    rate_stimulated_with_fault,
};
use crate::util::{compensated_sum, sinc};
use crate::wavefunction::{BiphotonAmplitude, KGrid};

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    /// Randomized cases per suite.
    pub cases: usize,
    pub seed: u64,
    /// Deliberate formula corruption, to prove the checks catch it.
    pub fault: Option<Fault>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            cases: 1000,
            seed: 20,
            fault: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Worst deviation observed, in the suite's own measure.
    pub worst: f64,
    pub first_failure: Option<String>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub seed: u64,
    pub cases: usize,
    pub suites: Vec<SuiteOutcome>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed())
    }

    pub fn render(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "self-check: seed {}, {} cases per suite", self.seed, self.cases);
        for s in &self.suites {
            let status = if s.passed() { "pass" } else { "FAIL" };
            let _ = writeln!(
                out,
                "  {status}  {:<24} {:>6} cases  worst deviation {:.3e}",
                s.name, s.cases, s.worst
            );
            if let Some(detail) = &s.first_failure {
                let _ = writeln!(out, "        first failure: {detail}");
            }
        }
        let _ = writeln!(
            out,
            "result: {}",
            if self.passed() { "all suites passed" } else { "FAILURES detected" }
        );
        out
    }
}

/// Schmidt number by the direct density-matrix route: build
/// rho(i, i') = sum_j phi(i, j) conj(phi(i', j)) dk^2 and return
/// 1 / tr(rho^2). Quadratic-memory, cubic-time; the independent oracle for
/// the singular-value route.
pub fn schmidt_number_direct(values: &[Complex64], n: usize, dk: f64) -> f64 {
    let cell = dk * dk;
    let mut rho = vec![Complex64::default(); n * n];
    for i in 0..n {
        for ip in 0..n {
            let mut acc = Complex64::default();
            for j in 0..n {
                acc += values[i * n + j] * values[ip * n + j].conj();
            }
            rho[i * n + ip] = acc * cell;
        }
    }
    let trace: f64 = (0..n).map(|i| rho[i * n + i].re).sum();
    let purity: f64 = rho.iter().map(|r| r.norm_sqr()).sum::<f64>() / (trace * trace);
    1.0 / purity
}

pub fn run(opts: &CheckOptions) -> CheckReport {
    let suites = vec![
        stimulation_identity_suite(opts),
        power_linearity_suite(opts),
        symmetric_reduction_suite(opts),
        enhancement_line_shape_suite(opts),
        sinc_bounds_suite(opts),
        factor_breakdown_suite(opts),
        schmidt_oracle_suite(opts),
    ];
    CheckReport {
        seed: opts.seed,
        cases: opts.cases,
        suites,
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo * (rng.gen::<f64>() * (hi / lo).ln()).exp()
}

fn random_mode(rng: &mut ChaCha8Rng, role: ModeRole, omega: f64, kappa_scale: f64) -> ResonatorMode {
    let q_loaded = log_uniform(rng, 1e4, 1e6);
    let eta = rng.gen_range(0.05..=1.0);
    let n_char = rng.gen_range(1.4..3.5);
    let v_group = crate::constants::SPEED_OF_LIGHT / rng.gen_range(1.5..4.5);
    let k_res = n_char * omega / crate::constants::SPEED_OF_LIGHT;
    ResonatorMode::new(
        role,
        omega,
        q_loaded,
        q_loaded / eta,
        v_group,
        k_res,
        k_res * kappa_scale,
        n_char,
    )
    .expect("generated modes are valid by construction")
}

fn random_nondegenerate(rng: &mut ChaCha8Rng) -> ProcessConfig {
    let omega_g = log_uniform(rng, 0.9e15, 1.9e15);
    let omega_s = omega_g * rng.gen_range(0.5..1.5);
    let omega_p = 2.0 * omega_g + omega_s;
    let g = random_mode(rng, ModeRole::G, omega_g, 1.0);
    let s = random_mode(rng, ModeRole::S, omega_s, 1.0);
    let mut p = random_mode(rng, ModeRole::P, omega_p, 1.0);
    // Place kappa_P near the matched combination, detuned by up to 0.1%,
    // so sinc^2 is exercised across its whole range.
    p.kappa_ring = (s.kappa_ring + 2.0 * g.kappa_ring) * (1.0 + rng.gen_range(-1e-3..1e-3));
    let length = log_uniform(rng, 5e-5, 1e-3);
    let ring = RingResonator::new(length, None, [g, s, p]).expect("valid ring");
    ProcessConfig::new(
        Scheme::NonDegenerate,
        ring,
        log_uniform(rng, 0.01, 100.0),
        log_uniform(rng, 1e-6, 1.0),
        Some(log_uniform(rng, 1e-8, 0.1)),
    )
    .expect("valid process")
}

fn random_degenerate(rng: &mut ChaCha8Rng) -> ProcessConfig {
    let omega_f = log_uniform(rng, 0.9e15, 1.9e15);
    let f = random_mode(rng, ModeRole::F, omega_f, 1.0);
    let mut t = random_mode(rng, ModeRole::T, 3.0 * omega_f, 1.0);
    t.kappa_ring = 3.0 * f.kappa_ring * (1.0 + rng.gen_range(-1e-3..1e-3));
    let length = log_uniform(rng, 5e-5, 1e-3);
    let ring = RingResonator::new(length, None, [f, t]).expect("valid ring");
    ProcessConfig::new(
        Scheme::Degenerate,
        ring,
        log_uniform(rng, 0.01, 100.0),
        log_uniform(rng, 1e-6, 1.0),
        None,
    )
    .expect("valid process")
}

struct SuiteAccumulator {
    name: &'static str,
    cases: usize,
    failures: usize,
    worst: f64,
    first_failure: Option<String>,
}

impl SuiteAccumulator {
    fn new(name: &'static str) -> Self {
        SuiteAccumulator {
            name,
            cases: 0,
            failures: 0,
            worst: 0.0,
            first_failure: None,
        }
    }

    fn record(&mut self, deviation: f64, tolerance: f64, detail: impl FnOnce() -> String) {
        self.cases += 1;
        if deviation > self.worst || !deviation.is_finite() {
            self.worst = deviation;
        }
        if !(deviation <= tolerance) {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(detail());
            }
        }
    }

    fn finish(self) -> SuiteOutcome {
        SuiteOutcome {
            name: self.name,
            cases: self.cases,
            failures: self.failures,
            worst: self.worst,
            first_failure: self.first_failure,
        }
    }
}

/// R_stim must equal R_spon * P_seed / P_vac to within 1e-12 relative.
fn stimulation_identity_suite(opts: &CheckOptions) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x571);
    let mut acc = SuiteAccumulator::new("stimulation-identity");
    for case in 0..opts.cases {
        let cfg = random_nondegenerate(&mut rng);
        let spon = rate_spontaneous_nondegenerate(&cfg).expect("valid config").value;
        let stim = rate_stimulated_with_fault(&cfg, opts.fault)
            .expect("valid config")
            .value;
        let enhancement = rates::stimulation_enhancement(&cfg).expect("valid config");
        let expected = spon * enhancement;
        let deviation = if stim == 0.0 && expected == 0.0 {
            0.0
        } else {
            (stim - expected).abs() / stim.abs().max(expected.abs())
        };
        acc.record(deviation, 1e-12, || {
            format!("case {case}: relative deviation {deviation:.3e}")
        });
    }
    acc.finish()
}

/// Rates scale linearly in each drive power.
fn power_linearity_suite(opts: &CheckOptions) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x11);
    let mut acc = SuiteAccumulator::new("power-linearity");
    for case in 0..opts.cases {
        let (base, alpha) = if case % 2 == 0 {
            let cfg = random_nondegenerate(&mut rng);
            let alpha = log_uniform(&mut rng, 1e-3, 1e3);
            let r1 = rate_spontaneous_nondegenerate(&cfg).expect("valid").value;
            let mut scaled = cfg.clone();
            scaled.p_pump *= alpha;
            let r2 = rate_spontaneous_nondegenerate(&scaled).expect("valid").value;
            ((r2, alpha * r1), alpha)
        } else {
            let cfg = random_degenerate(&mut rng);
            let alpha = log_uniform(&mut rng, 1e-3, 1e3);
            let r1 = rate_spontaneous_degenerate(&cfg).expect("valid").value;
            let mut scaled = cfg.clone();
            scaled.p_pump *= alpha;
            let r2 = rate_spontaneous_degenerate(&scaled).expect("valid").value;
            ((r2, alpha * r1), alpha)
        };
        let (got, expected) = base;
        let deviation = if got == 0.0 && expected == 0.0 {
            0.0
        } else {
            (got - expected).abs() / got.abs().max(expected.abs())
        };
        acc.record(deviation, 1e-12, || {
            format!("case {case}: scale {alpha:.3e}, relative deviation {deviation:.3e}")
        });
    }
    acc.finish()
}

/// Collapsing the non-degenerate scheme onto identical mode parameters
/// must give exactly three times the degenerate rate.
fn symmetric_reduction_suite(opts: &CheckOptions) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x3);
    let mut acc = SuiteAccumulator::new("symmetric-reduction");
    for case in 0..opts.cases {
        let deg = random_degenerate(&mut rng);
        let f = *deg.ring.mode(ModeRole::F).expect("present");
        let t = *deg.ring.mode(ModeRole::T).expect("present");
        let mut g = f;
        g.role = ModeRole::G;
        let mut s = f;
        s.role = ModeRole::S;
        let mut p = t;
        p.role = ModeRole::P;
        let ring = RingResonator::new(deg.ring.length(), None, [g, s, p]).expect("valid");
        let nondeg = ProcessConfig::new(
            Scheme::NonDegenerate,
            ring,
            deg.lambda_nl,
            deg.p_pump,
            None,
        )
        .expect("valid");
        let r_deg = rate_spontaneous_degenerate(&deg).expect("valid").value;
        let r_nondeg = rate_spontaneous_nondegenerate(&nondeg).expect("valid").value;
        let expected = 3.0 * r_deg;
        let deviation = if r_nondeg == 0.0 && expected == 0.0 {
            0.0
        } else {
            (r_nondeg - expected).abs() / r_nondeg.abs().max(expected.abs())
        };
        acc.record(deviation, 1e-12, || {
            format!("case {case}: relative deviation {deviation:.3e}")
        });
    }
    acc.finish()
}

/// Line-shape facts of the Lorentzian enhancement: even magnitude, maximal
/// on resonance, half power at one half-linewidth, equal magnitudes for
/// the incoming and outgoing directions.
fn enhancement_line_shape_suite(opts: &CheckOptions) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x1f);
    let mut acc = SuiteAccumulator::new("enhancement-line-shape");
    for case in 0..opts.cases {
        let omega = log_uniform(&mut rng, 0.9e15, 3.9e15);
        let mode = random_mode(&mut rng, ModeRole::G, omega, 1.0);
        let gamma = CouplingGamma::standard_for(&mode);
        let length = log_uniform(&mut rng, 5e-5, 1e-3);
        let lw = mode.linewidth_wavenumber();
        let peak =
            field_enhancement(&mode, &gamma, mode.k_res, FieldDirection::Incoming, length)
                .norm_sqr();
        let mut deviation = 0.0f64;
        // Half power at +-1 half-linewidth.
        for sign in [-1.0, 1.0] {
            let k = mode.k_res + sign * lw;
            let mag =
                field_enhancement(&mode, &gamma, k, FieldDirection::Incoming, length).norm_sqr();
            deviation = deviation.max((mag / peak - 0.5).abs());
        }
        let detuning = rng.gen_range(0.1..20.0) * lw;
        let plus = field_enhancement(
            &mode,
            &gamma,
            mode.k_res + detuning,
            FieldDirection::Incoming,
            length,
        );
        let minus = field_enhancement(
            &mode,
            &gamma,
            mode.k_res - detuning,
            FieldDirection::Incoming,
            length,
        );
        let out = field_enhancement(
            &mode,
            &gamma,
            mode.k_res + detuning,
            FieldDirection::Outgoing,
            length,
        );
        if plus.norm_sqr() != minus.norm_sqr() {
            deviation = deviation.max(1.0);
        }
        if plus.norm_sqr() != out.norm_sqr() {
            deviation = deviation.max(1.0);
        }
        if plus.norm_sqr() >= peak {
            deviation = deviation.max(1.0);
        }
        acc.record(deviation, 1e-8, || {
            format!("case {case}: line-shape deviation {deviation:.3e}")
        });
    }
    acc.finish()
}

/// 0 <= sinc^2 <= 1 everywhere, with equality to one only at zero.
fn sinc_bounds_suite(opts: &CheckOptions) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x51);
    let mut acc = SuiteAccumulator::new("sinc-bounds");
    for case in 0..opts.cases {
        let x = rng.gen_range(-75.0..75.0);
        let s2 = sinc(x).powi(2);
        let mut deviation: f64 = 0.0;
        if !(0.0..=1.0).contains(&s2) {
            deviation = deviation.max((s2 - 1.0).max(-s2));
        }
        if x != 0.0 && s2 >= 1.0 {
            deviation = deviation.max(s2 - 1.0 + f64::EPSILON);
        }
        if sinc(0.0) != 1.0 {
            deviation = 1.0;
        }
        acc.record(deviation, 0.0, || {
            format!("case {case}: x = {x}, sinc^2 = {s2}")
        });
    }
    acc.finish()
}

/// The factor breakdown of every rate multiplies back to its value.
fn factor_breakdown_suite(opts: &CheckOptions) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xfb);
    let mut acc = SuiteAccumulator::new("factor-breakdown");
    for case in 0..opts.cases {
        let results = if case % 2 == 0 {
            let cfg = random_nondegenerate(&mut rng);
            vec![
                rate_spontaneous_nondegenerate(&cfg).expect("valid"),
                rate_stimulated_with_fault(&cfg, opts.fault).expect("valid"),
            ]
        } else {
            vec![rate_spontaneous_degenerate(&random_degenerate(&mut rng)).expect("valid")]
        };
        let mut deviation = 0.0f64;
        for r in &results {
            let product = r.factors.iter().fold(1.0, |acc, f| acc * f.value);
            if r.value != 0.0 {
                deviation = deviation.max((product - r.value).abs() / r.value.abs());
            } else if product != 0.0 {
                deviation = deviation.max(1.0);
            }
        }
        acc.record(deviation, 1e-12, || {
            format!("case {case}: breakdown deviation {deviation:.3e}")
        });
    }
    acc.finish()
}

/// The singular-value and density-matrix Schmidt numbers agree to 1e-10 on
/// random symmetric amplitudes, and a separable amplitude gives K = 1.
fn schmidt_oracle_suite(opts: &CheckOptions) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5c);
    let mut acc = SuiteAccumulator::new("schmidt-oracle");
    let iterations = opts.cases.min(200);
    for case in 0..iterations {
        let n = 2 * rng.gen_range(2..8) + 1;
        let grid = KGrid::new(-1.0, 1.0, n).expect("valid grid");
        let mut values = vec![Complex64::default(); n * n];
        if case % 5 == 0 {
            // Separable: outer product of one random vector.
            let f: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            for i in 0..n {
                for j in 0..n {
                    values[i * n + j] = f[i] * f[j];
                }
            }
        } else {
            for i in 0..n {
                for j in i..n {
                    let v =
                        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    values[i * n + j] = v;
                    values[j * n + i] = v;
                }
            }
        }
        let amp = match BiphotonAmplitude::from_values(grid, values, 0.0) {
            Ok(amp) => amp,
            Err(_) => continue,
        };
        let svd = match crate::analysis::schmidt_spectrum(&amp) {
            Ok(s) => s,
            Err(e) => {
                acc.record(f64::INFINITY, 1e-10, || format!("case {case}: {e}"));
                continue;
            }
        };
        let direct = schmidt_number_direct(amp.values(), n, grid.spacing());
        let mut deviation = (svd.schmidt_number - direct).abs();
        if case % 5 == 0 {
            deviation = deviation.max((svd.schmidt_number - 1.0).abs());
        }
        let sum = compensated_sum(svd.coefficients.iter().copied());
        deviation = deviation.max((sum - 1.0).abs());
        acc.record(deviation, 1e-10, || {
            format!(
                "case {case}: n = {n}, svd K = {}, direct K = {direct}",
                svd.schmidt_number
            )
        });
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_run_passes_all_suites() {
        let report = run(&CheckOptions {
            cases: 150,
            ..CheckOptions::default()
        });
        assert!(report.passed(), "{}", report.render());
        assert_eq!(report.suites.len(), 7);
        for s in &report.suites {
            assert!(s.cases > 0);
        }
    }

    #[test]
    fn injected_fault_is_caught() {
        let report = run(&CheckOptions {
            cases: 50,
            seed: 20,
            fault: Some(Fault::StimulatedPrefactor),
        });
        assert!(!report.passed());
        let identity = report
            .suites
            .iter()
            .find(|s| s.name == "stimulation-identity")
            .unwrap();
        assert_eq!(identity.failures, identity.cases);
    }

    #[test]
    fn report_renders_status_lines() {
        let report = run(&CheckOptions {
            cases: 10,
            ..CheckOptions::default()
        });
        let text = report.render();
        assert!(text.contains("stimulation-identity"));
        assert!(text.contains("all suites passed"));
    }

    #[test]
    fn direct_schmidt_number_on_known_matrices() {
        // Maximally entangled rank-3 amplitude: K = 3.
        let n = 3;
        let mut values = vec![Complex64::default(); 9];
        for i in 0..3 {
            values[i * 3 + i] = Complex64::new(1.0, 0.0);
        }
        let k = schmidt_number_direct(&values, n, 0.7);
        assert!((k - 3.0).abs() < 1e-12);
    }

    #[test]
    fn runs_are_reproducible_for_a_seed() {
        let a = run(&CheckOptions {
            cases: 25,
            seed: 99,
            fault: None,
        });
        let b = run(&CheckOptions {
            cases: 25,
            seed: 99,
            fault: None,
        });
        for (x, y) in a.suites.iter().zip(&b.suites) {
            assert_eq!(x.worst, y.worst);
            assert_eq!(x.failures, y.failures);
        }
    }
}
