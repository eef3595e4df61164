//! Deterministic text rendering: CSV files with `# key: value` headers,
//! aligned stdout tables, and the reconciliation report.
//!
//! All numbers are formatted with the shortest representation that parses
//! back to the same f64, so repeated runs produce byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::{JsiMatrix, SchmidtResult, SetScanResult, SweepParameter, SweepRow};
use crate::config::{PumpKind, ResolvedConfig};
use crate::error::{Error, Result};
use crate::physics::{ModeRole, ResonatorMode, RingResonator, Scheme};
use crate::rates::{
    rate_spontaneous_degenerate, rate_spontaneous_nondegenerate, rate_stimulated, vacuum_power,
    ProcessConfig, RateResult,
};
use crate::wavefunction::TriphotonAmplitude;

/// Shortest f64 representation that round-trips.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Write `content` to `prefix` + `name`, creating parent directories.
pub fn write_text(prefix: &str, name: &str, content: &str) -> Result<PathBuf> {
    let path = PathBuf::from(format!("{prefix}{name}"));
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(&path, content)?;
    Ok(path)
}

fn header(out: &mut String, entries: &[(&str, String)]) {
    for (key, value) in entries {
        let _ = writeln!(out, "# {key}: {value}");
    }
}

/// Matrix CSV: `# key: value` header lines, then one comma-separated row
/// per grid row.
pub fn jsi_csv(jsi: &JsiMatrix, extra: &[(&str, String)]) -> String {
    let grid = jsi.grid();
    let mut out = String::new();
    let mut meta: Vec<(&str, String)> = vec![
        ("format", "jsi-matrix".to_string()),
        ("rows", grid.len().to_string()),
        ("cols", grid.len().to_string()),
        ("k_min", fmt_f64(grid.k_min())),
        ("k_max", fmt_f64(grid.k_max())),
        ("spacing", fmt_f64(grid.spacing())),
        ("k_seed", fmt_f64(jsi.k_seed())),
    ];
    meta.extend(extra.iter().map(|(k, v)| (*k, v.clone())));
    header(&mut out, &meta);
    let n = grid.len();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| fmt_f64(jsi.value(i, j))).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Axis CSV: index, wavenumber and (when available) the generated mode's
/// frequency from its linear dispersion.
pub fn axes_csv(jsi: &JsiMatrix) -> String {
    let grid = jsi.grid();
    let mut out = String::new();
    header(
        &mut out,
        &[
            ("format", "axes".to_string()),
            ("points", grid.len().to_string()),
        ],
    );
    match jsi.omega_axis() {
        Some(omega) => {
            let _ = writeln!(out, "index,k,omega");
            for i in 0..grid.len() {
                let _ = writeln!(out, "{i},{},{}", fmt_f64(grid.point(i)), fmt_f64(omega[i]));
            }
        }
        None => {
            let _ = writeln!(out, "index,k");
            for i in 0..grid.len() {
                let _ = writeln!(out, "{i},{}", fmt_f64(grid.point(i)));
            }
        }
    }
    out
}

pub fn schmidt_csv(result: &SchmidtResult) -> String {
    let mut out = String::new();
    header(
        &mut out,
        &[
            ("format", "schmidt-coefficients".to_string()),
            ("schmidt_number", fmt_f64(result.schmidt_number)),
            (
                "refined_schmidt_number",
                fmt_f64(result.refined_schmidt_number),
            ),
            ("refinement_delta", fmt_f64(result.refinement_delta)),
            ("converged", result.converged.to_string()),
        ],
    );
    let _ = writeln!(out, "index,coefficient");
    for (i, p) in result.coefficients.iter().enumerate() {
        let _ = writeln!(out, "{i},{}", fmt_f64(*p));
    }
    out
}

/// Two-column aligned table; the value column is right-aligned.
fn aligned_rows(rows: &[(String, String)]) -> String {
    let width = rows.iter().map(|(label, _)| label.len()).max().unwrap_or(0);
    let vwidth = rows.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (label, value) in rows {
        let _ = writeln!(out, "{label:<width$}  {value:>vwidth$}");
    }
    out
}

/// Rates with factor breakdowns as an aligned stdout block.
pub fn rates_table(results: &[&RateResult], extras: &[(String, String)]) -> String {
    let mut rows: Vec<(String, String)> = Vec::new();
    for r in results {
        rows.push((
            format!("{} [{}]", r.kind.label(), r.kind.unit()),
            fmt_f64(r.value),
        ));
        for f in &r.factors {
            rows.push((format!("  .{}", f.name), fmt_f64(f.value)));
        }
    }
    for (k, v) in extras {
        rows.push((k.clone(), v.clone()));
    }
    aligned_rows(&rows)
}

pub fn rates_csv(results: &[&RateResult], extras: &[(String, String)]) -> String {
    let mut out = String::new();
    header(&mut out, &[("format", "rates".to_string())]);
    let _ = writeln!(out, "name,value,unit");
    for r in results {
        let _ = writeln!(out, "{},{},{}", r.kind.label(), fmt_f64(r.value), r.kind.unit());
        for f in &r.factors {
            let _ = writeln!(out, "{}.{},{},", r.kind.label(), f.name, fmt_f64(f.value));
        }
    }
    for (k, v) in extras {
        let _ = writeln!(out, "{k},{v},");
    }
    out
}

pub fn sweep_table(param: SweepParameter, rows: &[SweepRow]) -> String {
    let mut table: Vec<(String, String)> = Vec::new();
    for row in rows {
        let mut cells: Vec<String> = Vec::new();
        cells.push(match row.schmidt_number {
            Some(k) => format!("K = {}", fmt_f64(k)),
            None => "K = -".to_string(),
        });
        if let Some(c) = row.converged {
            cells.push(format!("converged = {c}"));
        }
        if let Some(r) = row.rate_spontaneous {
            cells.push(format!("R_spon = {}", fmt_f64(r)));
        }
        if let Some(r) = row.rate_stimulated {
            cells.push(format!("R_stim = {}", fmt_f64(r)));
        }
        if let Some(e) = &row.error {
            cells.push(format!("error: {e}"));
        }
        table.push((
            format!("{param} = {}", fmt_f64(row.value)),
            cells.join("  "),
        ));
    }
    let mut out = String::new();
    for (label, value) in &table {
        let width = table.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
        let _ = writeln!(out, "{label:<width$}  {value}");
    }
    out
}

pub fn sweep_csv(param: SweepParameter, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    header(
        &mut out,
        &[
            ("format", "sweep".to_string()),
            ("parameter", param.to_string()),
        ],
    );
    let _ = writeln!(
        out,
        "value,schmidt_number,converged,rate_spontaneous,rate_stimulated,error"
    );
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(row.value),
            opt(row.schmidt_number),
            row.converged.map(|c| c.to_string()).unwrap_or_default(),
            opt(row.rate_spontaneous),
            opt(row.rate_stimulated),
            row.error.clone().unwrap_or_default().replace(',', ";"),
        );
    }
    out
}

/// Summary CSV of a seeded scan: one row per seed position.
pub fn scan_summary_csv(scan: &SetScanResult) -> String {
    let mut out = String::new();
    let mut meta: Vec<(&str, String)> = vec![
        ("format", "set-scan-summary".to_string()),
        ("points", scan.seed_points.len().to_string()),
    ];
    if let Some(dk) = scan.seed_spacing {
        meta.push(("seed_spacing", fmt_f64(dk)));
    }
    if let Some(l1) = scan.marginal_l1_distance {
        meta.push(("marginal_l1_distance", fmt_f64(l1)));
    }
    header(&mut out, &meta);
    let _ = writeln!(
        out,
        "index,k_seed,weight,residual,reconstructed_marginal,direct_marginal"
    );
    for (m, k) in scan.seed_points.iter().enumerate() {
        let residual = scan
            .proportionality_residuals
            .as_ref()
            .map(|r| fmt_f64(r[m]))
            .unwrap_or_default();
        let rec = scan
            .reconstructed_seed_marginal
            .as_ref()
            .map(|r| fmt_f64(r[m]))
            .unwrap_or_default();
        let direct = scan
            .direct_seed_marginal
            .as_ref()
            .map(|r| fmt_f64(r[m]))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{m},{},{},{residual},{rec},{direct}",
            fmt_f64(*k),
            fmt_f64(scan.slice_weights[m]),
        );
    }
    out
}

/// Pair-axis marginal of a triplet amplitude as a matrix CSV.
pub fn triphoton_pair_csv(tri: &TriphotonAmplitude) -> String {
    let pair = tri.pair_grid();
    let n = pair.len();
    let dk3 = tri.seed_grid().spacing();
    let mut out = String::new();
    header(
        &mut out,
        &[
            ("format", "triphoton-pair-intensity".to_string()),
            ("rows", n.to_string()),
            ("cols", n.to_string()),
            ("k_min", fmt_f64(pair.k_min())),
            ("k_max", fmt_f64(pair.k_max())),
            ("spacing", fmt_f64(pair.spacing())),
            ("norm_residual", fmt_f64(tri.norm_residual())),
        ],
    );
    for i in 0..n {
        let row: Vec<String> = (0..n)
            .map(|j| {
                let sum: f64 = (0..tri.seed_grid().len())
                    .map(|m| tri.value(i, j, m).norm_sqr())
                    .sum();
                fmt_f64(sum * dk3)
            })
            .collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn triphoton_seed_csv(tri: &TriphotonAmplitude) -> String {
    let seed = tri.seed_grid();
    let marginal = tri.seed_marginal();
    let mut out = String::new();
    header(
        &mut out,
        &[
            ("format", "triphoton-seed-marginal".to_string()),
            ("points", seed.len().to_string()),
        ],
    );
    let _ = writeln!(out, "index,k,marginal");
    for (m, v) in marginal.iter().enumerate() {
        let _ = writeln!(out, "{m},{},{}", fmt_f64(seed.point(m)), fmt_f64(*v));
    }
    out
}

/// Quoted reference estimates the reconciliation compares against:
/// a triplet-rate coefficient of 0.19 1/(s W), a stimulated coefficient of
/// 1.5e8 1/(s W^2), and 1.5e5 pairs/s at 0.1 W pump with 0.01 W seed.
const QUOTED_TRIPLET_COEFFICIENT: f64 = 0.19;
const QUOTED_STIMULATED_COEFFICIENT: f64 = 1.5e8;

/// Degenerate-scheme view of the configuration: modes F and T, mapped from
/// G and P when they are not configured directly.
fn degenerate_view(cfg: &ResolvedConfig) -> Result<(RingResonator, Vec<String>)> {
    let mut notes = Vec::new();
    let f = match cfg.ring.try_mode(ModeRole::F) {
        Some(f) => *f,
        None => {
            let mut f = *cfg.ring.mode(ModeRole::G).map_err(|_| {
                Error::schema(
                    "reconciliation needs mode F, or mode G to map its parameters from"
                        .to_string(),
                )
            })?;
            f.role = ModeRole::F;
            notes.push("mode F not configured; using mode G parameters".to_string());
            f
        }
    };
    let t = match cfg.ring.try_mode(ModeRole::T) {
        Some(t) => *t,
        None => {
            let mut t = *cfg.ring.mode(ModeRole::P).map_err(|_| {
                Error::schema(
                    "reconciliation needs mode T, or mode P to map its parameters from"
                        .to_string(),
                )
            })?;
            t.role = ModeRole::T;
            notes.push("mode T not configured; using mode P parameters".to_string());
            t
        }
    };
    Ok((
        RingResonator::new(cfg.ring.length(), cfg.ring.nonlinearity().copied(), [f, t])?,
        notes,
    ))
}

fn nondegenerate_view(cfg: &ResolvedConfig) -> Result<(RingResonator, Vec<String>)> {
    let mut notes = Vec::new();
    let mut take = |role: ModeRole, fallback: ModeRole| -> Result<ResonatorMode> {
        match cfg.ring.try_mode(role) {
            Some(m) => Ok(*m),
            None => {
                let mut m = *cfg.ring.mode(fallback).map_err(|_| {
                    Error::schema(format!(
                        "reconciliation needs mode {role}, or mode {fallback} to map its \
                         parameters from"
                    ))
                })?;
                m.role = role;
                notes.push(format!(
                    "mode {role} not configured; using mode {fallback} parameters"
                ));
                Ok(m)
            }
        }
    };
    let g = take(ModeRole::G, ModeRole::F)?;
    let s = take(ModeRole::S, ModeRole::F)?;
    let p = take(ModeRole::P, ModeRole::T)?;
    Ok((
        RingResonator::new(cfg.ring.length(), cfg.ring.nonlinearity().copied(), [g, s, p])?,
        notes,
    ))
}

/// Compare the computed rate coefficients against the quoted reference
/// estimates. Informational: conventions for the overall prefactors
/// differ between derivations, so no pass or fail is attached.
pub fn reconciliation_report(cfg: &ResolvedConfig) -> Result<String> {
    let (deg_ring, deg_notes) = degenerate_view(cfg)?;
    let (nondeg_ring, nondeg_notes) = nondegenerate_view(cfg)?;

    let deg_unit =
        ProcessConfig::new(Scheme::Degenerate, deg_ring.clone(), cfg.lambda_nl, 1.0, None)?;
    let triplet_coefficient = rate_spontaneous_degenerate(&deg_unit)?.value;

    let stim_unit = ProcessConfig::new(
        Scheme::NonDegenerate,
        nondeg_ring.clone(),
        cfg.lambda_nl,
        1.0,
        Some(1.0),
    )?;
    let stimulated_coefficient = rate_stimulated(&stim_unit)?.value;

    let mut out = String::new();
    let _ = writeln!(out, "reconciliation against quoted reference estimates");
    let _ = writeln!(out, "assumptions:");
    let f = deg_ring.mode(ModeRole::F)?;
    let g = nondeg_ring.mode(ModeRole::G)?;
    let _ = writeln!(
        out,
        "  - operating wavelengths from the configuration: F at {:.1} nm, G at {:.1} nm",
        f.wavelength() * 1e9,
        g.wavelength() * 1e9
    );
    let _ = writeln!(
        out,
        "  - nonlinear coupling rate Lambda = {} 1/s from the configuration",
        fmt_f64(cfg.lambda_nl)
    );
    let _ = writeln!(
        out,
        "  - escape efficiencies from the configuration (F: {}, G: {})",
        fmt_f64(f.escape_efficiency()),
        fmt_f64(g.escape_efficiency())
    );
    for note in deg_notes.iter().chain(&nondeg_notes) {
        let _ = writeln!(out, "  - {note}");
    }
    let _ = writeln!(out, "comparison:");
    let _ = writeln!(
        out,
        "  triplet coefficient:    computed {} 1/(s W), quoted 0.19 1/(s W), \
         ratio computed/quoted = {}",
        fmt_f64(triplet_coefficient),
        fmt_f64(triplet_coefficient / QUOTED_TRIPLET_COEFFICIENT)
    );
    let _ = writeln!(
        out,
        "  stimulated coefficient: computed {} 1/(s W^2), quoted 1.5e8 1/(s W^2), \
         ratio computed/quoted = {}",
        fmt_f64(stimulated_coefficient),
        fmt_f64(stimulated_coefficient / QUOTED_STIMULATED_COEFFICIENT)
    );
    let quoted_pairs = QUOTED_STIMULATED_COEFFICIENT * cfg.p_pump * cfg.p_seed.unwrap_or(0.0);
    let _ = writeln!(
        out,
        "  quoted-coefficient pair rate at the configured powers: 1.5e8 * {} * {} = {} 1/s \
         (quoted 1.5e5 1/s at 0.1 W pump, 0.01 W seed)",
        fmt_f64(cfg.p_pump),
        fmt_f64(cfg.p_seed.unwrap_or(0.0)),
        fmt_f64(quoted_pairs)
    );
    let _ = writeln!(
        out,
        "note: overall prefactor conventions differ between derivations; this comparison is \
         informational and carries no pass/fail."
    );
    Ok(out)
}

/// Stdout block for the rates command.
pub fn rates_summary(cfg: &ResolvedConfig) -> Result<(String, Vec<RateResult>)> {
    let process = cfg.process_config()?;
    let mut results: Vec<RateResult> = Vec::new();
    let mut extras: Vec<(String, String)> = Vec::new();
    match cfg.scheme {
        Scheme::Degenerate => {
            results.push(rate_spontaneous_degenerate(&process)?);
        }
        Scheme::NonDegenerate => {
            results.push(rate_spontaneous_nondegenerate(&process)?);
            let g = cfg.ring.mode(ModeRole::G)?;
            let s = cfg.ring.mode(ModeRole::S)?;
            let p_vac = vacuum_power(g, s);
            extras.push(("vacuum_power [W]".to_string(), fmt_f64(p_vac)));
            if let Some(p_seed) = cfg.p_seed {
                results.push(rate_stimulated(&process)?);
                extras.push((
                    "stimulation_enhancement".to_string(),
                    fmt_f64(p_seed / p_vac),
                ));
            }
        }
    }
    let refs: Vec<&RateResult> = results.iter().collect();
    let table = rates_table(&refs, &extras);
    Ok((table, results))
}

/// File name for one scan slice.
pub fn slice_name(index: usize) -> String {
    format!("slice_{index:03}.csv")
}

/// Check whether a path exists under the prefix; used by callers that
/// refuse to clobber unrelated files. Currently output files are always
/// overwritten, matching deterministic re-runs.
pub fn prefixed(prefix: &str, name: &str) -> PathBuf {
    Path::new(&format!("{prefix}{name}")).to_path_buf()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis;
    use crate::config::ResolvedConfig;
    use crate::physics::ModeRole;
    use crate::wavefunction::PumpEnvelope;

    fn cfg() -> ResolvedConfig {
        ResolvedConfig::parse_str(crate::config::tests::BASE).unwrap()
    }

    fn sample_jsi() -> JsiMatrix {
        let cfg = cfg();
        let ring = cfg.ring.clone();
        let p = ring.mode(ModeRole::P).unwrap();
        let source = crate::wavefunction::PairSource::new(
            ring.clone(),
            PumpEnvelope::gaussian(p.k_res, 1e-11).unwrap(),
        )
        .unwrap();
        let s = ring.mode(ModeRole::S).unwrap();
        let grid = source.default_pair_grid(12.0, 21).unwrap();
        let amp = source.biphoton(s.k_res, &grid).unwrap();
        analysis::jsi(&amp)
    }

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.1, 1.5e8, 150000.0, 6.2, 1.0 / 3.0, 1.2153e15] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(150000.0), "150000");
    }

    #[test]
    fn jsi_csv_shape_and_header() {
        let jsi = sample_jsi();
        let text = jsi_csv(&jsi, &[("norm_residual", "0".to_string())]);
        let header_lines = text.lines().filter(|l| l.starts_with("# ")).count();
        assert!(header_lines >= 7);
        let data_rows = text.lines().filter(|l| !l.starts_with('#')).count();
        assert_eq!(data_rows, 21);
        assert!(text.contains("# format: jsi-matrix"));
        let first_row = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(first_row.split(',').count(), 21);
    }

    #[test]
    fn axes_csv_has_omega_column_for_ring_spectra() {
        let jsi = sample_jsi();
        let text = axes_csv(&jsi);
        assert!(text.contains("index,k,omega"));
        assert_eq!(
            text.lines().filter(|l| !l.starts_with('#') && !l.starts_with("index")).count(),
            21
        );
    }

    #[test]
    fn reconciliation_report_quotes_reference_values() {
        let report = reconciliation_report(&cfg()).unwrap();
        for needle in [
            "0.19",
            "1.5e8",
            "1.5e5",
            "computed",
            "quoted",
            "ratio",
            "assumptions:",
            "150000",
        ] {
            assert!(report.contains(needle), "missing {needle:?} in:\n{report}");
        }
    }

    #[test]
    fn reconciliation_quoted_product_is_exact() {
        let c = cfg();
        let product = 1.5e8 * c.p_pump * c.p_seed.unwrap();
        assert_eq!(product, 150000.0);
        let report = reconciliation_report(&c).unwrap();
        assert!(report.contains("= 150000 1/s"));
    }

    #[test]
    fn rates_summary_lists_factors_and_vacuum_power() {
        let (table, results) = rates_summary(&cfg()).unwrap();
        assert!(table.contains("spontaneous_nondegenerate"));
        assert!(table.contains("stimulated"));
        assert!(table.contains(".prefactor"));
        assert!(table.contains("vacuum_power"));
        assert!(table.contains("stimulation_enhancement"));
        assert_eq!(results.len(), 2);
    }

    #[test]
    fn sweep_csv_escapes_commas_in_errors() {
        let rows = vec![SweepRow {
            value: 1.0,
            schmidt_number: None,
            converged: None,
            rate_spontaneous: None,
            rate_stimulated: None,
            error: Some("bad, very bad".to_string()),
        }];
        let text = sweep_csv(SweepParameter::KSeed, &rows);
        assert!(text.contains("bad; very bad"));
        let data = text
            .lines()
            .find(|l| !l.starts_with('#') && !l.starts_with("value"))
            .unwrap();
        assert_eq!(data.split(',').count(), 6);
    }

    #[test]
    fn write_text_creates_parent_directories() {
        let dir = tempfile::tempdir().unwrap();
        let prefix = format!("{}/nested/run_", dir.path().display());
        let path = write_text(&prefix, "x.csv", "hello\n").unwrap();
        assert!(path.exists());
        assert_eq!(std::fs::read_to_string(path).unwrap(), "hello\n");
    }
}
