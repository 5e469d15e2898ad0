//! Execute a resolved manifest and write its outputs.

use std::path::PathBuf;

use num_complex::Complex64;

use super::config::{ExperimentKind, RunManifest};
use super::mask::ingest_mask;
use super::output::{header_lines, write_csv, write_pgm, write_summary};
use crate::analysis::{find_peaks, fit_finesse, search_period, white_light_summary, SearchPeriod};
use crate::engine::{run_scan, Cavity};
use crate::error::{Error, Result};
use crate::series::{Series, Trajectory};
use crate::twomode::{self, RoundTripMap, TwoModeState};

/// Files written by a run and the key results reported in its summary.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<(String, String)>,
}

fn kv(k: &str, v: impl std::fmt::Display) -> (String, String) {
    (k.to_string(), v.to_string())
}

pub fn run(manifest: &RunManifest) -> Result<RunOutcome> {
    match manifest.kind {
        ExperimentKind::Pulse | ExperimentKind::Mask => run_pulse(manifest),
        ExperimentKind::Scan => run_scan_verb(manifest),
        ExperimentKind::Twomode => run_twomode(manifest),
    }
}

fn finish(manifest: &RunManifest, mut files: Vec<PathBuf>, summary: Vec<(String, String)>) -> Result<RunOutcome> {
    let path = manifest.output.join("summary.txt");
    write_summary(&path, &header_lines(manifest), &summary)?;
    files.push(path);
    Ok(RunOutcome { files, summary })
}

fn trajectory_summary(cavity: &Cavity, tr: &Trajectory, out: &mut Vec<(String, String)>) -> Result<()> {
    let s = &tr.series;
    if let Some(chi) = cavity.chi() {
        out.push(kv("chi_measured", format!("{chi:.6}")));
    }
    out.push(kv("oracle_regions", cavity.regions.len()));
    for (k, d) in cavity.regions.iter().enumerate() {
        out.push(kv(
            &format!("region_{}", k + 1),
            format!("center = ({:.4e}, {:.4e}) m, radius = {:.4e} m", d.center[0], d.center[1], d.radius),
        ));
    }
    let init = &tr.initial;
    let cols = &s.columns;
    let pos = |name: &str| cols.iter().position(|c| c == name);
    if let Some(i) = pos("solution_power") {
        out.push(kv("initial_solution_power", format!("{:.6e}", init[i])));
    }
    let sol = s.column("solution_power")?;
    let tau = s.sweep();
    let k = crate::analysis::argmax(&sol);
    out.push(kv("max_solution_power", format!("{:.6e}", sol[k])));
    out.push(kv("max_solution_round_trip", tau[k]));
    if cavity.solution.is_some() {
        let rho = s.column("rho11")?;
        let kr = crate::analysis::argmax(&rho);
        out.push(kv("max_rho11", format!("{:.6}", rho[kr])));
        out.push(kv("max_rho11_round_trip", tau[kr]));
        match search_period(s) {
            Ok(SearchPeriod::Lossless { period, fit }) => {
                out.push(kv("search_period", format!("{period:.4}")));
                out.push(kv("rabi_theta", format!("{:.6}", fit.theta)));
                out.push(kv("rabi_phase", format!("{:.6}", fit.phase)));
            }
            Ok(SearchPeriod::Lossy { peak_round_trip, .. }) => {
                out.push(kv("search_peak_round_trip", peak_round_trip));
            }
            Err(e) => out.push(kv("search_period", format!("unavailable ({e})"))),
        }
    }
    Ok(())
}

fn run_pulse(manifest: &RunManifest) -> Result<RunOutcome> {
    let raster = if manifest.kind == ExperimentKind::Mask {
        let o = manifest.config.oracle.as_ref().expect("resolved");
        let path = o.mask.as_ref().expect("resolved mask path");
        Some(ingest_mask(
            path,
            &manifest.grid()?,
            o.phase_min.unwrap_or(0.0),
            o.phase_max.unwrap_or(std::f64::consts::FRAC_PI_2),
            o.passes.unwrap_or(2),
            o.resample.unwrap_or(false),
        )?)
    } else {
        None
    };
    let cfg = manifest.pulsed_config_with(raster)?;
    cfg.validate()?;
    let cavity = Cavity::new(&cfg.cavity)?;
    let tr = crate::engine::run_pulsed_on(&cavity, &cfg)?;
    let header = header_lines(manifest);
    let mut files = Vec::new();
    let path = manifest.output.join("trajectory.csv");
    write_csv(&path, &header, &tr.series)?;
    files.push(path);
    for snap in &tr.snapshots {
        let path = manifest.output.join("snapshots").join(format!("{}.pgm", snap.label));
        write_pgm(&path, &header, &snap.intensity)?;
        files.push(path);
    }
    let mut summary = vec![kv("kind", manifest.kind.name()), kv("round_trips", tr.series.len())];
    trajectory_summary(&cavity, &tr, &mut summary)?;
    finish(manifest, files, summary)
}

fn run_scan_verb(manifest: &RunManifest) -> Result<RunOutcome> {
    let cfg = manifest.scan_config()?;
    let spec = run_scan(&cfg)?;
    let header = header_lines(manifest);
    let mut files = Vec::new();
    let path = manifest.output.join("spectrum.csv");
    write_csv(&path, &header, &spec.series)?;
    files.push(path);
    for snap in &spec.snapshots {
        let path = manifest.output.join("snapshots").join(format!("{}.pgm", snap.label));
        write_pgm(&path, &header, &snap.intensity)?;
        files.push(path);
    }
    let mut summary = vec![kv("kind", "scan"), kv("samples", spec.series.len())];
    let peaks = find_peaks(&spec.series, "transmitted_power", 0.5)?;
    summary.push(kv("transmission_peaks", peaks.peaks.len()));
    for (k, p) in peaks.peaks.iter().enumerate() {
        summary.push(kv(
            &format!("peak_{}", k + 1),
            format!(
                "alpha = {:.6}, power = {:.6e}, fwhm = {}",
                p.location,
                p.height,
                p.fwhm.map(|w| format!("{w:.6}")).unwrap_or_else(|| "unresolved".into())
            ),
        ));
    }
    if let Some((a, b)) = peaks.top_two() {
        summary.push(kv("doublet_splitting", format!("{:.6}", b.location - a.location)));
    }
    match fit_finesse(&peaks) {
        Ok(f) => summary.push(kv("finesse_measured", format!("{f:.4}"))),
        Err(_) => summary.push(kv("finesse_measured", "unresolved")),
    }
    for p in &cfg.probes {
        let col = spec.series.column(&format!("probe_{}", p.name))?;
        let m = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        summary.push(kv(&format!("probe_{}_max", p.name), format!("{m:.6e}")));
    }
    if cfg.probes.len() >= 2 {
        let (a, b) = (&cfg.probes[0].name, &cfg.probes[1].name);
        let ca = spec.series.column(&format!("probe_{a}"))?;
        let cb = spec.series.column(&format!("probe_{b}"))?;
        let ma = ca.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mb = cb.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        summary.push(kv(&format!("probe_ratio_{a}_{b}"), format!("{:.4}", ma / mb)));
        if let Ok(w) = white_light_summary(&spec.series, &format!("probe_{a}"), &format!("probe_{b}")) {
            summary.push(kv("white_light_enhancement", format!("{:.4}", w.integrated_enhancement)));
            summary.push(kv("resonant_enhancement", format!("{:.4}", w.resonant_enhancement)));
            summary.push(kv("white_light_ratio", format!("{:.4}", w.ratio)));
        }
    }
    let worst = spec.series.column("residual")?.into_iter().fold(0.0, f64::max);
    summary.push(kv("max_residual", format!("{worst:.3e}")));
    let verified = spec.verified.iter().map(|v| v.1).fold(0.0, f64::max);
    summary.push(kv("full_field_checks", spec.verified.len()));
    summary.push(kv("max_full_field_residual", format!("{verified:.3e}")));
    finish(manifest, files, summary)
}

fn run_twomode(manifest: &RunManifest) -> Result<RunOutcome> {
    let p = manifest.twomode_params()?;
    let t = manifest.config.twomode.as_ref().expect("resolved");
    let (start, stop, step) = (
        t.alpha_start.unwrap_or(-std::f64::consts::PI),
        t.alpha_stop.unwrap_or(std::f64::consts::PI),
        t.alpha_step.unwrap_or(1e-3),
    );
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    let eta2 = p.excess_amplitude * p.excess_amplitude;
    let mut spec = Series::new([
        "alpha",
        "a0_re",
        "a0_im",
        "a1_re",
        "a1_im",
        "circulating_power",
        "transmitted_power",
        "rho11",
        "contrast",
    ]);
    for k in 0..count {
        let alpha = start + k as f64 * step;
        let s = twomode::steady_state(&p.at_alpha(alpha))?;
        spec.push(vec![
            alpha,
            s.a0.re,
            s.a0.im,
            s.a1.re,
            s.a1.im,
            s.total_power(),
            p.t * p.t * eta2 * s.total_power(),
            s.solution_fraction(),
            twomode::solution_contrast(&s, p.chi),
        ]);
    }
    let rounds = t.round_trips.unwrap_or(40);
    let mut rabi = Series::new(["tau", "rho11_map", "rho11_second_order", "rho11_exact"]);
    let mut st = TwoModeState {
        a0: Complex64::new(1.0, 0.0),
        a1: Complex64::new(0.0, 0.0),
    };
    for tau in 1..=rounds {
        st = twomode::evolve(st, p.chi, p.map, 1);
        rabi.push(vec![
            tau as f64,
            st.populations().1,
            twomode::rabi_populations(p.chi, tau as f64).1,
            twomode::rabi_populations_exact(p.chi, tau as f64).1,
        ]);
    }
    let header = header_lines(manifest);
    let mut files = Vec::new();
    for (name, s) in [("spectrum.csv", &spec), ("rabi.csv", &rabi)] {
        let path = manifest.output.join(name);
        write_csv(&path, &header, s)?;
        files.push(path);
    }
    let mut summary = vec![
        kv("kind", "twomode"),
        kv("chi", p.chi),
        kv("t", p.t),
        kv("finesse", format!("{:.4}", p.finesse())),
        kv("doublet_splitting_analytic", format!("{:.6}", twomode::doublet_splitting(p.chi))),
        kv("resolution_finesse", format!("{:.4}", twomode::resolution_finesse(p.chi))),
        kv(
            "map",
            match p.map {
                RoundTripMap::SecondOrder => "second-order",
                RoundTripMap::ExactRotation => "exact-rotation",
            },
        ),
    ];
    let peaks = find_peaks(&spec, "circulating_power", 0.5)?;
    summary.push(kv("peaks", peaks.peaks.len()));
    if let Some((a, b)) = peaks.top_two() {
        summary.push(kv("doublet_splitting_measured", format!("{:.6}", b.location - a.location)));
        let rho = spec.column("rho11")?;
        summary.push(kv(
            "solution_fraction_at_peaks",
            format!("{:.4}, {:.4}", rho[a.index], rho[b.index]),
        ));
    }
    let on = twomode::steady_state(&p.at_alpha(twomode::resonance_positions(p.chi, p.map)[1]))
        .map_err(|e| Error::Analysis(e.to_string()))?;
    summary.push(kv("contrast_at_resonance", format!("{:.4}", twomode::solution_contrast(&on, p.chi))));
    finish(manifest, files, summary)
}
