//! TOML experiment configuration and the resolved run manifest.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::engine::{CavityConfig, InputBeam, InputKind, Probe, PulsedRunConfig, ScanRunConfig, SolverBackend, StartState};
use crate::error::{Error, Result};
use crate::field::{BeamParams, GridSpec, Plane};
use crate::optics::{LossModel, PlateSpec, Spot};
use crate::twomode::{RoundTripMap, TwoModeParams};

pub const DEFAULT_N: usize = 2048;
pub const DEFAULT_WAVELENGTH: f64 = 656e-9;
pub const DEFAULT_FOCAL_LENGTH: f64 = 0.34;
pub const DEFAULT_CHANNELS: f64 = 400.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Pulse,
    Scan,
    Twomode,
    Mask,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Pulse => "pulse",
            ExperimentKind::Scan => "scan",
            ExperimentKind::Twomode => "twomode",
            ExperimentKind::Mask => "mask",
        }
    }
}

/// Image-plane pitch: a length in metres or `"auto"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Pitch {
    Value(f64),
    Keyword(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dx: Option<Pitch>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub focal_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spot_radius: Option<f64>,
    /// Alternative to `spot_radius`: number of channels `N`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<InputKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waist: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpotEntry {
    pub x: f64,
    pub y: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    /// Retardance per pass of every spot that does not set its own.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passes: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spots: Option<Vec<SpotEntry>>,
    /// Raster oracle (PGM or delimited numeric grid).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resample: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FocusSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passes: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reflectivity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub round_trips: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<StartState>,
    /// Image every this many round trips (pulse) or at resonance if > 0 (scan).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_stop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relaxation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify_stride: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<SolverBackend>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<Probe>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoModeSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<RoundTripMap>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_stop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub round_trips: Option<usize>,
}

/// Configuration as written by the user; every field optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beam: Option<BeamSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub focus: Option<FocusSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub twomode: Option<TwoModeSection>,
}

/// Fully resolved experiment: every default materialised and validated.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub kind: ExperimentKind,
    pub output: PathBuf,
    /// Resolved configuration; serialising it reproduces the manifest.
    pub config: Config,
    /// Deterministic by construction: no random state anywhere in a run.
    pub deterministic: bool,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parse configuration text without resolving defaults.
pub fn parse_raw(text: &str) -> Result<Config> {
    toml::from_str(text).map_err(|e| Error::Syntax {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })
}

/// Parse and resolve a configuration into a run manifest.
pub fn parse_config(text: &str) -> Result<RunManifest> {
    RunManifest::resolve(parse_raw(text)?)
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::config(name, format!("must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(name, "must be finite"))
    }
}

impl RunManifest {
    /// Fill in defaults for the experiment kind and validate everything.
    pub fn resolve(raw: Config) -> Result<Self> {
        let kind = raw.kind.unwrap_or(ExperimentKind::Pulse);
        let output = raw.output.clone().unwrap_or_else(|| PathBuf::from("out"));
        let mut cfg = Config {
            kind: Some(kind),
            output: Some(output.clone()),
            ..Config::default()
        };
        if kind == ExperimentKind::Twomode {
            cfg.twomode = Some(resolve_twomode(raw.twomode.unwrap_or_default())?);
        } else {
            let (_, beam, gs, bs) = resolve_optics(raw.grid.unwrap_or_default(), raw.beam.unwrap_or_default())?;
            cfg.grid = Some(gs);
            cfg.beam = Some(bs);
            cfg.oracle = Some(resolve_oracle(raw.oracle.unwrap_or_default(), &beam, kind)?);
            cfg.focus = Some(resolve_focus(raw.focus.unwrap_or_default(), &beam)?);
            let ls = raw.loss.unwrap_or_default();
            let default_r = if kind == ExperimentKind::Scan { 0.9 } else { 1.0 };
            let loss = LossModel::new(ls.reflectivity.unwrap_or(default_r), ls.excess.unwrap_or(0.0))?;
            cfg.loss = Some(LossSection {
                reflectivity: Some(loss.reflectivity),
                excess: Some(loss.excess),
            });
            cfg.run = Some(resolve_run(raw.run.unwrap_or_default(), kind, &loss)?);
        }
        let m = RunManifest {
            kind,
            output,
            config: cfg,
            deterministic: true,
        };
        // Build the engine configs once so every invariant is checked here.
        match kind {
            ExperimentKind::Twomode => {
                m.twomode_params()?;
            }
            ExperimentKind::Scan => {
                m.scan_config()?.validate()?;
            }
            ExperimentKind::Pulse => {
                m.pulsed_config()?.validate()?;
            }
            // The raster is read at run time; the analytic part is checked now.
            ExperimentKind::Mask => {
                m.cavity_config_with(None)?;
            }
        }
        Ok(m)
    }

    /// Canonical TOML text of the resolved manifest.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.config).expect("manifest serialises")
    }

    pub fn beam(&self) -> Result<BeamParams> {
        let b = self.config.beam.as_ref().ok_or_else(|| Error::config("beam", "missing"))?;
        BeamParams::new(
            b.wavelength.unwrap_or_default(),
            b.focal_length.unwrap_or_default(),
            b.spot_radius.unwrap_or_default(),
        )
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let g = self.config.grid.as_ref().ok_or_else(|| Error::config("grid", "missing"))?;
        match g.dx {
            Some(Pitch::Value(dx)) => GridSpec::new(g.n.unwrap_or(DEFAULT_N), dx),
            _ => Err(Error::config("grid.dx", "unresolved pitch")),
        }
    }

    /// Derived quantities echoed next to the manifest in every output header.
    pub fn derived(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if let (Ok(beam), Ok(grid)) = (self.beam(), self.grid()) {
            out.push(("channels".into(), format!("{:.4}", beam.channels())));
            out.push(("chi_nominal".into(), format!("{:.6}", beam.chi())));
            out.push(("dark_ring_radius".into(), format!("{:.6e}", beam.dark_ring_radius())));
            out.push(("focal_dx".into(), format!("{:.6e}", grid.conjugate(&beam).dx())));
            out.push(("spot_px_image".into(), format!("{:.4}", beam.spot_radius / grid.dx())));
            out.push((
                "spot_px_focal".into(),
                format!("{:.4}", beam.spot_radius / grid.conjugate(&beam).dx()),
            ));
        }
        if let Some(l) = &self.config.loss {
            if let Ok(m) = LossModel::new(l.reflectivity.unwrap_or(1.0), l.excess.unwrap_or(0.0)) {
                if m.round_trip_amplitude() < 1.0 {
                    out.push(("round_trip_amplitude".into(), format!("{:.6}", m.round_trip_amplitude())));
                    out.push(("finesse".into(), format!("{:.4}", m.finesse())));
                }
            }
        }
        if let Ok(p) = self.twomode_params() {
            out.push(("round_trip_amplitude".into(), format!("{:.6}", p.round_trip_amplitude())));
            out.push(("finesse".into(), format!("{:.4}", p.finesse())));
        }
        out
    }

    /// Cavity with an optional raster oracle replacing the analytic spots.
    pub fn cavity_config_with(&self, raster: Option<PlateSpec>) -> Result<CavityConfig> {
        let beam = self.beam()?;
        let grid = self.grid()?;
        let b = self.config.beam.as_ref().expect("resolved");
        let input = match b.input.unwrap_or(InputKind::BandLimitedAiry) {
            InputKind::Airy => InputBeam::Airy,
            InputKind::BandLimitedAiry => InputBeam::BandLimitedAiry,
            InputKind::Gaussian => InputBeam::Gaussian {
                waist: b.waist.ok_or_else(|| Error::config("beam.waist", "required for a gaussian input"))?,
            },
        };
        let o = self.config.oracle.as_ref().expect("resolved");
        let passes = o.passes.unwrap_or(2);
        let oracle = match raster {
            Some(p) => p,
            None => PlateSpec::with_spots(
                Plane::Image,
                o.spots
                    .iter()
                    .flatten()
                    .map(|s| Spot {
                        center: [s.x, s.y],
                        radius: s.radius.unwrap_or(beam.spot_radius),
                        phase: s.phase.unwrap_or(PI / 2.0),
                    })
                    .collect(),
                passes,
            )?,
        };
        let f = self.config.focus.as_ref().expect("resolved");
        let focus = if f.enabled.unwrap_or(true) {
            PlateSpec::with_spots(
                Plane::Focal,
                vec![Spot {
                    center: [f.x.unwrap_or(0.0), f.y.unwrap_or(0.0)],
                    radius: f.radius.unwrap_or(beam.spot_radius),
                    phase: f.phase.unwrap_or(PI / 2.0),
                }],
                f.passes.unwrap_or(2),
            )?
        } else {
            PlateSpec::empty(Plane::Focal)
        };
        let l = self.config.loss.as_ref().expect("resolved");
        let loss = LossModel::new(l.reflectivity.unwrap_or(1.0), l.excess.unwrap_or(0.0))?;
        let cfg = CavityConfig {
            beam,
            grid,
            input,
            oracle,
            focus,
            loss,
        };
        cfg.validate()?;
        // Spots must sit inside the central region of the grid.
        for s in &cfg.oracle.spots {
            crate::field::make_spot_mode(&grid, s.radius, s.center)?;
        }
        Ok(cfg)
    }

    pub fn pulsed_config(&self) -> Result<PulsedRunConfig> {
        self.pulsed_config_with(None)
    }

    pub fn pulsed_config_with(&self, raster: Option<PlateSpec>) -> Result<PulsedRunConfig> {
        let r = self.config.run.as_ref().ok_or_else(|| Error::config("run", "missing"))?;
        Ok(PulsedRunConfig {
            cavity: self.cavity_config_with(raster)?,
            round_trips: r.round_trips.unwrap_or(40),
            stride: r.stride.unwrap_or(1),
            start: r.start.unwrap_or_default(),
            snapshot_stride: r.snapshots.unwrap_or(0),
        })
    }

    pub fn scan_config(&self) -> Result<ScanRunConfig> {
        let r = self.config.run.as_ref().ok_or_else(|| Error::config("run", "missing"))?;
        let mut s = ScanRunConfig::new(
            self.cavity_config_with(None)?,
            r.alpha_start.unwrap_or(0.0),
            r.alpha_stop.unwrap_or(2.0 * PI),
            r.alpha_step.unwrap_or(0.01),
        );
        s.tolerance = r.tolerance.unwrap_or(1e-10);
        s.relaxation = r.relaxation.unwrap_or(0.7);
        s.max_iterations = r.max_iterations;
        s.verify_stride = r.verify_stride.unwrap_or(0);
        s.backend = r.backend.unwrap_or_default();
        s.probes = r.probes.clone().unwrap_or_default();
        s.snapshot = r.snapshots.unwrap_or(0) > 0;
        Ok(s)
    }

    pub fn twomode_params(&self) -> Result<TwoModeParams> {
        let t = self.config.twomode.as_ref().ok_or_else(|| Error::config("twomode", "missing"))?;
        TwoModeParams::new(t.chi.unwrap_or(0.05), t.t.unwrap_or(0.15), 0.0)?
            .with_excess_loss(t.excess.unwrap_or(0.0))
            .map(|p| p.with_map(t.map.unwrap_or_default()))
    }
}

fn resolve_optics(g: GridSection, b: BeamSection) -> Result<(GridSpec, BeamParams, GridSection, BeamSection)> {
    let wavelength = positive("beam.wavelength", b.wavelength.unwrap_or(DEFAULT_WAVELENGTH))?;
    let focal_length = positive("beam.focal_length", b.focal_length.unwrap_or(DEFAULT_FOCAL_LENGTH))?;
    let beam = match (b.spot_radius, b.channels) {
        (Some(_), Some(_)) => {
            return Err(Error::config("beam.channels", "give either spot_radius or channels, not both"))
        }
        (Some(r), None) => BeamParams::new(wavelength, focal_length, positive("beam.spot_radius", r)?)?,
        (None, c) => BeamParams::from_channels(wavelength, focal_length, c.unwrap_or(DEFAULT_CHANNELS))?,
    };
    let n = g.n.unwrap_or(DEFAULT_N);
    let grid = match &g.dx {
        None => GridSpec::auto(&beam, n)?,
        Some(Pitch::Keyword(k)) if k == "auto" => GridSpec::auto(&beam, n)?,
        Some(Pitch::Keyword(k)) => {
            return Err(Error::config("grid.dx", format!("expected a length or \"auto\", got \"{k}\"")))
        }
        Some(Pitch::Value(dx)) => GridSpec::new(n, *dx)?,
    };
    grid.check_sampling(&beam)?;
    let input = b.input.unwrap_or(InputKind::BandLimitedAiry);
    let waist = match input {
        InputKind::Gaussian => Some(positive(
            "beam.waist",
            b.waist.ok_or_else(|| Error::config("beam.waist", "required for a gaussian input"))?,
        )?),
        _ => {
            if b.waist.is_some() {
                return Err(Error::config("beam.waist", "only meaningful for a gaussian input"));
            }
            None
        }
    };
    Ok((
        grid,
        beam,
        GridSection {
            n: Some(n),
            dx: Some(Pitch::Value(grid.dx())),
        },
        BeamSection {
            wavelength: Some(wavelength),
            focal_length: Some(focal_length),
            spot_radius: Some(beam.spot_radius),
            channels: None,
            input: Some(input),
            waist,
        },
    ))
}

fn resolve_oracle(o: OracleSection, beam: &BeamParams, kind: ExperimentKind) -> Result<OracleSection> {
    let phase = finite("oracle.phase", o.phase.unwrap_or(PI / 2.0))?;
    let passes = o.passes.unwrap_or(2);
    if passes == 0 {
        return Err(Error::config("oracle.passes", "must be at least 1"));
    }
    if kind == ExperimentKind::Mask {
        if o.spots.is_some() {
            return Err(Error::config("oracle.spots", "a mask run takes its oracle from oracle.mask"));
        }
        let mask = o.mask.ok_or_else(|| Error::config("oracle.mask", "required for a mask run"))?;
        let lo = finite("oracle.phase_min", o.phase_min.unwrap_or(0.0))?;
        let hi = finite("oracle.phase_max", o.phase_max.unwrap_or(PI / 2.0))?;
        for (name, v) in [("oracle.phase_min", lo), ("oracle.phase_max", hi)] {
            if !(v > -PI && v <= PI) {
                return Err(Error::config(name, format!("phase {v} is outside (-pi, pi]")));
            }
        }
        return Ok(OracleSection {
            phase: None,
            passes: Some(passes),
            spots: None,
            mask: Some(mask),
            phase_min: Some(lo),
            phase_max: Some(hi),
            resample: Some(o.resample.unwrap_or(false)),
        });
    }
    if o.mask.is_some() || o.phase_min.is_some() || o.phase_max.is_some() || o.resample.is_some() {
        return Err(Error::config("oracle.mask", "raster masks are only used by the mask verb"));
    }
    let spots = o
        .spots
        .unwrap_or_else(|| vec![SpotEntry { x: 0.0, y: 0.0, radius: None, phase: None }])
        .into_iter()
        .map(|s| {
            Ok(SpotEntry {
                x: finite("oracle.spots.x", s.x)?,
                y: finite("oracle.spots.y", s.y)?,
                radius: Some(positive("oracle.spots.radius", s.radius.unwrap_or(beam.spot_radius))?),
                phase: Some(finite("oracle.spots.phase", s.phase.unwrap_or(phase))?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OracleSection {
        phase: Some(phase),
        passes: Some(passes),
        spots: Some(spots),
        ..OracleSection::default()
    })
}

fn resolve_focus(f: FocusSection, beam: &BeamParams) -> Result<FocusSection> {
    Ok(FocusSection {
        enabled: Some(f.enabled.unwrap_or(true)),
        phase: Some(finite("focus.phase", f.phase.unwrap_or(PI / 2.0))?),
        passes: Some(f.passes.unwrap_or(2)),
        radius: Some(positive("focus.radius", f.radius.unwrap_or(beam.spot_radius))?),
        x: Some(finite("focus.x", f.x.unwrap_or(0.0))?),
        y: Some(finite("focus.y", f.y.unwrap_or(0.0))?),
    })
}

/// Default detuning step: at least 20 samples per linewidth, dividing `2 pi` evenly.
pub fn default_alpha_step(finesse: f64) -> f64 {
    2.0 * PI / (20.0 * finesse).ceil().max(200.0)
}

fn resolve_run(r: RunSection, kind: ExperimentKind, loss: &LossModel) -> Result<RunSection> {
    let scan_only = r.alpha_start.is_some()
        || r.alpha_stop.is_some()
        || r.alpha_step.is_some()
        || r.tolerance.is_some()
        || r.relaxation.is_some()
        || r.max_iterations.is_some()
        || r.verify_stride.is_some()
        || r.backend.is_some()
        || r.probes.is_some();
    let pulse_only = r.round_trips.is_some() || r.stride.is_some() || r.start.is_some();
    let snapshots = Some(r.snapshots.unwrap_or(0));
    match kind {
        ExperimentKind::Scan => {
            if pulse_only {
                return Err(Error::config("run", "round_trips/stride/start apply to pulsed runs only"));
            }
            if loss.reflectivity >= 1.0 {
                return Err(Error::config("loss.reflectivity", "a scan needs R < 1"));
            }
            let step = r.alpha_step.unwrap_or_else(|| default_alpha_step(loss.finesse()));
            let start = r.alpha_start.unwrap_or(0.0);
            let stop = r.alpha_stop.unwrap_or(start + 2.0 * PI - step);
            let count = ((stop - start) / step).floor().max(0.0) as usize + 1;
            Ok(RunSection {
                alpha_start: Some(finite("run.alpha_start", start)?),
                alpha_stop: Some(finite("run.alpha_stop", stop)?),
                alpha_step: Some(positive("run.alpha_step", step)?),
                tolerance: Some(positive("run.tolerance", r.tolerance.unwrap_or(1e-10))?),
                relaxation: Some(r.relaxation.unwrap_or(0.7)),
                max_iterations: r.max_iterations,
                verify_stride: Some(r.verify_stride.unwrap_or((count / 8).max(1))),
                backend: Some(r.backend.unwrap_or_default()),
                probes: Some(r.probes.unwrap_or_default()),
                snapshots,
                ..RunSection::default()
            })
        }
        _ => {
            if scan_only {
                return Err(Error::config("run", "detuning and solver settings apply to scans only"));
            }
            Ok(RunSection {
                round_trips: Some(r.round_trips.unwrap_or(40)),
                stride: Some(r.stride.unwrap_or(1)),
                start: Some(r.start.unwrap_or_default()),
                snapshots,
                ..RunSection::default()
            })
        }
    }
}

fn resolve_twomode(t: TwoModeSection) -> Result<TwoModeSection> {
    let chi = t.chi.unwrap_or(0.05);
    let tt = t.t.unwrap_or(0.15);
    let excess = t.excess.unwrap_or(0.0);
    let p = TwoModeParams::new(chi, tt, 0.0)?.with_excess_loss(excess)?;
    let step = t.alpha_step.unwrap_or_else(|| default_alpha_step(p.finesse()));
    let start = t.alpha_start.unwrap_or(-PI);
    let stop = t.alpha_stop.unwrap_or(start + 2.0 * PI - step);
    if !(step > 0.0 && stop >= start) {
        return Err(Error::config("twomode.alpha_step", "need alpha_step > 0 and alpha_stop >= alpha_start"));
    }
    Ok(TwoModeSection {
        chi: Some(chi),
        t: Some(tt),
        excess: Some(excess),
        map: Some(t.map.unwrap_or_default()),
        alpha_start: Some(finite("twomode.alpha_start", start)?),
        alpha_stop: Some(finite("twomode.alpha_stop", stop)?),
        alpha_step: Some(step),
        round_trips: Some(t.round_trips.unwrap_or(40)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_resolves_defaults() {
        let m = parse_config("").unwrap();
        assert_eq!(m.kind, ExperimentKind::Pulse);
        let g = m.grid().unwrap();
        assert_eq!(g.n(), DEFAULT_N);
        assert!((m.beam().unwrap().channels() - 400.0).abs() < 1e-6);
    }

    #[test]
    fn manifest_round_trips() {
        for text in [
            "",
            "kind = \"scan\"\n[loss]\nreflectivity = 0.95\n",
            "kind = \"twomode\"\n[twomode]\nt = 0.5\n",
            "[beam]\nspot_radius = 5e-5\n[[oracle.spots]]\nx = 1e-4\ny = 0.0\n[[oracle.spots]]\nx = -1e-4\ny = 0.0\n",
        ] {
            let m = parse_config(text).unwrap();
            let again = parse_config(&m.to_toml()).unwrap();
            assert_eq!(m, again);
            assert_eq!(m.to_toml(), again.to_toml());
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let e = parse_config("[grid]\nn = 1024\nbogus = 3\n").unwrap_err();
        match e {
            Error::Syntax { line, message } => {
                assert_eq!(line, 3, "{message}");
                assert!(message.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_values_name_the_field() {
        match parse_config("[beam]\nwavelength = -1.0\n").unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "beam.wavelength"),
            other => panic!("{other:?}"),
        }
        match parse_config("[grid]\nn = 512\n").unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "grid.n"),
            other => panic!("{other:?}"),
        }
        assert!(parse_config("[[oracle.spots]]\nx = 0.0\ny = 0.0\nphase = 4.0\n").is_err());
        assert!(parse_config("kind = \"scan\"\n[loss]\nreflectivity = 1.0\n").is_err());
    }

    #[test]
    fn lab_geometry_reports_channels() {
        let m = parse_config("[beam]\nspot_radius = 5e-5\n").unwrap();
        let n: f64 = m
            .derived()
            .iter()
            .find(|(k, _)| k == "channels")
            .unwrap()
            .1
            .parse()
            .unwrap();
        assert!((n - 806.0).abs() < 2.0);
    }
}
