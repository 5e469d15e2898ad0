use serde::{Deserialize, Serialize};

use super::{Cavity, CavityConfig};
use crate::error::{Error, Result};
use crate::field::Plane;
use crate::series::{Series, Snapshot, Trajectory};

/// Initial intracavity state of a pulsed run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartState {
    /// The input beam `psi0`.
    #[default]
    Input,
    /// Its component orthogonal to the solution mode, `psi0_tilde`.
    Orthonormalized,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PulsedRunConfig {
    pub cavity: CavityConfig,
    pub round_trips: usize,
    /// Record every `stride`-th round trip.
    pub stride: usize,
    pub start: StartState,
    /// Keep an intensity image every this many round trips (0 = none).
    pub snapshot_stride: usize,
}

impl PulsedRunConfig {
    pub fn new(cavity: CavityConfig, round_trips: usize) -> Self {
        PulsedRunConfig {
            cavity,
            round_trips,
            stride: 1,
            start: StartState::Input,
            snapshot_stride: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.round_trips == 0 {
            return Err(Error::config("run.round_trips", "must be at least 1"));
        }
        if self.stride == 0 {
            return Err(Error::config("run.stride", "must be at least 1"));
        }
        self.cavity.validate()
    }
}

/// Inject one pulse and follow it for `round_trips` round trips.
pub fn run_pulsed(cfg: &PulsedRunConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let cavity = Cavity::new(&cfg.cavity)?;
    run_pulsed_on(&cavity, cfg)
}

/// Pulsed run on an already prepared cavity (its own config is used for
/// the optics; `cfg.cavity` is ignored).
pub fn run_pulsed_on(cavity: &Cavity, cfg: &PulsedRunConfig) -> Result<Trajectory> {
    if cfg.round_trips == 0 || cfg.stride == 0 {
        return Err(Error::config("run", "round_trips and stride must be at least 1"));
    }
    let mut field = match cfg.start {
        StartState::Input => cavity.input.clone(),
        StartState::Orthonormalized => match &cavity.solution {
            Some(s) => s.psi0_tilde.clone(),
            None => {
                return Err(Error::config(
                    "run.start",
                    "orthonormalized start needs an oracle with at least one spot",
                ))
            }
        },
    };
    let mut columns = vec!["tau".to_string()];
    columns.extend(cavity.metric_columns());
    let mut series = Series::new(columns);
    let mut initial = vec![0.0];
    initial.extend(cavity.metrics(&field)?);
    let mut snapshots = Vec::new();

    for tau in 1..=cfg.round_trips {
        cavity.round_trip.apply_pixels(field.amps_mut());
        let p = field.power();
        if !p.is_finite() {
            return Err(Error::NonFinite { round_trip: tau });
        }
        if tau % cfg.stride == 0 {
            let mut row = vec![tau as f64];
            row.extend(cavity.metrics(&field)?);
            series.push(row);
        }
        if cfg.snapshot_stride > 0 && tau % cfg.snapshot_stride == 0 {
            snapshots.push(Snapshot {
                label: format!("tau_{tau:04}"),
                plane: Plane::Image,
                intensity: field.intensity(),
            });
        }
    }
    Ok(Trajectory {
        series,
        initial,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::tests::small_cavity;
    use crate::optics::LossModel;

    #[test]
    fn lossless_run_conserves_power() {
        let cfg = PulsedRunConfig::new(small_cavity(LossModel::lossless()), 30);
        let tr = run_pulsed(&cfg).unwrap();
        assert_eq!(tr.series.len(), 30);
        for p in tr.series.column("total_power").unwrap() {
            assert!((p - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn lossy_power_decays_geometrically() {
        let loss = LossModel::new(0.9, 0.0).unwrap();
        let mut cfg = PulsedRunConfig::new(small_cavity(loss), 6);
        cfg.stride = 2;
        let tr = run_pulsed(&cfg).unwrap();
        assert_eq!(tr.series.sweep(), vec![2.0, 4.0, 6.0]);
        for (tau, p) in tr.series.sweep().iter().zip(tr.series.column("total_power").unwrap()) {
            assert!((p - 0.81f64.powf(*tau)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_round_trips_rejected() {
        let cfg = PulsedRunConfig::new(small_cavity(LossModel::lossless()), 0);
        assert!(matches!(run_pulsed(&cfg), Err(Error::Config { .. })));
    }
}
