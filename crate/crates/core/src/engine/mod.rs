//! Cavity experiments: pulsed evolution and steady-state detuning scans.

mod pulsed;
mod reduced;
mod scan;

pub use pulsed::{run_pulsed, run_pulsed_on, PulsedRunConfig, StartState};
pub use scan::{run_scan, Probe, ScanRunConfig, SolverBackend};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{
    disc_weights, make_airy_input, make_gaussian_input, orthonormalize, BeamParams, Disc, Field,
    GridSpec, Plane,
};
use crate::optics::{band_limited_airy_input, LossModel, PlateSpec, RoundTrip};

/// Monitored discs around each oracle region are this much wider than the spot.
pub const SOLUTION_DISC_SCALE: f64 = 1.5;

/// Supersampling factor used for intensity integration.
pub const SUPERSAMPLE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputKind {
    /// Sampled `2 J1(rho)/rho`.
    Airy,
    /// Lens image of the flat focal disc.
    BandLimitedAiry,
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InputBeam {
    Airy,
    BandLimitedAiry,
    Gaussian { waist: f64 },
}

impl InputBeam {
    pub fn build(&self, grid: &GridSpec, beam: &BeamParams) -> Result<Field> {
        match *self {
            InputBeam::Airy => make_airy_input(grid, beam),
            InputBeam::BandLimitedAiry => band_limited_airy_input(grid, beam),
            InputBeam::Gaussian { waist } => make_gaussian_input(grid, beam, waist),
        }
    }
}

/// Everything that defines the optical cavity.
#[derive(Clone, Debug, PartialEq)]
pub struct CavityConfig {
    pub beam: BeamParams,
    pub grid: GridSpec,
    pub input: InputBeam,
    pub oracle: PlateSpec,
    pub focus: PlateSpec,
    pub loss: LossModel,
}

impl CavityConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.check_sampling(&self.beam)?;
        if self.oracle.plane != Plane::Image {
            return Err(Error::PlaneMismatch {
                expected: Plane::Image,
                found: self.oracle.plane,
            });
        }
        if self.focus.plane != Plane::Focal {
            return Err(Error::PlaneMismatch {
                expected: Plane::Focal,
                found: self.focus.plane,
            });
        }
        self.oracle.validate()?;
        self.focus.validate()?;
        self.loss.validate()
    }
}

/// Solution mode and the orthogonal partner of the input.
#[derive(Clone, Debug)]
pub struct SolutionModes {
    pub psi1: Field,
    pub psi0_tilde: Field,
    /// `<psi1, psi0>`.
    pub chi: Complex64,
}

/// A prepared cavity: compiled round trip, input beam and monitors.
#[derive(Clone, Debug)]
pub struct Cavity {
    pub config: CavityConfig,
    pub round_trip: RoundTrip,
    pub input: Field,
    pub solution: Option<SolutionModes>,
    /// Oracle regions (analytic spots or raster components).
    pub regions: Vec<Disc>,
    solution_weights: Vec<Vec<(usize, f64)>>,
    /// Central lobe of the input minus the monitored discs.
    background: Vec<usize>,
}

/// Column names of per-field metrics, in the order of [`Cavity::metrics`].
pub fn metric_columns(regions: usize) -> Vec<String> {
    let mut c: Vec<String> = vec!["total_power".into(), "solution_power".into()];
    if regions > 1 {
        c.extend((1..=regions).map(|k| format!("solution_power_{k}")));
    }
    c.extend(
        [
            "background_intensity",
            "background_power",
            "contrast",
            "a0_re",
            "a0_im",
            "a1_re",
            "a1_im",
            "rho11",
            "two_mode_fraction",
        ]
        .map(String::from),
    );
    c
}

impl Cavity {
    pub fn new(config: &CavityConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid;
        let round_trip = RoundTrip::new(&grid, &config.beam, &config.oracle, &config.focus, &config.loss)?;
        let input = config.input.build(&grid, &config.beam)?;
        let regions = config.oracle.regions(&grid)?;

        let support: Vec<usize> = round_trip.oracle_mask().entries.iter().map(|&(i, _)| i).collect();
        let solution = if support.is_empty() {
            None
        } else {
            let mut psi1 = Field::zeros(grid, Plane::Image);
            let amp = 1.0 / ((support.len() as f64).sqrt() * grid.dx());
            let flat = psi1.amps_mut().as_slice_mut().expect("standard layout");
            for &i in &support {
                flat[i] = Complex64::new(amp, 0.0);
            }
            let (psi0_tilde, chi) = orthonormalize(&input, &psi1)?;
            Some(SolutionModes { psi1, psi0_tilde, chi })
        };

        let monitored: Vec<Disc> = regions
            .iter()
            .map(|d| Disc::new(d.center, d.radius * SOLUTION_DISC_SCALE))
            .collect();
        let solution_weights = monitored
            .iter()
            .map(|d| disc_weights(&grid, d, SUPERSAMPLE))
            .collect::<Result<Vec<_>>>()?;

        let n = grid.n();
        let rb = config.beam.dark_ring_radius();
        let mut background = Vec::new();
        for r in 0..n {
            let y = grid.coord(r);
            for c in 0..n {
                let x = grid.coord(c);
                if x * x + y * y >= rb * rb {
                    continue;
                }
                let inside = monitored.iter().any(|d| {
                    let (dx, dy) = (x - d.center[0], y - d.center[1]);
                    dx * dx + dy * dy <= d.radius * d.radius
                });
                if !inside {
                    background.push(r * n + c);
                }
            }
        }

        Ok(Cavity {
            config: config.clone(),
            round_trip,
            input,
            solution,
            regions,
            solution_weights,
            background,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.config.grid
    }

    /// Measured overlap `|<psi1, psi0>|`, if an oracle is present.
    pub fn chi(&self) -> Option<f64> {
        self.solution.as_ref().map(|s| s.chi.norm())
    }

    /// Projected amplitudes `(a0, a1)` on `(psi0_tilde, psi1)`.
    pub fn project(&self, field: &Field) -> Result<(Complex64, Complex64)> {
        match &self.solution {
            None => Ok((Complex64::new(f64::NAN, 0.0), Complex64::new(f64::NAN, 0.0))),
            Some(s) => Ok((
                crate::field::overlap(&s.psi0_tilde, field)?,
                crate::field::overlap(&s.psi1, field)?,
            )),
        }
    }

    /// Metrics of an image-plane field, ordered as [`metric_columns`].
    pub fn metrics(&self, field: &Field) -> Result<Vec<f64>> {
        let total = field.power();
        let per: Vec<f64> = self.solution_weights.iter().map(|w| field.weighted_power(w)).collect();
        let sol: f64 = per.iter().sum();
        let flat = field.amps().as_slice().expect("standard layout");
        let bg_sum: f64 = self.background.iter().map(|&i| flat[i].norm_sqr()).sum();
        let dx2 = self.grid().dx().powi(2);
        let bg_mean = if self.background.is_empty() {
            f64::NAN
        } else {
            bg_sum / self.background.len() as f64
        };
        let sol_area: f64 = self.solution_weights.iter().flatten().map(|&(_, w)| w).sum();
        let sol_mean = sol / (sol_area * dx2);
        let (a0, a1) = self.project(field)?;
        let two = a0.norm_sqr() + a1.norm_sqr();

        let mut row = vec![total, sol];
        if per.len() > 1 {
            row.extend(&per);
        }
        row.extend([
            bg_mean,
            bg_sum * dx2,
            sol_mean / bg_mean,
            a0.re,
            a0.im,
            a1.re,
            a1.im,
            a1.norm_sqr() / two,
            two / total,
        ]);
        Ok(row)
    }

    pub fn metric_columns(&self) -> Vec<String> {
        metric_columns(self.regions.len())
    }

    pub(crate) fn solution_weights(&self) -> &[Vec<(usize, f64)>] {
        &self.solution_weights
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::optics::{focus_plate, Spot};
    use std::f64::consts::PI;

    pub(crate) fn small_cavity(loss: LossModel) -> CavityConfig {
        let beam = BeamParams::from_channels(656e-9, 0.34, 100.0).unwrap();
        let grid = GridSpec::auto(&beam, 1024).unwrap();
        CavityConfig {
            beam,
            grid,
            input: InputBeam::BandLimitedAiry,
            oracle: PlateSpec::with_spots(
                Plane::Image,
                vec![Spot {
                    center: [0.0, 0.0],
                    radius: beam.spot_radius,
                    phase: PI / 2.0,
                }],
                2,
            )
            .unwrap(),
            focus: focus_plate(&beam, PI / 2.0, 2).unwrap(),
            loss,
        }
    }

    #[test]
    fn cavity_measures_chi_near_nominal() {
        let cav = Cavity::new(&small_cavity(LossModel::lossless())).unwrap();
        let chi = cav.chi().unwrap();
        assert!((chi / 0.1 - 1.0).abs() < 0.01, "chi = {chi}");
        let m = cav.metrics(&cav.input).unwrap();
        assert_eq!(m.len(), cav.metric_columns().len());
        assert!((m[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wrong_plane_plate_is_rejected() {
        let mut cfg = small_cavity(LossModel::lossless());
        cfg.oracle.plane = Plane::Focal;
        assert!(matches!(Cavity::new(&cfg), Err(Error::PlaneMismatch { .. })));
    }
}
