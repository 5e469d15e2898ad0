use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::reduced::{ReducedCavity, Readout};
use super::{Cavity, CavityConfig, SUPERSAMPLE};
use crate::error::{Error, Result};
use crate::field::{disc_weights, Disc, Field, Plane};
use crate::series::{Series, Snapshot, Spectrum};

/// Reduced solver is used up to this many plate pixels (both plates together).
pub const REDUCED_MAX_DIM: usize = 2500;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverBackend {
    /// Reduced subspace when the plates are small enough, full field otherwise.
    #[default]
    Auto,
    Reduced,
    FullField,
}

/// Circular aperture in front of the detector (image plane, transmitted light).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub name: String,
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRunConfig {
    pub cavity: CavityConfig,
    pub alpha_start: f64,
    pub alpha_stop: f64,
    pub alpha_step: f64,
    /// Relative steady-state residual to reach at every detuning.
    pub tolerance: f64,
    /// Damping `beta` of the fixed-point iteration.
    pub relaxation: f64,
    pub max_iterations: Option<usize>,
    pub probes: Vec<Probe>,
    /// Re-check the full-field residual every this many detunings (0 = never).
    pub verify_stride: usize,
    pub backend: SolverBackend,
    /// Keep the transmitted intensity image at the strongest resonance.
    pub snapshot: bool,
}

impl ScanRunConfig {
    pub fn new(cavity: CavityConfig, alpha_start: f64, alpha_stop: f64, alpha_step: f64) -> Self {
        ScanRunConfig {
            cavity,
            alpha_start,
            alpha_stop,
            alpha_step,
            tolerance: 1e-10,
            relaxation: 0.7,
            max_iterations: None,
            probes: Vec::new(),
            verify_stride: 0,
            backend: SolverBackend::Auto,
            snapshot: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cavity.validate()?;
        let loss = &self.cavity.loss;
        if loss.reflectivity >= 1.0 {
            return Err(Error::config(
                "loss.reflectivity",
                "a steady-state scan needs partially transmitting mirrors (R < 1)",
            ));
        }
        if !(self.alpha_step > 0.0 && self.alpha_step.is_finite()) {
            return Err(Error::config("run.alpha_step", "must be positive"));
        }
        if !(self.alpha_stop >= self.alpha_start) {
            return Err(Error::config("run.alpha_stop", "must not be below alpha_start"));
        }
        let max_step = 2.0 * PI / (10.0 * loss.finesse());
        if self.alpha_step > max_step * (1.0 + 1e-12) {
            return Err(Error::config(
                "run.alpha_step",
                format!(
                    "step {:.4e} undersamples the resonances; need <= 2 pi / (10 F) = {max_step:.4e}",
                    self.alpha_step
                ),
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("run.tolerance", "must be positive"));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::config("run.relaxation", "must lie in (0, 1]"));
        }
        for p in &self.probes {
            if !(p.radius > 0.0) {
                return Err(Error::config("run.probes.radius", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn alphas(&self) -> Vec<f64> {
        let count = ((self.alpha_stop - self.alpha_start) / self.alpha_step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| self.alpha_start + k as f64 * self.alpha_step).collect()
    }

    fn iteration_cap(&self) -> usize {
        self.max_iterations.unwrap_or_else(|| {
            let g = self.cavity.loss.round_trip_amplitude();
            let per = self.relaxation * (1.0 - g);
            (2.0 * (1e2 / self.tolerance).ln() / per).ceil() as usize + 100
        })
    }
}

struct Monitor {
    weights: Vec<(usize, f64)>,
}

/// Steady-state response over a sweep of the round-trip phase `alpha`.
pub fn run_scan(cfg: &ScanRunConfig) -> Result<Spectrum> {
    cfg.validate()?;
    let cavity = Cavity::new(&cfg.cavity)?;
    let grid = *cavity.grid();
    let regions = cavity.regions.len();

    let mut columns: Vec<String> = ["alpha", "transmitted_power", "circulating_power", "solution_power"]
        .map(String::from)
        .to_vec();
    if regions > 1 {
        columns.extend((1..=regions).map(|k| format!("solution_power_{k}")));
    }
    columns.extend(cfg.probes.iter().map(|p| format!("probe_{}", p.name)));
    columns.extend(
        ["a0_re", "a0_im", "a1_re", "a1_im", "rho11", "residual", "iterations"].map(String::from),
    );

    let mut monitors: Vec<Monitor> = cavity
        .solution_weights()
        .iter()
        .map(|w| Monitor { weights: w.clone() })
        .collect();
    for p in &cfg.probes {
        monitors.push(Monitor {
            weights: disc_weights(&grid, &Disc::new(p.center, p.radius), SUPERSAMPLE)?,
        });
    }

    let use_reduced = match cfg.backend {
        SolverBackend::Reduced => true,
        SolverBackend::FullField => false,
        SolverBackend::Auto => ReducedCavity::dimension_of(&cavity) <= REDUCED_MAX_DIM,
    };
    let alphas = cfg.alphas();
    let t = cfg.cavity.loss.coupling();
    let t2 = t * t;
    let dx = grid.dx();
    let cap = cfg.iteration_cap();

    let assemble_row = |alpha: f64, circ: f64, mon: Vec<f64>, a0: Complex64, a1: Complex64, res: f64, it: usize| {
        let mut row = vec![alpha, t2 * circ];
        row.push(circ);
        let sol: f64 = mon[..regions].iter().sum();
        row.push(t2 * sol);
        if regions > 1 {
            row.extend(mon[..regions].iter().map(|m| t2 * m));
        }
        row.extend(mon[regions..].iter().map(|m| t2 * m));
        let two = a0.norm_sqr() + a1.norm_sqr();
        row.extend([a0.re, a0.im, a1.re, a1.im, a1.norm_sqr() / two, res, it as f64]);
        row
    };

    let mut series = Series::new(columns);
    let mut verified = Vec::new();
    let mut fields_at: Vec<(usize, Array2<Complex64>)> = Vec::new();

    if use_reduced {
        let rc = ReducedCavity::new(&cavity)?;
        let pixel_readouts: Vec<Vec<(f64, Readout)>> = monitors
            .iter()
            .map(|m| {
                let pix: Vec<usize> = m.weights.iter().map(|&(i, _)| i).collect();
                m.weights.iter().map(|&(_, w)| w).zip(rc.pixel_readouts(&pix)).collect()
            })
            .collect();
        let modes = cavity.solution.as_ref().map(|s| {
            (
                rc.functional(&s.psi0_tilde.amps().mapv(|v| v * dx)),
                rc.functional(&s.psi1.amps().mapv(|v| v * dx)),
            )
        });
        let rows: Vec<Result<(Vec<f64>, f64)>> = alphas
            .par_iter()
            .map(|&alpha| {
                let sol = rc.solve(alpha, cfg.tolerance, cfg.relaxation, cap)?;
                if sol.residual >= cfg.tolerance {
                    return Err(Error::NonConvergence {
                        alpha,
                        residual: sol.residual,
                        iterations: sol.iterations,
                    });
                }
                let mon: Vec<f64> = pixel_readouts
                    .iter()
                    .map(|ro| ro.iter().map(|(w, r)| w * r.eval(&sol).norm_sqr()).sum())
                    .collect();
                let (a0, a1) = match &modes {
                    Some((f0, f1)) => (f0.eval(&sol), f1.eval(&sol)),
                    None => (Complex64::new(f64::NAN, 0.0), Complex64::new(f64::NAN, 0.0)),
                };
                let circ = sol.norm2(&rc);
                Ok((assemble_row(alpha, circ, mon, a0, a1, sol.residual, sol.iterations), circ))
            })
            .collect();
        for r in rows {
            series.push(r?.0);
        }
        let need_full = |k: usize| cfg.verify_stride > 0 && k % cfg.verify_stride == 0;
        let best = argmax(&series.column("transmitted_power")?);
        for (k, &alpha) in alphas.iter().enumerate() {
            if !(need_full(k) || (cfg.snapshot && k == best)) {
                continue;
            }
            let sol = rc.solve(alpha, cfg.tolerance, cfg.relaxation, cap)?;
            let e = rc.assemble(&sol);
            if need_full(k) {
                let res = full_residual(&cavity, &e, alpha, t)?;
                if res > (10.0 * cfg.tolerance).max(1e-12) {
                    return Err(Error::NonConvergence {
                        alpha,
                        residual: res,
                        iterations: sol.iterations,
                    });
                }
                verified.push((alpha, res));
            }
            if cfg.snapshot && k == best {
                fields_at.push((k, e));
            }
        }
    } else {
        let rows: Vec<Result<(Vec<f64>, Array2<Complex64>, f64)>> = alphas
            .par_iter()
            .map(|&alpha| {
                let (e, it) = full_field_solve(&cavity, alpha, t, cfg.relaxation, cfg.tolerance, cap)?;
                let res = full_residual(&cavity, &e, alpha, t)?;
                let flat = e.as_slice().expect("standard layout");
                let mon: Vec<f64> = monitors
                    .iter()
                    .map(|m| m.weights.iter().map(|&(i, w)| w * flat[i].norm_sqr()).sum())
                    .collect();
                let field = Field::new(grid, Plane::Image, e.mapv(|v| v / dx))?;
                let (a0, a1) = cavity.project(&field)?;
                let circ = e.iter().map(|v| v.norm_sqr()).sum();
                Ok((assemble_row(alpha, circ, mon, a0, a1, res, it), e, res))
            })
            .collect();
        let mut keep = Vec::new();
        for (k, r) in rows.into_iter().enumerate() {
            let (row, e, res) = r?;
            series.push(row);
            if cfg.verify_stride > 0 && k % cfg.verify_stride == 0 {
                verified.push((alphas[k], res));
            }
            keep.push(e);
        }
        if cfg.snapshot {
            let best = argmax(&series.column("transmitted_power")?);
            fields_at.push((best, keep.swap_remove(best)));
        }
    }

    let snapshots = fields_at
        .into_iter()
        .map(|(k, e)| Snapshot {
            label: format!("resonance_alpha_{:.6}", alphas[k]),
            plane: Plane::Image,
            intensity: e.mapv(|v| t2 * v.norm_sqr() / (dx * dx)),
        })
        .collect();
    Ok(Spectrum {
        series,
        verified,
        snapshots,
    })
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

/// `|| E - (t psi0 + c G E) || / ||E||` on the full grid, pixel units.
fn full_residual(cavity: &Cavity, e: &Array2<Complex64>, alpha: f64, t: f64) -> Result<f64> {
    let dx = cavity.grid().dx();
    let mut ge = e.clone();
    cavity.round_trip.apply_unitary_pixels(&mut ge);
    let c = Complex64::from_polar(cavity.round_trip.gain(), alpha);
    let psi = cavity.input.amps();
    let mut r2 = 0.0;
    let mut e2 = 0.0;
    for ((x, g), p) in e.iter().zip(ge.iter()).zip(psi.iter()) {
        r2 += (x - t * dx * p - c * g).norm_sqr();
        e2 += x.norm_sqr();
    }
    Ok((r2 / e2).sqrt())
}

/// Literal damped fixed point on the whole grid (two FFTs per sweep).
fn full_field_solve(
    cavity: &Cavity,
    alpha: f64,
    t: f64,
    beta: f64,
    tol: f64,
    cap: usize,
) -> Result<(Array2<Complex64>, usize)> {
    let dx = cavity.grid().dx();
    let c = Complex64::from_polar(cavity.round_trip.gain(), alpha);
    let drive = cavity.input.amps().mapv(|v| v * (beta * t * dx));
    let n = cavity.grid().n();
    let mut e = Array2::<Complex64>::zeros((n, n));
    for it in 1..=cap {
        let mut ge = e.clone();
        cavity.round_trip.apply_unitary_pixels(&mut ge);
        let mut step2 = 0.0;
        let mut norm2 = 0.0;
        for ((x, g), d) in e.iter_mut().zip(ge.iter()).zip(drive.iter()) {
            let next = (1.0 - beta) * *x + beta * c * g + d;
            step2 += (next - *x).norm_sqr();
            norm2 += next.norm_sqr();
            *x = next;
        }
        let rel = step2.sqrt() / (beta * norm2.sqrt().max(1e-300));
        if !rel.is_finite() {
            return Err(Error::NonFinite { round_trip: it });
        }
        if rel < 0.5 * tol {
            return Ok((e, it));
        }
    }
    Err(Error::NonConvergence {
        alpha,
        residual: full_residual(cavity, &e, alpha, t)?,
        iterations: cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::tests::small_cavity;
    use crate::field::{BeamParams, GridSpec};
    use crate::optics::{focus_plate, LossModel, PlateSpec, Spot};

    /// Tiny cavity where the full-field iteration is affordable.
    fn tiny(loss: LossModel) -> CavityConfig {
        let beam = BeamParams::from_channels(656e-9, 0.34, 20.0).unwrap();
        let grid = GridSpec::auto(&beam, 256).unwrap();
        CavityConfig {
            beam,
            grid,
            input: crate::engine::InputBeam::Airy,
            oracle: PlateSpec::with_spots(
                Plane::Image,
                vec![Spot {
                    center: [beam.spot_radius * 2.0, 0.0],
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
    fn reduced_and_full_field_agree() {
        let loss = LossModel::new(0.8, 0.0).unwrap();
        let mut cfg = ScanRunConfig::new(tiny(loss), 2.5, 3.5, 0.04);
        cfg.probes.push(Probe {
            name: "spot".into(),
            center: [cfg.cavity.beam.spot_radius * 2.0, 0.0],
            radius: cfg.cavity.beam.spot_radius,
        });
        cfg.backend = SolverBackend::Reduced;
        cfg.verify_stride = 5;
        let red = run_scan(&cfg).unwrap();
        cfg.backend = SolverBackend::FullField;
        let full = run_scan(&cfg).unwrap();
        for name in ["transmitted_power", "probe_spot", "a1_re", "a0_im"] {
            let a = red.series.column(name).unwrap();
            let b = full.series.column(name).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-8 * (1.0 + y.abs()), "{name}: {x} vs {y}");
            }
        }
        assert!(red.verified.iter().all(|&(_, r)| r < 1e-9));
    }

    #[test]
    fn step_must_resolve_the_linewidth() {
        let loss = LossModel::new(0.9, 0.0).unwrap();
        let cfg = ScanRunConfig::new(small_cavity(loss), 0.0, 1.0, 0.1);
        assert!(matches!(run_scan(&cfg), Err(Error::Config { .. })));
    }

    #[test]
    fn lossless_mirrors_rejected() {
        let cfg = ScanRunConfig::new(small_cavity(LossModel::lossless()), 0.0, 1.0, 0.001);
        assert!(matches!(run_scan(&cfg), Err(Error::Config { .. })));
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let loss = LossModel::new(0.9, 0.0).unwrap();
        let mut cfg = ScanRunConfig::new(small_cavity(loss), PI, PI, 0.01);
        cfg.max_iterations = Some(5);
        assert!(matches!(run_scan(&cfg), Err(Error::NonConvergence { .. })));
    }
}
