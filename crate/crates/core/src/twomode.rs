//! Two-mode model: the input beam splits into the solution mode `psi1`
//! and its orthogonal partner `psi0_tilde`, and each round trip rotates
//! the pair by an angle of order `2 chi`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which 2x2 round-trip map to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoundTripMap {
    /// `[[1-2chi^2, -2chi], [2chi, 1-2chi^2]]`, correct to second order in chi.
    #[default]
    SecondOrder,
    /// Exact rotation by `arccos(1 - 2 chi^2)`.
    ExactRotation,
}

/// Parameters of the driven two-mode cavity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoModeParams {
    pub chi: f64,
    /// Mirror amplitude transmission; each mirror reflects `sqrt(1 - t^2)`.
    pub t: f64,
    /// Round-trip detuning phase.
    pub alpha: f64,
    /// Extra amplitude factor per round trip, `sqrt(1 - excess power loss)`.
    pub excess_amplitude: f64,
    pub map: RoundTripMap,
}

impl TwoModeParams {
    pub fn new(chi: f64, t: f64, alpha: f64) -> Result<Self> {
        let p = TwoModeParams {
            chi,
            t,
            alpha,
            excess_amplitude: 1.0,
            map: RoundTripMap::SecondOrder,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_excess_loss(mut self, power_loss: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&power_loss) {
            return Err(Error::config("twomode.excess", format!("must lie in [0, 1), got {power_loss}")));
        }
        self.excess_amplitude = (1.0 - power_loss).sqrt();
        Ok(self)
    }

    pub fn with_map(mut self, map: RoundTripMap) -> Self {
        self.map = map;
        self
    }

    pub fn at_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi > 0.0 && self.chi < 1.0) {
            return Err(Error::config("twomode.chi", format!("must lie in (0, 1), got {}", self.chi)));
        }
        if !(self.t > 0.0 && self.t < 1.0) {
            return Err(Error::config("twomode.t", format!("must lie in (0, 1), got {}", self.t)));
        }
        if !self.alpha.is_finite() {
            return Err(Error::config("twomode.alpha", "must be finite"));
        }
        if !(self.excess_amplitude > 0.0 && self.excess_amplitude <= 1.0) {
            return Err(Error::config("twomode.excess", "amplitude factor must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Real round-trip amplitude `g = (1 - t^2) * excess_amplitude`.
    pub fn round_trip_amplitude(&self) -> f64 {
        (1.0 - self.t * self.t) * self.excess_amplitude
    }

    pub fn finesse(&self) -> f64 {
        let g = self.round_trip_amplitude();
        PI * g.sqrt() / (1.0 - g)
    }
}

/// Amplitudes on `(psi0_tilde, psi1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoModeState {
    pub a0: Complex64,
    pub a1: Complex64,
}

impl TwoModeState {
    pub fn total_power(&self) -> f64 {
        self.a0.norm_sqr() + self.a1.norm_sqr()
    }

    /// Normalised populations `(rho00, rho11)`.
    pub fn populations(&self) -> (f64, f64) {
        let p = self.total_power();
        (self.a0.norm_sqr() / p, self.a1.norm_sqr() / p)
    }

    /// Share of the circulating power in the solution mode.
    pub fn solution_fraction(&self) -> f64 {
        self.populations().1
    }
}

/// Per-step rotation angle of the exact projected map, `arccos(1 - 2 chi^2)`.
pub fn rotation_angle(chi: f64) -> f64 {
    (1.0 - 2.0 * chi * chi).clamp(-1.0, 1.0).acos()
}

/// Lossless populations after `tau` round trips from `psi0_tilde`, second-order law.
pub fn rabi_populations(chi: f64, tau: f64) -> (f64, f64) {
    let s = (2.0 * chi * tau).sin().powi(2);
    (1.0 - s, s)
}

/// Same with the exact rotation angle.
pub fn rabi_populations_exact(chi: f64, tau: f64) -> (f64, f64) {
    let s = (rotation_angle(chi) * tau).sin().powi(2);
    (1.0 - s, s)
}

/// The 2x2 round-trip map acting on `(a0, a1)`.
pub fn round_trip_matrix(chi: f64, map: RoundTripMap) -> [[f64; 2]; 2] {
    let (c, s) = match map {
        RoundTripMap::SecondOrder => (1.0 - 2.0 * chi * chi, 2.0 * chi),
        RoundTripMap::ExactRotation => {
            let th = rotation_angle(chi);
            (th.cos(), th.sin())
        }
    };
    [[c, -s], [s, c]]
}

/// Apply the undriven, lossless map `tau` times.
pub fn evolve(state: TwoModeState, chi: f64, map: RoundTripMap, tau: usize) -> TwoModeState {
    let m = round_trip_matrix(chi, map);
    let (mut a0, mut a1) = (state.a0, state.a1);
    for _ in 0..tau {
        let b0 = a0 * m[0][0] + a1 * m[0][1];
        let b1 = a0 * m[1][0] + a1 * m[1][1];
        a0 = b0;
        a1 = b1;
    }
    TwoModeState { a0, a1 }
}

/// Steady state of `a = c M a + drive`, `c = g exp(i alpha)`.
pub fn steady_state_driven(p: &TwoModeParams, drive: [Complex64; 2]) -> Result<TwoModeState> {
    p.validate()?;
    let m = round_trip_matrix(p.chi, p.map);
    let c = Complex64::from_polar(p.round_trip_amplitude(), p.alpha);
    // (I - c M) a = drive
    let a = Complex64::new(1.0, 0.0) - c * m[0][0];
    let b = -c * m[0][1];
    let cc = -c * m[1][0];
    let d = Complex64::new(1.0, 0.0) - c * m[1][1];
    let det = a * d - b * cc;
    if det.norm() < 1e-300 || !det.is_finite() {
        return Err(Error::SingularSystem { alpha: p.alpha });
    }
    Ok(TwoModeState {
        a0: (d * drive[0] - b * drive[1]) / det,
        a1: (a * drive[1] - cc * drive[0]) / det,
    })
}

/// Steady state for a unit-power input fed into `psi0_tilde` through the mirror.
pub fn steady_state(p: &TwoModeParams) -> Result<TwoModeState> {
    steady_state_driven(p, [Complex64::new(p.t, 0.0), Complex64::new(0.0, 0.0)])
}

/// Steady states over a sweep of `alpha`.
pub fn spectrum(p: &TwoModeParams, alphas: &[f64]) -> Result<Vec<TwoModeState>> {
    alphas.iter().map(|&a| steady_state(&p.at_alpha(a))).collect()
}

/// Power bookkeeping of a steady state with a unit input beam.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerBalance {
    pub injected: f64,
    /// Leaving through the far mirror.
    pub transmitted: f64,
    /// Leaving back through the input mirror (prompt reflection plus leakage).
    pub reflected: f64,
    /// Dissipated by the extra round-trip loss.
    pub excess: f64,
}

impl PowerBalance {
    pub fn mismatch(&self) -> f64 {
        self.injected - self.transmitted - self.reflected - self.excess
    }
}

/// Power balance of the steady state for a unit input in `psi0_tilde`.
///
/// The circulating field `a` (just inside the input mirror) first loses the
/// excess, reaches the far mirror (which transmits `t^2` of the power),
/// returns as `b = r eta exp(i alpha) M a` and meets the input mirror, where
/// the outgoing field is `-r e_in + t b`.
pub fn power_balance(p: &TwoModeParams, state: &TwoModeState) -> PowerBalance {
    let r = (1.0 - p.t * p.t).sqrt();
    let eta = p.excess_amplitude;
    let m = round_trip_matrix(p.chi, p.map);
    let ph = Complex64::from_polar(r * eta, p.alpha);
    let b0 = ph * (state.a0 * m[0][0] + state.a1 * m[0][1]);
    let b1 = ph * (state.a0 * m[1][0] + state.a1 * m[1][1]);
    let out0 = -r + p.t * b0;
    let out1 = p.t * b1;
    let circ = state.total_power();
    PowerBalance {
        injected: 1.0,
        transmitted: p.t * p.t * eta * eta * circ,
        reflected: out0.norm_sqr() + out1.norm_sqr(),
        excess: (1.0 - eta * eta) * circ,
    }
}

/// Finesse of a cavity with round-trip amplitude (or mirror reflectivity) `r`.
pub fn finesse(r: f64) -> f64 {
    PI * r.sqrt() / (1.0 - r)
}

/// Inverse of [`finesse`].
pub fn reflectivity_for_finesse(f: f64) -> f64 {
    let u = (-PI + (PI * PI + 4.0 * f * f).sqrt()) / (2.0 * f);
    u * u
}

/// Separation of the two steady-state resonances, `2 arccos(1 - 2 chi^2) ~ 4 chi`.
pub fn doublet_splitting(chi: f64) -> f64 {
    2.0 * rotation_angle(chi)
}

/// Doublet splitting in units of the cavity linewidth `2 pi / F`.
pub fn splitting_over_linewidth(chi: f64, finesse: f64) -> f64 {
    doublet_splitting(chi) * finesse / (2.0 * PI)
}

/// Order-of-magnitude finesse above which the doublet is resolved, `pi / chi`.
pub fn resolution_finesse(chi: f64) -> f64 {
    PI / chi
}

/// Contrast of the solution channel against an average non-solution channel,
/// `N |a1|^2 / |a0|^2` with `N = 1/chi^2`.
pub fn solution_contrast(state: &TwoModeState, chi: f64) -> f64 {
    state.a1.norm_sqr() / (chi * chi * state.a0.norm_sqr())
}

/// Resonance positions (in `alpha`) of the undriven map's eigenmodes.
///
/// The map has eigenvalues `exp(+-i phi)`, so the cavity resonates where
/// `alpha = -+phi`.
pub fn resonance_positions(chi: f64, map: RoundTripMap) -> [f64; 2] {
    let m = round_trip_matrix(chi, map);
    let phi = m[1][0].atan2(m[0][0]);
    [-phi, phi]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix_power_populations(chi: f64, tau: usize) -> (f64, f64) {
        // Independent oracle: repeated squaring of the 2x2 matrix.
        let m = round_trip_matrix(chi, RoundTripMap::SecondOrder);
        let mul = |x: [[f64; 2]; 2], y: [[f64; 2]; 2]| {
            let mut z = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    z[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
                }
            }
            z
        };
        let mut acc = [[1.0, 0.0], [0.0, 1.0]];
        let mut base = m;
        let mut k = tau;
        while k > 0 {
            if k & 1 == 1 {
                acc = mul(acc, base);
            }
            base = mul(base, base);
            k >>= 1;
        }
        let (a0, a1) = (acc[0][0], acc[1][0]);
        let p = a0 * a0 + a1 * a1;
        (a0 * a0 / p, a1 * a1 / p)
    }

    #[test]
    fn rabi_example_value() {
        let (_, r11) = rabi_populations(0.05, 10.0);
        assert!((r11 - 1f64.sin().powi(2)).abs() < 1e-12);
        assert!((r11 - 0.7081).abs() < 1e-4);
        let (_, m11) = matrix_power_populations(0.05, 10);
        assert!((m11 - r11).abs() < 2e-3);
    }

    #[test]
    fn exact_rotation_matches_evolution() {
        let chi = 0.07;
        let s = evolve(
            TwoModeState {
                a0: Complex64::new(1.0, 0.0),
                a1: Complex64::new(0.0, 0.0),
            },
            chi,
            RoundTripMap::ExactRotation,
            13,
        );
        let (_, r11) = rabi_populations_exact(chi, 13.0);
        assert!((s.populations().1 - r11).abs() < 1e-12);
        assert!((s.total_power() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn doublet_splitting_value() {
        assert!((doublet_splitting(0.05) - 0.200).abs() < 1e-3);
        let [lo, hi] = resonance_positions(0.05, RoundTripMap::ExactRotation);
        assert!((hi - lo - doublet_splitting(0.05)).abs() < 1e-12);
    }

    #[test]
    fn finesse_round_trip() {
        for f in [3.0, 9.0, 30.0, 138.0, 1000.0] {
            assert!((finesse(reflectivity_for_finesse(f)) - f).abs() < 1e-9 * f);
        }
        assert!((finesse(0.9) - 29.8).abs() < 0.05);
    }

    #[test]
    fn steady_state_solves_the_linear_pair() {
        let p = TwoModeParams::new(0.05, 0.15, 0.3).unwrap();
        let s = steady_state(&p).unwrap();
        let c = Complex64::from_polar(p.round_trip_amplitude(), p.alpha);
        let chi = p.chi;
        let r0 = c * (s.a0 * (1.0 - 2.0 * chi * chi) - 2.0 * chi * s.a1) + p.t - s.a0;
        let r1 = c * (s.a1 * (1.0 - 2.0 * chi * chi) + 2.0 * chi * s.a0) - s.a1;
        assert!(r0.norm() < 1e-12 && r1.norm() < 1e-12);
    }

    #[test]
    fn exact_map_conserves_power() {
        for (t, loss, alpha) in [(0.15, 0.0, 0.1), (0.5, 0.2, -0.7), (0.3, 0.1, 2.0)] {
            let p = TwoModeParams::new(0.05, t, alpha)
                .unwrap()
                .with_excess_loss(loss)
                .unwrap()
                .with_map(RoundTripMap::ExactRotation);
            let s = steady_state(&p).unwrap();
            assert!(power_balance(&p, &s).mismatch().abs() < 1e-10);
        }
    }

    #[test]
    fn second_order_map_balances_to_fourth_order() {
        let p = TwoModeParams::new(0.05, 0.5, 0.2).unwrap();
        let s = steady_state(&p).unwrap();
        let mis = power_balance(&p, &s).mismatch().abs();
        assert!(mis < 50.0 * 0.05f64.powi(4), "mismatch {mis}");
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(TwoModeParams::new(0.0, 0.1, 0.0).is_err());
        assert!(TwoModeParams::new(0.05, 1.0, 0.0).is_err());
        assert!(TwoModeParams::new(0.05, 0.1, f64::NAN).is_err());
    }
}
