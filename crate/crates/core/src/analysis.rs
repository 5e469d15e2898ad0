//! Peak finding, finesse and period estimation on trajectories and spectra.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::series::Series;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    /// Sample index of the maximum.
    pub index: usize,
    /// Interpolated position of the maximum.
    pub location: f64,
    pub height: f64,
    pub prominence: f64,
    /// Full width at half height; `None` when the half-height crossings are
    /// not both found or the peak is not wider than one sample.
    pub fwhm: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
    /// Sample spacing of the sweep.
    pub step: f64,
}

impl PeakSet {
    pub fn locations(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.location).collect()
    }

    /// The two highest peaks, ordered by location.
    pub fn top_two(&self) -> Option<(Peak, Peak)> {
        let mut v = self.peaks.clone();
        v.sort_by(|a, b| b.height.total_cmp(&a.height));
        if v.len() < 2 {
            return None;
        }
        let (a, b) = (v[0], v[1]);
        Some(if a.location < b.location { (a, b) } else { (b, a) })
    }
}

/// Local maxima of `y(x)` whose prominence is at least `rel_prominence` of
/// their height. `x` must be uniformly spaced and increasing.
pub fn find_peaks_in(x: &[f64], y: &[f64], rel_prominence: f64) -> Result<PeakSet> {
    if x.len() != y.len() {
        return Err(Error::Analysis("sweep and channel lengths differ".into()));
    }
    if x.len() < 3 {
        return Err(Error::Analysis("need at least three samples to find peaks".into()));
    }
    let step = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    if !(step > 0.0) {
        return Err(Error::Analysis("sweep must be increasing".into()));
    }
    let n = y.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        if !(y[i] > y[i - 1]) {
            i += 1;
            continue;
        }
        // Walk across a plateau.
        let mut j = i;
        while j + 1 < n && y[j + 1] == y[i] {
            j += 1;
        }
        if j + 1 >= n || y[j + 1] > y[i] {
            i = j + 1;
            continue;
        }
        let k = (i + j) / 2;
        let h = y[k];
        let mut left_min = h;
        let mut l = i;
        while l > 0 {
            l -= 1;
            // Ties count as higher on the left only, so of two equal peaks the
            // right one is measured against the dip between them.
            if y[l] >= h {
                break;
            }
            left_min = left_min.min(y[l]);
        }
        let mut right_min = h;
        let mut r = j;
        while r + 1 < n {
            r += 1;
            if y[r] > h {
                break;
            }
            right_min = right_min.min(y[r]);
        }
        let prominence = h - left_min.max(right_min);
        if h > 0.0 && prominence >= rel_prominence * h {
            // Three-point parabolic vertex for an isolated sample maximum.
            let location = if i == j {
                let den = y[k - 1] - 2.0 * h + y[k + 1];
                x[k] + if den < 0.0 { 0.5 * step * (y[k - 1] - y[k + 1]) / den } else { 0.0 }
            } else {
                0.5 * (x[i] + x[j])
            };
            peaks.push(Peak {
                index: k,
                location,
                height: h,
                prominence,
                fwhm: half_width(x, y, i, j, h, step),
            });
        }
        i = j + 1;
    }
    Ok(PeakSet { peaks, step })
}

fn half_width(x: &[f64], y: &[f64], i: usize, j: usize, h: f64, step: f64) -> Option<f64> {
    let half = 0.5 * h;
    let mut l = i;
    let left = loop {
        if l == 0 || y[l - 1] > h {
            return None;
        }
        l -= 1;
        if y[l] < half {
            let f = (half - y[l]) / (y[l + 1] - y[l]);
            break x[l] + f * (x[l + 1] - x[l]);
        }
    };
    let mut r = j;
    let right = loop {
        if r + 1 >= y.len() || y[r + 1] > h {
            return None;
        }
        r += 1;
        if y[r] < half {
            let f = (y[r - 1] - half) / (y[r - 1] - y[r]);
            break x[r - 1] + f * (x[r] - x[r - 1]);
        }
    };
    let w = right - left;
    (w > step * (1.0 + 1e-9)).then_some(w)
}

/// Peaks of one channel of a spectrum.
pub fn find_peaks(spectrum: &Series, channel: &str, rel_prominence: f64) -> Result<PeakSet> {
    find_peaks_in(&spectrum.sweep(), &spectrum.column(channel)?, rel_prominence)
}

/// Finesse as free spectral range (`2 pi`) over the mean measured FWHM.
pub fn fit_finesse(peaks: &PeakSet) -> Result<f64> {
    let widths: Vec<f64> = peaks.peaks.iter().filter_map(|p| p.fwhm).collect();
    if widths.is_empty() {
        return Err(Error::Analysis(
            "no resolved peak: the linewidth is not wider than the sweep step or peaks overlap".into(),
        ));
    }
    Ok(2.0 * PI * widths.len() as f64 / widths.iter().sum::<f64>())
}

/// Minimise `f` with the Nelder-Mead simplex.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, start: &[f64], scale: &[f64], iters: usize) -> (Vec<f64>, f64) {
    let d = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = (0..=d)
        .map(|k| {
            let mut p = start.to_vec();
            if k > 0 {
                p[k - 1] += scale[k - 1];
            }
            let v = f(&p);
            (p, v)
        })
        .collect();
    for _ in 0..iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[d].1 - simplex[0].1;
        if spread.abs() <= 1e-15 * (1.0 + simplex[0].1.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|i| simplex[..d].iter().map(|s| s.0[i]).sum::<f64>() / d as f64)
            .collect();
        let worst = simplex[d].clone();
        let at = |t: f64| -> Vec<f64> { (0..d).map(|i| centroid[i] + t * (worst.0[i] - centroid[i])).collect() };
        let xr = at(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = at(-2.0);
            let fe = f(&xe);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let xc = if fr < worst.1 { at(-0.5) } else { at(0.5) };
            let fc = f(&xc);
            if fc < worst.1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    for i in 0..d {
                        s.0[i] = best[i] + 0.5 * (s.0[i] - best[i]);
                    }
                    s.1 = f(&s.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Least-squares fit of `A / (1 + (2F/pi)^2 sin^2((x - x0)/2)) + B`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AiryFit {
    pub finesse: f64,
    pub center: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// RMS residual relative to the amplitude.
    pub residual: f64,
}

/// Secondary finesse estimator: fit the Airy transmission lineshape.
pub fn fit_airy_lineshape(x: &[f64], y: &[f64], guess: &Peak) -> Result<AiryFit> {
    let shape = |f: f64, x0: f64, xi: f64| {
        let s = ((xi - x0) / 2.0).sin();
        1.0 / (1.0 + (2.0 * f / PI).powi(2) * s * s)
    };
    let linear = |f: f64, x0: f64| -> (f64, f64, f64) {
        // Solve for A, B in closed form.
        let (mut s1, mut sg, mut sgg, mut sy, mut sgy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&xi, &yi) in x.iter().zip(y) {
            let g = shape(f, x0, xi);
            s1 += 1.0;
            sg += g;
            sgg += g * g;
            sy += yi;
            sgy += g * yi;
        }
        let det = s1 * sgg - sg * sg;
        let a = (s1 * sgy - sg * sy) / det;
        let b = (sy - a * sg) / s1;
        let mut r = 0.0;
        for (&xi, &yi) in x.iter().zip(y) {
            r += (a * shape(f, x0, xi) + b - yi).powi(2);
        }
        (a, b, r)
    };
    let f0 = guess.fwhm.map(|w| 2.0 * PI / w).unwrap_or(10.0);
    let cost = |p: &[f64]| linear(p[0].exp(), p[1]).2;
    let (best, _) = nelder_mead(cost, &[f0.ln(), guess.location], &[0.2, 0.1 * 2.0 * PI / f0], 2000);
    let (f, x0) = (best[0].exp(), best[1]);
    let (a, b, r) = linear(f, x0);
    if !(f.is_finite() && a.is_finite()) {
        return Err(Error::Analysis("Airy lineshape fit diverged".into()));
    }
    Ok(AiryFit {
        finesse: f,
        center: x0,
        amplitude: a,
        offset: b,
        residual: (r / x.len() as f64).sqrt() / a.abs(),
    })
}

/// Fit of `rho11 = sin^2(theta tau + phase)` to a lossless trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RabiFit {
    pub theta: f64,
    pub phase: f64,
    pub rms: f64,
}

impl RabiFit {
    /// Period of `rho11`, `pi / theta` round trips.
    pub fn period(&self) -> f64 {
        PI / self.theta
    }
}

pub fn fit_rabi(tau: &[f64], rho11: &[f64]) -> Result<RabiFit> {
    if tau.len() < 4 || tau.len() != rho11.len() {
        return Err(Error::Analysis("need at least four (tau, rho11) samples".into()));
    }
    let cost = |p: &[f64]| -> f64 {
        tau.iter()
            .zip(rho11)
            .map(|(&t, &r)| ((p[0] * t + p[1]).sin().powi(2) - r).powi(2))
            .sum()
    };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let (nt, np) = (3000, 64);
    for i in 1..=nt {
        let th = 0.5 * PI * i as f64 / nt as f64;
        for j in 0..np {
            let ph = -0.5 * PI + PI * j as f64 / np as f64;
            let c = cost(&[th, ph]);
            if c < best.0 {
                best = (c, th, ph);
            }
        }
    }
    let (p, c) = nelder_mead(cost, &[best.1, best.2], &[0.5 * PI / nt as f64, PI / np as f64], 4000);
    let rms = (c / tau.len() as f64).sqrt();
    if rms > 0.1 {
        return Err(Error::Analysis(format!(
            "trajectory does not follow sin^2(theta tau + phase) (rms {rms:.3})"
        )));
    }
    Ok(RabiFit {
        theta: p[0],
        phase: p[1],
        rms,
    })
}

/// Search timescale extracted from a pulsed trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SearchPeriod {
    /// Power is conserved: `rho11` oscillates with this period.
    Lossless { period: f64, fit: RabiFit },
    /// Power decays: round trip at which the solution power peaks.
    Lossy { peak_round_trip: f64, peak_power: f64 },
}

impl SearchPeriod {
    pub fn value(&self) -> f64 {
        match *self {
            SearchPeriod::Lossless { period, .. } => period,
            SearchPeriod::Lossy { peak_round_trip, .. } => peak_round_trip,
        }
    }
}

/// Lossless runs: fitted oscillation period of `rho11`. Lossy runs: round
/// trip of the largest solution-disc power.
pub fn search_period(trajectory: &Series) -> Result<SearchPeriod> {
    let tau = trajectory.sweep();
    let power = trajectory.column("total_power")?;
    if power.is_empty() {
        return Err(Error::Analysis("empty trajectory".into()));
    }
    let p0 = power[0];
    let lossless = power.iter().all(|p| ((p - p0) / p0).abs() < 1e-6);
    if lossless {
        let fit = fit_rabi(&tau, &trajectory.column("rho11")?)?;
        Ok(SearchPeriod::Lossless {
            period: fit.period(),
            fit,
        })
    } else {
        let sol = trajectory.column("solution_power")?;
        let k = argmax(&sol);
        Ok(SearchPeriod::Lossy {
            peak_round_trip: tau[k],
            peak_power: sol[k],
        })
    }
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

/// Ratio of mean intensities in two weighted regions of an image.
pub fn image_contrast(intensity: &ndarray::Array2<f64>, solution: &[(usize, f64)], background: &[(usize, f64)]) -> f64 {
    let flat = intensity.as_slice().expect("standard layout");
    let mean = |w: &[(usize, f64)]| {
        let (s, a) = w.iter().fold((0.0, 0.0), |(s, a), &(i, v)| (s + v * flat[i], a + v));
        s / a
    };
    mean(solution) / mean(background)
}

/// Enhancement of a solution probe over a reference probe, integrated over
/// one free spectral range (white light) and at the solution resonance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WhiteLightSummary {
    pub integrated_enhancement: f64,
    pub resonant_enhancement: f64,
    /// `integrated / resonant`.
    pub ratio: f64,
}

pub fn white_light_summary(spectrum: &Series, solution: &str, reference: &str) -> Result<WhiteLightSummary> {
    let a = spectrum.sweep();
    if a.len() < 3 {
        return Err(Error::Analysis("spectrum too short".into()));
    }
    let step = (a[a.len() - 1] - a[0]) / (a.len() - 1) as f64;
    let span = step * a.len() as f64;
    if span < 2.0 * PI * (1.0 - 1e-6) {
        return Err(Error::Analysis(format!(
            "white-light integration needs one free spectral range; spectrum spans {span:.4} rad"
        )));
    }
    let s = spectrum.column(solution)?;
    let r = spectrum.column(reference)?;
    // Integrate over exactly one period from the start.
    let m = ((2.0 * PI / step).round() as usize).min(a.len());
    let si: f64 = s[..m].iter().sum();
    let ri: f64 = r[..m].iter().sum();
    let k = argmax(&s[..m]);
    let integrated = si / ri;
    let resonant = s[k] / r[k];
    Ok(WhiteLightSummary {
        integrated_enhancement: integrated,
        resonant_enhancement: resonant,
        ratio: integrated / resonant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::twomode::finesse;

    fn airy(r: f64, alpha: f64) -> f64 {
        (1.0 - r).powi(2) / (1.0 + r * r - 2.0 * r * alpha.cos())
    }

    #[test]
    fn finesse_of_synthetic_airy_transmission() {
        for r in [0.5, 0.7, 0.85, 0.95, 0.99] {
            let m = 20_000;
            let x: Vec<f64> = (0..m).map(|k| -PI + 2.0 * PI * (k as f64 + 0.5) / m as f64).collect();
            let y: Vec<f64> = x.iter().map(|&a| airy(r, a)).collect();
            let p = find_peaks_in(&x, &y, 0.5).unwrap();
            assert_eq!(p.peaks.len(), 1);
            let f = fit_finesse(&p).unwrap();
            let expect = finesse(r);
            assert!((f / expect - 1.0).abs() < 0.05, "R = {r}: {f} vs {expect}");
            let fit = fit_airy_lineshape(&x, &y, &p.peaks[0]).unwrap();
            assert!(fit.residual < 1e-6, "R = {r}: residual {}", fit.residual);
        }
    }

    #[test]
    fn comb_over_two_free_spectral_ranges() {
        let step = 2.0 * PI / 400.0;
        let x: Vec<f64> = (0..800).map(|k| -PI + 0.3 + k as f64 * step).collect();
        let y: Vec<f64> = x.iter().map(|&a| airy(0.9, a)).collect();
        let p = find_peaks_in(&x, &y, 0.5).unwrap();
        assert_eq!(p.peaks.len(), 2);
        let d = p.peaks[1].location - p.peaks[0].location;
        assert!((d - 2.0 * PI).abs() <= step + 1e-12);
    }

    #[test]
    fn delta_peak_is_unresolved() {
        let x: Vec<f64> = (0..11).map(|k| k as f64).collect();
        let mut y = vec![0.0; 11];
        y[5] = 1.0;
        let p = find_peaks_in(&x, &y, 0.5).unwrap();
        assert_eq!(p.peaks.len(), 1);
        assert!(p.peaks[0].fwhm.is_none());
        assert!(fit_finesse(&p).is_err());
    }

    #[test]
    fn prominence_filters_shoulders() {
        let x: Vec<f64> = (0..7).map(|k| k as f64).collect();
        let y = vec![0.0, 1.0, 0.9, 0.95, 0.5, 0.2, 0.0];
        let p = find_peaks_in(&x, &y, 0.5).unwrap();
        assert_eq!(p.peaks.len(), 1);
        let p = find_peaks_in(&x, &y, 0.01).unwrap();
        assert_eq!(p.peaks.len(), 2);
    }

    #[test]
    fn equal_twin_peaks_are_split_by_their_dip() {
        let x: Vec<f64> = (0..7).map(|k| k as f64).collect();
        let shallow = vec![0.0, 0.5, 1.0, 0.9, 1.0, 0.5, 0.0];
        let p = find_peaks_in(&x, &shallow, 0.5).unwrap();
        assert_eq!(p.peaks.len(), 1);
        assert_eq!(p.peaks[0].index, 2);
        let deep = vec![0.0, 0.5, 1.0, 0.3, 1.0, 0.5, 0.0];
        assert_eq!(find_peaks_in(&x, &deep, 0.5).unwrap().peaks.len(), 2);
    }

    #[test]
    fn rabi_fit_recovers_period() {
        let theta = 0.1001;
        let tau: Vec<f64> = (1..=40).map(|t| t as f64).collect();
        let r: Vec<f64> = tau.iter().map(|t| (theta * (t - 0.5)).sin().powi(2)).collect();
        let fit = fit_rabi(&tau, &r).unwrap();
        assert!((fit.theta - theta).abs() < 1e-8);
        assert!((fit.phase + 0.5 * theta).abs() < 1e-7);
    }

    #[test]
    fn search_period_switches_on_loss() {
        let mut s = Series::new(["tau", "total_power", "solution_power", "rho11"]);
        for t in 1..=10 {
            let t = t as f64;
            s.push(vec![t, 0.5f64.powf(t), t * 0.5f64.powf(t), 0.0]);
        }
        match search_period(&s).unwrap() {
            SearchPeriod::Lossy { peak_round_trip, .. } => assert!(peak_round_trip == 1.0 || peak_round_trip == 2.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn white_light_needs_full_range() {
        let mut s = Series::new(["alpha", "on", "off"]);
        for k in 0..10 {
            s.push(vec![k as f64 * 0.1, 1.0, 1.0]);
        }
        assert!(white_light_summary(&s, "on", "off").is_err());
    }
}
