//! Sampled complex fields on the image and focal planes of the cavity.
//!
//! Amplitudes are stored in physical units: the power of a field is
//! `sum |a|^2 dx^2`. Arrays are indexed `[row, col] = [y, x]` and pixel
//! `(n/2, n/2)` sits on the optical axis.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First positive zero of J1; the Airy dark ring sits at `rho = 3.8317`.
pub const BESSEL_J1_FIRST_ZERO: f64 = 3.831_705_970_207_512_3;

/// Smallest allowed spot radius in pixels, in either plane.
pub const MIN_SPOT_PIXELS: f64 = 4.0;

/// Bessel function of the first kind, order one.
pub fn bessel_j1(x: f64) -> f64 {
    libm::j1(x)
}

/// Airy amplitude `2 J1(rho) / rho`, continuous through the axis.
pub fn airy_amplitude(rho: f64) -> f64 {
    if rho.abs() < 1e-8 {
        1.0 - rho * rho / 8.0
    } else {
        2.0 * bessel_j1(rho) / rho
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Image,
    Focal,
}

impl Plane {
    /// The plane reached by one lens transform.
    pub fn conjugate(self) -> Plane {
        match self {
            Plane::Image => Plane::Focal,
            Plane::Focal => Plane::Image,
        }
    }
}

/// Optical parameters of the beam and lens.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamParams {
    pub wavelength: f64,
    pub focal_length: f64,
    /// Radius `r_s` of the focal spot (and of the oracle spots).
    pub spot_radius: f64,
}

impl BeamParams {
    pub fn new(wavelength: f64, focal_length: f64, spot_radius: f64) -> Result<Self> {
        for (name, v) in [
            ("beam.wavelength", wavelength),
            ("beam.focal_length", focal_length),
            ("beam.spot_radius", spot_radius),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("must be positive and finite, got {v}")));
            }
        }
        let beam = BeamParams {
            wavelength,
            focal_length,
            spot_radius,
        };
        if beam.channels() <= 1.0 {
            return Err(Error::config(
                "beam.spot_radius",
                format!(
                    "channel count N = {:.4} must exceed 1 (spot too large for this lens)",
                    beam.channels()
                ),
            ));
        }
        Ok(beam)
    }

    /// Beam whose spot radius yields `channels` resolvable spots.
    pub fn from_channels(wavelength: f64, focal_length: f64, channels: f64) -> Result<Self> {
        if !(channels.is_finite() && channels > 1.0) {
            return Err(Error::config("beam.channels", format!("must exceed 1, got {channels}")));
        }
        let k = 2.0 * PI / wavelength;
        let spot_radius = (2.0 * focal_length / (k * channels.sqrt())).sqrt();
        BeamParams::new(wavelength, focal_length, spot_radius)
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Number of spot-sized channels in the Airy beam, `N = 4 f^2 / (k^2 r_s^4)`.
    pub fn channels(&self) -> f64 {
        let k = self.wavenumber();
        4.0 * self.focal_length.powi(2) / (k * k * self.spot_radius.powi(4))
    }

    /// Nominal overlap of the input beam with one oracle spot, `1/sqrt(N)`.
    pub fn chi(&self) -> f64 {
        self.wavenumber() * self.spot_radius.powi(2) / (2.0 * self.focal_length)
    }

    /// Radius of the first dark ring of the input Airy beam.
    pub fn dark_ring_radius(&self) -> f64 {
        BESSEL_J1_FIRST_ZERO * self.focal_length / (self.wavenumber() * self.spot_radius)
    }

    /// Dimensionless Airy radius `rho = k r_s r / f`.
    pub fn normalized_radius(&self, r: f64) -> f64 {
        self.wavenumber() * self.spot_radius * r / self.focal_length
    }
}

/// Square sampling grid: `n x n` pixels of pitch `dx` centred on the axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    n: usize,
    dx: f64,
}

/// Number of integer lattice points inside a disc of radius `s` about the origin.
pub fn lattice_disc_count(s: f64) -> usize {
    let r = s.floor() as i64;
    let s2 = s * s;
    let mut count = 0usize;
    for i in -r..=r {
        let rem = s2 - (i * i) as f64;
        if rem >= 0.0 {
            count += 2 * rem.sqrt().floor() as usize + 1;
        }
    }
    count
}

impl GridSpec {
    pub fn new(n: usize, dx: f64) -> Result<Self> {
        if n < 64 || n % 2 != 0 {
            return Err(Error::config("grid.n", format!("must be even and >= 64, got {n}")));
        }
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::config("grid.dx", format!("must be positive and finite, got {dx}")));
        }
        Ok(GridSpec { n, dx })
    }

    /// Pick the image-plane pitch for an `n`-point grid.
    ///
    /// The spot radius in pixels is coupled between the planes,
    /// `s_image * s_focal = n chi / pi`. Within the band allowed by the
    /// 4-pixel minimum and the guard band (dark ring inside `L/4`), the pitch
    /// is chosen so that the pixel-disc counts reproduce the nominal overlap,
    /// `sqrt(|D_i| |D_f|) / n ~ chi`, as closely as possible.
    pub fn auto(beam: &BeamParams, n: usize) -> Result<Self> {
        GridSpec::new(n, 1.0)?;
        let chi = beam.chi();
        let nf = n as f64;
        let product = nf * chi / PI;
        let guard = nf * chi / (2.0 * BESSEL_J1_FIRST_ZERO);
        let lo = MIN_SPOT_PIXELS;
        let hi = (product / MIN_SPOT_PIXELS).min(guard * (1.0 - 1e-9));
        if !(hi > lo) {
            return Err(Error::config(
                "grid.n",
                format!(
                    "no pixel pitch resolves the spot with >= {MIN_SPOT_PIXELS} px in both planes \
                     while keeping the dark ring inside L/4 (N = {:.1}); increase n",
                    beam.channels()
                ),
            ));
        }
        let steps = 4000;
        let mut best: Option<(f64, f64, f64)> = None;
        for j in 0..=steps {
            let s_i = lo + (hi - lo) * j as f64 / steps as f64;
            let s_f = product / s_i;
            let count = (lattice_disc_count(s_i) * lattice_disc_count(s_f)) as f64;
            let err = (count.sqrt() / (nf * chi) - 1.0).abs();
            let balance = (s_i / s_f).ln().abs();
            let better = match best {
                None => true,
                Some((e, b, _)) => err < e - 1e-6 || ((err - e).abs() <= 1e-6 && balance < b),
            };
            if better {
                best = Some((err, balance, s_i));
            }
        }
        let (_, _, s_i) = best.expect("non-empty scan");
        GridSpec::new(n, beam.spot_radius / s_i)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Side length `L = n dx`.
    pub fn extent(&self) -> f64 {
        self.n as f64 * self.dx
    }

    /// Grid of the conjugate plane under the lens: `dx' = lambda f / (n dx)`.
    pub fn conjugate(&self, beam: &BeamParams) -> GridSpec {
        GridSpec {
            n: self.n,
            dx: beam.wavelength * beam.focal_length / (self.n as f64 * self.dx),
        }
    }

    /// Same size and pitch up to rounding (a grid transformed forth and back
    /// differs from the original in the last bits).
    pub fn matches(&self, other: &GridSpec) -> bool {
        self.n == other.n && ((self.dx - other.dx) / self.dx).abs() < 1e-9
    }

    /// Physical coordinate of pixel index `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.dx
    }

    /// Signed pixel offset from the axis of the pixel centre nearest to `x`.
    pub fn snap(&self, x: f64) -> i64 {
        (x / self.dx).round() as i64
    }

    /// Check the sampling rules for a beam imaged on this grid.
    pub fn check_sampling(&self, beam: &BeamParams) -> Result<()> {
        let focal = self.conjugate(beam);
        let s_i = beam.spot_radius / self.dx;
        let s_f = beam.spot_radius / focal.dx;
        let tol = 1e-9;
        if s_i < MIN_SPOT_PIXELS - tol {
            return Err(Error::config(
                "grid.dx",
                format!("spot radius is {s_i:.3} px in the image plane; need >= {MIN_SPOT_PIXELS}"),
            ));
        }
        if s_f < MIN_SPOT_PIXELS - tol {
            return Err(Error::config(
                "grid.dx",
                format!("spot radius is {s_f:.3} px in the focal plane; need >= {MIN_SPOT_PIXELS}"),
            ));
        }
        if beam.dark_ring_radius() >= self.extent() / 4.0 {
            return Err(Error::config(
                "grid.dx",
                format!(
                    "dark ring radius {:.4e} m is not inside L/4 = {:.4e} m",
                    beam.dark_ring_radius(),
                    self.extent() / 4.0
                ),
            ));
        }
        Ok(())
    }
}

/// Disc-shaped region of a plane (oracle spot, aperture, monitored area).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Disc {
    pub fn new(center: [f64; 2], radius: f64) -> Self {
        Disc { center, radius }
    }
}

fn snapped_center(grid: &GridSpec, center: [f64; 2]) -> Result<(i64, i64)> {
    let half = (grid.n / 2) as i64;
    let cx = grid.snap(center[0]);
    let cy = grid.snap(center[1]);
    if cx < -half || cx >= half || cy < -half || cy >= half || !center.iter().all(|c| c.is_finite()) {
        return Err(Error::config(
            "spot.center",
            format!("({:.4e}, {:.4e}) m lies outside the grid", center[0], center[1]),
        ));
    }
    Ok((cx, cy))
}

/// Flat indices of pixels whose centres lie within the disc.
///
/// The disc centre is snapped to the nearest pixel centre first, so every
/// spot of a given radius covers the same pixel pattern.
pub fn pixel_disc(grid: &GridSpec, disc: &Disc) -> Result<Vec<usize>> {
    let (cx, cy) = snapped_center(grid, disc.center)?;
    let n = grid.n as i64;
    let half = n / 2;
    let s = disc.radius / grid.dx;
    let r = s.floor() as i64;
    let mut out = Vec::new();
    for j in -r..=r {
        for i in -r..=r {
            if ((i * i + j * j) as f64) > s * s {
                continue;
            }
            let (row, col) = (cy + j + half, cx + i + half);
            if row < 0 || row >= n || col < 0 || col >= n {
                return Err(Error::config(
                    "spot.radius",
                    "disc extends past the edge of the grid".to_string(),
                ));
            }
            out.push((row * n + col) as usize);
        }
    }
    Ok(out)
}

/// Fractional pixel coverage of a disc, from `ss x ss` supersampling.
///
/// Used for intensity integration (probe apertures, monitored discs). Pixels
/// falling off the grid are dropped.
pub fn disc_weights(grid: &GridSpec, disc: &Disc, ss: usize) -> Result<Vec<(usize, f64)>> {
    let (cx, cy) = snapped_center(grid, disc.center)?;
    let n = grid.n as i64;
    let half = n / 2;
    let s = disc.radius / grid.dx;
    let r = s.ceil() as i64 + 1;
    let ss = ss.max(1);
    let inv = 1.0 / ss as f64;
    let mut out = Vec::new();
    for j in -r..=r {
        for i in -r..=r {
            let (row, col) = (cy + j + half, cx + i + half);
            if row < 0 || row >= n || col < 0 || col >= n {
                continue;
            }
            let mut hits = 0usize;
            for a in 0..ss {
                let y = j as f64 - 0.5 + (a as f64 + 0.5) * inv;
                for b in 0..ss {
                    let x = i as f64 - 0.5 + (b as f64 + 0.5) * inv;
                    if x * x + y * y <= s * s {
                        hits += 1;
                    }
                }
            }
            if hits > 0 {
                out.push(((row * n + col) as usize, hits as f64 / (ss * ss) as f64));
            }
        }
    }
    Ok(out)
}

/// Complex amplitude on one plane of the cavity.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: GridSpec,
    plane: Plane,
    amps: Array2<Complex64>,
}

impl Field {
    pub fn new(grid: GridSpec, plane: Plane, amps: Array2<Complex64>) -> Result<Self> {
        if amps.dim() != (grid.n, grid.n) {
            return Err(Error::GridMismatch(format!(
                "amplitude array is {:?}, grid is {}x{}",
                amps.dim(),
                grid.n,
                grid.n
            )));
        }
        Ok(Field { grid, plane, amps })
    }

    pub fn zeros(grid: GridSpec, plane: Plane) -> Self {
        Field {
            grid,
            plane,
            amps: Array2::zeros((grid.n, grid.n)),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn plane(&self) -> Plane {
        self.plane
    }

    pub fn amps(&self) -> &Array2<Complex64> {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.amps
    }

    pub fn into_parts(self) -> (GridSpec, Plane, Array2<Complex64>) {
        (self.grid, self.plane, self.amps)
    }

    pub fn power(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx * self.grid.dx
    }

    pub fn intensity(&self) -> Array2<f64> {
        self.amps.mapv(|a| a.norm_sqr())
    }

    /// Power inside a region given as supersampled pixel weights.
    pub fn weighted_power(&self, weights: &[(usize, f64)]) -> f64 {
        let flat = self.amps.as_slice().expect("standard layout");
        weights.iter().map(|&(i, w)| w * flat[i].norm_sqr()).sum::<f64>() * self.grid.dx * self.grid.dx
    }

    /// Copy scaled to unit power.
    pub fn normalized(&self) -> Result<Field> {
        let p = self.power();
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::config("field", format!("cannot normalise a field of power {p}")));
        }
        let mut out = self.clone();
        out.amps.mapv_inplace(|a| a / p.sqrt());
        Ok(out)
    }

    pub fn scale(&mut self, s: Complex64) {
        self.amps.mapv_inplace(|a| a * s);
    }

    fn check_compatible(&self, other: &Field) -> Result<()> {
        if self.plane != other.plane {
            return Err(Error::PlaneMismatch {
                expected: self.plane,
                found: other.plane,
            });
        }
        if !self.grid.matches(&other.grid) {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        Ok(())
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: Complex64, other: &Field) -> Result<Field> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.amps.zip_mut_with(&other.amps, |a, b| *a += s * b);
        Ok(out)
    }
}

/// Inner product `<a, b> = sum conj(a) b dx^2`.
pub fn overlap(a: &Field, b: &Field) -> Result<Complex64> {
    a.check_compatible(b)?;
    let s: Complex64 = a.amps.iter().zip(b.amps.iter()).map(|(x, y)| x.conj() * y).sum();
    Ok(s * a.grid.dx * a.grid.dx)
}

/// Split the input beam into the solution direction and its orthogonal partner.
///
/// Returns `psi0_tilde = (psi0 - chi psi1) / sqrt(1 - |chi|^2)` with
/// `chi = <psi1, psi0>`, both inputs taken at unit power. For the usual
/// real, centred fields `chi` is real.
pub fn orthonormalize(psi0: &Field, psi1: &Field) -> Result<(Field, Complex64)> {
    let p0 = psi0.normalized()?;
    let p1 = psi1.normalized()?;
    let chi = overlap(&p1, &p0)?;
    let rest = 1.0 - chi.norm_sqr();
    if rest < 1e-12 {
        return Err(Error::DegenerateOverlap { overlap: chi.norm() });
    }
    let mut tilde = p0.add_scaled(-chi, &p1)?;
    tilde.scale(Complex64::new(1.0 / rest.sqrt(), 0.0));
    Ok((tilde, chi))
}

fn radial_field(grid: &GridSpec, plane: Plane, f: impl Fn(f64) -> f64) -> Field {
    let n = grid.n;
    let amps = Array2::from_shape_fn((n, n), |(r, c)| {
        let x = grid.coord(c);
        let y = grid.coord(r);
        Complex64::new(f((x * x + y * y).sqrt()), 0.0)
    });
    Field {
        grid: *grid,
        plane,
        amps,
    }
}

/// Sampled Airy beam `2 J1(rho)/rho`, the lens image of a flat disc of radius `r_s`.
///
/// The amplitude is signed (alternate rings carry opposite sign), unit power.
pub fn make_airy_input(grid: &GridSpec, beam: &BeamParams) -> Result<Field> {
    grid.check_sampling(beam)?;
    radial_field(grid, Plane::Image, |r| airy_amplitude(beam.normalized_radius(r))).normalized()
}

/// Gaussian input `exp(-r^2 / w^2)` at unit power.
pub fn make_gaussian_input(grid: &GridSpec, beam: &BeamParams, waist: f64) -> Result<Field> {
    grid.check_sampling(beam)?;
    if !(waist.is_finite() && waist > 0.0) {
        return Err(Error::config("beam.waist", format!("must be positive, got {waist}")));
    }
    if waist > grid.extent() / 4.0 {
        return Err(Error::config(
            "beam.waist",
            format!("waist {waist:.3e} m does not fit inside L/4 = {:.3e} m", grid.extent() / 4.0),
        ));
    }
    radial_field(grid, Plane::Image, |r| (-(r * r) / (waist * waist)).exp()).normalized()
}

/// Uniform unit-power disc on the given plane (pixel-centre mask).
pub fn make_disc_mode(grid: &GridSpec, plane: Plane, disc: &Disc) -> Result<Field> {
    let idx = pixel_disc(grid, disc)?;
    if idx.is_empty() {
        return Err(Error::config("spot.radius", "disc contains no pixel centre"));
    }
    let mut f = Field::zeros(*grid, plane);
    let amp = 1.0 / ((idx.len() as f64).sqrt() * grid.dx);
    let flat = f.amps.as_slice_mut().expect("standard layout");
    for i in idx {
        flat[i] = Complex64::new(amp, 0.0);
    }
    Ok(f)
}

/// Image-plane solution mode: flat disc of the given radius about `center`.
pub fn make_spot_mode(grid: &GridSpec, radius: f64, center: [f64; 2]) -> Result<Field> {
    let quarter = grid.extent() / 4.0;
    if center[0].abs() + radius > quarter || center[1].abs() + radius > quarter {
        return Err(Error::config(
            "oracle.spots",
            format!(
                "spot at ({:.3e}, {:.3e}) m with radius {radius:.3e} m is not inside the central L/2 region",
                center[0], center[1]
            ),
        ));
    }
    make_disc_mode(grid, Plane::Image, &Disc::new(center, radius))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_beam() -> BeamParams {
        BeamParams::from_channels(656e-9, 0.34, 400.0).unwrap()
    }

    /// J1 from its integral representation, midpoint rule.
    fn j1_integral(x: f64) -> f64 {
        let m = 20_000;
        let h = PI / m as f64;
        (0..m)
            .map(|i| {
                let t = (i as f64 + 0.5) * h;
                (t - x * t.sin()).cos()
            })
            .sum::<f64>()
            * h
            / PI
    }

    #[test]
    fn bessel_matches_integral_form() {
        for &x in &[0.1, 1.0, 1.8412, 3.0, BESSEL_J1_FIRST_ZERO, 7.0, 12.5] {
            assert!((bessel_j1(x) - j1_integral(x)).abs() < 1e-9, "x = {x}");
        }
        assert!(bessel_j1(BESSEL_J1_FIRST_ZERO).abs() < 1e-12);
    }

    #[test]
    fn channel_count_round_trips() {
        let b = paper_beam();
        assert!((b.channels() - 400.0).abs() < 1e-9);
        assert!((b.chi() - 0.05).abs() < 1e-12);
        let d = b.dark_ring_radius();
        assert!((b.normalized_radius(d) - BESSEL_J1_FIRST_ZERO).abs() < 1e-12);
    }

    #[test]
    fn lab_geometry_channel_count() {
        // 100 um diameter spots behind a 34 cm lens at 656 nm.
        let b = BeamParams::new(656e-9, 0.34, 50e-6).unwrap();
        assert!((b.channels() - 806.0).abs() < 2.0, "N = {}", b.channels());
    }

    #[test]
    fn lattice_count_small_radii() {
        assert_eq!(lattice_disc_count(0.5), 1);
        assert_eq!(lattice_disc_count(1.0), 5);
        assert_eq!(lattice_disc_count(2.0), 13);
        // Compare against brute force.
        for k in 0..40 {
            let s = 0.3 + 0.37 * k as f64;
            let r = s.ceil() as i64;
            let brute = (-r..=r)
                .flat_map(|i| (-r..=r).map(move |j| (i, j)))
                .filter(|&(i, j)| ((i * i + j * j) as f64) <= s * s)
                .count();
            assert_eq!(lattice_disc_count(s), brute);
        }
    }

    #[test]
    fn auto_pitch_satisfies_sampling() {
        let b = paper_beam();
        let g = GridSpec::auto(&b, 2048).unwrap();
        g.check_sampling(&b).unwrap();
        let s_i = b.spot_radius / g.dx();
        let s_f = b.spot_radius / g.conjugate(&b).dx();
        let count = (lattice_disc_count(s_i) * lattice_disc_count(s_f)) as f64;
        assert!((count.sqrt() / 2048.0 / b.chi() - 1.0).abs() < 0.005);
    }

    #[test]
    fn auto_pitch_rejects_undersized_grid() {
        let b = paper_beam();
        assert!(matches!(GridSpec::auto(&b, 256), Err(Error::Config { .. })));
    }

    #[test]
    fn sampling_violations_are_config_errors() {
        let b = paper_beam();
        let g = GridSpec::new(1024, b.spot_radius / 2.0).unwrap();
        assert!(matches!(g.check_sampling(&b), Err(Error::Config { .. })));
        assert!(GridSpec::new(1023, 1e-5).is_err());
        assert!(GridSpec::new(1024, -1.0).is_err());
    }

    #[test]
    fn spot_mode_is_normalized_and_snapped() {
        let b = paper_beam();
        let g = GridSpec::auto(&b, 1024).unwrap_or(GridSpec::new(1024, b.spot_radius / 5.0).unwrap());
        let a = make_spot_mode(&g, b.spot_radius, [0.3 * g.dx(), -0.2 * g.dx()]).unwrap();
        let c = make_spot_mode(&g, b.spot_radius, [0.0, 0.0]).unwrap();
        assert!((a.power() - 1.0).abs() < 1e-12);
        assert_eq!(a, c);
        assert!(make_spot_mode(&g, b.spot_radius, [g.extent(), 0.0]).is_err());
    }

    #[test]
    fn orthonormalize_removes_solution_component() {
        let b = paper_beam();
        let g = GridSpec::auto(&b, 2048).unwrap();
        let psi0 = make_airy_input(&g, &b).unwrap();
        let psi1 = make_spot_mode(&g, b.spot_radius, [0.0, 0.0]).unwrap();
        let (tilde, chi) = orthonormalize(&psi0, &psi1).unwrap();
        assert!(overlap(&psi1, &tilde).unwrap().norm() < 1e-12);
        assert!((tilde.power() - 1.0).abs() < 1e-12);
        assert!(chi.im.abs() < 1e-14);
        assert!((chi.re - 0.05).abs() < 0.003, "chi = {chi}");
        assert!(matches!(orthonormalize(&psi1, &psi1), Err(Error::DegenerateOverlap { .. })));
    }

    #[test]
    fn overlap_rejects_plane_mismatch() {
        let g = GridSpec::new(64, 1e-5).unwrap();
        let a = Field::zeros(g, Plane::Image);
        let b = Field::zeros(g, Plane::Focal);
        assert!(matches!(overlap(&a, &b), Err(Error::PlaneMismatch { .. })));
    }

    #[test]
    fn disc_weights_integrate_area() {
        let g = GridSpec::new(256, 1.0).unwrap();
        let w = disc_weights(&g, &Disc::new([0.0, 0.0], 10.0), 8).unwrap();
        let area: f64 = w.iter().map(|&(_, v)| v).sum();
        assert!((area / (PI * 100.0) - 1.0).abs() < 0.01);
    }
}
