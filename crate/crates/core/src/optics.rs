//! Lens transform, phase plates, mirror loss and the Grover round trip.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{make_disc_mode, pixel_disc, BeamParams, Disc, Field, GridSpec, Plane};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Image plane to focal plane.
    Forward,
    /// Focal plane back to the image plane.
    Inverse,
}

/// Centred, unitary 2-D DFT sized for one grid.
///
/// The kernel is `exp(-+2 pi i p.q / n) / n` with `p`, `q` signed pixel
/// offsets from the axis. The centring is folded into a checkerboard sign
/// before and after a plain FFT, which is exact for even `n`.
#[derive(Clone)]
pub struct LensTransform {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for LensTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LensTransform").field("n", &self.n).finish()
    }
}

fn transpose_square(a: &mut [Complex64], n: usize) {
    const B: usize = 32;
    for bi in (0..n).step_by(B) {
        for bj in (bi..n).step_by(B) {
            for i in bi..(bi + B).min(n) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + B).min(n) {
                    a.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

fn checkerboard(a: &mut [Complex64], n: usize, scale: f64) {
    for (r, row) in a.chunks_mut(n).enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            let s = if (r + c) % 2 == 0 { scale } else { -scale };
            *v *= s;
        }
    }
}

impl LensTransform {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        LensTransform {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Unitary centred DFT of an `n x n` pixel array, in place.
    pub fn transform_pixels(&self, a: &mut Array2<Complex64>, dir: Direction) {
        let n = self.n;
        assert_eq!(a.dim(), (n, n), "pixel array does not match transform size");
        let fft = match dir {
            Direction::Forward => &self.fwd,
            Direction::Inverse => &self.inv,
        };
        let data = a.as_slice_mut().expect("standard layout");
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        checkerboard(data, n, 1.0);
        fft.process_with_scratch(data, &mut scratch);
        transpose_square(data, n);
        fft.process_with_scratch(data, &mut scratch);
        transpose_square(data, n);
        checkerboard(data, n, 1.0 / n as f64);
    }

    /// Physical lens transform of a field; the plane tag flips.
    pub fn apply(&self, field: &Field, beam: &BeamParams, dir: Direction) -> Result<Field> {
        let expected = match dir {
            Direction::Forward => Plane::Image,
            Direction::Inverse => Plane::Focal,
        };
        if field.plane() != expected {
            return Err(Error::PlaneMismatch {
                expected,
                found: field.plane(),
            });
        }
        if field.grid().n() != self.n {
            return Err(Error::GridMismatch(format!(
                "transform is {} points, field grid is {}",
                self.n,
                field.grid().n()
            )));
        }
        let (grid, plane, mut amps) = field.clone().into_parts();
        let out_grid = grid.conjugate(beam);
        self.transform_pixels(&mut amps, dir);
        let s = grid.dx() / out_grid.dx();
        amps.mapv_inplace(|a| a * s);
        Field::new(out_grid, plane.conjugate(), amps)
    }
}

/// One-off physical lens transform (plans a fresh FFT).
pub fn lens_fourier(field: &Field, beam: &BeamParams, dir: Direction) -> Result<Field> {
    LensTransform::new(field.grid().n()).apply(field, beam, dir)
}

/// Etched disc on a phase plate. `phase` is the retardance per pass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spot {
    pub center: [f64; 2],
    pub radius: f64,
    pub phase: f64,
}

/// Pixel-resolved plate, row-major `n x n`, phase per pass in radians.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterMask {
    pub n: usize,
    pub phases: Vec<f64>,
    /// Phase of the unetched background; other pixels form the oracle regions.
    pub background: f64,
}

/// Phase plate in one plane: analytic discs or a raster, never both.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateSpec {
    pub plane: Plane,
    pub spots: Vec<Spot>,
    pub raster: Option<RasterMask>,
    /// Number of passes through the plate per round trip.
    pub passes: u32,
}

fn check_phase(name: &str, phase: f64) -> Result<()> {
    if !(phase.is_finite() && phase > -PI && phase <= PI) {
        return Err(Error::config(name, format!("phase {phase} is outside (-pi, pi]")));
    }
    Ok(())
}

impl PlateSpec {
    pub fn with_spots(plane: Plane, spots: Vec<Spot>, passes: u32) -> Result<Self> {
        let p = PlateSpec {
            plane,
            spots,
            raster: None,
            passes,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_raster(plane: Plane, raster: RasterMask, passes: u32) -> Result<Self> {
        let p = PlateSpec {
            plane,
            spots: Vec::new(),
            raster: Some(raster),
            passes,
        };
        p.validate()?;
        Ok(p)
    }

    /// Plate that does nothing (removed from the cavity).
    pub fn empty(plane: Plane) -> Self {
        PlateSpec {
            plane,
            spots: Vec::new(),
            raster: None,
            passes: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.passes == 0 {
            return Err(Error::config("plate.passes", "must be at least 1"));
        }
        if self.raster.is_some() && !self.spots.is_empty() {
            return Err(Error::config("plate", "analytic spots and a raster mask are mutually exclusive"));
        }
        for s in &self.spots {
            check_phase("plate.spots.phase", s.phase)?;
            if !(s.radius.is_finite() && s.radius > 0.0) {
                return Err(Error::config("plate.spots.radius", format!("must be positive, got {}", s.radius)));
            }
        }
        if let Some(r) = &self.raster {
            if r.phases.len() != r.n * r.n {
                return Err(Error::config("plate.mask", "raster size does not match its declared n"));
            }
            for &p in r.phases.iter().chain(std::iter::once(&r.background)) {
                check_phase("plate.mask", p)?;
            }
        }
        Ok(())
    }

    /// Pixel phase factors for `passes` transits on the given grid.
    pub fn compile_passes(&self, grid: &GridSpec, passes: u32) -> Result<PhaseMask> {
        self.validate()?;
        let mut phases: BTreeMap<usize, f64> = BTreeMap::new();
        for s in &self.spots {
            for i in pixel_disc(grid, &Disc::new(s.center, s.radius))? {
                phases.insert(i, s.phase);
            }
        }
        if let Some(r) = &self.raster {
            if r.n != grid.n() {
                return Err(Error::GridMismatch(format!(
                    "raster mask is {}x{}, grid is {}x{}",
                    r.n,
                    r.n,
                    grid.n(),
                    grid.n()
                )));
            }
            for (i, &p) in r.phases.iter().enumerate() {
                phases.insert(i, p);
            }
        }
        let entries = phases
            .into_iter()
            .filter_map(|(i, p)| {
                let f = Complex64::from_polar(1.0, p * passes as f64);
                ((f - 1.0).norm() > 1e-14).then_some((i, f))
            })
            .collect();
        Ok(PhaseMask {
            plane: self.plane,
            n: grid.n(),
            entries,
        })
    }

    pub fn compile(&self, grid: &GridSpec) -> Result<PhaseMask> {
        self.compile_passes(grid, self.passes)
    }

    /// Oracle regions: the analytic discs, or connected etched areas of a raster
    /// (reported as discs of equal area about their centroids).
    pub fn regions(&self, grid: &GridSpec) -> Result<Vec<Disc>> {
        if let Some(r) = &self.raster {
            return Ok(raster_regions(r, grid));
        }
        Ok(self.spots.iter().map(|s| Disc::new(s.center, s.radius)).collect())
    }
}

fn raster_regions(r: &RasterMask, grid: &GridSpec) -> Vec<Disc> {
    let n = r.n;
    let etched: Vec<bool> = r.phases.iter().map(|&p| (p - r.background).abs() > 1e-12).collect();
    let mut label = vec![usize::MAX; n * n];
    let mut out = Vec::new();
    for start in 0..n * n {
        if !etched[start] || label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut stack = vec![start];
        label[start] = id;
        let (mut sx, mut sy, mut count) = (0.0, 0.0, 0usize);
        while let Some(i) = stack.pop() {
            let (row, col) = (i / n, i % n);
            sx += grid.coord(col);
            sy += grid.coord(row);
            count += 1;
            let mut push = |j: usize| {
                if etched[j] && label[j] == usize::MAX {
                    label[j] = id;
                    stack.push(j);
                }
            };
            if row > 0 {
                push(i - n);
            }
            if row + 1 < n {
                push(i + n);
            }
            if col > 0 {
                push(i - 1);
            }
            if col + 1 < n {
                push(i + 1);
            }
        }
        let c = count as f64;
        out.push(Disc::new([sx / c, sy / c], (c / PI).sqrt() * grid.dx()));
    }
    out
}

/// Compiled plate: sparse list of (flat pixel index, phase factor).
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseMask {
    pub plane: Plane,
    pub n: usize,
    pub entries: Vec<(usize, Complex64)>,
}

impl PhaseMask {
    pub fn apply_pixels(&self, a: &mut Array2<Complex64>) {
        let flat = a.as_slice_mut().expect("standard layout");
        for &(i, f) in &self.entries {
            flat[i] *= f;
        }
    }

    pub fn is_identity(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Apply a plate `passes` times to a field in the matching plane.
pub fn apply_plate(field: &Field, plate: &PlateSpec, passes: u32) -> Result<Field> {
    if field.plane() != plate.plane {
        return Err(Error::PlaneMismatch {
            expected: plate.plane,
            found: field.plane(),
        });
    }
    let mask = plate.compile_passes(field.grid(), passes)?;
    let mut out = field.clone();
    mask.apply_pixels(out.amps_mut());
    Ok(out)
}

/// Mirror reflectivity and extra round-trip loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    /// Power reflectivity `R` of each mirror.
    pub reflectivity: f64,
    /// Extra fractional power loss per round trip (plates, clipping).
    pub excess: f64,
}

impl LossModel {
    pub fn new(reflectivity: f64, excess: f64) -> Result<Self> {
        let m = LossModel { reflectivity, excess };
        m.validate()?;
        Ok(m)
    }

    pub fn lossless() -> Self {
        LossModel {
            reflectivity: 1.0,
            excess: 0.0,
        }
    }

    /// Mirrors and excess loss that give round-trip amplitude `g` and finesse `F`.
    pub fn with_round_trip_amplitude(reflectivity: f64, g: f64) -> Result<Self> {
        let excess = 1.0 - (g / reflectivity).powi(2);
        LossModel::new(reflectivity, excess)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reflectivity > 0.0 && self.reflectivity <= 1.0) {
            return Err(Error::config(
                "loss.reflectivity",
                format!("must lie in (0, 1], got {}", self.reflectivity),
            ));
        }
        if !(self.excess >= 0.0 && self.excess < 1.0) {
            return Err(Error::config("loss.excess", format!("must lie in [0, 1), got {}", self.excess)));
        }
        Ok(())
    }

    /// Input-coupling amplitude `t = sqrt(1 - R)`.
    pub fn coupling(&self) -> f64 {
        (1.0 - self.reflectivity).sqrt()
    }

    /// Round-trip amplitude factor `g = R sqrt(1 - excess)`.
    pub fn round_trip_amplitude(&self) -> f64 {
        self.reflectivity * (1.0 - self.excess).sqrt()
    }

    /// Fractional power lost per round trip, `1 - g^2`.
    pub fn round_trip_power_loss(&self) -> f64 {
        1.0 - self.round_trip_amplitude().powi(2)
    }

    /// Coefficient finesse `pi sqrt(g) / (1 - g)`.
    pub fn finesse(&self) -> f64 {
        let g = self.round_trip_amplitude();
        PI * g.sqrt() / (1.0 - g)
    }
}

/// Precompiled Grover round trip `g Phi0 F^-1 PhiF F` on one grid.
#[derive(Clone, Debug)]
pub struct RoundTrip {
    grid: GridSpec,
    focal_grid: GridSpec,
    transform: LensTransform,
    oracle: PhaseMask,
    focus: PhaseMask,
    gain: f64,
}

impl RoundTrip {
    pub fn new(
        grid: &GridSpec,
        beam: &BeamParams,
        oracle: &PlateSpec,
        focus: &PlateSpec,
        loss: &LossModel,
    ) -> Result<Self> {
        if oracle.plane != Plane::Image {
            return Err(Error::PlaneMismatch {
                expected: Plane::Image,
                found: oracle.plane,
            });
        }
        if focus.plane != Plane::Focal {
            return Err(Error::PlaneMismatch {
                expected: Plane::Focal,
                found: focus.plane,
            });
        }
        loss.validate()?;
        let focal_grid = grid.conjugate(beam);
        Ok(RoundTrip {
            grid: *grid,
            focal_grid,
            transform: LensTransform::new(grid.n()),
            oracle: oracle.compile(grid)?,
            focus: focus.compile(&focal_grid)?,
            gain: loss.round_trip_amplitude(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn focal_grid(&self) -> &GridSpec {
        &self.focal_grid
    }

    pub fn transform(&self) -> &LensTransform {
        &self.transform
    }

    pub fn oracle_mask(&self) -> &PhaseMask {
        &self.oracle
    }

    pub fn focus_mask(&self) -> &PhaseMask {
        &self.focus
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// Lossless part of the round trip on raw image-plane pixels.
    pub fn apply_unitary_pixels(&self, a: &mut Array2<Complex64>) {
        if !self.focus.is_identity() {
            self.transform.transform_pixels(a, Direction::Forward);
            self.focus.apply_pixels(a);
            self.transform.transform_pixels(a, Direction::Inverse);
        }
        self.oracle.apply_pixels(a);
    }

    pub fn apply_pixels(&self, a: &mut Array2<Complex64>) {
        self.apply_unitary_pixels(a);
        if self.gain != 1.0 {
            a.mapv_inplace(|v| v * self.gain);
        }
    }

    pub fn apply(&self, field: &Field) -> Result<Field> {
        if field.plane() != Plane::Image {
            return Err(Error::PlaneMismatch {
                expected: Plane::Image,
                found: field.plane(),
            });
        }
        if !field.grid().matches(&self.grid) {
            return Err(Error::GridMismatch("field grid differs from the cavity grid".into()));
        }
        let mut out = field.clone();
        self.apply_pixels(out.amps_mut());
        Ok(out)
    }
}

/// One round trip from the image plane: lens, focal plate, lens back, oracle
/// plate, mirror and excess loss.
pub fn grover_round_trip(
    field: &Field,
    oracle: &PlateSpec,
    focus: &PlateSpec,
    beam: &BeamParams,
    loss: &LossModel,
) -> Result<Field> {
    RoundTrip::new(field.grid(), beam, oracle, focus, loss)?.apply(field)
}

/// Focus plate that reflects about the input beam: a centred disc of radius `r_s`.
pub fn focus_plate(beam: &BeamParams, phase: f64, passes: u32) -> Result<PlateSpec> {
    PlateSpec::with_spots(
        Plane::Focal,
        vec![Spot {
            center: [0.0, 0.0],
            radius: beam.spot_radius,
            phase,
        }],
        passes,
    )
}

/// Band-limited Airy input: lens image of the flat focal disc of radius `r_s`.
///
/// This is the beam the focal plate reflects about, so it stays exactly in
/// the two-mode subspace of the discrete round trip.
pub fn band_limited_airy_input(grid: &GridSpec, beam: &BeamParams) -> Result<Field> {
    grid.check_sampling(beam)?;
    let focal = grid.conjugate(beam);
    let disc = make_disc_mode(&focal, Plane::Focal, &Disc::new([0.0, 0.0], beam.spot_radius))?;
    let mut img = lens_fourier(&disc, beam, Direction::Inverse)?;
    // Real by symmetry of the centred disc; drop rounding noise.
    img.amps_mut().mapv_inplace(|a| Complex64::new(a.re, 0.0));
    img.normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_spot_mode, overlap};

    fn small() -> (GridSpec, BeamParams) {
        let beam = BeamParams::from_channels(656e-9, 0.34, 100.0).unwrap();
        (GridSpec::auto(&beam, 512).unwrap(), beam)
    }

    fn noise_field(grid: GridSpec, seed: u64) -> Field {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let n = grid.n();
        let amps = Array2::from_shape_fn((n, n), |_| Complex64::new(next(), next()));
        Field::new(grid, Plane::Image, amps).unwrap()
    }

    /// Direct O(n^4) centred DFT, the reference kernel.
    fn naive_dft(a: &Array2<Complex64>, sign: f64) -> Array2<Complex64> {
        let n = a.nrows();
        let h = (n / 2) as f64;
        Array2::from_shape_fn((n, n), |(qy, qx)| {
            let mut s = Complex64::new(0.0, 0.0);
            for py in 0..n {
                for px in 0..n {
                    let ph = (px as f64 - h) * (qx as f64 - h) + (py as f64 - h) * (qy as f64 - h);
                    s += a[[py, px]] * Complex64::from_polar(1.0, sign * 2.0 * PI * ph / n as f64);
                }
            }
            s / n as f64
        })
    }

    #[test]
    fn transform_matches_direct_kernel() {
        let g = GridSpec::new(64, 1.0).unwrap();
        let f = noise_field(g, 7);
        let t = LensTransform::new(64);
        let mut a = f.amps().clone();
        t.transform_pixels(&mut a, Direction::Forward);
        let r = naive_dft(f.amps(), -1.0);
        let err = (&a - &r).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "err {err}");
        let mut b = f.amps().clone();
        t.transform_pixels(&mut b, Direction::Inverse);
        let r = naive_dft(f.amps(), 1.0);
        let err = (&b - &r).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "err {err}");
    }

    #[test]
    fn lens_is_unitary_and_invertible() {
        let (grid, beam) = small();
        let f = noise_field(grid, 3);
        let g = lens_fourier(&f, &beam, Direction::Forward).unwrap();
        assert_eq!(g.plane(), Plane::Focal);
        assert!((g.power() / f.power() - 1.0).abs() < 1e-12);
        let back = lens_fourier(&g, &beam, Direction::Inverse).unwrap();
        assert_eq!(back.grid(), f.grid());
        let err = (back.amps() - f.amps()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
        assert!(matches!(
            lens_fourier(&f, &beam, Direction::Inverse),
            Err(Error::PlaneMismatch { .. })
        ));
    }

    #[test]
    fn focal_disc_maps_to_airy() {
        // The focal disc is only ~5 pixels in radius, so its lens image differs
        // from the analytic Airy by a few percent in overlap.
        let beam = BeamParams::from_channels(656e-9, 0.34, 400.0).unwrap();
        let grid = GridSpec::auto(&beam, 2048).unwrap();
        let bl = band_limited_airy_input(&grid, &beam).unwrap();
        let an = crate::field::make_airy_input(&grid, &beam).unwrap();
        let ov = overlap(&bl, &an).unwrap();
        assert!(ov.re > 0.95 && ov.im.abs() < 1e-9, "overlap {ov}");
    }

    #[test]
    fn plate_rejects_bad_phase_and_wrong_plane() {
        let (grid, beam) = small();
        let bad = PlateSpec::with_spots(
            Plane::Image,
            vec![Spot {
                center: [0.0, 0.0],
                radius: beam.spot_radius,
                phase: 4.0,
            }],
            2,
        );
        assert!(matches!(bad, Err(Error::Config { .. })));
        let plate = focus_plate(&beam, PI / 2.0, 2).unwrap();
        let f = Field::zeros(grid, Plane::Image);
        assert!(matches!(apply_plate(&f, &plate, 2), Err(Error::PlaneMismatch { .. })));
    }

    #[test]
    fn plate_is_unitary_and_flips_spot_sign() {
        let (grid, beam) = small();
        let oracle = PlateSpec::with_spots(
            Plane::Image,
            vec![Spot {
                center: [0.0, 0.0],
                radius: beam.spot_radius,
                phase: PI / 2.0,
            }],
            2,
        )
        .unwrap();
        let spot = make_spot_mode(&grid, beam.spot_radius, [0.0, 0.0]).unwrap();
        let out = apply_plate(&spot, &oracle, 2).unwrap();
        let ov = overlap(&spot, &out).unwrap();
        assert!((ov + 1.0).norm() < 1e-12);
        let f = noise_field(grid, 11);
        let g = apply_plate(&f, &oracle, 2).unwrap();
        assert!((g.power() / f.power() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn empty_round_trip_is_identity_times_gain() {
        let (grid, beam) = small();
        let loss = LossModel::new(0.9, 0.0).unwrap();
        let f = noise_field(grid, 5);
        let out = grover_round_trip(
            &f,
            &PlateSpec::empty(Plane::Image),
            &PlateSpec::empty(Plane::Focal),
            &beam,
            &loss,
        )
        .unwrap();
        let err = (out.amps() - &f.amps().mapv(|a| a * 0.9)).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(err < 1e-13);
    }

    #[test]
    fn loss_model_relations() {
        let m = LossModel::new(0.9, 0.0).unwrap();
        assert!((m.coupling() - 0.1f64.sqrt()).abs() < 1e-15);
        assert!((m.finesse() - PI * 0.9f64.sqrt() / 0.1).abs() < 1e-12);
        let m = LossModel::with_round_trip_amplitude(0.9, 0.75).unwrap();
        assert!((m.round_trip_amplitude() - 0.75).abs() < 1e-14);
        assert!(LossModel::new(1.2, 0.0).is_err());
        assert!(LossModel::new(0.9, 1.0).is_err());
    }

    #[test]
    fn raster_regions_find_components() {
        let grid = GridSpec::new(64, 1.0).unwrap();
        let mut phases = vec![0.0; 64 * 64];
        for r in 10..14 {
            for c in 20..24 {
                phases[r * 64 + c] = 1.0;
            }
        }
        for r in 40..43 {
            for c in 40..43 {
                phases[r * 64 + c] = 1.0;
            }
        }
        let plate = PlateSpec::with_raster(
            Plane::Image,
            RasterMask {
                n: 64,
                phases,
                background: 0.0,
            },
            2,
        )
        .unwrap();
        let regions = plate.regions(&grid).unwrap();
        assert_eq!(regions.len(), 2);
        assert!((regions[0].center[0] - (21.5 - 32.0)).abs() < 1e-12);
        assert!((regions[0].radius - (16.0 / PI).sqrt()).abs() < 1e-12);
    }
}
