//! Exact steady state on the subspace the plates act on.
//!
//! The round trip `G = D_i F^-1 D_f F` differs from the identity only on
//! `W = span{e_p : p in S_i} + span{F^-1 e_q : q in S_f}`, where `S_i`, `S_f`
//! are the etched pixels of the two plates. `W` is invariant under `G` and
//! `G` is the identity on its orthogonal complement, so
//!
//! `(I - cG)^-1 psi = (I - c G_W)^-1 P_W psi + psi_perp / (1 - c)`.
//!
//! `G_W` is built in the (non-orthogonal) basis above, orthonormalised with a
//! Cholesky factor of the Gram matrix and diagonalised once. Each
//! detuning then costs `O(d)` per fixed-point sweep. All vectors here are in
//! pixel units (`E_pix = E dx`), so squared norms are powers.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use ndarray::Array2;
use num_complex::Complex64 as C;

use super::Cavity;
use crate::error::{Error, Result};
use crate::optics::{Direction, LensTransform};

pub(crate) struct ReducedCavity {
    n: usize,
    img_idx: Vec<usize>,
    img_pos: HashMap<usize, usize>,
    foc_q: Vec<(f64, f64)>,
    foc_idx: Vec<usize>,
    /// Coefficients `z = from_eig y` in the spanning set.
    from_eig: DMatrix<C>,
    /// `Q^H G_W Q`, diagonal up to rounding.
    t_mat: DMatrix<C>,
    y_in: DVector<C>,
    perp: Array2<C>,
    perp_norm2: f64,
    gain: f64,
    coupling: f64,
    transform: LensTransform,
}

/// Steady state in eigen coordinates plus the amplitude of `psi_perp`.
pub(crate) struct ReducedSolution {
    pub y: DVector<C>,
    pub s_perp: C,
    pub residual: f64,
    pub iterations: usize,
}

impl ReducedSolution {
    pub fn norm2(&self, rc: &ReducedCavity) -> f64 {
        self.y.norm_squared() + self.s_perp.norm_sqr() * rc.perp_norm2
    }
}

/// Linear read-out `E -> <h, E>` or `E -> E(p)` expressed in eigen coordinates.
pub(crate) struct Readout {
    pub row: DVector<C>,
    pub perp: C,
}

impl Readout {
    pub fn eval(&self, sol: &ReducedSolution) -> C {
        self.row.dot(&sol.y) + self.perp * sol.s_perp
    }
}

fn signed(i: usize, n: usize) -> (f64, f64) {
    let h = (n / 2) as f64;
    ((i % n) as f64 - h, (i / n) as f64 - h)
}

/// Eigenvectors of a unitary matrix `u`, returned with `T = Q^H u Q`.
///
/// A unitary matrix is normal, so it shares its eigenvectors with the
/// Hermitian matrix `Re(u) + gamma Im(u)` whose eigenvalues
/// `cos phi + gamma sin phi` separate distinct `e^{i phi}` unless two of them
/// sit symmetrically about `atan(gamma)`; a few generic `gamma` guard against
/// that coincidence. (The shifted-QR Schur iteration can stall on unitary
/// input with clustered spectra.)
fn unitary_eigen(u: &DMatrix<C>) -> Result<(DMatrix<C>, DMatrix<C>)> {
    let uh = u.adjoint();
    let re = (u + &uh) * C::new(0.5, 0.0);
    let im = (u - &uh) * C::new(0.0, -0.5);
    let scale = u.norm().max(1.0);
    let mut worst = f64::INFINITY;
    for gamma in [0.537_7, 1.381_3, -0.712_9, 2.914_1] {
        let h = &re + &im * C::new(gamma, 0.0);
        // Symmetrise away rounding so the solver sees an exactly Hermitian matrix.
        let h = (&h + h.adjoint()) * C::new(0.5, 0.0);
        let q = SymmetricEigen::new(h).eigenvectors;
        let t = q.adjoint() * u * &q;
        let off = (0..t.ncols())
            .flat_map(|j| (0..t.nrows()).filter(move |&i| i != j).map(move |i| (i, j)))
            .map(|(i, j)| t[(i, j)].norm())
            .fold(0.0, f64::max);
        if off < 1e-11 * scale {
            return Ok((q, t));
        }
        worst = worst.min(off);
    }
    Err(Error::Analysis(format!(
        "round trip restricted to the plate subspace could not be diagonalised (off-diagonal {worst:.2e})"
    )))
}

impl ReducedCavity {
    pub fn dimension_of(cavity: &Cavity) -> usize {
        cavity.round_trip.oracle_mask().entries.len() + cavity.round_trip.focus_mask().entries.len()
    }

    pub fn new(cavity: &Cavity) -> Result<Self> {
        let rt = &cavity.round_trip;
        let n = rt.grid().n();
        let nf = n as f64;
        let dx = rt.grid().dx();
        let oracle = &rt.oracle_mask().entries;
        let focus = &rt.focus_mask().entries;
        let (a, b) = (oracle.len(), focus.len());
        let d = a + b;
        let img_idx: Vec<usize> = oracle.iter().map(|&(i, _)| i).collect();
        let foc_idx: Vec<usize> = focus.iter().map(|&(i, _)| i).collect();
        let foc_q: Vec<(f64, f64)> = foc_idx.iter().map(|&i| signed(i, n)).collect();
        let img_pos = img_idx.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let di: Vec<C> = oracle.iter().map(|&(_, f)| f - 1.0).collect();
        let df: Vec<C> = focus.iter().map(|&(_, f)| f - 1.0).collect();

        // K_pq = <e_p, F^-1 e_q> = exp(2 pi i p.q / n) / n
        let k = DMatrix::from_fn(a, b, |j, l| {
            let p = signed(img_idx[j], n);
            let q = foc_q[l];
            C::from_polar(1.0 / nf, 2.0 * PI * (p.0 * q.0 + p.1 * q.1) / nf)
        });

        let mut gamma = DMatrix::<C>::identity(d, d);
        gamma.view_mut((0, a), (a, b)).copy_from(&k);
        gamma.view_mut((a, 0), (b, a)).copy_from(&k.adjoint());

        // Coefficient map of G on z = (alpha, beta).
        let mut g = DMatrix::<C>::zeros(d, d);
        {
            // Delta_i K Delta_f K^H
            let mut kdf = k.clone();
            for (l, v) in df.iter().enumerate() {
                for j in 0..a {
                    kdf[(j, l)] *= v;
                }
            }
            let kdfkh = &kdf * k.adjoint();
            for j in 0..a {
                for l in 0..a {
                    g[(j, l)] = di[j] * kdfkh[(j, l)];
                }
                g[(j, j)] += C::new(1.0, 0.0) + di[j];
                for l in 0..b {
                    g[(j, a + l)] = di[j] * k[(j, l)] * (C::new(1.0, 0.0) + df[l]);
                }
            }
            for l in 0..b {
                for j in 0..a {
                    g[(a + l, j)] = df[l] * k[(j, l)].conj();
                }
                g[(a + l, a + l)] = C::new(1.0, 0.0) + df[l];
            }
        }

        let transform = LensTransform::new(n);
        let psi: Array2<C> = cavity.input.amps().mapv(|v| v * dx);
        if d == 0 {
            let perp_norm2 = psi.iter().map(|v| v.norm_sqr()).sum();
            return Ok(ReducedCavity {
                n,
                img_idx,
                img_pos,
                foc_q,
                foc_idx,
                from_eig: DMatrix::zeros(0, 0),
                t_mat: DMatrix::zeros(0, 0),
                y_in: DVector::zeros(0),
                perp: psi,
                perp_norm2,
                gain: rt.gain(),
                coupling: cavity.config.loss.coupling(),
                transform,
            });
        }

        let chol = Cholesky::new(gamma).ok_or_else(|| {
            Error::Analysis("plate subspaces are linearly dependent (Gram matrix not positive definite)".into())
        })?;
        let l = chol.l();
        let linv = l
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .ok_or_else(|| Error::Analysis("singular Cholesky factor".into()))?;
        let g_on = l.adjoint() * g * linv.adjoint();
        let (q, t_mat) = unitary_eigen(&g_on)?;
        let from_eig = linv.adjoint() * &q;

        // Project the input onto W.
        let mut psi_f = psi.clone();
        transform.transform_pixels(&mut psi_f, Direction::Forward);
        let flat = psi.as_slice().expect("standard layout");
        let flat_f = psi_f.as_slice().expect("standard layout");
        let c = DVector::from_iterator(
            d,
            img_idx.iter().map(|&i| flat[i]).chain(foc_idx.iter().map(|&i| flat_f[i])),
        );
        let w_in = l
            .solve_lower_triangular(&c)
            .ok_or_else(|| Error::Analysis("singular Cholesky factor".into()))?;
        let y_in = q.adjoint() * &w_in;
        let z_in = linv.adjoint() * &w_in;

        let mut span = Array2::<C>::zeros((n, n));
        {
            let s = span.as_slice_mut().expect("standard layout");
            for (l, &i) in foc_idx.iter().enumerate() {
                s[i] = z_in[a + l];
            }
        }
        transform.transform_pixels(&mut span, Direction::Inverse);
        {
            let s = span.as_slice_mut().expect("standard layout");
            for (j, &i) in img_idx.iter().enumerate() {
                s[i] += z_in[j];
            }
        }
        let perp = &psi - &span;
        let perp_norm2 = perp.iter().map(|v| v.norm_sqr()).sum();

        Ok(ReducedCavity {
            n,
            img_idx,
            img_pos,
            foc_q,
            foc_idx,
            from_eig,
            t_mat,
            y_in,
            perp,
            perp_norm2,
            gain: rt.gain(),
            coupling: cavity.config.loss.coupling(),
            transform,
        })
    }

    pub fn dim(&self) -> usize {
        self.from_eig.nrows()
    }

    /// Eigenvalues of the round trip restricted to `W`.
    #[cfg(test)]
    pub fn eigenvalues(&self) -> Vec<C> {
        (0..self.dim()).map(|j| self.t_mat[(j, j)]).collect()
    }

    /// Read-out of `<h, E>` for a pixel-unit field `h`.
    pub fn functional(&self, h: &Array2<C>) -> Readout {
        let mut hf = h.clone();
        self.transform.transform_pixels(&mut hf, Direction::Forward);
        let hs = h.as_slice().expect("standard layout");
        let hfs = hf.as_slice().expect("standard layout");
        let coef = DVector::from_iterator(
            self.dim(),
            self.img_idx
                .iter()
                .map(|&i| hs[i].conj())
                .chain(self.foc_idx.iter().map(|&i| hfs[i].conj())),
        );
        let row = self.from_eig.tr_mul(&coef);
        let perp = h.iter().zip(self.perp.iter()).map(|(x, y)| x.conj() * y).sum();
        Readout { row, perp }
    }

    /// Read-outs of the pixel values `E(p)`.
    pub fn pixel_readouts(&self, pixels: &[usize]) -> Vec<Readout> {
        let nf = self.n as f64;
        let a = self.img_idx.len();
        let perp = self.perp.as_slice().expect("standard layout");
        pixels
            .iter()
            .map(|&p| {
                let (px, py) = signed(p, self.n);
                let mut coef = DVector::<C>::zeros(self.dim());
                if let Some(&j) = self.img_pos.get(&p) {
                    coef[j] = C::new(1.0, 0.0);
                }
                for (l, q) in self.foc_q.iter().enumerate() {
                    coef[a + l] = C::from_polar(1.0 / nf, 2.0 * PI * (px * q.0 + py * q.1) / nf);
                }
                Readout {
                    row: self.from_eig.tr_mul(&coef),
                    perp: perp[p],
                }
            })
            .collect()
    }

    /// Damped fixed point `E <- (1-beta) E + beta (t psi0 + c G E)` on `W`.
    pub fn solve(&self, alpha: f64, tol: f64, beta: f64, max_iter: usize) -> Result<ReducedSolution> {
        let c = C::from_polar(self.gain, alpha);
        let one = C::new(1.0, 0.0);
        if (one - c).norm() < 1e-300 {
            return Err(Error::SingularSystem { alpha });
        }
        let t = self.coupling;
        let s_perp = C::new(t, 0.0) / (one - c);
        let perp2 = s_perp.norm_sqr() * self.perp_norm2;
        let d = self.dim();
        let rho: Vec<C> = (0..d).map(|j| (1.0 - beta) + beta * c * self.t_mat[(j, j)]).collect();
        let drive: Vec<C> = self.y_in.iter().map(|v| beta * t * v).collect();
        let mut y = DVector::<C>::zeros(d);
        let mut iterations = 0;
        loop {
            let mut step2 = 0.0;
            let mut norm2 = 0.0;
            for j in 0..d {
                let next = rho[j] * y[j] + drive[j];
                step2 += (next - y[j]).norm_sqr();
                norm2 += next.norm_sqr();
                y[j] = next;
            }
            iterations += 1;
            let rel = step2.sqrt() / (beta * (norm2 + perp2).sqrt().max(1e-300));
            if rel < 0.5 * tol {
                break;
            }
            if iterations >= max_iter || !rel.is_finite() {
                return Err(Error::NonConvergence {
                    alpha,
                    residual: rel,
                    iterations,
                });
            }
        }
        // Residual with the full transformed matrix.
        let ty = &self.t_mat * &y;
        let r: f64 = (0..d)
            .map(|j| (t * self.y_in[j] + c * ty[j] - y[j]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let residual = r / (y.norm_squared() + perp2).sqrt();
        Ok(ReducedSolution {
            y,
            s_perp,
            residual,
            iterations,
        })
    }

    /// Full pixel-unit field of a solution.
    pub fn assemble(&self, sol: &ReducedSolution) -> Array2<C> {
        let z = &self.from_eig * &sol.y;
        let a = self.img_idx.len();
        let mut e = Array2::<C>::zeros((self.n, self.n));
        {
            let s = e.as_slice_mut().expect("standard layout");
            for (l, &i) in self.foc_idx.iter().enumerate() {
                s[i] = z[a + l];
            }
        }
        self.transform.transform_pixels(&mut e, Direction::Inverse);
        {
            let s = e.as_slice_mut().expect("standard layout");
            for (j, &i) in self.img_idx.iter().enumerate() {
                s[i] += z[j];
            }
        }
        e.zip_mut_with(&self.perp, |x, p| *x += sol.s_perp * p);
        e
    }
}
