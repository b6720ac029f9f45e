//! Pseudo-spectral plumbing: coefficients on a lattice window ⇄ samples on
//! the uniform grid `θ_k = 2πk/N`.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::fourier::FourierMap;
use crate::lattice::{LatticePoint, LatticeWindow};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A uniform grid of `n` points per axis tied to a lattice window.
///
/// Coefficient `x(q)` lives in FFT slot `q mod n`, so a forward FFT yields
/// `Σ_q x(q) e^{-iq·θ_k}` directly.
#[derive(Clone)]
pub struct SpectralGrid {
    window: LatticeWindow,
    n: usize,
    total: usize,
    slots: Vec<usize>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("window", &self.window)
            .field("n", &self.n)
            .finish()
    }
}

impl SpectralGrid {
    /// Requires `n ≥ 2·bound + 2`.
    pub fn new(window: LatticeWindow, n: usize) -> Result<Self> {
        let needed = 2 * window.bound() as usize + 2;
        if n < needed {
            return Err(Error::Aliasing {
                grid: n,
                bound: window.bound(),
                needed,
            });
        }
        let total = n
            .checked_pow(window.dim() as u32)
            .ok_or_else(|| Error::Overflow(format!("grid {n}^{}", window.dim())))?;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let slots = window
            .points()
            .map(|q| q.0.iter().fold(0usize, |acc, &c| acc * n + c.rem_euclid(n as i32) as usize))
            .collect();
        Ok(SpectralGrid {
            window,
            n,
            total,
            slots,
            fwd,
            inv,
        })
    }

    /// The default oversampled grid for a window whose composed functions
    /// carry bandwidth `bandwidth`.
    pub fn oversampled(window: LatticeWindow, bandwidth: u32) -> Result<Self> {
        let b = window.bound().max(bandwidth) as usize;
        SpectralGrid::new(window, (4 * b).max(8))
    }

    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> usize {
        self.total
    }

    /// Grid coordinates of flat sample index `k`.
    pub fn theta(&self, mut k: usize) -> Vec<f64> {
        let d = self.window.dim();
        let mut out = vec![0.0; d];
        for a in (0..d).rev() {
            out[a] = TAU * (k % self.n) as f64 / self.n as f64;
            k /= self.n;
        }
        out
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let d = self.window.dim();
        let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        // last axis is contiguous
        fft.process_with_scratch(data, &mut scratch);
        let mut line = vec![ZERO; n];
        for axis in 0..d.saturating_sub(1) {
            let stride = n.pow((d - 1 - axis) as u32);
            let outer = self.total / (n * stride);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * n * stride + inner;
                    for (k, l) in line.iter_mut().enumerate() {
                        *l = data[base + k * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (k, l) in line.iter().enumerate() {
                        data[base + k * stride] = *l;
                    }
                }
            }
        }
    }

    /// Samples of one scalar component given dense window coefficients
    /// (mode-major, `stride` components per mode, component `c`).
    pub fn synthesize(&self, dense: &[Complex64], stride: usize, c: usize) -> Vec<Complex64> {
        let mut buf = vec![ZERO; self.total];
        for (i, &s) in self.slots.iter().enumerate() {
            buf[s] = dense[i * stride + c];
        }
        self.transform(&mut buf, &self.fwd);
        buf
    }

    /// Normalized full spectrum of a sample array (all `n^d` slots).
    pub fn analyze_full(&self, samples: &[Complex64]) -> Vec<Complex64> {
        let mut buf = samples.to_vec();
        self.transform(&mut buf, &self.inv);
        let scale = 1.0 / self.total as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Writes the window part of the spectrum of `samples` into component
    /// `c` of `dense`; returns the spectrum outside the window, summed as
    /// `Σ |coeff|`.
    pub fn analyze_into(&self, samples: &[Complex64], dense: &mut [Complex64], stride: usize, c: usize) -> f64 {
        let spec = self.analyze_full(samples);
        let mut inside = 0.0;
        for (i, &s) in self.slots.iter().enumerate() {
            dense[i * stride + c] = spec[s];
            inside += spec[s].norm();
        }
        let all: f64 = spec.iter().map(|z| z.norm()).sum();
        (all - inside).max(0.0)
    }

    /// Samples of every component of `map` (which must fit the window).
    pub fn samples(&self, map: &FourierMap) -> Result<Vec<Vec<Complex64>>> {
        if map.dim() != self.window.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.window.dim(),
                got: map.dim(),
            });
        }
        if map.lattice_bound() > self.window.bound() {
            return Err(Error::Aliasing {
                grid: self.n,
                bound: map.lattice_bound(),
                needed: 2 * map.lattice_bound() as usize + 2,
            });
        }
        let d = map.dim();
        let dense = map.to_dense(&self.window);
        Ok((0..d).map(|c| self.synthesize(&dense, d, c)).collect())
    }

    /// Inverse of [`SpectralGrid::samples`], truncated to the window.
    /// Returns the map and the mass of the discarded spectrum.
    pub fn coefficients(&self, samples: &[Vec<Complex64>], real: bool) -> (FourierMap, f64) {
        let d = samples.len();
        let mut dense = vec![ZERO; self.window.len() * d];
        let mut tail = 0.0;
        for (c, s) in samples.iter().enumerate() {
            tail += self.analyze_into(s, &mut dense, d, c);
        }
        (FourierMap::from_dense(&self.window, real, &dense), tail)
    }
}

/// Samples of `map` on `n` points per axis, last axis fastest.
pub fn grid_transform(map: &FourierMap, n: usize) -> Result<Vec<Vec<Complex64>>> {
    SpectralGrid::new(map.window(), n)?.samples(map)
}

/// Recovers the coefficients on `|q|∞ ≤ bound` from samples on an `n`-grid.
pub fn inverse_grid_transform(samples: &[Vec<Complex64>], dim: usize, n: usize, bound: u32, real: bool) -> Result<FourierMap> {
    let grid = SpectralGrid::new(LatticeWindow::new(dim, bound), n)?;
    if samples.iter().any(|s| s.len() != grid.points()) {
        return Err(Error::InvalidInput(format!("expected {} samples per component", grid.points())));
    }
    Ok(grid.coefficients(samples, real).0)
}

/// Signed frequency of FFT slot index `k` on an `n`-grid.
pub fn signed_frequency(k: usize, n: usize) -> i32 {
    if k <= n / 2 {
        k as i32
    } else {
        k as i32 - n as i32
    }
}

/// Lattice point for a flat slot index.
pub fn slot_point(mut slot: usize, dim: usize, n: usize) -> LatticePoint {
    let mut v = vec![0; dim];
    for a in (0..dim).rev() {
        v[a] = signed_frequency(slot % n, n);
        slot /= n;
    }
    LatticePoint(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(v: &[i32]) -> LatticePoint {
        LatticePoint(v.to_vec())
    }

    #[test]
    fn rejects_undersampled_grid() {
        let w = LatticeWindow::new(2, 4);
        assert!(matches!(SpectralGrid::new(w, 9), Err(Error::Aliasing { needed: 10, .. })));
        assert!(SpectralGrid::new(w, 10).is_ok());
    }

    #[test]
    fn zero_map_roundtrip() {
        let m = FourierMap::zero(2, 3, true);
        let s = grid_transform(&m, 12).unwrap();
        assert!(s.iter().flatten().all(|z| *z == ZERO));
        assert!(inverse_grid_transform(&s, 2, 12, 3, true).unwrap().is_empty());
    }

    #[test]
    fn samples_match_direct_evaluation() {
        let m = FourierMap::from_modes(
            2,
            3,
            true,
            [
                (lp(&[1, -2]), vec![Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.5)]),
                (lp(&[3, 3]), vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.7)]),
            ],
        )
        .unwrap();
        let grid = SpectralGrid::new(m.window(), 12).unwrap();
        let s = grid.samples(&m).unwrap();
        for k in [0, 5, 77, 143] {
            let direct = m.eval(&grid.theta(k));
            for c in 0..2 {
                assert!((s[c][k] - direct[c]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn single_mode_roundtrip() {
        for q in [lp(&[5, -7]), lp(&[-8, 8]), lp(&[0, 1])] {
            let m = FourierMap::from_modes(
                2,
                8,
                false,
                [(q.clone(), vec![Complex64::new(0.25, -1.5), Complex64::new(2.0, 0.0)])],
            )
            .unwrap();
            let s = grid_transform(&m, 32).unwrap();
            let back = inverse_grid_transform(&s, 2, 32, 8, false).unwrap();
            let err: f64 = back.coeff(&q).iter().zip(m.coeff(&q)).map(|(a, b)| (a - b).norm()).sum::<f64>()
                + back
                    .modes()
                    .filter(|(p, _)| **p != q)
                    .map(|(_, v)| crate::fourier::vec_norm(v))
                    .sum::<f64>();
            assert!(err < 1e-14, "{q}: {err}");
        }
    }

    #[test]
    fn signed_slots() {
        assert_eq!(signed_frequency(0, 8), 0);
        assert_eq!(signed_frequency(4, 8), 4);
        assert_eq!(signed_frequency(5, 8), -3);
        assert_eq!(slot_point(8 * 7 + 1, 2, 8), lp(&[-1, 1]));
    }
}
