//! Fourier–Chebyshev transforms between mode space and a physical grid.
//!
//! Spectral fields hold `u_{n1,n2,n3}` for `|n1| ≤ N1`, `|n2| ≤ N2`,
//! `0 ≤ n3 ≤ N3+1`, representing
//! `Σ u_{n1,n2,n3} T_{n3}(x3) exp(i(α1 n1 x1 + α2 n2 x2))`.
//! The physical grid is uniform in `x1 ∈ [0, L1)`, `x2 ∈ [0, L2)` and uses the
//! Gauss–Lobatto nodes `x3_j = cos(π j / P3)`, `j = 0..=P3` (so `j = 0` is the
//! upper wall). A unit coefficient transforms to a field of unit amplitude.
//!
//! Fourier directions use `rustfft`; the Chebyshev direction is a DCT-I done
//! as a complex FFT of length `2 P3` on the even extension.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

/// Truncation `(N1, N2, N3)`; the Chebyshev index runs over `N3 + 2` values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl Dims {
    pub fn new(n1: usize, n2: usize, n3: usize) -> Self {
        Self { n1, n2, n3 }
    }

    pub fn modes1(&self) -> usize {
        2 * self.n1 + 1
    }

    pub fn modes2(&self) -> usize {
        2 * self.n2 + 1
    }

    /// Number of horizontal modes `(2N1+1)(2N2+1)`.
    pub fn horizontal(&self) -> usize {
        self.modes1() * self.modes2()
    }

    /// Chebyshev coefficients per mode, `N3 + 2`.
    pub fn cheb(&self) -> usize {
        self.n3 + 2
    }

    pub fn len(&self) -> usize {
        self.horizontal() * self.cheb()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Position of horizontal mode `(n1, n2)` in `0..horizontal()`.
    #[inline]
    pub fn mode_pos(&self, n1: i64, n2: i64) -> usize {
        debug_assert!(n1.unsigned_abs() as usize <= self.n1 && n2.unsigned_abs() as usize <= self.n2);
        (n1 + self.n1 as i64) as usize * self.modes2() + (n2 + self.n2 as i64) as usize
    }

    /// Inverse of [`Dims::mode_pos`].
    #[inline]
    pub fn mode_at(&self, pos: usize) -> (i64, i64) {
        let m2 = self.modes2();
        ((pos / m2) as i64 - self.n1 as i64, (pos % m2) as i64 - self.n2 as i64)
    }

    #[inline]
    pub fn index(&self, n1: i64, n2: i64, k: usize) -> usize {
        self.mode_pos(n1, n2) * self.cheb() + k
    }

    /// All horizontal modes in storage order.
    pub fn modes(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (0..self.horizontal()).map(|p| self.mode_at(p))
    }
}

/// Coefficients of a scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField3D {
    pub dims: Dims,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Whether the field is real in physical space.
    pub real: bool,
    pub data: Vec<Complex64>,
}

impl SpectralField3D {
    pub fn zeros(dims: Dims, alpha1: f64, alpha2: f64, real: bool) -> Self {
        Self {
            dims,
            alpha1,
            alpha2,
            real,
            data: vec![Complex64::new(0.0, 0.0); dims.len()],
        }
    }

    /// Same shape and wavenumbers, zero data.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims, self.alpha1, self.alpha2, self.real)
    }

    pub fn get(&self, n1: i64, n2: i64, k: usize) -> Complex64 {
        self.data[self.dims.index(n1, n2, k)]
    }

    pub fn set(&mut self, n1: i64, n2: i64, k: usize, value: Complex64) {
        let i = self.dims.index(n1, n2, k);
        self.data[i] = value;
    }

    /// Chebyshev coefficients of mode `(n1, n2)`.
    pub fn mode(&self, n1: i64, n2: i64) -> &[Complex64] {
        let c = self.dims.cheb();
        let s = self.dims.mode_pos(n1, n2) * c;
        &self.data[s..s + c]
    }

    pub fn mode_mut(&mut self, n1: i64, n2: i64) -> &mut [Complex64] {
        let c = self.dims.cheb();
        let s = self.dims.mode_pos(n1, n2) * c;
        &mut self.data[s..s + c]
    }

    /// Replaces the data by its conjugate-symmetric part,
    /// `u_{-n} = conj(u_n)`; the (0, 0) mode becomes real.
    pub fn symmetrize(&mut self) {
        let d = self.dims;
        let c = d.cheb();
        for pos in 0..d.horizontal() {
            let (n1, n2) = d.mode_at(pos);
            let mirror = d.mode_pos(-n1, -n2);
            if mirror < pos {
                continue;
            }
            for k in 0..c {
                let a = self.data[pos * c + k];
                let b = self.data[mirror * c + k];
                let sym = (a + b.conj()) * 0.5;
                self.data[pos * c + k] = sym;
                self.data[mirror * c + k] = sym.conj();
            }
        }
    }

    /// Largest violation of `u_{-n} = conj(u_n)`.
    pub fn symmetry_defect(&self) -> f64 {
        let d = self.dims;
        d.modes()
            .flat_map(|(n1, n2)| {
                let a = self.mode(n1, n2);
                let b = self.mode(-n1, -n2);
                a.iter().zip(b).map(|(x, y)| (x - y.conj()).norm()).collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    /// `∂/∂x1` (multiplication by `i α1 n1`).
    pub fn d1(&self) -> Self {
        self.map_modes(|n1, _, c| c * Complex64::new(0.0, self.alpha1 * n1 as f64))
    }

    /// `∂/∂x2`.
    pub fn d2(&self) -> Self {
        self.map_modes(|_, n2, c| c * Complex64::new(0.0, self.alpha2 * n2 as f64))
    }

    /// `∂/∂x3` via the Chebyshev recurrence; keeps the length.
    pub fn d3(&self) -> Self {
        let mut out = self.zeros_like();
        let c = self.dims.cheb();
        out.data
            .chunks_mut(c)
            .zip(self.data.chunks(c))
            .for_each(|(o, a)| crate::chebyshev::derivative_into(a, o));
        out
    }

    fn map_modes(&self, f: impl Fn(i64, i64, Complex64) -> Complex64) -> Self {
        let mut out = self.zeros_like();
        let c = self.dims.cheb();
        for (pos, (o, a)) in out.data.chunks_mut(c).zip(self.data.chunks(c)).enumerate() {
            let (n1, n2) = self.dims.mode_at(pos);
            for (x, &y) in o.iter_mut().zip(a) {
                *x = f(n1, n2, y);
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= s);
        out
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        self.data.iter_mut().zip(&x.data).for_each(|(y, &v)| *y += v * a);
    }
}

/// Physical grid sizes: `P1 × P2` uniform points and `P3 + 1` Gauss–Lobatto
/// nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    pub p1: usize,
    pub p2: usize,
    pub p3: usize,
}

/// Smallest integer `>= n` with no prime factor above 5.
fn smooth(n: usize) -> usize {
    (n.max(1)..)
        .find(|&m| {
            let mut m = m;
            for p in [2, 3, 5] {
                while m % p == 0 {
                    m /= p;
                }
            }
            m == 1
        })
        .expect("5-smooth numbers are unbounded")
}

impl Grid {
    /// Smallest grid obeying the 3/2 rule in every direction, with each size
    /// rounded up to a 5-smooth number so the FFTs avoid large prime radices.
    pub fn dealiased(d: Dims) -> Self {
        Self {
            p1: smooth((3 * d.modes1()).div_ceil(2)),
            p2: smooth((3 * d.modes2()).div_ceil(2)),
            p3: smooth((3 * d.cheb()).div_ceil(2)),
        }
    }

    /// Smallest grid on which the transforms are exact inverses.
    pub fn minimal(d: Dims) -> Self {
        Self {
            p1: d.modes1(),
            p2: d.modes2(),
            p3: d.cheb() - 1,
        }
    }

    pub fn len(&self) -> usize {
        self.p1 * self.p2 * (self.p3 + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        (i3 * self.p1 + i1) * self.p2 + i2
    }

    pub fn plane(&self) -> usize {
        self.p1 * self.p2
    }
}

/// Samples on a [`Grid`], laid out `[i3][i1][i2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField3D {
    pub grid: Grid,
    pub data: Vec<Complex64>,
}

impl PhysicalField3D {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Samples `f(x1, x2, x3)` for a cell of size `l1 × l2`.
    pub fn from_fn(grid: Grid, l1: f64, l2: f64, f: impl Fn(f64, f64, f64) -> Complex64) -> Self {
        let x3 = crate::chebyshev::gauss_lobatto_points(grid.p3);
        let mut out = Self::zeros(grid);
        for (i3, &z) in x3.iter().enumerate() {
            for i1 in 0..grid.p1 {
                for i2 in 0..grid.p2 {
                    let x = l1 * i1 as f64 / grid.p1 as f64;
                    let y = l2 * i2 as f64 / grid.p2 as f64;
                    out.data[grid.index(i1, i2, i3)] = f(x, y, z);
                }
            }
        }
        out
    }

    pub fn get(&self, i1: usize, i2: usize, i3: usize) -> Complex64 {
        self.data[self.grid.index(i1, i2, i3)]
    }
}

/// Planned transforms for one `(Dims, Grid)` pair. Immutable and shareable
/// across threads.
#[derive(Clone)]
pub struct Transform {
    dims: Dims,
    grid: Grid,
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
    /// Length `2 P3`, forward; the DCT-I kernel is symmetric so one plan
    /// serves both directions.
    cheb: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transform")
            .field("dims", &self.dims)
            .field("grid", &self.grid)
            .finish()
    }
}

#[inline]
fn wrap(n: i64, p: usize) -> usize {
    n.rem_euclid(p as i64) as usize
}

impl Transform {
    pub fn new(dims: Dims, grid: Grid) -> Result<Self> {
        let min = Grid::minimal(dims);
        if grid.p1 < min.p1 || grid.p2 < min.p2 || grid.p3 < min.p3 || grid.p3 == 0 {
            return Err(Error::DimensionMismatch {
                expected: min.len(),
                found: grid.len(),
            });
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            dims,
            grid,
            fwd1: planner.plan_fft_forward(grid.p1),
            inv1: planner.plan_fft_inverse(grid.p1),
            fwd2: planner.plan_fft_forward(grid.p2),
            inv2: planner.plan_fft_inverse(grid.p2),
            cheb: planner.plan_fft_forward(2 * grid.p3),
        })
    }

    /// Transform on the 3/2-rule grid.
    pub fn dealiased(dims: Dims) -> Self {
        Self::new(dims, Grid::dealiased(dims)).expect("dealiased grid is large enough")
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    fn scratch(&self) -> Vec<Complex64> {
        let n = [&self.fwd1, &self.inv1, &self.fwd2, &self.inv2, &self.cheb]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        vec![Complex64::new(0.0, 0.0); n]
    }

    /// Values at the Gauss–Lobatto nodes of `Σ a_k T_k`; `out.len() = P3 + 1`.
    fn cheb_to_values(&self, a: &[Complex64], buf: &mut [Complex64], scratch: &mut [Complex64], out: &mut [Complex64]) {
        let p3 = self.grid.p3;
        buf.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        for (k, &c) in a.iter().enumerate().take(p3 + 1) {
            if k == 0 || k == p3 {
                buf[k] = c * 2.0;
            } else {
                buf[k] = c;
                buf[2 * p3 - k] = c;
            }
        }
        self.cheb.process_with_scratch(buf, scratch);
        for (o, &y) in out.iter_mut().zip(buf.iter()) {
            *o = y * 0.5;
        }
    }

    /// Interpolating Chebyshev coefficients of the nodal values `v`,
    /// truncated to `out.len()`.
    fn values_to_cheb(&self, v: &[Complex64], buf: &mut [Complex64], scratch: &mut [Complex64], out: &mut [Complex64]) {
        let p3 = self.grid.p3;
        for j in 0..=p3 {
            buf[j] = v[j];
            if j > 0 && j < p3 {
                buf[2 * p3 - j] = v[j];
            }
        }
        self.cheb.process_with_scratch(buf, scratch);
        let scale = 1.0 / p3 as f64;
        for (k, o) in out.iter_mut().enumerate() {
            let ck = if k == 0 || k == p3 { 2.0 } else { 1.0 };
            *o = buf[k] * (scale / ck);
        }
    }

    pub fn to_physical(&self, u: &SpectralField3D) -> PhysicalField3D {
        assert_eq!(u.dims, self.dims, "field dims differ from transform dims");
        let d = self.dims;
        let g = self.grid;
        let np = g.p3 + 1;
        // 1. Chebyshev direction, retained horizontal modes only.
        let mut lines = vec![Complex64::new(0.0, 0.0); d.horizontal() * np];
        lines
            .par_chunks_mut(np)
            .zip(u.data.par_chunks(d.cheb()))
            .for_each_init(
                || (vec![Complex64::new(0.0, 0.0); 2 * g.p3], self.scratch()),
                |(buf, scratch), (out, a)| self.cheb_to_values(a, buf, scratch, out),
            );
        // 2. Fourier directions, plane by plane.
        let mut out = PhysicalField3D::zeros(g);
        out.data
            .par_chunks_mut(g.plane())
            .enumerate()
            .for_each_init(
                || (vec![Complex64::new(0.0, 0.0); g.p1.max(g.p2)], self.scratch()),
                |(col, scratch), (i3, plane)| {
                    for pos in 0..d.horizontal() {
                        let (n1, n2) = d.mode_at(pos);
                        plane[wrap(n1, g.p1) * g.p2 + wrap(n2, g.p2)] = lines[pos * np + i3];
                    }
                    for n1 in -(d.n1 as i64)..=d.n1 as i64 {
                        let r = wrap(n1, g.p1) * g.p2;
                        self.inv2.process_with_scratch(&mut plane[r..r + g.p2], scratch);
                    }
                    let col = &mut col[..g.p1];
                    for i2 in 0..g.p2 {
                        for i1 in 0..g.p1 {
                            col[i1] = plane[i1 * g.p2 + i2];
                        }
                        self.inv1.process_with_scratch(col, scratch);
                        for i1 in 0..g.p1 {
                            plane[i1 * g.p2 + i2] = col[i1];
                        }
                    }
                    if u.real {
                        plane.iter_mut().for_each(|x| x.im = 0.0);
                    }
                },
            );
        out
    }

    /// Forward transform followed by truncation to the transform's dims.
    pub fn to_spectral(
        &self,
        p: &PhysicalField3D,
        alpha1: f64,
        alpha2: f64,
        real: bool,
    ) -> Result<SpectralField3D> {
        if p.grid != self.grid {
            return Err(Error::DimensionMismatch {
                expected: self.grid.len(),
                found: p.grid.len(),
            });
        }
        let d = self.dims;
        let g = self.grid;
        let np = g.p3 + 1;
        let norm = 1.0 / (g.p1 * g.p2) as f64;
        // 1. Fourier directions per plane, keeping retained modes.
        let planes: Vec<Vec<Complex64>> = p
            .data
            .par_chunks(g.plane())
            .map_init(
                || {
                    let z = Complex64::new(0.0, 0.0);
                    (vec![z; g.plane()], vec![z; g.p1], self.scratch())
                },
                |(work, col, scratch), plane| {
                    work.copy_from_slice(plane);
                    self.fwd2.process_with_scratch(work, scratch);
                    let mut kept = vec![Complex64::new(0.0, 0.0); d.horizontal()];
                    for n2 in -(d.n2 as i64)..=d.n2 as i64 {
                        let c2 = wrap(n2, g.p2);
                        for i1 in 0..g.p1 {
                            col[i1] = work[i1 * g.p2 + c2];
                        }
                        self.fwd1.process_with_scratch(col, scratch);
                        for n1 in -(d.n1 as i64)..=d.n1 as i64 {
                            kept[d.mode_pos(n1, n2)] = col[wrap(n1, g.p1)] * norm;
                        }
                    }
                    kept
                },
            )
            .collect();
        // 2. Chebyshev direction per retained mode.
        let mut out = SpectralField3D::zeros(d, alpha1, alpha2, real);
        out.data
            .par_chunks_mut(d.cheb())
            .enumerate()
            .for_each_init(
                || {
                    let z = Complex64::new(0.0, 0.0);
                    (vec![z; 2 * g.p3], vec![z; np], self.scratch())
                },
                |(buf, vals, scratch), (pos, coeffs)| {
                    for (i3, v) in vals.iter_mut().enumerate() {
                        *v = planes[i3][pos];
                    }
                    self.values_to_cheb(vals, buf, scratch, coeffs);
                },
            );
        if real {
            out.symmetrize();
        }
        Ok(out)
    }

    /// Two real fields in one complex transform: the result holds `a` in the
    /// real parts and `b` in the imaginary parts.
    pub fn to_physical_pair(&self, a: &SpectralField3D, b: &SpectralField3D) -> PhysicalField3D {
        assert!(a.real && b.real, "pair transforms need real fields");
        let mut c = a.clone();
        c.real = false;
        c.data.iter_mut().zip(&b.data).for_each(|(x, &y)| *x += Complex64::new(-y.im, y.re));
        self.to_physical(&c)
    }

    /// Inverse of [`Transform::to_physical_pair`]: spectra of the real and
    /// imaginary parts of `p`, each conjugate-symmetric.
    pub fn to_spectral_pair(
        &self,
        p: &PhysicalField3D,
        alpha1: f64,
        alpha2: f64,
    ) -> Result<(SpectralField3D, SpectralField3D)> {
        let z = self.to_spectral(p, alpha1, alpha2, false)?;
        let d = self.dims;
        let mut a = SpectralField3D::zeros(d, alpha1, alpha2, true);
        let mut b = a.clone();
        let c = d.cheb();
        for (n1, n2) in d.modes() {
            let (zp, zm) = (z.mode(n1, n2), z.mode(-n1, -n2));
            let base = d.mode_pos(n1, n2) * c;
            for k in 0..c {
                let (x, y) = (zp[k], zm[k].conj());
                a.data[base + k] = (x + y) * 0.5;
                b.data[base + k] = Complex64::new(0.0, -0.5) * (x - y);
            }
        }
        Ok((a, b))
    }

    /// Dealiased product: both factors to the grid, multiply, back, truncate.
    pub fn product(&self, a: &SpectralField3D, b: &SpectralField3D) -> SpectralField3D {
        let pa = self.to_physical(a);
        let pb = self.to_physical(b);
        self.physical_to_spectral_product(&[(&pa, &pb)], &[1.0], a.alpha1, a.alpha2, a.real && b.real)
    }

    /// `Σ_j c_j a_j b_j` of physical fields, transformed back.
    pub fn physical_to_spectral_product(
        &self,
        pairs: &[(&PhysicalField3D, &PhysicalField3D)],
        coeffs: &[f64],
        alpha1: f64,
        alpha2: f64,
        real: bool,
    ) -> SpectralField3D {
        let mut prod = PhysicalField3D::zeros(self.grid);
        for (&(a, b), &c) in pairs.iter().zip(coeffs) {
            prod.data
                .iter_mut()
                .zip(a.data.iter().zip(&b.data))
                .for_each(|(p, (x, y))| *p += x * y * c);
        }
        self.to_spectral(&prod, alpha1, alpha2, real)
            .expect("grid matches by construction")
    }
}

/// Dealiased pointwise product of two fields with equal dims and wavenumbers.
pub fn pointwise_product(a: &SpectralField3D, b: &SpectralField3D) -> Result<SpectralField3D> {
    if a.dims != b.dims {
        return Err(Error::DimensionMismatch {
            expected: a.dims.len(),
            found: b.dims.len(),
        });
    }
    Ok(Transform::dealiased(a.dims).product(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_field(dims: Dims, seed: u64, real: bool) -> SpectralField3D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = SpectralField3D::zeros(dims, 1.0, 2.0, real);
        f.data
            .iter_mut()
            .for_each(|x| *x = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        if real {
            f.symmetrize();
        }
        f
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn pair_transforms_match_single_transforms() {
        let d = Dims::new(3, 2, 5);
        let t = Transform::dealiased(d);
        let (a, b) = (random_field(d, 11, true), random_field(d, 12, true));
        let p = t.to_physical_pair(&a, &b);
        let (pa, pb) = (t.to_physical(&a), t.to_physical(&b));
        for ((z, x), y) in p.data.iter().zip(&pa.data).zip(&pb.data) {
            assert!((z.re - x.re).abs() < 1e-12 && (z.im - y.re).abs() < 1e-12);
        }
        let (a2, b2) = t.to_spectral_pair(&p, a.alpha1, a.alpha2).unwrap();
        assert!(max_diff(&a2.data, &a.data) < 1e-12);
        assert!(max_diff(&b2.data, &b.data) < 1e-12);
        assert!(a2.symmetry_defect() < 1e-15 && b2.symmetry_defect() < 1e-15);
    }

    #[test]
    fn constant_and_linear_profiles() {
        let d = Dims::new(2, 1, 3);
        let t = Transform::dealiased(d);
        let mut u = SpectralField3D::zeros(d, 1.0, 1.0, true);
        u.set(0, 0, 0, c(2.5, 0.0));
        let p = t.to_physical(&u);
        assert!(p.data.iter().all(|x| (x - c(2.5, 0.0)).norm() < 1e-14));
        let mut u = SpectralField3D::zeros(d, 1.0, 1.0, true);
        u.set(0, 0, 1, c(1.0, 0.0));
        let p = t.to_physical(&u);
        let x3 = crate::chebyshev::gauss_lobatto_points(t.grid().p3);
        for (i3, &z) in x3.iter().enumerate() {
            assert!((p.get(1, 1, i3) - c(z, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn unit_mode_has_unit_amplitude() {
        let d = Dims::new(3, 2, 2);
        let t = Transform::dealiased(d);
        let mut u = SpectralField3D::zeros(d, 1.0, 0.5, false);
        u.set(-2, 1, 0, c(1.0, 0.0));
        let g = t.grid();
        let want = PhysicalField3D::from_fn(g, 2.0 * PI, 4.0 * PI, |x, y, _| {
            Complex64::from_polar(1.0, -2.0 * x + 0.5 * y)
        });
        assert!(max_diff(&t.to_physical(&u).data, &want.data) < 1e-13);
    }

    #[test]
    fn cosine_samples_give_half_amplitudes() {
        let d = Dims::new(3, 3, 2);
        let t = Transform::dealiased(d);
        let p = PhysicalField3D::from_fn(t.grid(), 2.0 * PI, 2.0 * PI, |x, _, _| c(x.cos(), 0.0));
        let u = t.to_spectral(&p, 1.0, 1.0, true).unwrap();
        for (n1, n2) in d.modes() {
            for k in 0..d.cheb() {
                let want = if n2 == 0 && k == 0 && n1.abs() == 1 { 0.5 } else { 0.0 };
                assert!((u.get(n1, n2, k) - c(want, 0.0)).norm() < 1e-14);
            }
        }
        let zero = t.to_spectral(&PhysicalField3D::zeros(t.grid()), 1.0, 1.0, true).unwrap();
        assert!(zero.data.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn grid_mismatch_rejected() {
        let t = Transform::dealiased(Dims::new(2, 2, 2));
        let p = PhysicalField3D::zeros(Grid { p1: 4, p2: 4, p3: 4 });
        assert!(t.to_spectral(&p, 1.0, 1.0, true).is_err());
        assert!(Transform::new(Dims::new(2, 2, 2), Grid { p1: 4, p2: 5, p3: 3 }).is_err());
    }

    #[test]
    fn padding_rule() {
        let g = Grid::dealiased(Dims::new(8, 8, 10));
        assert_eq!((g.p1, g.p2, g.p3), (27, 27, 18));
        let g = Grid::dealiased(Dims::new(4, 3, 6));
        assert!(g.p1 * 2 >= 3 * 9 && g.p2 * 2 >= 3 * 7 && g.p3 * 2 >= 3 * 8);
        assert_eq!((smooth(13), smooth(26), smooth(49), smooth(1)), (15, 27, 50, 1));
    }

    /// Exact product by convolution over mode pairs, using
    /// `T_a T_b = (T_{a+b} + T_{|a-b|}) / 2`.
    fn convolution(a: &SpectralField3D, b: &SpectralField3D) -> SpectralField3D {
        let d = a.dims;
        let mut out = a.zeros_like();
        for (m1, m2) in d.modes() {
            for (k1, k2) in d.modes() {
                let (s1, s2) = (m1 + k1, m2 + k2);
                if s1.unsigned_abs() as usize > d.n1 || s2.unsigned_abs() as usize > d.n2 {
                    continue;
                }
                for i in 0..d.cheb() {
                    for j in 0..d.cheb() {
                        let v = a.get(m1, m2, i) * b.get(k1, k2, j) * 0.5;
                        for deg in [i + j, i.abs_diff(j)] {
                            if deg < d.cheb() {
                                let cur = out.get(s1, s2, deg);
                                out.set(s1, s2, deg, cur + v);
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn product_matches_convolution() {
        let d = Dims::new(2, 2, 4);
        for real in [true, false] {
            let a = random_field(d, 1, real);
            let b = random_field(d, 2, real);
            let got = pointwise_product(&a, &b).unwrap();
            let want = convolution(&a, &b);
            assert!(max_diff(&got.data, &want.data) < 1e-12, "real = {real}");
        }
    }

    #[test]
    fn top_modes_do_not_alias() {
        let d = Dims::new(3, 2, 3);
        let mut a = SpectralField3D::zeros(d, 1.0, 1.0, false);
        a.set(3, 0, 0, c(1.0, 0.0));
        let got = pointwise_product(&a, &a).unwrap();
        assert!(got.data.iter().all(|x| x.norm() < 1e-14));
        let mut b = SpectralField3D::zeros(d, 1.0, 1.0, false);
        b.set(-1, 0, 0, c(1.0, 0.0));
        let mut a1 = SpectralField3D::zeros(d, 1.0, 1.0, false);
        a1.set(1, 0, 0, c(1.0, 0.0));
        let one = pointwise_product(&a1, &b).unwrap();
        for (n1, n2) in d.modes() {
            for k in 0..d.cheb() {
                let want = if (n1, n2, k) == (0, 0, 0) { 1.0 } else { 0.0 };
                assert!((one.get(n1, n2, k) - c(want, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn product_with_constant_scales() {
        let d = Dims::new(2, 3, 3);
        let b = random_field(d, 5, true);
        let mut two = b.zeros_like();
        two.set(0, 0, 0, c(2.0, 0.0));
        let got = pointwise_product(&two, &b).unwrap();
        assert!(max_diff(&got.data, &b.scaled(2.0).data) < 1e-13);
    }

    /// `∫_{-1}^{1} T_i T_j dx`.
    fn cheb_l2(i: usize, j: usize) -> f64 {
        let int = |k: usize| if k % 2 == 1 { 0.0 } else { 2.0 / (1.0 - (k * k) as f64) };
        0.5 * (int(i + j) + int(i.abs_diff(j)))
    }

    #[test]
    fn parseval_consistency() {
        let d = Dims::new(3, 2, 5);
        let u = random_field(d, 9, true);
        let (l1, l2) = (2.0 * PI / u.alpha1, 2.0 * PI / u.alpha2);
        let mut spectral = 0.0;
        for (n1, n2) in d.modes() {
            let m = u.mode(n1, n2);
            for i in 0..d.cheb() {
                for j in 0..d.cheb() {
                    spectral += (m[i] * m[j].conj()).re * cheb_l2(i, j);
                }
            }
        }
        spectral *= l1 * l2;
        // |u|² has degree 2(N3+1) in x3: use a grid exact for it.
        let grid = Grid { p1: 8, p2: 6, p3: 2 * d.cheb() };
        let t = Transform::new(d, grid).unwrap();
        let p = t.to_physical(&u);
        let w3 = crate::chebyshev::clenshaw_curtis_weights(grid.p3);
        let cell = l1 * l2 / (grid.p1 * grid.p2) as f64;
        let mut quad = 0.0;
        for i3 in 0..=grid.p3 {
            for i1 in 0..grid.p1 {
                for i2 in 0..grid.p2 {
                    quad += p.get(i1, i2, i3).norm_sqr() * w3[i3] * cell;
                }
            }
        }
        assert!((quad - spectral).abs() <= 1e-11 * spectral, "{quad} vs {spectral}");
    }

    #[test]
    fn derivatives_of_single_mode() {
        let d = Dims::new(2, 2, 3);
        let mut u = SpectralField3D::zeros(d, 0.5, 2.0, false);
        u.set(1, -2, 2, c(1.0, 0.0));
        assert_eq!(u.d1().get(1, -2, 2), c(0.0, 0.5));
        assert_eq!(u.d2().get(1, -2, 2), c(0.0, -4.0));
        // d/dx T_2 = 4 T_1
        assert_eq!(u.d3().get(1, -2, 1), c(4.0, 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn round_trip_on_retained_modes(n1 in 0usize..4, n2 in 0usize..4, n3 in 0usize..6, seed in any::<u64>(), real in any::<bool>(), pad in any::<bool>()) {
            let d = Dims::new(n1, n2, n3);
            let u = random_field(d, seed, real);
            let t = if pad { Transform::dealiased(d) } else { Transform::new(d, Grid::minimal(d)).unwrap() };
            let back = t.to_spectral(&t.to_physical(&u), u.alpha1, u.alpha2, real).unwrap();
            prop_assert!(max_diff(&back.data, &u.data) < 1e-13);
        }

        #[test]
        fn transforms_are_linear(seed in any::<u64>(), a in -2.0f64..2.0) {
            let d = Dims::new(2, 3, 3);
            let t = Transform::dealiased(d);
            let u = random_field(d, seed, false);
            let v = random_field(d, seed.wrapping_add(1), false);
            let mut w = u.clone();
            w.axpy(a, &v);
            let pu = t.to_physical(&u);
            let pv = t.to_physical(&v);
            let pw = t.to_physical(&w);
            let comb: Vec<Complex64> = pu.data.iter().zip(&pv.data).map(|(x, y)| x + y * a).collect();
            prop_assert!(max_diff(&pw.data, &comb) < 1e-12);
        }

        #[test]
        fn real_fields_stay_conjugate_symmetric(seed in any::<u64>()) {
            let d = Dims::new(3, 2, 4);
            let a = random_field(d, seed, true);
            let b = random_field(d, seed ^ 0xabc, true);
            let p = pointwise_product(&a, &b).unwrap();
            prop_assert!(p.symmetry_defect() < 1e-14);
            let t = Transform::dealiased(d);
            prop_assert!(t.to_physical(&a).data.iter().all(|x| x.im == 0.0));
        }
    }
}
