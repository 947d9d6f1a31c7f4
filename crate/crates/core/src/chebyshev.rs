//! Chebyshev series on `[-1, 1]`.
//!
//! Coefficients are stored densely, lowest degree first. The inner product is
//! the Chebyshev-weighted one, `(f, g) = ∫ f g / sqrt(1 - x²) dx`, under which
//! `(T_0, T_0) = π/2` and `(T_k, T_k) = π` for `k >= 1`.

use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use crate::{Error, Result, Scalar};

/// Weight of `T_k` in the Chebyshev inner product.
#[inline]
pub fn weight(k: usize) -> f64 {
    if k == 0 {
        PI / 2.0
    } else {
        PI
    }
}

/// Inner-product weights for a series with `len` coefficients.
pub fn weights(len: usize) -> Vec<f64> {
    (0..len).map(weight).collect()
}

/// Dense Chebyshev coefficients `a_0 .. a_M`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebSeries<T> {
    coeffs: Vec<T>,
}

impl<T: Scalar> ChebSeries<T> {
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::EmptySeries);
        }
        Ok(Self { coeffs })
    }

    /// # Panics
    /// If `len == 0`.
    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "series length must be positive");
        Self {
            coeffs: vec![T::zero(); len],
        }
    }

    /// `T_k` stored in a series of length `len`.
    pub fn unit(k: usize, len: usize) -> Self {
        let mut s = Self::zeros(len.max(k + 1));
        s.coeffs[k] = T::from_f64(1.0);
        s
    }

    pub fn from_slice(coeffs: &[T]) -> Result<Self> {
        Self::new(coeffs.to_vec())
    }

    pub fn into_vec(self) -> Vec<T> {
        self.coeffs
    }

    /// Copy truncated or zero-padded to `len` coefficients.
    pub fn resized(&self, len: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(len.max(1), T::zero());
        Self { coeffs }
    }

    pub fn differentiate(&self) -> Self {
        differentiate(self)
    }

    pub fn eval_at(&self, x: f64) -> Result<T> {
        eval_at(self, x)
    }

    /// Chebyshev-weighted norm.
    pub fn norm(&self) -> f64 {
        weighted_norm(&self.coeffs)
    }
}

impl<T> Deref for ChebSeries<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.coeffs
    }
}

impl<T> DerefMut for ChebSeries<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }
}

/// `Σ w_k a_k conj(b_k)`; the shorter argument is treated as zero-padded.
pub fn inner_product<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .enumerate()
        .fold(T::zero(), |acc, (k, (&x, &y))| acc + x * y.conj() * weight(k))
}

pub fn weighted_norm<T: Scalar>(a: &[T]) -> f64 {
    a.iter()
        .enumerate()
        .map(|(k, x)| x.norm_sqr() * weight(k))
        .sum::<f64>()
        .sqrt()
}

/// Coefficients of `a'`, same length as `a` (the top coefficient is zero).
pub fn differentiate<T: Scalar>(a: &ChebSeries<T>) -> ChebSeries<T> {
    let mut out = vec![T::zero(); a.len()];
    derivative_into(a, &mut out);
    ChebSeries { coeffs: out }
}

/// Backward recurrence `b_k = b_{k+2} + 2(k+1) a_{k+1}`, `2 b_0 = b_2 + 2 a_1`.
///
/// `out` must have the same length as `a`.
pub fn derivative_into<T: Scalar>(a: &[T], out: &mut [T]) {
    let n = a.len();
    debug_assert_eq!(out.len(), n);
    out.iter_mut().for_each(|b| *b = T::zero());
    if n < 2 {
        return;
    }
    let mut next2 = T::zero(); // b_{k+2}
    let mut next1 = T::zero(); // b_{k+1}
    for k in (0..n - 1).rev() {
        let mut b = next2 + a[k + 1] * (2.0 * (k as f64 + 1.0));
        if k == 0 {
            b = b * 0.5;
        }
        out[k] = b;
        next2 = next1;
        next1 = b;
    }
}

/// Coefficients of `a''` written into `out` (same length as `a`).
pub fn second_derivative_into<T: Scalar>(a: &[T], out: &mut [T]) {
    let mut tmp = vec![T::zero(); a.len()];
    derivative_into(a, &mut tmp);
    derivative_into(&tmp, out);
}

/// Which wall a boundary functional is evaluated at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Lower,
    Upper,
}

impl Endpoint {
    pub fn sign(self) -> f64 {
        match self {
            Endpoint::Lower => -1.0,
            Endpoint::Upper => 1.0,
        }
    }
}

/// Row of the functional `a ↦ a^{(order)}(±1)` over coefficients `a_0..a_m`.
///
/// Uses the closed forms `T_j(±1) = (±1)^j`, `T_j'(±1) = (±1)^{j+1} j²` and
/// `T_j''(±1) = (±1)^j (j⁴ - j²)/3`.
pub fn boundary_row(order: usize, endpoint: Endpoint, m: usize) -> Result<Vec<f64>> {
    if order > 2 {
        return Err(Error::UnsupportedOrder(order));
    }
    let s = endpoint.sign();
    Ok((0..=m)
        .map(|j| {
            let jf = j as f64;
            let parity = if j % 2 == 0 { 1.0 } else { s };
            match order {
                0 => parity,
                // one extra factor of the endpoint sign from d/dx
                1 => parity * s * jf * jf,
                _ => parity * (jf.powi(4) - jf * jf) / 3.0,
            }
        })
        .collect())
}

/// `2 T_k = c_{k+2} T''_{k+2} + c_k T''_k + c_{k-2} T''_{k-2}` as
/// `(index, coefficient)` pairs, valid for `k >= 3`.
pub fn second_derivative_expansion(k: usize) -> Result<[(usize, f64); 3]> {
    if k < 3 {
        return Err(Error::DegenerateExpansion(k));
    }
    let kf = k as f64;
    Ok([
        (k + 2, 1.0 / (2.0 * (kf + 1.0) * (kf + 2.0))),
        (k, -1.0 / ((kf - 1.0) * (kf + 1.0))),
        (k - 2, 1.0 / (2.0 * (kf - 1.0) * (kf - 2.0))),
    ])
}

/// `Σ a_k T_k(x)` by Clenshaw's recurrence.
pub fn eval_at<T: Scalar>(a: &[T], x: f64) -> Result<T> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::OutOfDomain(x));
    }
    Ok(clenshaw(a, x))
}

pub(crate) fn clenshaw<T: Scalar>(a: &[T], x: f64) -> T {
    let mut b1 = T::zero();
    let mut b2 = T::zero();
    for k in (1..a.len()).rev() {
        let b0 = a[k] + b1 * (2.0 * x) - b2;
        b2 = b1;
        b1 = b0;
    }
    match a.first() {
        Some(&a0) => a0 + b1 * x - b2,
        None => T::zero(),
    }
}

/// Chebyshev–Gauss–Lobatto nodes `cos(π j / p)`, `j = 0..=p`.
pub fn gauss_lobatto_points(p: usize) -> Vec<f64> {
    (0..=p).map(|j| (PI * j as f64 / p as f64).cos()).collect()
}

/// Clenshaw–Curtis weights on the `p + 1` Gauss–Lobatto nodes; exact for
/// polynomials of degree `<= p` integrated against `dx` on `[-1, 1]`.
pub fn clenshaw_curtis_weights(p: usize) -> Vec<f64> {
    assert!(p >= 1, "need at least two nodes");
    let pf = p as f64;
    (0..=p)
        .map(|j| {
            let theta = PI * j as f64 / pf;
            let mut sum = 0.0;
            for k in 0..=p / 2 {
                let bk = if k == 0 || 2 * k == p { 1.0 } else { 2.0 };
                sum += bk / (4.0 * (k * k) as f64 - 1.0) * (2.0 * k as f64 * theta).cos();
            }
            let cj = if j == 0 || j == p { 1.0 } else { 2.0 };
            -cj / pf * sum
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    /// Exact monomial coefficients of T_0..T_n.
    fn monomials(n: usize) -> Vec<Vec<i128>> {
        let mut t = vec![vec![1i128], vec![0, 1]];
        for k in 2..=n {
            let mut next = vec![0i128; k + 1];
            for (i, &c) in t[k - 1].iter().enumerate() {
                next[i + 1] += 2 * c;
            }
            for (i, &c) in t[k - 2].iter().enumerate() {
                next[i] -= c;
            }
            t.push(next);
        }
        t.truncate(n + 1);
        t
    }

    fn to_monomial(a: &[i128], t: &[Vec<i128>]) -> Vec<i128> {
        let mut out = vec![0i128; a.len()];
        for (k, &ak) in a.iter().enumerate() {
            for (i, &c) in t[k].iter().enumerate() {
                out[i] += ak * c;
            }
        }
        out
    }

    fn mono_derivative(p: &[i128]) -> Vec<i128> {
        let mut out = vec![0i128; p.len()];
        for i in 1..p.len() {
            out[i - 1] = p[i] * i as i128;
        }
        out
    }

    #[test]
    fn inner_product_examples() {
        let t0 = ChebSeries::<f64>::unit(0, 1);
        let t1 = ChebSeries::<f64>::unit(1, 2);
        let t2 = ChebSeries::<f64>::unit(2, 3);
        let t3 = ChebSeries::<f64>::unit(3, 4);
        assert!((inner_product(&t0, &t0) - PI / 2.0).abs() < 1e-15);
        assert!((inner_product(&t3, &t3) - PI).abs() < 1e-15);
        assert_eq!(inner_product(&t1, &t2), 0.0);
    }

    #[test]
    fn inner_product_conjugates_second_argument() {
        let a = [Complex64::new(0.0, 1.0)];
        let v = inner_product(&a, &a);
        assert!((v - Complex64::new(PI / 2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn differentiate_examples() {
        let d1 = differentiate(&ChebSeries::<f64>::unit(1, 2));
        assert_eq!(&d1[..], &[1.0, 0.0]);
        let d2 = differentiate(&ChebSeries::<f64>::unit(2, 3));
        assert_eq!(&d2[..], &[0.0, 4.0, 0.0]);
        let d3 = differentiate(&ChebSeries::<f64>::unit(3, 4));
        assert_eq!(&d3[..], &[3.0, 0.0, 6.0, 0.0]);
    }

    #[test]
    fn differentiate_matches_symbolic_derivative_up_to_degree_ten() {
        let t = monomials(10);
        for d in 0..=10usize {
            // integer coefficients so every step is exact in f64
            let a: Vec<i128> = (0..=d).map(|k| (3 * k as i128 + 1) * if k % 2 == 0 { 1 } else { -1 }).collect();
            let af: Vec<f64> = a.iter().map(|&x| x as f64).collect();
            let da = differentiate(&ChebSeries::new(af).unwrap());
            let da_int: Vec<i128> = da.iter().map(|&x| {
                assert_eq!(x.fract(), 0.0);
                x as i128
            }).collect();
            let lhs = to_monomial(&da_int, &t);
            let rhs = mono_derivative(&to_monomial(&a, &t));
            assert_eq!(lhs, rhs, "degree {d}");
        }
    }

    #[test]
    fn boundary_row_examples() {
        // the printed lower-wall derivative pattern (0, -1, 4, -9, 16) is the
        // negated functional; T_1' = 1 everywhere, so the exact row starts (0, 1, ...)
        let printed = [0.0, -1.0, 4.0, -9.0, 16.0];
        let row = boundary_row(1, Endpoint::Lower, 4).unwrap();
        assert_eq!(row, printed.iter().map(|x| -x).collect::<Vec<_>>());
        assert_eq!(boundary_row(0, Endpoint::Upper, 3).unwrap(), vec![1.0; 4]);
        assert_eq!(
            boundary_row(2, Endpoint::Lower, 3).unwrap(),
            vec![0.0, 0.0, 4.0, -24.0]
        );
        assert!(matches!(
            boundary_row(3, Endpoint::Upper, 3),
            Err(Error::UnsupportedOrder(3))
        ));
    }

    #[test]
    fn expansion_examples() {
        let close = |got: [(usize, f64); 3], want: [(usize, f64); 3]| {
            for (g, w) in got.iter().zip(want.iter()) {
                assert_eq!(g.0, w.0);
                assert!((g.1 - w.1).abs() < 1e-15, "{g:?} vs {w:?}");
            }
        };
        close(
            second_derivative_expansion(4).unwrap(),
            [(6, 1.0 / 60.0), (4, -1.0 / 15.0), (2, 1.0 / 12.0)],
        );
        close(
            second_derivative_expansion(3).unwrap(),
            [(5, 1.0 / 40.0), (3, -1.0 / 8.0), (1, 1.0 / 4.0)],
        );
        assert!(second_derivative_expansion(2).is_err());
    }

    #[test]
    fn expansion_identity_is_exact_polynomial_algebra() {
        let t = monomials(32);
        for k in 3..=28usize {
            let ki = k as i128;
            // scale every term by a common multiple of the three denominators
            let d_hi = 2 * (ki + 1) * (ki + 2);
            let d_mid = (ki - 1) * (ki + 1);
            let d_lo = 2 * (ki - 1) * (ki - 2);
            let l = d_hi * d_mid * d_lo;
            let second = |j: usize| mono_derivative(&mono_derivative(&t[j]));
            let mut acc = vec![0i128; k + 3];
            for (i, c) in t[k].iter().enumerate() {
                acc[i] += 2 * l * c;
            }
            for (j, scale) in [(k + 2, l / d_hi), (k, -l / d_mid), (k - 2, l / d_lo)] {
                for (i, c) in second(j).iter().enumerate() {
                    acc[i] -= scale * c;
                }
            }
            assert!(acc.iter().all(|&c| c == 0), "k = {k}");
        }
    }

    #[test]
    fn eval_examples() {
        let t5 = ChebSeries::<f64>::unit(5, 6);
        assert!((t5.eval_at(1.0).unwrap() - 1.0).abs() < 1e-15);
        let t2 = ChebSeries::<f64>::unit(2, 3);
        assert!((t2.eval_at(0.0).unwrap() + 1.0).abs() < 1e-15);
        let s = ChebSeries::new(vec![2.0, 3.0]).unwrap();
        assert!((s.eval_at(0.5).unwrap() - 3.5).abs() < 1e-15);
        assert!(matches!(s.eval_at(1.5), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn empty_series_rejected() {
        assert!(matches!(ChebSeries::<f64>::new(vec![]), Err(Error::EmptySeries)));
    }

    #[test]
    fn clenshaw_curtis_integrates_polynomials() {
        let p = 12;
        let x = gauss_lobatto_points(p);
        let w = clenshaw_curtis_weights(p);
        for deg in 0..=p {
            let q: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(deg as i32)).sum();
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            assert!((q - exact).abs() < 1e-14, "degree {deg}: {q} vs {exact}");
        }
    }

    fn series(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..1.0, 1..max_len)
    }

    proptest! {
        #[test]
        fn inner_product_symmetric_and_positive(a in series(20), b in series(20)) {
            let ab = inner_product(&a, &b);
            let ba = inner_product(&b, &a);
            prop_assert!((ab - ba).abs() <= 1e-13 * (1.0 + ab.abs()));
            let aa = inner_product(&a, &a);
            prop_assert!(aa >= 0.0);
            if a.iter().any(|&x| x != 0.0) {
                prop_assert!(aa > 0.0);
            }
        }

        #[test]
        fn inner_product_bilinear(a in series(12), b in series(12), c in series(12), s in -3.0f64..3.0) {
            let n = a.len().max(b.len());
            let mut lin = vec![0.0; n];
            for (i, v) in lin.iter_mut().enumerate() {
                *v = s * a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0);
            }
            let lhs = inner_product(&lin, &c);
            let rhs = s * inner_product(&a, &c) + inner_product(&b, &c);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn boundary_rows_agree_with_differentiate_and_eval(a in series(24), order in 0usize..3, upper: bool) {
            let e = if upper { Endpoint::Upper } else { Endpoint::Lower };
            let row = boundary_row(order, e, a.len() - 1).unwrap();
            let direct: f64 = row.iter().zip(&a).map(|(r, x)| r * x).sum();
            let mut d = ChebSeries::new(a.clone()).unwrap();
            for _ in 0..order {
                d = d.differentiate();
            }
            let via_eval = d.eval_at(e.sign()).unwrap();
            let scale: f64 = row.iter().zip(&a).map(|(r, x)| (r * x).abs()).sum::<f64>().max(1e-300);
            prop_assert!((direct - via_eval).abs() <= 1e-12 * scale, "{} vs {}", direct, via_eval);
        }

        #[test]
        fn clenshaw_matches_trigonometric_definition(a in series(16), theta in 0.0f64..PI) {
            let x = theta.cos();
            let direct: f64 = a.iter().enumerate().map(|(k, &c)| c * (k as f64 * theta).cos()).sum();
            let got = eval_at(&a, x).unwrap();
            prop_assert!((got - direct).abs() < 1e-12);
        }
    }
}
