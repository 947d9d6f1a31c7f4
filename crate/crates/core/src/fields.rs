//! Toroidal–poloidal–mean representation of solenoidal fields and the
//! boundary constraints of each scalar component.
//!
//! A solenoidal field periodic in `x1, x2` is written
//! `F = ∇×(T e3) + ∇×∇×(P e3) + (M1(x3), M2(x3), 0)`. Per horizontal mode
//! `(n1, n2) ≠ (0, 0)` with `a = (α1 n1, α2 n2)`, `k² = |a|²`:
//!
//! - toroidal part: `(i a2 T, -i a1 T, 0)`
//! - poloidal part: `(i a1 P', i a2 P', k² P)`
//!
//! and the inverse relations are `-k² T = i a2 F1 - i a1 F2`, `k² P = F3`.

use num_complex::Complex64;

use crate::chebyshev::{boundary_row, derivative_into, ChebSeries, Endpoint};
use crate::galerkin::ConstraintSet;
use crate::transforms::{Dims, SpectralField3D};
use crate::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Horizontal wavenumber scales `α_i = 2π / L_i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wavenumbers {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Wavenumbers {
    pub fn new(alpha1: f64, alpha2: f64) -> Self {
        Self { alpha1, alpha2 }
    }

    pub fn from_periods(l1: f64, l2: f64) -> Self {
        let tau = 2.0 * std::f64::consts::PI;
        Self::new(tau / l1, tau / l2)
    }

    pub fn a(&self, n1: i64, n2: i64) -> (f64, f64) {
        (self.alpha1 * n1 as f64, self.alpha2 * n2 as f64)
    }

    pub fn k2(&self, n1: i64, n2: i64) -> f64 {
        let (a1, a2) = self.a(n1, n2);
        a1 * a1 + a2 * a2
    }

    pub fn k(&self, n1: i64, n2: i64) -> f64 {
        self.k2(n1, n2).sqrt()
    }
}

/// Three spectral components sharing dims and wavenumbers.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub c: [SpectralField3D; 3],
}

impl VectorField {
    pub fn zeros(dims: Dims, wn: Wavenumbers) -> Self {
        let z = SpectralField3D::zeros(dims, wn.alpha1, wn.alpha2, true);
        Self {
            c: [z.clone(), z.clone(), z],
        }
    }

    pub fn dims(&self) -> Dims {
        self.c[0].dims
    }

    pub fn wavenumbers(&self) -> Wavenumbers {
        Wavenumbers::new(self.c[0].alpha1, self.c[0].alpha2)
    }

    pub fn divergence(&self) -> SpectralField3D {
        let mut d = self.c[0].d1();
        d.axpy(1.0, &self.c[1].d2());
        d.axpy(1.0, &self.c[2].d3());
        d
    }

    pub fn curl(&self) -> VectorField {
        let [x, y, z] = &self.c;
        let mut c1 = z.d2();
        c1.axpy(-1.0, &y.d3());
        let mut c2 = x.d3();
        c2.axpy(-1.0, &z.d1());
        let mut c3 = y.d1();
        c3.axpy(-1.0, &x.d2());
        VectorField { c: [c1, c2, c3] }
    }

    pub fn axpy(&mut self, a: f64, other: &VectorField) {
        for (s, o) in self.c.iter_mut().zip(&other.c) {
            s.axpy(a, o);
        }
    }

    /// Sum of squared moduli of all coefficients.
    pub fn coeff_norm_sqr(&self) -> f64 {
        self.c
            .iter()
            .flat_map(|f| f.data.iter())
            .map(|x| x.norm_sqr())
            .sum()
    }
}

/// Potentials of a solenoidal field. `tor` and `pol` have zero (0, 0) mode.
#[derive(Clone, Debug, PartialEq)]
pub struct TpmDecomposition {
    pub tor: SpectralField3D,
    pub pol: SpectralField3D,
    pub mean1: Vec<Complex64>,
    pub mean2: Vec<Complex64>,
}

impl TpmDecomposition {
    pub fn zeros(dims: Dims, wn: Wavenumbers) -> Self {
        let z = SpectralField3D::zeros(dims, wn.alpha1, wn.alpha2, true);
        Self {
            tor: z.clone(),
            pol: z,
            mean1: vec![Complex64::new(0.0, 0.0); dims.cheb()],
            mean2: vec![Complex64::new(0.0, 0.0); dims.cheb()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.tor.dims
    }

    pub fn wavenumbers(&self) -> Wavenumbers {
        Wavenumbers::new(self.tor.alpha1, self.tor.alpha2)
    }
}

/// Relative spectral divergence `‖∇·F‖ / ‖∇F‖`-like measure used to flag
/// inputs that are not solenoidal.
pub fn relative_divergence(f: &VectorField) -> f64 {
    let div: f64 = f.divergence().data.iter().map(|x| x.norm_sqr()).sum();
    let scale: f64 = [f.c[0].d1(), f.c[1].d2(), f.c[2].d3()]
        .iter()
        .flat_map(|g| g.data.iter())
        .map(|x| x.norm_sqr())
        .sum();
    if scale == 0.0 {
        0.0
    } else {
        (div / scale).sqrt()
    }
}

/// Potentials of `f`; warns if `f` is visibly non-solenoidal.
pub fn decompose_solenoidal(f: &VectorField) -> TpmDecomposition {
    let rel = relative_divergence(f);
    if rel > 1e-8 {
        log::warn!("decomposing a field with relative divergence {rel:.2e}");
    }
    let d = f.dims();
    let wn = f.wavenumbers();
    let mut out = TpmDecomposition::zeros(d, wn);
    for (n1, n2) in d.modes() {
        if (n1, n2) == (0, 0) {
            out.mean1.copy_from_slice(f.c[0].mode(0, 0));
            out.mean2.copy_from_slice(f.c[1].mode(0, 0));
            continue;
        }
        let (a1, a2) = wn.a(n1, n2);
        let k2 = a1 * a1 + a2 * a2;
        let (f1, f2, f3) = (f.c[0].mode(n1, n2), f.c[1].mode(n1, n2), f.c[2].mode(n1, n2));
        let tor = out.tor.mode_mut(n1, n2);
        for j in 0..d.cheb() {
            tor[j] = -(I * a2 * f1[j] - I * a1 * f2[j]) / k2;
        }
        let pol = out.pol.mode_mut(n1, n2);
        for j in 0..d.cheb() {
            pol[j] = f3[j] / k2;
        }
    }
    out
}

pub fn reconstruct_vector(p: &TpmDecomposition) -> VectorField {
    let d = p.dims();
    let wn = p.wavenumbers();
    let mut out = VectorField::zeros(d, wn);
    let mut dp = vec![Complex64::new(0.0, 0.0); d.cheb()];
    for (n1, n2) in d.modes() {
        if (n1, n2) == (0, 0) {
            out.c[0].mode_mut(0, 0).copy_from_slice(&p.mean1);
            out.c[1].mode_mut(0, 0).copy_from_slice(&p.mean2);
            continue;
        }
        let (a1, a2) = wn.a(n1, n2);
        let k2 = a1 * a1 + a2 * a2;
        let t = p.tor.mode(n1, n2);
        let g = p.pol.mode(n1, n2);
        derivative_into(g, &mut dp);
        for (c, (ta, pa)) in [(0usize, (I * a2, I * a1)), (1, (-I * a1, I * a2))] {
            let m = out.c[c].mode_mut(n1, n2);
            for j in 0..d.cheb() {
                m[j] = ta * t[j] + pa * dp[j];
            }
        }
        let m = out.c[2].mode_mut(n1, n2);
        for j in 0..d.cheb() {
            m[j] = g[j] * k2;
        }
    }
    out
}

/// Coefficients of `e3 · ∇×∇×F` for one mode: `i a1 F1' + i a2 F2' + k² F3`.
/// Gradients are annihilated; for the poloidal field of `G` this equals
/// `k² (k² G - G'')`.
pub fn poloidal_velocity_rhs(f: &VectorField, n1: i64, n2: i64) -> Result<ChebSeries<Complex64>> {
    if (n1, n2) == (0, 0) {
        return Err(Error::MeanMode("poloidal"));
    }
    let d = f.dims();
    let (a1, a2) = f.wavenumbers().a(n1, n2);
    let k2 = a1 * a1 + a2 * a2;
    let mut d1 = vec![Complex64::new(0.0, 0.0); d.cheb()];
    let mut d2 = d1.clone();
    derivative_into(f.c[0].mode(n1, n2), &mut d1);
    derivative_into(f.c[1].mode(n1, n2), &mut d2);
    let f3 = f.c[2].mode(n1, n2);
    ChebSeries::new(
        (0..d.cheb())
            .map(|j| I * a1 * d1[j] + I * a2 * d2[j] + f3[j] * k2)
            .collect(),
    )
}

/// Exterior matching row for the poloidal magnetic potential at `x3 = 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InsulatingMatch {
    /// `k P - P' = 0`, i.e. `Σ (k - n²) b_n = 0`. This matches an exterior
    /// mode growing like `exp(k x3)`; free poloidal modes then barely decay.
    AsPrinted,
    /// `k P + P' = 0`: continuity with an exterior potential field decaying
    /// like `exp(-k x3)`. Used by the simulator unless configured otherwise.
    #[default]
    Decaying,
}

/// Scalar components of the model, each with its own boundary conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Component {
    Temperature,
    ToroidalB,
    PoloidalB { n1: i64, n2: i64 },
    MeanB,
    ToroidalV,
    PoloidalV,
    MeanV,
}

fn row(order: usize, end: Endpoint, m: usize) -> Vec<f64> {
    boundary_row(order, end, m).expect("orders 0..=2 are supported")
}

/// Constraint rows on `span T_0..T_{N3+1}` for one component.
///
/// - temperature, toroidal/mean velocity: `v(±1) = 0`
/// - toroidal/mean magnetic: `v(1) = 0`, `v'(-1) = 0`
/// - poloidal magnetic: exterior match at `+1`, `v''(-1) = 0`, `v(-1) = 0`
/// - poloidal velocity: `v(±1) = v'(±1) = 0`
pub fn constraints_for(component: Component, n3: usize, wn: Wavenumbers) -> Result<ConstraintSet> {
    constraints_with_match(component, n3, wn, InsulatingMatch::AsPrinted)
}

pub fn constraints_with_match(
    component: Component,
    n3: usize,
    wn: Wavenumbers,
    matching: InsulatingMatch,
) -> Result<ConstraintSet> {
    use Endpoint::{Lower, Upper};
    let m = n3 + 1;
    let rows = match component {
        Component::Temperature | Component::ToroidalV | Component::MeanV => {
            vec![row(0, Upper, m), row(0, Lower, m)]
        }
        Component::ToroidalB | Component::MeanB => vec![row(0, Upper, m), row(1, Lower, m)],
        Component::PoloidalV => vec![row(0, Upper, m), row(0, Lower, m), row(1, Upper, m), row(1, Lower, m)],
        Component::PoloidalB { n1, n2 } => {
            if (n1, n2) == (0, 0) {
                return Err(Error::MeanMode("poloidal"));
            }
            let k = wn.k(n1, n2);
            let sign = match matching {
                InsulatingMatch::AsPrinted => -1.0,
                InsulatingMatch::Decaying => 1.0,
            };
            let top: Vec<f64> = row(0, Upper, m)
                .iter()
                .zip(row(1, Upper, m))
                .map(|(v, d)| k * v + sign * d)
                .collect();
            vec![top, row(2, Lower, m), row(0, Lower, m)]
        }
    };
    ConstraintSet::new(rows, m + 1)
}
