//! Rotating plane-layer magnetoconvection.
//!
//! Unknowns: temperature deviation `θ`, velocity `v` and magnetic field `b`
//! on `x3 ∈ [-1, 1]`, periodic in `x1, x2`. Both vector fields are stored as
//! toroidal/poloidal potentials plus a horizontal mean.
//!
//! ```text
//! ∂v/∂t = v×(∇×v) + Pτ v×e_r + PΔv + PRθ e3 - ∇p - b×(∇×b)
//! ∂b/∂t = ∇×(v×b) + ηΔb
//! ∂θ/∂t = -(v·∇)θ + v3 + Δθ
//! ```
//!
//! No-slip isothermal walls; the magnetic field matches an exterior potential
//! field at `x3 = 1` and meets a perfect conductor at `x3 = -1`.
//!
//! Every right-hand side is reduced to one 1D problem per horizontal mode and
//! component, which is solved with the correction algorithm of
//! [`crate::galerkin`]. Products are evaluated on a 3/2-rule padded grid.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chebyshev::{clenshaw, clenshaw_curtis_weights, gauss_lobatto_points, second_derivative_into, weights};
use crate::fields::{
    constraints_with_match, poloidal_velocity_rhs, reconstruct_vector, Component, InsulatingMatch,
    TpmDecomposition, VectorField, Wavenumbers,
};
use crate::galerkin::{correct, prepare_correction, ConstraintSet, CorrectionBasis, IdentityOperator};
use crate::solvers::{PreparedFourthOrder, PreparedHelmholtz};
use crate::transforms::{Dims, PhysicalField3D, SpectralField3D, Transform};
use crate::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Physical parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Params {
    /// Prandtl number.
    pub p: f64,
    /// Rayleigh number.
    pub r: f64,
    /// Rotation parameter (Taylor number τ²).
    pub tau: f64,
    /// Magnetic Prandtl number.
    pub pm: f64,
    /// Magnetic diffusivity in the induction equation.
    pub eta: f64,
    /// Rotation axis (used as given, not normalised).
    pub e_r: [f64; 3],
    pub l1: f64,
    pub l2: f64,
}

impl Params {
    /// `P = 1, R = 50000, τ = 500, Pm = 2, η = P/Pm, e_r = (0, 1, 1)`,
    /// periods `2π`.
    pub fn reference() -> Self {
        Self::with_pm(1.0, 50_000.0, 500.0, 2.0)
    }

    /// Parameters with `η = P / Pm`, `e_r = (0, 1, 1)` and `2π` periods.
    pub fn with_pm(p: f64, r: f64, tau: f64, pm: f64) -> Self {
        Self {
            p,
            r,
            tau,
            pm,
            eta: p / pm,
            e_r: [0.0, 1.0, 1.0],
            l1: 2.0 * std::f64::consts::PI,
            l2: 2.0 * std::f64::consts::PI,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("P", self.p), ("Pm", self.pm), ("eta", self.eta), ("L1", self.l1), ("L2", self.l2)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let finite = [self.r, self.tau, self.e_r[0], self.e_r[1], self.e_r[2]];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("R, tau and e_r must be finite".into()));
        }
        Ok(())
    }

    pub fn wavenumbers(&self) -> Wavenumbers {
        Wavenumbers::from_periods(self.l1, self.l2)
    }
}

impl Default for Params {
    fn default() -> Self {
        Self::reference()
    }
}

/// Time-stepping scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    Rk4,
    Imex,
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "euler" => Ok(Scheme::Euler),
            "rk4" => Ok(Scheme::Rk4),
            "imex" => Ok(Scheme::Imex),
            _ => Err(format!("unknown scheme {s:?} (expected euler, rk4 or imex)")),
        }
    }
}

/// Spectral coefficients of all unknowns. Potentials have a zero (0, 0) mode;
/// means are Chebyshev series in `x3`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState {
    pub theta: SpectralField3D,
    pub v_tor: SpectralField3D,
    pub v_pol: SpectralField3D,
    pub v_mean: [Vec<Complex64>; 2],
    pub b_tor: SpectralField3D,
    pub b_pol: SpectralField3D,
    pub b_mean: [Vec<Complex64>; 2],
    pub t: f64,
}

impl SpectralState {
    pub fn zeros(dims: Dims, wn: Wavenumbers) -> Self {
        let f = SpectralField3D::zeros(dims, wn.alpha1, wn.alpha2, true);
        let m = vec![ZERO; dims.cheb()];
        Self {
            theta: f.clone(),
            v_tor: f.clone(),
            v_pol: f.clone(),
            v_mean: [m.clone(), m.clone()],
            b_tor: f.clone(),
            b_pol: f,
            b_mean: [m.clone(), m],
            t: 0.0,
        }
    }

    pub fn dims(&self) -> Dims {
        self.theta.dims
    }

    pub fn wavenumbers(&self) -> Wavenumbers {
        Wavenumbers::new(self.theta.alpha1, self.theta.alpha2)
    }

    /// Mode arrays in storage order: θ, v_T, v_P, b_T, b_P.
    pub fn fields(&self) -> [&SpectralField3D; 5] {
        [&self.theta, &self.v_tor, &self.v_pol, &self.b_tor, &self.b_pol]
    }

    fn fields_mut(&mut self) -> [&mut SpectralField3D; 5] {
        [&mut self.theta, &mut self.v_tor, &mut self.v_pol, &mut self.b_tor, &mut self.b_pol]
    }

    /// Mean arrays: v_M1, v_M2, b_M1, b_M2.
    pub fn means(&self) -> [&Vec<Complex64>; 4] {
        [&self.v_mean[0], &self.v_mean[1], &self.b_mean[0], &self.b_mean[1]]
    }

    fn means_mut(&mut self) -> [&mut Vec<Complex64>; 4] {
        let [a, b] = &mut self.v_mean;
        let [c, d] = &mut self.b_mean;
        [a, b, c, d]
    }

    /// `self += a · other` on all coefficients (time untouched).
    pub fn axpy(&mut self, a: f64, other: &SpectralState) {
        for (s, o) in self.fields_mut().into_iter().zip(other.fields()) {
            s.axpy(a, o);
        }
        for (s, o) in self.means_mut().into_iter().zip(other.means()) {
            s.iter_mut().zip(o.iter()).for_each(|(x, &y)| *x += y * a);
        }
    }

    /// All coefficients in a fixed order: the five mode arrays, then the
    /// four means.
    pub fn pack(&self) -> Vec<Complex64> {
        let mut out = Vec::new();
        for f in self.fields() {
            out.extend_from_slice(&f.data);
        }
        for m in self.means() {
            out.extend_from_slice(m);
        }
        out
    }

    /// Inverse of [`SpectralState::pack`].
    pub fn unpack(&mut self, data: &[Complex64]) -> Result<()> {
        let d = self.dims();
        let expected = 5 * d.len() + 4 * d.cheb();
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: data.len(),
            });
        }
        let mut it = data.iter().copied();
        for f in self.fields_mut() {
            f.data.iter_mut().for_each(|x| *x = it.next().expect("length checked"));
        }
        for m in self.means_mut() {
            m.iter_mut().for_each(|x| *x = it.next().expect("length checked"));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.pack().iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    pub fn velocity_potentials(&self) -> TpmDecomposition {
        TpmDecomposition {
            tor: self.v_tor.clone(),
            pol: self.v_pol.clone(),
            mean1: self.v_mean[0].clone(),
            mean2: self.v_mean[1].clone(),
        }
    }

    pub fn magnetic_potentials(&self) -> TpmDecomposition {
        TpmDecomposition {
            tor: self.b_tor.clone(),
            pol: self.b_pol.clone(),
            mean1: self.b_mean[0].clone(),
            mean2: self.b_mean[1].clone(),
        }
    }
}

/// Energies at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    pub e_v: f64,
    pub e_b: f64,
}

/// Per-field RMS amplitudes for seeded initial conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Amplitudes {
    pub theta: f64,
    pub v: f64,
    pub b: f64,
}

impl Default for Amplitudes {
    fn default() -> Self {
        Self {
            theta: 0.1,
            v: 1.0,
            b: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimOptions {
    /// Drop the quadratic terms (advection, Lorentz force, induction).
    pub linear_only: bool,
    pub matching: InsulatingMatch,
}

/// Orthogonal projection onto one constraint space.
#[derive(Clone, Debug)]
struct Projector {
    constraints: ConstraintSet,
    cb: CorrectionBasis,
}

impl Projector {
    fn new(constraints: ConstraintSet) -> Result<Self> {
        let dim = constraints.dim();
        let cb = prepare_correction(&constraints, &IdentityOperator { dim }, &weights(dim))?;
        Ok(Self { constraints, cb })
    }

    fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        correct(f, &self.cb).expect("lengths agree by construction")
    }
}

/// Operators that depend on the mode only through `k²`.
#[derive(Debug)]
struct WaveOps {
    b_pol: Projector,
    /// `P_V((k² - D²) v - f) = 0` on the clamped space.
    v_pol: PreparedHelmholtz,
}

#[derive(Debug)]
struct ImexWaveOps {
    theta: PreparedHelmholtz,
    v_tor: PreparedHelmholtz,
    v_pol: PreparedFourthOrder,
    b_tor: PreparedHelmholtz,
    b_pol: PreparedHelmholtz,
}

#[derive(Debug)]
struct ImexOps {
    dt: f64,
    by_k2: HashMap<u64, ImexWaveOps>,
    theta_mean: PreparedHelmholtz,
    v_mean: PreparedHelmholtz,
    b_mean: PreparedHelmholtz,
}

/// Right-hand sides of the three equations before projection.
struct Forcing {
    theta: SpectralField3D,
    v: VectorField,
    b: VectorField,
}

/// Per-mode output of a projection or solve: θ, v_T, v_P, b_T, b_P.
type ModeOut = [Vec<Complex64>; 5];

/// The discretised model: transforms, constraint spaces and cached solvers.
#[derive(Debug)]
pub struct Simulator {
    pub params: Params,
    pub dims: Dims,
    pub options: SimOptions,
    wn: Wavenumbers,
    transform: Transform,
    dirichlet: Projector,
    tor_b: Projector,
    clamped: ConstraintSet,
    by_k2: HashMap<u64, WaveOps>,
    imex: RwLock<Option<Arc<ImexOps>>>,
    /// Gram matrix `∫ T_i T_j dx3` from Clenshaw–Curtis quadrature.
    gram: Vec<f64>,
}

fn key(k2: f64) -> u64 {
    k2.to_bits()
}

impl Simulator {
    /// Preliminary step: constraint sets, complement bases and the
    /// mode-dependent explicit operators.
    pub fn new(params: Params, dims: Dims, options: SimOptions) -> Result<Self> {
        params.validate()?;
        if dims.n3 < 2 {
            return Err(Error::InvalidConfig(format!(
                "N3 must be at least 2 (clamped velocity needs 4 constraints), got {}",
                dims.n3
            )));
        }
        if dims.cheb() > 12 {
            log::warn!(
                "N3 = {}: the weighted poloidal velocity equation has spurious growing modes beyond 12 coefficients",
                dims.n3
            );
        }
        let wn = params.wavenumbers();
        let n3 = dims.n3;
        let dirichlet = Projector::new(constraints_with_match(Component::Temperature, n3, wn, options.matching)?)?;
        let tor_b = Projector::new(constraints_with_match(Component::ToroidalB, n3, wn, options.matching)?)?;
        let clamped = constraints_with_match(Component::PoloidalV, n3, wn, options.matching)?;
        let mut by_k2 = HashMap::new();
        for (n1, n2) in dims.modes() {
            if (n1, n2) == (0, 0) {
                continue;
            }
            let k2 = wn.k2(n1, n2);
            if by_k2.contains_key(&key(k2)) {
                continue;
            }
            let ops = (|| -> Result<WaveOps> {
                Ok(WaveOps {
                    b_pol: Projector::new(constraints_with_match(
                        Component::PoloidalB { n1, n2 },
                        n3,
                        wn,
                        options.matching,
                    )?)?,
                    v_pol: PreparedHelmholtz::new(k2, -1.0, &clamped)?,
                })
            })()
            .map_err(|e| e.at_mode(n1, n2))?;
            by_k2.insert(key(k2), ops);
        }
        let cheb = dims.cheb();
        let p = 2 * cheb;
        let nodes = gauss_lobatto_points(p);
        let w = clenshaw_curtis_weights(p);
        let mut gram = vec![0.0; cheb * cheb];
        let tvals: Vec<Vec<f64>> = nodes
            .iter()
            .map(|&x| {
                (0..cheb)
                    .map(|k| {
                        let mut e = vec![0.0; k + 1];
                        e[k] = 1.0;
                        clenshaw(&e, x)
                    })
                    .collect()
            })
            .collect();
        for (j, t) in tvals.iter().enumerate() {
            for a in 0..cheb {
                for b in 0..cheb {
                    gram[a * cheb + b] += w[j] * t[a] * t[b];
                }
            }
        }
        Ok(Self {
            params,
            dims,
            options,
            wn,
            transform: Transform::dealiased(dims),
            dirichlet,
            tor_b,
            clamped,
            by_k2,
            imex: RwLock::new(None),
            gram,
        })
    }

    pub fn wavenumbers(&self) -> Wavenumbers {
        self.wn
    }

    pub fn zero_state(&self) -> SpectralState {
        SpectralState::zeros(self.dims, self.wn)
    }

    fn wave(&self, n1: i64, n2: i64) -> &WaveOps {
        &self.by_k2[&key(self.wn.k2(n1, n2))]
    }

    /// Constraint set of a component at a mode (poloidal magnetic depends on
    /// the mode).
    pub fn constraints(&self, component: Component) -> &ConstraintSet {
        match component {
            Component::Temperature | Component::ToroidalV | Component::MeanV => &self.dirichlet.constraints,
            Component::ToroidalB | Component::MeanB => &self.tor_b.constraints,
            Component::PoloidalV => &self.clamped,
            Component::PoloidalB { n1, n2 } => &self.wave(n1, n2).b_pol.constraints,
        }
    }

    pub fn velocity(&self, s: &SpectralState) -> VectorField {
        reconstruct_vector(&s.velocity_potentials())
    }

    pub fn magnetic(&self, s: &SpectralState) -> VectorField {
        reconstruct_vector(&s.magnetic_potentials())
    }

    fn laplacian(&self, f: &SpectralField3D) -> SpectralField3D {
        let mut out = f.zeros_like();
        let c = self.dims.cheb();
        for (pos, (o, a)) in out.data.chunks_mut(c).zip(f.data.chunks(c)).enumerate() {
            let (n1, n2) = self.dims.mode_at(pos);
            let k2 = self.wn.k2(n1, n2);
            second_derivative_into(a, o);
            for (x, &y) in o.iter_mut().zip(a) {
                *x -= y * k2;
            }
        }
        out
    }

    fn forcing(&self, s: &SpectralState, diffusion: bool) -> Result<Forcing> {
        let par = &self.params;
        let v = self.velocity(s);
        let b = self.magnetic(s);
        let mut f_theta = s.theta.zeros_like();
        let mut f_v = VectorField::zeros(self.dims, self.wn);
        let mut f_b = VectorField::zeros(self.dims, self.wn);

        if !self.options.linear_only {
            (f_theta, f_v, f_b) = self.nonlinear_terms(s, &v, &b)?;
        }

        // Coriolis-type term Pτ v×e_r, buoyancy PRθ e3.
        let e = par.e_r;
        let pt = par.p * par.tau;
        for i in 0..3 {
            let (p, q) = ((i + 1) % 3, (i + 2) % 3);
            if e[q] != 0.0 {
                f_v.c[i].axpy(pt * e[q], &v.c[p]);
            }
            if e[p] != 0.0 {
                f_v.c[i].axpy(-pt * e[p], &v.c[q]);
            }
        }
        f_v.c[2].axpy(par.p * par.r, &s.theta);
        f_theta.axpy(1.0, &v.c[2]);
        if diffusion {
            for i in 0..3 {
                f_v.c[i].axpy(par.p, &self.laplacian(&v.c[i]));
                f_b.c[i].axpy(par.eta, &self.laplacian(&b.c[i]));
            }
            f_theta.axpy(1.0, &self.laplacian(&s.theta));
        }

        let finite = |f: &SpectralField3D| f.data.iter().all(|x| x.re.is_finite() && x.im.is_finite());
        let check = |ok: bool, term: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::NonFinite {
                    term: term.to_string(),
                    t: s.t,
                })
            }
        };
        check(finite(&f_theta), "heat equation")?;
        check(f_v.c.iter().all(finite), "momentum equation")?;
        check(f_b.c.iter().all(finite), "induction equation")?;
        Ok(Forcing {
            theta: f_theta,
            v: f_v,
            b: f_b,
        })
    }

    /// Quadratic terms `-(v·∇)θ`, `v×ω - b×j` and `∇×(v×b)`, evaluated on the
    /// padded grid with two real fields per complex transform.
    fn nonlinear_terms(
        &self,
        s: &SpectralState,
        v: &VectorField,
        b: &VectorField,
    ) -> Result<(SpectralField3D, VectorField, VectorField)> {
        let t = &self.transform;
        let (a1, a2) = (self.wn.alpha1, self.wn.alpha2);
        let w = v.curl();
        let j = b.curl();
        let zero = s.theta.zeros_like();
        let (g1, g2, g3) = (s.theta.d1(), s.theta.d2(), s.theta.d3());
        let pairs = [
            (&v.c[0], &v.c[1]),
            (&v.c[2], &w.c[0]),
            (&w.c[1], &w.c[2]),
            (&b.c[0], &b.c[1]),
            (&b.c[2], &j.c[0]),
            (&j.c[1], &j.c[2]),
            (&g1, &g2),
            (&g3, &zero),
        ];
        let phys: Vec<PhysicalField3D> = pairs.iter().map(|(x, y)| t.to_physical_pair(x, y)).collect();
        let grid = t.grid();
        let mut out: Vec<PhysicalField3D> = (0..4).map(|_| PhysicalField3D::zeros(grid)).collect();
        let [o0, o1, o2, o3] = &mut out[..] else { unreachable!() };
        for (idx, (((r0, r1), r2), r3)) in o0
            .data
            .iter_mut()
            .zip(o1.data.iter_mut())
            .zip(o2.data.iter_mut())
            .zip(o3.data.iter_mut())
            .enumerate()
        {
            let q = |k: usize| phys[k].data[idx];
            let (p0, p1, p2, p3, p4, p5, p6, p7) = (q(0), q(1), q(2), q(3), q(4), q(5), q(6), q(7));
            let vv = [p0.re, p0.im, p1.re];
            let ww = [p1.im, p2.re, p2.im];
            let bb = [p3.re, p3.im, p4.re];
            let jj = [p4.im, p5.re, p5.im];
            let gg = [p6.re, p6.im, p7.re];
            let cross = |x: &[f64; 3], y: &[f64; 3]| {
                [x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2], x[0] * y[1] - x[1] * y[0]]
            };
            let vw = cross(&vv, &ww);
            let bj = cross(&bb, &jj);
            let e = cross(&vv, &bb);
            let adv = vv[0] * gg[0] + vv[1] * gg[1] + vv[2] * gg[2];
            // Magnetic outputs share transforms only with each other, so a
            // zero field gives exactly zero induction.
            *r0 = Complex64::new(vw[0] - bj[0], vw[1] - bj[1]);
            *r1 = Complex64::new(vw[2] - bj[2], -adv);
            *r2 = Complex64::new(e[0], e[1]);
            *r3 = Complex64::new(e[2], 0.0);
        }
        let mut f_v = VectorField::zeros(self.dims, self.wn);
        let mut vxb = VectorField::zeros(self.dims, self.wn);
        (f_v.c[0], f_v.c[1]) = t.to_spectral_pair(&out[0], a1, a2)?;
        let (v3, f_theta) = t.to_spectral_pair(&out[1], a1, a2)?;
        f_v.c[2] = v3;
        (vxb.c[0], vxb.c[1]) = t.to_spectral_pair(&out[2], a1, a2)?;
        vxb.c[2] = t.to_spectral(&out[3], a1, a2, true)?;
        Ok((f_theta, f_v, vxb.curl()))
    }

    /// One transform per factor; kept as an oracle for the paired version.
    #[cfg(test)]
    fn nonlinear_terms_reference(
        &self,
        s: &SpectralState,
        v: &VectorField,
        b: &VectorField,
    ) -> (SpectralField3D, VectorField, VectorField) {
        let mut f_v = VectorField::zeros(self.dims, self.wn);
        let t = &self.transform;
        let omega = v.curl();
        let j = b.curl();
        let grad = [s.theta.d1(), s.theta.d2(), s.theta.d3()];
        let phys = |f: &VectorField| -> Vec<PhysicalField3D> { f.c.iter().map(|c| t.to_physical(c)).collect() };
        let pv = phys(&v);
        let pw = phys(&omega);
        let pb = phys(&b);
        let pj = phys(&j);
        let pg: Vec<PhysicalField3D> = grad.iter().map(|c| t.to_physical(c)).collect();
        let (a1, a2) = (self.wn.alpha1, self.wn.alpha2);
        let cross = |x: &[PhysicalField3D], y: &[PhysicalField3D], i: usize, extra: Option<(&[PhysicalField3D], &[PhysicalField3D])>| {
            let (p, q) = ((i + 1) % 3, (i + 2) % 3);
            let mut pairs = vec![(&x[p], &y[q]), (&x[q], &y[p])];
            let mut coeffs = vec![1.0, -1.0];
            if let Some((u, w)) = extra {
                pairs.extend([(&u[p], &w[q]), (&u[q], &w[p])]);
                coeffs.extend([-1.0, 1.0]);
            }
            t.physical_to_spectral_product(&pairs, &coeffs, a1, a2, true)
        };
        for i in 0..3 {
            // v×ω - b×j
            f_v.c[i] = cross(&pv, &pw, i, Some((&pb, &pj)));
        }
        let mut vxb = VectorField::zeros(self.dims, self.wn);
        for i in 0..3 {
            vxb.c[i] = cross(&pv, &pb, i, None);
        }
        let f_b = vxb.curl();
        let adv = t.physical_to_spectral_product(
            &[(&pv[0], &pg[0]), (&pv[1], &pg[1]), (&pv[2], &pg[2])],
            &[-1.0, -1.0, -1.0],
            a1,
            a2,
            true,
        );
        (adv, f_v, f_b)
    }

    /// Toroidal potential of a vector forcing at one mode:
    /// `-(i a2 F1 - i a1 F2) / k²`.
    fn toroidal_part(&self, f: &VectorField, n1: i64, n2: i64) -> Vec<Complex64> {
        let (a1, a2) = self.wn.a(n1, n2);
        let k2 = a1 * a1 + a2 * a2;
        let (f1, f2) = (f.c[0].mode(n1, n2), f.c[1].mode(n1, n2));
        f1.iter().zip(f2).map(|(&x, &y)| -(I * a2 * x - I * a1 * y) / k2).collect()
    }

    fn assemble(&self, outs: Vec<ModeOut>, means: [Vec<Complex64>; 4], t: f64) -> SpectralState {
        let mut s = self.zero_state();
        s.t = t;
        let c = self.dims.cheb();
        for (pos, out) in outs.into_iter().enumerate() {
            for (field, vals) in s.fields_mut().into_iter().zip(out) {
                if !vals.is_empty() {
                    field.data[pos * c..(pos + 1) * c].copy_from_slice(&vals);
                }
            }
        }
        let [a, b, cc, d] = means;
        s.v_mean = [a, b];
        s.b_mean = [cc, d];
        s
    }

    /// Projected tendency `P_U f(u)` of every component.
    pub fn rhs_full(&self, s: &SpectralState) -> Result<SpectralState> {
        let f = self.forcing(s, true)?;
        let d = self.dims;
        let outs: Vec<ModeOut> = (0..d.horizontal())
            .into_par_iter()
            .map(|pos| -> Result<ModeOut> {
                let (n1, n2) = d.mode_at(pos);
                let theta = self.dirichlet.apply(f.theta.mode(n1, n2));
                if (n1, n2) == (0, 0) {
                    return Ok([theta, vec![], vec![], vec![], vec![]]);
                }
                let k2 = self.wn.k2(n1, n2);
                let ops = self.wave(n1, n2);
                let v_tor = self.dirichlet.apply(&self.toroidal_part(&f.v, n1, n2));
                let r = poloidal_velocity_rhs(&f.v, n1, n2)?;
                let r: Vec<Complex64> = r.iter().map(|x| x / k2).collect();
                let v_pol = ops.v_pol.solve(&r).map_err(|e| e.at_mode(n1, n2))?;
                let b_tor = self.tor_b.apply(&self.toroidal_part(&f.b, n1, n2));
                let gp: Vec<Complex64> = f.b.c[2].mode(n1, n2).iter().map(|x| x / k2).collect();
                let b_pol = ops.b_pol.apply(&gp);
                Ok([theta, v_tor, v_pol, b_tor, b_pol])
            })
            .collect::<Result<_>>()?;
        let means = [
            self.dirichlet.apply(f.v.c[0].mode(0, 0)),
            self.dirichlet.apply(f.v.c[1].mode(0, 0)),
            self.tor_b.apply(f.b.c[0].mode(0, 0)),
            self.tor_b.apply(f.b.c[1].mode(0, 0)),
        ];
        Ok(self.assemble(outs, means, s.t))
    }

    pub fn step_euler(&self, s: &SpectralState, dt: f64) -> Result<SpectralState> {
        let k = self.rhs_full(s)?;
        let mut out = s.clone();
        out.axpy(dt, &k);
        out.t = s.t + dt;
        Ok(out)
    }

    pub fn step_rk4(&self, s: &SpectralState, dt: f64) -> Result<SpectralState> {
        let stage = |base: &SpectralState, k: &SpectralState, h: f64| {
            let mut u = base.clone();
            u.axpy(h, k);
            u.t = base.t + h;
            u
        };
        let k1 = self.rhs_full(s)?;
        let k2 = self.rhs_full(&stage(s, &k1, 0.5 * dt))?;
        let k3 = self.rhs_full(&stage(s, &k2, 0.5 * dt))?;
        let k4 = self.rhs_full(&stage(s, &k3, dt))?;
        let mut out = s.clone();
        out.axpy(dt / 6.0, &k1);
        out.axpy(dt / 3.0, &k2);
        out.axpy(dt / 3.0, &k3);
        out.axpy(dt / 6.0, &k4);
        out.t = s.t + dt;
        Ok(out)
    }

    fn imex_ops(&self, dt: f64) -> Result<Arc<ImexOps>> {
        if let Some(ops) = self.imex.read().expect("lock poisoned").as_ref() {
            if ops.dt == dt {
                return Ok(ops.clone());
            }
        }
        let par = &self.params;
        let (p, eta) = (par.p, par.eta);
        let n3 = self.dims.n3;
        let helm = |nu: f64, k2: f64, c: &ConstraintSet| PreparedHelmholtz::new(1.0 + dt * nu * k2, -dt * nu, c);
        let mut by_k2 = HashMap::new();
        for (n1, n2) in self.dims.modes() {
            if (n1, n2) == (0, 0) {
                continue;
            }
            let k2 = self.wn.k2(n1, n2);
            if by_k2.contains_key(&key(k2)) {
                continue;
            }
            let build = || -> Result<ImexWaveOps> {
                let pol_b = constraints_with_match(Component::PoloidalB { n1, n2 }, n3, self.wn, self.options.matching)?;
                Ok(ImexWaveOps {
                    theta: helm(1.0, k2, &self.dirichlet.constraints)?,
                    v_tor: helm(p, k2, &self.dirichlet.constraints)?,
                    v_pol: PreparedFourthOrder::new(
                        k2 * (1.0 + dt * p * k2),
                        -(1.0 + 2.0 * dt * p * k2),
                        dt * p,
                        &self.clamped,
                    )?,
                    b_tor: helm(eta, k2, &self.tor_b.constraints)?,
                    b_pol: helm(eta, k2, &pol_b)?,
                })
            };
            by_k2.insert(key(k2), build().map_err(|e| e.at_mode(n1, n2))?);
        }
        let ops = Arc::new(ImexOps {
            dt,
            by_k2,
            theta_mean: helm(1.0, 0.0, &self.dirichlet.constraints)?,
            v_mean: helm(p, 0.0, &self.dirichlet.constraints)?,
            b_mean: helm(eta, 0.0, &self.tor_b.constraints)?,
        });
        *self.imex.write().expect("lock poisoned") = Some(ops.clone());
        Ok(ops)
    }

    /// Implicit–explicit Euler: diffusion implicit, everything else explicit.
    pub fn step_imex(&self, s: &SpectralState, dt: f64) -> Result<SpectralState> {
        let ops = self.imex_ops(dt)?;
        let f = self.forcing(s, false)?;
        let d = self.dims;
        let c = d.cheb();
        let lin = |a: &[Complex64], b: &[Complex64], h: f64| -> Vec<Complex64> {
            a.iter().zip(b).map(|(&x, &y)| x + y * h).collect()
        };
        let outs: Vec<ModeOut> = (0..d.horizontal())
            .into_par_iter()
            .map(|pos| -> Result<ModeOut> {
                let (n1, n2) = d.mode_at(pos);
                let th = lin(s.theta.mode(n1, n2), f.theta.mode(n1, n2), dt);
                if (n1, n2) == (0, 0) {
                    return Ok([ops.theta_mean.solve(&th)?, vec![], vec![], vec![], vec![]]);
                }
                let k2 = self.wn.k2(n1, n2);
                let w = &ops.by_k2[&key(k2)];
                let run = || -> Result<ModeOut> {
                    let theta = w.theta.solve(&th)?;
                    let v_tor = w.v_tor.solve(&lin(s.v_tor.mode(n1, n2), &self.toroidal_part(&f.v, n1, n2), dt))?;
                    let vp = s.v_pol.mode(n1, n2);
                    let mut vp2 = vec![ZERO; c];
                    second_derivative_into(vp, &mut vp2);
                    let r = poloidal_velocity_rhs(&f.v, n1, n2)?;
                    let rhs: Vec<Complex64> = (0..c).map(|j| vp[j] * k2 - vp2[j] + r[j] * (dt / k2)).collect();
                    let v_pol = w.v_pol.solve(&rhs)?;
                    let b_tor = w.b_tor.solve(&lin(s.b_tor.mode(n1, n2), &self.toroidal_part(&f.b, n1, n2), dt))?;
                    let gp: Vec<Complex64> = f.b.c[2].mode(n1, n2).iter().map(|x| x / k2).collect();
                    let b_pol = w.b_pol.solve(&lin(s.b_pol.mode(n1, n2), &gp, dt))?;
                    Ok([theta, v_tor, v_pol, b_tor, b_pol])
                };
                run().map_err(|e| e.at_mode(n1, n2))
            })
            .collect::<Result<_>>()?;
        let means = [
            ops.v_mean.solve(&lin(&s.v_mean[0], f.v.c[0].mode(0, 0), dt))?,
            ops.v_mean.solve(&lin(&s.v_mean[1], f.v.c[1].mode(0, 0), dt))?,
            ops.b_mean.solve(&lin(&s.b_mean[0], f.b.c[0].mode(0, 0), dt))?,
            ops.b_mean.solve(&lin(&s.b_mean[1], f.b.c[1].mode(0, 0), dt))?,
        ];
        Ok(self.assemble(outs, means, s.t + dt))
    }

    pub fn step(&self, scheme: Scheme, s: &SpectralState, dt: f64) -> Result<SpectralState> {
        let out = match scheme {
            Scheme::Euler => self.step_euler(s, dt),
            Scheme::Rk4 => self.step_rk4(s, dt),
            Scheme::Imex => self.step_imex(s, dt),
        }?;
        if !out.is_finite() {
            return Err(Error::NonFinite {
                term: "state".into(),
                t: out.t,
            });
        }
        Ok(out)
    }

    /// `∫_{-1}^{1} |Σ c_k T_k|² dx3`.
    fn profile_l2(&self, c: &[Complex64]) -> f64 {
        let n = c.len();
        let mut sum = 0.0;
        for a in 0..n {
            if c[a] == ZERO {
                continue;
            }
            for b in 0..n {
                sum += (c[a] * c[b].conj()).re * self.gram[a * n + b];
            }
        }
        sum
    }

    fn field_energy(&self, f: &VectorField) -> f64 {
        let cell = self.params.l1 * self.params.l2;
        let c = self.dims.cheb();
        let total: f64 = f
            .c
            .iter()
            .map(|comp| comp.data.chunks(c).map(|m| self.profile_l2(m)).sum::<f64>())
            .sum();
        0.5 * cell * total
    }

    /// `E = ½ ∫ |·|² dV` over one periodicity cell for `v` and `b`.
    pub fn energies(&self, s: &SpectralState) -> EnergySample {
        EnergySample {
            t: s.t,
            e_v: self.field_energy(&self.velocity(s)),
            e_b: self.field_energy(&self.magnetic(s)),
        }
    }

    /// Largest relative constraint residual over all components and modes.
    pub fn constraint_defect(&self, s: &SpectralState) -> f64 {
        let mut worst = 0.0f64;
        for (n1, n2) in self.dims.modes() {
            worst = worst.max(self.dirichlet.constraints.max_relative_residual(s.theta.mode(n1, n2)));
            if (n1, n2) == (0, 0) {
                continue;
            }
            let checks: [(&ConstraintSet, &[Complex64]); 4] = [
                (&self.dirichlet.constraints, s.v_tor.mode(n1, n2)),
                (&self.clamped, s.v_pol.mode(n1, n2)),
                (&self.tor_b.constraints, s.b_tor.mode(n1, n2)),
                (&self.wave(n1, n2).b_pol.constraints, s.b_pol.mode(n1, n2)),
            ];
            for (c, v) in checks {
                worst = worst.max(c.max_relative_residual(v));
            }
        }
        for m in &s.v_mean {
            worst = worst.max(self.dirichlet.constraints.max_relative_residual(m));
        }
        for m in &s.b_mean {
            worst = worst.max(self.tor_b.constraints.max_relative_residual(m));
        }
        worst
    }

    /// Relative spectral divergence of the reconstructed `v` and `b`.
    pub fn divergence_defect(&self, s: &SpectralState) -> f64 {
        let rel = |f: &VectorField| {
            let div = f.divergence().data.iter().map(|x| x.norm()).fold(0.0, f64::max);
            let scale = f.c.iter().flat_map(|c| c.data.iter()).map(|x| x.norm()).fold(0.0, f64::max);
            if scale == 0.0 {
                0.0
            } else {
                div / scale
            }
        };
        rel(&self.velocity(s)).max(rel(&self.magnetic(s)))
    }

    /// Random admissible state: low horizontal modes `|n_i| ≤ 2` and all
    /// Chebyshev degrees, projected onto each constraint space, made real
    /// and scaled to the requested RMS amplitudes.
    pub fn random_state(&self, seed: u64, amps: Amplitudes) -> SpectralState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = self.zero_state();
        let d = self.dims;
        let c = d.cheb();
        let mut draw = |decay: bool| -> Vec<Complex64> {
            (0..c)
                .map(|k| {
                    let scale = if decay { 1.0 / (1.0 + k as f64) } else { 1.0 };
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
                })
                .collect()
        };
        for (n1, n2) in d.modes() {
            if n1.abs() > 2 || n2.abs() > 2 {
                continue;
            }
            let th = self.dirichlet.apply(&draw(true));
            s.theta.mode_mut(n1, n2).copy_from_slice(&th);
            if (n1, n2) == (0, 0) {
                continue;
            }
            let vt = self.dirichlet.apply(&draw(true));
            let vp = project_onto(&self.clamped, &draw(true));
            let bt = self.tor_b.apply(&draw(true));
            let bp = self.wave(n1, n2).b_pol.apply(&draw(true));
            s.v_tor.mode_mut(n1, n2).copy_from_slice(&vt);
            s.v_pol.mode_mut(n1, n2).copy_from_slice(&vp);
            s.b_tor.mode_mut(n1, n2).copy_from_slice(&bt);
            s.b_pol.mode_mut(n1, n2).copy_from_slice(&bp);
        }
        let real = |v: Vec<Complex64>| v.into_iter().map(|x| Complex64::new(x.re, 0.0)).collect::<Vec<_>>();
        s.v_mean = [real(self.dirichlet.apply(&draw(true))), real(self.dirichlet.apply(&draw(true)))];
        s.b_mean = [real(self.tor_b.apply(&draw(true))), real(self.tor_b.apply(&draw(true)))];
        for f in s.fields_mut() {
            f.symmetrize();
        }
        self.rescale(&mut s, amps);
        s
    }

    /// Convection-roll start: `θ ∝ cos(α1 x1)(1 - x3²)`, a matching
    /// poloidal roll `P ∝ cos(α1 x1)(1 - x3²)²`, plus a seeded weak
    /// magnetic field.
    pub fn roll_state(&self, seed: u64, amps: Amplitudes) -> SpectralState {
        let mut s = self.zero_state();
        let c = self.dims.cheb();
        if self.dims.n1 >= 1 {
            for n1 in [-1i64, 1] {
                let th = s.theta.mode_mut(n1, 0);
                th[0] = Complex64::new(0.25, 0.0);
                th[2] = Complex64::new(-0.25, 0.0);
                let vp = s.v_pol.mode_mut(n1, 0);
                let prof = [3.0 / 8.0, 0.0, -0.5, 0.0, 1.0 / 8.0];
                for (k, &p) in prof.iter().enumerate().take(c) {
                    vp[k] = Complex64::new(0.5 * p, 0.0);
                }
            }
        }
        let seeded = self.random_state(seed, Amplitudes { theta: 0.0, v: 0.0, b: amps.b });
        s.b_tor = seeded.b_tor;
        s.b_pol = seeded.b_pol;
        s.b_mean = seeded.b_mean;
        let b_keep = amps.b;
        self.rescale(&mut s, Amplitudes { b: b_keep, ..amps });
        s
    }

    /// Scales θ, v and b so their RMS values over the cell equal `amps`
    /// (fields that are identically zero stay zero).
    fn rescale(&self, s: &mut SpectralState, amps: Amplitudes) {
        let volume = 2.0 * self.params.l1 * self.params.l2;
        let e = self.energies(s);
        let theta_sq = {
            let cell = self.params.l1 * self.params.l2;
            let c = self.dims.cheb();
            cell * s.theta.data.chunks(c).map(|m| self.profile_l2(m)).sum::<f64>()
        };
        let rms = |sq: f64| (sq / volume).sqrt();
        let factor = |target: f64, current: f64| if current > 0.0 { target / current } else { 0.0 };
        let ft = factor(amps.theta, rms(theta_sq));
        let fv = factor(amps.v, rms(2.0 * e.e_v));
        let fb = factor(amps.b, rms(2.0 * e.e_b));
        s.theta.data.iter_mut().for_each(|x| *x *= ft);
        for f in [&mut s.v_tor, &mut s.v_pol] {
            f.data.iter_mut().for_each(|x| *x *= fv);
        }
        for m in s.v_mean.iter_mut() {
            m.iter_mut().for_each(|x| *x *= fv);
        }
        for f in [&mut s.b_tor, &mut s.b_pol] {
            f.data.iter_mut().for_each(|x| *x *= fb);
        }
        for m in s.b_mean.iter_mut() {
            m.iter_mut().for_each(|x| *x *= fb);
        }
    }
}

/// Orthogonal projection onto the null space of `c` (small dense helper for
/// initial conditions).
fn project_onto(c: &ConstraintSet, f: &[Complex64]) -> Vec<Complex64> {
    let dim = c.dim();
    let cb = prepare_correction(c, &IdentityOperator { dim }, &weights(dim)).expect("identity is nonsingular");
    correct(f, &cb).expect("lengths agree")
}
