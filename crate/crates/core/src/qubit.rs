//! Single-qubit linear algebra.
//!
//! Everything is stored in the logical basis `{|0⟩, |1⟩}`. The ensemble states
//! are written in the rotated basis `|±⟩ = (|0⟩ ± |1⟩)/√2`, and the Bloch
//! coordinates used for the feedback axis are taken with `|±⟩` as the poles
//! (see [`bloch`]).

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Complex = Complex64;

const ZERO: Complex = Complex::new(0.0, 0.0);
const ONE: Complex = Complex::new(1.0, 0.0);
const I: Complex = Complex::new(0.0, 1.0);

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to TAU
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Ket in the logical basis. Not necessarily normalized: path branches carry
/// their probability weight in the squared norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState {
    pub a0: Complex,
    pub a1: Complex,
}

impl PureState {
    pub const fn new(a0: Complex, a1: Complex) -> Self {
        Self { a0, a1 }
    }

    pub const fn zero() -> Self {
        Self::new(ZERO, ZERO)
    }

    /// `|0⟩`, the fixed point of amplitude damping.
    pub const fn ket0() -> Self {
        Self::new(ONE, ZERO)
    }

    pub const fn ket1() -> Self {
        Self::new(ZERO, ONE)
    }

    pub fn ket_plus() -> Self {
        Self::new(Complex::from(FRAC_1_SQRT_2), Complex::from(FRAC_1_SQRT_2))
    }

    pub fn ket_minus() -> Self {
        Self::new(Complex::from(FRAC_1_SQRT_2), Complex::from(-FRAC_1_SQRT_2))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a0.norm_sqr() + self.a1.norm_sqr()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Complex {
        self.a0.conj() * other.a0 + self.a1.conj() * other.a1
    }

    pub fn scale(&self, c: Complex) -> Self {
        Self::new(self.a0 * c, self.a1 * c)
    }

    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm_sqr().sqrt();
        (n > 0.0).then(|| self.scale(Complex::from(1.0 / n)))
    }

    pub fn max_abs_diff(&self, other: &PureState) -> f64 {
        (self.a0 - other.a0).norm().max((self.a1 - other.a1).norm())
    }

    /// Amplitudes `(⟨+|self⟩, ⟨−|self⟩)`.
    pub fn pm_components(&self) -> (Complex, Complex) {
        let s = Complex::from(FRAC_1_SQRT_2);
        ((self.a0 + self.a1) * s, (self.a0 - self.a1) * s)
    }

    pub fn is_finite(&self) -> bool {
        self.a0.is_finite() && self.a1.is_finite()
    }
}

impl Add for PureState {
    type Output = PureState;
    fn add(self, rhs: PureState) -> PureState {
        PureState::new(self.a0 + rhs.a0, self.a1 + rhs.a1)
    }
}

/// `cos(Θ/2)|+⟩ + e^{iφ} sin(Θ/2)|−⟩`, expanded in the logical basis.
pub fn ket_plane(theta: f64, phi: f64) -> PureState {
    // canonical in (-π, π] so that Θ = π gives |−⟩ with a positive sign
    let theta = -wrap_angle(-theta);
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    let e = Complex::from_polar(1.0, phi) * s;
    let k = Complex::from(FRAC_1_SQRT_2);
    PureState::new((c + e) * k, (c - e) * k)
}

/// Row-major 2×2 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Operator {
    pub m00: Complex,
    pub m01: Complex,
    pub m10: Complex,
    pub m11: Complex,
}

impl Operator {
    pub const fn new(m00: Complex, m01: Complex, m10: Complex, m11: Complex) -> Self {
        Self { m00, m01, m10, m11 }
    }

    pub fn real(m00: f64, m01: f64, m10: f64, m11: f64) -> Self {
        Self::new(m00.into(), m01.into(), m10.into(), m11.into())
    }

    pub const fn identity() -> Self {
        Self::new(ONE, ZERO, ZERO, ONE)
    }

    pub const fn zero() -> Self {
        Self::new(ZERO, ZERO, ZERO, ZERO)
    }

    /// `|ket⟩⟨bra|`.
    pub fn ket_bra(ket: &PureState, bra: &PureState) -> Self {
        let b0 = bra.a0.conj();
        let b1 = bra.a1.conj();
        Self::new(ket.a0 * b0, ket.a0 * b1, ket.a1 * b0, ket.a1 * b1)
    }

    /// Projector `|v⟩⟨v|`.
    pub fn projector(v: &PureState) -> Self {
        Self::ket_bra(v, v)
    }

    pub fn dagger(&self) -> Self {
        Self::new(self.m00.conj(), self.m10.conj(), self.m01.conj(), self.m11.conj())
    }

    /// Matrix product `self · rhs`.
    pub fn compose(&self, rhs: &Operator) -> Self {
        Self::new(
            self.m00 * rhs.m00 + self.m01 * rhs.m10,
            self.m00 * rhs.m01 + self.m01 * rhs.m11,
            self.m10 * rhs.m00 + self.m11 * rhs.m10,
            self.m10 * rhs.m01 + self.m11 * rhs.m11,
        )
    }

    pub fn apply(&self, s: &PureState) -> PureState {
        PureState::new(
            self.m00 * s.a0 + self.m01 * s.a1,
            self.m10 * s.a0 + self.m11 * s.a1,
        )
    }

    pub fn scale(&self, c: Complex) -> Self {
        Self::new(self.m00 * c, self.m01 * c, self.m10 * c, self.m11 * c)
    }

    pub fn trace(&self) -> Complex {
        self.m00 + self.m11
    }

    pub fn det(&self) -> Complex {
        self.m00 * self.m11 - self.m01 * self.m10
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        let d = *self - *other;
        [d.m00, d.m01, d.m10, d.m11]
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// `A†A`, the POVM element of a measurement operator.
    pub fn effect(&self) -> Operator {
        self.dagger().compose(self)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.effect().max_abs_diff(&Operator::identity()) <= tol
            && self.compose(&self.dagger()).max_abs_diff(&Operator::identity()) <= tol
    }

    pub fn is_finite(&self) -> bool {
        [self.m00, self.m01, self.m10, self.m11]
            .iter()
            .all(|c| c.is_finite())
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, r: Operator) -> Operator {
        Operator::new(self.m00 + r.m00, self.m01 + r.m01, self.m10 + r.m10, self.m11 + r.m11)
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, r: Operator) -> Operator {
        Operator::new(self.m00 - r.m00, self.m01 - r.m01, self.m10 - r.m10, self.m11 - r.m11)
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        self.compose(&rhs)
    }
}

impl Mul<PureState> for Operator {
    type Output = PureState;
    fn mul(self, rhs: PureState) -> PureState {
        self.apply(&rhs)
    }
}

/// Logical-basis Pauli matrices.
pub mod pauli {
    use super::{Complex, Operator, I, ONE, ZERO};

    pub fn x() -> Operator {
        Operator::new(ZERO, ONE, ONE, ZERO)
    }

    pub fn y() -> Operator {
        Operator::new(ZERO, -I, I, ZERO)
    }

    pub fn z() -> Operator {
        Operator::new(ONE, ZERO, ZERO, -ONE)
    }

    /// Pauli matrices of the representation whose `σ3` eigenstates are
    /// `|+⟩` (eigenvalue +1) and `|−⟩`, written in the logical basis.
    /// Index 0 is the identity.
    pub fn pm(k: usize) -> Operator {
        match k {
            0 => Operator::identity(),
            // |+⟩⟨−| + |−⟩⟨+|
            1 => z(),
            // −i|+⟩⟨−| + i|−⟩⟨+|
            2 => y().scale(Complex::from(-1.0)),
            // |+⟩⟨+| − |−⟩⟨−|
            3 => x(),
            _ => panic!("pauli index {k} out of range"),
        }
    }
}

/// 2×2 density matrix (possibly unnormalized, as for a sum of path branches).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    pub m00: Complex,
    pub m01: Complex,
    pub m10: Complex,
    pub m11: Complex,
}

impl DensityMatrix {
    pub const fn zero() -> Self {
        Self {
            m00: ZERO,
            m01: ZERO,
            m10: ZERO,
            m11: ZERO,
        }
    }

    pub fn maximally_mixed() -> Self {
        Self::diag(0.5, 0.5)
    }

    pub fn diag(p0: f64, p1: f64) -> Self {
        Self {
            m00: p0.into(),
            m11: p1.into(),
            ..Self::zero()
        }
    }

    /// `(I + x σ1 + y σ2 + z σ3)/2` with the `|±⟩`-pole Pauli matrices.
    pub fn from_bloch(b: &BlochVector) -> Self {
        let op = pauli::pm(0)
            + pauli::pm(1).scale(b.x.into())
            + pauli::pm(2).scale(b.y.into())
            + pauli::pm(3).scale(b.z.into());
        Self::from_operator(&op.scale(0.5.into()))
    }

    pub fn from_operator(op: &Operator) -> Self {
        Self {
            m00: op.m00,
            m01: op.m01,
            m10: op.m10,
            m11: op.m11,
        }
    }

    pub fn as_operator(&self) -> Operator {
        Operator::new(self.m00, self.m01, self.m10, self.m11)
    }

    pub fn trace(&self) -> Complex {
        self.m00 + self.m11
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::from_operator(&self.as_operator().scale(k.into()))
    }

    /// `⟨ψ|ρ|ψ⟩` without any normalization checks.
    pub fn expectation(&self, psi: &PureState) -> f64 {
        psi.inner(&self.as_operator().apply(psi)).re
    }

    /// `op · ρ · op†`.
    pub fn conjugate_by(&self, op: &Operator) -> Self {
        Self::from_operator(&op.compose(&self.as_operator()).compose(&op.dagger()))
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (self.m01 - self.m10.conj())
            .norm()
            .max(self.m00.im.abs())
            .max(self.m11.im.abs())
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let a = self.m00.re;
        let d = self.m11.re;
        let off = 0.5 * (self.m01 + self.m10.conj());
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + off.norm_sqr()).sqrt();
        (mean - rad, mean + rad)
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.as_operator().max_abs_diff(&other.as_operator())
    }
}

impl Add for DensityMatrix {
    type Output = DensityMatrix;
    fn add(self, r: DensityMatrix) -> DensityMatrix {
        DensityMatrix::from_operator(&(self.as_operator() + r.as_operator()))
    }
}

/// `|s⟩⟨s|`, with trace equal to the squared norm of `s`.
pub fn outer(s: &PureState) -> DensityMatrix {
    DensityMatrix::from_operator(&Operator::projector(s))
}

pub fn dagger(op: &Operator) -> Operator {
    op.dagger()
}

pub fn compose(a: &Operator, b: &Operator) -> Operator {
    a.compose(b)
}

pub fn apply(op: &Operator, s: &PureState) -> PureState {
    op.apply(s)
}

pub fn trace(rho: &DensityMatrix) -> Complex {
    rho.trace()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

const NORM_TOL: f64 = 1e-10;

/// Fidelity `⟨ψ|ρ|ψ⟩` of a normalized pure state with a unit-trace density
/// matrix, clamped to `[0, 1]`.
pub fn fidelity_pure(psi: &PureState, rho: &DensityMatrix) -> Result<f64> {
    let n = psi.norm_sqr();
    if (n - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { norm_sqr: n });
    }
    let t = rho.trace();
    if (t.re - 1.0).abs() > NORM_TOL || t.im.abs() > NORM_TOL {
        return Err(Error::NotUnitTrace { trace: t.re });
    }
    Ok(rho.expectation(psi).clamp(0.0, 1.0))
}

/// Bloch coordinates `(Tr ρσ1, Tr ρσ2, Tr ρσ3)` with `|+⟩` as the north pole.
pub fn bloch(rho: &DensityMatrix) -> BlochVector {
    let r = rho.as_operator();
    let tr = |k| r.compose(&pauli::pm(k)).trace().re;
    BlochVector::new(tr(1), tr(2), tr(3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: Complex, b: Complex) -> bool {
        (a - b).norm() < 1e-14
    }

    #[test]
    fn ket_plane_poles() {
        let p = ket_plane(0.0, 1.234);
        assert_eq!(p, PureState::ket_plus());
        let m = ket_plane(PI, 0.0);
        assert!(close(m.a0, FRAC_1_SQRT_2.into()));
        assert!(close(m.a1, (-FRAC_1_SQRT_2).into()));
    }

    #[test]
    fn ket_plane_equator_with_phase() {
        let s = ket_plane(FRAC_PI_2, FRAC_PI_2);
        assert!(close(s.a0, Complex::new(0.5, 0.5)));
        assert!(close(s.a1, Complex::new(0.5, -0.5)));
    }

    #[test]
    fn apply_examples() {
        let s = PureState::new(0.3.into(), Complex::new(0.1, 0.2));
        assert_eq!(Operator::identity().apply(&s), s);

        // amplitude-damping Kraus elements written out by hand
        let e2 = Operator::real(0.0, 1.0, 0.0, 0.0);
        assert_eq!(e2.apply(&PureState::ket1()), PureState::ket0());
        let e1 = Operator::real(1.0, 0.0, 0.0, (1.0f64 - 0.19).sqrt());
        let out = e1.apply(&PureState::ket1());
        assert!(close(out.a0, ZERO));
        assert!((out.a1.re - 0.9).abs() < 1e-15);
    }

    #[test]
    fn dagger_involution_and_trace_of_outer() {
        let a = Operator::new(
            Complex::new(1.0, 2.0),
            Complex::new(-0.5, 0.1),
            Complex::new(0.0, 3.0),
            Complex::new(0.7, -0.7),
        );
        assert_eq!(a.dagger().dagger(), a);
        let s = ket_plane(0.7, -2.1);
        assert!((trace(&outer(&s)) - ONE).norm() < 1e-15);
    }

    #[test]
    fn fidelity_examples() {
        let k0 = PureState::ket0();
        assert_eq!(fidelity_pure(&k0, &outer(&k0)).unwrap(), 1.0);
        let psi = ket_plane(1.1, 0.4);
        let f = fidelity_pure(&psi, &DensityMatrix::maximally_mixed()).unwrap();
        assert!((f - 0.5).abs() < 1e-15);
        let f = fidelity_pure(&k0, &DensityMatrix::diag(0.3, 0.7)).unwrap();
        assert!((f - 0.3).abs() < 1e-15);
    }

    #[test]
    fn fidelity_rejects_unnormalized() {
        let half = PureState::ket0().scale(0.5.into());
        assert!(matches!(
            fidelity_pure(&half, &DensityMatrix::diag(1.0, 0.0)),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            fidelity_pure(&PureState::ket0(), &DensityMatrix::diag(0.5, 0.0)),
            Err(Error::NotUnitTrace { .. })
        ));
    }

    #[test]
    fn bloch_examples() {
        let b = bloch(&DensityMatrix::maximally_mixed());
        assert!(b.norm() < 1e-15);
        let b = bloch(&outer(&PureState::ket_plus()));
        assert!((b.z - 1.0).abs() < 1e-15 && b.x.abs() < 1e-15 && b.y.abs() < 1e-15);
        // (|+⟩ + i|−⟩)/√2
        let s = ket_plane(FRAC_PI_2, FRAC_PI_2);
        let b = bloch(&outer(&s));
        assert!((b.y - 1.0).abs() < 1e-14 && b.x.abs() < 1e-14 && b.z.abs() < 1e-14);
    }

    #[test]
    fn wrap_angle_range() {
        for a in [-7.0, -PI, 0.0, PI, 3.0 * PI, 100.0] {
            let w = wrap_angle(a);
            assert!((-PI..PI).contains(&w), "{a} -> {w}");
            assert!(((a - w) / TAU - ((a - w) / TAU).round()).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvalues_of_diag() {
        let (lo, hi) = DensityMatrix::diag(0.3, 0.7).eigenvalues();
        assert!((lo - 0.3).abs() < 1e-15 && (hi - 0.7).abs() < 1e-15);
    }
}
