//! The composite control pipeline.
//!
//! A qubit prepared in one of two known states passes through
//!
//! ```text
//! preweak M_i → feedforward U_i → noise E_j → U_i† → postweak N_i → feedback R_i
//! ```
//!
//! where `i ∈ {+, −}` is the preweak outcome and `j ∈ {1, 2}` the Kraus index
//! of the amplitude-damping channel. The abandon outcomes `N̄_i` are discarded,
//! so each input contributes four unnormalized path states whose total squared
//! norm is the success probability.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::{
    fidelity_pure, ket_plane, outer, pauli, wrap_angle, Complex, DensityMatrix, Operator,
    PureState,
};

/// Preweak outcome / input-state label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// The two candidate input states `|ψ±⟩ = cos(θ/2)|+⟩ ± e^{iφ} sin(θ/2)|−⟩`
/// with priors `s+` and `s− = 1 − s+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub theta: f64,
    pub phi: f64,
    pub s_plus: f64,
}

impl Ensemble {
    pub fn new(theta: f64, phi: f64, s_plus: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::out_of_range("theta", theta, "[0, pi]"));
        }
        if !phi.is_finite() {
            return Err(Error::out_of_range("phi", phi, "[-pi, pi)"));
        }
        if !(0.0..=1.0).contains(&s_plus) {
            return Err(Error::out_of_range("s_plus", s_plus, "[0, 1]"));
        }
        Ok(Self {
            theta,
            phi: wrap_angle(phi),
            s_plus,
        })
    }

    pub fn s_minus(&self) -> f64 {
        1.0 - self.s_plus
    }

    pub fn prior(&self, which: Sign) -> f64 {
        match which {
            Sign::Plus => self.s_plus,
            Sign::Minus => self.s_minus(),
        }
    }

    pub fn state(&self, which: Sign) -> PureState {
        ket_plane(which.as_f64() * self.theta, self.phi)
    }

    /// The equivalent mixed input `s+|ψ+⟩⟨ψ+| + s−|ψ−⟩⟨ψ−|`.
    pub fn mixed_state(&self) -> DensityMatrix {
        outer(&self.state(Sign::Plus)).scale(self.s_plus)
            + outer(&self.state(Sign::Minus)).scale(self.s_minus())
    }
}

/// Amplitude-damping strength `r ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct NoiseStrength(f64);

impl NoiseStrength {
    pub fn new(r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::out_of_range("r", r, "[0, 1]"));
        }
        Ok(Self(r))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Which interval the preweak strength is allowed to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RangeMode {
    /// `p ∈ [0, 1]`.
    #[default]
    Full,
    /// `p ∈ [0, 1/2]`, the literal range of the original construction.
    Paper,
}

impl RangeMode {
    pub fn p_max(self) -> f64 {
        match self {
            RangeMode::Full => 1.0,
            RangeMode::Paper => 0.5,
        }
    }
}

/// All tunable knobs of the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    /// Basis angle of the measurement/feedforward basis.
    pub alpha: f64,
    /// Preweak strength.
    pub p: f64,
    /// Postweak strength after preweak outcome `+`.
    pub p1: f64,
    /// Postweak strength after preweak outcome `−`.
    pub p2: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
}

impl ControlParams {
    /// Validates strengths and wraps the three angles into `[-π, π)`.
    pub fn new(
        alpha: f64,
        p: f64,
        p1: f64,
        p2: f64,
        gamma_plus: f64,
        gamma_minus: f64,
    ) -> Result<Self> {
        let c = Self {
            alpha,
            p,
            p1,
            p2,
            gamma_plus,
            gamma_minus,
        }
        .wrapped();
        c.validate(RangeMode::Full)?;
        Ok(c)
    }

    /// `p = 1/2`, no postselection, no feedback: every operator is trivial.
    pub fn identity() -> Self {
        Self {
            alpha: 0.0,
            p: 0.5,
            p1: 0.0,
            p2: 0.0,
            gamma_plus: 0.0,
            gamma_minus: 0.0,
        }
    }

    pub fn wrapped(self) -> Self {
        Self {
            alpha: wrap_angle(self.alpha),
            gamma_plus: wrap_angle(self.gamma_plus),
            gamma_minus: wrap_angle(self.gamma_minus),
            ..self
        }
    }

    pub fn validate(&self, mode: RangeMode) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("gamma_plus", self.gamma_plus),
            ("gamma_minus", self.gamma_minus),
        ] {
            if !(-PI..PI).contains(&v) {
                return Err(Error::out_of_range(name, v, "[-pi, pi)"));
            }
        }
        match mode {
            RangeMode::Full if !(0.0..=1.0).contains(&self.p) => {
                return Err(Error::out_of_range("p", self.p, "[0, 1]"))
            }
            RangeMode::Paper if !(0.0..=0.5).contains(&self.p) => {
                return Err(Error::out_of_range("p", self.p, "[0, 1/2]"))
            }
            _ => {}
        }
        for (name, v) in [("p1", self.p1), ("p2", self.p2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::out_of_range(name, v, "[0, 1]"));
            }
        }
        Ok(())
    }

    pub fn is_definite(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0
    }

    pub fn gamma(&self, outcome: Sign) -> f64 {
        match outcome {
            Sign::Plus => self.gamma_plus,
            Sign::Minus => self.gamma_minus,
        }
    }
}

/// `|V+⟩ = cos β|+⟩ + e^{iφ} sin β|−⟩`, `|V−⟩ = sin β|+⟩ − e^{iφ} cos β|−⟩`
/// with `β = (α + π/2)/2`.
pub fn build_basis(alpha: f64, phi: f64) -> (PureState, PureState) {
    let (s, c) = (0.5 * (alpha + 0.5 * PI)).sin_cos();
    let plus = PureState::ket_plus();
    let minus = PureState::ket_minus().scale(Complex::from_polar(1.0, phi));
    (
        plus.scale(c.into()) + minus.scale(s.into()),
        plus.scale(s.into()) + minus.scale((-c).into()),
    )
}

/// `M+ = √p|V+⟩⟨V+| + √(1−p)|V−⟩⟨V−|`, `M−` with `p ↔ 1−p`.
pub fn build_preweak(p: f64, v_plus: &PureState, v_minus: &PureState) -> (Operator, Operator) {
    let pp = Operator::projector(v_plus);
    let pm = Operator::projector(v_minus);
    let a = Complex::from(p.sqrt());
    let b = Complex::from((1.0 - p).sqrt());
    (pp.scale(a) + pm.scale(b), pp.scale(b) + pm.scale(a))
}

/// `U+ = |0⟩⟨V+| + |1⟩⟨V−|`, `U− = |1⟩⟨V+| + |0⟩⟨V−|`.
pub fn build_feedforward(v_plus: &PureState, v_minus: &PureState) -> (Operator, Operator) {
    let k0 = PureState::ket0();
    let k1 = PureState::ket1();
    (
        Operator::ket_bra(&k0, v_plus) + Operator::ket_bra(&k1, v_minus),
        Operator::ket_bra(&k1, v_plus) + Operator::ket_bra(&k0, v_minus),
    )
}

/// Amplitude-damping Kraus pair `E1 = diag(1, √(1−r))`, `E2 = √r|0⟩⟨1|`.
pub fn build_ad_kraus(r: NoiseStrength) -> (Operator, Operator) {
    let r = r.value();
    (
        Operator::real(1.0, 0.0, 0.0, (1.0 - r).sqrt()),
        Operator::real(0.0, r.sqrt(), 0.0, 0.0),
    )
}

/// Postweak measurements after each preweak outcome, returned as
/// `(N+, N̄+, N−, N̄−)`. The abandon element after outcome `−` is `√p2|V−⟩⟨V−|`,
/// which is what completeness of `{N−, N̄−}` requires.
pub fn build_postweak(
    p1: f64,
    p2: f64,
    v_plus: &PureState,
    v_minus: &PureState,
) -> (Operator, Operator, Operator, Operator) {
    let pp = Operator::projector(v_plus);
    let pm = Operator::projector(v_minus);
    (
        pp.scale((1.0 - p1).sqrt().into()) + pm,
        pp.scale(p1.sqrt().into()),
        pp + pm.scale((1.0 - p2).sqrt().into()),
        pm.scale(p2.sqrt().into()),
    )
}

/// Generator of the feedback rotations: the Pauli operator along the normal of
/// the Bloch plane spanned by `|ψ±⟩`, i.e. along the Bloch vector of
/// `(|+⟩ + i e^{iφ}|−⟩)/√2`.
pub fn feedback_axis(phi: f64) -> Operator {
    pauli::pm(2).scale(phi.cos().into()) - pauli::pm(1).scale(phi.sin().into())
}

/// `R(γ) = cos(γ/2) I − i sin(γ/2) n·σ` with `n` from [`feedback_axis`].
pub fn build_feedback(gamma: f64, phi: f64) -> Operator {
    let (s, c) = (0.5 * gamma).sin_cos();
    Operator::identity().scale(c.into()) + feedback_axis(phi).scale(Complex::new(0.0, -s))
}

/// Every operator of one scheme instance, plus the four composed Kraus
/// products `K_{i,j} = R_i N_i U_i† E_j U_i M_i` of the kept branches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorSet {
    pub m_plus: Operator,
    pub m_minus: Operator,
    pub u_plus: Operator,
    pub u_minus: Operator,
    pub e1: Operator,
    pub e2: Operator,
    pub n_plus: Operator,
    pub nbar_plus: Operator,
    pub n_minus: Operator,
    pub nbar_minus: Operator,
    pub r_plus: Operator,
    pub r_minus: Operator,
}

impl OperatorSet {
    /// Operators for ensemble phase `phi` with the measurement basis given by `c.alpha`.
    pub fn build(phi: f64, c: &ControlParams, r: NoiseStrength) -> Self {
        let (vp, vm) = build_basis(c.alpha, phi);
        Self::in_basis(&vp, &vm, phi, c, r)
    }

    /// Operators with an explicit measurement basis; `c.alpha` is ignored.
    pub fn in_basis(
        v_plus: &PureState,
        v_minus: &PureState,
        phi: f64,
        c: &ControlParams,
        r: NoiseStrength,
    ) -> Self {
        let (m_plus, m_minus) = build_preweak(c.p, v_plus, v_minus);
        let (u_plus, u_minus) = build_feedforward(v_plus, v_minus);
        let (e1, e2) = build_ad_kraus(r);
        let (n_plus, nbar_plus, n_minus, nbar_minus) = build_postweak(c.p1, c.p2, v_plus, v_minus);
        Self {
            m_plus,
            m_minus,
            u_plus,
            u_minus,
            e1,
            e2,
            n_plus,
            nbar_plus,
            n_minus,
            nbar_minus,
            r_plus: build_feedback(c.gamma_plus, phi),
            r_minus: build_feedback(c.gamma_minus, phi),
        }
    }

    pub fn preweak(&self, i: Sign) -> &Operator {
        match i {
            Sign::Plus => &self.m_plus,
            Sign::Minus => &self.m_minus,
        }
    }

    pub fn feedforward(&self, i: Sign) -> &Operator {
        match i {
            Sign::Plus => &self.u_plus,
            Sign::Minus => &self.u_minus,
        }
    }

    pub fn kraus(&self, j: KrausIndex) -> &Operator {
        match j {
            KrausIndex::One => &self.e1,
            KrausIndex::Two => &self.e2,
        }
    }

    pub fn postweak(&self, i: Sign) -> &Operator {
        match i {
            Sign::Plus => &self.n_plus,
            Sign::Minus => &self.n_minus,
        }
    }

    pub fn abandon(&self, i: Sign) -> &Operator {
        match i {
            Sign::Plus => &self.nbar_plus,
            Sign::Minus => &self.nbar_minus,
        }
    }

    pub fn feedback(&self, i: Sign) -> &Operator {
        match i {
            Sign::Plus => &self.r_plus,
            Sign::Minus => &self.r_minus,
        }
    }

    /// `K_{i,j} = R_i N_i U_i† E_j U_i M_i`.
    pub fn path_operator(&self, i: Sign, j: KrausIndex) -> Operator {
        let u = self.feedforward(i);
        *self.feedback(i)
            * *self.postweak(i)
            * u.dagger()
            * *self.kraus(j)
            * *u
            * *self.preweak(i)
    }

    /// Largest deviation from `I` over the four completeness relations
    /// (preweak, noise, both postweaks).
    pub fn completeness_defect(&self) -> f64 {
        let id = Operator::identity();
        [
            self.m_plus.effect() + self.m_minus.effect(),
            self.e1.effect() + self.e2.effect(),
            self.n_plus.effect() + self.nbar_plus.effect(),
            self.n_minus.effect() + self.nbar_minus.effect(),
        ]
        .iter()
        .map(|s| s.max_abs_diff(&id))
        .fold(0.0, f64::max)
    }

    /// Largest deviation from unitarity over `U±`, `R±`, and from `det R± = 1`.
    pub fn unitarity_defect(&self) -> f64 {
        let id = Operator::identity();
        let mut worst: f64 = 0.0;
        for u in [self.u_plus, self.u_minus, self.r_plus, self.r_minus] {
            worst = worst
                .max(u.effect().max_abs_diff(&id))
                .max(u.compose(&u.dagger()).max_abs_diff(&id));
        }
        for r in [self.r_plus, self.r_minus] {
            worst = worst.max((r.det() - Complex::from(1.0)).norm());
        }
        worst
    }
}

/// Amplitude-damping Kraus label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KrausIndex {
    One,
    Two,
}

impl KrausIndex {
    pub const BOTH: [KrausIndex; 2] = [KrausIndex::One, KrausIndex::Two];

    pub fn number(self) -> u8 {
        match self {
            KrausIndex::One => 1,
            KrausIndex::Two => 2,
        }
    }
}

/// One kept trajectory of one input state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRecord {
    pub preweak_outcome: Sign,
    pub kraus_index: KrausIndex,
    /// Unnormalized output state of this trajectory.
    pub final_state: PureState,
    /// Squared norm of `final_state`: the probability of this trajectory.
    pub weight: f64,
}

/// The four kept trajectories of `psi`, ordered `(+,1), (+,2), (−,1), (−,2)`.
/// Zero-weight trajectories are kept.
pub fn run_paths(psi: &PureState, ops: &OperatorSet) -> [PathRecord; 4] {
    let mut out = [PathRecord {
        preweak_outcome: Sign::Plus,
        kraus_index: KrausIndex::One,
        final_state: PureState::zero(),
        weight: 0.0,
    }; 4];
    let mut k = 0;
    for i in Sign::BOTH {
        for j in KrausIndex::BOTH {
            let s = ops.path_operator(i, j).apply(psi);
            out[k] = PathRecord {
                preweak_outcome: i,
                kraus_index: j,
                final_state: s,
                weight: s.norm_sqr(),
            };
            k += 1;
        }
    }
    out
}

/// Outcome of running both ensemble states through the scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtectionResult {
    pub f_plus: f64,
    pub f_minus: f64,
    pub g_plus: f64,
    pub g_minus: f64,
    /// Prior-weighted fidelity `F = s+ f+ + s− f−`.
    pub fidelity: f64,
    /// Prior-weighted success probability `G = s+ g+ + s− g−`.
    pub success: f64,
    pub rho_out_plus: DensityMatrix,
    pub rho_out_minus: DensityMatrix,
    pub paths_plus: [PathRecord; 4],
    pub paths_minus: [PathRecord; 4],
}

/// Probability and normalized output for a single input, from its paths.
fn summarize(
    input: Sign,
    psi: &PureState,
    paths: &[PathRecord; 4],
) -> Result<(f64, f64, DensityMatrix)> {
    let g: f64 = paths.iter().map(|p| p.weight).sum();
    if g < 1e-15 {
        return Err(Error::Degenerate {
            input: input.label(),
            g,
        });
    }
    let rho = paths
        .iter()
        .fold(DensityMatrix::zero(), |acc, p| acc + outer(&p.final_state))
        .scale(1.0 / g);
    let f = fidelity_pure(psi, &rho)?;
    Ok((f, g, rho))
}

/// Runs the scheme with the measurement basis set by `c.alpha`.
pub fn protect(e: &Ensemble, c: &ControlParams, r: NoiseStrength) -> Result<ProtectionResult> {
    protect_with(e, &OperatorSet::build(e.phi, c, r))
}

/// Runs the scheme with a prebuilt operator set.
pub fn protect_with(e: &Ensemble, ops: &OperatorSet) -> Result<ProtectionResult> {
    let psi_p = e.state(Sign::Plus);
    let psi_m = e.state(Sign::Minus);
    let paths_plus = run_paths(&psi_p, ops);
    let paths_minus = run_paths(&psi_m, ops);
    let (f_plus, g_plus, rho_out_plus) = summarize(Sign::Plus, &psi_p, &paths_plus)?;
    let (f_minus, g_minus, rho_out_minus) = summarize(Sign::Minus, &psi_m, &paths_minus)?;
    let (sp, sm) = (e.s_plus, e.s_minus());
    Ok(ProtectionResult {
        f_plus,
        f_minus,
        g_plus,
        g_minus,
        fidelity: sp * f_plus + sm * f_minus,
        success: sp * g_plus + sm * g_minus,
        rho_out_plus,
        rho_out_minus,
        paths_plus,
        paths_minus,
    })
}

/// Unnormalized state of one input after each stage, for one preweak outcome.
/// Two-element arrays are indexed by the Kraus branch `[E1, E2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evolution {
    pub input: Sign,
    pub outcome: Sign,
    pub after_preweak: PureState,
    pub after_feedforward: PureState,
    pub after_noise: [PureState; 2],
    pub after_postweak: [PureState; 2],
    pub final_states: [PureState; 2],
}

impl Evolution {
    /// Squared norms along branch `j` (0 for `E1`, 1 for `E2`), one per stage.
    pub fn branch_norms(&self, j: usize) -> [f64; 5] {
        [
            self.after_preweak.norm_sqr(),
            self.after_feedforward.norm_sqr(),
            self.after_noise[j].norm_sqr(),
            self.after_postweak[j].norm_sqr(),
            self.final_states[j].norm_sqr(),
        ]
    }
}

/// Applies the operators one stage at a time to input `which`, following
/// preweak outcome `outcome`.
pub fn trace_evolution(
    which: Sign,
    outcome: Sign,
    e: &Ensemble,
    c: &ControlParams,
    r: NoiseStrength,
) -> Evolution {
    let ops = OperatorSet::build(e.phi, c, r);
    let s0 = e.state(which);
    let s1 = ops.preweak(outcome).apply(&s0);
    let s2 = ops.feedforward(outcome).apply(&s1);
    let noisy = KrausIndex::BOTH.map(|j| ops.kraus(j).apply(&s2));
    let undo = ops.feedforward(outcome).dagger();
    let post = noisy.map(|s| ops.postweak(outcome).apply(&undo.apply(&s)));
    let fin = post.map(|s| ops.feedback(outcome).apply(&s));
    Evolution {
        input: which,
        outcome,
        after_preweak: s1,
        after_feedforward: s2,
        after_noise: noisy,
        after_postweak: post,
        final_states: fin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    fn noise(r: f64) -> NoiseStrength {
        NoiseStrength::new(r).unwrap()
    }

    fn equal_up_to_phase(a: &PureState, b: &PureState) -> bool {
        (a.inner(b).norm() - 1.0).abs() < 1e-14
    }

    #[test]
    fn basis_at_zero_is_logical() {
        let (vp, vm) = build_basis(0.0, 0.0);
        assert!(vp.max_abs_diff(&PureState::ket0()) < 1e-14);
        assert!(vm.max_abs_diff(&PureState::ket1()) < 1e-14);
    }

    #[test]
    fn basis_is_orthonormal() {
        for (a, ph) in [(0.3, 1.0), (-2.0, -0.4), (3.1, 2.9)] {
            let (vp, vm) = build_basis(a, ph);
            assert!(vp.inner(&vm).norm() < 1e-14);
            assert!((vp.norm_sqr() - 1.0).abs() < 1e-14);
            assert!((vm.norm_sqr() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn basis_quarter_turn_is_minus() {
        let (vp, _) = build_basis(FRAC_PI_2, 0.0);
        assert!(equal_up_to_phase(&vp, &PureState::ket_minus()));
    }

    #[test]
    fn preweak_limits() {
        let (vp, vm) = build_basis(0.4, 0.2);
        let (mp, mm) = build_preweak(0.5, &vp, &vm);
        let half = Operator::identity().scale(std::f64::consts::FRAC_1_SQRT_2.into());
        assert!(mp.max_abs_diff(&half) < 1e-14);
        assert!(mm.max_abs_diff(&half) < 1e-14);
        let (mp, _) = build_preweak(0.0, &vp, &vm);
        assert!(mp.max_abs_diff(&Operator::projector(&vm)) < 1e-14);
    }

    #[test]
    fn feedforward_maps_basis_to_logical() {
        let (vp, vm) = build_basis(0.0, 0.0);
        let (up, _) = build_feedforward(&vp, &vm);
        assert!(up.max_abs_diff(&Operator::identity()) < 1e-14);
        let (vp, vm) = build_basis(1.3, -0.8);
        let (up, um) = build_feedforward(&vp, &vm);
        assert!(up.apply(&vp).max_abs_diff(&PureState::ket0()) < 1e-14);
        assert!(um.apply(&vp).max_abs_diff(&PureState::ket1()) < 1e-14);
    }

    #[test]
    fn ad_channel_examples() {
        let (e1, e2) = build_ad_kraus(noise(0.0));
        assert_eq!(e1, Operator::identity());
        assert_eq!(e2, Operator::zero());

        let one = outer(&PureState::ket1());
        for (r, p0) in [(1.0, 1.0), (0.3, 0.3)] {
            let (e1, e2) = build_ad_kraus(noise(r));
            let out = one.conjugate_by(&e1) + one.conjugate_by(&e2);
            assert!(out.max_abs_diff(&DensityMatrix::diag(p0, 1.0 - p0)) < 1e-15);
        }
    }

    #[test]
    fn postweak_limits() {
        let (vp, vm) = build_basis(0.7, 0.1);
        let (np, nbp, nm, nbm) = build_postweak(0.0, 0.0, &vp, &vm);
        assert!(np.max_abs_diff(&Operator::identity()) < 1e-14);
        assert!(nm.max_abs_diff(&Operator::identity()) < 1e-14);
        assert_eq!(nbp, Operator::zero());
        assert_eq!(nbm, Operator::zero());

        let (np, nbp, _, _) = build_postweak(1.0, 0.3, &vp, &vm);
        assert!(np.max_abs_diff(&Operator::projector(&vm)) < 1e-14);
        assert!(nbp.max_abs_diff(&Operator::projector(&vp)) < 1e-14);

        let (_, _, nm, nbm) = build_postweak(0.2, 0.7, &vp, &vm);
        let sum = nm.effect() + nbm.effect();
        assert!(sum.max_abs_diff(&Operator::identity()) < 1e-14);
    }

    #[test]
    fn feedback_examples() {
        assert!(build_feedback(0.0, 0.9).max_abs_diff(&Operator::identity()) < 1e-15);
        let minus_id = Operator::identity().scale((-1.0).into());
        assert!(build_feedback(2.0 * PI, 0.9).max_abs_diff(&minus_id) < 1e-15);
        // φ = 0 keeps real |±⟩ coefficients real
        let r = build_feedback(0.77, 0.0);
        let out = r.apply(&ket_plane(1.2, 0.0));
        let (cp, cm) = out.pm_components();
        assert!(cp.im.abs() < 1e-15 && cm.im.abs() < 1e-15);
    }

    #[test]
    fn feedback_keeps_ensemble_plane() {
        // rotating ψ+ must stay in the great circle through ψ±
        let phi = 1.1;
        let r = build_feedback(0.6, phi);
        let out = r.apply(&ket_plane(0.4, phi));
        assert!(equal_up_to_phase(&out, &ket_plane(0.4 + 0.6, phi)));
    }

    #[test]
    fn identity_pipeline() {
        let e = Ensemble::new(FRAC_PI_3, 0.4, 0.3).unwrap();
        let res = protect(&e, &ControlParams::identity(), noise(0.0)).unwrap();
        assert!((res.fidelity - 1.0).abs() < 1e-12);
        assert!((res.success - 1.0).abs() < 1e-12);
        let paths = run_paths(&e.state(Sign::Plus), &OperatorSet::build(e.phi, &ControlParams::identity(), noise(0.0)));
        assert_eq!(paths[1].weight, 0.0);
        assert_eq!(paths[3].weight, 0.0);
        let restored = paths[0].final_state + paths[2].final_state;
        let psi = e.state(Sign::Plus).scale(std::f64::consts::SQRT_2.into());
        assert!(restored.max_abs_diff(&psi) < 1e-14);
    }

    #[test]
    fn definite_scheme_never_abandons() {
        let e = Ensemble::new(1.0, -0.3, 0.8).unwrap();
        let c = ControlParams::new(0.9, 0.83, 0.0, 0.0, 1.2, -0.4).unwrap();
        let res = protect(&e, &c, noise(0.7)).unwrap();
        assert!((res.success - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_run_is_an_error() {
        // postweak discards everything left after a projective preweak and no noise
        let e = Ensemble::new(1.0, 0.0, 0.5).unwrap();
        let c = ControlParams::new(0.0, 1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            protect(&e, &c, noise(0.0)),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn control_params_validation() {
        assert!(ControlParams::new(0.0, 1.5, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(ControlParams::new(0.0, 0.5, -0.1, 0.0, 0.0, 0.0).is_err());
        let c = ControlParams::new(4.0, 0.7, 0.0, 0.0, -4.0, 0.0).unwrap();
        assert!((-PI..PI).contains(&c.alpha) && (-PI..PI).contains(&c.gamma_plus));
        assert!(c.validate(RangeMode::Full).is_ok());
        assert!(c.validate(RangeMode::Paper).is_err());
    }

    #[test]
    fn zero_noise_kills_second_branch() {
        let e = Ensemble::new(0.9, 0.2, 0.4).unwrap();
        let c = ControlParams::new(0.3, 0.8, 0.1, 0.2, 0.5, -0.5).unwrap();
        for (which, outcome) in [(Sign::Plus, Sign::Plus), (Sign::Minus, Sign::Minus)] {
            let ev = trace_evolution(which, outcome, &e, &c, noise(0.0));
            assert_eq!(ev.after_noise[1], PureState::zero());
            assert_eq!(ev.after_postweak[1], PureState::zero());
            assert_eq!(ev.final_states[1], PureState::zero());
        }
    }

    #[test]
    fn feedforward_stage_is_u_applied_to_preweak_stage() {
        let e = Ensemble::new(0.9, 0.2, 0.4).unwrap();
        let c = ControlParams::new(0.3, 0.8, 0.1, 0.2, 0.5, -0.5).unwrap();
        let ops = OperatorSet::build(e.phi, &c, noise(0.4));
        let ev = trace_evolution(Sign::Plus, Sign::Plus, &e, &c, noise(0.4));
        assert_eq!(ops.u_plus.apply(&ev.after_preweak), ev.after_feedforward);
    }
}
