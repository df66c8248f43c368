//! Brute-force ground truth.
//!
//! The protection map is rebuilt here from scratch with `nalgebra` matrices
//! and composed at the level of superoperators, so it shares no arithmetic
//! with the per-path state products in [`crate::scheme`].
//!
//! Vectorization is column-stacking: `vec(A X B) = (Bᵀ ⊗ A) vec(X)`, hence
//! `vec(K ρ K†) = (K̄ ⊗ K) vec(ρ)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::{Complex, DensityMatrix};
use crate::scheme::{protect, ControlParams, Ensemble, NoiseStrength, Sign};

type M2 = Matrix2<C>;
type M4 = Matrix4<C>;

fn re(x: f64) -> C {
    C::new(x, 0.0)
}

fn plus() -> Vector2<C> {
    Vector2::new(re(FRAC_1_SQRT_2), re(FRAC_1_SQRT_2))
}

fn minus() -> Vector2<C> {
    Vector2::new(re(FRAC_1_SQRT_2), re(-FRAC_1_SQRT_2))
}

fn ket_bra(k: &Vector2<C>, b: &Vector2<C>) -> M2 {
    k * b.adjoint()
}

/// `cos(t/2)|+⟩ + e^{iφ} sin(t/2)|−⟩`.
fn plane(t: f64, phi: f64) -> Vector2<C> {
    plus() * re((t / 2.0).cos()) + minus() * (C::from_polar(1.0, phi) * (t / 2.0).sin())
}

fn input_state(e: &Ensemble, which: Sign) -> Vector2<C> {
    // same canonical branch as the ensemble: θ ∈ [0, π] so ±θ ∈ (−π, π] except −π
    let t = match which {
        Sign::Plus => e.theta,
        Sign::Minus => -e.theta,
    };
    plane(t, e.phi)
}

/// Column-stacking superoperator of `ρ ↦ K ρ K†`.
pub fn superop(k: &M2) -> M4 {
    k.conjugate().kronecker(k)
}

fn vec2(m: &M2) -> Vector4<C> {
    Vector4::new(m[(0, 0)], m[(1, 0)], m[(0, 1)], m[(1, 1)])
}

fn unvec(v: &Vector4<C>) -> M2 {
    M2::new(v[0], v[2], v[1], v[3])
}

/// The operators of the scheme, rebuilt independently.
struct Pipeline {
    maps: [ConditionalMap; 2],
}

impl Pipeline {
    fn new(phi: f64, c: &ControlParams, r: NoiseStrength) -> Self {
        let r = r.value();
        let b = (c.alpha + PI / 2.0) / 2.0;
        let ph = C::from_polar(1.0, phi);
        let vp = plus() * re(b.cos()) + minus() * (ph * b.sin());
        let vm = plus() * re(b.sin()) - minus() * (ph * b.cos());
        let pp = ket_bra(&vp, &vp);
        let pm = ket_bra(&vm, &vm);
        let k0 = Vector2::new(re(1.0), re(0.0));
        let k1 = Vector2::new(re(0.0), re(1.0));

        let m = [
            pp * re(c.p.sqrt()) + pm * re((1.0 - c.p).sqrt()),
            pp * re((1.0 - c.p).sqrt()) + pm * re(c.p.sqrt()),
        ];
        let u = [
            ket_bra(&k0, &vp) + ket_bra(&k1, &vm),
            ket_bra(&k1, &vp) + ket_bra(&k0, &vm),
        ];
        let e1 = M2::new(re(1.0), re(0.0), re(0.0), re((1.0 - r).sqrt()));
        let e2 = M2::new(re(0.0), re(r.sqrt()), re(0.0), re(0.0));
        let noise = superop(&e1) + superop(&e2);
        let n = [
            pp * re((1.0 - c.p1).sqrt()) + pm,
            pp + pm * re((1.0 - c.p2).sqrt()),
        ];
        // rotation axis: Bloch vector (−sin φ, cos φ, 0) with |±⟩ as poles
        let s1 = M2::new(re(1.0), re(0.0), re(0.0), re(-1.0));
        let s2 = M2::new(re(0.0), C::new(0.0, 1.0), C::new(0.0, -1.0), re(0.0));
        let axis = s2 * re(phi.cos()) - s1 * re(phi.sin());
        let rot = |g: f64| M2::identity() * re((g / 2.0).cos()) - axis * C::new(0.0, (g / 2.0).sin());
        let rots = [rot(c.gamma_plus), rot(c.gamma_minus)];

        let maps = [0, 1].map(|i| {
            let before = superop(&(u[i] * m[i]));
            let after = superop(&(rots[i] * n[i] * u[i].adjoint()));
            ConditionalMap {
                matrix: after * noise * before,
            }
        });
        Self { maps }
    }
}

/// Completely positive map kept after one preweak outcome, as a 4×4
/// column-stacking superoperator.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMap {
    pub matrix: M4,
}

impl ConditionalMap {
    pub fn apply(&self, rho: &M2) -> M2 {
        unvec(&(self.matrix * vec2(rho)))
    }

    /// `Σ_ab |a⟩⟨b| ⊗ Φ(|a⟩⟨b|)`.
    pub fn choi(&self) -> M4 {
        let mut out = M4::zeros();
        for a in 0..2 {
            for b in 0..2 {
                let mut eab = M2::zeros();
                eab[(a, b)] = re(1.0);
                let img = self.apply(&eab);
                for i in 0..2 {
                    for j in 0..2 {
                        out[(2 * a + i, 2 * b + j)] = img[(i, j)];
                    }
                }
            }
        }
        out
    }

    /// Smallest eigenvalue of the Hermitian part of the Choi matrix.
    pub fn choi_min_eigenvalue(&self) -> f64 {
        let c = self.choi();
        let h = (c + c.adjoint()) * re(0.5);
        h.symmetric_eigen().eigenvalues.min()
    }

    /// Largest eigenvalue of `Φ†(I) − I`; positive values mean some input
    /// gains trace.
    pub fn trace_excess(&self) -> f64 {
        let dual = unvec(&(self.matrix.adjoint() * vec2(&M2::identity())));
        let d = dual - M2::identity();
        let h = (d + d.adjoint()) * re(0.5);
        h.symmetric_eigen().eigenvalues.max()
    }
}

/// Conditional maps for preweak outcomes `+` and `−`.
pub fn conditional_maps(phi: f64, c: &ControlParams, r: NoiseStrength) -> [ConditionalMap; 2] {
    Pipeline::new(phi, c, r).maps
}

/// Same quantities as [`crate::scheme::ProtectionResult`], without path records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub f_plus: f64,
    pub f_minus: f64,
    pub g_plus: f64,
    pub g_minus: f64,
    pub fidelity: f64,
    pub success: f64,
    pub rho_out_plus: DensityMatrix,
    pub rho_out_minus: DensityMatrix,
}

fn to_density(m: &M2) -> DensityMatrix {
    let c = |z: C| Complex::new(z.re, z.im);
    DensityMatrix {
        m00: c(m[(0, 0)]),
        m01: c(m[(0, 1)]),
        m10: c(m[(1, 0)]),
        m11: c(m[(1, 1)]),
    }
}

/// Protection map evaluated by superoperator composition.
pub fn superoperator_protect(
    e: &Ensemble,
    c: &ControlParams,
    r: NoiseStrength,
) -> Result<OracleResult> {
    let maps = conditional_maps(e.phi, c, r);
    let total = maps[0].matrix + maps[1].matrix;
    let mut out = [(0.0, 0.0, M2::zeros()); 2];
    for (k, which) in Sign::BOTH.into_iter().enumerate() {
        let psi = input_state(e, which);
        let rho = ket_bra(&psi, &psi);
        let sigma = unvec(&(total * vec2(&rho)));
        let g = sigma.trace().re;
        if g < 1e-15 {
            return Err(Error::Degenerate {
                input: which.label(),
                g,
            });
        }
        let rho_out = sigma / re(g);
        let f = (psi.adjoint() * rho_out * psi)[(0, 0)].re.clamp(0.0, 1.0);
        out[k] = (f, g, rho_out);
    }
    let (sp, sm) = (e.s_plus, e.s_minus());
    Ok(OracleResult {
        f_plus: out[0].0,
        f_minus: out[1].0,
        g_plus: out[0].1,
        g_minus: out[1].1,
        fidelity: sp * out[0].0 + sm * out[1].0,
        success: sp * out[0].1 + sm * out[1].1,
        rho_out_plus: to_density(&out[0].2),
        rho_out_minus: to_density(&out[1].2),
    })
}

/// Optimal two-outcome discrimination probability of the ensemble.
pub fn helstrom_success(e: &Ensemble) -> f64 {
    let a = input_state(e, Sign::Plus);
    let b = input_state(e, Sign::Minus);
    let ov = a.dotc(&b).norm_sqr();
    let disc = (1.0 - 4.0 * e.s_plus * e.s_minus() * ov).max(0.0);
    (1.0 + disc.sqrt()) / 2.0
}

/// A parameter [`exhaustive_argmax`] may scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FreeParam {
    Alpha,
    P,
    P1,
    P2,
    GammaPlus,
    GammaMinus,
    /// `γ+ = γ−` scanned together.
    Gamma,
}

impl FreeParam {
    fn range(self) -> (f64, f64, bool) {
        match self {
            FreeParam::P | FreeParam::P1 | FreeParam::P2 => (0.0, 1.0, true),
            _ => (-PI, PI, false),
        }
    }

    fn grid(self, step: f64) -> Vec<f64> {
        let (lo, hi, closed) = self.range();
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        let mut v: Vec<f64> = (0..=n).map(|k| lo + k as f64 * step).collect();
        if !closed && v.last().is_some_and(|&x| x >= hi - 1e-12) {
            v.pop();
        }
        if closed && v.last().is_some_and(|&x| x < hi - 1e-12) {
            v.push(hi);
        }
        v
    }

    fn set(self, c: &mut ControlParams, v: f64) {
        match self {
            FreeParam::Alpha => c.alpha = v,
            FreeParam::P => c.p = v,
            FreeParam::P1 => c.p1 = v,
            FreeParam::P2 => c.p2 = v,
            FreeParam::GammaPlus => c.gamma_plus = v,
            FreeParam::GammaMinus => c.gamma_minus = v,
            FreeParam::Gamma => {
                c.gamma_plus = v;
                c.gamma_minus = v;
            }
        }
    }
}

/// Grid maximum of the average fidelity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridArgmax {
    pub params: ControlParams,
    pub fidelity: f64,
    pub success: f64,
    pub index: usize,
    pub evaluations: usize,
}

/// Scans one or two parameters on a uniform grid (the first parameter
/// outermost), everything else fixed at `pinned`. Ties go to the lowest index.
pub fn exhaustive_argmax(
    e: &Ensemble,
    r: NoiseStrength,
    pinned: &ControlParams,
    free: &[FreeParam],
    step: f64,
) -> Result<GridArgmax> {
    if free.is_empty() || free.len() > 2 {
        return Err(Error::Config("exhaustive_argmax scans one or two parameters".into()));
    }
    if step.is_nan() || step < 1e-6 {
        return Err(Error::out_of_range("step", step, "[1e-6, inf)"));
    }
    let axes: Vec<Vec<f64>> = free.iter().map(|f| f.grid(step)).collect();
    let inner = axes.get(1).map_or(1, Vec::len);
    let size = axes[0].len() * inner;
    let at = |idx: usize| {
        let mut c = *pinned;
        free[0].set(&mut c, axes[0][idx / inner]);
        if let Some(f) = free.get(1) {
            f.set(&mut c, axes[1][idx % inner]);
        }
        c
    };
    let best = (0..size)
        .into_par_iter()
        .with_min_len(4096)
        .filter_map(|i| {
            let c = at(i);
            superoperator_protect(e, &c, r)
                .ok()
                .map(|o| (i, o.fidelity, o.success))
        })
        .reduce_with(|a, b| {
            if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                b
            } else {
                a
            }
        })
        .ok_or_else(|| Error::Config("every grid point was degenerate".into()))?;
    Ok(GridArgmax {
        params: at(best.0),
        fidelity: best.1,
        success: best.2,
        index: best.0,
        evaluations: size,
    })
}

/// A uniformly drawn valid input: ensemble, control parameters and noise.
pub fn random_instance<R: Rng>(rng: &mut R) -> (Ensemble, ControlParams, NoiseStrength) {
    let e = Ensemble::new(
        rng.random_range(0.0..=PI),
        rng.random_range(-PI..PI),
        rng.random_range(0.0..=1.0),
    )
    .expect("drawn inside the valid ranges");
    let c = ControlParams {
        alpha: rng.random_range(-PI..PI),
        p: rng.random_range(0.0..=1.0),
        p1: rng.random_range(0.0..=1.0),
        p2: rng.random_range(0.0..=1.0),
        gamma_plus: rng.random_range(-PI..PI),
        gamma_minus: rng.random_range(-PI..PI),
    };
    let r = NoiseStrength::new(rng.random_range(0.0..=1.0)).expect("drawn inside [0, 1]");
    (e, c, r)
}

/// Outcome of [`verify`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub draws: usize,
    /// Draws where every input was abandoned, skipped.
    pub degenerate: usize,
    /// Largest `|protect − superoperator_protect|` over `f±, g±, F, G`.
    pub max_gap: f64,
    /// Most negative Choi eigenvalue seen.
    pub min_choi_eigenvalue: f64,
    /// Largest trace gain seen.
    pub max_trace_excess: f64,
}

impl VerifyReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_gap < tol && self.min_choi_eigenvalue > -1e-10 && self.max_trace_excess < 1e-12
    }
}

/// Compares the path sum with the superoperator route on `draws` seeded
/// random inputs and checks every conditional map for complete positivity.
pub fn verify(draws: usize, seed: u64) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = VerifyReport {
        draws,
        degenerate: 0,
        max_gap: 0.0,
        min_choi_eigenvalue: f64::INFINITY,
        max_trace_excess: f64::NEG_INFINITY,
    };
    for _ in 0..draws {
        let (e, c, r) = random_instance(&mut rng);
        for m in conditional_maps(e.phi, &c, r) {
            rep.min_choi_eigenvalue = rep.min_choi_eigenvalue.min(m.choi_min_eigenvalue());
            rep.max_trace_excess = rep.max_trace_excess.max(m.trace_excess());
        }
        match (protect(&e, &c, r), superoperator_protect(&e, &c, r)) {
            (Ok(a), Ok(b)) => {
                for (x, y) in [
                    (a.f_plus, b.f_plus),
                    (a.f_minus, b.f_minus),
                    (a.g_plus, b.g_plus),
                    (a.g_minus, b.g_minus),
                    (a.fidelity, b.fidelity),
                    (a.success, b.success),
                ] {
                    rep.max_gap = rep.max_gap.max((x - y).abs());
                }
            }
            (Err(_), Err(_)) => rep.degenerate += 1,
            // one route degenerate and the other not
            _ => rep.max_gap = f64::INFINITY,
        }
    }
    rep
}
