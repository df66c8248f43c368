//! Parameter search over the control family.
//!
//! Sweeps enumerate a rectangular lattice of [`ControlParams`]. The optimizers
//! ([`definite_optimum`], [`pareto`]) seed from a lattice and polish the best
//! seeds with the simplex in [`crate::simplex`].
//!
//! The success probability does not depend on the feedback angles, and each
//! branch's contribution to the fidelity is `A + B cos γ + C sin γ` in its own
//! angle, so the optimizers solve `γ±` exactly at every point
//! ([`solve_feedback`]) instead of gridding them.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::{outer, wrap_angle, Complex, DensityMatrix, Operator, PureState};
use crate::scheme::{
    build_basis, feedback_axis, protect_with, ControlParams, Ensemble, KrausIndex, NoiseStrength,
    OperatorSet, ProtectionResult, Sign,
};
use crate::simplex::{self, Bound, SimplexOptions};

/// Default lattice cap.
pub const DEFAULT_CAP: u128 = 100_000_000;

/// Fidelities and success probabilities of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub f_plus: f64,
    pub f_minus: f64,
    pub g_plus: f64,
    pub g_minus: f64,
    pub fidelity: f64,
    pub success: f64,
}

impl From<&ProtectionResult> for Metrics {
    fn from(r: &ProtectionResult) -> Self {
        Self {
            f_plus: r.f_plus,
            f_minus: r.f_minus,
            g_plus: r.g_plus,
            g_minus: r.g_minus,
            fidelity: r.fidelity,
            success: r.success,
        }
    }
}

/// How the measurement basis angle is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BasisPin {
    Free,
    Fixed(f64),
    /// The Helstrom basis of the ensemble being protected.
    Helstrom,
}

/// How the two feedback angles are tied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeedbackPin {
    Free,
    Zero,
    /// `γ− = γ+`.
    Tied,
    /// `γ− = −γ+`.
    Mirrored,
}

impl FeedbackPin {
    pub const ALL: [FeedbackPin; 4] = [
        FeedbackPin::Free,
        FeedbackPin::Zero,
        FeedbackPin::Tied,
        FeedbackPin::Mirrored,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FeedbackPin::Free => "free",
            FeedbackPin::Zero => "zero",
            FeedbackPin::Tied => "tied",
            FeedbackPin::Mirrored => "mirrored",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.label() == s)
    }
}

/// A sub-family of the control parameters, described by its pins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub basis: BasisPin,
    pub feedback: FeedbackPin,
}

/// The named families compared throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    /// Every parameter free.
    Gqcc,
    /// Measurement basis pinned to `α = 0` (the logical basis when `φ = 0`)
    /// and one feedback angle, applied as `γ− = −γ+`.
    Qcc,
    /// Measurement basis pinned to the Helstrom basis.
    Helstrom,
    /// Logical basis and no feedback rotation.
    Ffc,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::Gqcc,
        BaselineKind::Qcc,
        BaselineKind::Helstrom,
        BaselineKind::Ffc,
    ];

    pub fn family(self) -> Family {
        match self {
            BaselineKind::Gqcc => Family::new(BasisPin::Free, FeedbackPin::Free),
            BaselineKind::Qcc => Family::qcc(FeedbackPin::Mirrored),
            BaselineKind::Helstrom => Family::new(BasisPin::Helstrom, FeedbackPin::Free),
            BaselineKind::Ffc => Family::new(BasisPin::Fixed(0.0), FeedbackPin::Zero),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BaselineKind::Gqcc => "gqcc",
            BaselineKind::Qcc => "qcc",
            BaselineKind::Helstrom => "helstrom",
            BaselineKind::Ffc => "ffc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.label() == s)
    }
}

impl From<BaselineKind> for Family {
    fn from(b: BaselineKind) -> Self {
        b.family()
    }
}

impl Family {
    pub const fn new(basis: BasisPin, feedback: FeedbackPin) -> Self {
        Self { basis, feedback }
    }

    /// Logical-basis family with the given feedback freedom.
    pub const fn qcc(feedback: FeedbackPin) -> Self {
        Self::new(BasisPin::Fixed(0.0), feedback)
    }

    pub fn basis_free(&self) -> bool {
        self.basis == BasisPin::Free
    }

    /// Pinned basis angle for `e`, if any.
    pub fn pinned_alpha(&self, e: &Ensemble) -> Option<f64> {
        match self.basis {
            BasisPin::Free => None,
            BasisPin::Fixed(a) => Some(wrap_angle(a)),
            BasisPin::Helstrom => Some(helstrom_angle(e).alpha),
        }
    }

    /// Overwrites the pinned coordinates of `c`.
    pub fn pin(&self, e: &Ensemble, c: &ControlParams) -> ControlParams {
        let mut c = *c;
        if let Some(a) = self.pinned_alpha(e) {
            c.alpha = a;
        }
        match self.feedback {
            FeedbackPin::Free => {}
            FeedbackPin::Zero => {
                c.gamma_plus = 0.0;
                c.gamma_minus = 0.0;
            }
            FeedbackPin::Tied => c.gamma_minus = c.gamma_plus,
            FeedbackPin::Mirrored => c.gamma_minus = wrap_angle(-c.gamma_plus),
        }
        c
    }

    pub fn evaluate(
        &self,
        e: &Ensemble,
        c: &ControlParams,
        r: NoiseStrength,
    ) -> Result<(ControlParams, ProtectionResult)> {
        let c = self.pin(e, c);
        let res = protect_with(e, &OperatorSet::build(e.phi, &c, r))?;
        Ok((c, res))
    }

    /// Families strictly contained in this one whose optima are used as
    /// extra starting points.
    fn nested(&self) -> Vec<Family> {
        let mut out = Vec::new();
        if self.basis_free() {
            out.push(Family::new(BasisPin::Fixed(0.0), self.feedback));
            out.push(Family::new(BasisPin::Helstrom, self.feedback));
        }
        if self.feedback == FeedbackPin::Free {
            out.push(Family::new(self.basis, FeedbackPin::Zero));
            if !self.basis_free() {
                out.push(Family::new(self.basis, FeedbackPin::Mirrored));
            }
        }
        out
    }
}

/// Fidelity response of one ensemble state to the feedback rotation after one
/// preweak outcome: `a + b cos γ + c sin γ`, already divided by the state's
/// success probability.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Response {
    a: f64,
    b: f64,
    c: f64,
}

impl Response {
    fn at(&self, gamma: f64) -> f64 {
        self.a + self.b * gamma.cos() + self.c * gamma.sin()
    }
}

fn pair_optimum(b: f64, c: f64) -> f64 {
    if b == 0.0 && c == 0.0 {
        0.0
    } else {
        c.atan2(b)
    }
}

/// Sets the feedback angles allowed by `family` to their exact optimum for the
/// remaining parameters and returns the resulting metrics. Pinned coordinates
/// of `c` are overwritten.
pub fn solve_feedback(
    e: &Ensemble,
    c: &ControlParams,
    r: NoiseStrength,
    family: &Family,
) -> Result<(ControlParams, Metrics)> {
    let mut c = family.pin(e, c);
    c.gamma_plus = 0.0;
    c.gamma_minus = 0.0;
    let ops = OperatorSet::build(e.phi, &c, r);
    let gen = feedback_axis(e.phi);

    let mut resp = [[Response::default(); 2]; 2];
    let mut g = [0.0; 2];
    for (s, input) in Sign::BOTH.into_iter().enumerate() {
        let psi = e.state(input);
        let mut sigma = [DensityMatrix::zero(); 2];
        for (i, outcome) in Sign::BOTH.into_iter().enumerate() {
            for j in KrausIndex::BOTH {
                sigma[i] = sigma[i] + outer(&ops.path_operator(outcome, j).apply(&psi));
            }
            g[s] += sigma[i].trace().re;
        }
        if g[s] < 1e-15 {
            return Err(Error::Degenerate {
                input: input.label(),
                g: g[s],
            });
        }
        for i in 0..2 {
            let rho = sigma[i].as_operator();
            let flipped = gen * rho * gen;
            let comm = rho * gen - gen * rho;
            let ev = |op: Operator| psi.inner(&op.apply(&psi));
            let a = ev(rho + flipped).re * 0.5;
            let b = ev(rho - flipped).re * 0.5;
            let cc = (ev(comm) * Complex::new(0.0, 0.5)).re;
            resp[s][i] = Response {
                a: a / g[s],
                b: b / g[s],
                c: cc / g[s],
            };
        }
    }

    let (sp, sm) = (e.s_plus, e.s_minus());
    let combined = |i: usize| Response {
        a: sp * resp[0][i].a + sm * resp[1][i].a,
        b: sp * resp[0][i].b + sm * resp[1][i].b,
        c: sp * resp[0][i].c + sm * resp[1][i].c,
    };
    let (rp, rm) = (combined(0), combined(1));
    let (gp, gm) = match family.feedback {
        FeedbackPin::Zero => (0.0, 0.0),
        FeedbackPin::Free => (pair_optimum(rp.b, rp.c), pair_optimum(rm.b, rm.c)),
        FeedbackPin::Tied => {
            let t = pair_optimum(rp.b + rm.b, rp.c + rm.c);
            (t, t)
        }
        FeedbackPin::Mirrored => {
            // rm.at(-γ) = a + b cos γ − c sin γ
            let t = pair_optimum(rp.b + rm.b, rp.c - rm.c);
            (t, -t)
        }
    };
    c.gamma_plus = wrap_angle(gp);
    c.gamma_minus = wrap_angle(gm);
    let f_plus = (resp[0][0].at(c.gamma_plus) + resp[0][1].at(c.gamma_minus)).clamp(0.0, 1.0);
    let f_minus = (resp[1][0].at(c.gamma_plus) + resp[1][1].at(c.gamma_minus)).clamp(0.0, 1.0);
    Ok((
        c,
        Metrics {
            f_plus,
            f_minus,
            g_plus: g[0],
            g_minus: g[1],
            fidelity: sp * f_plus + sm * f_minus,
            success: sp * g[0] + sm * g[1],
        },
    ))
}

/// Evaluates one point, optionally solving the free feedback angles.
pub fn evaluate_point(
    e: &Ensemble,
    c: &ControlParams,
    r: NoiseStrength,
    family: &Family,
    solve: bool,
) -> Result<(ControlParams, Metrics)> {
    if solve && family.feedback != FeedbackPin::Zero {
        solve_feedback(e, c, r, family)
    } else {
        let (c, res) = family.evaluate(e, c, r)?;
        Ok((c, Metrics::from(&res)))
    }
}

/// One lattice axis `lo, lo + step, …` up to `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Axis {
    pub const fn new(lo: f64, hi: f64, step: f64) -> Self {
        Self { lo, hi, step }
    }

    pub const fn point(v: f64) -> Self {
        Self::new(v, v, 1.0)
    }

    /// Full turn `[-π, π)` with `n` points.
    pub fn turn(n: usize) -> Self {
        let step = 2.0 * PI / n as f64;
        Self::new(-PI, PI - step, step)
    }

    pub fn count(&self) -> usize {
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn value(&self, k: usize) -> f64 {
        (self.lo + k as f64 * self.step).min(self.hi)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count()).map(|k| self.value(k)).collect()
    }

    /// Parses `lo:hi:step`.
    pub fn parse(s: &str) -> Option<Self> {
        let v: Vec<f64> = s
            .split(':')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .ok()?;
        match v[..] {
            [x] => Some(Self::point(x)),
            [lo, hi, step] => Some(Self::new(lo, hi, step)),
            _ => None,
        }
    }

    fn check(&self, name: &str, range: Option<(f64, f64)>) -> Result<()> {
        let bad = |reason: &str| Error::InvalidGrid {
            axis: name.to_string(),
            reason: reason.to_string(),
        };
        if !(self.lo.is_finite() && self.hi.is_finite() && self.step.is_finite()) {
            return Err(bad("non-finite bound"));
        }
        if self.lo > self.hi {
            return Err(bad("lo > hi"));
        }
        if self.step <= 0.0 {
            return Err(bad("step must be positive"));
        }
        if let Some((lo, hi)) = range {
            if self.lo < lo || self.hi > hi {
                return Err(bad("outside the parameter range"));
            }
        }
        Ok(())
    }
}

/// Rectangular lattice over the six control parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub alpha: Axis,
    pub p: Axis,
    pub p1: Axis,
    pub p2: Axis,
    pub gamma_plus: Axis,
    pub gamma_minus: Axis,
    /// Restrict `p` to `[0, 1/2]`.
    pub paper_range: bool,
    /// Pin `p1 = p2 = 0`.
    pub definite: bool,
    /// Replace the `γ±` axes by the exact optimum at each point.
    pub solve_feedback: bool,
    pub cap: u128,
}

impl Default for GridSpec {
    /// Strength steps of 0.02 and angle steps of π/60.
    fn default() -> Self {
        Self {
            alpha: Axis::turn(120),
            p: Axis::new(0.0, 1.0, 0.02),
            p1: Axis::new(0.0, 1.0, 0.02),
            p2: Axis::new(0.0, 1.0, 0.02),
            gamma_plus: Axis::turn(120),
            gamma_minus: Axis::turn(120),
            paper_range: false,
            definite: false,
            solve_feedback: true,
            cap: DEFAULT_CAP,
        }
    }
}

impl GridSpec {
    pub fn definite() -> Self {
        Self {
            definite: true,
            ..Self::default()
        }
    }

    /// A lattice holding exactly `c`.
    pub fn single_point(c: &ControlParams) -> Self {
        Self {
            alpha: Axis::point(c.alpha),
            p: Axis::point(c.p),
            p1: Axis::point(c.p1),
            p2: Axis::point(c.p2),
            gamma_plus: Axis::point(c.gamma_plus),
            gamma_minus: Axis::point(c.gamma_minus),
            paper_range: false,
            definite: false,
            solve_feedback: false,
            cap: DEFAULT_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha.check("alpha", None)?;
        self.p.check("p", Some((0.0, 1.0)))?;
        self.p1.check("p1", Some((0.0, 1.0)))?;
        self.p2.check("p2", Some((0.0, 1.0)))?;
        self.gamma_plus.check("gamma_plus", None)?;
        self.gamma_minus.check("gamma_minus", None)?;
        if self.paper_range && self.p.lo > 0.5 {
            return Err(Error::InvalidGrid {
                axis: "p".into(),
                reason: "empty under the [0, 1/2] restriction".into(),
            });
        }
        Ok(())
    }

    /// The concrete lattice once `family`'s pins and the grid flags apply.
    pub fn lattice(&self, e: &Ensemble, family: &Family) -> Result<Lattice> {
        self.validate()?;
        let alpha = match family.pinned_alpha(e) {
            Some(a) => vec![a],
            None => self.alpha.values(),
        };
        let mut p = self.p.values();
        if self.paper_range {
            p.retain(|&v| v <= 0.5);
        }
        let (p1, p2) = if self.definite {
            (vec![0.0], vec![0.0])
        } else {
            (self.p1.values(), self.p2.values())
        };
        let solved = self.solve_feedback && family.feedback != FeedbackPin::Zero;
        let (gp, gm) = if solved || family.feedback == FeedbackPin::Zero {
            (vec![0.0], vec![0.0])
        } else {
            match family.feedback {
                FeedbackPin::Free => (self.gamma_plus.values(), self.gamma_minus.values()),
                _ => (self.gamma_plus.values(), vec![0.0]),
            }
        };
        let lat = Lattice {
            axes: [alpha, p, p1, p2, gp, gm],
            family: *family,
            solve_feedback: solved,
        };
        let size = lat.size();
        if size > self.cap {
            return Err(Error::GridTooLarge {
                size,
                cap: self.cap,
            });
        }
        Ok(lat)
    }
}

/// Materialized lattice; index order is `α` outermost, `γ−` innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub axes: [Vec<f64>; 6],
    pub family: Family,
    pub solve_feedback: bool,
}

impl Lattice {
    pub fn size(&self) -> u128 {
        self.axes.iter().map(|a| a.len() as u128).product()
    }

    pub fn params(&self, mut index: u64) -> ControlParams {
        let mut v = [0.0; 6];
        for k in (0..6).rev() {
            let n = self.axes[k].len() as u64;
            v[k] = self.axes[k][(index % n) as usize];
            index /= n;
        }
        ControlParams {
            alpha: v[0],
            p: v[1],
            p1: v[2],
            p2: v[3],
            gamma_plus: v[4],
            gamma_minus: v[5],
        }
    }

    /// Index along axis `k` of flat index `index`.
    pub fn coordinate(&self, index: u64, k: usize) -> usize {
        let inner: u64 = self.axes[k + 1..].iter().map(|a| a.len() as u64).product();
        ((index / inner) % self.axes[k].len() as u64) as usize
    }
}

/// One evaluated lattice point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub index: u64,
    pub params: ControlParams,
    pub outcome: std::result::Result<Metrics, String>,
}

fn eval_index(e: &Ensemble, r: NoiseStrength, lat: &Lattice, index: u64) -> SweepRecord {
    let raw = lat.params(index);
    match evaluate_point(e, &raw, r, &lat.family, lat.solve_feedback) {
        Ok((params, m)) => SweepRecord {
            index,
            params,
            outcome: Ok(m),
        },
        Err(err) => SweepRecord {
            index,
            params: lat.family.pin(e, &raw),
            outcome: Err(err.to_string()),
        },
    }
}

const CHUNK: u64 = 2048;
const CHUNKS_PER_BATCH: u64 = 64;

/// Evaluates every lattice point and hands the records to `sink` in lattice
/// order. Work is spread over the current rayon pool in fixed-size chunks, so
/// the output does not depend on the number of workers.
pub fn sweep_each<S>(
    e: &Ensemble,
    r: NoiseStrength,
    grid: &GridSpec,
    family: &Family,
    mut sink: S,
) -> Result<()>
where
    S: FnMut(&SweepRecord) -> Result<()>,
{
    let lat = grid.lattice(e, family)?;
    let size = lat.size() as u64;
    let batch = CHUNK * CHUNKS_PER_BATCH;
    let mut start = 0;
    while start < size {
        let end = (start + batch).min(size);
        let chunks: Vec<Vec<SweepRecord>> = (start..end)
            .step_by(CHUNK as usize)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|c0| {
                (c0..(c0 + CHUNK).min(end))
                    .map(|i| eval_index(e, r, &lat, i))
                    .collect()
            })
            .collect();
        for rec in chunks.iter().flatten() {
            sink(rec)?;
        }
        start = end;
    }
    Ok(())
}

/// Collects a whole sweep in lattice order.
pub fn sweep(
    e: &Ensemble,
    r: NoiseStrength,
    grid: &GridSpec,
    family: &Family,
) -> Result<Vec<SweepRecord>> {
    let mut out = Vec::new();
    sweep_each(e, r, grid, family, |rec| {
        out.push(rec.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Best record per bin, ties to the lowest lattice index.
fn bin_maxima<B>(
    e: &Ensemble,
    r: NoiseStrength,
    lat: &Lattice,
    nbins: usize,
    bin_of: B,
) -> Vec<Option<(u64, ControlParams, Metrics)>>
where
    B: Fn(u64, &Metrics) -> Option<usize> + Sync,
{
    let size = lat.size() as u64;
    let merge = |mut acc: Vec<Option<(u64, ControlParams, Metrics)>>,
                 other: Vec<Option<(u64, ControlParams, Metrics)>>| {
        for (a, o) in acc.iter_mut().zip(other) {
            if let Some(o) = o {
                let better = match a {
                    None => true,
                    Some(cur) => {
                        o.2.fidelity > cur.2.fidelity
                            || (o.2.fidelity == cur.2.fidelity && o.0 < cur.0)
                    }
                };
                if better {
                    *a = Some(o);
                }
            }
        }
        acc
    };
    let chunk_ids: Vec<u64> = (0..size).step_by(CHUNK as usize).collect();
    let partial: Vec<Vec<Option<(u64, ControlParams, Metrics)>>> = chunk_ids
        .into_par_iter()
        .map(|c0| {
            let mut best: Vec<Option<(u64, ControlParams, Metrics)>> = vec![None; nbins];
            for i in c0..(c0 + CHUNK).min(size) {
                let rec = eval_index(e, r, lat, i);
                if let Ok(m) = rec.outcome {
                    if let Some(b) = bin_of(i, &m) {
                        let better = best[b].as_ref().is_none_or(|cur| m.fidelity > cur.2.fidelity);
                        if better {
                            best[b] = Some((i, rec.params, m));
                        }
                    }
                }
            }
            best
        })
        .collect();
    partial.into_iter().fold(vec![None; nbins], merge)
}

/// What [`refine`] maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    MaxFidelity,
    /// `F − weight·(G − target)²`.
    FidelityAtSuccess { target: f64, weight: f64 },
    /// `G − weight·max(0, floor − F)²`.
    SuccessAboveFidelity { floor: f64, weight: f64 },
    /// `F − weight·dist(G, [lo, hi])²`.
    FidelityInBand { lo: f64, hi: f64, weight: f64 },
}

impl Objective {
    pub fn score(&self, m: &Metrics) -> f64 {
        match *self {
            Objective::MaxFidelity => m.fidelity,
            Objective::FidelityAtSuccess { target, weight } => {
                m.fidelity - weight * (m.success - target).powi(2)
            }
            Objective::SuccessAboveFidelity { floor, weight } => {
                m.success - weight * (floor - m.fidelity).max(0.0).powi(2)
            }
            Objective::FidelityInBand { lo, hi, weight } => {
                let d = (lo - m.success).max(m.success - hi).max(0.0);
                m.fidelity - weight * d * d
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Objective::MaxFidelity => "max_fidelity",
            Objective::FidelityAtSuccess { .. } => "fidelity_at_success",
            Objective::SuccessAboveFidelity { .. } => "success_above_fidelity",
            Objective::FidelityInBand { .. } => "fidelity_in_band",
        }
    }
}

/// Options shared by the optimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub definite: bool,
    pub paper_range: bool,
    /// Solve the feedback angles exactly instead of searching them.
    pub solve_feedback: bool,
    pub simplex: SimplexOptions,
    /// Number of lattice seeds polished by the simplex.
    pub seeds: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            definite: false,
            paper_range: false,
            solve_feedback: true,
            simplex: SimplexOptions::default(),
            seeds: 4,
        }
    }
}

/// A located optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub params: ControlParams,
    pub fidelity: f64,
    pub success: f64,
    pub objective: Objective,
    pub score: f64,
    pub family: Family,
}

impl Optimum {
    /// Re-runs the full pipeline at the stored parameters.
    pub fn reevaluate(&self, e: &Ensemble, r: NoiseStrength) -> Result<ProtectionResult> {
        Ok(self.family.evaluate(e, &self.params, r)?.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coord {
    Alpha,
    P,
    P1,
    P2,
    GammaPlus,
    GammaMinus,
}

fn free_coords(family: &Family, opts: &SearchOptions) -> Vec<(Coord, Bound)> {
    let turn = Bound::Periodic(-PI, 2.0 * PI);
    let mut v = Vec::new();
    if family.basis_free() {
        v.push((Coord::Alpha, turn));
    }
    let p_hi = if opts.paper_range { 0.5 } else { 1.0 };
    v.push((Coord::P, Bound::Interval(0.0, p_hi)));
    if !opts.definite {
        v.push((Coord::P1, Bound::Interval(0.0, 1.0)));
        v.push((Coord::P2, Bound::Interval(0.0, 1.0)));
    }
    if !opts.solve_feedback {
        match family.feedback {
            FeedbackPin::Free => {
                v.push((Coord::GammaPlus, turn));
                v.push((Coord::GammaMinus, turn));
            }
            FeedbackPin::Tied | FeedbackPin::Mirrored => v.push((Coord::GammaPlus, turn)),
            FeedbackPin::Zero => {}
        }
    }
    v
}

fn get(c: &ControlParams, k: Coord) -> f64 {
    match k {
        Coord::Alpha => c.alpha,
        Coord::P => c.p,
        Coord::P1 => c.p1,
        Coord::P2 => c.p2,
        Coord::GammaPlus => c.gamma_plus,
        Coord::GammaMinus => c.gamma_minus,
    }
}

fn set(c: &mut ControlParams, k: Coord, v: f64) {
    match k {
        Coord::Alpha => c.alpha = v,
        Coord::P => c.p = v,
        Coord::P1 => c.p1 = v,
        Coord::P2 => c.p2 = v,
        Coord::GammaPlus => c.gamma_plus = v,
        Coord::GammaMinus => c.gamma_minus = v,
    }
}

/// Polishes `seed` with the simplex. The result never scores below the seed.
pub fn refine(
    e: &Ensemble,
    r: NoiseStrength,
    family: &Family,
    seed: &ControlParams,
    objective: Objective,
    opts: &SearchOptions,
) -> Result<Optimum> {
    let mut base = family.pin(e, seed);
    if opts.definite {
        base.p1 = 0.0;
        base.p2 = 0.0;
    }
    let coords = free_coords(family, opts);
    let bounds: Vec<Bound> = coords.iter().map(|(_, b)| *b).collect();
    let x0: Vec<f64> = coords.iter().map(|(k, _)| get(&base, *k)).collect();
    let solve = opts.solve_feedback;
    let build = |x: &[f64]| {
        let mut c = base;
        for ((k, _), v) in coords.iter().zip(x) {
            set(&mut c, *k, *v);
        }
        c
    };
    let cost = |x: &[f64]| match evaluate_point(e, &build(x), r, family, solve) {
        Ok((_, m)) => -objective.score(&m),
        Err(_) => f64::INFINITY,
    };
    let seed_eval = evaluate_point(e, &base, r, family, solve);
    let min = simplex::minimize(cost, &x0, &bounds, &opts.simplex);
    let (params, m) = match evaluate_point(e, &build(&min.x), r, family, solve) {
        Ok(v) => v,
        Err(_) => seed_eval?,
    };
    let params = params.wrapped();
    // report metrics from the full pipeline
    let res = family.evaluate(e, &params, r)?.1;
    let m_full = Metrics::from(&res);
    debug_assert!((m_full.fidelity - m.fidelity).abs() < 1e-9);
    Ok(Optimum {
        params,
        fidelity: m_full.fidelity,
        success: m_full.success,
        objective,
        score: objective.score(&m_full),
        family: *family,
    })
}

fn pick_better(a: Optimum, b: Optimum) -> Optimum {
    if b.score > a.score {
        b
    } else {
        a
    }
}

/// Best fidelity with `p1 = p2 = 0` (unit success probability).
pub fn definite_optimum(
    e: &Ensemble,
    r: NoiseStrength,
    family: &Family,
    grid: &GridSpec,
    opts: &SearchOptions,
) -> Result<Optimum> {
    let grid = GridSpec {
        definite: true,
        solve_feedback: opts.solve_feedback,
        paper_range: opts.paper_range || grid.paper_range,
        ..*grid
    };
    let opts = SearchOptions {
        definite: true,
        ..*opts
    };
    let lat = grid.lattice(e, family)?;
    // best point per α row (or per p value when α is pinned) gives distinct seeds
    let seed_axis = if lat.axes[0].len() > 1 { 0 } else { 1 };
    let nb = lat.axes[seed_axis].len();
    let maxima = bin_maxima(e, r, &lat, nb, |i, _| Some(lat.coordinate(i, seed_axis)));
    let mut seeds: Vec<(u64, ControlParams, Metrics)> = maxima.into_iter().flatten().collect();
    seeds.sort_by(|a, b| b.2.fidelity.total_cmp(&a.2.fidelity).then(a.0.cmp(&b.0)));
    seeds.truncate(opts.seeds.max(1));

    let mut best: Option<Optimum> = None;
    for (_, c, _) in &seeds {
        let o = refine(e, r, family, c, Objective::MaxFidelity, &opts)?;
        best = Some(match best {
            None => o,
            Some(b) => pick_better(b, o),
        });
    }
    for sub in family.nested() {
        let o = definite_optimum(e, r, &sub, &grid, &opts)?;
        let o = refine(e, r, family, &o.params, Objective::MaxFidelity, &opts)?;
        best = Some(match best {
            None => o,
            Some(b) => pick_better(b, o),
        });
    }
    best.ok_or_else(|| Error::Config("empty definite lattice".into()))
}

/// Best point of one success-probability bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub bin: usize,
    /// Bin centre.
    pub g_target: f64,
    pub fidelity: f64,
    pub success: f64,
    pub params: ControlParams,
}

/// Upper fidelity envelope over equal-width success-probability bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub bins: usize,
    pub family: Family,
    /// Non-dominated points, ordered by bin.
    pub points: Vec<FrontierPoint>,
    /// Bins with no lattice point.
    pub gaps: Vec<usize>,
    /// Bins whose best point was dominated by a higher-success bin.
    pub dominated: Vec<usize>,
}

impl Frontier {
    pub fn half_width(&self) -> f64 {
        0.5 / self.bins as f64
    }

    pub fn bin_edges(&self, bin: usize) -> (f64, f64) {
        bin_edges(self.bins, bin)
    }

    pub fn at_bin(&self, bin: usize) -> Option<&FrontierPoint> {
        self.points.iter().find(|p| p.bin == bin)
    }

    /// Best frontier fidelity among points with success at least `g`.
    pub fn best_at_or_above(&self, g: f64) -> Option<f64> {
        self.points
            .iter()
            .filter(|p| p.success >= g)
            .map(|p| p.fidelity)
            .fold(None, |acc, f| Some(acc.map_or(f, |a: f64| a.max(f))))
    }
}

fn bin_edges(bins: usize, bin: usize) -> (f64, f64) {
    (bin as f64 / bins as f64, (bin + 1) as f64 / bins as f64)
}

/// Bin of success probability `g` over `(0, 1]`.
pub fn bin_of(bins: usize, g: f64) -> Option<usize> {
    if g.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return None;
    }
    let k = (g * bins as f64).ceil() as isize - 1;
    Some(k.clamp(0, bins as isize - 1) as usize)
}

/// Fidelity/success-probability frontier.
pub fn pareto(
    e: &Ensemble,
    r: NoiseStrength,
    bins: usize,
    grid: &GridSpec,
    family: &Family,
    opts: &SearchOptions,
) -> Result<Frontier> {
    if bins < 2 {
        return Err(Error::Config("pareto needs at least 2 bins".into()));
    }
    let grid = GridSpec {
        definite: false,
        solve_feedback: opts.solve_feedback,
        paper_range: opts.paper_range || grid.paper_range,
        ..*grid
    };
    let opts = SearchOptions {
        definite: false,
        paper_range: grid.paper_range,
        ..*opts
    };
    let lat = grid.lattice(e, family)?;
    let maxima = bin_maxima(e, r, &lat, bins, |_, m| bin_of(bins, m.success));

    let mut points = Vec::new();
    let mut gaps = Vec::new();
    for (bin, cell) in maxima.into_iter().enumerate() {
        let Some((_, c, m)) = cell else {
            gaps.push(bin);
            continue;
        };
        let (lo, hi) = bin_edges(bins, bin);
        let obj = Objective::FidelityInBand {
            lo,
            hi,
            weight: 1e6,
        };
        let mut best = FrontierPoint {
            bin,
            g_target: 0.5 * (lo + hi),
            fidelity: m.fidelity,
            success: m.success,
            params: c,
        };
        // keep the polished point only if it stayed in the bin
        if let Ok(o) = refine(e, r, family, &c, obj, &opts) {
            if bin_of(bins, o.success) == Some(bin) && o.fidelity > best.fidelity {
                best.fidelity = o.fidelity;
                best.success = o.success;
                best.params = o.params;
            }
        }
        // re-evaluate the seed on the full pipeline so stored values are exact
        if best.params == c {
            let res = family.evaluate(e, &c, r)?.1;
            best.fidelity = res.fidelity;
            best.success = res.success;
        }
        points.push(best);
    }

    // upper envelope: walk from high success down, keep strict fidelity records
    let mut kept = Vec::new();
    let mut dominated = Vec::new();
    let mut record = f64::NEG_INFINITY;
    for p in points.into_iter().rev() {
        if p.fidelity > record {
            record = p.fidelity;
            kept.push(p);
        } else {
            dominated.push(p.bin);
        }
    }
    kept.reverse();
    dominated.reverse();
    Ok(Frontier {
        bins,
        family: *family,
        points: kept,
        gaps,
        dominated,
    })
}

/// Helstrom basis angle and whether the ensemble was degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HelstromBasis {
    pub alpha: f64,
    pub degenerate: bool,
}

/// Basis angle whose `|V+⟩` is the positive eigenvector of
/// `s+|ψ+⟩⟨ψ+| − s−|ψ−⟩⟨ψ−|`.
pub fn helstrom_angle(e: &Ensemble) -> HelstromBasis {
    let lam = outer(&e.state(Sign::Plus)).scale(e.s_plus).as_operator()
        - outer(&e.state(Sign::Minus)).scale(e.s_minus()).as_operator();
    let a = lam.m00.re;
    let d = lam.m11.re;
    let b = lam.m01;
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    if rad < 1e-14 {
        return HelstromBasis {
            alpha: 0.0,
            degenerate: true,
        };
    }
    let top = mean + rad;
    // (Λ − top) v = 0; pick the better conditioned row
    let v = if (a - top).abs() + b.norm() >= (d - top).abs() + b.norm() && b.norm() > 1e-300 {
        PureState::new(b, Complex::from(top - a))
    } else if b.norm() > 1e-300 {
        PureState::new(Complex::from(top - d), b.conj())
    } else if a >= d {
        PureState::ket0()
    } else {
        PureState::ket1()
    };
    let v = v.normalized().unwrap_or(PureState::ket0());
    // coordinates in the |±⟩ basis with the ensemble phase removed
    let (cp, cm) = v.pm_components();
    let phase = if cp.norm() > 1e-12 {
        cp.conj() / cp.norm()
    } else {
        cm.conj() / cm.norm() * Complex::from_polar(1.0, e.phi)
    };
    let x = (cp * phase).re;
    let y = (cm * phase * Complex::from_polar(1.0, -e.phi)).re;
    let beta = y.atan2(x);
    HelstromBasis {
        alpha: wrap_angle(2.0 * beta - 0.5 * PI),
        degenerate: false,
    }
}

/// Probability of identifying the state correctly when measuring in the
/// basis `alpha` and guessing `ψ+` on `V+`.
pub fn discrimination_probability(e: &Ensemble, alpha: f64) -> f64 {
    let (vp, vm) = build_basis(alpha, e.phi);
    e.s_plus * vp.inner(&e.state(Sign::Plus)).norm_sqr()
        + e.s_minus() * vm.inner(&e.state(Sign::Minus)).norm_sqr()
}

/// `F_opt(family) − F_opt(baseline)` at unit success probability.
pub fn improvement_definite(
    e: &Ensemble,
    r: NoiseStrength,
    family: &Family,
    baseline: &Family,
    grid: &GridSpec,
    opts: &SearchOptions,
) -> Result<f64> {
    let a = definite_optimum(e, r, family, grid, opts)?;
    let b = definite_optimum(e, r, baseline, grid, opts)?;
    Ok(a.fidelity - b.fidelity)
}

/// Frontier difference in the bin containing `g_target`; `None` when either
/// frontier has no point there.
pub fn improvement_from_frontiers(a: &Frontier, b: &Frontier, g_target: f64) -> Option<f64> {
    let bin = bin_of(a.bins, g_target)?;
    Some(a.at_bin(bin)?.fidelity - b.at_bin(bin)?.fidelity)
}

/// Improvement `Δ = F_best(family) − F_best(baseline)` at success `g_target`.
/// At `g_target = 1` both sides are definite optima; otherwise both come from
/// [`pareto`] with the default bin count.
pub fn improvement(
    e: &Ensemble,
    r: NoiseStrength,
    g_target: f64,
    family: &Family,
    baseline: &Family,
    grid: &GridSpec,
    opts: &SearchOptions,
) -> Result<Option<f64>> {
    if !(g_target > 0.0 && g_target <= 1.0) {
        return Err(Error::out_of_range("g_target", g_target, "(0, 1]"));
    }
    if g_target >= 1.0 - 1e-12 {
        return improvement_definite(e, r, family, baseline, grid, opts).map(Some);
    }
    let a = pareto(e, r, DEFAULT_BINS, grid, family, opts)?;
    let b = pareto(e, r, DEFAULT_BINS, grid, baseline, opts)?;
    Ok(improvement_from_frontiers(&a, &b, g_target))
}

pub const DEFAULT_BINS: usize = 100;

/// Ensemble/noise coordinate a heatmap can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeatAxis {
    SPlus,
    Theta,
    Phi,
    R,
}

impl HeatAxis {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "s-plus" | "s_plus" => Some(HeatAxis::SPlus),
            "theta" => Some(HeatAxis::Theta),
            "phi" => Some(HeatAxis::Phi),
            "r" => Some(HeatAxis::R),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            HeatAxis::SPlus => "s_plus",
            HeatAxis::Theta => "theta",
            HeatAxis::Phi => "phi",
            HeatAxis::R => "r",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeatQuantity {
    /// Definite improvement of the family over the baseline.
    Delta,
    /// Definite optimum fidelity of the family.
    FOpt,
    /// Basis angle at the family's definite optimum.
    AlphaOpt,
}

impl HeatQuantity {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "delta" => Some(HeatQuantity::Delta),
            "f-opt" | "f_opt" => Some(HeatQuantity::FOpt),
            "alpha-opt" | "alpha_opt" => Some(HeatQuantity::AlphaOpt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub axis1: (HeatAxis, Vec<f64>),
    pub axis2: (HeatAxis, Vec<f64>),
    pub quantity: HeatQuantity,
    /// `values[i][j]` at `axis1[i]`, `axis2[j]`; `NaN` marks a failed cell.
    pub values: Vec<Vec<f64>>,
}

impl Heatmap {
    /// Largest finite cell as `(value, i, j)`, first in row-major order on ties.
    pub fn argmax(&self) -> Option<(f64, usize, usize)> {
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, row) in self.values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v.is_finite() && best.is_none_or(|b| v > b.0) {
                    best = Some((v, i, j));
                }
            }
        }
        best
    }
}

/// Setting shared by every heatmap cell; the two axes override fields of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatBase {
    pub theta: f64,
    pub phi: f64,
    pub s_plus: f64,
    pub r: f64,
}

impl HeatBase {
    fn with(&self, axis: HeatAxis, v: f64) -> Self {
        let mut b = *self;
        match axis {
            HeatAxis::SPlus => b.s_plus = v,
            HeatAxis::Theta => b.theta = v,
            HeatAxis::Phi => b.phi = v,
            HeatAxis::R => b.r = v,
        }
        b
    }
}

/// Definite-protection quantity over a 2-D grid of ensembles/noise levels.
#[allow(clippy::too_many_arguments)]
pub fn heatmap(
    base: &HeatBase,
    axis1: (HeatAxis, Vec<f64>),
    axis2: (HeatAxis, Vec<f64>),
    quantity: HeatQuantity,
    family: &Family,
    baseline: &Family,
    grid: &GridSpec,
    opts: &SearchOptions,
) -> Result<Heatmap> {
    let cells: Vec<(usize, usize)> = (0..axis1.1.len())
        .flat_map(|i| (0..axis2.1.len()).map(move |j| (i, j)))
        .collect();
    let vals: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| {
            let b = base.with(axis1.0, axis1.1[i]).with(axis2.0, axis2.1[j]);
            let cell = || -> Result<f64> {
                let e = Ensemble::new(b.theta, b.phi, b.s_plus)?;
                let r = NoiseStrength::new(b.r)?;
                match quantity {
                    HeatQuantity::Delta => improvement_definite(&e, r, family, baseline, grid, opts),
                    HeatQuantity::FOpt => Ok(definite_optimum(&e, r, family, grid, opts)?.fidelity),
                    HeatQuantity::AlphaOpt => {
                        Ok(definite_optimum(&e, r, family, grid, opts)?.params.alpha)
                    }
                }
            };
            cell().unwrap_or(f64::NAN)
        })
        .collect();
    let n2 = axis2.1.len();
    let values = vals.chunks(n2.max(1)).map(|c| c.to_vec()).collect();
    Ok(Heatmap {
        axis1,
        axis2,
        quantity,
        values,
    })
}
