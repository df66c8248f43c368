//! Analytic results for equal priors and definite protection, and the harness
//! that checks them against the simulator.
//!
//! The formulas are kept exactly as published, including their own angle
//! parameter `alpha_cf`, whose relation to the simulator's basis angle is not
//! fixed a priori. [`validate_closed_forms`] tries several reparameterizations
//! and reports residuals; the simulator is treated as ground truth.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::wrap_angle;
use crate::scheme::{protect, ControlParams, Ensemble, NoiseStrength};
use crate::search::{definite_optimum, BaselineKind, GridSpec, SearchOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormInput {
    pub r: NoiseStrength,
    pub alpha_cf: f64,
    pub p: f64,
    pub gamma: f64,
}

/// `(K sin α, L)` with `F = sin γ · K sin α + cos γ · L + 1/2`.
fn sin_cos_coefficients(r: f64, alpha: f64, p: f64) -> (f64, f64) {
    let (s, c) = alpha.sin_cos();
    let k = (p + r - p * r - 0.5) * s;
    let l = s * s * ((p * (1.0 - p) * (1.0 - r)).max(0.0).sqrt() - 0.5) - c * c * (1.0 - p) * r + 0.5;
    (k, l)
}

/// Reduced equal-prior fidelity, as transcribed. Not clamped.
pub fn reduced_fidelity(x: &ClosedFormInput) -> f64 {
    let (k, l) = sin_cos_coefficients(x.r.value(), x.alpha_cf, x.p);
    x.gamma.sin() * k + x.gamma.cos() * l + 0.5
}

/// Optimal rotation angle: the arctangent of the published ratio, on whichever
/// of its two branches gives the larger [`reduced_fidelity`].
pub fn optimal_gamma(r: NoiseStrength, alpha_cf: f64, p: f64) -> f64 {
    let (k, l) = sin_cos_coefficients(r.value(), alpha_cf, p);
    if k == 0.0 && l == 0.0 {
        return 0.0;
    }
    let t = if l == 0.0 { PI / 2.0 } else { (k / l).atan() };
    let f = |g: f64| g.sin() * k + g.cos() * l;
    let g = if f(t + PI) > f(t) { t + PI } else { t };
    wrap_angle(g)
}

/// `√(K² sin²α + L²) + 1/2`.
pub fn fidelity_at_optimal_gamma(r: NoiseStrength, alpha_cf: f64, p: f64) -> f64 {
    let (k, l) = sin_cos_coefficients(r.value(), alpha_cf, p);
    k.hypot(l) + 0.5
}

/// Intermediate quantities of the quartic condition for the optimal `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarticData {
    pub x: [f64; 5],
    pub y: [f64; 5],
    /// `[c4, c3, c2, c1, c0]`.
    pub coefficients: [f64; 5],
    pub real_roots_in_unit_interval: Vec<f64>,
}

impl QuarticData {
    pub fn new(r: NoiseStrength, alpha_cf: f64) -> Self {
        let r = r.value();
        let (s, c) = alpha_cf.sin_cos();
        let x1 = (1.0 - r) * s;
        let x2 = (r - 0.5) * s;
        let x3 = (1.0 - r).sqrt() * s * s;
        let x4 = r * c * c;
        let x5 = (0.5 - r) * c * c;
        let y1 = x1 * x1 - x3 * x3 + x4 * x4;
        let y2 = x1 * x2 + x4 * x5 + x3 * x3 / 2.0;
        let y3 = 2.0 * x3 * x4;
        let y4 = x3 * x5 - 3.0 * x3 * x4 / 2.0;
        let y5 = -x3 * x5 / 2.0;
        let coefficients = [
            y1 * y1 + y3 * y3,
            2.0 * y3 * y4 + 2.0 * y1 * y2 - y1 * y1,
            y4 * y4 + 2.0 * y3 * y5 - 2.0 * y1 * y2 + y2 * y2,
            2.0 * y4 * y5 - y2 * y2,
            y5 * y5,
        ];
        Self {
            x: [x1, x2, x3, x4, x5],
            y: [y1, y2, y3, y4, y5],
            coefficients,
            real_roots_in_unit_interval: Vec::new(),
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.coefficients.iter().fold(0.0, |acc, c| acc * z + c)
    }

    fn derivative(&self, z: f64) -> f64 {
        let c = &self.coefficients;
        (((4.0 * c[0]) * z + 3.0 * c[1]) * z + 2.0 * c[2]) * z + c[3]
    }

    pub fn residual_tolerance(&self) -> f64 {
        1e-9 * self.coefficients[0].abs().max(1.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|&c| c == 0.0)
    }
}

/// Real roots of `c[0] z^n + … + c[n]` from the eigenvalues of the companion
/// matrix, after dropping negligible leading coefficients.
pub fn real_polynomial_roots(c: &[f64]) -> Vec<f64> {
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let lead = c.iter().position(|v| v.abs() > 1e-14 * scale).unwrap_or(c.len());
    let c = &c[lead..];
    let n = c.len().saturating_sub(1);
    if n == 0 {
        return Vec::new();
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        m[(0, j)] = -c[j + 1] / c[0];
    }
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    m.complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-7 * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .collect()
}

fn polish(q: &QuarticData, mut z: f64) -> f64 {
    for _ in 0..50 {
        let d = q.derivative(z);
        if d == 0.0 {
            break;
        }
        let step = q.eval(z) / d;
        let next = z - step;
        if !next.is_finite() || q.eval(next).abs() > q.eval(z).abs() {
            break;
        }
        z = next;
        if step.abs() < 1e-15 * (1.0 + z.abs()) {
            break;
        }
    }
    z
}

/// Where [`optimal_p`]'s answer came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PSource {
    QuarticRoot,
    Endpoint,
    /// The quartic vanished identically; the value is a grid argmax.
    GridFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalP {
    pub p: f64,
    pub fidelity: f64,
    pub source: PSource,
    pub quartic: QuarticData,
}

/// Step of the grid used when the quartic carries no information.
pub const FALLBACK_STEP: f64 = 1e-6;

/// Best of the quartic's real roots in `(0, 1]` and the endpoints `0`, `1`,
/// judged by [`fidelity_at_optimal_gamma`].
pub fn optimal_p(r: NoiseStrength, alpha_cf: f64) -> OptimalP {
    let mut q = QuarticData::new(r, alpha_cf);
    let f = |p: f64| fidelity_at_optimal_gamma(r, alpha_cf, p);
    if q.is_zero() {
        let p = grid_optimal_p(r, alpha_cf, FALLBACK_STEP);
        return OptimalP {
            p,
            fidelity: f(p),
            source: PSource::GridFallback,
            quartic: q,
        };
    }
    let tol = q.residual_tolerance();
    let mut roots: Vec<f64> = real_polynomial_roots(&q.coefficients)
        .into_iter()
        .map(|z| polish(&q, z))
        .filter(|&z| z > 0.0 && z <= 1.0 && q.eval(z).abs() < tol)
        .collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    q.real_roots_in_unit_interval = roots.clone();

    let mut best = (0.0, f(0.0), PSource::Endpoint);
    for (p, src) in roots
        .iter()
        .map(|&z| (z, PSource::QuarticRoot))
        .chain([(1.0, PSource::Endpoint)])
    {
        let v = f(p);
        if v > best.1 {
            best = (p, v, src);
        }
    }
    OptimalP {
        p: best.0,
        fidelity: best.1,
        source: best.2,
        quartic: q,
    }
}

/// Grid argmax of [`fidelity_at_optimal_gamma`] over `p ∈ [0, 1]`, lowest `p`
/// on ties.
pub fn grid_optimal_p(r: NoiseStrength, alpha_cf: f64, step: f64) -> f64 {
    let n = (1.0 / step).round() as usize;
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..=n {
        let p = (k as f64 * step).min(1.0);
        let v = fidelity_at_optimal_gamma(r, alpha_cf, p);
        if v > best.1 {
            best = (p, v);
        }
    }
    best.0
}

/// Candidate relations between the closed-form angle and the basis angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AngleMap {
    /// `α_cf = α`
    Same,
    /// `α_cf = α + π/2 − θ`
    QuarterTurnMinusTheta,
    /// `α_cf = −θ − α`
    NegThetaMinus,
    /// `α_cf = α + 2θ`
    PlusTwoTheta,
}

impl AngleMap {
    pub const ALL: [AngleMap; 4] = [
        AngleMap::Same,
        AngleMap::QuarterTurnMinusTheta,
        AngleMap::NegThetaMinus,
        AngleMap::PlusTwoTheta,
    ];

    pub fn apply(self, alpha: f64, theta: f64) -> f64 {
        match self {
            AngleMap::Same => alpha,
            AngleMap::QuarterTurnMinusTheta => alpha + PI / 2.0 - theta,
            AngleMap::NegThetaMinus => -theta - alpha,
            AngleMap::PlusTwoTheta => alpha + 2.0 * theta,
        }
    }

    /// Basis angle `α` with `apply(α, θ) = alpha_cf`.
    pub fn invert(self, alpha_cf: f64, theta: f64) -> f64 {
        match self {
            AngleMap::Same => alpha_cf,
            AngleMap::QuarterTurnMinusTheta => alpha_cf - PI / 2.0 + theta,
            AngleMap::NegThetaMinus => -theta - alpha_cf,
            AngleMap::PlusTwoTheta => alpha_cf - 2.0 * theta,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AngleMap::Same => "alpha",
            AngleMap::QuarterTurnMinusTheta => "alpha+pi/2-theta",
            AngleMap::NegThetaMinus => "-theta-alpha",
            AngleMap::PlusTwoTheta => "alpha+2theta",
        }
    }
}

/// How the single closed-form `γ` is fed to the two feedback rotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GammaMap {
    /// `γ+ = γ− = γ`
    Tied,
    /// `γ+ = γ`, `γ− = −γ`
    Mirrored,
}

impl GammaMap {
    pub const ALL: [GammaMap; 2] = [GammaMap::Tied, GammaMap::Mirrored];

    fn params(self, alpha: f64, p: f64, gamma: f64) -> ControlParams {
        ControlParams {
            alpha,
            p,
            p1: 0.0,
            p2: 0.0,
            gamma_plus: gamma,
            gamma_minus: match self {
                GammaMap::Tied => gamma,
                GammaMap::Mirrored => -gamma,
            },
        }
        .wrapped()
    }

    pub fn label(self) -> &'static str {
        match self {
            GammaMap::Tied => "tied",
            GammaMap::Mirrored => "mirrored",
        }
    }
}

/// One line of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub formula: String,
    pub params: BTreeMap<String, f64>,
    pub closed_form: f64,
    pub oracle: f64,
    pub gap: f64,
}

impl Discrepancy {
    pub fn new(formula: &str, params: &[(&str, f64)], closed_form: f64, oracle: f64) -> Self {
        Self {
            formula: formula.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            closed_form,
            oracle,
            gap: (closed_form - oracle).abs(),
        }
    }
}

/// Residual statistics of one candidate reparameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFit {
    pub angle_map: AngleMap,
    pub gamma_map: GammaMap,
    pub points: usize,
    pub rms: f64,
    pub max_gap: f64,
}

impl MapFit {
    pub fn label(&self) -> String {
        format!("{}|{}", self.angle_map.label(), self.gamma_map.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub theta: f64,
    pub r: f64,
    /// Sorted by RMS residual, best first.
    pub fits: Vec<MapFit>,
    pub entries: Vec<Discrepancy>,
}

impl DiscrepancyReport {
    pub fn best_fit(&self) -> Option<&MapFit> {
        self.fits.first()
    }

    /// Per-map summaries first (as `reduced_fidelity_rms` lines), then every
    /// entry; one JSON object per line.
    pub fn write_json_lines<W: Write>(&self, mut w: W) -> Result<()> {
        for fit in &self.fits {
            let mut params = BTreeMap::new();
            params.insert("theta".to_string(), self.theta);
            params.insert("r".to_string(), self.r);
            params.insert("points".to_string(), fit.points as f64);
            params.insert("max_gap".to_string(), fit.max_gap);
            let line = Discrepancy {
                formula: format!("reduced_fidelity_rms[{}]", fit.label()),
                params,
                closed_form: fit.rms,
                oracle: 0.0,
                gap: fit.rms,
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        for d in &self.entries {
            serde_json::to_writer(&mut w, d)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_json_lines(&self) -> String {
        let mut buf = Vec::new();
        self.write_json_lines(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

/// Lattice and tolerances for [`validate_closed_forms`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    pub alpha_points: usize,
    pub p_points: usize,
    pub gamma_points: usize,
    /// Residuals above this are itemized for the best-fitting map.
    pub tolerance: f64,
    /// Basis angles at which `optimal_p` is compared with a grid.
    pub optimal_p_points: usize,
    pub optimal_p_step: f64,
    /// Also compare the closed-form optimum with the simulator's definite optimum.
    pub compare_optimum: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            alpha_points: 24,
            p_points: 11,
            gamma_points: 24,
            tolerance: 1e-8,
            optimal_p_points: 24,
            optimal_p_step: 1e-6,
            compare_optimum: true,
        }
    }
}

fn uniform(lo: f64, hi: f64, n: usize, closed: bool) -> Vec<f64> {
    let d = if closed { (n.max(2) - 1) as f64 } else { n as f64 };
    (0..n).map(|k| lo + (hi - lo) * k as f64 / d).collect()
}

/// Compares the transcribed formulas with the simulator for an equal-prior
/// ensemble and noise `r`.
pub fn validate_closed_forms(
    e: &Ensemble,
    r: NoiseStrength,
    opts: &ValidationOptions,
) -> Result<DiscrepancyReport> {
    if (e.s_plus - 0.5).abs() > 1e-12 {
        return Err(Error::out_of_range("s_plus", e.s_plus, "{1/2}"));
    }
    let theta = e.theta;
    let alphas = uniform(-PI, PI, opts.alpha_points, false);
    let ps = uniform(0.0, 1.0, opts.p_points, true);
    let gammas = uniform(-PI, PI, opts.gamma_points, false);
    let mut points = Vec::with_capacity(alphas.len() * ps.len() * gammas.len());
    for &a in &alphas {
        for &p in &ps {
            for &g in &gammas {
                points.push((a, p, g));
            }
        }
    }

    let mut entries = Vec::new();
    let mut fits = Vec::new();
    let mut per_map = Vec::new();
    for gm in GammaMap::ALL {
        // simulator values at every lattice point, in lattice order
        let sim: Vec<Option<f64>> = points
            .par_iter()
            .map(|&(a, p, g)| protect(e, &gm.params(a, p, g), r).ok().map(|o| o.fidelity))
            .collect();
        for am in AngleMap::ALL {
            let mut sq = 0.0;
            let mut max_gap = 0.0f64;
            let mut n = 0;
            let mut rows = Vec::new();
            for (&(a, p, g), s) in points.iter().zip(&sim) {
                let Some(s) = *s else { continue };
                let alpha_cf = am.apply(a, theta);
                let cf = reduced_fidelity(&ClosedFormInput {
                    r,
                    alpha_cf,
                    p,
                    gamma: g,
                });
                let d = Discrepancy::new(
                    "reduced_fidelity",
                    &[
                        ("theta", theta),
                        ("r", r.value()),
                        ("alpha", a),
                        ("alpha_cf", alpha_cf),
                        ("p", p),
                        ("gamma", g),
                    ],
                    cf,
                    s,
                );
                sq += d.gap * d.gap;
                max_gap = max_gap.max(d.gap);
                n += 1;
                rows.push(d);
            }
            let rms = if n > 0 { (sq / n as f64).sqrt() } else { f64::NAN };
            fits.push(MapFit {
                angle_map: am,
                gamma_map: gm,
                points: n,
                rms,
                max_gap,
            });
            per_map.push(rows);
        }
    }
    let mut order: Vec<usize> = (0..fits.len()).collect();
    order.sort_by(|&i, &j| fits[i].rms.total_cmp(&fits[j].rms).then(i.cmp(&j)));
    let best = order[0];
    for d in &per_map[best] {
        let out_of_range = !(0.0..=1.0).contains(&d.closed_form);
        if d.gap > opts.tolerance || out_of_range {
            let mut d = d.clone();
            if out_of_range {
                d.formula = "reduced_fidelity_out_of_range".into();
            }
            entries.push(d);
        }
    }
    let best_fit = fits[best].clone();
    let fits: Vec<MapFit> = order.iter().map(|&i| fits[i].clone()).collect();

    // the transcription reaches 1 at r = 1 where no measurement information survives
    if r.value() == 1.0 {
        let alpha = best_fit.angle_map.invert(PI / 2.0, theta);
        let c = best_fit.gamma_map.params(alpha, 0.5, PI / 2.0);
        let cf = reduced_fidelity(&ClosedFormInput {
            r,
            alpha_cf: PI / 2.0,
            p: 0.5,
            gamma: PI / 2.0,
        });
        let sim = protect(e, &c, r)?.fidelity;
        entries.push(Discrepancy::new(
            "reduced_fidelity_r1_bound",
            &[
                ("theta", theta),
                ("r", 1.0),
                ("alpha", c.alpha),
                ("alpha_cf", PI / 2.0),
                ("p", 0.5),
                ("gamma", PI / 2.0),
                ("fixed_output_bound", (1.0 + theta.cos().abs()) / 2.0),
            ],
            cf,
            sim,
        ));
    }

    for alpha_cf in uniform(-PI, PI, opts.optimal_p_points, false) {
        let op = optimal_p(r, alpha_cf);
        let grid = grid_optimal_p(r, alpha_cf, opts.optimal_p_step);
        let f_grid = fidelity_at_optimal_gamma(r, alpha_cf, grid);
        if (op.p - grid).abs() > 1e-4 || op.fidelity < f_grid - 1e-6 {
            entries.push(Discrepancy::new(
                "optimal_p",
                &[
                    ("r", r.value()),
                    ("alpha_cf", alpha_cf),
                    ("fidelity_closed_form", op.fidelity),
                    ("fidelity_grid", f_grid),
                    ("roots", op.quartic.real_roots_in_unit_interval.len() as f64),
                ],
                op.p,
                grid,
            ));
        }
    }

    if opts.compare_optimum {
        let cf = (0..=720)
            .map(|k| {
                let a = -PI + k as f64 * PI / 360.0;
                optimal_p(r, a).fidelity
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let sim = definite_optimum(
            e,
            r,
            &BaselineKind::Gqcc.family(),
            &GridSpec::definite(),
            &SearchOptions::default(),
        )?
        .fidelity;
        entries.push(Discrepancy::new(
            "optimal_definite_fidelity",
            &[("theta", theta), ("r", r.value())],
            cf,
            sim,
        ));
    }

    Ok(DiscrepancyReport {
        theta,
        r: r.value(),
        fits,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nr(r: f64) -> NoiseStrength {
        NoiseStrength::new(r).unwrap()
    }

    fn rf(r: f64, alpha_cf: f64, p: f64, gamma: f64) -> f64 {
        reduced_fidelity(&ClosedFormInput {
            r: nr(r),
            alpha_cf,
            p,
            gamma,
        })
    }

    #[test]
    fn reduced_fidelity_examples() {
        assert!((rf(0.0, 0.0, 0.5, 0.0) - 1.0).abs() < 1e-15);
        assert!((rf(1.0, PI / 2.0, 0.5, PI / 2.0) - 1.0).abs() < 1e-15);
        assert!((rf(1.0, PI / 2.0, 0.0, 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn optimal_gamma_examples() {
        assert_eq!(optimal_gamma(nr(0.3), 0.0, 0.2), 0.0);
        assert!((optimal_gamma(nr(1.0), PI / 2.0, 0.5) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_at_optimal_gamma_examples() {
        for p in [0.0, 0.3, 0.9] {
            let v = fidelity_at_optimal_gamma(nr(0.4), 0.0, p);
            assert!((v - rf(0.4, 0.0, p, 0.0).max(1.0 - rf(0.4, 0.0, p, 0.0))).abs() < 1e-15);
        }
        for a in [-2.0, 0.1, 1.3] {
            assert!((fidelity_at_optimal_gamma(nr(0.0), a, 0.5) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn quartic_coefficients_follow_the_transcription() {
        let q = QuarticData::new(nr(0.37), 0.81);
        let [x1, x2, x3, x4, x5] = q.x;
        let (s, c) = 0.81f64.sin_cos();
        assert!((x1 - 0.63 * s).abs() < 1e-15);
        assert!((x2 + 0.13 * s).abs() < 1e-15);
        assert!((x3 - 0.63f64.sqrt() * s * s).abs() < 1e-15);
        assert!((x4 - 0.37 * c * c).abs() < 1e-15);
        assert!((x5 - 0.13 * c * c).abs() < 1e-15);
        let [y1, y2, y3, y4, y5] = q.y;
        assert_eq!(q.coefficients[4], y5 * y5);
        assert_eq!(q.coefficients[3], 2.0 * y4 * y5 - y2 * y2);
        assert_eq!(q.coefficients[0], y1 * y1 + y3 * y3);
    }

    #[test]
    fn polynomial_roots() {
        // (z − 0.25)(z − 0.5)(z + 2)(z² + 1)
        let c = [1.0, 1.25, -0.375, 1.5, -1.375, 0.25];
        let mut r = real_polynomial_roots(&c);
        r.sort_by(f64::total_cmp);
        assert_eq!(r.len(), 3);
        for (a, b) in r.iter().zip([-2.0, 0.25, 0.5]) {
            assert!((a - b).abs() < 1e-9, "{r:?}");
        }
        // leading zeros drop the degree
        let r = real_polynomial_roots(&[0.0, 0.0, 2.0, -1.0]);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 0.5).abs() < 1e-12);
        assert!(real_polynomial_roots(&[0.0, 0.0]).is_empty());
    }

    #[test]
    fn alpha_zero_quartic_degenerates() {
        let op = optimal_p(nr(0.6), 0.0);
        let q = &op.quartic;
        assert_eq!(q.y[2], 0.0);
        assert_eq!(q.y[3], 0.0);
        assert_eq!(q.y[4], 0.0);
        let g = grid_optimal_p(nr(0.6), 0.0, 1e-6);
        assert!(
            (fidelity_at_optimal_gamma(nr(0.6), 0.0, op.p)
                - fidelity_at_optimal_gamma(nr(0.6), 0.0, g))
            .abs()
                < 1e-9
        );
    }

    #[test]
    fn reported_roots_satisfy_the_quartic() {
        for k in 0..50 {
            let r = nr(k as f64 / 49.0);
            let a = -PI + 0.1237 * k as f64;
            let op = optimal_p(r, a);
            for &z in &op.quartic.real_roots_in_unit_interval {
                assert!(op.quartic.eval(z).abs() < op.quartic.residual_tolerance());
            }
        }
    }

    #[test]
    fn angle_maps_invert() {
        for m in AngleMap::ALL {
            let a = m.invert(m.apply(0.7, 0.3), 0.3);
            assert!((a - 0.7).abs() < 1e-15, "{m:?}");
        }
    }

    #[test]
    fn requires_equal_priors() {
        let e = Ensemble::new(0.5, 0.0, 0.3).unwrap();
        assert!(validate_closed_forms(&e, nr(0.5), &ValidationOptions::default()).is_err());
    }
}
