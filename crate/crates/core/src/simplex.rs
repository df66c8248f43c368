//! Derivative-free Nelder–Mead minimizer on a box.
//!
//! Bounded coordinates are folded back into the box by reflection at the
//! walls; periodic coordinates are wrapped.

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Interval(f64, f64),
    /// Periodic coordinate on `[lo, lo + period)`.
    Periodic(f64, f64),
}

impl Bound {
    pub fn fold(&self, x: f64) -> f64 {
        match *self {
            Bound::Interval(lo, hi) => {
                let w = hi - lo;
                if w <= 0.0 {
                    return lo;
                }
                let mut t = (x - lo).rem_euclid(2.0 * w);
                if t > w {
                    t = 2.0 * w - t;
                }
                (lo + t).clamp(lo, hi)
            }
            Bound::Periodic(lo, period) => {
                let v = lo + (x - lo).rem_euclid(period);
                if v >= lo + period {
                    lo
                } else {
                    v
                }
            }
        }
    }

    fn width(&self) -> f64 {
        match *self {
            Bound::Interval(lo, hi) => hi - lo,
            Bound::Periodic(_, p) => p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Initial edge length as a fraction of each coordinate's width.
    pub initial_scale: f64,
    /// Stop once the largest vertex distance from the best vertex falls below this.
    pub diameter_tol: f64,
    pub max_iter: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            initial_scale: 0.05,
            diameter_tol: 1e-10,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Minimizes `f` starting from `x0`. Non-finite objective values count as `+∞`.
/// The returned value is never above `f(x0)`.
pub fn minimize<F>(f: F, x0: &[f64], bounds: &[Bound], opts: &SimplexOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(x0.len(), bounds.len());
    let n = x0.len();
    let mut evals = 0usize;
    // periodic coordinates float freely until the end so the simplex never straddles a seam
    let fold = |x: &mut Vec<f64>| {
        for (v, b) in x.iter_mut().zip(bounds) {
            if let Bound::Interval(..) = b {
                *v = b.fold(*v);
            }
        }
    };
    let wrap = |x: Vec<f64>| -> Vec<f64> { x.iter().zip(bounds).map(|(v, b)| b.fold(*v)).collect() };
    let mut eval = |x: &[f64]| {
        evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let start = wrap(x0.to_vec());
    let f0 = eval(&start);
    if n == 0 {
        return Minimum {
            x: wrap(start),
            value: f0,
            iterations: 0,
            evaluations: evals,
        };
    }

    let mut pts: Vec<(Vec<f64>, f64)> = vec![(start.clone(), f0)];
    for (k, b) in bounds.iter().enumerate() {
        let mut x = start.clone();
        let h = opts.initial_scale * b.width();
        // step inward when the start sits on the upper wall
        x[k] += if matches!(b, Bound::Interval(_, hi) if start[k] + h > *hi) { -h } else { h };
        fold(&mut x);
        let v = eval(&x);
        pts.push((x, v));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iter = 0;
    while iter < opts.max_iter {
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = pts[0].0.clone();
        let diam = pts[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&best)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        if diam < opts.diameter_tol {
            break;
        }
        iter += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &pts[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let worst = pts[n].clone();
        let along = |t: f64| -> Vec<f64> {
            let mut y: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            fold(&mut y);
            y
        };

        let xr = along(alpha);
        let fr = eval(&xr);
        if fr < pts[0].1 {
            let xe = along(gamma);
            let fe = eval(&xe);
            pts[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < pts[n - 1].1 {
            pts[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = along(rho * alpha);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < worst.1.min(fr) {
            pts[n] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let b = pts[0].0.clone();
        for item in pts.iter_mut().skip(1) {
            let mut y: Vec<f64> = b
                .iter()
                .zip(&item.0)
                .map(|(bv, v)| bv + sigma * (v - bv))
                .collect();
            fold(&mut y);
            let v = eval(&y);
            *item = (y, v);
        }
    }
    pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = pts.swap_remove(0);
    if value <= f0 {
        Minimum {
            x: wrap(x),
            value,
            iterations: iter,
            evaluations: evals,
        }
    } else {
        Minimum {
            x: wrap(start),
            value: f0,
            iterations: iter,
            evaluations: evals,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.1).powi(2);
        let m = minimize(
            f,
            &[0.9, 0.9],
            &[Bound::Interval(-1.0, 1.0), Bound::Interval(-1.0, 1.0)],
            &SimplexOptions::default(),
        );
        assert!((m.x[0] - 0.3).abs() < 1e-6 && (m.x[1] + 0.1).abs() < 1e-6);
    }

    #[test]
    fn minimum_on_the_wall() {
        let f = |x: &[f64]| x[0] + (x[1] - 0.5).powi(2);
        let m = minimize(
            f,
            &[0.5, 0.2],
            &[Bound::Interval(0.0, 1.0), Bound::Interval(0.0, 1.0)],
            &SimplexOptions::default(),
        );
        assert!(m.x[0] < 1e-6, "{:?}", m.x);
        assert!((0.0..=1.0).contains(&m.x[0]));
    }

    #[test]
    fn periodic_coordinate_wraps() {
        let f = |x: &[f64]| -(x[0] - 3.0).cos();
        let m = minimize(
            f,
            &[-3.0],
            &[Bound::Periodic(-PI, 2.0 * PI)],
            &SimplexOptions::default(),
        );
        assert!((m.x[0] - 3.0).abs() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn never_worse_than_start() {
        // NaN everywhere except the start point
        let f = |x: &[f64]| if x[0] == 0.25 { 1.0 } else { f64::NAN };
        let m = minimize(f, &[0.25], &[Bound::Interval(0.0, 1.0)], &SimplexOptions::default());
        assert_eq!(m.x, vec![0.25]);
        assert_eq!(m.value, 1.0);
    }

    #[test]
    fn fold_reflects() {
        let b = Bound::Interval(0.0, 1.0);
        assert!((b.fold(1.2) - 0.8).abs() < 1e-15);
        assert!((b.fold(-0.3) - 0.3).abs() < 1e-15);
        assert_eq!(b.fold(0.4), 0.4);
    }
}
