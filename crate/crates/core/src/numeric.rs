//! Quadrature, finite-difference and 1-D search helpers shared by the
//! metric and design code.

/// Finite-difference weights for the first derivative at `x0` from the
/// (distinct, arbitrary) nodes `xs` (Fornberg's recursion).
pub(crate) fn derivative_weights(x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    // c[j][k]: weight of node j for derivative k, k ∈ {0, 1}.
    let mut c = vec![[0.0f64; 2]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// First derivative of `ys` sampled at `xs`, using a seven-point stencil
/// (centred in the interior, shifted at the ends). Falls back to fewer
/// points for short inputs.
pub(crate) fn derivative(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let width = n.min(7);
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(width / 2).min(n - width);
            let nodes = &xs[start..start + width];
            let w = derivative_weights(xs[i], nodes);
            w.iter().zip(&ys[start..start + width]).map(|(w, y)| w * y).sum()
        })
        .collect()
}

/// Trapezoid weights for nonuniform nodes.
pub(crate) fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = (xs[i + 1] - xs[i]) / 2.0;
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

pub(crate) fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
        .sum()
}

/// Vertex of the parabola through three points, clamped to `[x0, x2]`.
/// Returns the middle point when the parabola does not open downward.
pub(crate) fn parabolic_max(x: [f64; 3], f: [f64; 3]) -> (f64, f64) {
    let d01 = (f[1] - f[0]) / (x[1] - x[0]);
    let d12 = (f[2] - f[1]) / (x[2] - x[1]);
    let d012 = (d12 - d01) / (x[2] - x[0]);
    if d012.is_nan() || d012 >= 0.0 {
        return (x[1], f[1]);
    }
    let xs = ((x[0] + x[1]) / 2.0 - d01 / (2.0 * d012)).clamp(x[0], x[2]);
    let fs = f[0] + d01 * (xs - x[0]) + d012 * (xs - x[0]) * (xs - x[1]);
    (xs, fs)
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
pub(crate) fn golden_max<E>(
    mut a: f64,
    mut b: f64,
    mut f: impl FnMut(f64) -> Result<f64, E>,
) -> Result<(f64, f64), E> {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

/// Bisection for a sign change of `f` on `[a, b]`.
pub(crate) fn bisect(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..300 {
        let m = a + (b - a) / 2.0;
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    a + (b - a) / 2.0
}

/// Wraps an angle into `(−π, π]`.
pub(crate) fn wrap(x: f64) -> f64 {
    use std::f64::consts::PI;
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_point_derivative_is_exact_for_sextics() {
        let xs = [0.0f64, 0.1, 0.35, 0.4, 0.9, 1.0, 1.6, 1.7, 2.0];
        let ys: Vec<f64> = xs.iter().map(|x| x.powi(6) - 2.0 * x * x + 3.0).collect();
        let d = derivative(&xs, &ys);
        for (x, d) in xs.iter().zip(&d) {
            assert!((d - (6.0 * x.powi(5) - 4.0 * x)).abs() < 1e-10, "{x}: {d}");
        }
    }

    #[test]
    fn short_inputs_degrade_gracefully() {
        assert_eq!(derivative(&[0.0, 2.0], &[1.0, 5.0]), vec![2.0, 2.0]);
        assert_eq!(derivative(&[1.0], &[3.0]), vec![0.0]);
    }

    #[test]
    fn trapezoid_rules() {
        let xs = [0.0, 0.5, 2.0];
        assert_eq!(trapezoid(&xs, &[1.0, 1.0, 1.0]), 2.0);
        assert_eq!(trapezoid_weights(&xs), vec![0.25, 1.0, 0.75]);
    }

    #[test]
    fn parabola_vertex() {
        let f = |x: f64| 2.0 - (x - 0.3).powi(2);
        let (x, y) = parabolic_max([0.0, 0.5, 1.5], [f(0.0), f(0.5), f(1.5)]);
        assert!((x - 0.3).abs() < 1e-14 && (y - 2.0).abs() < 1e-14);
        assert_eq!(parabolic_max([0.0, 1.0, 2.0], [0.0, 1.0, 2.0]), (1.0, 1.0));
    }

    #[test]
    fn searches() {
        let (x, _) = golden_max::<()>(0.0, 3.0, |x| Ok(-(x - 1.25f64).powi(2))).unwrap();
        assert!((x - 1.25).abs() < 1e-7);
        assert!((bisect(0.0, 2.0, |x| x * x - 2.0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((wrap(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-15);
        assert!((wrap(-0.5) + 0.5).abs() < 1e-16);
    }
}
