//! Finite differences and quadrature.

/// Central-difference gradient of `f` at `x`.
pub fn central_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian of `f` at `x`.
pub fn central_hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut probe = x.to_vec();
    let mut eval = |di: (usize, f64), dj: (usize, f64)| {
        probe.copy_from_slice(x);
        probe[di.0] += di.1;
        probe[dj.0] += dj.1;
        f(&probe)
    };
    let mut hess = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            hess[i][j] = if i == j {
                let up = eval((i, h), (i, 0.0));
                let mid = eval((i, 0.0), (i, 0.0));
                let down = eval((i, -h), (i, 0.0));
                (up - 2.0 * mid + down) / (h * h)
            } else {
                let pp = eval((i, h), (j, h));
                let pm = eval((i, h), (j, -h));
                let mp = eval((i, -h), (j, h));
                let mm = eval((i, -h), (j, -h));
                (pp - pm - mp + mm) / (4.0 * h * h)
            };
        }
    }
    hess
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 1 { n + 1 } else { n };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn std_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal upper tail by direct quadrature of the density.
pub fn normal_tail(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - normal_tail(-x);
    }
    simpson(std_pdf, x, x + 40.0, 40_000)
}

/// P(lo <= X < hi) for X ~ N(0, var); infinite endpoints allowed.
pub fn gaussian_interval(lo: f64, hi: f64, var: f64) -> f64 {
    let sd = var.sqrt();
    let tail = |z: f64| {
        if z == f64::INFINITY {
            0.0
        } else if z == f64::NEG_INFINITY {
            1.0
        } else {
            normal_tail(z / sd)
        }
    };
    (tail(lo) - tail(hi)).max(0.0)
}
