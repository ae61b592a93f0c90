//! Exhaustive and first-order reference minimizers.

/// Euclidean projection onto `{p : p >= 0, sum p = total}` (sort-based).
pub fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - total) / (i + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// `Σ w_k L_k exp(-γ_k P_k / L_k)` over sensors with positive rate.
pub fn power_objective(weights: &[f64], cnr: &[f64], rates: &[f64], powers: &[f64]) -> f64 {
    (0..weights.len())
        .filter(|&k| rates[k] > 0.0)
        .map(|k| weights[k] * rates[k] * (-cnr[k] * powers[k] / rates[k]).exp())
        .sum()
}

/// Projected gradient descent with Armijo backtracking for
/// `min Σ w_k L_k exp(-γ_k P_k / L_k)` over `{P >= 0, Σ P = p_tot}`.
///
/// Sensors with zero rate or zero weight are pinned at zero power. Returns
/// the powers and the objective value.
pub fn projected_gradient_power(
    weights: &[f64],
    cnr: &[f64],
    rates: &[f64],
    p_tot: f64,
    iters: usize,
) -> (Vec<f64>, f64) {
    let k = weights.len();
    let live: Vec<usize> = (0..k).filter(|&i| rates[i] > 0.0 && weights[i] > 0.0).collect();
    let obj = |p: &[f64]| power_objective(weights, cnr, rates, p);
    let expand = |sub: &[f64]| {
        let mut full = vec![0.0; k];
        for (s, &i) in sub.iter().zip(&live) {
            full[i] = *s;
        }
        full
    };
    let mut x = vec![p_tot / live.len() as f64; live.len()];
    let mut f = obj(&expand(&x));
    let mut step = 1.0;
    for _ in 0..iters {
        let grad: Vec<f64> = live
            .iter()
            .zip(&x)
            .map(|(&i, &p)| -weights[i] * cnr[i] * (-cnr[i] * p / rates[i]).exp())
            .collect();
        let mut accepted = false;
        step *= 2.0;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            let proj = project_simplex(&trial, p_tot);
            let ft = obj(&expand(&proj));
            let decrease: f64 = x.iter().zip(&proj).zip(&grad).map(|((a, b), g)| g * (a - b)).sum();
            if ft <= f - 1e-4 * decrease.max(0.0) && ft <= f {
                let moved: f64 = x.iter().zip(&proj).map(|(a, b)| (a - b).abs()).sum();
                x = proj;
                f = ft;
                accepted = moved > 0.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (expand(&x), f)
}

/// Minimum of `f` over the grid `{L : L_k ∈ step·ℕ, Σ L_k <= budget}`.
pub fn grid_min_simplex<F: Fn(&[f64]) -> f64>(f: &F, dim: usize, budget: f64, step: f64) -> (Vec<f64>, f64) {
    let n = (budget / step + 1e-9).floor() as usize;
    let mut best = (vec![0.0; dim], f64::INFINITY);
    let mut idx = vec![0usize; dim];
    loop {
        let used: usize = idx.iter().sum();
        if used <= n {
            let point: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
            let v = f(&point);
            if v < best.1 {
                best = (point, v);
            }
        }
        // odometer increment over the box [0, n]^dim
        let mut d = 0;
        loop {
            if d == dim {
                return best;
            }
            idx[d] += 1;
            if idx[d] <= n && idx.iter().sum::<usize>() <= n {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Coarse grid search followed by successively finer local grids around the
/// incumbent, each restricted to the feasible simplex.
pub fn grid_refine_simplex<F: Fn(&[f64]) -> f64>(
    f: &F,
    dim: usize,
    budget: f64,
    coarse_step: f64,
    final_step: f64,
) -> (Vec<f64>, f64) {
    let (mut best, mut val) = grid_min_simplex(f, dim, budget, coarse_step);
    let mut step = coarse_step;
    while step > final_step {
        let radius = step;
        step /= 4.0;
        let span = (radius / step).round() as i64;
        let centre = best.clone();
        let mut offs = vec![-span; dim];
        loop {
            let point: Vec<f64> = centre
                .iter()
                .zip(&offs)
                .map(|(c, &o)| c + o as f64 * step)
                .collect();
            if point.iter().all(|&x| x >= 0.0) && point.iter().sum::<f64>() <= budget + 1e-12 {
                let v = f(&point);
                if v < val {
                    val = v;
                    best = point;
                }
            }
            let mut d = 0;
            loop {
                if d == dim {
                    break;
                }
                offs[d] += 1;
                if offs[d] <= span {
                    break;
                }
                offs[d] = -span;
                d += 1;
            }
            if d == dim {
                break;
            }
        }
    }
    (best, val)
}

/// Dense scan of a scalar function on `[lo, hi]`.
pub fn scan_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    (0..=points)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / points as f64;
            (x, f(x))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
}
