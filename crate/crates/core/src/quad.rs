//! Quadrature building blocks: 15-point Gauss-Kronrod panels with an
//! adaptive bisection driver (real and complex variants), Gauss-Legendre
//! rules by Newton iteration, and Gauss-Hermite rules by Golub-Welsch.

use num_complex::Complex64;

use crate::linalg;
use crate::{Error, Result};

/// Kronrod abscissae for the 15-point rule (positive half, descending).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_2,
    0.949_107_912_342_758_524_5,
    0.864_864_423_359_769_072_8,
    0.741_531_185_599_394_439_9,
    0.586_087_235_467_691_130_3,
    0.405_845_151_377_397_166_9,
    0.207_784_955_007_898_467_6,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_96,
    0.063_092_092_629_978_553_29,
    0.104_790_010_322_250_183_8,
    0.140_653_259_715_525_918_7,
    0.169_004_726_639_267_902_8,
    0.190_350_578_064_785_409_9,
    0.204_432_940_075_298_892_4,
    0.209_482_141_084_727_828_0,
];

/// Weights of the embedded 7-point Gauss rule, paired with the odd Kronrod
/// abscissae and the center.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_3,
    0.279_705_391_489_276_667_9,
    0.381_830_050_505_118_944_9,
    0.417_959_183_673_469_387_8,
];

/// One Kronrod panel; returns (integral, error estimate).
pub fn qk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    for k in 0..7 {
        let x = h * XGK[k];
        let fsum = f(c - x) + f(c + x);
        resk += WGK[k] * fsum;
        if k % 2 == 1 {
            resg += WG[k / 2] * fsum;
        }
    }
    (resk * h, ((resk - resg) * h).abs())
}

pub fn qk15_complex<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for k in 0..7 {
        let x = h * XGK[k];
        let fsum = f(c - x) + f(c + x);
        resk += fsum * WGK[k];
        if k % 2 == 1 {
            resg += fsum * WG[k / 2];
        }
    }
    (resk * h, ((resk - resg) * h).norm())
}

struct Panel<T> {
    a: f64,
    b: f64,
    val: T,
    err: f64,
}

/// Adaptive integration over the union of [seeds[i], seeds[i+1]].
/// Splits the worst panel until the summed error estimate drops below
/// max(tol_abs, tol_rel * |integral|).
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    seeds: &[f64],
    tol_abs: f64,
    tol_rel: f64,
    max_panels: usize,
) -> Result<f64> {
    assert!(seeds.len() >= 2, "need at least one panel");
    let mut panels: Vec<Panel<f64>> = Vec::with_capacity(seeds.len().max(64));
    for w in seeds.windows(2) {
        let (val, err) = qk15(f, w[0], w[1]);
        panels.push(Panel { a: w[0], b: w[1], val, err });
    }
    loop {
        let total: f64 = panels.iter().map(|p| p.val).sum();
        let err: f64 = panels.iter().map(|p| p.err).sum();
        if err <= tol_abs.max(tol_rel * total.abs()) {
            return Ok(total);
        }
        if panels.len() >= max_panels {
            return Err(Error::NoConvergence {
                what: "adaptive quadrature",
                detail: format!("error {err:.3e} with {} panels", panels.len()),
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.err.partial_cmp(&b.1.err).expect("finite errors"))
            .map(|(i, _)| i)
            .expect("non-empty panel list");
        let Panel { a, b, .. } = panels.swap_remove(worst);
        let mid = 0.5 * (a + b);
        let (v1, e1) = qk15(f, a, mid);
        let (v2, e2) = qk15(f, mid, b);
        panels.push(Panel { a, b: mid, val: v1, err: e1 });
        panels.push(Panel { a: mid, b, val: v2, err: e2 });
    }
}

pub fn adaptive_complex<F: Fn(f64) -> Complex64>(
    f: &F,
    seeds: &[f64],
    tol_abs: f64,
    tol_rel: f64,
    max_panels: usize,
) -> Result<Complex64> {
    assert!(seeds.len() >= 2, "need at least one panel");
    let mut panels: Vec<Panel<Complex64>> = Vec::with_capacity(seeds.len().max(64));
    for w in seeds.windows(2) {
        let (val, err) = qk15_complex(f, w[0], w[1]);
        panels.push(Panel { a: w[0], b: w[1], val, err });
    }
    loop {
        let total: Complex64 = panels.iter().map(|p| p.val).sum();
        let err: f64 = panels.iter().map(|p| p.err).sum();
        if err <= tol_abs.max(tol_rel * total.norm()) {
            return Ok(total);
        }
        if panels.len() >= max_panels {
            return Err(Error::NoConvergence {
                what: "adaptive complex quadrature",
                detail: format!("error {err:.3e} with {} panels", panels.len()),
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.err.partial_cmp(&b.1.err).expect("finite errors"))
            .map(|(i, _)| i)
            .expect("non-empty panel list");
        let Panel { a, b, .. } = panels.swap_remove(worst);
        let mid = 0.5 * (a + b);
        let (v1, e1) = qk15_complex(f, a, mid);
        let (v2, e2) = qk15_complex(f, mid, b);
        panels.push(Panel { a, b: mid, val: v1, err: e1 });
        panels.push(Panel { a: mid, b, val: v2, err: e2 });
    }
}

/// Evenly spaced seed points, a convenience for oscillatory integrands
/// where the panel length should resolve one period.
pub fn uniform_seeds(a: f64, b: f64, panels: usize) -> Vec<f64> {
    let panels = panels.max(1);
    (0..=panels)
        .map(|i| a + (b - a) * i as f64 / panels as f64)
        .collect()
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P'_n(x)
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss-Hermite nodes and weights for weight e^{-x^2}, by Golub-Welsch on
/// the Jacobi matrix (diag 0, subdiag sqrt(k/2)).
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    assert!(n >= 1);
    let diag = vec![0.0; n];
    let sub: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let (nodes, vecs) = linalg::tridiagonal_eigen(&diag, &sub)?;
    let mu0 = std::f64::consts::PI.sqrt();
    let weights: Vec<f64> = (0..n).map(|i| mu0 * vecs.get(0, i) * vecs.get(0, i)).collect();
    Ok((nodes, weights))
}

/// E[f(mean + sd Z)] for standard normal Z, by Gauss-Hermite.
pub fn gauss_hermite_expect<F: Fn(f64) -> f64>(
    f: &F,
    mean: f64,
    sd: f64,
    n: usize,
) -> Result<f64> {
    let (nodes, weights) = gauss_hermite(n)?;
    let scale = std::f64::consts::SQRT_2 * sd;
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights.iter()) {
        acc += w * f(mean + scale * x);
    }
    Ok(acc / std::f64::consts::PI.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qk15_is_exact_on_low_degree_polynomials() {
        // the embedded Gauss rule is exact through degree 13, Kronrod higher
        let f = |x: f64| 5.0 * x.powi(4) - 3.0 * x * x + 2.0;
        let (v, e) = qk15(&f, -1.0, 2.0);
        // antiderivative: x^5 - x^3 + 2x
        let want = (32.0 - 8.0 + 4.0) - (-1.0 + 1.0 - 2.0);
        assert!((v - want).abs() < 1e-12);
        assert!(e < 1e-10);
    }

    #[test]
    fn adaptive_handles_smooth_and_oscillatory() {
        let v = adaptive(&|x: f64| x.sin(), &[0.0, std::f64::consts::PI], 1e-14, 1e-14, 1000)
            .unwrap();
        assert!((v - 2.0).abs() < 1e-12);

        // 20 full periods cancel exactly
        let b = 40.0 * std::f64::consts::PI;
        let seeds = uniform_seeds(0.0, b, 80);
        let v = adaptive(&|x: f64| x.cos(), &seeds, 1e-12, 0.0, 10_000).unwrap();
        assert!(v.abs() < 1e-10);
    }

    #[test]
    fn adaptive_resolves_a_spike() {
        // integral of 1/(1e-4 + x^2) over [-1,1] = 2 atan(100)/0.01
        let a2 = 1e-4f64;
        let f = |x: f64| 1.0 / (a2 + x * x);
        let v = adaptive(&f, &[-1.0, 1.0], 0.0, 1e-12, 10_000).unwrap();
        let want = 2.0 * (1.0 / a2.sqrt()) * (1.0 / a2.sqrt()).atan();
        assert!(((v - want) / want).abs() < 1e-10);
    }

    #[test]
    fn adaptive_complex_matches_real_parts() {
        use num_complex::Complex64;
        let f = |x: f64| Complex64::new(x.cos(), x.sin());
        let v = adaptive_complex(&f, &[0.0, 1.0], 1e-14, 1e-14, 1000).unwrap();
        assert!((v.re - 1.0f64.sin()).abs() < 1e-13);
        assert!((v.im - (1.0 - 1.0f64.cos())).abs() < 1e-13);
    }

    #[test]
    fn gauss_legendre_integrates_exactly() {
        let (x, w) = gauss_legendre(8);
        // degree 15 exactness
        for k in [0usize, 2, 8, 14] {
            let got: f64 = x.iter().zip(w.iter()).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
            let want = 2.0 / (k as f64 + 1.0);
            assert!((got - want).abs() < 1e-13, "x^{k}");
        }
        let got: f64 = x.iter().zip(w.iter()).map(|(xi, wi)| wi * xi.exp()).sum();
        let want = 1.0f64.exp() - (-1.0f64).exp();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn gauss_hermite_moments() {
        let (x, w) = gauss_hermite(20).unwrap();
        let pi_sqrt = std::f64::consts::PI.sqrt();
        let m0: f64 = w.iter().sum();
        let m2: f64 = x.iter().zip(w.iter()).map(|(xi, wi)| wi * xi * xi).sum();
        let m4: f64 = x.iter().zip(w.iter()).map(|(xi, wi)| wi * xi.powi(4)).sum();
        assert!((m0 - pi_sqrt).abs() < 1e-12);
        assert!((m2 - pi_sqrt / 2.0).abs() < 1e-12);
        assert!((m4 - 0.75 * pi_sqrt).abs() < 1e-12);
    }

    #[test]
    fn gauss_hermite_expectation_of_normal_moments() {
        // E[(mu + sd Z)^2] = mu^2 + sd^2
        let v = gauss_hermite_expect(&|y| y * y, 1.5, 2.0, 40).unwrap();
        assert!((v - (1.5f64 * 1.5 + 4.0)).abs() < 1e-11);
        // E[e^Z] = e^{1/2}
        let v = gauss_hermite_expect(&|y| y.exp(), 0.0, 1.0, 40).unwrap();
        assert!((v - 0.5f64.exp()).abs() < 1e-11);
    }
}
