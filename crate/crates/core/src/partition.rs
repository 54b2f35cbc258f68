//! Free energy of a fixed spectrum: the exact log partition function by
//! contour integration, its steepest-descent approximation, the
//! transitional-window decomposition, per-regime fluctuation functionals,
//! and direct small-system oracles on the sphere.
//!
//! Everything here runs off the identity
//!   Z_N = C_N int_{a - i inf}^{a + i inf} exp((N/2) G(z)) dz,
//!   G(z) = 2 beta z - (1/N) sum_i log(z - lambda_i),
//! with C_N = Gamma(N/2) / (2 pi i (N beta)^{N/2 - 1}) and any abscissa
//! a > lambda_1.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::analytics::{self, Regime, TransitionParams};
use crate::matrix::SquareMatrix;
use crate::quad;
use crate::rng::{domain, Stream};
use crate::special::ln_gamma;
use crate::spectral::Spectrum;
use crate::{Error, Result};

/// G and its first three derivatives at a point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GDerivs {
    pub g: f64,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
}

/// Critical point of G on (lambda_1, infinity), with the rescaled
/// quantities the asymptotics are written in.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CriticalPoint {
    pub gamma: f64,
    /// sqrt(N) (gamma - J - 1/J), using the coupling stored on the spectrum.
    pub s_n: f64,
    /// sqrt(N) (gamma - lambda_1); always positive.
    pub delta: f64,
    /// Curvature with the top eigenvalue removed:
    /// (1/N) sum_{i>=2} (gamma - lambda_i)^{-2}. Zero when N = 1.
    pub fpp: f64,
}

/// The three terms of the transitional free-energy formula. `total` is
/// their plain sum; callers compare it against the exact value.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FreeEnergyTerms {
    /// Deterministic leading part (depends on N, beta, J only).
    pub tilde_f: f64,
    /// -(1/2N) sum_{i>=2} log(J + 1/J - lambda_i).
    pub partial_ls_g: f64,
    /// Q(chi_N) / N.
    pub q_chi: f64,
}

impl FreeEnergyTerms {
    pub fn total(&self) -> f64 {
        self.tilde_f + self.partial_ls_g + self.q_chi
    }
}

/// Exact and approximate free energies of one sample, side by side.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FreeEnergyBreakdown {
    pub log_z_exact: f64,
    pub f_exact: f64,
    pub f_transitional: f64,
    pub f_steepest: f64,
    pub terms: FreeEnergyTerms,
}

/// How `direct_log_partition` should do its work.
#[derive(Clone, Copy, Debug)]
pub enum DirectMethod {
    /// Deterministic angular quadrature; systems of size 1 to 3 only.
    Quadrature,
    /// Uniform sphere sampling; sizes up to 12.
    MonteCarlo { samples: usize, seed: u64 },
}

/// A direct estimate of log Z, with a standard error when it came from
/// sampling.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DirectEstimate {
    pub log_z: f64,
    pub std_error: Option<f64>,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::domain(format!("inverse temperature beta = {beta} must be positive")));
    }
    Ok(())
}

/// G(z) = 2 beta z - (1/N) sum log(z - lambda_i) and its first three
/// derivatives, evaluated on the real axis to the right of the spectrum.
pub fn g_and_derivatives(s: &Spectrum, beta: f64, z: f64) -> Result<GDerivs> {
    check_beta(beta)?;
    if !z.is_finite() {
        return Err(Error::domain("evaluation point must be finite"));
    }
    if z <= s.lambda1() {
        return Err(Error::domain(format!(
            "evaluation point {z} must lie strictly right of the top eigenvalue {}",
            s.lambda1()
        )));
    }
    let n = s.n() as f64;
    let mut log_sum = 0.0;
    let (mut p1, mut p2, mut p3) = (0.0, 0.0, 0.0);
    for &lam in s.values() {
        let d = z - lam;
        let r = 1.0 / d;
        log_sum += d.ln();
        p1 += r;
        p2 += r * r;
        p3 += r * r * r;
    }
    Ok(GDerivs {
        g: 2.0 * beta * z - log_sum / n,
        g1: 2.0 * beta - p1 / n,
        g2: p2 / n,
        g3: -2.0 * p3 / n,
    })
}

/// G at a complex point off the spectrum, principal branch logs.
pub fn g_complex(s: &Spectrum, beta: f64, z: Complex64) -> Result<Complex64> {
    check_beta(beta)?;
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::domain("evaluation point must be finite"));
    }
    let n = s.n() as f64;
    let mut log_sum = Complex64::new(0.0, 0.0);
    for &lam in s.values() {
        let d = z - lam;
        if d.norm_sqr() == 0.0 {
            return Err(Error::domain(format!("evaluation point coincides with eigenvalue {lam}")));
        }
        log_sum += d.ln();
    }
    Ok(2.0 * beta * z - log_sum / n)
}

/// The unique zero of G' on (lambda_1, infinity). G' is strictly
/// increasing there (G'' > 0), from -infinity at lambda_1+ to 2 beta, so a
/// safeguarded Newton iteration on a sign-changing bracket always lands.
pub fn critical_point(s: &Spectrum, beta: f64) -> Result<CriticalPoint> {
    check_beta(beta)?;
    if s.n() == 0 {
        return Err(Error::domain("spectrum is empty"));
    }
    let lam1 = s.lambda1();
    let n = s.n() as f64;
    let gp = |z: f64| {
        let mut p1 = 0.0;
        for &lam in s.values() {
            p1 += 1.0 / (z - lam);
        }
        2.0 * beta - p1 / n
    };
    let gpp = |z: f64| {
        let mut p2 = 0.0;
        for &lam in s.values() {
            let r = 1.0 / (z - lam);
            p2 += r * r;
        }
        p2 / n
    };

    // lower end: (1/N)/(z - lambda_1) alone beats 2 beta once the gap is
    // below 1/(2 beta N), so G' < 0 there
    let scale = 1.0_f64.max(lam1.abs());
    let mut lo = lam1 + (1e-9 * scale).min(0.25 / (beta * n));
    for _ in 0..90 {
        if gp(lo) < 0.0 {
            break;
        }
        lo = lam1 + 0.125 * (lo - lam1);
    }
    // upper end: every gap is at least 1/beta, so G' >= 2 beta - beta > 0
    let mut hi = lam1 + 1.0 / beta;
    if gp(lo) >= 0.0 || gp(hi) <= 0.0 {
        return Err(Error::NoConvergence {
            what: "critical point bracket",
            detail: format!("no sign change on ({lo}, {hi})"),
        });
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let d1 = gp(x);
        if d1 < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if d1.abs() <= 1e-13 || hi - lo <= f64::EPSILON * scale {
            break;
        }
        let mut next = x - d1 / gpp(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == x {
            break;
        }
        x = next;
    }

    let residual = gp(x);
    if !(x > lam1) || residual.abs() > 1e-10 {
        return Err(Error::NoConvergence {
            what: "critical point",
            detail: format!("gamma = {x}, residual G'(gamma) = {residual:.3e}"),
        });
    }

    let j_hat = s.j() + 1.0 / s.j();
    let mut fpp = 0.0;
    for &lam in &s.values()[1..] {
        let r = 1.0 / (x - lam);
        fpp += r * r;
    }
    Ok(CriticalPoint {
        gamma: x,
        s_n: n.sqrt() * (x - j_hat),
        delta: n.sqrt() * (x - lam1),
        fpp: fpp / n,
    })
}

/// Exact log Z by numerical contour integration along the vertical line
/// through the critical point.
pub fn contour_log_partition(s: &Spectrum, beta: f64) -> Result<f64> {
    let cp = critical_point(s, beta)?;
    contour_log_partition_at(s, beta, cp.gamma)
}

/// Same integral with a caller-chosen abscissa; Cauchy's theorem makes the
/// result independent of it, which the tests exercise.
///
/// The factored integrand on the vertical line pairs the conjugate points
/// t and -t into a real cosine integral. Where the polynomial envelope
/// alone cannot reach the 1e-16 cutoff before height a - lambda_min, the
/// contour bends by 3 pi / 4 (up-left); along that ray the distance to
/// every eigenvalue is nondecreasing, leaving a clean exp(-N beta v / sqrt 2)
/// bound that converges for every N >= 1.
pub fn contour_log_partition_at(s: &Spectrum, beta: f64, abscissa: f64) -> Result<f64> {
    check_beta(beta)?;
    let n = s.n();
    if n == 0 {
        return Err(Error::domain("spectrum is empty"));
    }
    let nf = n as f64;
    if !abscissa.is_finite() || abscissa <= s.lambda1() {
        return Err(Error::domain(format!(
            "abscissa {abscissa} must lie strictly right of the top eigenvalue {}",
            s.lambda1()
        )));
    }
    // gaps to the eigenvalues, smallest first (values are descending)
    let d: Vec<f64> = s.values().iter().map(|&lam| abscissa - lam).collect();
    if d[0] <= 0.0 {
        return Err(Error::domain("abscissa does not clear the spectrum"));
    }

    // log of the squared envelope: the vertical integrand modulus is
    // exp(-env(t)/4)
    let env = |t: f64| -> f64 {
        let mut e = 0.0;
        for &di in &d {
            let r = t / di;
            e += (1.0 + r * r).ln();
        }
        e
    };
    // height where the envelope alone is below 1e-16 (exp(-147.4/4))
    let need = 147.4;
    let mut t_hi = d[d.len() - 1].max(1.0);
    while env(t_hi) < need && t_hi < 1e280 {
        t_hi *= 2.0;
    }
    let mut t_lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (t_lo + t_hi);
        if env(mid) < need {
            t_lo = mid;
        } else {
            t_hi = mid;
        }
    }
    let t_env = t_hi;
    // past this height the up-left ray moves away from every eigenvalue
    let t_rot = d[d.len() - 1];
    let t_cut = t_env.min(t_rot);

    // paired vertical integrand, peak value factored out
    let paired = |t: f64| -> f64 {
        let mut e = 0.0;
        let mut phase = nf * beta * t;
        for &di in &d {
            let r = t / di;
            e += (1.0 + r * r).ln();
            phase -= 0.5 * r.atan();
        }
        (-0.25 * e).exp() * phase.cos()
    };

    // seed spacing: a quarter of the shortest oscillation wavelength, with
    // geometric refinement below the nearest-pole scale d[0]
    let sum_inv_d: f64 = d.iter().map(|x| 1.0 / x).sum();
    let rate = nf * beta + 0.5 * sum_inv_d;
    let h = 0.25 * (2.0 * PI / rate);
    let mut seeds = vec![0.0, t_cut];
    let mut g = 0.25 * d[0];
    while g < h.min(t_cut) {
        seeds.push(g);
        g *= 2.0;
    }
    let panels = (t_cut / h).ceil().clamp(1.0, 4096.0) as usize;
    let step = t_cut / panels as f64;
    for i in 1..panels {
        seeds.push(step * i as f64);
    }
    seeds.sort_by(f64::total_cmp);
    seeds.dedup();
    let mut reduced = 2.0 * quad::adaptive(&paired, &seeds, 1e-13, 1e-10, 20_000)?;

    if t_rot <= t_env {
        // finish with the rotated ray z(v) = a + i t_cut + e^{i 3pi/4} v;
        // its mirror image contributes the conjugate, so the pair adds
        // 2 Im of the one-sided integral
        let rot = Complex64::from_polar(1.0, 0.75 * PI);
        let tail_f = |v: f64| -> Complex64 {
            let w = Complex64::new(0.0, t_cut) + rot * v;
            let mut log_sum = Complex64::new(0.0, 0.0);
            for &di in &d {
                log_sum += (Complex64::new(1.0, 0.0) + w / di).ln();
            }
            (0.5 * nf * (2.0 * beta * w) - 0.5 * log_sum).exp()
        };
        let v_max = 2.0_f64.sqrt() * 40.0 / (nf * beta);
        let tail_seeds = quad::uniform_seeds(0.0, v_max, 128);
        let tail = quad::adaptive_complex(&tail_f, &tail_seeds, 1e-13, 1e-10, 4_000)?;
        reduced += 2.0 * (rot * tail).im;
    }

    if !(reduced > 0.0) || !reduced.is_finite() {
        return Err(Error::NoConvergence {
            what: "contour integral",
            detail: format!("reduced integral came out {reduced}"),
        });
    }

    // log Z = log Gamma(N/2) - (N/2 - 1) log(N beta) - log(2 pi)
    //         + (N/2) G(a) + log(reduced)
    let g_at = g_and_derivatives(s, beta, abscissa)?.g;
    Ok(ln_gamma(0.5 * nf) - (0.5 * nf - 1.0) * (nf * beta).ln() - (2.0 * PI).ln()
        + 0.5 * nf * g_at
        + reduced.ln())
}

/// Steepest-descent free energy: the contour prefactor, the saddle value
/// (N/2) G(gamma), the local width Delta/sqrt(N), and the crossover factor
/// I(F''(gamma) Delta^2) assembled in log space.
pub fn steepest_descent_free_energy(s: &Spectrum, beta: f64) -> Result<f64> {
    if s.n() < 2 {
        return Err(Error::Unsupported(
            "steepest descent with a single eigenvalue (the reduced curvature is an empty sum)",
        ));
    }
    let cp = critical_point(s, beta)?;
    let nf = s.n() as f64;
    let g_at = g_and_derivatives(s, beta, cp.gamma)?.g;
    let i_val = analytics::i_alpha(cp.fpp * cp.delta * cp.delta)?;
    let log_z = ln_gamma(0.5 * nf) - (0.5 * nf - 1.0) * (nf * beta).ln() - (2.0 * PI).ln()
        + 0.5 * nf * g_at
        + (cp.delta / nf.sqrt()).ln()
        + i_val.ln();
    Ok(log_z / nf)
}

/// Transitional-window free energy: deterministic part, the plain partial
/// eigenvalue sum of log(J + 1/J - lambda), and the crossover term
/// Q(chi_N)/N. The window parameters decide beta and the spike location;
/// the coupling tag stored on the spectrum is not consulted.
pub fn transitional_free_energy(s: &Spectrum, p: &TransitionParams) -> Result<FreeEnergyTerms> {
    let n = s.n();
    if n == 0 {
        return Err(Error::domain("spectrum is empty"));
    }
    let nf = n as f64;
    let beta = p.beta(n);
    check_beta(beta)?;
    let j_hat = p.j_hat();
    let tilde_f = analytics::tilde_f_transitional(n, beta, p.j)?;
    let mut sum = 0.0;
    for (k, &lam) in s.values().iter().enumerate().skip(1) {
        if lam >= j_hat {
            return Err(Error::RigidityViolation { index: k + 1, value: lam, edge: j_hat });
        }
        sum += (j_hat - lam).ln();
    }
    let chi = nf.sqrt() * (s.lambda1() - j_hat);
    let q = analytics::q_of_x(chi, p)?;
    Ok(FreeEnergyTerms { tilde_f, partial_ls_g: -0.5 * sum / nf, q_chi: q / nf })
}

/// One sample, all four numbers: exact contour value, the transitional
/// formula, and the steepest-descent approximation.
pub fn free_energy_breakdown(s: &Spectrum, p: &TransitionParams) -> Result<FreeEnergyBreakdown> {
    let n = s.n() as f64;
    let beta = p.beta(s.n());
    let log_z = contour_log_partition(s, beta)?;
    let terms = transitional_free_energy(s, p)?;
    let f_sd = steepest_descent_free_energy(s, beta)?;
    Ok(FreeEnergyBreakdown {
        log_z_exact: log_z,
        f_exact: log_z / n,
        f_transitional: terms.total(),
        f_steepest: f_sd,
        terms,
    })
}

/// The eigenvalue functional that carries the leading fluctuation of F_N
/// in each fixed regime: (beta - 1/(2 Jt))(lambda_1 - Jt - 1/Jt) with
/// Jt = max(J, 1) in the ferromagnetic and spin glass regimes, and the full
/// log sum -(1/2N) sum_i log(2 beta + 1/(2 beta) - lambda_i) in the
/// paramagnetic regime. The deterministic offset is not included.
pub fn regime_fluctuation_part(s: &Spectrum, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if s.n() == 0 {
        return Err(Error::domain("spectrum is empty"));
    }
    let (_, regime) = analytics::limiting_free_energy(beta, s.j())?;
    match regime {
        Regime::Ferromagnetic | Regime::SpinGlass => {
            let jt = s.j().max(1.0);
            Ok((beta - 0.5 / jt) * (s.lambda1() - jt - 1.0 / jt))
        }
        Regime::Paramagnetic => {
            let level = 2.0 * beta + 0.5 / beta;
            if s.lambda1() >= level {
                return Err(Error::domain(format!(
                    "paramagnetic functional needs lambda_1 < 2 beta + 1/(2 beta) = {level}, \
                     got {}",
                    s.lambda1()
                )));
            }
            let nf = s.n() as f64;
            let sum: f64 = s.values().iter().map(|&lam| (level - lam).ln()).sum();
            Ok(-0.5 * sum / nf)
        }
    }
}

/// Direct evaluation of log Z on the sphere of radius sqrt(N), as an
/// oracle for the contour machinery. Quadrature covers N in {1, 2, 3}
/// (uniform angles, spectrally accurate); Monte Carlo covers N <= 12.
pub fn direct_log_partition(
    m: &SquareMatrix,
    beta: f64,
    method: DirectMethod,
) -> Result<DirectEstimate> {
    check_beta(beta)?;
    m.require_symmetric(1e-9)?;
    let n = m.n();
    match method {
        DirectMethod::Quadrature => match n {
            1 => Ok(DirectEstimate { log_z: beta * m.get(0, 0), std_error: None }),
            2 => Ok(DirectEstimate { log_z: circle_log_partition(m, beta)?, std_error: None }),
            3 => Ok(DirectEstimate { log_z: sphere3_log_partition(m, beta)?, std_error: None }),
            _ => Err(Error::domain(format!(
                "direct quadrature covers sizes 1 to 3, got {n}"
            ))),
        },
        DirectMethod::MonteCarlo { samples, seed } => {
            if n > 12 {
                return Err(Error::domain(format!(
                    "direct Monte Carlo covers sizes up to 12, got {n}"
                )));
            }
            if samples < 2 {
                return Err(Error::domain("need at least two Monte Carlo samples"));
            }
            sphere_monte_carlo(m, beta, samples, seed)
        }
    }
}

/// N = 2: sigma = sqrt(2)(cos t, sin t), uniform t. The periodic trapezoid
/// rule converges spectrally for analytic integrands, so double the point
/// count until the value settles.
fn circle_log_partition(m: &SquareMatrix, beta: f64) -> Result<f64> {
    let energy = |t: f64| {
        let (s, c) = t.sin_cos();
        2.0 * (m.get(0, 0) * c * c + 2.0 * m.get(0, 1) * s * c + m.get(1, 1) * s * s)
    };
    let mut k = 16usize;
    let mut prev = f64::NAN;
    while k <= 1 << 20 {
        let mut peak = f64::NEG_INFINITY;
        let vals: Vec<f64> = (0..k)
            .map(|i| {
                let v = beta * energy(2.0 * PI * i as f64 / k as f64);
                peak = peak.max(v);
                v
            })
            .collect();
        let mean: f64 = vals.iter().map(|&v| (v - peak).exp()).sum::<f64>() / k as f64;
        let log_z = peak + mean.ln();
        if (log_z - prev).abs() <= 1e-13 * log_z.abs().max(1.0) {
            return Ok(log_z);
        }
        prev = log_z;
        k *= 2;
    }
    Err(Error::NoConvergence {
        what: "circle quadrature",
        detail: "trapezoid doubling exhausted".to_string(),
    })
}

/// N = 3: sigma = sqrt(3)(r cos t, r sin t, u) with u the cosine of the
/// polar angle and r = sqrt(1 - u^2); uniform measure is du dt / (4 pi).
/// Gauss-Legendre in u times periodic trapezoid in t, both doubled until
/// the value settles.
fn sphere3_log_partition(m: &SquareMatrix, beta: f64) -> Result<f64> {
    let energy = |u: f64, t: f64| {
        let r = (1.0 - u * u).max(0.0).sqrt();
        let (st, ct) = t.sin_cos();
        let sig = [3.0_f64.sqrt() * r * ct, 3.0_f64.sqrt() * r * st, 3.0_f64.sqrt() * u];
        let mut h = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                h += sig[i] * m.get(i, j) * sig[j];
            }
        }
        h
    };
    let mut nu = 12usize;
    let mut prev = f64::NAN;
    while nu <= 1 << 12 {
        let (nodes, weights) = quad::gauss_legendre(nu);
        let k = 2 * nu;
        // peak of beta*H over the grid, factored out before exponentiating
        let mut grid = Vec::with_capacity(nu * k);
        let mut peak = f64::NEG_INFINITY;
        for &u in &nodes {
            for i in 0..k {
                let v = beta * energy(u, 2.0 * PI * i as f64 / k as f64);
                peak = peak.max(v);
                grid.push(v);
            }
        }
        let mut acc = 0.0;
        for (iu, &wu) in weights.iter().enumerate() {
            let mut row = 0.0;
            for i in 0..k {
                row += (grid[iu * k + i] - peak).exp();
            }
            acc += wu * row / k as f64;
        }
        // the u-integral spans [-1, 1] with total mass 2
        let log_z = peak + (acc / 2.0).ln();
        if (log_z - prev).abs() <= 1e-12 * log_z.abs().max(1.0) {
            return Ok(log_z);
        }
        prev = log_z;
        nu *= 2;
    }
    Err(Error::NoConvergence {
        what: "sphere quadrature",
        detail: "node doubling exhausted".to_string(),
    })
}

/// Uniform directions from normalized Gaussians, scaled to radius sqrt(N);
/// log-mean-exp of beta H with a delta-method standard error.
fn sphere_monte_carlo(
    m: &SquareMatrix,
    beta: f64,
    samples: usize,
    seed: u64,
) -> Result<DirectEstimate> {
    let n = m.n();
    let mut exponents = Vec::with_capacity(samples);
    let mut peak = f64::NEG_INFINITY;
    let mut sigma = vec![0.0; n];
    for k in 0..samples {
        let mut stream = Stream::for_cell(seed, domain::SPHERE, k as u64, 0);
        loop {
            let mut norm_sq = 0.0;
            for x in sigma.iter_mut() {
                *x = stream.next_normal();
                norm_sq += *x * *x;
            }
            if norm_sq > 0.0 {
                let scale = ((n as f64) / norm_sq).sqrt();
                for x in sigma.iter_mut() {
                    *x *= scale;
                }
                break;
            }
        }
        let v = beta * m.quadratic_form(&sigma);
        peak = peak.max(v);
        exponents.push(v);
    }
    let weights: Vec<f64> = exponents.iter().map(|&v| (v - peak).exp()).collect();
    let mean = weights.iter().sum::<f64>() / samples as f64;
    let var = weights.iter().map(|&w| (w - mean) * (w - mean)).sum::<f64>()
        / (samples as f64 - 1.0);
    Ok(DirectEstimate {
        log_z: peak + mean.ln(),
        std_error: Some((var / samples as f64).sqrt() / mean),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{assemble_deformed, sample_wigner, EnsembleConfig, EntryDistribution};

    fn toy3() -> Spectrum {
        Spectrum::from_values(vec![1.2, 0.3, -0.8], 2.0)
    }

    #[test]
    fn g_matches_the_single_eigenvalue_closed_form() {
        let s = Spectrum::from_values(vec![0.7], 2.0);
        let d = g_and_derivatives(&s, 0.3, 2.0).unwrap();
        let gap: f64 = 1.3;
        assert!((d.g - (2.0 * 0.3 * 2.0 - gap.ln())).abs() < 1e-15);
        assert!((d.g1 - (0.6 - 1.0 / gap)).abs() < 1e-15);
        assert!((d.g2 - 1.0 / (gap * gap)).abs() < 1e-15);
        assert!((d.g3 + 2.0 / (gap * gap * gap)).abs() < 1e-15);
    }

    #[test]
    fn g_rejects_points_at_or_below_the_top_eigenvalue() {
        let s = toy3();
        assert!(g_and_derivatives(&s, 0.3, 1.2).is_err());
        assert!(g_and_derivatives(&s, 0.3, 0.9).is_err());
        assert!(g_and_derivatives(&s, -0.1, 2.0).is_err());
    }

    // Expected values computed with 25-digit arithmetic (mpmath) from the
    // closed-form derivative expressions.
    #[test]
    fn g_matches_a_high_precision_oracle_on_a_toy_spectrum() {
        let d = g_and_derivatives(&toy3(), 0.31, 2.0).unwrap();
        assert!((d.g - 0.794298627690293707).abs() < 1e-14);
        assert!((d.g1 - -0.111792717086834734).abs() < 1e-14);
        assert!((d.g2 - 0.678690593884612669).abs() < 1e-14);
        assert!((d.g3 - -1.46814704008147995).abs() < 1e-13);
    }

    #[test]
    fn complex_step_differentiation_agrees_with_the_reported_slopes() {
        let s = toy3();
        let beta = 0.31;
        let z = 2.0;
        let d = g_and_derivatives(&s, beta, z).unwrap();
        // first derivative: one complex step, exact to roundoff
        let h = 1e-20;
        let g1 = g_complex(&s, beta, Complex64::new(z, h)).unwrap().im / h;
        assert!((g1 - d.g1).abs() < 1e-13);
        // second derivative: Richardson-extrapolated central difference of
        // complex-step first derivatives
        let slope = |x: f64| g_complex(&s, beta, Complex64::new(x, h)).unwrap().im / h;
        let central = |hh: f64| (slope(z + hh) - slope(z - hh)) / (2.0 * hh);
        let g2 = (4.0 * central(5e-5) - central(1e-4)) / 3.0;
        assert!((g2 - d.g2).abs() < 1e-9);
    }

    #[test]
    fn critical_point_solves_the_single_eigenvalue_case_exactly() {
        let s = Spectrum::from_values(vec![0.4], 2.0);
        let cp = critical_point(&s, 0.3).unwrap();
        assert!((cp.gamma - (0.4 + 1.0 / 0.6)).abs() < 1e-12);
        assert_eq!(cp.fpp, 0.0);
        assert!((cp.delta - (cp.gamma - 0.4)).abs() < 1e-12);
    }

    #[test]
    fn critical_point_matches_the_two_eigenvalue_quadratic() {
        // G'(x) = 0.5 - (1/(x-2) + 1/x)/2 = 0 gives x^2 - 4x + 2 = 0,
        // root above the spectrum at 2 + sqrt(2)
        let s = Spectrum::from_values(vec![2.0, 0.0], 2.0);
        let cp = critical_point(&s, 0.25).unwrap();
        assert!((cp.gamma - 3.41421356237309505).abs() < 1e-12);
    }

    #[test]
    fn critical_point_residual_and_ordering_invariants() {
        let mut stream = Stream::for_cell(11, domain::TRIAL, 0, 0);
        for n in [1usize, 2, 5, 17, 60] {
            let mut values: Vec<f64> = (0..n).map(|_| 3.0 * (stream.next_uniform() - 0.5)).collect();
            values.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let s = Spectrum::from_values(values, 2.0);
            for beta in [0.05, 0.25, 1.5] {
                let cp = critical_point(&s, beta).unwrap();
                assert!(cp.gamma > s.lambda1());
                assert!(cp.delta > 0.0);
                let resid = g_and_derivatives(&s, beta, cp.gamma).unwrap().g1;
                assert!(resid.abs() <= 1e-10, "residual {resid:.2e} at n={n} beta={beta}");
                let chi = (n as f64).sqrt() * (s.lambda1() - 2.5);
                assert!((cp.s_n - chi - cp.delta).abs() < 1e-9 * (1.0 + cp.s_n.abs()));
            }
        }
    }

    #[test]
    fn contour_recovers_the_two_point_sphere_exactly() {
        // on S_0 = {-1, +1} the energy is constant, so log Z = beta lambda;
        // the whole weight sits in the rotated tail here
        let s = Spectrum::from_values(vec![0.7], 2.0);
        let lz = contour_log_partition(&s, 0.3).unwrap();
        assert!((lz - 0.21).abs() < 1e-9, "got {lz}");
    }

    // The frozen values below were computed with 25-digit arithmetic
    // (mpmath) on the angular integrals directly.
    #[test]
    fn contour_matches_the_circle_oracle_on_a_two_by_two_matrix() {
        let m = SquareMatrix::from_rows(&[&[0.4, 0.9], &[0.9, -0.3]]);
        let beta = 0.21;
        let direct = direct_log_partition(&m, beta, DirectMethod::Quadrature).unwrap();
        assert!((direct.log_z - 0.0617080365252298861).abs() < 1e-12);
        let s = Spectrum::from_deformed(&m, 2.0, None).unwrap();
        let lz = contour_log_partition(&s, beta).unwrap();
        assert!(
            (lz - direct.log_z).abs() < 1e-8 * direct.log_z.abs().max(1.0),
            "contour {lz} vs direct {}",
            direct.log_z
        );
    }

    #[test]
    fn contour_matches_the_sphere_oracle_on_a_three_by_three_matrix() {
        let m = SquareMatrix::from_rows(&[
            &[0.3, 0.5, -0.2],
            &[0.5, -0.1, 0.4],
            &[-0.2, 0.4, 0.2],
        ]);
        let beta = 0.37;
        let direct = direct_log_partition(&m, beta, DirectMethod::Quadrature).unwrap();
        assert!((direct.log_z - 0.222297266149810121).abs() < 1e-11);
        let s = Spectrum::from_deformed(&m, 2.0, None).unwrap();
        let lz = contour_log_partition(&s, beta).unwrap();
        assert!((lz - direct.log_z).abs() < 1e-6 * direct.log_z.abs().max(1.0));
    }

    #[test]
    fn contour_is_invariant_under_abscissa_shifts() {
        let m = SquareMatrix::from_rows(&[
            &[0.3, 0.5, -0.2],
            &[0.5, -0.1, 0.4],
            &[-0.2, 0.4, 0.2],
        ]);
        let beta = 0.37;
        let s = Spectrum::from_deformed(&m, 2.0, None).unwrap();
        let cp = critical_point(&s, beta).unwrap();
        let base = contour_log_partition_at(&s, beta, cp.gamma).unwrap();
        for a in [
            0.5 * (s.lambda1() + cp.gamma),
            cp.gamma + 0.25,
            cp.gamma + 0.5,
            cp.gamma + 1.0,
        ] {
            let shifted = contour_log_partition_at(&s, beta, a).unwrap();
            assert!(
                (shifted - base).abs() <= 1e-8 * base.abs().max(1.0),
                "abscissa {a}: {shifted} vs {base}"
            );
        }

        // and on a larger synthetic spectrum with a planted spike
        let mut values: Vec<f64> = (1..=20).map(|k| 2.0 * (PI * k as f64 / 21.0).cos()).collect();
        values[0] = 2.5;
        let s = Spectrum::from_values(values, 2.0);
        let cp = critical_point(&s, 0.25).unwrap();
        let b0 = contour_log_partition_at(&s, 0.25, cp.gamma).unwrap();
        let b1 = contour_log_partition_at(&s, 0.25, cp.gamma + 0.5).unwrap();
        assert!((b1 - b0).abs() <= 1e-8 * b0.abs().max(1.0), "{b1} vs {b0}");
    }

    #[test]
    fn direct_quadrature_matches_the_bessel_identity() {
        // diag(1,-1) at beta = 1/2 gives Z = (1/2pi) int exp(cos 2t) dt,
        // the modified Bessel value I_0(1); log I_0(1) computed with
        // 25-digit arithmetic (mpmath)
        let m = SquareMatrix::from_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let direct = direct_log_partition(&m, 0.5, DirectMethod::Quadrature).unwrap();
        assert!((direct.log_z - 0.235914358507178649).abs() < 1e-12);
    }

    #[test]
    fn direct_monte_carlo_agrees_with_quadrature_within_errors() {
        let m = SquareMatrix::from_rows(&[
            &[0.3, 0.5, -0.2],
            &[0.5, -0.1, 0.4],
            &[-0.2, 0.4, 0.2],
        ]);
        let beta = 0.37;
        let quad_value = direct_log_partition(&m, beta, DirectMethod::Quadrature).unwrap().log_z;
        let mc = direct_log_partition(
            &m,
            beta,
            DirectMethod::MonteCarlo { samples: 40_000, seed: 7 },
        )
        .unwrap();
        let se = mc.std_error.unwrap();
        assert!(se > 0.0 && se < 0.01);
        assert!(
            (mc.log_z - quad_value).abs() <= 3.0 * se,
            "mc {} vs quad {quad_value}, se {se}",
            mc.log_z
        );
    }

    #[test]
    fn direct_oracles_reject_out_of_range_sizes() {
        let m4 = SquareMatrix::zeros(4);
        assert!(direct_log_partition(&m4, 0.3, DirectMethod::Quadrature).is_err());
        let m13 = SquareMatrix::zeros(13);
        assert!(direct_log_partition(
            &m13,
            0.3,
            DirectMethod::MonteCarlo { samples: 100, seed: 1 }
        )
        .is_err());
    }

    #[test]
    fn steepest_descent_needs_a_second_eigenvalue() {
        let s = Spectrum::from_values(vec![0.7], 2.0);
        match steepest_descent_free_energy(&s, 0.3) {
            Err(Error::Unsupported(_)) => {}
            other => panic!("expected the unsupported error, got {other:?}"),
        }
    }

    #[test]
    fn steepest_descent_tracks_the_exact_contour_value() {
        let config = EnsembleConfig::new(200, 2.0, EntryDistribution::goe(), 424242);
        let a = sample_wigner(&config).unwrap();
        let m = assemble_deformed(&a);
        let s = Spectrum::from_deformed(&m, 2.0, Some(424242)).unwrap();
        let beta = 0.25;
        let exact = contour_log_partition(&s, beta).unwrap() / 200.0;
        let sd = steepest_descent_free_energy(&s, beta).unwrap();
        assert!((sd - exact).abs() <= 1e-3, "sd {sd} vs exact {exact}");
    }

    #[test]
    fn transitional_terms_add_up_and_flag_rigidity_violations() {
        let p = TransitionParams::new(2.0, 0.5).unwrap();
        let s = Spectrum::from_values(vec![2.6, 1.9, 0.3, -1.1], 2.0);
        let terms = transitional_free_energy(&s, &p).unwrap();
        assert_eq!(terms.total(), terms.tilde_f + terms.partial_ls_g + terms.q_chi);
        assert!(terms.total().is_finite());

        // a bulk eigenvalue at the spike location is a rigidity violation
        let bad = Spectrum::from_values(vec![2.8, 2.5, 0.3, -1.1], 2.0);
        match transitional_free_energy(&bad, &p) {
            Err(Error::RigidityViolation { index, value, edge }) => {
                assert_eq!(index, 2);
                assert!((value - 2.5).abs() < 1e-15);
                assert!((edge - 2.5).abs() < 1e-15);
            }
            other => panic!("expected a rigidity violation, got {other:?}"),
        }
    }

    #[test]
    fn transitional_tracks_the_exact_free_energy_on_a_sampled_matrix() {
        let p = TransitionParams::new(2.0, 0.0).unwrap();
        let config = EnsembleConfig::new(100, 2.0, EntryDistribution::goe(), 9090);
        let a = sample_wigner(&config).unwrap();
        let m = assemble_deformed(&a);
        let s = Spectrum::from_deformed(&m, 2.0, Some(9090)).unwrap();
        let bd = free_energy_breakdown(&s, &p).unwrap();
        assert!((bd.f_exact - bd.log_z_exact / 100.0).abs() < 1e-15);
        assert!((bd.f_transitional - bd.terms.total()).abs() < 1e-15);
        assert!(
            (bd.f_transitional - bd.f_exact).abs() <= 1e-2,
            "transitional {} vs exact {}",
            bd.f_transitional,
            bd.f_exact
        );
        assert!((bd.f_steepest - bd.f_exact).abs() <= 1e-2);
    }

    #[test]
    fn regime_fluctuation_part_has_the_advertised_trivial_points() {
        // ferromagnetic branch vanishes when lambda_1 sits at J + 1/J
        let s = Spectrum::from_values(vec![2.5, 0.0], 2.0);
        let v = regime_fluctuation_part(&s, 0.4).unwrap();
        assert!(v.abs() < 1e-15);

        // paramagnetic branch at a single zero eigenvalue
        let s = Spectrum::from_values(vec![0.0], 0.5);
        let beta = 0.2;
        let v = regime_fluctuation_part(&s, beta).unwrap();
        let level: f64 = 2.0 * beta + 0.5 / beta;
        assert!((v - -0.5 * level.ln()).abs() < 1e-15);

        // paramagnetic branch rejects spectra reaching the log singularity
        let s = Spectrum::from_values(vec![3.0], 0.5);
        assert!(regime_fluctuation_part(&s, beta).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn critical_point_invariants_hold_on_random_spectra(
                raw in proptest::collection::vec(-3.0f64..3.0, 1..24),
                beta in 0.05f64..2.0,
            ) {
                let mut values = raw;
                values.sort_by(|a, b| b.partial_cmp(a).unwrap());
                let s = Spectrum::from_values(values, 2.0);
                let cp = critical_point(&s, beta).unwrap();
                prop_assert!(cp.gamma > s.lambda1());
                prop_assert!(cp.delta > 0.0);
                let resid = g_and_derivatives(&s, beta, cp.gamma).unwrap().g1;
                prop_assert!(resid.abs() <= 1e-10);
            }
        }
    }
}
