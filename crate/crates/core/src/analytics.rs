//! Closed-form asymptotic objects for the transition window: the
//! oscillatory edge integral I_m(alpha), the saddle branch s(x), the window
//! correction Q(x), Chebyshev coefficients tau_ell, CLT parameters for
//! linear statistics, the bivariate limit law at the transition, regime
//! free energies, and the window centering sequences.

use num_complex::Complex64;
use serde::Serialize;

use crate::ensembles::EntryDistribution;
use crate::quad;
use crate::rng::{domain, Stream};
use crate::{Error, Result};

const PI: f64 = std::f64::consts::PI;

/// The transition window: couplings J > 1 probed at inverse temperature
/// 2 beta = 1/J + B/sqrt(N).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransitionParams {
    pub j: f64,
    pub b: f64,
}

impl TransitionParams {
    pub fn new(j: f64, b: f64) -> Result<TransitionParams> {
        if !(j.is_finite() && j > 1.0) {
            return Err(Error::domain(format!("coupling j = {j} must be finite and exceed 1")));
        }
        if !b.is_finite() {
            return Err(Error::domain("window parameter b must be finite"));
        }
        Ok(TransitionParams { j, b })
    }

    /// Spike location J + 1/J of the deformed spectrum.
    pub fn j_hat(&self) -> f64 {
        self.j + 1.0 / self.j
    }

    /// The window inverse temperature at size N.
    pub fn beta(&self, n: usize) -> f64 {
        0.5 * (1.0 / self.j + self.b / (n as f64).sqrt())
    }
}

/// Entry moments that feed the limit laws: diagonal variance w2 and
/// off-diagonal third/fourth moments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments {
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
}

impl From<EntryDistribution> for Moments {
    fn from(d: EntryDistribution) -> Moments {
        Moments { w2: d.w2, w3: d.w3(), w4: d.w4() }
    }
}

impl Moments {
    pub fn goe() -> Moments {
        Moments { w2: 2.0, w3: 0.0, w4: 3.0 }
    }
}

/// I(alpha) = integral over the real line of
/// (1+it)^{-1/2} e^{-alpha t^2/4 + it/2} dt, which is real and positive.
/// Evaluated in the cosine form
/// 2 int_0^inf (1+t^2)^{-1/4} e^{-alpha t^2/4} cos((t - atan t)/2) dt
/// with one quadrature panel per oscillation period. Below alpha = 1e-5
/// the flat-window limit sqrt(8 pi / e) is used (relative error O(alpha)).
pub fn i_alpha(alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::domain(format!("i_alpha needs alpha > 0, got {alpha}")));
    }
    if alpha < 1e-5 {
        return Ok((8.0 * PI / std::f64::consts::E).sqrt());
    }
    // envelope e^{-alpha t^2/4} below 1e-16
    let t_max = (147.4 / alpha).sqrt();
    let panels = (t_max / (4.0 * PI)).ceil().max(1.0) as usize;
    let seeds = quad::uniform_seeds(0.0, t_max, panels);
    let f = |t: f64| {
        (1.0 + t * t).powf(-0.25) * (-0.25 * alpha * t * t).exp() * (0.5 * (t - t.atan())).cos()
    };
    let v = quad::adaptive(&f, &seeds, 1e-13, 1e-10, 4000)?;
    Ok(2.0 * v)
}

/// The moment variants I_m(alpha) = int t^m (1+it)^{-1/2} e^{-alpha t^2/4 + it/2} dt
/// over the real line. Real for even m, purely imaginary for odd m.
pub fn i_m(alpha: f64, m: u32) -> Result<Complex64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::domain(format!("i_m needs alpha > 0, got {alpha}")));
    }
    // widen the envelope cutoff to absorb the t^m factor
    let mut t_max = (147.4 / alpha).sqrt();
    for _ in 0..3 {
        t_max = ((147.4 + 4.0 * m as f64 * t_max.max(1.0).ln()) / alpha).sqrt();
    }
    let panels = 2 * (t_max / (4.0 * PI)).ceil().max(1.0) as usize;
    let seeds = quad::uniform_seeds(-t_max, t_max, panels);
    let f = |t: f64| {
        let base = Complex64::new(1.0, t).powf(-0.5);
        let arg = Complex64::new(-0.25 * alpha * t * t, 0.5 * t);
        base * arg.exp() * t.powi(m as i32)
    };
    quad::adaptive_complex(&f, &seeds, 1e-13, 1e-10, 8000)
}

fn spread(p: &TransitionParams) -> f64 {
    p.j * p.j - 1.0
}

/// The gap s(x) - x, computed in whichever form avoids cancellation.
fn saddle_gap(x: f64, p: &TransitionParams) -> f64 {
    let c = spread(p);
    let u = x + p.b * c;
    let root = (u * u + 4.0 * c).sqrt();
    if u <= 0.0 {
        0.5 * (root - u)
    } else {
        2.0 * c / (root + u)
    }
}

/// Saddle branch s(x) = (x - B(J^2-1) + sqrt((x + B(J^2-1))^2 + 4(J^2-1)))/2.
/// Satisfies B + s/(J^2-1) = 1/(s-x) with s(x) > x.
pub fn s_of_x(x: f64, p: &TransitionParams) -> f64 {
    x + saddle_gap(x, p)
}

/// Window correction
/// Q(x) = s/(2(s-x)) - s^2/(4(J^2-1)) + log(s-x)/2 + log I((s-x)^2/(J^2-1)).
pub fn q_of_x(x: f64, p: &TransitionParams) -> Result<f64> {
    let c = spread(p);
    let d = saddle_gap(x, p);
    let s = x + d;
    let alpha = d * d / c;
    let iv = i_alpha(alpha)?;
    Ok(s / (2.0 * d) - s * s / (4.0 * c) + 0.5 * d.ln() + iv.ln())
}

/// Chebyshev cosine coefficient
/// tau_ell(phi) = (1/2pi) int_{-pi}^{pi} phi(2 cos theta) cos(ell theta) d theta,
/// by the trapezoidal rule with doubling (spectrally accurate for smooth phi).
pub fn tau_ell<F: Fn(f64) -> f64>(phi: &F, ell: u32) -> Result<f64> {
    let eval = |m: usize| -> Result<f64> {
        // even integrand: trapezoid over [0, pi] with half end weights
        let mut sum = 0.0;
        for k in 0..=m {
            let theta = PI * k as f64 / m as f64;
            let v = phi(2.0 * theta.cos());
            if !v.is_finite() {
                return Err(Error::NonFinite("test function on [-2,2]"));
            }
            let w = if k == 0 || k == m { 0.5 } else { 1.0 };
            sum += w * v * (ell as f64 * theta).cos();
        }
        Ok(sum / m as f64)
    };
    let mut m = 64usize.max(4 * (ell as usize + 1));
    let mut prev = eval(m)?;
    while m <= 1 << 20 {
        m *= 2;
        let next = eval(m)?;
        if (next - prev).abs() < 1e-12 {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NoConvergence {
        what: "chebyshev coefficient",
        detail: format!("coefficient {ell} unresolved at {m} nodes"),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StatisticKind {
    /// All eigenvalues enter the statistic.
    Full,
    /// The top eigenvalue is excluded.
    Partial,
}

/// Gaussian limit of the (centered) linear statistic.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CltParams {
    pub mean: f64,
    pub variance: f64,
    pub kind: StatisticKind,
}

/// Mean and variance of the limiting Gaussian for the linear statistic of
/// phi. The partial mean drops the phi(J + 1/J) spike term; the variance is
/// the same for both kinds.
pub fn clt_params<F: Fn(f64) -> f64>(
    phi: &F,
    kind: StatisticKind,
    j: f64,
    moments: Moments,
) -> Result<CltParams> {
    if !(j.is_finite() && j > 1.0) {
        return Err(Error::domain(format!("coupling j = {j} must exceed 1")));
    }
    let tau: Vec<f64> = (0..=4).map(|l| tau_ell(phi, l)).collect::<Result<_>>()?;
    let mut mean_series = 0.0;
    let mut var_series = 0.0;
    let mut below = 0u32;
    let mut ell = 0u32;
    loop {
        ell += 1;
        if ell > 200 {
            return Err(Error::NoConvergence {
                what: "linear statistic series",
                detail: "coefficients still significant at ell = 200".to_string(),
            });
        }
        let t = if ell <= 4 { tau[ell as usize] } else { tau_ell(phi, ell)? };
        let jt = j.powi(-(ell as i32)) * t;
        mean_series -= jt;
        var_series += 2.0 * ell as f64 * t * t;
        if jt.abs() < 1e-14 && ell as f64 * t * t < 1e-14 {
            below += 1;
            // odd and even coefficients can vanish in alternation
            if below >= 2 && ell >= 5 {
                break;
            }
        } else {
            below = 0;
        }
    }
    let edge = 0.25 * (phi(2.0) + phi(-2.0));
    if !edge.is_finite() {
        return Err(Error::NonFinite("test function at the spectral edges"));
    }
    let mut mean = edge - 1.5 * tau[0]
        + (moments.w2 - 2.0) * tau[2]
        + (moments.w4 - 3.0) * tau[4]
        + mean_series;
    if kind == StatisticKind::Full {
        let spike = phi(j + 1.0 / j);
        if !spike.is_finite() {
            return Err(Error::NonFinite("test function at the spike location"));
        }
        mean += spike;
    }
    let variance = (moments.w2 - 2.0) * tau[1] * tau[1]
        + 2.0 * (moments.w4 - 3.0) * tau[2] * tau[2]
        + var_series;
    Ok(CltParams { mean, variance, kind })
}

/// Parameters of the correlated Gaussian pair driving the transition limit.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BivariateGaussianLaw {
    pub mean1: f64,
    pub mean2: f64,
    pub var1: f64,
    pub var2: f64,
    pub cov: f64,
}

impl BivariateGaussianLaw {
    pub fn validate(&self) -> Result<()> {
        if self.var1 < 0.0 || self.var2 < 0.0 {
            return Err(Error::domain("negative variance in bivariate law"));
        }
        if self.var1 * self.var2 - self.cov * self.cov < -1e-12 {
            return Err(Error::domain(format!(
                "bivariate law not positive semidefinite: var1 {} var2 {} cov {}",
                self.var1, self.var2, self.cov
            )));
        }
        Ok(())
    }
}

/// The limit law of the centered, N-scaled free energy in the window:
/// G1 + Q(G2) where (G1, G2) is the bivariate Gaussian returned here.
/// Does not depend on the window parameter B.
pub fn transition_law(p: &TransitionParams, moments: Moments) -> BivariateGaussianLaw {
    let j = p.j;
    let j2 = j * j;
    let moment_shift = (moments.w2 - 2.0) / (4.0 * j2) + (moments.w4 - 3.0) / (8.0 * j2 * j2);
    BivariateGaussianLaw {
        mean1: 0.25 * (j2 - 1.0).ln() + moment_shift + (1.0 / (2.0 * PI.sqrt() * j)).ln(),
        mean2: moments.w3 * (1.0 / j2 - 1.0 / (j2 * j2)),
        var1: -0.5 * (1.0 - 1.0 / j2).ln() + moment_shift,
        var2: 2.0 * (1.0 - 1.0 / j2),
        cov: moments.w3 * (1.0 / j2 - 1.0 / (j2 * j2)) / 2.0,
    }
}

/// Draw n samples of G1 + Q(G2). Each sample has its own counter stream,
/// so the output is deterministic in (seed, index) and invariant under
/// parallel or partial evaluation.
pub fn sample_transition_limit(
    p: &TransitionParams,
    law: &BivariateGaussianLaw,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    law.validate()?;
    let sd2 = law.var2.sqrt();
    let (slope, resid_sd) = if law.var2 > 0.0 {
        (law.cov / law.var2, (law.var1 - law.cov * law.cov / law.var2).max(0.0).sqrt())
    } else {
        (0.0, law.var1.sqrt())
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut stream = Stream::for_cell(seed, domain::LIMIT_SAMPLE, i as u64, 0);
        let z2 = stream.next_normal();
        let z1 = stream.next_normal();
        let g2 = law.mean2 + sd2 * z2;
        let g1 = law.mean1 + slope * (g2 - law.mean2) + resid_sd * z1;
        out.push(g1 + q_of_x(g2, p)?);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    SpinGlass,
    Paramagnetic,
    Ferromagnetic,
}

/// Limiting free energy (per site, in the large-N limit) and the regime
/// label. The regime is decided by which of {1, 1/(2 beta), J} is largest;
/// boundaries go to the lower-temperature side (ferromagnetic on 2 beta J = 1,
/// spin glass on beta = 1/2).
pub fn limiting_free_energy(beta: f64, j: f64) -> Result<(f64, Regime)> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::domain(format!("inverse temperature beta = {beta} must be positive")));
    }
    if !(j.is_finite() && j > 0.0) {
        return Err(Error::domain(format!("coupling j = {j} must be positive")));
    }
    let two_beta = 2.0 * beta;
    if j > 1.0 && two_beta * j >= 1.0 {
        let value = beta * (j + 1.0 / j) - 0.5 * (two_beta * j).ln() - 1.0 / (4.0 * j * j) - 0.5;
        return Ok((value, Regime::Ferromagnetic));
    }
    if beta < 0.5 && two_beta * j < 1.0 {
        return Ok((beta * beta, Regime::Paramagnetic));
    }
    // the ferromagnetic expression at the effective coupling 1
    Ok((two_beta - 0.5 * two_beta.ln() - 0.75, Regime::SpinGlass))
}

/// Deterministic centering of F_N in the window:
/// 1/(4J^2) + B/(2J sqrt(N)) + log(N)/(4N) + B^2 J^2/(4N).
pub fn transitional_centering(n: usize, p: &TransitionParams) -> f64 {
    let nf = n as f64;
    let j = p.j;
    1.0 / (4.0 * j * j)
        + p.b / (2.0 * j * nf.sqrt())
        + nf.ln() / (4.0 * nf)
        + p.b * p.b * j * j / (4.0 * nf)
}

/// Deterministic leading part of the transitional free energy:
/// beta(J + 1/J) - 1/2 - log(2 beta)/2 + (log(N)/4 + log(beta/sqrt(pi)))/N.
pub fn tilde_f_transitional(n: usize, beta: f64, j: f64) -> Result<f64> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::domain(format!("inverse temperature beta = {beta} must be positive")));
    }
    if !(j.is_finite() && j > 1.0) {
        return Err(Error::domain(format!("coupling j = {j} must exceed 1")));
    }
    if n == 0 {
        return Err(Error::domain("system size must be at least 1"));
    }
    let nf = n as f64;
    Ok(beta * (j + 1.0 / j) - 0.5 - 0.5 * (2.0 * beta).ln()
        + (0.25 * nf.ln() + (beta / PI.sqrt()).ln()) / nf)
}
