//! Gaussian kernel density estimate with Silverman's bandwidth, on an
//! evenly spaced grid padded past the sample range.

pub struct DensityCurve {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub bandwidth: f64,
}

/// h = 0.9 min(sd, IQR/1.34) n^{-1/5}, grid of `points` values covering
/// the sample range plus six bandwidths on each side.
pub fn gaussian_kde(samples: &[f64], points: usize) -> Result<DensityCurve, String> {
    if samples.len() < 2 || points < 2 {
        return Err("kernel density estimate needs at least 2 samples and 2 grid points".into());
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    if !xs.iter().all(|x| x.is_finite()) {
        return Err("kernel density estimate needs finite samples".into());
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    let q = |p: f64| xs[((p * n) as usize).min(xs.len() - 1)];
    let iqr = q(0.75) - q(0.25);
    let h = 0.9 * sd.min(iqr / 1.34) * n.powf(-0.2);
    if !(h > 0.0) {
        return Err("degenerate sample: all values effectively identical".into());
    }
    let lo = xs[0] - 6.0 * h;
    let hi = xs[xs.len() - 1] + 6.0 * h;
    let step = (hi - lo) / (points - 1) as f64;
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    let grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
    let ys: Vec<f64> = grid
        .iter()
        .map(|&g| {
            // the sample is sorted; beyond 9 bandwidths the kernel is below 1e-17
            let cut = 9.0 * h;
            let start = xs.partition_point(|&x| x < g - cut);
            let mut acc = 0.0;
            for &x in &xs[start..] {
                if x > g + cut {
                    break;
                }
                let u = (g - x) / h;
                acc += (-0.5 * u * u).exp();
            }
            acc * norm
        })
        .collect();
    Ok(DensityCurve { xs: grid, ys, bandwidth: h })
}

impl DensityCurve {
    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        let step = self.xs[1] - self.xs[0];
        self.ys.windows(2).map(|w| 0.5 * (w[0] + w[1]) * step).sum()
    }

    /// Number of strict local maxima above the given fraction of the peak.
    pub fn local_maxima(&self, floor_fraction: f64) -> usize {
        let peak = self.ys.iter().cloned().fold(0.0, f64::max);
        let mut count = 0;
        for i in 1..self.ys.len() - 1 {
            if self.ys[i] > self.ys[i - 1]
                && self.ys[i] >= self.ys[i + 1]
                && self.ys[i] > floor_fraction * peak
            {
                count += 1;
            }
        }
        count
    }
}
