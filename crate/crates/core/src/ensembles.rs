//! Disorder matrix sampling: symmetric random matrices with standardized
//! off-diagonal entries plus the rank-one mean deformation
//! M = A/sqrt(N) + (J/N) 11^T.

use serde::Serialize;

use crate::matrix::SquareMatrix;
use crate::rng::{domain, Stream};
use crate::{Error, Result};

/// Law of a standardized (mean 0, variance 1) matrix entry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum EntryKind {
    Gaussian,
    Rademacher,
    /// Takes the value sqrt((1-p)/p) with probability p and
    /// -sqrt(p/(1-p)) with probability 1-p; mean 0 and variance 1 exactly.
    TwoPoint { p: f64 },
}

impl EntryKind {
    fn sample(self, stream: &mut Stream) -> f64 {
        match self {
            EntryKind::Gaussian => stream.next_normal(),
            EntryKind::Rademacher => stream.next_sign(),
            EntryKind::TwoPoint { p } => {
                if stream.next_uniform() <= p {
                    ((1.0 - p) / p).sqrt()
                } else {
                    -(p / (1.0 - p)).sqrt()
                }
            }
        }
    }
}

/// Entry law plus the diagonal variance w2. Diagonal entries are the same
/// standardized law scaled by sqrt(w2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntryDistribution {
    pub kind: EntryKind,
    pub w2: f64,
}

impl EntryDistribution {
    pub fn gaussian() -> Self {
        EntryDistribution { kind: EntryKind::Gaussian, w2: 1.0 }
    }

    /// Gaussian entries with diagonal variance 2.
    pub fn goe() -> Self {
        EntryDistribution { kind: EntryKind::Gaussian, w2: 2.0 }
    }

    pub fn rademacher() -> Self {
        EntryDistribution { kind: EntryKind::Rademacher, w2: 1.0 }
    }

    /// Off-diagonal third moment.
    pub fn w3(&self) -> f64 {
        match self.kind {
            EntryKind::Gaussian | EntryKind::Rademacher => 0.0,
            EntryKind::TwoPoint { p } => (1.0 - 2.0 * p) / (p * (1.0 - p)).sqrt(),
        }
    }

    /// Off-diagonal fourth moment.
    pub fn w4(&self) -> f64 {
        match self.kind {
            EntryKind::Gaussian => 3.0,
            EntryKind::Rademacher => 1.0,
            EntryKind::TwoPoint { p } => {
                let q = 1.0 - p;
                (q * q * q + p * p * p) / (p * q)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.w2.is_finite() || self.w2 < 0.0 {
            return Err(Error::domain(format!("diagonal variance w2 = {} invalid", self.w2)));
        }
        if let EntryKind::TwoPoint { p } = self.kind {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::domain(format!("two-point weight p = {p} outside (0,1)")));
            }
        }
        Ok(())
    }
}

/// Two-point entry law with a prescribed third moment. Solving
/// (1-2p)/sqrt(p(1-p)) = t gives p = (1 - t/sqrt(t^2+4))/2, always in (0,1).
pub fn make_two_point(w3_target: f64) -> EntryDistribution {
    let t = w3_target;
    let p = 0.5 * (1.0 - t / (t * t + 4.0).sqrt());
    EntryDistribution { kind: EntryKind::TwoPoint { p }, w2: 1.0 }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnsembleConfig {
    pub n: usize,
    pub j: f64,
    pub dist: EntryDistribution,
    pub seed: u64,
}

impl EnsembleConfig {
    pub fn new(n: usize, j: f64, dist: EntryDistribution, seed: u64) -> Self {
        EnsembleConfig { n, j, dist, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::domain("matrix size must be at least 1"));
        }
        if !self.j.is_finite() || self.j <= 0.0 {
            return Err(Error::domain(format!("coupling j = {} must be finite and positive", self.j)));
        }
        self.dist.validate()
    }

    /// The transition analytics assume a supercritical coupling.
    pub fn require_supercritical(&self) -> Result<()> {
        if self.j <= 1.0 {
            return Err(Error::domain(format!("coupling j = {} must exceed 1", self.j)));
        }
        Ok(())
    }
}

/// A sampled symmetric disorder matrix together with its config.
#[derive(Clone, Debug)]
pub struct DisorderMatrix {
    pub entries: SquareMatrix,
    pub config: EnsembleConfig,
}

/// Sample the symmetric disorder matrix. Each cell (i, j) with i <= j gets
/// its own counter stream keyed by (seed, i, j), so entries are independent
/// and the matrix is reproducible entry-by-entry regardless of evaluation
/// order or worker count.
pub fn sample_wigner(config: &EnsembleConfig) -> Result<DisorderMatrix> {
    config.validate()?;
    let n = config.n;
    let sqrt_w2 = config.dist.w2.sqrt();
    let mut a = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let mut stream = Stream::for_cell(config.seed, domain::MATRIX, i as u64, j as u64);
            let x = config.dist.kind.sample(&mut stream);
            let v = if i == j { sqrt_w2 * x } else { x };
            a.set(i, j, v);
            a.set(j, i, v);
        }
    }
    Ok(DisorderMatrix { entries: a, config: *config })
}

/// M = A/sqrt(N) + (J/N) 11^T.
pub fn assemble_deformed(a: &DisorderMatrix) -> SquareMatrix {
    let n = a.config.n;
    let scale = 1.0 / (n as f64).sqrt();
    let shift = a.config.j / n as f64;
    let mut m = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, a.entries.get(i, j) * scale + shift);
        }
    }
    m
}
