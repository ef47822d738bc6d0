//! Exact risk of three hypothesis classes on tiny 1-D instances.
//!
//! A data point is a real signal of length `L <= 8` and its unitary DFT. A
//! reconstructor `theta` is a k-space fill template: given mask `M`,
//! `h(k; M, theta) = Re IDFT(M k + (1 - M) theta)`. The initial mask is the
//! DC coefficient, so a point's low-frequency signature is `k[0]`.
//!
//! * `H1`: one (mask, theta) for every point.
//! * `H2`: one shared theta, each point routed to one of at most `J` masks.
//! * `H1.5`: each point routed to one of at most `J` (mask, theta) pairs.
//!
//! Signatures are required to be distinct, so any routing of points is a
//! function of the signature and the infima reduce to choosing the set of
//! masks (or pairs) and sending each point to its best member.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{SSIM_K1, SSIM_K2};
use crate::rng::rng_from_seed;
use crate::transforms::{dft1_unitary, idft1_unitary};

pub const MAX_LENGTH: usize = 8;
pub const MAX_POINTS: usize = 8;
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyLoss {
    SquaredError,
    /// `1 - SSIM` with a single window spanning the whole signal.
    Ssim,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyDatum {
    pub k: Vec<Complex64>,
    pub image: Vec<f64>,
}

impl ToyDatum {
    pub fn from_image(image: Vec<f64>) -> Self {
        let x: Vec<Complex64> = image.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        ToyDatum { k: dft1_unitary(&x), image }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyHypothesisInstance {
    data: Vec<ToyDatum>,
    masks: Vec<Vec<bool>>,
    thetas: Vec<Vec<Complex64>>,
    loss: ToyLoss,
    j: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RiskComparison {
    pub inf_h1: f64,
    pub inf_h2: f64,
    pub inf_h15: f64,
}

impl ToyHypothesisInstance {
    pub fn new(
        data: Vec<ToyDatum>,
        masks: Vec<Vec<bool>>,
        thetas: Vec<Vec<Complex64>>,
        loss: ToyLoss,
        j: usize,
    ) -> Result<Self> {
        if data.is_empty() || masks.is_empty() || thetas.is_empty() || j == 0 {
            return Err(Error::invalid("data, masks, thetas and J must all be nonempty"));
        }
        if data.len() > MAX_POINTS {
            return Err(Error::invalid(format!("at most {MAX_POINTS} data points")));
        }
        let len = data[0].image.len();
        if len == 0 || len > MAX_LENGTH {
            return Err(Error::invalid(format!("signal length must be in 1..={MAX_LENGTH}")));
        }
        let bad_len = data.iter().any(|d| d.k.len() != len || d.image.len() != len)
            || masks.iter().any(|m| m.len() != len)
            || thetas.iter().any(|t| t.len() != len);
        if bad_len {
            return Err(Error::invalid(format!("every vector must have length {len}")));
        }
        for a in 0..data.len() {
            for b in a + 1..data.len() {
                if (data[a].k[0] - data[b].k[0]).norm() <= 1e-12 {
                    return Err(Error::invalid(format!(
                        "data points {a} and {b} share a low-frequency signature"
                    )));
                }
            }
        }
        Ok(ToyHypothesisInstance {
            data,
            masks,
            thetas,
            loss,
            j,
        })
    }

    /// Random instance: signals uniform in `[0, 1]`, masks holding DC plus
    /// each other coefficient with probability 1/2, templates with
    /// components uniform in `[-1, 1] + i[-1, 1]`.
    pub fn random(
        length: usize,
        n_masks: usize,
        n_thetas: usize,
        n_data: usize,
        j: usize,
        loss: ToyLoss,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let data = (0..n_data)
            .map(|_| ToyDatum::from_image((0..length).map(|_| rng.random::<f64>()).collect()))
            .collect();
        let masks = (0..n_masks)
            .map(|_| (0..length).map(|l| l == 0 || rng.random_bool(0.5)).collect())
            .collect();
        let thetas = (0..n_thetas)
            .map(|_| {
                (0..length)
                    .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        Self::new(data, masks, thetas, loss, j)
    }

    pub fn data(&self) -> &[ToyDatum] {
        &self.data
    }

    pub fn masks(&self) -> &[Vec<bool>] {
        &self.masks
    }

    pub fn thetas(&self) -> &[Vec<Complex64>] {
        &self.thetas
    }

    pub fn loss(&self) -> ToyLoss {
        self.loss
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn reconstruct(&self, point: usize, mask: usize, theta: usize) -> Vec<f64> {
        let k = &self.data[point].k;
        let filled: Vec<Complex64> = k
            .iter()
            .zip(&self.masks[mask])
            .zip(&self.thetas[theta])
            .map(|((&c, &on), &t)| if on { c } else { t })
            .collect();
        idft1_unitary(&filled).into_iter().map(|c| c.re).collect()
    }

    pub fn point_loss(&self, point: usize, mask: usize, theta: usize) -> Result<f64> {
        let rec = self.reconstruct(point, mask, theta);
        let reference = &self.data[point].image;
        match self.loss {
            ToyLoss::SquaredError => Ok(reference
                .iter()
                .zip(&rec)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / reference.len() as f64),
            ToyLoss::Ssim => Ok(1.0 - global_ssim(reference, &rec)?),
        }
    }

    /// `table[i][m][t]`: loss of point `i` under mask `m` and template `t`.
    pub fn loss_table(&self) -> Result<Vec<Vec<Vec<f64>>>> {
        (0..self.data.len())
            .map(|i| {
                (0..self.masks.len())
                    .map(|m| (0..self.thetas.len()).map(|t| self.point_loss(i, m, t)).collect())
                    .collect()
            })
            .collect()
    }
}

/// SSIM with one window covering the whole signal and population moments.
pub fn global_ssim(reference: &[f64], test: &[f64]) -> Result<f64> {
    let max = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        return Err(Error::invalid("SSIM needs a positive reference maximum"));
    }
    let n = reference.len() as f64;
    let mx = reference.iter().sum::<f64>() / n;
    let my = test.iter().sum::<f64>() / n;
    let vx = reference.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>() / n;
    let vy = test.iter().map(|b| (b - my) * (b - my)).sum::<f64>() / n;
    let cxy = reference.iter().zip(test).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
    let c1 = (SSIM_K1 * max).powi(2);
    let c2 = (SSIM_K2 * max).powi(2);
    Ok(((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of subsets of an `n`-set with size in `1..=max`.
fn subsets_up_to(n: usize, max: usize) -> u128 {
    (1..=max.min(n)).map(|s| binomial(n, s)).sum()
}

/// Calls `f` on every nonempty subset of `0..n` with at most `max` elements,
/// in lexicographic order by size then members.
fn for_each_subset(n: usize, max: usize, mut f: impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if left == 0 {
            f(cur);
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, left - 1, cur, f);
            cur.pop();
        }
    }
    let mut cur = Vec::new();
    for size in 1..=max.min(n) {
        rec(0, n, size, &mut cur, &mut f);
    }
}

/// Exact infima of the mean loss over `H1`, `H2` and `H1.5`.
pub fn hypothesis_risk_compare(inst: &ToyHypothesisInstance) -> Result<RiskComparison> {
    let (nd, nm, nt) = (inst.data.len(), inst.masks.len(), inst.thetas.len());
    let size = (nm as u128 * nt as u128
        + nt as u128 * subsets_up_to(nm, inst.j)
        + subsets_up_to(nm * nt, inst.j))
        * nd as u128;
    if size > ENUMERATION_LIMIT {
        return Err(Error::InstanceTooLarge {
            size,
            limit: ENUMERATION_LIMIT,
        });
    }
    let table = inst.loss_table()?;
    let mean_best = |choices: &[(usize, usize)]| -> f64 {
        table
            .iter()
            .map(|row| choices.iter().map(|&(m, t)| row[m][t]).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / nd as f64
    };

    let mut inf_h1 = f64::INFINITY;
    for m in 0..nm {
        for t in 0..nt {
            inf_h1 = inf_h1.min(mean_best(&[(m, t)]));
        }
    }

    let mut inf_h2 = f64::INFINITY;
    for t in 0..nt {
        for_each_subset(nm, inst.j, |set| {
            let choices: Vec<(usize, usize)> = set.iter().map(|&m| (m, t)).collect();
            inf_h2 = inf_h2.min(mean_best(&choices));
        });
    }

    let mut inf_h15 = f64::INFINITY;
    for_each_subset(nm * nt, inst.j, |set| {
        let choices: Vec<(usize, usize)> = set.iter().map(|&p| (p / nt, p % nt)).collect();
        inf_h15 = inf_h15.min(mean_best(&choices));
    });

    Ok(RiskComparison {
        inf_h1,
        inf_h2,
        inf_h15,
    })
}
