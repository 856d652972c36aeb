//! Rank-normalized split-R̂ and bulk effective sample size.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::numeric::std_normal_quantile;

/// R̂ above this value flags a scalar as not converged.
pub const RHAT_FLAG: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarDiagnostics {
    /// `None` when the draws have zero variance.
    pub rhat: Option<f64>,
    pub ess_bulk: Option<f64>,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub names: Vec<String>,
    pub scalars: Vec<ScalarDiagnostics>,
    pub n_chains: usize,
    pub draws_per_chain: usize,
    /// Number of half-chains the statistics were computed from.
    pub n_splits: usize,
}

impl DiagnosticsReport {
    pub fn max_rhat(&self) -> Option<f64> {
        self.scalars.iter().filter_map(|s| s.rhat).fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }

    pub fn min_ess(&self) -> Option<f64> {
        self.scalars.iter().filter_map(|s| s.ess_bulk).fold(None, |acc, e| Some(acc.map_or(e, |a: f64| a.min(e))))
    }

    /// Names whose R̂ exceeds `threshold`.
    pub fn flagged(&self, threshold: f64) -> Vec<&str> {
        self.names
            .iter()
            .zip(&self.scalars)
            .filter(|(_, s)| s.rhat.is_some_and(|r| r > threshold))
            .map(|(n, _)| n.as_str())
            .collect()
    }

    /// Names whose diagnostics are undefined (constant draws).
    pub fn undefined(&self) -> Vec<&str> {
        self.names
            .iter()
            .zip(&self.scalars)
            .filter(|(_, s)| s.rhat.is_none())
            .map(|(n, _)| n.as_str())
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        let mut out = String::from("parameter\tmean\tsd\trhat\tess_bulk\tflag\n");
        for (name, s) in self.names.iter().zip(&self.scalars) {
            let flag = match s.rhat {
                None => "undefined",
                Some(r) if r > RHAT_FLAG => "rhat",
                _ => "",
            };
            out.push_str(&format!("{name}\t{}\t{}\t{}\t{}\t{flag}\n", s.mean, s.sd, fmt(s.rhat), fmt(s.ess_bulk)));
        }
        out
    }
}

/// Splits each chain into two halves, dropping the middle draw of odd lengths.
fn split_chains(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

/// Replaces every draw by the normal score of its pooled fractional rank.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = chains.iter().map(Vec::len).sum();
    let mut order: Vec<(f64, usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(c, v)| v.iter().enumerate().map(move |(i, &x)| (x, c, i)))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && order[j + 1].0 == order[i].0 {
            j += 1;
        }
        // Average rank (1-based) of the tie group.
        let rank = 0.5 * ((i + 1) + (j + 1)) as f64;
        let z = std_normal_quantile((rank - 0.375) / (total as f64 + 0.25));
        for &(_, c, k) in &order[i..=j] {
            out[c][k] = z;
        }
        i = j + 1;
    }
    out
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Classic potential scale reduction on already split chains.
fn rhat_basic(chains: &[Vec<f64>]) -> Option<f64> {
    let n = chains.first()?.len();
    if n < 2 || chains.len() < 2 {
        return None;
    }
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(c)).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / stats.len() as f64;
    if !(w > 0.0) {
        return None;
    }
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let (_, var_means) = mean_var(&means);
    let b = n as f64 * var_means;
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    Some((var_plus / w).sqrt())
}

fn autocovariance(x: &[f64], planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = x.len();
    let m = x.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - m, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    buf[..n].iter().map(|c| c.re / (size as f64 * n as f64)).collect()
}

/// Effective sample size with Geyer's initial monotone sequence.
fn ess_basic(chains: &[Vec<f64>]) -> Option<f64> {
    let m = chains.len();
    let n = chains.first()?.len();
    if n < 4 {
        return None;
    }
    let mut planner = FftPlanner::new();
    let acov: Vec<Vec<f64>> = chains.iter().map(|c| autocovariance(c, &mut planner)).collect();
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let w = acov.iter().map(|a| a[0] * n as f64 / (n as f64 - 1.0)).sum::<f64>() / m as f64;
    let var_plus = if m > 1 {
        let (_, var_means) = mean_var(&means);
        w * (n as f64 - 1.0) / n as f64 + var_means
    } else {
        w * (n as f64 - 1.0) / n as f64
    };
    if !(var_plus > 0.0) {
        return None;
    }
    let rho = |t: usize| -> f64 {
        let mean_acov = acov.iter().map(|a| a[t]).sum::<f64>() / m as f64;
        1.0 - (w - mean_acov) / var_plus
    };

    let mut rho_hat = vec![0.0; n];
    rho_hat[0] = 1.0;
    rho_hat[1] = rho(1);
    let mut t = 1;
    // Initial positive sequence.
    while t + 2 < n {
        let even = rho(t + 1);
        let odd = rho(t + 2);
        if even + odd < 0.0 {
            break;
        }
        rho_hat[t + 1] = even;
        rho_hat[t + 2] = odd;
        t += 2;
    }
    let max_t = t;
    // Initial monotone sequence.
    let mut k = 1;
    while k + 2 <= max_t {
        let prev = rho_hat[k - 1] + rho_hat[k];
        let cur = rho_hat[k + 1] + rho_hat[k + 2];
        if cur > prev {
            rho_hat[k + 1] = prev / 2.0;
            rho_hat[k + 2] = prev / 2.0;
        }
        k += 2;
    }
    let sum: f64 = rho_hat[..=max_t].iter().sum();
    let tau = (-1.0 + 2.0 * sum).max(1.0 / (m as f64 * n as f64).log10().max(1.0));
    Some(m as f64 * n as f64 / tau)
}

fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| a.total_cmp(b));
    crate::numeric::quantile_sorted(&v, 0.5)
}

/// Diagnostics of one scalar given its per-chain draw sequences.
pub fn scalar_diagnostics(chains: &[Vec<f64>]) -> ScalarDiagnostics {
    let all: Vec<f64> = chains.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let sd = (all.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let constant = all.iter().all(|x| *x == all[0]);
    if constant || !sd.is_finite() {
        return ScalarDiagnostics { rhat: None, ess_bulk: None, mean, sd };
    }
    let split = split_chains(chains);
    let z = rank_normalize(&split);
    let rhat_bulk = rhat_basic(&z);
    let med = median(all.iter().copied());
    let folded: Vec<Vec<f64>> = split.iter().map(|c| c.iter().map(|x| (x - med).abs()).collect()).collect();
    let rhat_tail = rhat_basic(&rank_normalize(&folded));
    let rhat = match (rhat_bulk, rhat_tail) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    };
    ScalarDiagnostics { rhat, ess_bulk: ess_basic(&z), mean, sd }
}

/// Diagnostics for every column of row-major draws, one matrix per chain.
pub fn diagnostics(names: &[String], chains: &[&[f64]], dim: usize) -> DiagnosticsReport {
    use rayon::prelude::*;
    let draws_per_chain = chains.first().map_or(0, |c| c.len() / dim.max(1));
    let scalars = (0..dim)
        .into_par_iter()
        .map(|j| {
            let per_chain: Vec<Vec<f64>> =
                chains.iter().map(|c| c.chunks_exact(dim).map(|row| row[j]).collect()).collect();
            scalar_diagnostics(&per_chain)
        })
        .collect();
    DiagnosticsReport {
        names: names.to_vec(),
        scalars,
        n_chains: chains.len(),
        draws_per_chain,
        n_splits: 2 * chains.len(),
    }
}
