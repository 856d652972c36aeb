//! Adaptive random-walk Metropolis-within-Gibbs sampler.
//!
//! Each sweep visits every [`Block`] of the model once and proposes a joint
//! Gaussian move of the block's unconstrained coordinates. During burn-in the
//! proposal of every block adapts: a per-coordinate shape follows the running
//! posterior spread and a scalar step size follows a Robbins-Monro recursion
//! toward the target acceptance rate. Both freeze when burn-in ends.

pub mod diagnostics;

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Block, Model, ModelData, ModelParameters, ParamLayout, Structure};
use crate::numeric::mean;

pub use diagnostics::{diagnostics, DiagnosticsReport, ScalarDiagnostics, RHAT_FLAG};

const DRAWS_MAGIC: &str = "#oddsmix-draws";
const DRAWS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum McmcError {
    #[error("chain {chain}: initial state has non-finite log density ({value})")]
    NonFiniteStart { chain: usize, value: f64 },
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed draws file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// Blocks in fixed order every sweep.
    #[default]
    Systematic,
    /// Blocks in a fresh random order every sweep.
    Shuffled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_iterations: usize,
    pub n_burnin: usize,
    pub n_chains: usize,
    pub seed: u64,
    /// Keep every `thin`-th post burn-in draw.
    pub thin: usize,
    /// Iterations between proposal-shape updates during burn-in.
    pub adapt_window: usize,
    pub target_accept: f64,
    pub schedule: Schedule,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_iterations: 5000,
            n_burnin: 1000,
            n_chains: 4,
            seed: 20170901,
            thin: 1,
            adapt_window: 50,
            target_accept: 0.35,
            schedule: Schedule::Systematic,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), McmcError> {
        if self.n_burnin >= self.n_iterations {
            return Err(McmcError::Config(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.n_burnin, self.n_iterations
            )));
        }
        if self.n_chains == 0 {
            return Err(McmcError::Config("at least one chain is required".into()));
        }
        if self.thin == 0 || self.adapt_window == 0 {
            return Err(McmcError::Config("thin and adapt_window must be positive".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(McmcError::Config("target acceptance must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn retained_per_chain(&self) -> usize {
        (self.n_iterations - self.n_burnin).div_ceil(self.thin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockAcceptance {
    pub family: String,
    pub accepted: u64,
    pub proposed: u64,
}

impl BlockAcceptance {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    pub chain_id: usize,
    /// Row-major `retained × layout.len()` natural-scale values.
    pub values: Vec<f64>,
    /// Post burn-in acceptance, aggregated by block family.
    pub acceptance: Vec<BlockAcceptance>,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub layout: ParamLayout,
    pub config: SamplerConfig,
    pub chains: Vec<ChainDraws>,
}

impl PosteriorDraws {
    pub fn dim(&self) -> usize {
        self.layout.len()
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn draws_per_chain(&self) -> usize {
        self.chains.first().map_or(0, |c| c.values.len() / self.dim())
    }

    pub fn total_draws(&self) -> usize {
        self.chains.iter().map(|c| c.values.len() / self.dim()).sum()
    }

    /// Draw `i` counting across chains in chain order.
    pub fn row(&self, i: usize) -> &[f64] {
        let per = self.draws_per_chain();
        let dim = self.dim();
        let c = &self.chains[i / per];
        let k = i % per;
        &c.values[k * dim..(k + 1) * dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        let dim = self.dim();
        self.chains.iter().flat_map(move |c| c.values.chunks_exact(dim))
    }

    pub fn params(&self, i: usize) -> ModelParameters {
        self.layout.unflatten(self.row(i)).expect("row length matches layout")
    }

    /// Every `step`-th draw across all chains.
    pub fn thinned_params(&self, step: usize) -> Vec<ModelParameters> {
        (0..self.total_draws()).step_by(step.max(1)).map(|i| self.params(i)).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.layout.index_of(name).map(|j| self.column(j))
    }

    pub fn diagnostics(&self) -> DiagnosticsReport {
        let chains: Vec<&[f64]> = self.chains.iter().map(|c| c.values.as_slice()).collect();
        diagnostics(&self.layout.names(), &chains, self.dim())
    }

    /// Acceptance rates aggregated over chains, by block family.
    pub fn acceptance(&self) -> Vec<BlockAcceptance> {
        let mut out: Vec<BlockAcceptance> = Vec::new();
        for c in &self.chains {
            for a in &c.acceptance {
                match out.iter_mut().find(|o| o.family == a.family) {
                    Some(o) => {
                        o.accepted += a.accepted;
                        o.proposed += a.proposed;
                    }
                    None => out.push(a.clone()),
                }
            }
        }
        out
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<(), McmcError> {
        let s = &self.layout.structure;
        let c = &self.config;
        let mut out = String::new();
        writeln!(out, "{DRAWS_MAGIC}\t{DRAWS_VERSION}").unwrap();
        writeln!(
            out,
            "#structure\tteams={}\tseasons={}\tmatches={}\taway_intercept={}",
            s.n_teams, s.n_seasons, s.n_matches, s.away_intercept
        )
        .unwrap();
        writeln!(
            out,
            "#sampler\titerations={}\tburnin={}\tthin={}\tchains={}\tseed={}",
            c.n_iterations, c.n_burnin, c.thin, c.n_chains, c.seed
        )
        .unwrap();
        writeln!(out, "chain\tdraw\t{}", self.layout.names().join("\t")).unwrap();
        w.write_all(out.as_bytes())?;
        for chain in &self.chains {
            for (k, row) in chain.values.chunks_exact(self.dim()).enumerate() {
                let mut line = format!("{}\t{}", chain.chain_id + 1, k + 1);
                for v in row {
                    write!(line, "\t{v}").unwrap();
                }
                line.push('\n');
                w.write_all(line.as_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_tsv<R: Read>(reader: R) -> Result<Self, McmcError> {
        let fmt = |m: &str| McmcError::Format(m.to_string());
        let mut lines = BufReader::new(reader).lines();
        let mut next = || -> Result<String, McmcError> { lines.next().ok_or_else(|| fmt("truncated header"))?.map_err(McmcError::from) };
        let magic = next()?;
        if magic != format!("{DRAWS_MAGIC}\t{DRAWS_VERSION}") {
            return Err(fmt("not a draws file or unsupported version"));
        }
        let kv = |line: &str, tag: &str| -> Result<std::collections::HashMap<String, String>, McmcError> {
            let mut fields = line.split('\t');
            if fields.next() != Some(tag) {
                return Err(McmcError::Format(format!("expected `{tag}` line")));
            }
            Ok(fields
                .filter_map(|f| f.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
                .collect())
        };
        let num = |m: &std::collections::HashMap<String, String>, k: &str| -> Result<u64, McmcError> {
            m.get(k).and_then(|v| v.parse().ok()).ok_or_else(|| McmcError::Format(format!("missing `{k}`")))
        };
        let st = kv(&next()?, "#structure")?;
        let structure = Structure {
            n_teams: num(&st, "teams")? as usize,
            n_seasons: num(&st, "seasons")? as usize,
            n_matches: num(&st, "matches")? as usize,
            away_intercept: st.get("away_intercept").map(String::as_str) == Some("true"),
        };
        let sm = kv(&next()?, "#sampler")?;
        let config = SamplerConfig {
            n_iterations: num(&sm, "iterations")? as usize,
            n_burnin: num(&sm, "burnin")? as usize,
            thin: num(&sm, "thin")? as usize,
            n_chains: num(&sm, "chains")? as usize,
            seed: num(&sm, "seed")?,
            ..SamplerConfig::default()
        };
        let layout = ParamLayout::new(structure);
        let header = next()?;
        let expected = format!("chain\tdraw\t{}", layout.names().join("\t"));
        if header != expected {
            return Err(fmt("column header does not match the declared structure"));
        }
        let dim = layout.len();
        let mut chains: Vec<ChainDraws> = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let chain: usize = fields
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| McmcError::Format(format!("row {}: bad chain id", i + 1)))?;
            fields.next();
            let values: Vec<f64> = fields
                .map(|f| f.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| McmcError::Format(format!("row {}: bad number", i + 1)))?;
            if values.len() != dim {
                return Err(McmcError::Format(format!("row {}: expected {dim} values", i + 1)));
            }
            if chains.last().map(|c| c.chain_id + 1) != Some(chain) {
                chains.push(ChainDraws { chain_id: chain - 1, values: Vec::new(), acceptance: Vec::new(), elapsed_secs: 0.0 });
            }
            chains.last_mut().unwrap().values.extend(values);
        }
        Ok(PosteriorDraws { layout, config, chains })
    }
}

fn initial_step(block: Block, dim: usize) -> Vec<f64> {
    match block {
        Block::Globals => vec![0.05; dim],
        Block::Scales => vec![0.3; dim],
        Block::Attack(_) | Block::Defence(_) => vec![0.5; dim],
        Block::HomeSide(_) | Block::AwaySide(_) if dim == 1 => vec![0.05],
        Block::HomeSide(_) | Block::AwaySide(_) => vec![1.5, 0.05],
        Block::Bookmaker => vec![0.05; dim],
        Block::AttackSpread | Block::DefenceSpread => vec![0.2; dim],
    }
}

/// Proposal state of one block.
#[derive(Debug, Clone)]
struct BlockProposal {
    block: Block,
    shape: Vec<f64>,
    log_scale: f64,
    // Welford accumulators of the unconstrained coordinates during burn-in.
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    accepted: u64,
    proposed: u64,
}

impl BlockProposal {
    fn new(block: Block, dim: usize) -> Self {
        Self {
            block,
            shape: initial_step(block, dim),
            log_scale: 0.0,
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            accepted: 0,
            proposed: 0,
        }
    }

    fn observe(&mut self, u: &[f64]) {
        self.count += 1.0;
        for ((m, s), x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(u) {
            let d = x - *m;
            *m += d / self.count;
            *s += d * (x - *m);
        }
    }

    fn reshape(&mut self) {
        if self.count < 20.0 {
            return;
        }
        let d = self.shape.len() as f64;
        let optimal = 2.38 / d.sqrt();
        for (sh, m2) in self.shape.iter_mut().zip(&self.m2) {
            let sd = (m2 / (self.count - 1.0)).sqrt();
            if sd.is_finite() && sd > 1e-6 {
                *sh = optimal * sd;
            }
        }
    }
}

/// Data-informed starting point with effects at zero.
pub fn initial_state(data: &ModelData, model: &Model) -> ModelParameters {
    let s = data.structure(model.away_intercept);
    let mut p = ModelParameters::neutral(&s);
    let n = data.matches.len() as f64;
    let (mut home, mut away) = (0.0, 0.0);
    for m in &data.matches {
        home += m.goals_home as f64;
        away += m.goals_away as f64;
    }
    if home > 0.0 && away > 0.0 {
        p.mu = (home / away).ln();
        if model.away_intercept {
            p.intercept = (away / n).ln();
        }
    }
    p.sigma_att = 0.5;
    p.sigma_def = 0.5;
    let fallback = |total: f64| if total > 0.0 { total / n } else { 1.0 };
    let mut spread = Vec::new();
    for (m, obs) in data.matches.iter().enumerate() {
        for (implicit, lambda, goals_fallback) in [
            (&obs.implicit_home, &mut p.lambda_home[m], fallback(home)),
            (&obs.implicit_away, &mut p.lambda_away[m], fallback(away)),
        ] {
            *lambda = if implicit.is_empty() { goals_fallback } else { mean(implicit) };
            spread.extend(implicit.iter().map(|x| x - *lambda));
        }
    }
    p.alpha = [
        if n > 0.0 { mean(&p.lambda_home) } else { 1.0 },
        if n > 0.0 { mean(&p.lambda_away) } else { 1.0 },
    ];
    let tau = if spread.len() > 1 {
        (spread.iter().map(|d| d * d).sum::<f64>() / spread.len() as f64).sqrt().max(0.02)
    } else {
        0.5
    };
    p.tau = [tau, tau];
    p
}

fn jitter(p: &mut ModelParameters, rng: &mut ChaCha8Rng) {
    let mut noise = |scale: f64| -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    };
    p.mu += noise(0.05);
    p.mu_att += noise(0.05);
    p.mu_def += noise(0.05);
    p.sigma_att *= noise(0.2).exp();
    p.sigma_def *= noise(0.2).exp();
    for season in p.att.iter_mut().chain(p.def.iter_mut()) {
        season.iter_mut().for_each(|x| *x += noise(0.05));
    }
    p.center_effects();
    p.alpha = p.alpha.map(|a| a * noise(0.05).exp());
    p.tau = p.tau.map(|t| t * noise(0.1).exp());
}

pub fn chain_rng(seed: u64, chain_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain_id as u64 + 1);
    rng
}

/// Runs one chain from the data-informed start, jittered per chain.
pub fn run_chain(
    data: &ModelData,
    model: &Model,
    config: &SamplerConfig,
    chain_id: usize,
) -> Result<ChainDraws, McmcError> {
    let mut rng = chain_rng(config.seed, chain_id);
    let mut start = initial_state(data, model);
    jitter(&mut start, &mut rng);
    run_chain_from(data, model, config, chain_id, start, &mut rng)
}

pub fn run_chain_from(
    data: &ModelData,
    model: &Model,
    config: &SamplerConfig,
    chain_id: usize,
    start: ModelParameters,
    rng: &mut ChaCha8Rng,
) -> Result<ChainDraws, McmcError> {
    run_blocks(data, model, config, chain_id, start, &model.blocks(data), rng)
}

/// Like [`run_chain_from`] but only updates `blocks`; everything else stays
/// at its starting value apart from the prior-only drift and weight refreshes.
pub fn run_blocks(
    data: &ModelData,
    model: &Model,
    config: &SamplerConfig,
    chain_id: usize,
    start: ModelParameters,
    blocks: &[Block],
    rng: &mut ChaCha8Rng,
) -> Result<ChainDraws, McmcError> {
    config.validate()?;
    let started = Instant::now();
    let lp0 = model.unconstrained_log_density(&start, data);
    if !lp0.is_finite() {
        return Err(McmcError::NonFiniteStart { chain: chain_id, value: lp0 });
    }
    let layout = ParamLayout::new(data.structure(model.away_intercept));
    let mut state = start;
    let mut proposals: Vec<BlockProposal> = blocks
        .iter()
        .map(|&b| BlockProposal::new(b, model.block_dim(data, b)))
        .filter(|p| !p.shape.is_empty())
        .collect();
    let mut order: Vec<usize> = (0..proposals.len()).collect();

    let mut current = Vec::new();
    let mut proposal = Vec::new();
    let mut row = Vec::new();
    let mut values = Vec::with_capacity(config.retained_per_chain() * layout.len());
    let reshape_until = config.n_burnin * 4 / 5;

    for iter in 0..config.n_iterations {
        let burnin = iter < config.n_burnin;
        if config.schedule == Schedule::Shuffled {
            order.shuffle(rng);
        }
        for &bi in &order {
            let bp = &mut proposals[bi];
            model.block_get(&state, bp.block, &mut current);
            let lp_old = model.block_log_density(&state, data, bp.block);
            let scale = bp.log_scale.exp();
            proposal.clear();
            for (x, s) in current.iter().zip(&bp.shape) {
                let z: f64 = StandardNormal.sample(rng);
                proposal.push(x + scale * s * z);
            }
            // Effect and spread moves touch many coordinates; undo them from
            // a copy rather than by the inverse map.
            let snapshot = matches!(
                bp.block,
                Block::AttackSpread | Block::DefenceSpread | Block::Attack(_) | Block::Defence(_)
            )
            .then(|| {
                (state.att.clone(), state.def.clone(), state.mu_att, state.mu_def, state.sigma_att, state.sigma_def)
            });
            model.block_set(&mut state, bp.block, &proposal);
            let lp_new = model.block_log_density(&state, data, bp.block);
            let log_ratio = lp_new - lp_old;
            let accept = log_ratio.is_finite() && (log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio);
            if accept {
                std::mem::swap(&mut current, &mut proposal);
            } else if let Some((att, def, mu_att, mu_def, sigma_att, sigma_def)) = snapshot {
                state.att = att;
                state.def = def;
                state.mu_att = mu_att;
                state.mu_def = mu_def;
                state.sigma_att = sigma_att;
                state.sigma_def = sigma_def;
            } else {
                model.block_set(&mut state, bp.block, &current);
            }
            if burnin {
                let accept_prob = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
                let gain = 1.0 / ((iter + 1) as f64).powf(0.6);
                bp.log_scale += gain * (accept_prob - config.target_accept);
                bp.observe(&current);
            } else {
                bp.proposed += 1;
                bp.accepted += accept as u64;
            }
        }
        model.draw_drifts(&mut state, rng);
        if model.collapsed() {
            model.draw_weights(&mut state, data, rng);
        }
        if burnin && iter + 1 < reshape_until && (iter + 1) % config.adapt_window == 0 {
            for bp in &mut proposals {
                bp.reshape();
            }
        }
        if !burnin && (iter - config.n_burnin) % config.thin == 0 {
            layout.flatten(&state, &mut row);
            values.extend_from_slice(&row);
        }
    }

    let mut acceptance: Vec<BlockAcceptance> = Vec::new();
    for bp in &proposals {
        let family = bp.block.family();
        match acceptance.iter_mut().find(|a| a.family == family) {
            Some(a) => {
                a.accepted += bp.accepted;
                a.proposed += bp.proposed;
            }
            None => acceptance.push(BlockAcceptance {
                family: family.to_string(),
                accepted: bp.accepted,
                proposed: bp.proposed,
            }),
        }
    }
    Ok(ChainDraws { chain_id, values, acceptance, elapsed_secs: started.elapsed().as_secs_f64() })
}

/// Runs all chains, in parallel, each on its own random stream.
pub fn run_sampler(data: &ModelData, model: &Model, config: &SamplerConfig) -> Result<PosteriorDraws, McmcError> {
    config.validate()?;
    let chains = (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_chain(data, model, config, c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PosteriorDraws { layout: ParamLayout::new(data.structure(model.away_intercept)), config: *config, chains })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MatchObs, PriorConfig};

    fn tiny_data() -> ModelData {
        let mut matches = Vec::new();
        for season in 0..2 {
            for h in 0..3 {
                for a in 0..3 {
                    if h != a {
                        matches.push(MatchObs {
                            season,
                            home: h,
                            away: a,
                            goals_home: ((h * 2 + a + season) % 4) as u32,
                            goals_away: ((a + season) % 3) as u32,
                            implicit_home: vec![1.4, 1.5],
                            implicit_away: vec![1.0, 1.1],
                        });
                    }
                }
            }
        }
        ModelData::new(3, 2, matches)
    }

    fn quick() -> SamplerConfig {
        SamplerConfig { n_iterations: 300, n_burnin: 100, n_chains: 2, seed: 7, ..SamplerConfig::default() }
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig { n_burnin: 10, n_iterations: 10, ..quick() }.validate().is_err());
        assert!(SamplerConfig { n_chains: 0, ..quick() }.validate().is_err());
        assert_eq!(SamplerConfig::default().retained_per_chain(), 4000);
        assert_eq!(SamplerConfig { thin: 3, ..quick() }.retained_per_chain(), 67);
    }

    #[test]
    fn same_seed_same_draws() {
        let data = tiny_data();
        let model = Model::new(PriorConfig::default());
        let a = run_sampler(&data, &model, &quick()).unwrap();
        let b = run_sampler(&data, &model, &quick()).unwrap();
        assert_eq!(a.chains.len(), 2);
        for (x, y) in a.chains.iter().zip(&b.chains) {
            assert_eq!(x.values, y.values);
        }
        let c = run_sampler(&data, &model, &SamplerConfig { seed: 8, ..quick() }).unwrap();
        assert_ne!(a.chains[0].values, c.chains[0].values);
    }

    #[test]
    fn draws_respect_constraints() {
        let data = tiny_data();
        let draws = run_sampler(&data, &Model::new(PriorConfig::default()), &quick()).unwrap();
        assert_eq!(draws.draws_per_chain(), 200);
        for i in 0..draws.total_draws() {
            assert!(draws.params(i).satisfies_constraints(1e-10));
        }
    }

    #[test]
    fn non_finite_start_is_rejected() {
        let data = tiny_data();
        let model = Model::new(PriorConfig::default());
        let mut start = initial_state(&data, &model);
        start.tau = [-1.0, 1.0];
        let mut rng = chain_rng(1, 0);
        assert!(matches!(
            run_chain_from(&data, &model, &quick(), 0, start, &mut rng),
            Err(McmcError::NonFiniteStart { .. })
        ));
    }

    #[test]
    fn draws_file_round_trips() {
        let data = tiny_data();
        let draws = run_sampler(&data, &Model::new(PriorConfig::default()), &quick()).unwrap();
        let mut buf = Vec::new();
        draws.write_tsv(&mut buf).unwrap();
        let back = PosteriorDraws::read_tsv(buf.as_slice()).unwrap();
        assert_eq!(back.layout, draws.layout);
        assert_eq!(back.chains.len(), 2);
        for (x, y) in back.chains.iter().zip(&draws.chains) {
            assert_eq!(x.values, y.values);
        }
        let mut again = Vec::new();
        back.write_tsv(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn shuffled_schedule_is_deterministic() {
        let data = tiny_data();
        let model = Model::new(PriorConfig::default());
        let cfg = SamplerConfig { schedule: Schedule::Shuffled, ..quick() };
        let a = run_sampler(&data, &model, &cfg).unwrap();
        let b = run_sampler(&data, &model, &cfg).unwrap();
        assert_eq!(a.chains[1].values, b.chains[1].values);
    }
}
