use oddsmix::data::{Dataset, LeagueConfig};
use oddsmix::mcmc::{run_sampler, SamplerConfig};
use oddsmix::model::{Model, PriorConfig};
use oddsmix::odds::ProbMethod;
use oddsmix::skellam::three_way_probs;
use oddsmix::synth::{generate, SynthConfig};

fn synthetic_files(dir: &std::path::Path, seed: u64) -> Vec<(String, std::path::PathBuf)> {
    let league = generate(&SynthConfig::default(), seed);
    league
        .write_csvs(dir)
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(s, p)| (format!("{}", 2000 + s), p))
        .collect()
}

#[test]
fn attached_rates_reproduce_their_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let files = synthetic_files(dir.path(), 1);
    for method in [ProbMethod::Basic, ProbMethod::Shin] {
        let (ds, stats) = Dataset::from_files(&files, &LeagueConfig::default(), method).unwrap();
        assert_eq!(stats.attached, stats.quotes);
        for m in &ds.matches {
            for (p, r) in m.probs.iter().zip(&m.implicit) {
                let (Some(p), Some(r)) = (p, r) else { continue };
                for (a, b) in three_way_probs(*r).as_array().iter().zip(p.as_array()) {
                    assert!((a - b).abs() < 1e-5);
                }
            }
        }
    }
}

#[test]
fn loading_twice_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let files = synthetic_files(dir.path(), 2);
    let (a, _) = Dataset::from_files(&files, &LeagueConfig::default(), ProbMethod::Shin).unwrap();
    let (b, _) = Dataset::from_files(&files, &LeagueConfig::default(), ProbMethod::Shin).unwrap();
    let (mut wa, mut wb) = (Vec::new(), Vec::new());
    a.write_augmented(&mut wa).unwrap();
    b.write_augmented(&mut wb).unwrap();
    assert_eq!(wa, wb);
    for (i, name) in a.teams.names().iter().enumerate() {
        assert_eq!(a.teams.get(name), Some(i));
    }
}

#[test]
fn synthetic_fit_has_healthy_acceptance() {
    let league = generate(&SynthConfig::default(), 7);
    let model = Model::new(PriorConfig::default());
    let config = SamplerConfig { n_iterations: 2500, n_burnin: 1000, n_chains: 2, ..SamplerConfig::default() };
    let draws = run_sampler(&league.data, &model, &config).unwrap();
    for a in draws.acceptance() {
        println!("{} {:.3}", a.family, a.rate());
        assert!((0.15..=0.6).contains(&a.rate()), "{} acceptance {}", a.family, a.rate());
    }
    for i in 0..draws.total_draws() {
        assert!(draws.params(i).satisfies_constraints(1e-10));
    }
}
