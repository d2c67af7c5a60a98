use std::collections::HashSet;

use forage::sweep::{
    derive_agent_seed, read_manifest, read_results, results_to_csv, run_sweep, sample_params, write_results,
    AgentResult, Manifest, Profile, SweepConfig, SweepError, MANIFEST_FILE, RESULTS_FILE,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny(n_agents: usize, seed: u64, threads: usize) -> SweepConfig {
    let mut cfg = SweepConfig::profile(Profile::Desk);
    cfg.n_agents = n_agents;
    cfg.master_seed = seed;
    cfg.threads = threads;
    cfg.train.episodes = 2;
    cfg.train.eval_runs = 3;
    cfg
}

#[test]
fn agent_seeds_are_distinct_for_many_masters() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..10_000 {
        let master: u64 = rng.random();
        let a = derive_agent_seed(master, 0);
        let b = derive_agent_seed(master, 1);
        let c = derive_agent_seed(master, 2);
        assert!(a != b && b != c && a != c, "collision for master {master}");
    }
    let seeds: HashSet<u64> = (0..100_000).map(|id| derive_agent_seed(7, id)).collect();
    assert_eq!(seeds.len(), 100_000);
}

#[test]
fn sampled_parameters_cover_the_ranges_uniformly() {
    let mut cfg = SweepConfig::profile(Profile::Desk);
    cfg.master_seed = 42;
    let n = 20_000;
    let draws: Vec<(f64, f64)> = (0..n).map(|id| sample_params(&cfg, id)).collect();
    assert!(draws.iter().all(|&(y, p)| (1000.0..3000.0).contains(&y) && (0.2..0.5).contains(&p)));
    let mean_y = draws.iter().map(|d| d.0).sum::<f64>() / n as f64;
    let mean_p = draws.iter().map(|d| d.1).sum::<f64>() / n as f64;
    assert!((mean_y - 2000.0).abs() / 2000.0 < 0.02, "{mean_y}");
    assert!((mean_p - 0.35).abs() / 0.35 < 0.02, "{mean_p}");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let one = run_sweep(&tiny(6, 3, 1)).unwrap();
    let many = run_sweep(&tiny(6, 3, 8)).unwrap();
    assert_eq!(results_to_csv(&one), results_to_csv(&many));
    assert_eq!(one.iter().map(|r| r.agent_id).collect::<Vec<_>>(), (0..6).collect::<Vec<_>>());
}

#[test]
fn a_single_agent_sweep_matches_its_slot_in_a_larger_one() {
    let alone = run_sweep(&tiny(1, 9, 1)).unwrap();
    let crowd = run_sweep(&tiny(3, 9, 1)).unwrap();
    assert_eq!(alone[0], crowd[0]);
}

#[test]
fn diverging_agents_are_flagged_not_fatal() {
    let mut cfg = tiny(3, 1, 1);
    cfg.train.lr = 1e300;
    cfg.train.episodes = 5;
    let results = run_sweep(&cfg).unwrap();
    assert_eq!(results.len(), 3);
    assert!(results.iter().all(|r| r.diverged && r.mean_culture == 0.0));
}

#[test]
fn write_then_read_round_trips_and_echoes_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(4, 11, 1);
    let results = run_sweep(&cfg).unwrap();
    let manifest = Manifest::new(&cfg, "start".into(), "end".into(), &results);
    write_results(&results, &manifest, dir.path()).unwrap();
    assert_eq!(read_results(&dir.path().join(RESULTS_FILE)).unwrap(), results);
    let back = read_manifest(&dir.path().join(MANIFEST_FILE)).unwrap();
    assert_eq!(back, manifest);
    assert_eq!(back.master_seed, 11);
    assert_eq!(back.config.n_agents, 4);
}

#[test]
fn malformed_rows_report_their_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(RESULTS_FILE);
    let good = results_to_csv(&[sample_row(0)]);
    std::fs::write(&path, format!("{good}1,abc,0.3,1,1,0,5,30,0\n")).unwrap();
    match read_results(&path) {
        Err(SweepError::Parse { line, message, .. }) => {
            assert_eq!(line, 3);
            assert!(message.contains("Y"), "{message}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
    std::fs::write(&path, "agent_id,Y\n0,1\n").unwrap();
    assert!(matches!(read_results(&path), Err(SweepError::Parse { line: 1, .. })));
}

fn sample_row(id: usize) -> AgentResult {
    AgentResult {
        agent_id: id,
        yield_base: 1234.5,
        spoilage: 0.25,
        mean_culture: 88.0,
        std_culture: 4.5,
        starvation_rate: 0.1,
        agent_seed: 77,
        episodes_trained: 30,
        diverged: false,
    }
}

proptest! {
    #[test]
    fn csv_preserves_every_float_bit(
        y in 0.0f64..1e6,
        p in 0.0f64..1.0,
        c in 0.0f64..365.0,
        s in 0.0f64..100.0,
        seed in any::<u64>(),
        diverged in any::<bool>(),
    ) {
        let row = AgentResult {
            yield_base: y,
            spoilage: p,
            mean_culture: c,
            std_culture: s,
            agent_seed: seed,
            diverged,
            ..sample_row(5)
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(RESULTS_FILE);
        std::fs::write(&path, results_to_csv(std::slice::from_ref(&row))).unwrap();
        prop_assert_eq!(read_results(&path).unwrap(), vec![row]);
    }
}
