use std::path::Path;

use trajspec::empirical::{default_levels, levels_with_tails, Bandwidth, Binning};
use trajspec::{EigenMethod, FixtureKind};
use trajspec_cli::config::{ConfigError, InstrumentSource, Overrides, RunConfig, DEFAULT_SEED};
use trajspec_cli::pipeline::default_pairs;

fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    RunConfig::from_toml(text, None, &Overrides::default())
}

const TWO_FIXTURES: &str = r#"
[[instrument]]
id = "a"
fixture = "gaussian_walk"
length = 50

[[instrument]]
id = "b"
fixture = "student_t_walk"
length = 60
seed = 9
"#;

#[test]
fn defaults_fill_everything_not_given() {
    let cfg = parse(TWO_FIXTURES).unwrap();
    assert_eq!(cfg.seed, DEFAULT_SEED);
    assert_eq!(cfg.quantile_levels, default_levels());
    assert_eq!(cfg.qq_pairs, None);
    assert_eq!(cfg.kde.bandwidth, Bandwidth::Silverman);
    assert_eq!(cfg.binning, Binning::FreedmanDiaconis);
    assert_eq!(cfg.ensemble.m, 512);
    assert_eq!(cfg.ensemble.draws, 20);
    assert_eq!(cfg.ensemble.seed, DEFAULT_SEED);
    assert_eq!(cfg.bulk_fraction, 0.9);
    assert_eq!(cfg.method, None);
    assert!(!cfg.standardize);
    assert_eq!(cfg.bimodality_tolerance, 0.1);
    assert_eq!(
        cfg.instruments[1],
        InstrumentSource::Fixture {
            id: "b".into(),
            kind: FixtureKind::StudentTWalk,
            length: 60,
            seed: 9,
        }
    );
    // fixtures without a seed take the run seed
    assert!(matches!(cfg.instruments[0], InstrumentSource::Fixture { seed: DEFAULT_SEED, .. }));
}

#[test]
fn sections_are_read() {
    let text = format!(
        r#"
seed = 5
bulk_fraction = 0.5
standardize = true
method = "iterative"

[qq]
levels = "tails"
pairs = [["a", "b"], ["b", "gaussian"]]

[kde]
bandwidth = 0.25
grid = 1024

[histogram]
bins = 40

[ensemble]
m = 64
draws = 3

[checks]
min_mode = 0.3
{TWO_FIXTURES}"#
    );
    let cfg = parse(&text).unwrap();
    assert_eq!(cfg.seed, 5);
    assert_eq!(cfg.ensemble.seed, 5);
    assert_eq!(cfg.bulk_fraction, 0.5);
    assert!(cfg.standardize);
    assert_eq!(cfg.method, Some(EigenMethod::Iterative));
    assert_eq!(cfg.quantile_levels, levels_with_tails());
    assert_eq!(
        cfg.qq_pairs,
        Some(vec![("a".into(), "b".into()), ("b".into(), "gaussian".into())])
    );
    assert_eq!(cfg.kde.bandwidth, Bandwidth::Fixed(0.25));
    assert_eq!(cfg.kde.grid_size, 1024);
    assert_eq!(cfg.binning, Binning::Fixed(40));
    assert_eq!((cfg.ensemble.m, cfg.ensemble.draws), (64, 3));
    assert_eq!(cfg.repulsion.min_mode, 0.3);
}

#[test]
fn command_line_wins_over_file() {
    let ov = Overrides {
        seed: Some(77),
        bulk_fraction: Some(0.8),
        method: Some(EigenMethod::Dense),
        fixtures: vec!["c=constant:10:4".into()],
        ensemble_m: Some(32),
        ..Default::default()
    };
    let cfg = RunConfig::from_toml(&format!("seed = 1\n{TWO_FIXTURES}"), None, &ov).unwrap();
    assert_eq!(cfg.seed, 77);
    assert_eq!(cfg.bulk_fraction, 0.8);
    assert_eq!(cfg.method, Some(EigenMethod::Dense));
    assert_eq!(cfg.ensemble.m, 32);
    let ids: Vec<&str> = cfg.instruments.iter().map(InstrumentSource::id).collect();
    assert_eq!(ids, ["a", "b", "c"]);
}

#[test]
fn hash_ignores_output_location_and_threads() {
    let base = parse(TWO_FIXTURES).unwrap();
    let ov = Overrides {
        out: Some("elsewhere".into()),
        jobs: Some(3),
        no_cache: true,
        ..Default::default()
    };
    let moved = RunConfig::from_toml(TWO_FIXTURES, None, &ov).unwrap();
    assert_eq!(base.hash(), moved.hash());
    let reseeded = RunConfig::from_toml(
        TWO_FIXTURES,
        None,
        &Overrides {
            seed: Some(1),
            ..Default::default()
        },
    )
    .unwrap();
    assert_ne!(base.hash(), reseeded.hash());
}

#[test]
fn csv_paths_resolve_against_the_config_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.csv"), "date,close\n2020-01-01,1\n").unwrap();
    let text = "[[instrument]]\nid = \"p\"\npath = \"p.csv\"\nclose_col = \"close\"\n";
    let cfg = RunConfig::from_toml(text, Some(dir.path()), &Overrides::default()).unwrap();
    match &cfg.instruments[0] {
        InstrumentSource::Csv { resolved, path, .. } => {
            assert_eq!(resolved, &dir.path().join("p.csv"));
            assert_eq!(path, Path::new("p.csv"));
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        RunConfig::from_toml(text, Some(Path::new("/nonexistent")), &Overrides::default()),
        Err(ConfigError::Instrument { .. })
    ));
}

#[test]
fn invalid_documents_are_rejected() {
    let bad = [
        "bogus = 1",
        "bulk_fraction = 0.0",
        "bulk_fraction = 1.5",
        "method = \"magic\"",
        "[kde]\nbandwidth = -1.0",
        "[kde]\nbandwidth = \"scott\"",
        "[kde]\ngrid = 4",
        "[histogram]\nbins = 0",
        "[ensemble]\nm = 2",
        "[ensemble]\ndraws = 0",
        "[qq]\nlevels = [0.5, 0.1]",
        "[qq]\nlevels = [0.0, 0.5]",
        "[qq]\npairs = [[\"a\", \"zzz\"]]",
        "[qq]\npairs = [[\"gaussian\", \"a\"]]",
        "[checks]\nmax_ratio = -0.1",
        "[[instrument]]\nid = \"a\"\nfixture = \"gaussian_walk\"\nlength = 9",
        "[[instrument]]\nid = \"bad id\"\nfixture = \"constant\"\nlength = 9",
        "[[instrument]]\nid = \"gaussian\"\nfixture = \"constant\"\nlength = 9",
        "[[instrument]]\nid = \"x\"\nfixture = \"constant\"\nlength = 2",
        "[[instrument]]\nid = \"x\"\nfixture = \"constant\"\nlength = 9\npath = \"x.csv\"",
        "[[instrument]]\nid = \"x\"",
        "[[instrument]]\nid = \"x\"\nfixture = \"brownian\"\nlength = 9",
        "seed = \"seven\"",
    ];
    for doc in bad {
        let text = format!("{doc}\n{TWO_FIXTURES}");
        assert!(parse(&text).is_err(), "accepted:\n{doc}");
    }
}

#[test]
fn fixture_flags_are_checked() {
    for flag in ["a", "a=gaussian_walk", "a=gaussian_walk:x", "a=nope:10", "a=constant:10:1:2"] {
        let ov = Overrides {
            fixtures: vec![flag.into()],
            ..Default::default()
        };
        assert!(RunConfig::load(&ov).is_err(), "accepted {flag}");
    }
    let ov = Overrides {
        instruments: vec!["no-equals-sign".into()],
        ..Default::default()
    };
    assert!(RunConfig::load(&ov).is_err());
}

#[test]
fn default_pair_set_covers_gaussian_and_every_unordered_pair() {
    let ids: Vec<String> = ["aapl", "goog", "ge"].map(String::from).to_vec();
    let pairs = default_pairs(&ids);
    assert_eq!(pairs.iter().filter(|(_, b)| b == "gaussian").count(), 3);
    let pairwise: Vec<_> = pairs.iter().filter(|(_, b)| b != "gaussian").collect();
    assert_eq!(pairwise.len(), 3);
    assert!(pairwise.contains(&&("aapl".into(), "ge".into())));
}
