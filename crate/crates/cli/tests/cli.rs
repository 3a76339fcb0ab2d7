use std::fs;
use std::path::Path;
use std::process::{Command as Process, Output};

use polyosc::lattice::{ParamGrid, SampleFamily};
use polyosc::seminorms::variation_bruteforce;
use polyosc::Complex64;
use polyosc_cli::config::SAMPLE_3X3;
use polyosc_cli::{render_json, run, Command, Document, ExperimentConfig};
use serde_json::Value;

fn polyosc(args: &[&str], out: &Path) -> Output {
    Process::new(env!("CARGO_BIN_EXE_polyosc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("POLYOSC_OUT")
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn sample_reproduces_the_documented_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyosc(&["variation", "--sample"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("variation.json"));
    let expected: Value = serde_json::from_str(include_str!("../fixtures/sample_3x3.expected.json")).unwrap();
    let got: Vec<&Value> = doc["results"][0]["outputs"]["variations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| &v["certificate"])
        .collect();
    assert_eq!(got.len(), 3);
    for (g, e) in got.iter().zip(expected.as_array().unwrap()) {
        assert_eq!(g["rho"], e["rho"]);
        assert_eq!(g["value"], e["value"]);
        assert_eq!(g["chain"], e["chain"]);
    }

    // the frozen values come from the enumeration oracle
    let config = ExperimentConfig::parse(SAMPLE_3X3).unwrap();
    let grid = ParamGrid::new(config.family.axes.clone().unwrap()).unwrap();
    let values = config.family.values.clone().unwrap().iter().map(|&[a, b]| Complex64::new(a, b)).collect();
    let family = SampleFamily::new(grid, values).unwrap();
    for e in expected.as_array().unwrap() {
        let rho = e["rho"].as_f64().unwrap();
        assert_eq!(variation_bruteforce(&family, rho).unwrap(), e["value"].as_f64().unwrap());
    }
}

#[test]
fn rm_check_two_parameters_has_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyosc(&["rm-check", "--k0", "2", "--L", "4", "--trials", "500"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let doc = read_json(&dir.path().join("rm-check.json"));
    let outputs = &doc["results"][0]["outputs"];
    assert_eq!(outputs["violations"], 0);
    assert_eq!(outputs["trials"], 500);
    assert_eq!(outputs["constant"].as_f64().unwrap(), 2.0);
    let checks = doc["results"][0]["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 500);
    for c in checks {
        for key in ["lhs", "rhs", "constant", "pass"] {
            assert!(c.get(key).is_some());
        }
    }
}

#[test]
fn empty_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    fs::write(&cfg, "").unwrap();
    let out = polyosc(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let out = polyosc(&["variation", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn invalid_fields_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        "[experiment]\ncommand = \"variation\"\n[variation]\nrho = [0.5]\n",
        "[experiment]\ncommand = \"rm-check\"\n[rm]\nk0 = 2\ndepth = 3\ndata_depth = 4\n",
        "[experiment]\ncommand = \"gluing\"\n[map]\nexponents = [[1, 0], [0, 0]]\n",
        "[experiment]\ncommand = \"variation\"\nbogus = 1\n",
        "[experiment]\ncommand = \"cancellation\"\n[cancellation]\nalpha = [1, 2]\ns = [1.0]\nratios = [0.5]\nlimit = 20.0\n",
    ];
    for (i, text) in cases.iter().enumerate() {
        let cfg = dir.path().join(format!("bad{i}.toml"));
        fs::write(&cfg, text).unwrap();
        let out = polyosc(&["run", "--config", cfg.to_str().unwrap()], dir.path());
        assert_eq!(out.status.code(), Some(3), "case {i}: {}", String::from_utf8_lossy(&out.stderr));
    }
    // a config for one command cannot be run as another
    let cfg = dir.path().join("bad0.toml");
    assert_eq!(polyosc(&["gluing", "--config", cfg.to_str().unwrap()], dir.path()).status.code(), Some(3));
}

#[test]
fn usage_budget_and_io_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(polyosc(&["no-such-command"], dir.path()).status.code(), Some(2));
    assert_eq!(polyosc(&["variation", "--seed", "x"], dir.path()).status.code(), Some(2));
    assert_eq!(polyosc(&["gluing", "--k0", "2"], dir.path()).status.code(), Some(2));
    assert_eq!(polyosc(&["multiplier", "--budget", "10"], dir.path()).status.code(), Some(4));
    assert_eq!(polyosc(&["rm-check", "--k0", "3", "--L", "6"], dir.path()).status.code(), Some(4));
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    assert_eq!(polyosc(&["gluing"], &blocker.join("sub")).status.code(), Some(5));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = Process::new(env!("CARGO_BIN_EXE_polyosc"))
        .arg("gluing")
        .env("POLYOSC_OUT", dir.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("gluing.json").exists() && dir.path().join("gluing.csv").exists());
}

#[test]
fn configs_round_trip() {
    for cmd in Command::ALL {
        let config = ExperimentConfig::new(cmd);
        let text = config.to_toml().unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), config, "{cmd}");
        config.validate().unwrap();
    }
    let sample = ExperimentConfig::parse(SAMPLE_3X3).unwrap();
    assert_eq!(ExperimentConfig::parse(&sample.to_toml().unwrap()).unwrap(), sample);
}

#[test]
fn json_records_round_trip() {
    for cmd in [Command::Variation, Command::Gluing, Command::Cancellation, Command::ErgodicRun] {
        let outcome = run(&ExperimentConfig::new(cmd)).unwrap();
        let text = render_json(&outcome.document);
        let parsed: Document = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed, outcome.document, "{cmd}");
        assert_eq!(render_json(&parsed), text);
    }
}

#[test]
fn csv_headers_match_the_schema() {
    let schema: [(&str, &str); 12] = [
        ("variation", "family,rho,value,bruteforce,chain_length"),
        ("oscillation", "family,chain,steps,oscillation,variation2,dominated"),
        ("rm-check", "trial,lhs,rhs,constant,ratio,pass"),
        ("gluing", "n,s,image,max_rel_error"),
        ("splitting-check", "trial,full,long,short_l2,ratio,pass"),
        ("multiplier", "t,xi,re,im,abs,refined_diff"),
        ("decay-scan", "delta,constant,samples"),
        ("offdiag-scan", "h,h_l1,sup,normalized,samples,skipped"),
        ("cancellation", "subset,h_over_s,norm,ratio"),
        ("ergodic-run", "m,min_m,deviation"),
        ("radon-run", "index,x,average_re,average_im,direct_re,direct_im"),
        ("osc-stats", "p,steps,max_ratio,mean_ratio"),
    ];
    for cmd in Command::ALL {
        let outcome = run(&ExperimentConfig::new(cmd)).unwrap();
        let csv = polyosc_cli::render_csv(&outcome.table).unwrap();
        let header = csv.lines().next().unwrap();
        let want = schema.iter().find(|(n, _)| *n == cmd.name()).unwrap().1;
        assert_eq!(header, want, "{cmd}");
        assert!(csv.lines().count() > 1, "{cmd} emitted no rows");
    }
}

#[test]
fn every_subcommand_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in Command::ALL {
        let name = cmd.name();
        let first = polyosc(&[name, "--seed", "17"], dir.path());
        let code = first.status.code();
        assert!(matches!(code, Some(0) | Some(1)), "{name}: {}", String::from_utf8_lossy(&first.stderr));
        let json = fs::read(dir.path().join(format!("{name}.json"))).unwrap();
        let csv = fs::read(dir.path().join(format!("{name}.csv"))).unwrap();
        let second = polyosc(&[name, "--seed", "17"], dir.path());
        assert_eq!(second.status.code(), code);
        assert_eq!(second.stdout, first.stdout);
        assert_eq!(fs::read(dir.path().join(format!("{name}.json"))).unwrap(), json, "{name}");
        assert_eq!(fs::read(dir.path().join(format!("{name}.csv"))).unwrap(), csv, "{name}");
    }
}

#[test]
fn seeds_change_random_outputs() {
    let a = run(&ExperimentConfig::new(Command::RmCheck)).unwrap();
    let mut config = ExperimentConfig::new(Command::RmCheck);
    config.experiment.seed = 1;
    let b = run(&config).unwrap();
    assert_ne!(a.table, b.table);
    assert_ne!(a.document.results[0].inputs_digest, b.document.results[0].inputs_digest);
}
