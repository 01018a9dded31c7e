use std::fs;
use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use psmaddpg::netio::{read_net, write_net};
use psmaddpg::{parse_config, run, Mode};
use psmaddpg_core::eval::moving_average;
use psmaddpg_core::net::{Activation, LayeredNet};

const SMALL: &str = "\
# tiny run
variant = v0
total_steps = 400
warmup = 50
batch_size = 16
memory_capacity = 1000
eps_decay_steps = 200
eval_every = 4
eval_episodes = 2
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_psmaddpg"))
}

fn train_into(dir: &Path, text: &str) -> String {
    let mut spec = parse_config(text).unwrap();
    spec.out = Some(dir.to_path_buf());
    run(&spec, Mode::Train).unwrap();
    fs::read_to_string(dir.join("metrics.csv")).unwrap()
}

#[test]
fn fixed_seed_gives_identical_metrics() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(train_into(a.path(), SMALL), train_into(b.path(), SMALL));
}

#[test]
fn train_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    train_into(dir.path(), &format!("{SMALL}dump_trajectory = true\n"));
    for f in ["metrics.csv", "config.echo", "trajectory.csv", "nets/actor_0.net", "nets/critic_0_target.net"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
}

#[test]
fn metrics_rows_are_ordered_and_ma100_recomputes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = train_into(dir.path(), SMALL);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("episode,agent,return,total,ma100,epsilon,phase"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_owned).collect()).collect();
    assert!(rows.iter().any(|r| r[6] == "train"));
    assert!(rows.iter().any(|r| r[6] == "eval"));

    let rank = |p: &str| if p == "train" { 0 } else { 1 };
    let key = |r: &Vec<String>| (rank(&r[6]), r[0].parse::<usize>().unwrap(), r[1].parse::<usize>().unwrap());
    for w in rows.windows(2) {
        assert!(key(&w[0]) < key(&w[1]), "{:?} then {:?}", w[0], w[1]);
    }

    for phase in ["train", "eval"] {
        for agent in ["0", "1"] {
            let sel: Vec<&Vec<String>> = rows.iter().filter(|r| r[6] == phase && r[1] == agent).collect();
            let returns: Vec<f64> = sel.iter().map(|r| r[2].parse().unwrap()).collect();
            let ma = moving_average(&returns, 100);
            for (r, m) in sel.iter().zip(&ma) {
                assert_eq!(r[4].parse::<f64>().unwrap(), *m);
            }
        }
    }
}

#[test]
fn config_echo_reproduces_the_run() {
    let a = tempfile::tempdir().unwrap();
    let first = train_into(a.path(), SMALL);
    let echo = fs::read_to_string(a.path().join("config.echo")).unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(first, train_into(b.path(), &echo));
    let without_out = |t: &str| t.lines().filter(|l| !l.starts_with("out = ")).collect::<Vec<_>>().join("\n");
    let second = fs::read_to_string(b.path().join("config.echo")).unwrap();
    assert_eq!(without_out(&echo), without_out(&second));
}

#[test]
fn compare_mode_reports_ratio_two_for_two_agents() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "compare_steps = 20\n").unwrap();
    let status = bin()
        .args(["--config", cfg.to_str().unwrap(), "--mode", "compare", "--out", dir.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(dir.path().join("structural.txt")).unwrap();
    assert!(text.lines().any(|l| l == "param_ratio_maddpg_over_v0 2.0"), "{text}");
    for v in ["maddpg", "v0", "v1", "v2"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{v} "))));
    }
}

#[test]
fn missing_output_dir_fails_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nope");
    let res = bin().args(["--out", out.to_str().unwrap()]).output().unwrap();
    assert_eq!(res.status.code(), Some(3));
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    let msg = String::from_utf8(res.stderr).unwrap();
    assert_eq!(msg.trim_end().lines().count(), 1, "{msg}");
}

#[test]
fn config_errors_exit_two_and_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "gamma = 0.99\nvariannt = v0\n").unwrap();
    let res = bin()
        .args(["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
    let msg = String::from_utf8(res.stderr).unwrap();
    assert!(msg.contains("line 2"), "{msg}");
    assert!(!dir.path().join("metrics.csv").exists());
}

#[test]
fn seed_sweep_writes_one_directory_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let status = bin()
        .args(["--config", cfg.to_str().unwrap(), "--seeds", "3,4", "--out", dir.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let a = fs::read_to_string(dir.path().join("seed_3/metrics.csv")).unwrap();
    let b = fs::read_to_string(dir.path().join("seed_4/metrics.csv")).unwrap();
    assert_ne!(a, b);
    assert!(fs::read_to_string(dir.path().join("seed_4/config.echo")).unwrap().contains("seed = 4"));
}

fn arb_net() -> impl Strategy<Value = LayeredNet> {
    let act = prop_oneof![Just(Activation::Relu), Just(Activation::Tanh), Just(Activation::Identity)];
    (prop::collection::vec(1usize..6, 2..5), prop::collection::vec(act, 4), any::<u64>()).prop_map(
        |(sizes, acts, seed)| {
            let mut net = LayeredNet::new(&sizes, &acts[..sizes.len() - 1], seed).unwrap();
            for (k, p) in net.params_mut().enumerate() {
                *p += (k as f64 * 0.37).sin() * 10f64.powi((k % 7) as i32 - 3);
            }
            net
        },
    )
}

proptest! {
    #[test]
    fn net_text_round_trips_bit_exactly(net in arb_net()) {
        let text = write_net(&net);
        let back = read_net(&text, Path::new("mem")).unwrap();
        prop_assert_eq!(&back, &net);
        prop_assert_eq!(write_net(&back), text);
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 3);
}
