use std::path::Path;
use std::process::{Command, Output};

fn ucmec(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ucmec"));
    cmd.args(args).env_remove("UCMEC_OUT").env("RUST_LOG", "warn");
    if let Some(p) = out_env {
        cmd.env("UCMEC_OUT", p);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        "seeds = [1]\neval_episodes = 1\n\n[network]\nusers = 3\naps = 8\nepisode_len = 10\n\n\
         [train]\nepisodes = 2\nrollout = 16\nminibatch = 8\nepochs = 1\nhidden = [8]\n",
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn train_sweep_plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("res");
    let out_s = out.to_str().unwrap();

    let t = ucmec(&["train", "--config", &cfg, "--mode", "ippo", "--out", out_s], None);
    assert!(t.status.success(), "{}", String::from_utf8_lossy(&t.stderr));
    let ck = out.join("ippo/runs/base/seed_1/checkpoint.json");
    assert!(ck.exists());

    let e = ucmec(&["evaluate", "--checkpoint", ck.to_str().unwrap(), "--eval-episodes", "1", "--out", out_s], None);
    assert!(e.status.success(), "{}", String::from_utf8_lossy(&e.stderr));
    assert!(out.join("checkpoint_eval/seed_1/metrics.csv").exists());

    let s = ucmec(
        &["sweep", "--config", &cfg, "--mode", "random", "--sweep-axis", "users", "--sweep-values", "2,4", "--seeds", "1,2", "--workers", "2", "--out", out_s],
        None,
    );
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    assert_eq!(stdout(&s).lines().filter(|l| l.starts_with("random users_")).count(), 2, "{}", stdout(&s));

    let p = ucmec(&["plot", "--out", out_s], None);
    assert!(p.status.success());
    assert!(out.join("fig5_rate_vs_users.csv").exists());
    assert!(out.join("plot.py").exists());
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let o = ucmec(&["evaluate", "--config", &cfg, "--mode", "local_only"], Some(dir.path()));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("local_only/aggregate.json").exists());
}

#[test]
fn rejects_bad_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["train", "--mode", "random", "--out", out],
        vec!["evaluate", "--mode", "ippo", "--out", out],
        vec!["sweep", "--mode", "random", "--sweep-axis", "users", "--out", out],
        vec!["sweep", "--mode", "random", "--sweep-axis", "antennas", "--sweep-values", "1", "--out", out],
        vec!["train", "--mode", "bogus", "--out", out],
    ] {
        let o = ucmec(&args, None);
        assert!(!o.status.success(), "{args:?} should fail");
    }
}
