//! End-to-end runs of the `dtcqrc` binary on small configs and a synthetic
//! IDX dataset.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn write_idx(dir: &Path, prefix: &str, count: usize, seed: u32) {
    let mut images = vec![0, 0, 8, 3];
    images.extend((count as u32).to_be_bytes());
    images.extend(28u32.to_be_bytes());
    images.extend(28u32.to_be_bytes());
    let mut labels = vec![0, 0, 8, 1];
    labels.extend((count as u32).to_be_bytes());
    let mut state = seed.wrapping_mul(2_654_435_761).max(1);
    for i in 0..count {
        let label = (i % 10) as u8;
        labels.push(label);
        for p in 0..784 {
            state ^= state << 13;
            state ^= state >> 17;
            state ^= state << 5;
            // A bright band per class plus speckle.
            let band = (p % 28) / 3 == label as usize;
            let speckle = (state % 64) as u8;
            images.push(if band { 191 + speckle } else { speckle });
        }
    }
    std::fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), images).unwrap();
    std::fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), labels).unwrap();
}

fn synthetic_mnist() -> TempDir {
    let dir = TempDir::new().unwrap();
    write_idx(dir.path(), "train", 300, 1);
    write_idx(dir.path(), "t10k", 100, 2);
    dir
}

fn run(args: &[&str], config: &str, envs: &[(&str, &str)]) -> (Output, TempDir) {
    let work = TempDir::new().unwrap();
    let cfg = work.path().join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    let out = work.path().join("out");
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dtcqrc"));
    cmd.args(args).arg("--config").arg(&cfg).arg("--out").arg(&out);
    for key in ["DTCQRC_SEED", "DTCQRC_THREADS", "DTCQRC_BACKEND", "DTCQRC_OUT", "DTCQRC_MNIST_DIR", "DTCQRC_CONFIG"] {
        cmd.env_remove(key);
    }
    cmd.envs(envs.iter().copied());
    (cmd.output().unwrap(), work)
}

fn read(work: &TempDir, name: &str) -> String {
    std::fs::read_to_string(work.path().join("out").join(name)).unwrap()
}

const CAPACITIES: &str = "[run]\ncache = false\n\n[capacities]\nn = 3\ng_grid = [0.2, 0.5]\nseeds = 2\nlength = 120\nwashout = 10\notoc_from = 2\notoc_to = 4\n";

#[test]
fn capacities_are_byte_reproducible() {
    let (a, wa) = run(&["capacities", "--seed", "3"], CAPACITIES, &[]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let (b, wb) = run(&["capacities", "--seed", "3"], CAPACITIES, &[]);
    assert!(b.status.success());
    let csv = read(&wa, "capacities.csv");
    assert_eq!(csv, read(&wb, "capacities.csv"));
    assert_eq!(read(&wa, "capacities_summary.csv"), read(&wb, "capacities_summary.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("g,L,seed,metric,value"));
    // 2 g × 2 seeds × 4 metrics.
    assert_eq!(lines.count(), 16);
    let (c, wc) = run(&["capacities", "--seed", "4"], CAPACITIES, &[]);
    assert!(c.status.success());
    assert_ne!(csv, read(&wc, "capacities.csv"));
}

#[test]
fn run_manifest_records_effective_settings() {
    let (o, w) = run(&["capacities"], CAPACITIES, &[("DTCQRC_SEED", "11"), ("DTCQRC_BACKEND", "shots")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&read(&w, "run.json")).unwrap();
    assert_eq!(v["command"], "capacities");
    assert_eq!(v["seed"], 11);
    assert_eq!(v["backend"], "shots");
    assert_eq!(v["files"], serde_json::json!(["capacities.csv", "capacities_summary.csv"]));
    assert_eq!(v["config"]["capacities"]["n"], 3);
    // Flags beat the environment.
    let (o, w) = run(&["capacities", "--seed", "5"], CAPACITIES, &[("DTCQRC_SEED", "11")]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&read(&w, "run.json")).unwrap();
    assert_eq!(v["seed"], 5);
}

#[test]
fn exit_codes_follow_error_classes() {
    let code = |o: &Output| o.status.code().unwrap();
    let (o, _) = run(&["capacities"], "[capacities]\nseedz = 1\n", &[]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seedz"));
    let (o, _) = run(&["no-such-command"], "", &[]);
    assert_eq!(code(&o), 1);
    let (o, _) = run(&["capacities", "--backend", "quantum"], "", &[]);
    assert_eq!(code(&o), 1);
    let (o, _) = run(&["classify"], "[classify]\nsizes = [3]\n", &[("DTCQRC_MNIST_DIR", "/nonexistent/mnist")]);
    assert_eq!(code(&o), 2);
    let help = Command::new(env!("CARGO_BIN_EXE_dtcqrc")).arg("--help").output().unwrap();
    assert_eq!(code(&help), 0);
    let text = String::from_utf8_lossy(&help.stdout);
    assert!(text.contains("DTCQRC_SEED") && text.contains("run.json"));
}

#[test]
fn print_config_round_trips() {
    let (o, _) = run(&["print-config", "--seed", "9"], "[kernel]\nn = 6\n", &[]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let cfg = dtc_qrc::config::Config::from_toml(&text).unwrap();
    assert_eq!((cfg.run.seed, cfg.kernel.n), (9, 6));
    assert_eq!(cfg.to_toml().unwrap(), text);
}

#[test]
fn classify_runs_on_synthetic_digits() {
    let data = synthetic_mnist();
    let config = "[run]\ncache = false\n\n[reservoir]\ncycles = 4\nsnapshots = 2\n\n[classify]\ntrain = 100\ntest = 50\ng_grid = [0.3, 0.9]\nsizes = [3]\n";
    let env = [("DTCQRC_MNIST_DIR", data.path().to_str().unwrap())];
    let (a, wa) = run(&["classify"], config, &env);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let (_, wb) = run(&["classify"], config, &env);
    let csv = read(&wa, "classify.csv");
    assert_eq!(csv, read(&wb, "classify.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("g,n,encoding,noise,seed,train_acc,test_acc"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let acc: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        // Classes are separable by construction; chance is 0.1.
        assert!(acc > 0.5, "{row}");
    }
}

#[test]
fn kernel_and_noise_commands_run_on_synthetic_digits() {
    let data = synthetic_mnist();
    let env = [("DTCQRC_MNIST_DIR", data.path().to_str().unwrap())];
    let kernel = "[run]\ncache = false\n\n[reservoir]\ncycles = 4\nsnapshots = 2\n\n[kernel]\nclasses = [3, 8]\nn = 3\ntrain = 30\ntest = 10\ng_grid = [0.5]\n\n[kernel.grid]\ngammas = [0.25, 1.0]\nlambdas = [0.001, 0.1]\nvalidation_fraction = 0.2\n";
    let (o, w) = run(&["kernel-adv"], kernel, &env);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(&w, "kernel_adv.csv").starts_with("g,n,seed,orig_q,orig_c,orig_gap,relabel_gamma,"));

    let sweep = "[run]\ncache = false\n\n[reservoir]\ncycles = 4\nsnapshots = 2\n\n[noise_sweep]\nn = 3\ntrain = 60\ntest = 20\np2_grid = [0.0, 0.02, 0.05]\n";
    let (o, w) = run(&["noise-sweep"], sweep, &env);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&w, "noise_sweep.csv");
    assert!(csv.starts_with("p2,p1,seed,train_acc,test_acc"));
    assert_eq!(csv.lines().count(), 4);
    let (o, _) = run(&["noise-sweep", "--backend", "shots"], sweep, &env);
    assert_eq!(o.status.code(), Some(1));
}
