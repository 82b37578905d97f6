use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use steinpost::chain::io::write_chain_file;
use steinpost::chain::{rwmh_sample, ChainOutput, WeightedSupport};
use steinpost::cv::{secf_estimate, toy_integrand, IntegrandEvals};
use steinpost::model::{mixture_target, standard_gaussian, GaussianMixtureSpec};
use steinpost::stein::{ksd, median_heuristic, BaseKernel, ScoredPoints, SteinKernel};
use steinpost::thin::stein_thin;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_steinpost"));
    cmd.env_remove("STEINPOST_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid JSON on stdout")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn benchmark_chain(dir: &Path, seed: u64) -> (ChainOutput, PathBuf) {
    let target = mixture_target(&GaussianMixtureSpec::benchmark()).unwrap();
    let chain = rwmh_sample(&target, &[0.0, 0.0], 600, 1.5, seed).unwrap();
    let path = dir.join(format!("bench_{seed}.csv"));
    write_chain_file(&path, &chain).unwrap();
    (chain, path)
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn sample_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = run(&[
            "sample", "--target", "benchmark", "--sampler", "rwmh", "--chains", "6", "--steps", "1000",
            "--seed", "7", "--output", path_str(dir),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for l in 1..=6 {
        let name = format!("chain_{l}.csv");
        let x = fs::read(a.join(&name)).unwrap();
        assert_eq!(x, fs::read(b.join(&name)).unwrap());
        let header = String::from_utf8_lossy(&x).lines().next().unwrap().to_string();
        assert_eq!(header, "x1,x2,g1,g2");
    }
    let manifest: Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    let chains = manifest["chains"].as_array().unwrap();
    assert_eq!(chains.len(), 6);
    let seeds: Vec<u64> = chains.iter().map(|c| c["seed"].as_u64().unwrap()).collect();
    let mut unique = seeds.clone();
    unique.dedup();
    assert_eq!(unique.len(), 6);
    assert!(chains.iter().all(|c| c["acceptance_rate"].as_f64().unwrap() > 0.0));
}

#[test]
fn sample_rejects_zero_steps_without_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let out = run(&["sample", "--target", "benchmark", "--steps", "0", "--output", path_str(&dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.exists());
    let out = run(&["sample", "--target", "/no/such/target.json", "--steps", "5", "--output", path_str(&dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.exists());
}

#[test]
fn sample_accepts_target_files() {
    let tmp = tempfile::tempdir().unwrap();
    let target = tmp.path().join("gauss2d.json");
    fs::write(&target, r#"{"type":"gaussian","mean":[1.0,-1.0],"cov":[[1.0,0.3],[0.3,2.0]]}"#).unwrap();
    let dir = tmp.path().join("chains");
    let out = run(&[
        "sample", "--target", path_str(&target), "--sampler", "mala", "--chains", "2", "--steps", "50",
        "--step-size", "0.8", "--init", "-1,2", "--output", path_str(&dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let chain = steinpost::chain::io::read_chain_file(dir.join("chain_2.csv")).unwrap();
    assert_eq!((chain.len(), chain.dim()), (50, 2));
    assert!(chain.has_grads());
}

#[test]
fn diagnose_reports_and_validates() {
    let tmp = tempfile::tempdir().unwrap();
    let target = standard_gaussian(2).unwrap();
    let mut paths = Vec::new();
    for l in 0..6 {
        let c = rwmh_sample(&target, &[0.0, 0.0], 2000, 2.0, 100 + l).unwrap();
        let p = tmp.path().join(format!("g{l}.csv"));
        write_chain_file(&p, &c).unwrap();
        paths.push(p);
    }
    let list = paths.iter().map(|p| path_str(p)).collect::<Vec<_>>().join(",");
    let v = json(&run(&["diagnose", "--chains", &list, "--rhat"]));
    assert_eq!(v["chains"], 6);
    assert_eq!(floats(&v["r_hat"]).len(), 2);
    assert!(floats(&v["r_hat"]).iter().all(|r| *r < 1.05));
    assert!(v["burn_in_by_delta"]["0.1"].is_u64());
    assert_eq!(v["rhat_trace"].as_array().unwrap().len(), 20);
    assert!(v["thin_lag"].as_u64().unwrap() >= 1);

    // a single chain cannot give R-hat
    let out = run(&["diagnose", "--chains", path_str(&paths[0]), "--rhat"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&run(&["diagnose", "--chains", path_str(&paths[0])]));
    assert!(v["r_hat"].is_null() && v["burn_in"].is_null());

    // chains of different lengths
    let short = rwmh_sample(&target, &[0.0, 0.0], 100, 2.0, 1).unwrap();
    let p = tmp.path().join("short.csv");
    write_chain_file(&p, &short).unwrap();
    let out = run(&["diagnose", "--chains", &format!("{},{}", path_str(&paths[0]), path_str(&p))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diagnose_flags_separated_chains() {
    let tmp = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for l in 0..3 {
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|i| vec![10.0 * l as f64 + ((i * 7919 + l * 13) % 101) as f64 / 101.0])
            .collect();
        let c = ChainOutput::from_rows(&rows, None).unwrap();
        let p = tmp.path().join(format!("s{l}.csv"));
        write_chain_file(&p, &c).unwrap();
        paths.push(path_str(&p).to_string());
    }
    let v = json(&run(&["diagnose", "--chains", &paths.join(","), "--rhat"]));
    assert!(v["burn_in"].is_null());
    assert!(v["burn_in_by_delta"]["0.1"].is_null());
    assert!(floats(&v["r_hat"])[0] > 1.1);
}

#[test]
fn thin_matches_library() {
    let tmp = tempfile::tempdir().unwrap();
    let (chain, path) = benchmark_chain(tmp.path(), 3);
    let states = tmp.path().join("picked.csv");
    let v = json(&run(&[
        "thin", "--chain", path_str(&path), "--m", "12", "--states-out", path_str(&states),
    ]));
    let kernel = SteinKernel::new(
        BaseKernel::default().with_lengthscale(median_heuristic(&chain).unwrap()).unwrap(),
        None,
    )
    .unwrap();
    let lib = stein_thin(&chain, &kernel, 12).unwrap();
    let indices: Vec<usize> = v["indices"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap() as usize).collect();
    assert_eq!(indices, lib.selected);
    for (a, b) in floats(&v["ksd_trace"]).iter().zip(&lib.ksd_trace) {
        assert!((a - b).abs() <= 1e-12 * b.abs());
    }
    let picked = steinpost::chain::io::read_chain_file(&states).unwrap();
    assert_eq!(picked.len(), 12);
    assert_eq!(picked.state(0), chain.state(lib.selected[0]));
}

#[test]
fn thin_nonmyopic_and_thread_independence() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, path) = benchmark_chain(tmp.path(), 4);
    let args = [
        "thin", "--chain", path_str(&path), "--target", "benchmark", "--m", "5", "--mode", "nonmyopic",
        "--horizon", "2", "--batch", "20", "--seed", "9",
    ];
    let one = bin().args(args).arg("--threads").arg("1").output().unwrap();
    let many = bin().args(args).env("STEINPOST_THREADS", "4").output().unwrap();
    assert_eq!(json(&one), json(&many));
    assert_eq!(one.stdout, many.stdout);
    let v = json(&one);
    assert_eq!(v["indices"].as_array().unwrap().len(), 10);
    assert_eq!(v["ksd_trace"].as_array().unwrap().len(), 5);
    assert_eq!(v["batch_size"], 20);
}

#[test]
fn thin_rejects_bad_flag_combinations() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, path) = benchmark_chain(tmp.path(), 5);
    let states = tmp.path().join("never.csv");
    let out = run(&[
        "thin", "--chain", path_str(&path), "--m", "3", "--horizon", "2", "--states-out", path_str(&states),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!states.exists());
    let out = run(&["thin", "--chain", path_str(&path), "--m", "3", "--kernel", r#"{"family":"imq","beta":0.5}"#]);
    assert_eq!(out.status.code(), Some(2));

    // no gradients and no target
    let bare = tmp.path().join("bare.csv");
    write_chain_file(&bare, &ChainOutput::from_rows(&[vec![0.0], vec![1.0]], None).unwrap()).unwrap();
    let out = run(&["thin", "--chain", path_str(&bare), "--m", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ksd_matches_library() {
    let tmp = tempfile::tempdir().unwrap();
    let (chain, path) = benchmark_chain(tmp.path(), 6);
    let kernel_json = r#"{"family":"imq","lengthscale":1.3,"c":1.0,"beta":-0.5}"#;
    let kernel = SteinKernel::new(BaseKernel::from_json(kernel_json).unwrap(), None).unwrap();
    let v = json(&run(&["ksd", "--chain", path_str(&path), "--kernel", kernel_json]));
    let lib = ksd(&kernel, &WeightedSupport::full(chain.len()).unwrap(), &chain).unwrap();
    assert!((v["ksd"].as_f64().unwrap() - lib).abs() <= 1e-12 * lib);
    assert_eq!(v["n_points"], 600);

    let v = json(&run(&["ksd", "--chain", path_str(&path), "--kernel", kernel_json, "--indices", "0,10,20"]));
    let sub = ksd(&kernel, &WeightedSupport::uniform(vec![0, 10, 20]).unwrap(), &chain).unwrap();
    assert!((v["ksd"].as_f64().unwrap() - sub).abs() <= 1e-12 * sub);

    let out = run(&["ksd", "--chain", path_str(&path), "--indices", "0,600"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["ksd", "--chain", path_str(&path), "--weights", "1.0"]);
    assert_eq!(out.status.code(), Some(2));
}

fn toy_chain(dir: &Path) -> (ChainOutput, PathBuf) {
    use rand::Rng;
    let mut rng = steinpost::rng::rng_from_seed(21);
    let rows: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.sample::<f64, _>(rand_distr::StandardNormal)]).collect();
    let grads: Vec<Vec<f64>> = rows.iter().map(|r| vec![-r[0]]).collect();
    let chain = ChainOutput::from_rows(&rows, Some(&grads)).unwrap();
    let path = dir.join("toy.csv");
    write_chain_file(&path, &chain).unwrap();
    (chain, path)
}

#[test]
fn estimate_secf_on_toy_data() {
    let tmp = tempfile::tempdir().unwrap();
    let (chain, path) = toy_chain(tmp.path());
    let v = json(&run(&["estimate", "--chain", path_str(&path), "--f", "toy", "--method", "secf", "--degree", "2"]));
    let est = v["estimate"].as_f64().unwrap();
    assert!((est - 2.0).abs() < 0.1, "estimate {est}");
    assert_eq!(v["method"], "secf");
    assert!(v["proxy"]["ls"].is_number() && v["proxy"]["ev"].is_number());
    let lengthscale = v["lengthscale"].as_f64().unwrap();

    // same numbers straight from the library at the chosen lengthscale
    let idx: Vec<usize> = (0..chain.len()).collect();
    let pts = ScoredPoints::from_chain_with(&chain, None, &idx).unwrap();
    let f = (0..20).map(|i| toy_integrand(chain.state(i)[0])).collect();
    let evals = IntegrandEvals::uniform(f, pts).unwrap();
    let kernel = SteinKernel::new(BaseKernel::gaussian(lengthscale).unwrap(), None).unwrap();
    let lib = secf_estimate(&evals, &kernel, 2).unwrap().estimate;
    assert!((est - lib).abs() <= 1e-12 * lib.abs());
}

#[test]
fn estimate_methods_and_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let (chain, path) = toy_chain(tmp.path());
    let evals = tmp.path().join("f.csv");
    let mut text = String::from("sq,other\n");
    for i in 0..chain.len() {
        text.push_str(&format!("{},0\n", chain.state(i)[0].powi(2)));
    }
    fs::write(&evals, text).unwrap();
    let from_col = json(&run(&[
        "estimate", "--chain", path_str(&path), "--f", "column:sq", "--evals", path_str(&evals), "--method", "zvcv",
    ]));
    let builtin = json(&run(&["estimate", "--chain", path_str(&path), "--f", "x1^2", "--method", "zvcv"]));
    assert_eq!(from_col["estimate"], builtin["estimate"]);
    // x² is in the degree-2 span, so ZVCV is exact
    assert!((builtin["estimate"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    for method in ["vanilla", "cf"] {
        let v = json(&run(&["estimate", "--chain", path_str(&path), "--f", "x1", "--method", method]));
        assert_eq!(v["method"], method);
    }
    let csv = run(&["estimate", "--chain", path_str(&path), "--f", "x1", "--method", "vanilla", "--format", "csv"]);
    assert!(String::from_utf8_lossy(&csv.stdout).starts_with("estimate,method,ls,ev,lengthscale\n"));
    for bad in [
        vec!["--f", "x2"],
        vec!["--f", "column:missing", "--evals", path_str(&evals)],
        vec!["--f", "column:sq"],
        vec!["--f", "wat"],
    ] {
        let mut args = vec!["estimate", "--chain", path_str(&path)];
        args.extend(bad);
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn numerical_failures_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let rows = vec![vec![0.5]; 6];
    let grads = vec![vec![-0.5]; 6];
    let path = tmp.path().join("flat.csv");
    write_chain_file(&path, &ChainOutput::from_rows(&rows, Some(&grads)).unwrap()).unwrap();
    let out = run(&["estimate", "--chain", path_str(&path), "--f", "x1", "--method", "zvcv", "--degree", "1"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bench_writes_reproducible_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = run(&["bench", "--replicates", "100", "--seed", "3", "--output", path_str(dir)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in [
        "cv_estimates.csv",
        "cv_summary.json",
        "rhat_trace.csv",
        "rhat_summary.json",
        "thinning_ksd.csv",
        "thinning_summary.json",
    ] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let cv: Value = serde_json::from_slice(&fs::read(a.join("cv_summary.json")).unwrap()).unwrap();
    let methods = cv["methods"].as_array().unwrap();
    let vanilla = methods[0]["mse"].as_f64().unwrap();
    for m in methods {
        assert!((m["mean"].as_f64().unwrap() - 2.0).abs() < 0.1);
        if m["method"] != "vanilla" {
            assert!(m["mse"].as_f64().unwrap() < vanilla);
        }
    }
    let thin: Value = serde_json::from_slice(&fs::read(a.join("thinning_summary.json")).unwrap()).unwrap();
    for r in thin["replicates"].as_array().unwrap() {
        assert!(r["stein"].as_f64().unwrap() < r["random_median"].as_f64().unwrap());
    }
}
