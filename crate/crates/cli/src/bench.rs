use std::fs;

use anyhow::{bail, Context, Result};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use steinpost::chain::{burn_in_from_rhat, mala_sample, r_hat, rhat_trace, rwmh_sample, WeightedSupport};
use steinpost::cv::{toy_replicate, Method, DEFAULT_FOLDS, DEFAULT_GRID, TOY_TRUTH};
use steinpost::model::{gaussian_target, mixture_target, GaussianMixtureSpec};
use steinpost::rng::{derive_seed, rng_from_seed};
use steinpost::stein::{ksd, BaseKernel, SteinKernel};
use steinpost::thin::stein_thin;

use crate::args::{BenchArgs, Cli, Experiment};
use crate::common::{output_dir, to_json};

/// Sample size per replicate in the control-variate comparison.
const CV_POINTS: usize = 20;
const RHAT_CHAINS: usize = 6;
const RHAT_STEPS: usize = 1000;
const THIN_STEPS: usize = 2000;
const THIN_POINTS: usize = 50;
const THIN_REPLICATES: usize = 5;
const RANDOM_SUBSETS: usize = 20;

type Artifact = (&'static str, String);

#[derive(Serialize)]
struct MethodSummary {
    method: Method,
    mean: f64,
    mse: f64,
}

fn cv_experiment(seed: u64, replicates: usize) -> Result<Vec<Artifact>> {
    let runs = (0..replicates)
        .into_par_iter()
        .map(|r| toy_replicate(derive_seed(seed, r as u64), CV_POINTS, &DEFAULT_GRID, DEFAULT_FOLDS))
        .collect::<steinpost::Result<Vec<_>>>()?;
    let mut csv = String::from("replicate,method,estimate\n");
    for (r, reports) in runs.iter().enumerate() {
        for rep in reports {
            csv.push_str(&format!("{r},{},{}\n", rep.method, rep.estimate));
        }
    }
    let methods: Vec<MethodSummary> = (0..4)
        .map(|k| {
            let est: Vec<f64> = runs.iter().map(|r| r[k].estimate).collect();
            let n = est.len() as f64;
            MethodSummary {
                method: runs[0][k].method,
                mean: est.iter().sum::<f64>() / n,
                mse: est.iter().map(|e| (e - TOY_TRUTH).powi(2)).sum::<f64>() / n,
            }
        })
        .collect();
    let summary = serde_json::json!({
        "replicates": replicates,
        "points": CV_POINTS,
        "truth": TOY_TRUTH,
        "methods": methods,
    });
    Ok(vec![("cv_estimates.csv", csv), ("cv_summary.json", to_json(&summary)?)])
}

fn rhat_experiment(seed: u64) -> Result<Vec<Artifact>> {
    let target = mixture_target(&GaussianMixtureSpec::benchmark())?;
    let chains = (0..RHAT_CHAINS)
        .map(|l| {
            let s = derive_seed(seed, l as u64);
            let mut rng = rng_from_seed(derive_seed(s, 1));
            // over-dispersed starts and a deliberately small proposal
            let x0: Vec<f64> = (0..2).map(|_| 5.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            rwmh_sample(&target, &x0, RHAT_STEPS, 0.5, s)
        })
        .collect::<steinpost::Result<Vec<_>>>()?;
    let trace = rhat_trace(&chains)?;
    let mut csv = String::from("n,r_hat_x1,r_hat_x2\n");
    for cp in &trace {
        match &cp.r_hat {
            Some(r) => csv.push_str(&format!("{},{},{}\n", cp.n, r[0], r[1])),
            None => csv.push_str(&format!("{},,\n", cp.n)),
        }
    }
    let summary = serde_json::json!({
        "chains": RHAT_CHAINS,
        "steps": RHAT_STEPS,
        "r_hat": r_hat(&chains)?,
        "burn_in_by_delta": {
            "0.1": burn_in_from_rhat(&chains, 0.1)?.length(),
            "0.01": burn_in_from_rhat(&chains, 0.01)?.length(),
        },
    });
    Ok(vec![("rhat_trace.csv", csv), ("rhat_summary.json", to_json(&summary)?)])
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

#[derive(Serialize)]
struct ThinSummaryRow {
    replicate: usize,
    stein: f64,
    first: f64,
    random_median: f64,
}

fn thinning_experiment(seed: u64) -> Result<Vec<Artifact>> {
    let target = mixture_target(&GaussianMixtureSpec::benchmark())?;
    let shifted = gaussian_target(&[2.0, 2.0], &[vec![1.0, 0.0], vec![0.0, 1.0]])?;
    let kernel = SteinKernel::with_target(BaseKernel::default(), target.clone())?;
    let mut csv = String::from("replicate,method,subset,ksd\n");
    let mut rows = Vec::new();
    for r in 0..THIN_REPLICATES {
        let s = derive_seed(seed, r as u64);
        let chain = mala_sample(&shifted, &[2.0, 2.0], THIN_STEPS, 1.0, s)?.with_target_gradients(&target)?;
        let stein = *stein_thin(&chain, &kernel, THIN_POINTS)?.ksd_trace.last().expect("non-empty trace");
        let first = ksd(&kernel, &WeightedSupport::uniform((0..THIN_POINTS).collect())?, &chain)?;
        let mut rng = rng_from_seed(derive_seed(s, 1));
        let mut random = Vec::with_capacity(RANDOM_SUBSETS);
        for k in 0..RANDOM_SUBSETS {
            let idx = sample(&mut rng, chain.len(), THIN_POINTS).into_vec();
            let v = ksd(&kernel, &WeightedSupport::uniform(idx)?, &chain)?;
            csv.push_str(&format!("{r},random,{k},{v}\n"));
            random.push(v);
        }
        csv.push_str(&format!("{r},stein,,{stein}\n{r},first,,{first}\n"));
        rows.push(ThinSummaryRow {
            replicate: r,
            stein,
            first,
            random_median: median(random),
        });
    }
    let summary = serde_json::json!({
        "steps": THIN_STEPS,
        "points": THIN_POINTS,
        "random_subsets": RANDOM_SUBSETS,
        "median_ksd": {
            "stein": median(rows.iter().map(|r| r.stein).collect()),
            "first": median(rows.iter().map(|r| r.first).collect()),
            "random": median(rows.iter().map(|r| r.random_median).collect()),
        },
        "replicates": rows,
    });
    Ok(vec![("thinning_ksd.csv", csv), ("thinning_summary.json", to_json(&summary)?)])
}

pub fn run(cli: &Cli, args: &BenchArgs) -> Result<()> {
    if args.replicates == 0 {
        bail!(steinpost::Error::InvalidInput("--replicates must be at least 1".into()));
    }
    let dir = output_dir(cli.output.as_deref(), "bench")?;
    let want = |e: Experiment| args.experiment == Experiment::All || args.experiment == e;
    let mut artifacts = Vec::new();
    if want(Experiment::Cv) {
        artifacts.extend(cv_experiment(derive_seed(cli.seed, 0), args.replicates)?);
    }
    if want(Experiment::Rhat) {
        artifacts.extend(rhat_experiment(derive_seed(cli.seed, 1))?);
    }
    if want(Experiment::Thinning) {
        artifacts.extend(thinning_experiment(derive_seed(cli.seed, 2))?);
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, text) in artifacts {
        fs::write(dir.join(name), text).with_context(|| format!("writing {name}"))?;
    }
    Ok(())
}
