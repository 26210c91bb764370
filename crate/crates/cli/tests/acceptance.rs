//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero if any criterion fails. Criterion 8 needs a user-supplied real
//! dataset and is only documented.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use common::{
    check_meta_paths, check_sampling, final_value, gradcheck_encoders, gradcheck_ops, loss_fixtures, loss_value,
    random_loss_instance, GRAD_TOLERANCE,
};
use hgcl_core::eval::{
    evaluate_classification, evaluate_clustering, generate_synthetic, majority_baseline, robustness_report, robustness_suite,
    ClassificationOptions, Perturbation, DEFAULT_LEVELS, DEFAULT_RATIOS,
};
use hgcl_core::trainer::train;
use hgcl_core::{SyntheticSpec, TrainConfig};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.1?}, limit {limit:?}"))
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let (mut worst, mut checks) = (0.0f64, 0);
    for seed in 0..10 {
        for (name, r) in gradcheck_ops(seed).into_iter().chain(gradcheck_encoders(seed)) {
            ensure(r.max_relative_error < GRAD_TOLERANCE, || format!("seed {seed} {name}: relative error {:e}", r.max_relative_error))?;
            worst = worst.max(r.max_relative_error);
            checks += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("{checks} checks over 10 seeds, max relative error {worst:.2e}, {:.1?}", start.elapsed()))
}

fn meta_paths() -> Outcome {
    let start = Instant::now();
    let mut pairs = 0;
    for seed in 0..100 {
        pairs += check_meta_paths(seed)?;
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("100 graphs, {pairs} neighbour pairs, {:.1?}", start.elapsed()))
}

fn sampling() -> Outcome {
    let start = Instant::now();
    let mut positives = 0;
    for seed in 0..100 {
        positives += check_sampling(seed)?;
    }
    ensure(positives > 0, || "every instance had empty positive sets".into())?;
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("100 graphs, {positives} positive pairs, partition holds, {:.1?}", start.elapsed()))
}

fn loss() -> Outcome {
    let fixtures = loss_fixtures();
    for f in &fixtures {
        let v = f.value();
        ensure((v - f.expected).abs() < 1e-10, || format!("{}: {v} vs {}", f.name, f.expected))?;
    }
    for seed in 0..1000 {
        let (z, zp, p, tau) = random_loss_instance(seed);
        let v = loss_value(&z, &zp, &p, tau);
        ensure(v >= 0.0, || format!("instance {seed}: loss {v}"))?;
    }
    for seed in 0..1000 {
        let (zt, za, p, tau) = random_loss_instance(seed);
        let lambda = (seed % 1025) as f64 / 1024.0;
        let a = final_value(&zt, &za, &p, tau, lambda);
        let b = final_value(&za, &zt, &p, tau, 1.0 - lambda);
        ensure(a.to_bits() == b.to_bits(), || format!("instance {seed}: {a} != {b}"))?;
    }
    Ok(format!("{} fixtures to 1e-10, 1000 nonnegative, 1000 exact view swaps", fixtures.len()))
}

fn learning() -> Outcome {
    let start = Instant::now();
    let g = generate_synthetic(&SyntheticSpec::benchmark()).map_err(|e| e.to_string())?;
    let cfg = TrainConfig::default();
    let model = train(&g, &cfg).map_err(|e| e.to_string())?;
    let head = &model.loss_history[..10.min(model.loss_history.len())];
    ensure(head.len() == 10 && head.windows(2).all(|w| w[1] < w[0]), || format!("first losses {head:?}"))?;
    let labels = g.labels().expect("benchmark is labelled");
    let opts = ClassificationOptions { seed: cfg.seed, ..ClassificationOptions::default() };
    let scores = evaluate_classification(&model.z, labels, &[0.2], &opts).map_err(|e| e.to_string())?;
    let macro_f1 = scores[0].macro_mean_std().0;
    let clusters = evaluate_clustering(&model.z, labels, g.num_classes(), 10, cfg.seed).map_err(|e| e.to_string())?;
    let nmi = clusters.nmi_mean_std().0;
    ensure(macro_f1 >= 0.85, || format!("Macro-F1@0.2 {macro_f1:.4} < 0.85"))?;
    ensure(nmi >= 0.6, || format!("NMI {nmi:.4} < 0.6"))?;
    within(start.elapsed(), Duration::from_secs(600))?;
    Ok(format!(
        "{} epochs, loss {:.4} -> {:.4}, Macro-F1@0.2 {macro_f1:.4}, NMI {nmi:.4}, {:.1?}",
        model.loss_history.len(),
        model.loss_history[0],
        model.loss_history.last().unwrap(),
        start.elapsed()
    ))
}

fn robustness() -> Outcome {
    let start = Instant::now();
    let g = generate_synthetic(&SyntheticSpec::benchmark()).map_err(|e| e.to_string())?;
    let cfg = TrainConfig::default();
    let opts = ClassificationOptions { seed: cfg.seed, ..ClassificationOptions::default() };
    let run = || robustness_suite(&g, &cfg, &Perturbation::ALL, &DEFAULT_LEVELS, &DEFAULT_RATIOS, &opts).map_err(|e| e.to_string());
    let first = run()?;
    ensure(first.len() == 6, || format!("{} cells", first.len()))?;
    let second = run()?;
    ensure(first == second, || "rerun differs".into())?;
    let (csv_a, csv_b) = (robustness_report(&first, &cfg).to_csv(), robustness_report(&second, &cfg).to_csv());
    ensure(csv_a == csv_b, || "report CSV differs between runs".into())?;
    let baseline = majority_baseline(g.labels().expect("labelled"), &DEFAULT_RATIOS, &opts).map_err(|e| e.to_string())?;
    let masked = first
        .iter()
        .find(|c| c.perturbation == Perturbation::AttributeMasking && c.level == 0.75)
        .ok_or("no 75% masking cell")?;
    let mut detail = Vec::new();
    for (s, b) in masked.scores.iter().zip(&baseline) {
        let (m, base) = (s.macro_mean_std().0, b.macro_mean_std().0);
        ensure(m > base, || format!("masking 0.75 at ratio {}: Macro-F1 {m:.4} <= baseline {base:.4}", s.ratio))?;
        detail.push(format!("{}: {m:.3} vs {base:.3}", s.ratio));
    }
    Ok(format!("6 cells, bit-identical rerun, 75% masking Macro-F1 vs majority [{}], {:.1?}", detail.join(", "), start.elapsed()))
}

fn statistics() -> Outcome {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures");
    let out = Command::new(env!("CARGO_BIN_EXE_hgcl"))
        .arg("inspect")
        .arg(fixtures.join("acm_stats.json"))
        .arg(fixtures.join("yelp_stats.json"))
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let table = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    let density = |name: &str| {
        table
            .lines()
            .find(|l| l.starts_with(name))
            .and_then(|l| l.rsplit('|').next())
            .map(|d| d.trim().to_string())
            .ok_or_else(|| format!("no {name} row in\n{table}"))
    };
    let (acm, yelp) = (density("ACM")?, density("Yelp")?);
    ensure(acm == "0.00021", || format!("ACM density {acm}"))?;
    ensure(yelp == "0.00235", || format!("Yelp density {yelp}"))?;
    Ok(format!("ACM {acm}, Yelp {yelp}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("gradient correctness", gradients),
        ("meta-path oracle equivalence", meta_paths),
        ("sampling oracle equivalence", sampling),
        ("loss sanity", loss),
        ("end-to-end learning", learning),
        ("robustness protocol", robustness),
        ("dataset statistics", statistics),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("SKIP 8 real-data check: optional, needs a user-prepared dataset (see README)");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
