use crate::{CliError, Command, ConfigArgs, EvalArgs};
use hgcl_core::eval::{
    ablation_report, ablation_suite, evaluate_classification, evaluate_clustering, generate_synthetic, parameter_sweep,
    robustness_report, robustness_suite, sweep_report, ClassificationOptions, Perturbation, Variant,
};
use hgcl_core::graph::{load_graph, render_statistics_table, save_graph};
use hgcl_core::trainer::{export_embeddings, preprocess, read_embeddings, train_preprocessed, write_loss_history};
use hgcl_core::{EvalReport, GraphStats, HeteroGraph, SyntheticSpec, TrainConfig};
use std::path::{Path, PathBuf};

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth { out, classes, per_class, seed, signal, noise, spec } => {
            synth(&out, classes, per_class, seed, signal, noise, spec.as_deref())
        }
        Command::Train { cfg, data, out } => train(&cfg, &data, &out),
        Command::Classify { cfg, data, embeddings, out, eval } => classify(&cfg, &data, &embeddings, &out, &eval),
        Command::Cluster { cfg, data, embeddings, out, repeats } => cluster(&cfg, &data, &embeddings, &out, repeats),
        Command::Robustness { cfg, data, out, levels, perturbations, eval } => {
            robustness(&cfg, &data, &out, &levels, &perturbations, &eval)
        }
        Command::Ablate { cfg, data, out, variants, eval } => ablate(&cfg, &data, &out, &variants, &eval),
        Command::Sweep { cfg, data, out, deltas, epsilons, delta_path, eval } => {
            sweep(&cfg, &data, &out, &deltas, &epsilons, delta_path.as_deref(), &eval)
        }
        Command::Inspect { paths } => inspect(&paths),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(io_err(path))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn load_config(args: &ConfigArgs) -> Result<TrainConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => TrainConfig::from_file(path)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn options(cfg: &TrainConfig, repeats: usize) -> ClassificationOptions {
    ClassificationOptions { repeats, seed: cfg.seed, ..ClassificationOptions::default() }
}

fn labels(g: &HeteroGraph) -> Result<&[usize], CliError> {
    g.labels().ok_or_else(|| CliError::Usage(format!("target type {} has no labels", g.target_name())))
}

fn write_report(report: &EvalReport, out: &Path, stem: &str) -> Result<(), CliError> {
    report.write_all(out, stem).map_err(io_err(out))?;
    print!("{}", report.summary());
    Ok(())
}

fn synth(
    out: &Path,
    classes: usize,
    per_class: usize,
    seed: u64,
    signal: Option<f64>,
    noise: Option<f64>,
    spec_path: Option<&Path>,
) -> Result<(), CliError> {
    let mut spec = match spec_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(io_err(p))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => SyntheticSpec { classes, per_class, seed, ..SyntheticSpec::benchmark() },
    };
    if spec_path.is_some() {
        spec.seed = seed;
    }
    spec.signal = signal.unwrap_or(spec.signal);
    spec.noise = noise.unwrap_or(spec.noise);
    let g = generate_synthetic(&spec)?;
    save_graph(&g, out, Some("synthetic"))?;
    write(&out.join("spec.json"), &(serde_json::to_string_pretty(&spec).expect("spec serializes") + "\n"))?;
    print!("{}", render_statistics_table(&[g.stats("synthetic")]));
    Ok(())
}

fn train(args: &ConfigArgs, data: &Path, out: &Path) -> Result<(), CliError> {
    let cfg = load_config(args)?;
    let g = load_graph(data)?;
    create_dir(out)?;
    let prep = preprocess(&g, &cfg)?;
    let model = train_preprocessed(&g, &prep, &cfg)?;
    export_embeddings(&model.z, &out.join("embeddings.csv"))?;
    model.save_checkpoint(&out.join("checkpoint.bin"))?;
    let history = out.join("loss_history.csv");
    write_loss_history(&model.loss_history, &history).map_err(io_err(&history))?;
    let samples = out.join("samples.csv");
    prep.samples.write_csv(&samples).map_err(io_err(&samples))?;
    write(&out.join("config.json"), &(cfg.to_json() + "\n"))?;
    let last = model.loss_history.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained {} epochs{} final loss {last} config {} embeddings {}x{}",
        model.loss_history.len(),
        if model.stopped_early { " (early stop)" } else { "" },
        cfg.hash(),
        model.z.rows(),
        model.z.cols()
    );
    Ok(())
}

/// The configuration that produced `embeddings`: `config.json` beside it
/// when present, otherwise the command-line configuration.
fn embedding_config(args: &ConfigArgs, embeddings: &Path) -> Result<TrainConfig, CliError> {
    let beside = embeddings.parent().map(|d| d.join("config.json")).filter(|p| p.is_file());
    match (&args.config, beside) {
        (None, Some(path)) => {
            let mut cfg = TrainConfig::from_file(&path)?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            Ok(cfg)
        }
        _ => load_config(args),
    }
}

fn classify(args: &ConfigArgs, data: &Path, embeddings: &Path, out: &Path, eval: &EvalArgs) -> Result<(), CliError> {
    let cfg = embedding_config(args, embeddings)?;
    let g = load_graph(data)?;
    let z = read_embeddings(embeddings)?;
    let scores = evaluate_classification(&z, labels(&g)?, &eval.ratios, &options(&cfg, eval.repeats))?;
    let mut report = EvalReport::new("classification", cfg.seed, cfg.hash());
    report.add_classification("HGCL", &scores);
    write_report(&report, out, "classification")
}

fn cluster(args: &ConfigArgs, data: &Path, embeddings: &Path, out: &Path, repeats: usize) -> Result<(), CliError> {
    let cfg = embedding_config(args, embeddings)?;
    let g = load_graph(data)?;
    let z = read_embeddings(embeddings)?;
    let scores = evaluate_clustering(&z, labels(&g)?, g.num_classes(), repeats, cfg.seed)?;
    let mut report = EvalReport::new("clustering", cfg.seed, cfg.hash());
    report.add_clustering("HGCL", &scores);
    write_report(&report, out, "clustering")
}

fn parse_perturbation(name: &str) -> Result<Perturbation, CliError> {
    Perturbation::ALL
        .into_iter()
        .find(|p| p.as_str() == name)
        .ok_or_else(|| CliError::Usage(format!("unknown perturbation {name:?}")))
}

fn check_unit(values: &[f64], what: &str) -> Result<(), CliError> {
    match values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(CliError::Usage(format!("{what} {v} outside [0, 1]"))),
        None => Ok(()),
    }
}

fn robustness(
    args: &ConfigArgs,
    data: &Path,
    out: &Path,
    levels: &[f64],
    perturbations: &[String],
    eval: &EvalArgs,
) -> Result<(), CliError> {
    check_unit(levels, "level")?;
    let perturbations = perturbations.iter().map(|p| parse_perturbation(p)).collect::<Result<Vec<_>, _>>()?;
    let cfg = load_config(args)?;
    let g = load_graph(data)?;
    let cells = robustness_suite(&g, &cfg, &perturbations, levels, &eval.ratios, &options(&cfg, eval.repeats))?;
    write_report(&robustness_report(&cells, &cfg), out, "robustness")
}

fn ablate(args: &ConfigArgs, data: &Path, out: &Path, variants: &[String], eval: &EvalArgs) -> Result<(), CliError> {
    let variants = if variants.is_empty() {
        Variant::ALL.to_vec()
    } else {
        variants
            .iter()
            .map(|name| {
                Variant::ALL
                    .into_iter()
                    .find(|v| v.name() == name)
                    .ok_or_else(|| CliError::Usage(format!("unknown variant {name:?}")))
            })
            .collect::<Result<_, _>>()?
    };
    let cfg = load_config(args)?;
    let g = load_graph(data)?;
    let results = ablation_suite(&g, &cfg, &variants, &eval.ratios, &options(&cfg, eval.repeats))?;
    write_report(&ablation_report(&results, &cfg), out, "ablation")
}

fn sweep(
    args: &ConfigArgs,
    data: &Path,
    out: &Path,
    deltas: &[f64],
    epsilons: &[f64],
    delta_path: Option<&str>,
    eval: &EvalArgs,
) -> Result<(), CliError> {
    check_unit(deltas, "delta")?;
    let cfg = load_config(args)?;
    let g = load_graph(data)?;
    if let Some(name) = delta_path {
        if !g.meta_paths().iter().any(|m| m.name == name) {
            return Err(CliError::Usage(format!("dataset has no meta-path named {name:?}")));
        }
    }
    let cells = parameter_sweep(&g, &cfg, delta_path, deltas, epsilons, &eval.ratios, &options(&cfg, eval.repeats))?;
    write_report(&sweep_report(&cells, &cfg), out, "sweep")
}

fn inspect(paths: &[PathBuf]) -> Result<(), CliError> {
    let stats = paths
        .iter()
        .map(|p| {
            if p.is_dir() {
                let g = load_graph(p)?;
                let schema = hgcl_core::graph::Schema::read(p)?;
                let name = schema.name.unwrap_or_else(|| p.file_name().map_or("dataset".into(), |n| n.to_string_lossy().into_owned()));
                Ok(g.stats(&name))
            } else {
                Ok(GraphStats::from_json_file(p)?)
            }
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    print!("{}", render_statistics_table(&stats));
    Ok(())
}
