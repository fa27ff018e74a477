use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use softforest::data::{build_augmented_dataset, load_mnist, make_blobs, make_xor, Dataset, Sample, DATA_DIR_ENV};
use softforest::forest::{layer_features, train_forest_with, Evaluation, ForestOptions};
use softforest::model_io::{decode_model, export_dot as write_dot, save_model};
use softforest::seed::derive_seed;
use softforest::training::{backward, compare_gradients, finite_difference_grad, tree_accuracy, GradientDiscrepancy};
use softforest::tree::ParamCounts;
use softforest::{ForestModel, Tree, Variant};

use crate::config::{parse_config, DatasetKind, RunConfig};
use crate::{CliError, CountParamsArgs, EvalArgs, ExportDotArgs, GradcheckArgs, RunArgs, TrainArgs};

pub const METRICS_HEADER: &str = "record,layer,tree,train_samples,final_train_loss,test_accuracy";

const GRADCHECK_TOLERANCE: f64 = 1e-6;
const GRADCHECK_FLOOR: f64 = 1e-8;

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn read_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            Ok(parse_config(&text)?)
        }
    }
}

/// Loads the file named by `--config` and applies flag overrides through
/// the same validation as file values.
pub fn resolve_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut c = read_config(args.config.as_deref())?;
    if let Some(d) = &args.data_dir {
        c.data_dir = Some(d.clone());
    }
    let overrides = [
        ("seed", args.seed.map(|v| v.to_string())),
        ("workers", args.workers.map(|v| v.to_string())),
        ("subset", args.subset.map(|v| v.to_string())),
        ("layers", args.layers.map(|v| v.to_string())),
        ("trees", args.trees.map(|v| v.to_string())),
        ("depth", args.depth.map(|v| v.to_string())),
        ("variant", args.variant.clone()),
        ("filters", args.filters.map(|v| v.to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            c.set(key, &v)?;
        }
    }
    c.validate()?;
    Ok(c)
}

fn data_dir(config: &RunConfig) -> Result<PathBuf, CliError> {
    config
        .data_dir
        .clone()
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .ok_or_else(|| CliError::Data(format!("no MNIST directory given (use --data-dir or {DATA_DIR_ENV})")))
}

/// `(train, test)` for the configured dataset. Synthetic test sets come from
/// an independent seed stream.
pub fn load_data(config: &RunConfig) -> Result<(Dataset, Dataset), CliError> {
    let (n, sigma, seed) = (config.synthetic_points, config.synthetic_noise, config.seed);
    match config.dataset {
        DatasetKind::Mnist => {
            let dir = data_dir(config)?;
            load_mnist(&dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
        }
        DatasetKind::Blobs => Ok((
            make_blobs(n, sigma, derive_seed(seed, 0, 0)),
            make_blobs(n, sigma, derive_seed(seed, 0, 1)),
        )),
        DatasetKind::Xor => Ok((
            make_xor(n, sigma, derive_seed(seed, 0, 0)),
            make_xor(n, sigma, derive_seed(seed, 0, 1)),
        )),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

pub fn read_model(path: &Path) -> Result<ForestModel, CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    decode_model(&bytes).map_err(|e| CliError::Model(format!("{}: {e}", path.display())))
}

fn accuracy_line(eval: &Evaluation, n: usize) -> String {
    let hits: usize = (0..eval.confusion.len()).map(|i| eval.confusion[i][i]).sum();
    format!("test accuracy {:.6} ({hits}/{n})", eval.accuracy)
}

/// Accuracy of every individual tree on the test set, `[layer][tree]`.
fn per_tree_accuracy(model: &ForestModel, test: &Dataset) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rep = test.clone();
    let mut out = Vec::new();
    for (l, layer) in model.layers().iter().enumerate() {
        out.push(
            layer
                .trees
                .iter()
                .map(|t| tree_accuracy(t, &rep))
                .collect::<Result<Vec<_>, _>>()?,
        );
        if l + 1 < model.layers().len() {
            let samples = rep
                .iter()
                .zip(test.iter())
                .map(|(r, s)| {
                    Ok(Sample::new(
                        layer_features(&layer.trees, &r.features, &s.features)?,
                        s.label,
                    ))
                })
                .collect::<Result<Vec<_>, softforest::Error>>()?;
            let dim = test.feature_dim() + test.class_count() * layer.trees.len();
            rep = Dataset::new(samples, dim, test.class_count())?;
        }
    }
    Ok(out)
}

pub fn train(args: &TrainArgs) -> Result<(), CliError> {
    let mut config = resolve_config(&args.run)?;
    if let Some(m) = &args.model {
        config.model = m.clone();
    }
    if let Some(o) = &args.out {
        config.metrics = o.clone();
    }
    let start = Instant::now();
    let (train, test) = load_data(&config)?;
    // drop each superseded copy; full MNIST with augmentation is gigabytes
    let train = if config.subset > 0 {
        let subset = train.shuffled_subset(config.subset, config.seed);
        drop(train);
        subset
    } else {
        train
    };
    let train = if config.augment.copies_per_sample > 0 {
        let augmented = build_augmented_dataset(&train, &config.augment_config())?;
        drop(train);
        augmented
    } else {
        train
    };
    println!(
        "training {} layer(s) x {} {} tree(s), depth {}, {} filter(s) on {} samples",
        config.layers,
        config.trees,
        config.variant,
        config.depth,
        config.filters,
        train.len()
    );
    let options = ForestOptions {
        workers: config.workers,
    };
    let trained = train_forest_with(
        &train,
        &config.layer_specs(),
        &config.train_config(),
        config.seed,
        options,
    )?;
    let eval = trained.model.evaluate_with(&test, config.workers)?;
    let tree_acc = per_tree_accuracy(&trained.model, &test)?;

    let mut sink = create(&config.model)?;
    save_model(&trained.model, &mut sink)?;
    sink.flush().map_err(|e| io_err(&config.model, e))?;

    let mut csv = create(&config.metrics)?;
    let mut rows = vec![METRICS_HEADER.to_string()];
    let mut losses = Vec::new();
    for (l, logs) in trained.logs.iter().enumerate() {
        for (t, log) in logs.iter().enumerate() {
            let loss = log.final_loss().unwrap_or(f64::NAN);
            losses.push(loss);
            rows.push(format!("tree,{l},{t},{},{loss},{}", train.len(), tree_acc[l][t]));
        }
        println!(
            "layer {l}: mean final training loss {:.6}",
            logs.iter().filter_map(|g| g.final_loss()).sum::<f64>() / logs.len() as f64
        );
    }
    let mean_loss = losses.iter().sum::<f64>() / losses.len() as f64;
    rows.push(format!("summary,,,{},{mean_loss},{}", train.len(), eval.accuracy));
    for r in rows {
        writeln!(csv, "{r}").map_err(|e| io_err(&config.metrics, e))?;
    }
    csv.flush().map_err(|e| io_err(&config.metrics, e))?;

    println!("{}", accuracy_line(&eval, test.len()));
    println!("model written to {}", config.model.display());
    println!("metrics written to {}", config.metrics.display());
    println!("elapsed {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let run = RunArgs {
        config: args.config.clone(),
        data_dir: args.data_dir.clone(),
        workers: args.workers,
        ..RunArgs::default()
    };
    let mut config = resolve_config(&run)?;
    // evaluation never augments
    config.augment.copies_per_sample = 0;
    let model = read_model(&args.model)?;
    let (_, test) = load_data(&config)?;
    if test.feature_dim() != model.input_dim() || test.class_count() != model.class_count() {
        return Err(CliError::Usage(format!(
            "model expects {} features and {} classes, dataset has {} and {}",
            model.input_dim(),
            model.class_count(),
            test.feature_dim(),
            test.class_count()
        )));
    }
    let eval = model.evaluate_with(&test, config.workers)?;
    let mut csv = create(&args.out)?;
    let c = eval.confusion.len();
    let header: Vec<String> = std::iter::once("true_class".to_string())
        .chain((0..c).map(|k| format!("pred_{k}")))
        .collect();
    let mut text = header.join(",") + "\n";
    for (i, row) in eval.confusion.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(usize::to_string).collect();
        text.push_str(&format!("{i},{}\n", cells.join(",")));
    }
    csv.write_all(text.as_bytes()).map_err(|e| io_err(&args.out, e))?;
    csv.flush().map_err(|e| io_err(&args.out, e))?;
    println!("{}", accuracy_line(&eval, test.len()));
    println!("confusion matrix written to {}", args.out.display());
    Ok(())
}

/// Random small tree for gradient checking, drawn from `rng`.
pub fn gradcheck_case(trial: usize, rng: &mut ChaCha8Rng) -> Result<(Tree, Vec<f64>, usize), CliError> {
    let variant = if trial.is_multiple_of(2) {
        Variant::Budding
    } else {
        Variant::Distributed
    };
    let filters = if trial % 4 < 2 { 1 } else { 3 };
    let depth = rng.random_range(0..=3);
    let d = rng.random_range(1..=10);
    let c = rng.random_range(2..=5);
    let mut tree = Tree::new_complete(variant, d, c, depth, filters, rng)?;
    let params: Vec<f64> = (0..tree.count_parameters())
        .map(|_| rng.random_range(-1.5..=1.5))
        .collect();
    tree.set_params(&params)?;
    let x = (0..d).map(|_| rng.random_range(0.0..=1.0)).collect();
    let label = rng.random_range(0..c);
    Ok((tree, x, label))
}

pub fn gradcheck(args: &GradcheckArgs) -> Result<(), CliError> {
    if !(args.step > 0.0 && args.step.is_finite()) {
        return Err(CliError::Usage(format!("--step must be positive, got {}", args.step)));
    }
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let mut worst = GradientDiscrepancy::default();
    for trial in 0..args.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(args.seed, trial as u64, 0));
        let (tree, x, label) = gradcheck_case(trial, &mut rng)?;
        let (_, mut analytic) = backward(&tree, &x, label)?;
        if args.corrupt_gradient {
            let g = &mut analytic.values_mut()[0];
            *g += 1e-3 * g.abs().max(1.0);
        }
        let numeric = finite_difference_grad(&tree, &x, label, args.step)?;
        worst = worst.merge(compare_gradients(&tree, &analytic, &numeric, GRADCHECK_FLOOR)?);
    }
    println!(
        "gradcheck: {} trials, step {:e}, tolerance {:e}",
        args.trials, args.step, GRADCHECK_TOLERANCE
    );
    println!("family    max_relative_error");
    println!("gating    {:.3e}", worst.gating);
    println!("leafness  {:.3e}", worst.leafness);
    println!("payoff    {:.3e}", worst.payoff);
    println!("overall   {:.3e}", worst.overall);
    if worst.overall < GRADCHECK_TOLERANCE {
        println!("PASS");
        Ok(())
    } else {
        println!("FAIL");
        Err(CliError::GradCheckFailed(worst.overall))
    }
}

pub fn export_dot(args: &ExportDotArgs) -> Result<(), CliError> {
    let model = read_model(&args.model)?;
    let layer = model.layers().get(args.layer).ok_or_else(|| {
        CliError::Usage(format!(
            "--layer {} out of range (model has {})",
            args.layer,
            model.layers().len()
        ))
    })?;
    let tree = layer.trees.get(args.tree).ok_or_else(|| {
        CliError::Usage(format!(
            "--tree {} out of range (layer has {})",
            args.tree,
            layer.trees.len()
        ))
    })?;
    if !(args.threshold > 0.5 && args.threshold <= 1.0) {
        return Err(CliError::Usage(format!(
            "--threshold {} outside (0.5, 1]",
            args.threshold
        )));
    }
    match &args.out {
        Some(path) => {
            write_dot(tree, args.threshold, create(path)?)?;
            let pruned = tree.prune_hard(args.threshold)?;
            println!(
                "wrote {} ({} nodes, depth {})",
                path.display(),
                pruned.node_count(),
                pruned.depth()
            );
        }
        None => write_dot(tree, args.threshold, io::stdout().lock())?,
    }
    Ok(())
}

/// Gating filters per layer, for recounting under other conventions.
fn filter_totals(model: &ForestModel) -> Vec<usize> {
    model
        .layers()
        .iter()
        .map(|l| {
            let mut n = 0;
            for t in &l.trees {
                t.root().visit_preorder(&mut |node, _| {
                    n += node.gating.len() + node.gating2.as_ref().map_or(0, Vec::len);
                });
            }
            n
        })
        .collect()
}

pub fn count_params(args: &CountParamsArgs) -> Result<(), CliError> {
    let model = match &args.model {
        Some(path) => read_model(path)?,
        None => {
            let config = resolve_config(&args.run)?;
            let (d0, c) = config.dataset.shape();
            ForestModel::new_untrained(d0, c, &config.layer_specs(), config.seed)?
        }
    };
    let counts = model.parameter_counts();
    for (l, layer) in model.layers().iter().enumerate() {
        let s = layer.spec;
        let n: usize = layer.trees.iter().map(Tree::count_parameters).sum();
        println!(
            "layer {l}: {} {} tree(s), depth {}, {} filter(s), input dim {}: {n}",
            s.tree_count,
            s.variant,
            s.max_depth,
            s.filters_per_node,
            layer.input_dim()
        );
    }
    print_counts(&counts);

    if let Some(reference) = args.reference {
        let d0 = model.input_dim();
        let filters = filter_totals(&model);
        let dims: Vec<usize> = model.layers().iter().map(|l| l.input_dim()).collect();
        let weights_only: usize = filters.iter().zip(&dims).map(|(f, d)| f * d).sum();
        let at_raw_dim = counts.total() - counts.gating + filters.iter().map(|f| f * (d0 + 1)).sum::<usize>();
        let rows = [
            ("all trainable scalars", counts.total()),
            ("gating weights and biases", counts.gating),
            ("gating weights only", weights_only),
            ("every layer at the raw input dim", at_raw_dim),
        ];
        println!(
            "reference {reference}: difference {}",
            counts.total() as i64 - reference as i64
        );
        println!("{:<34} {:>12} {:>10}", "convention", "count", "ratio");
        for (name, n) in rows {
            println!("{name:<34} {n:>12} {:>10.4}", n as f64 / reference as f64);
        }
    }
    Ok(())
}

fn print_counts(c: &ParamCounts) {
    println!("total parameters {}", c.total());
    println!("  gating   {}", c.gating);
    println!("  leafness {}", c.leafness);
    println!("  payoff   {}", c.payoff);
}
