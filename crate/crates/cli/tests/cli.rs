use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use softforest::forest::Layer;
use softforest::model_io::encode_model;
use softforest::{ForestModel, LayerSpec, Node, Tree, Variant};
use softforest_cli::commands::METRICS_HEADER;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_softforest"));
    cmd.env_remove("SOFTFOREST_DATA_DIR");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn softforest")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn blobs_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/blobs.conf")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.conf");
    fs::write(&path, text).unwrap();
    path
}

fn accuracy(stdout: &str) -> f64 {
    let line = stdout
        .lines()
        .find(|l| l.starts_with("test accuracy "))
        .expect("accuracy line");
    line.split_whitespace().nth(2).unwrap().parse().unwrap()
}

/// Trains the checked-in blobs config into `dir`.
fn train_blobs(dir: &Path) -> (PathBuf, PathBuf, Output) {
    let model = dir.join("model.bin");
    let metrics = dir.join("metrics.csv");
    let out = run(bin()
        .arg("train")
        .arg("--config")
        .arg(blobs_config())
        .arg("--model")
        .arg(&model)
        .arg("--out")
        .arg(&metrics));
    (model, metrics, out)
}

#[test]
fn blobs_config_trains_quickly_and_accurately() {
    let dir = TempDir::new().unwrap();
    let start = Instant::now();
    let (model, metrics, out) = train_blobs(dir.path());
    let elapsed = start.elapsed();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    assert!(accuracy(&stdout(&out)) >= 0.99, "{}", stdout(&out));
    assert!(model.is_file());

    let csv = fs::read_to_string(metrics).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], METRICS_HEADER);
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("tree,0,0,200,"));
    assert!(lines[2].starts_with("summary,,,200,"));
    assert!(lines.iter().all(|l| l.split(',').count() == 6));
}

#[test]
fn eval_reproduces_training_accuracy_and_confusion_rows_match_class_counts() {
    let dir = TempDir::new().unwrap();
    let (model, _, trained) = train_blobs(dir.path());
    assert!(trained.status.success(), "{}", stderr(&trained));
    let confusion = dir.path().join("confusion.csv");
    let out = run(bin()
        .arg("eval")
        .arg("--model")
        .arg(&model)
        .arg("--config")
        .arg(blobs_config())
        .arg("--out")
        .arg(&confusion));
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(accuracy(&stdout(&out)), accuracy(&stdout(&trained)));

    let csv = fs::read_to_string(confusion).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("true_class,pred_0,pred_1"));
    for (i, line) in lines.enumerate() {
        let cells: Vec<usize> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells[0], i);
        assert_eq!(cells[1..].iter().sum::<usize>(), 100);
    }
}

#[test]
fn constant_model_scores_one_half_on_balanced_blobs() {
    let dir = TempDir::new().unwrap();
    let tree = Tree::from_root(Variant::Budding, 2, 2, 0, Node::leaf(vec![1.0, 0.0])).unwrap();
    let spec = LayerSpec {
        tree_count: 1,
        variant: Variant::Budding,
        max_depth: 0,
        filters_per_node: 1,
    };
    let model = ForestModel::from_layers(
        vec![Layer {
            spec,
            trees: vec![tree],
        }],
        2,
        2,
    )
    .unwrap();
    let path = dir.path().join("stub.bin");
    fs::write(&path, encode_model(&model)).unwrap();
    let out = run(bin()
        .arg("eval")
        .arg("--model")
        .arg(&path)
        .arg("--config")
        .arg(blobs_config())
        .arg("--out")
        .arg(dir.path().join("c.csv")));
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(accuracy(&stdout(&out)), 0.5);
    let csv = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert_eq!(csv, "true_class,pred_0,pred_1\n0,100,0\n1,100,0\n");
}

#[test]
fn config_errors_name_the_key_and_exit_nonzero() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("depth = -1\n", "depth"),
        ("dataset = blobs\nbogus_key = 3\n", "bogus_key"),
        ("dataset = xor\naugment_copies = 1\n", "augment_copies"),
        ("variant = hard\n", "variant"),
        ("trees = 2\ntrees = 3\n", "trees"),
    ];
    for (text, key) in cases {
        let config = write_config(dir.path(), text);
        let out = run(bin().arg("train").arg("--config").arg(&config));
        assert_eq!(out.status.code(), Some(2), "{text}: {}", stderr(&out));
        let err = stderr(&out);
        assert!(err.contains(&format!("`{key}`")), "{text}: {err}");
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    }
}

#[test]
fn flag_overrides_are_validated_like_config_keys() {
    let out = run(bin().args(["count-params", "--variant", "leafy"]));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`variant`"));
}

#[test]
fn mnist_without_a_directory_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "dataset = mnist\n");
    let out = run(bin().arg("train").arg("--config").arg(&config));
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("SOFTFOREST_DATA_DIR"));
}

#[test]
fn data_directory_falls_back_to_the_environment() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let config = write_config(dir.path(), "dataset = mnist\n");
    let out = run(bin()
        .arg("train")
        .arg("--config")
        .arg(&config)
        .env("SOFTFOREST_DATA_DIR", &empty));
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.contains(empty.to_str().unwrap()), "{err}");
}

#[test]
fn corrupt_model_is_rejected() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("junk.bin");
    fs::write(&path, b"not a model").unwrap();
    let out = run(bin().arg("export-dot").arg("--model").arg(&path));
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn export_dot_writes_a_graph() {
    let dir = TempDir::new().unwrap();
    let (model, _, trained) = train_blobs(dir.path());
    assert!(trained.status.success());
    let out = run(bin().arg("export-dot").arg("--model").arg(&model));
    assert!(out.status.success(), "{}", stderr(&out));
    let dot = stdout(&out);
    assert!(dot.starts_with("digraph"));
    assert!(dot.trim_end().ends_with('}'));

    let file = dir.path().join("tree.dot");
    let out = run(bin()
        .arg("export-dot")
        .arg("--model")
        .arg(&model)
        .arg("--out")
        .arg(&file));
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(file).unwrap(), dot);

    let out = run(bin().arg("export-dot").arg("--model").arg(&model).args(["--tree", "4"]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn count_params_on_depth_one_models() {
    let dir = TempDir::new().unwrap();
    // d = 2, C = 2: one gate bank of 3 (two for distributed), leafness 1, payoffs 3 x 2
    for (variant, expected) in [("budding", 10), ("distributed", 13)] {
        let config = write_config(
            dir.path(),
            &format!("dataset = blobs\nvariant = {variant}\ndepth = 1\naugment_copies = 0\n"),
        );
        let out = run(bin().arg("count-params").arg("--config").arg(&config));
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(
            stdout(&out).contains(&format!("total parameters {expected}\n")),
            "{}",
            stdout(&out)
        );
    }

    let spec = LayerSpec {
        tree_count: 1,
        variant: Variant::Budding,
        max_depth: 1,
        filters_per_node: 1,
    };
    let model = ForestModel::new_untrained(4, 2, &[spec], 0).unwrap();
    let path = dir.path().join("d1.bin");
    fs::write(&path, encode_model(&model)).unwrap();
    let out = run(bin().arg("count-params").arg("--model").arg(&path));
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("total parameters 12\n"));
}

#[test]
fn gradcheck_passes_and_detects_corruption() {
    let out = run(bin().args(["gradcheck", "--trials", "20"]));
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("PASS"));
    let out = run(bin().args(["gradcheck", "--trials", "20", "--corrupt-gradient"]));
    assert_eq!(out.status.code(), Some(1));
}
