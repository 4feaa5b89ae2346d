use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn survpipe(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_survpipe"))
        .current_dir(dir)
        .env("SURVPIPE_THREADS", "2")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = survpipe(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn exit_code(dir: &Path, args: &[&str]) -> i32 {
    survpipe(dir, args).status.code().unwrap()
}

const MATRIX: [&str; 4] = ["--input", "matrix.csv", "--map", "map.json"];

fn with_matrix<'a>(args: &[&'a str]) -> Vec<&'a str> {
    [args, &MATRIX[..]].concat()
}

/// Synthesizes a small extract and runs it through every preparation step.
fn prepared(dir: &Path) {
    ok(dir, &["synth", "--rows", "1500", "--seed", "3", "--output", "records.txt", "--schema-output", "records.schema"]);
    ok(dir, &["ingest", "--schema", "records.schema", "--input", "records.txt", "--output", "records.csv"]);
    let steps: [(&[&str], &str, &str); 5] = [
        (&["prep", "label"], "records.csv", "labeled.csv"),
        (&["prep", "drop", "--fields", "age,number_of_tumors"], "labeled.csv", "kept.csv"),
        (&["prep", "cohort", "--cohort", "white"], "kept.csv", "white.csv"),
        (&["prep", "impute", "--model-output", "mice.json"], "white.csv", "imputed.csv"),
        (
            &["prep", "encode", "--map-output", "map.json", "--standardizer-output", "std.json"],
            "imputed.csv",
            "matrix.csv",
        ),
    ];
    for (step, input, output) in steps {
        let args = [step, &["--schema", "records.schema", "--input", input, "--output", output][..]].concat();
        ok(dir, &args);
    }
}

#[test]
fn step_by_step_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    prepared(d);

    let csv = ok(d, &["ingest", "--schema", "records.schema", "--input", "records.csv", "--format", "csv"]);
    assert_eq!(csv, fs::read_to_string(d.join("records.csv")).unwrap());
    let header = fs::read_to_string(d.join("matrix.csv")).unwrap();
    assert!(header.starts_with("marital_status=1,"), "{}", &header[..40]);

    fs::write(d.join("forest.toml"), "n_trees = 10\nmax_depth = 4\n").unwrap();
    fs::write(d.join("mlp.toml"), "hidden = [4]\nepochs = 1\n").unwrap();
    ok(d, &with_matrix(&["train", "--model", "logistic", "--output", "lr.bin"]));
    ok(
        d,
        &with_matrix(&["train", "--model", "forest", "--config", "forest.toml", "--imbalance", "weights", "--output", "rf.bin"]),
    );
    ok(d, &with_matrix(&["train", "--model", "mlp", "--config", "mlp.toml", "--output", "nn.bin"]));

    let eval = ok(d, &with_matrix(&["eval", "--model", "lr.bin", "--roc", "roc.csv"]));
    let auc: f64 = eval.lines().next().unwrap().strip_prefix("auc ").unwrap().parse().unwrap();
    assert!(auc > 0.7, "{eval}");
    assert!(fs::read_to_string(d.join("roc.csv")).unwrap().starts_with("fpr,tpr\n0,0\n"));

    let ranked = ok(d, &["rank", "--model", "rf.bin", "--map", "map.json", "--top", "3", "--output", "rank.csv"]);
    assert_eq!(ranked.lines().count(), 2 + 3);
    assert_eq!(fs::read_to_string(d.join("rank.csv")).unwrap().lines().count(), 1 + 3);
    assert_eq!(exit_code(d, &["rank", "--model", "nn.bin", "--map", "map.json"]), 3);

    fs::write(
        d.join("grid.toml"),
        "[[models]]\nkind = \"logistic\"\nlearning_rate = 0.0\n[[models]]\nkind = \"logistic\"\nepochs = 50\n",
    )
    .unwrap();
    let cv = ok(d, &with_matrix(&["cv", "--grid", "grid.toml", "--k", "3"]));
    assert!(cv.lines().last().unwrap().starts_with("selected grid point 1 (logistic)"), "{cv}");
}

#[test]
fn experiment_runs_and_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let body = |cohort: &str| {
        format!(
            "seed = 5\ncohorts = [\"{cohort}\"]\nk = 3\n[data]\nkind = \"synthetic\"\nn_rows = 2000\n\
             [[models]]\nkind = \"logistic\"\nepochs = 40\n[[models]]\nkind = \"adaboost\"\nn_rounds = 5\n"
        )
    };
    fs::write(d.join("white.toml"), body("white")).unwrap();
    fs::write(d.join("hispanic.toml"), body("hispanic")).unwrap();
    let printed = ok(d, &["run", "--config", "white.toml", "--out", "white"]);
    assert!(printed.starts_with("Model"), "{printed}");
    ok(d, &["run", "--config", "hispanic.toml", "--out", "hispanic"]);
    let cmp = ok(d, &["compare", "white/manifest.json", "hispanic/manifest.json", "--out", "cmp"]);
    assert!(cmp.contains("White") && cmp.contains("Hispanic"), "{cmp}");
    for name in ["auc", "gmean", "rankings"] {
        assert!(d.join(format!("cmp/compare_{name}.csv")).exists());
    }
}

#[test]
fn exit_codes_separate_configuration_from_data() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("good.schema"), "record_width 4\nage continuous 0 3\nsex categorical 3 1\n").unwrap();
    fs::write(d.join("bad.schema"), "record_width 4\nage numeric 0 3\n").unwrap();
    fs::write(d.join("short.txt"), "0681\n07\n").unwrap();
    fs::write(d.join("fine.txt"), "0681\n0712\n").unwrap();

    assert_eq!(exit_code(d, &["ingest", "--schema", "good.schema", "--input", "fine.txt"]), 0);
    assert_eq!(exit_code(d, &["ingest", "--schema", "bad.schema", "--input", "fine.txt"]), 2);
    assert_eq!(exit_code(d, &["ingest", "--schema", "good.schema", "--input", "short.txt"]), 3);
    assert_eq!(exit_code(d, &["ingest", "--schema", "good.schema", "--input", "fine.txt", "--bogus"]), 2);

    fs::write(d.join("bad.toml"), "seed = 1\nk = 1\n[data]\nkind = \"synthetic\"\n").unwrap();
    assert_eq!(exit_code(d, &["run", "--config", "bad.toml", "--out", "out"]), 2);
    assert_eq!(exit_code(d, &["run", "--config", "missing.toml", "--out", "out"]), 2);
    let out = survpipe(d, &["ingest", "--schema", "bad.schema", "--input", "fine.txt"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}
