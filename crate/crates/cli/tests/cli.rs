use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn pdd(out_dir: &Path, args: &[&str]) -> Output {
    pdd_env(out_dir, args, &[])
}

fn pdd_env(out_dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pdd"));
    cmd.arg("--quiet").arg("--out-dir").arg(out_dir).args(args);
    cmd.env_remove("PDD_ENDPOINT").env_remove("PDD_MODEL");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("pdd runs")
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr has an error line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not JSON ({e}): {text}"))
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CORPUS: &str = "the cat sat on the mat\nthe dog sat on the log\na cat and a dog met on the mat\n";

fn examples(dir: &Path) -> PathBuf {
    write(
        dir,
        "examples.jsonl",
        concat!(
            r#"{"id":"m1","text":"the cat sat on the mat","label":"member"}"#,
            "\n",
            r#"{"id":"m2","text":"the dog sat on the log","label":"member"}"#,
            "\n",
            r#"{"id":"n1","text":"purple engines whistle quietly","label":"nonmember"}"#,
            "\n",
            r#"{"id":"n2","text":"seven lanterns drift over harbors","label":"nonmember"}"#,
            "\n",
        ),
    )
}

#[test]
fn perfectly_separated_scores_give_auc_one() {
    let dir = tempfile::tempdir().unwrap();
    let scores = write(
        dir.path(),
        "scores.jsonl",
        concat!(
            r#"{"id":"a","detector":"min_k_prob","value":-1.0,"label":"member"}"#,
            "\n",
            r#"{"id":"b","detector":"min_k_prob","value":-1.5,"label":"member"}"#,
            "\n",
            r#"{"id":"c","detector":"min_k_prob","value":-3.0,"label":"nonmember"}"#,
            "\n",
            r#"{"id":"d","detector":"min_k_prob","value":-4.0,"label":"nonmember"}"#,
            "\n",
        ),
    );
    let out = dir.path().join("out");
    let res = pdd(&out, &["eval", "--scores", s(&scores)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let eval = json(out.join("eval.json"));
    assert_eq!(eval["reports"][0]["auc"], 1.0);
    assert!(out.join("roc-min_k_prob.csv").exists());
    assert!(out.join("summary.csv").exists());

    let res = pdd(&out.join("cal"), &["calibrate", "--validation", s(&scores)]);
    assert!(res.status.success());
    let th = json(out.join("cal/threshold.json"));
    assert_eq!(th["threshold"]["achieved_accuracy"], 1.0);
    assert_eq!(th["threshold"]["epsilon"], -2.25);
}

#[test]
fn score_then_eval_with_bigram_backend() {
    let dir = tempfile::tempdir().unwrap();
    let train = write(dir.path(), "train.txt", CORPUS);
    let input = examples(dir.path());
    let out = dir.path().join("out");
    let res = pdd(
        &out,
        &[
            "score",
            "--input",
            s(&input),
            "--train",
            s(&train),
            "--detector",
            "min_k_prob,ppl,zlib",
        ],
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let lines = fs::read_to_string(out.join("scores.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 12);

    let res = pdd(&out.join("eval"), &["eval", "--scores", s(&out.join("scores.jsonl"))]);
    assert!(res.status.success());
    let eval = json(out.join("eval/eval.json"));
    let min_k = eval["reports"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["detector"] == "min_k_prob")
        .unwrap();
    assert_eq!(min_k["auc"], 1.0);

    let manifest = json(out.join("manifest.json"));
    assert_eq!(manifest["subcommand"], "score");
    let inputs: Vec<&str> = manifest["inputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["path"].as_str().unwrap())
        .collect();
    assert!(inputs.contains(&s(&input)));
    assert!(inputs.contains(&s(&train)));
}

#[test]
fn inputs_are_never_modified() {
    let dir = tempfile::tempdir().unwrap();
    let train = write(dir.path(), "train.txt", CORPUS);
    let input = examples(dir.path());
    let before = (fs::read(&train).unwrap(), fs::read(&input).unwrap());
    let res = pdd(dir.path(), &["score", "--input", s(&input), "--train", s(&train)]);
    assert!(res.status.success());
    assert_eq!(before, (fs::read(&train).unwrap(), fs::read(&input).unwrap()));

    // an output that would land on an input is refused
    let clash = write(
        dir.path(),
        "scores.jsonl",
        &String::from_utf8(before.1.clone()).unwrap(),
    );
    let res = pdd(dir.path(), &["score", "--input", s(&clash), "--train", s(&train)]);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(fs::read(&clash).unwrap(), before.1);
}

#[test]
fn missing_backend_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = examples(dir.path());
    let res = pdd(&dir.path().join("out"), &["score", "--input", s(&input)]);
    assert_eq!(res.status.code(), Some(2));
    let err = stderr_json(&res);
    assert_eq!(err["error"], "ConfigInvalid");
    assert_eq!(err["exit_code"], 2);
    assert!(err["message"].as_str().unwrap().contains("backend"));
}

#[test]
fn usage_errors_are_json_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let res = pdd(dir.path(), &["no-such-command"]);
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(stderr_json(&res)["error"], "Usage");
}

#[test]
fn unreachable_endpoint_exits_three_and_records_failures() {
    let dir = tempfile::tempdir().unwrap();
    let input = examples(dir.path());
    let out = dir.path().join("out");
    let res = pdd(
        &out,
        &[
            "score",
            "--input",
            s(&input),
            "--endpoint",
            "http://127.0.0.1:1",
            "--model",
            "m",
            "--retry-limit",
            "1",
            "--timeout",
            "2",
        ],
    );
    assert_eq!(res.status.code(), Some(3));
    assert_eq!(stderr_json(&res)["error"], "BackendUnavailable");
    let failures = fs::read_to_string(out.join("failures.jsonl")).unwrap();
    assert_eq!(failures.lines().count(), 4);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn malformed_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let train = write(dir.path(), "train.txt", CORPUS);
    let input = write(dir.path(), "bad.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\nnot json\n");
    let res = pdd(
        &dir.path().join("out"),
        &["score", "--input", s(&input), "--train", s(&train)],
    );
    assert_eq!(res.status.code(), Some(4));
    let err = stderr_json(&res);
    assert_eq!(err["exit_code"], 4);
    assert!(err["message"].as_str().unwrap().contains('2'), "{err}");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let train = write(dir.path(), "train.txt", CORPUS);
    let input = examples(dir.path());
    let config = write(
        dir.path(),
        "pdd.toml",
        &format!(
            "seed = 11\nk = 50.0\n\n[backend]\nkind = \"bigram\"\npath = {:?}\n",
            s(&train)
        ),
    );

    let out = dir.path().join("from-file");
    let res = pdd(&out, &["--config", s(&config), "score", "--input", s(&input)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let m = json(out.join("manifest.json"));
    assert_eq!(m["seed"], 11);
    assert_eq!(m["config"]["k"], 50.0);
    assert_eq!(m["config"]["backend"]["kind"], "bigram");

    let out = dir.path().join("flags");
    let res = pdd(
        &out,
        &[
            "--config",
            s(&config),
            "--seed",
            "3",
            "score",
            "--input",
            s(&input),
            "--k",
            "10",
        ],
    );
    assert!(res.status.success());
    let m = json(out.join("manifest.json"));
    assert_eq!(m["seed"], 3);
    assert_eq!(m["config"]["k"], 10.0);
}

#[test]
fn environment_overrides_http_flags() {
    let dir = tempfile::tempdir().unwrap();
    let input = examples(dir.path());
    let config = write(
        dir.path(),
        "pdd.toml",
        "[backend]\nkind = \"http\"\nendpoint = \"http://127.0.0.1:1\"\nmodel_name = \"file-model\"\n",
    );
    let out = dir.path().join("out");
    let res = pdd_env(
        &out,
        &[
            "--config",
            s(&config),
            "score",
            "--input",
            s(&input),
            "--model",
            "flag-model",
            "--retry-limit",
            "1",
            "--timeout",
            "2",
        ],
        &[("PDD_ENDPOINT", "http://127.0.0.1:2"), ("PDD_MODEL", "env-model")],
    );
    assert_eq!(res.status.code(), Some(3));
    let backend = &json(out.join("manifest.json"))["config"]["backend"];
    assert_eq!(backend["endpoint"], "http://127.0.0.1:2");
    assert_eq!(backend["model_name"], "env-model");
}

#[test]
fn environment_is_ignored_by_local_backends() {
    let dir = tempfile::tempdir().unwrap();
    let train = write(dir.path(), "train.txt", CORPUS);
    let input = examples(dir.path());
    let res = pdd_env(
        &dir.path().join("out"),
        &["score", "--input", s(&input), "--train", s(&train)],
        &[("PDD_ENDPOINT", "http://127.0.0.1:1"), ("PDD_MODEL", "ignored")],
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn calibrate_needs_a_detector_when_several_are_present() {
    let dir = tempfile::tempdir().unwrap();
    let scores = write(
        dir.path(),
        "scores.jsonl",
        concat!(
            r#"{"id":"a","detector":"min_k_prob","value":-1.0,"label":"member"}"#,
            "\n",
            r#"{"id":"a","detector":"ppl","value":-1.0,"label":"member"}"#,
            "\n",
        ),
    );
    let res = pdd(&dir.path().join("out"), &["calibrate", "--validation", s(&scores)]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn contam_lab_csv_is_monotone_in_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lab");
    let res = pdd(
        &out,
        &["--format", "csv", "contam-lab", "--lambda", "1,16", "--seeds", "2"],
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(!out.join("lab.json").exists());
    let csv = fs::read_to_string(out.join("occurrence_sweep.csv")).unwrap();
    let means: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(means.len(), 2);
    assert!(means[0] < means[1], "{csv}");
}

#[test]
fn audit_flags_questions_inside_the_band() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "model.txt", CORPUS);
    let qa = write(
        dir.path(),
        "qa.jsonl",
        concat!(
            r#"{"question":"where did the cat sit","reference_answer":"on the mat","candidates":["the mat","a log"]}"#,
            "\n",
        ),
    );
    let out = dir.path().join("out");
    let spec = format!("bigram:{}", s(&model));
    let res = pdd(
        &out,
        &[
            "audit-unlearn",
            "--qa",
            s(&qa),
            "--unlearned",
            &spec,
            "--original",
            &spec,
        ],
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report = fs::read_to_string(out.join("qa_report.json")).unwrap();
    assert!(report.contains("\"ratio\": 1.0"), "{report}");
}
