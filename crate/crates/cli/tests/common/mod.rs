//! Shared fixtures: model files, synthetic data and a binary runner.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_xfvar"));
    c.env_remove("XFVAR_THREADS");
    c
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl From<Output> for Run {
    fn from(o: Output) -> Self {
        Run {
            code: o.status.code().expect("exited normally"),
            stdout: String::from_utf8(o.stdout).expect("utf-8 stdout"),
            stderr: String::from_utf8(o.stderr).expect("utf-8 stderr"),
        }
    }
}

pub fn run(args: &[&str]) -> Run {
    bin().args(args).output().expect("binary runs").into()
}

pub fn run_with_threads(args: &[&str], threads: usize) -> Run {
    bin()
        .args(args)
        .env("XFVAR_THREADS", threads.to_string())
        .output()
        .expect("binary runs")
        .into()
}

/// A failure prints exactly one line, prefixed with its code.
pub fn assert_error(r: &Run, code: i32) {
    assert_eq!(r.code, code, "stderr: {}", r.stderr);
    let lines: Vec<&str> = r.stderr.lines().collect();
    assert_eq!(lines.len(), 1, "stderr: {}", r.stderr);
    assert!(
        lines[0].starts_with(&format!("error[E{code:02}]: ")),
        "stderr: {}",
        r.stderr
    );
}

pub fn node(name: &str, parents: &[&str], mechanism: Value) -> Value {
    json!({ "name": name, "parents": parents, "mechanism": mechanism })
}

pub fn model_file(outcome: &str, nodes: Vec<Value>) -> Value {
    let variables: Vec<&str> = nodes.iter().map(|n| n["name"].as_str().unwrap()).collect();
    json!({ "variables": variables, "outcome": outcome, "nodes": nodes })
}

pub fn rademacher() -> Value {
    json!({ "kind": "root_rademacher" })
}

pub fn gaussian(sd: f64) -> Value {
    json!({ "kind": "root_gaussian", "mean": 0.0, "sd": sd })
}

pub fn det(expr: &str) -> Value {
    json!({ "kind": "deterministic", "expr": expr })
}

pub fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

pub fn product() -> Value {
    model_file(
        "Y",
        vec![
            node("W1", &[], rademacher()),
            node("W2", &[], rademacher()),
            node("Y", &["W1", "W2"], det("W1*W2")),
        ],
    )
}

/// `W2 = W1·E2`, `Y = W1·W2`.
pub fn w2_from_w1() -> Value {
    model_file(
        "Y",
        vec![
            node("W1", &[], rademacher()),
            node("E2", &[], rademacher()),
            node("W2", &["W1", "E2"], det("W1*E2")),
            node("Y", &["W1", "W2"], det("W1*W2")),
        ],
    )
}

/// `W1 = W2·E1`, `Y = W1·W2`.
pub fn w1_from_w2() -> Value {
    model_file(
        "Y",
        vec![
            node("W2", &[], rademacher()),
            node("E1", &[], rademacher()),
            node("W1", &["W2", "E1"], det("W2*E1")),
            node("Y", &["W1", "W2"], det("W1*W2")),
        ],
    )
}

/// `W2 = W1 + W1·E2`: the sign of `W1` decides `W2`.
pub fn sign_flipped_chain() -> Value {
    model_file(
        "Y",
        vec![
            node("W1", &[], rademacher()),
            node("E2", &[], rademacher()),
            node("W2", &["W1", "E2"], det("W1 + W1*E2")),
            node("Y", &["W2"], det("W2")),
        ],
    )
}

/// `W2 = W1 + R` with an independent Rademacher shift `R`.
pub fn shifted_chain() -> Value {
    model_file(
        "Y",
        vec![
            node("W1", &[], rademacher()),
            node(
                "W2",
                &["W1"],
                json!({ "kind": "additive_noise", "mean": { "expr": "W1" }, "residuals": [-1.0, 1.0] }),
            ),
            node("Y", &["W2"], det("W2")),
        ],
    )
}

pub fn chain_dag() -> Value {
    json!({
        "nodes": [
            { "name": "W1" },
            { "name": "W2", "parents": ["W1"] },
            { "name": "Y", "parents": ["W2"] }
        ],
        "outcome": "Y"
    })
}

/// Observations of the shifted chain.
pub fn shifted_chain_csv(n: usize, seed: u64) -> String {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("W1,W2,Y\n");
    for _ in 0..n {
        let w1: f64 = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        let w2 = w1 + if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        out.push_str(&format!("{w1},{w2},{w2}\n"));
    }
    out
}

pub const RACES: [&str; 5] = ["Amer-Indian", "Asian", "Black", "Other", "White"];

/// Income-schema rows: sex and race roots, education driven by both, and
/// log income driven by all three.
pub fn income_csv(n: usize, seed: u64) -> String {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let cumulative = [0.08, 0.2, 0.35, 0.45, 1.0];
    let levels = [9.0, 12.0, 14.0, 16.0, 18.0, 20.0];
    let mut out = String::from("sex,race,education,log_income\n");
    for _ in 0..n {
        let male = r.gen_bool(0.52);
        let u: f64 = r.gen();
        let ri = cumulative.iter().position(|&c| u < c).unwrap();
        let shift = ri as f64 + if male { 1.0 } else { 0.0 };
        let a = 1.0 / (1.0 + 0.3 * shift);
        let v: f64 = r.gen::<f64>().powf(a);
        let e = levels[((v * 6.0) as usize).min(5)];
        let z: f64 = {
            let (u1, u2): (f64, f64) = (r.gen_range(f64::EPSILON..1.0), r.gen());
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        };
        let y = 9.0 + 0.08 * e + 0.3 * if male { 1.0 } else { 0.0 } + 0.05 * ri as f64 + 0.5 * z;
        let sex = if male { "Male" } else { "Female" };
        out.push_str(&format!("{sex},{},{e},{y:.6}\n", RACES[ri]));
    }
    out
}

pub fn income_dag() -> Value {
    json!({
        "nodes": [
            { "name": "sex" },
            { "name": "race" },
            { "name": "education", "parents": ["sex", "race"] },
            { "name": "log_income", "parents": ["sex", "race", "education"] }
        ],
        "outcome": "log_income",
        "categorical": ["sex", "race"]
    })
}

pub fn report(text: &str) -> Value {
    serde_json::from_str(text).expect("report is JSON")
}

pub fn num(v: &Value, table: &str, key: &str) -> f64 {
    v[table][key]
        .as_f64()
        .unwrap_or_else(|| panic!("{table}.{key} missing in {v}"))
}
