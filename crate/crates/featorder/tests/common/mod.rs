#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use featorder_core::rng;
use featorder_core::DataMatrix;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_featorder"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Writes a matrix as CSV with columns `f0..` and an optional trailing label column `y`.
pub fn write_csv(path: &Path, x: &DataMatrix, labels: Option<&[f64]>) {
    let mut s = String::new();
    let names: Vec<String> = (0..x.m()).map(|j| format!("f{j}")).collect();
    s.push_str(&names.join(","));
    if labels.is_some() {
        s.push_str(",y");
    }
    s.push('\n');
    for i in 0..x.n() {
        let row: Vec<String> = x.values().row(i).iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&row.join(","));
        if let Some(l) = labels {
            write!(s, ",{:?}", l[i]).unwrap();
        }
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

/// Two Gaussian clouds, one per class, in `m` dimensions.
pub fn separable(n: usize, m: usize, seed: u64) -> (DataMatrix, Vec<f64>) {
    let mut r = rng::seeded(seed);
    let mut vals = Vec::with_capacity(n * m);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = (i % 2) as f64;
        let c = if y == 1.0 { 1.5 } else { -1.5 };
        for _ in 0..m {
            vals.push(c + 0.5 * rng::standard_normal(&mut r));
        }
        labels.push(y);
    }
    let x = DataMatrix::from_values(featorder_core::linalg::Matrix::from_vec(n, m, vals)).unwrap();
    (x, labels)
}

pub fn gaussian(n: usize, m: usize, seed: u64) -> DataMatrix {
    let mut r = rng::seeded(seed);
    let vals = (0..n * m).map(|_| rng::standard_normal(&mut r)).collect();
    DataMatrix::from_values(featorder_core::linalg::Matrix::from_vec(n, m, vals)).unwrap()
}
