//! Writes the hourly demo series: a daily cycle plus a temperature driver,
//! 2000 observed rows and 48 future rows with exogenous values only.
//!
//! cargo run --example synthetic -- demo/series.csv

use std::fmt::Write as _;

use chrono::{NaiveDate, TimeDelta};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const OBSERVED: usize = 2000;
const FUTURE: usize = 48;

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| "demo/series.csv".into());
    let mut rng = ChaCha8Rng::seed_from_u64(20240101);
    let mut noise = move || -> f64 { StandardNormal.sample(&mut rng) };
    let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let mut out = String::from("timestamp,x:load,u:temperature\n");
    let mut temp = 0.0;
    for t in 0..OBSERVED + FUTURE {
        let ts = start + TimeDelta::hours(t as i64);
        let phase = 2.0 * std::f64::consts::PI * (t % 24) as f64 / 24.0;
        temp = 0.9 * temp + 0.5 * noise();
        let celsius = 12.0 + 4.0 * phase.sin() + 3.0 * temp;
        let load = 50.0 + 8.0 * phase.sin() - 3.0 * (2.0 * phase).cos() + 4.0 * temp + 1.5 * noise();
        let load = if t < OBSERVED { format!("{load:.4}") } else { String::new() };
        writeln!(out, "{},{load},{celsius:.4}", ts.format("%Y-%m-%dT%H:%M:%S")).unwrap();
    }
    std::fs::write(&path, out).unwrap_or_else(|e| panic!("cannot write {path}: {e}"));
}
