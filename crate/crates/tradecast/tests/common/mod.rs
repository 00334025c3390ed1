#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Datelike, Duration, NaiveDate};

/// Daily trade CSV with `days` export rows and `days` import rows starting at
/// 2015-01-01. Cumulative columns reset each January.
pub fn trade_csv(days: usize) -> String {
    let mut out =
        String::from("Direction,Year,Date,Weekday,Country,Commodity,Transport_Mode,Measure,Value,Cumulative\n");
    let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    for (direction, scale) in [("Exports", 1.0e6), ("Imports", 1.3e6)] {
        let mut cumulative = 0.0;
        for k in 0..days {
            let date = start + Duration::days(k as i64);
            if date.ordinal() == 1 {
                cumulative = 0.0;
            }
            let wiggle = ((k * 7919) % 13) as f64 / 13.0;
            let value = (scale * (1.0 + 0.3 * wiggle)).round();
            cumulative += value;
            writeln!(
                out,
                "{direction},{},{},{},All,All,All,$,{value},{cumulative}",
                date.year(),
                date.format("%d/%m/%Y"),
                date.format("%A"),
            )
            .unwrap();
        }
    }
    out
}

pub fn write_trade_csv(dir: &Path, days: usize) -> PathBuf {
    let path = dir.join("trade.csv");
    std::fs::write(&path, trade_csv(days)).unwrap();
    path
}

pub fn tradecast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tradecast"))
        .args(args)
        .env_remove("TRADE_FORECAST_SEED")
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn tradecast")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
