//! Sweep result rows and their CSV and JSON forms.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{GenlabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellStatus::Ok => "ok",
            CellStatus::Failed => "failed",
        })
    }
}

impl FromStr for CellStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ok" => Ok(CellStatus::Ok),
            "failed" => Ok(CellStatus::Failed),
            _ => Err(format!("unknown status `{s}`")),
        }
    }
}

/// Non-finite values (failed cells) are written as JSON `null`.
mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// One (width, seed) cell. `l_*` are final critic divergences; `i_match` is
/// the independent critic at the cell's width and `i_base` at the baseline
/// width. Independent test values come from the critic trained on train1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepResultRow {
    pub width: usize,
    pub seed: u64,
    pub status: CellStatus,
    #[serde(with = "nullable")]
    pub l_o_train1: f64,
    #[serde(with = "nullable")]
    pub l_o_test: f64,
    #[serde(with = "nullable")]
    pub l_a_train1: f64,
    #[serde(with = "nullable")]
    pub l_a_test: f64,
    #[serde(with = "nullable")]
    pub l_i_match_train1: f64,
    #[serde(with = "nullable")]
    pub l_i_match_train2: f64,
    #[serde(with = "nullable")]
    pub l_i_match_test: f64,
    #[serde(with = "nullable")]
    pub l_i_base_train1: f64,
    #[serde(with = "nullable")]
    pub l_i_base_train2: f64,
    #[serde(with = "nullable")]
    pub l_i_base_test: f64,
    /// Baseline independent critic: train2 divergence minus train1 divergence.
    #[serde(with = "nullable")]
    pub generator_gap: f64,
    #[serde(with = "nullable")]
    pub generator_gap_se: f64,
    pub underfit_flag: bool,
    #[serde(with = "nullable")]
    pub frechet_train1: f64,
    #[serde(with = "nullable")]
    pub frechet_test: f64,
}

pub const COLUMNS: [&str; 18] = [
    "width",
    "seed",
    "status",
    "l_o_train1",
    "l_o_test",
    "l_a_train1",
    "l_a_test",
    "l_i_match_train1",
    "l_i_match_train2",
    "l_i_match_test",
    "l_i_base_train1",
    "l_i_base_train2",
    "l_i_base_test",
    "generator_gap",
    "generator_gap_se",
    "underfit_flag",
    "frechet_train1",
    "frechet_test",
];

impl SweepResultRow {
    pub fn failed(width: usize, seed: u64) -> Self {
        let nan = f64::NAN;
        Self {
            width,
            seed,
            status: CellStatus::Failed,
            l_o_train1: nan,
            l_o_test: nan,
            l_a_train1: nan,
            l_a_test: nan,
            l_i_match_train1: nan,
            l_i_match_train2: nan,
            l_i_match_test: nan,
            l_i_base_train1: nan,
            l_i_base_train2: nan,
            l_i_base_test: nan,
            generator_gap: nan,
            generator_gap_se: nan,
            underfit_flag: false,
            frechet_train1: nan,
            frechet_test: nan,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }

    fn reals(&self) -> [f64; 14] {
        [
            self.l_o_train1,
            self.l_o_test,
            self.l_a_train1,
            self.l_a_test,
            self.l_i_match_train1,
            self.l_i_match_train2,
            self.l_i_match_test,
            self.l_i_base_train1,
            self.l_i_base_train2,
            self.l_i_base_test,
            self.generator_gap,
            self.generator_gap_se,
            self.frechet_train1,
            self.frechet_test,
        ]
    }

    fn reals_mut(&mut self) -> [&mut f64; 14] {
        [
            &mut self.l_o_train1,
            &mut self.l_o_test,
            &mut self.l_a_train1,
            &mut self.l_a_test,
            &mut self.l_i_match_train1,
            &mut self.l_i_match_train2,
            &mut self.l_i_match_test,
            &mut self.l_i_base_train1,
            &mut self.l_i_base_train2,
            &mut self.l_i_base_test,
            &mut self.generator_gap,
            &mut self.generator_gap_se,
            &mut self.frechet_train1,
            &mut self.frechet_test,
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.reals().iter().all(|x| x.is_finite())
    }

    fn record(&self) -> Vec<String> {
        let mut out = vec![self.width.to_string(), self.seed.to_string(), self.status.to_string()];
        let reals = self.reals();
        out.extend(reals[..12].iter().map(|&x| format_g(x)));
        out.push(self.underfit_flag.to_string());
        out.extend(reals[12..].iter().map(|&x| format_g(x)));
        out
    }

    fn from_record(fields: &[&str]) -> std::result::Result<Self, String> {
        if fields.len() != COLUMNS.len() {
            return Err(format!("expected {} fields, got {}", COLUMNS.len(), fields.len()));
        }
        let num = |i: usize| -> std::result::Result<f64, String> {
            match fields[i] {
                "nan" => Ok(f64::NAN),
                s => s.parse().map_err(|_| format!("column {}: bad number `{s}`", COLUMNS[i])),
            }
        };
        let mut row = SweepResultRow::failed(
            fields[0].parse().map_err(|_| format!("bad width `{}`", fields[0]))?,
            fields[1].parse().map_err(|_| format!("bad seed `{}`", fields[1]))?,
        );
        row.status = fields[2].parse()?;
        row.underfit_flag = fields[15].parse().map_err(|_| format!("bad underfit_flag `{}`", fields[15]))?;
        let columns = (3..15).chain(16..18);
        for (slot, i) in row.reals_mut().into_iter().zip(columns) {
            *slot = num(i)?;
        }
        Ok(row)
    }
}

/// C `%.{digits}g`: fixed or exponent notation with trailing zeros removed.
pub fn format_g_digits(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let p = digits.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= p as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp) as usize;
        trim(&format!("{:.*}", decimals, x))
    }
}

/// Reals in reports carry nine significant digits.
pub fn format_g(x: f64) -> String {
    format_g_digits(x, 9)
}

pub fn csv_string(rows: &[SweepResultRow]) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.record().join(","));
        out.push('\n');
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| GenlabError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| GenlabError::io(path, e))
}

fn require_rows(rows: &[SweepResultRow]) -> Result<()> {
    if rows.is_empty() {
        return Err(GenlabError::Usage("no result rows to write".into()));
    }
    Ok(())
}

pub fn write_csv(path: &Path, rows: &[SweepResultRow]) -> Result<()> {
    require_rows(rows)?;
    write_text(path, &csv_string(rows))
}

pub fn parse_csv(text: &str, path: &Path) -> Result<Vec<SweepResultRow>> {
    let bad = |message: String| GenlabError::Parse { what: "results CSV", path: path.to_path_buf(), message };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    if header != COLUMNS.join(",") {
        return Err(bad(format!("unexpected header `{header}`")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let fields: Vec<&str> = l.split(',').collect();
            SweepResultRow::from_record(&fields).map_err(|m| bad(format!("line {}: {m}", i + 2)))
        })
        .collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepResultRow>> {
    let text = fs::read_to_string(path).map_err(|e| GenlabError::io(path, e))?;
    parse_csv(&text, path)
}

pub fn write_json(path: &Path, rows: &[SweepResultRow]) -> Result<()> {
    require_rows(rows)?;
    let mut text = serde_json::to_string_pretty(rows).expect("rows serialize");
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json(path: &Path) -> Result<Vec<SweepResultRow>> {
    let text = fs::read_to_string(path).map_err(|e| GenlabError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| GenlabError::Parse {
        what: "results JSON",
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
pub(crate) fn sample_row(width: usize, seed: u64) -> SweepResultRow {
    let w = width as f64;
    let s = seed as f64;
    SweepResultRow {
        width,
        seed,
        status: CellStatus::Ok,
        l_o_train1: 0.01 * w + s,
        l_o_test: 0.011 * w,
        l_a_train1: 0.02 / w,
        l_a_test: -0.0125,
        l_i_match_train1: 1.0 / 3.0,
        l_i_match_train2: 2.0 / 3.0,
        l_i_match_test: 1e-7,
        l_i_base_train1: 0.1 / w,
        l_i_base_train2: 0.1 / w + 0.001,
        l_i_base_test: 0.09 / w,
        generator_gap: 0.001,
        generator_gap_se: 0.002,
        underfit_flag: width < 8,
        frechet_train1: 0.2 / w,
        frechet_test: 0.18 / w,
    }
}
