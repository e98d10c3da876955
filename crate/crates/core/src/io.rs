//! CSV readers and writers.
//!
//! Observations are accepted in two layouts:
//!
//! * long: header `curve_id,t,value`, one observation per row;
//! * wide: one row per curve, with a header row of time points and an
//!   optional leading label column (e.g. 48 half-hourly columns per day).
//!
//! Numeric output uses 17 significant digits so values round-trip exactly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::basis::{BasisSpec, BasisSystem};
use crate::error::{Error, Result};
use crate::smoothing::{FunctionalDataSet, ObservationGrid};

/// Full-precision decimal rendering of a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        message: message.into(),
    }
}

fn parse_num(s: &str, line: u64, what: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what} `{s}`")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite {what} `{s}`")));
    }
    Ok(v)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(r)
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    parse_err(line, e.to_string())
}

/// Reads observations from a file in either layout.
pub fn read_observations(path: &Path) -> Result<ObservationGrid> {
    parse_observations(File::open(path)?)
}

pub fn parse_observations<R: Read>(input: R) -> Result<ObservationGrid> {
    let mut rdr = reader(input);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Err(parse_err(1, "empty input")),
        Some(r) => r.map_err(csv_err)?,
    };
    let cells: Vec<&str> = header.iter().collect();
    let is_long = cells.len() == 3
        && cells[0].eq_ignore_ascii_case("curve_id")
        && cells[1].eq_ignore_ascii_case("t")
        && cells[2].eq_ignore_ascii_case("value");
    if is_long {
        parse_long(records)
    } else {
        let header: Vec<String> = cells.iter().map(|s| s.to_string()).collect();
        parse_wide(&header, records)
    }
}

fn parse_long<R: Read>(records: csv::StringRecordsIter<'_, R>) -> Result<ObservationGrid> {
    let mut order: Vec<String> = Vec::new();
    let mut by_curve: HashMap<String, Vec<(f64, f64, u64)>> = HashMap::new();
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        if rec.len() != 3 {
            return Err(parse_err(
                line,
                format!("expected 3 fields, found {}", rec.len()),
            ));
        }
        let id = rec[0].to_string();
        let t = parse_num(&rec[1], line, "time")?;
        let v = parse_num(&rec[2], line, "value")?;
        by_curve
            .entry(id.clone())
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push((t, v, line));
    }
    if order.is_empty() {
        return Err(parse_err(2, "no observations after header"));
    }
    let mut points: Option<Vec<f64>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(order.len());
    for id in &order {
        let obs = by_curve.get_mut(id).expect("curve recorded");
        obs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in obs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(parse_err(
                    w[1].2,
                    format!("duplicate time {} for curve `{id}`", w[1].0),
                ));
            }
        }
        let ts: Vec<f64> = obs.iter().map(|o| o.0).collect();
        match &points {
            None => points = Some(ts),
            Some(p) if *p != ts => {
                let line = obs.first().map_or(0, |o| o.2);
                return Err(parse_err(
                    line,
                    format!(
                        "curve `{id}` is not observed on the same time points as the first curve"
                    ),
                ));
            }
            _ => {}
        }
        rows.push(obs.iter().map(|o| o.1).collect());
    }
    let points = points.expect("at least one curve");
    let values = DMatrix::from_fn(rows.len(), points.len(), |i, j| rows[i][j]);
    ObservationGrid::new(points, values, order).map_err(|e| parse_err(1, e.to_string()))
}

fn parse_wide<R: Read>(
    header: &[String],
    records: csv::StringRecordsIter<'_, R>,
) -> Result<ObservationGrid> {
    let labelled = header
        .first()
        .is_some_and(|c| c.trim().parse::<f64>().is_err());
    let time_cells = if labelled { &header[1..] } else { header };
    let points = time_cells
        .iter()
        .map(|c| parse_num(c, 1, "time point"))
        .collect::<Result<Vec<f64>>>()?;
    let mut ids = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        let expected = points.len() + usize::from(labelled);
        if rec.len() != expected {
            return Err(parse_err(
                line,
                format!("expected {expected} fields, found {}", rec.len()),
            ));
        }
        let (id, cells) = if labelled {
            (rec[0].to_string(), rec.iter().skip(1).collect::<Vec<_>>())
        } else {
            (rows.len().to_string(), rec.iter().collect::<Vec<_>>())
        };
        let row = cells
            .iter()
            .map(|c| parse_num(c, line, "value"))
            .collect::<Result<Vec<f64>>>()?;
        ids.push(id);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(2, "no curves after header row"));
    }
    let values = DMatrix::from_fn(rows.len(), points.len(), |i, j| rows[i][j]);
    ObservationGrid::new(points, values, ids).map_err(|e| parse_err(1, e.to_string()))
}

/// Writes observations in long format.
pub fn write_long(
    path: &Path,
    ids: &[String],
    points: &[f64],
    values: &DMatrix<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(["curve_id", "t", "value"]).map_err(csv_io)?;
    for (i, id) in ids.iter().enumerate() {
        for (p, t) in points.iter().enumerate() {
            w.write_record([id.clone(), fmt_f64(*t), fmt_f64(values[(i, p)])])
                .map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// A labelled numeric table: `label_name, columns…` header, one labelled
/// row per matrix row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub label_name: String,
    pub columns: Vec<String>,
    pub labels: Vec<String>,
    pub values: DMatrix<f64>,
}

impl Table {
    pub fn new(
        label_name: &str,
        columns: Vec<String>,
        labels: Vec<String>,
        values: DMatrix<f64>,
    ) -> Self {
        debug_assert_eq!(columns.len(), values.ncols());
        debug_assert_eq!(labels.len(), values.nrows());
        Table {
            label_name: label_name.to_string(),
            columns,
            labels,
            values,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
        let mut header = vec![self.label_name.clone()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(csv_io)?;
        for (i, label) in self.labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            row.extend(self.values.row(i).iter().map(|v| fmt_f64(*v)));
            w.write_record(&row).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Table> {
        let mut rdr = reader(File::open(path)?);
        let mut records = rdr.records();
        let header = match records.next() {
            None => return Err(parse_err(1, format!("{}: empty table", path.display()))),
            Some(r) => r.map_err(csv_err)?,
        };
        if header.is_empty() {
            return Err(parse_err(1, "table header has no columns"));
        }
        let label_name = header[0].to_string();
        let columns: Vec<String> = header.iter().skip(1).map(String::from).collect();
        let mut labels = Vec::new();
        let mut rows = Vec::new();
        for rec in records {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != columns.len() + 1 {
                return Err(parse_err(
                    line,
                    format!("expected {} fields, found {}", columns.len() + 1, rec.len()),
                ));
            }
            labels.push(rec[0].to_string());
            rows.push(
                rec.iter()
                    .skip(1)
                    .map(|c| parse_num(c, line, "value"))
                    .collect::<Result<Vec<f64>>>()?,
            );
        }
        let values = DMatrix::from_fn(rows.len(), columns.len(), |i, j| rows[i][j]);
        Ok(Table {
            label_name,
            columns,
            labels,
            values,
        })
    }

    /// Single numeric column by name.
    pub fn column(&self, name: &str) -> Result<DVector<f64>> {
        let j = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| parse_err(1, format!("missing column `{name}`")))?;
        Ok(self.values.column(j).into_owned())
    }
}

pub fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn coefficient_names(k: usize) -> Vec<String> {
    (0..k).map(|j| format!("c{j}")).collect()
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(std::io::Error::other)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}

/// Writes `basis.json` and `coefficients.csv` into `dir`.
pub fn write_dataset(dir: &Path, data: &FunctionalDataSet) -> Result<()> {
    write_json(&dir.join("basis.json"), &data.basis().spec())?;
    Table::new(
        "curve_id",
        coefficient_names(data.basis().size()),
        data.curve_ids().to_vec(),
        data.coefficients().clone(),
    )
    .write(&dir.join("coefficients.csv"))
}

pub fn read_basis(dir: &Path) -> Result<BasisSystem> {
    let spec: BasisSpec = read_json(&dir.join("basis.json"))?;
    spec.build()
}

pub fn read_dataset(dir: &Path) -> Result<FunctionalDataSet> {
    let basis = read_basis(dir)?;
    let table = Table::read(&dir.join("coefficients.csv"))?;
    if table.values.ncols() != basis.size() {
        return Err(parse_err(
            1,
            format!(
                "coefficients.csv has {} columns but basis.json describes {} functions",
                table.values.ncols(),
                basis.size()
            ),
        ));
    }
    FunctionalDataSet::new(basis, table.values, table.labels)
}
