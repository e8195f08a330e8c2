//! Delimiter-separated dataset files.
//!
//! One row per point, comma separated, `d` numeric feature columns followed by
//! an optional integer label column with values in `{0,1}`. A header row is
//! optional; when present it is any first row containing a non-numeric field,
//! and the file is labeled iff the last header field is `label`. Files written
//! by [`write_dataset`] always carry the header `x1,...,xd[,label]`, use `\n`
//! line endings and print floats in shortest round-trip form.

use std::io::{Read, Write};

use super::{PolyError, Sample};

/// How to interpret the last column of a headerless file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelColumn {
    /// Use the header if there is one, otherwise treat every column as a feature.
    Auto,
    Present,
    Absent,
}

pub fn read_dataset<R: Read>(reader: R, labels: LabelColumn) -> Result<Sample, PolyError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut records = rdr.records();
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut labeled = match labels {
        LabelColumn::Present => Some(true),
        LabelColumn::Absent => Some(false),
        LabelColumn::Auto => None,
    };
    if let Some(first) = records.next() {
        let first = first.map_err(|e| PolyError::Dataset(e.to_string()))?;
        let fields: Vec<String> = first.iter().map(str::to_string).collect();
        let is_header = fields.iter().any(|f| f.parse::<f64>().is_err());
        if is_header {
            let header_labeled = fields.last().map(|f| f == "label").unwrap_or(false);
            labeled = Some(labeled.unwrap_or(header_labeled));
        } else {
            rows.push(fields);
        }
    }
    let labeled = labeled.unwrap_or(false);
    for rec in records {
        let rec = rec.map_err(|e| PolyError::Dataset(e.to_string()))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(PolyError::EmptySample);
    }
    let width = rows[0].len();
    let dim = if labeled { width.saturating_sub(1) } else { width };
    if dim == 0 {
        return Err(PolyError::ZeroDimension);
    }
    let mut points = Vec::with_capacity(rows.len() * dim);
    let mut label_vec = Vec::new();
    for (line, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(PolyError::Dataset(format!("row {} has {} fields, expected {width}", line + 1, row.len())));
        }
        for v in &row[..dim] {
            let value: f64 = v.parse().map_err(|_| PolyError::Dataset(format!("bad number `{v}`")))?;
            points.push(value);
        }
        if labeled {
            let raw = &row[dim];
            let y: i64 = raw.parse().map_err(|_| PolyError::Dataset(format!("bad label `{raw}`")))?;
            if y != 0 && y != 1 {
                return Err(PolyError::InvalidLabel(y));
            }
            label_vec.push(y as u8);
        }
    }
    Sample::from_flat(dim, points, if labeled { Some(label_vec) } else { None })
}

pub fn write_dataset<W: Write>(writer: W, sample: &Sample) -> Result<(), PolyError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header: Vec<String> = (1..=sample.dim()).map(|i| format!("x{i}")).collect();
    if sample.labels().is_some() {
        header.push("label".into());
    }
    w.write_record(&header).map_err(|e| PolyError::Dataset(e.to_string()))?;
    for (i, x) in sample.points().enumerate() {
        let mut row: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
        if let Some(l) = sample.labels() {
            row.push(l[i].to_string());
        }
        w.write_record(&row).map_err(|e| PolyError::Dataset(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
