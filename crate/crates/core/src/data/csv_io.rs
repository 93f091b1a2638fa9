use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Reads `label,f1,...,fd` rows. A first row whose label field is not an
/// integer is treated as a header.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut labels = Vec::new();
    let mut data = Vec::new();
    let mut dim: Option<usize> = None;

    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::format(line, e.to_string())
        })?;
        let line = record.position().map_or(n as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let label_field = &record[0];
        let label = match label_field.parse::<u64>() {
            Ok(l) => l,
            Err(_) if n == 0 => continue,
            Err(_) => {
                return Err(Error::format(
                    line,
                    format!("label `{label_field}` is not a non-negative integer"),
                ))
            }
        };
        let features = record.len() - 1;
        match dim {
            None if features == 0 => return Err(Error::format(line, "row has no features")),
            None => dim = Some(features),
            Some(d) if d != features => {
                return Err(Error::format(
                    line,
                    format!("row has {features} features, expected {d}"),
                ))
            }
            Some(_) => {}
        }
        for field in record.iter().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::format(line, format!("feature `{field}` is not numeric")))?;
            if !v.is_finite() {
                return Err(Error::format(line, format!("feature `{field}` is not finite")));
            }
            data.push(v);
        }
        labels.push(label);
    }

    let Some(dim) = dim else {
        return Err(Error::EmptyDataset);
    };
    let features = Matrix::new(labels.len(), dim, data)?;
    Dataset::from_external_labels(features, &labels)
}

/// Writes the dataset with a `label,f1,...,fd` header. Values are printed in
/// shortest round-trip form, so `load_csv` recovers them exactly.
pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);

    write!(w, "label").map_err(io)?;
    for j in 1..=ds.feature_dim() {
        write!(w, ",f{j}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for i in 0..ds.len() {
        let (x, label) = ds.sample(i);
        write!(w, "{}", ds.original_labels()[label]).map_err(io)?;
        for v in x {
            write!(w, ",{v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}
