//! JSON and CSV file formats.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use fisher_core::{FiniteMarket, LongRunSpec};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(std::io::BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_spec(path: &Path) -> Result<LongRunSpec> {
    read_json(path)
}

/// Writes serializable records as CSV with the header taken from the
/// record's field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Market values as CSV: one row per item, header `item,buyer1,…,buyerN`.
pub fn write_market_csv<W: Write>(out: W, market: &FiniteMarket) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["item".to_string()];
    header.extend((1..=market.n()).map(|i| format!("buyer{i}")));
    w.write_record(&header)?;
    for item in 0..market.t() {
        let mut record = vec![item.to_string()];
        record.extend(market.item_values(item).iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_market_csv`]; budgets are not part of the file.
pub fn read_market_csv<R: Read>(input: R, budgets: Vec<f64>) -> Result<FiniteMarket> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let n = header.len().saturating_sub(1);
    if header.get(0) != Some("item") || (1..=n).any(|i| header.get(i) != Some(format!("buyer{i}").as_str())) {
        bail!("market CSV header must be item,buyer1,…,buyerN");
    }
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (k, record) in r.records().enumerate() {
        let record = record?;
        let item: usize = record[0].trim().parse().with_context(|| format!("item index on row {}", k + 1))?;
        if item != k {
            bail!("items must be listed in order 0, 1, … (row {} has item {item})", k + 1);
        }
        for i in 0..n {
            rows[i].push(record[i + 1].trim().parse().with_context(|| format!("value on row {}", k + 1))?);
        }
    }
    Ok(FiniteMarket::from_rows(&rows, budgets)?)
}
