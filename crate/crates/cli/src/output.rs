//! Result rows and their CSV / JSON encodings.

use std::io::Write;

use paoi_core::Threshold;
use serde::Serialize;

pub const COLUMNS: [&str; 9] = [
    "ratio",
    "system",
    "policy",
    "threshold",
    "paoi_analytic",
    "paoi_sim",
    "paoi_stderr",
    "aoi_sim",
    "delivery_ratio",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// One output line. Fields a command does not compute stay empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub ratio: f64,
    pub system: String,
    pub policy: String,
    pub threshold: Option<Threshold>,
    pub paoi_analytic: Option<f64>,
    pub paoi_sim: Option<f64>,
    pub paoi_stderr: Option<f64>,
    pub aoi_sim: Option<f64>,
    pub delivery_ratio: Option<f64>,
}

/// Shortest decimal that parses back to the same bits.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

impl ResultRow {
    fn record(&self) -> [String; 9] {
        [
            num(self.ratio),
            self.system.clone(),
            self.policy.clone(),
            self.threshold.map(|t| t.to_string()).unwrap_or_default(),
            opt(self.paoi_analytic),
            opt(self.paoi_sim),
            opt(self.paoi_stderr),
            opt(self.aoi_sim),
            opt(self.delivery_ratio),
        ]
    }
}

pub fn write_rows<W: Write>(rows: &[ResultRow], format: Format, out: W) -> anyhow::Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(COLUMNS)?;
            for r in rows {
                w.write_record(r.record())?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
fn parse_opt(field: &str) -> anyhow::Result<Option<f64>> {
    use anyhow::Context;
    if field.is_empty() {
        Ok(None)
    } else {
        Ok(Some(field.parse().with_context(|| format!("bad number {field:?}"))?))
    }
}

/// Reads rows written by [`write_rows`] in CSV form.
#[cfg(test)]
pub fn read_csv<R: std::io::Read>(input: R) -> anyhow::Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(input);
    if rd.headers()?.iter().ne(COLUMNS) {
        anyhow::bail!("unexpected header {:?}", rd.headers()?);
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let threshold = match &rec[3] {
            "" => None,
            s => Some(s.parse::<Threshold>()?),
        };
        rows.push(ResultRow {
            ratio: rec[0].parse()?,
            system: rec[1].to_string(),
            policy: rec[2].to_string(),
            threshold,
            paoi_analytic: parse_opt(&rec[4])?,
            paoi_sim: parse_opt(&rec[5])?,
            paoi_stderr: parse_opt(&rec[6])?,
            aoi_sim: parse_opt(&rec[7])?,
            delivery_ratio: parse_opt(&rec[8])?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: f64, threshold: Option<Threshold>) -> ResultRow {
        ResultRow {
            ratio: v,
            system: "preemptive".into(),
            policy: "fixed_threshold".into(),
            threshold,
            paoi_analytic: Some(v * 3.0),
            paoi_sim: Some(1.0 / v),
            paoi_stderr: None,
            aoi_sim: Some(v.sqrt()),
            delivery_ratio: Some(f64::MIN_POSITIVE),
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let rows: Vec<ResultRow> = [0.1, 1.0 / 3.0, 2.0, 1e-300, 123456.789e10, std::f64::consts::PI]
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let th = match i % 3 {
                    0 => Some(Threshold::WaitForCompletion),
                    1 => Some(Threshold::Finite(v / 7.0)),
                    _ => None,
                };
                row(v, th)
            })
            .collect();
        let mut buf = Vec::new();
        write_rows(&rows, Format::Csv, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.record(), b.record());
            assert_eq!(a.ratio.to_bits(), b.ratio.to_bits());
            assert_eq!(a.paoi_sim.unwrap().to_bits(), b.paoi_sim.unwrap().to_bits());
            assert_eq!(a.threshold, b.threshold);
        }
    }

    #[test]
    fn csv_header_and_sentinel() {
        let mut buf = Vec::new();
        write_rows(&[row(1.0, Some(Threshold::WaitForCompletion))], Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), COLUMNS.join(","));
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), COLUMNS.len());
        assert_eq!(fields[3], "inf");
        assert_eq!(fields[6], "");
    }

    #[test]
    fn json_rows_carry_every_column() {
        let mut buf = Vec::new();
        write_rows(&[row(2.0, Some(Threshold::WaitForCompletion))], Format::Json, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let obj = v[0].as_object().unwrap();
        for c in COLUMNS {
            assert!(obj.contains_key(c), "{c}");
        }
        assert_eq!(obj["threshold"], "inf");
        assert!(obj["paoi_stderr"].is_null());
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
