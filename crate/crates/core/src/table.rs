//! Numeric CSV tables with a provenance comment line.

use std::io::Write;

use crate::error::{Error, Result};
use crate::optimize::{AdiabaticTrack, CompressionLog};

/// Written as the first line: `# seed=..., git=..., config=...`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub seed: u64,
    pub git: String,
    pub config: String,
}

impl Provenance {
    pub fn comment(&self) -> String {
        format!(
            "# seed={}, git={}, config={}",
            self.seed, self.git, self.config
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::LengthMismatch {
                expected: self.header.len(),
                got: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    /// Column by header name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Refuses NaN and infinities anywhere in the table.
    pub fn write_csv<W: Write>(&self, w: W, provenance: Option<&Provenance>) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite value {} in row {i}, column {}",
                    row[j], self.header[j]
                )));
            }
        }
        let mut w = w;
        if let Some(p) = provenance {
            writeln!(w, "{}", p.comment()).map_err(io)?;
        }
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|x| format!("{x:e}")))
                .map_err(csv_err)?;
        }
        out.flush().map_err(io)?;
        Ok(())
    }

    pub fn to_csv_string(&self, provenance: Option<&Provenance>) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, provenance)?;
        String::from_utf8(buf).map_err(|e| Error::Numeric(e.to_string()))
    }

    /// Reads a table written by [`Table::write_csv`], skipping `#` lines.
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Table> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let header: Vec<String> = rdr
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_owned)
            .collect();
        let mut t = Table::new(header);
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let row = rec
                .iter()
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: i + 2,
                        msg: e.to_string(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            t.push(row)?;
        }
        Ok(t)
    }
}

fn io(e: std::io::Error) -> Error {
    Error::InvalidArgument(format!("write failed: {e}"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

fn theta_header(prefix: &str, m: usize) -> impl Iterator<Item = String> + '_ {
    (0..m).map(move |i| format!("{prefix}{i}"))
}

fn bool_f(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl AdiabaticTrack {
    /// `beta_a` is 0 with `beta_defined = 0` where the track does not move;
    /// parameters follow as `theta_<i>`.
    pub fn to_table(&self) -> Table {
        let m = self.samples.first().map_or(0, |s| s.theta.len());
        let mut header: Vec<String> = [
            "dt",
            "loss",
            "grad_norm",
            "converged",
            "shift_inf",
            "shift_l2",
            "beta_a",
            "beta_defined",
            "continuity_ok",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(theta_header("theta_", m));
        let mut t = Table::new(header);
        for s in &self.samples {
            let mut row = vec![
                s.dt,
                s.loss,
                s.grad_norm,
                bool_f(s.converged),
                s.shift_inf,
                s.shift_l2,
                s.beta_a.unwrap_or(0.0),
                bool_f(s.beta_a.is_some()),
                bool_f(s.continuity_ok),
            ];
            row.extend(&s.theta);
            t.push(row).expect("fixed width");
        }
        t
    }
}

impl CompressionLog {
    pub fn to_table(&self) -> Table {
        let m = self.records.first().map_or(0, |r| r.theta.len());
        let mut header: Vec<String> =
            ["k", "dt", "t", "final_loss", "cumulative_fidelity", "iters"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        header.extend(theta_header("theta_", m));
        let mut t = Table::new(header);
        for r in &self.records {
            let mut row = vec![
                r.k as f64,
                r.dt,
                r.t,
                r.final_loss,
                r.cumulative_fidelity,
                r.iters as f64,
            ];
            row.extend(&r.theta);
            t.push(row).expect("fixed width");
        }
        t
    }
}
