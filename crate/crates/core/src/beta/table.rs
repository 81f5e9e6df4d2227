use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::beta_formula;
use crate::error::{Error, Result};
use crate::types::check_alpha;

/// Row coordinates of the reference table.
pub const REFERENCE_NS: [u64; 10] = [
    100, 300, 1_000, 3_000, 10_000, 30_000, 100_000, 300_000, 1_000_000, 3_000_000,
];

/// Column coordinates of the reference table.
pub const REFERENCE_ALPHAS: [f64; 6] = [0.010, 0.020, 0.050, 0.100, 0.200, 0.500];

/// Trials per entry used to produce the reference table.
pub const REFERENCE_TRIALS: u64 = 1_000_000;

/// Published `beta(n, alpha)`, indexed `[row of REFERENCE_NS][column of REFERENCE_ALPHAS]`.
pub const REFERENCE_BETAS: [[f64; 6]; 10] = [
    [2.683, 2.500, 2.236, 2.000, 1.732, 1.155],
    [2.887, 2.694, 2.425, 2.145, 1.877, 1.343],
    [3.054, 2.864, 2.546, 2.294, 2.000, 1.414],
    [3.184, 3.000, 2.670, 2.401, 2.095, 1.511],
    [3.290, 3.077, 2.770, 2.496, 2.183, 1.633],
    [3.357, 3.144, 2.828, 2.556, 2.240, 1.715],
    [3.411, 3.206, 2.889, 2.638, 2.324, 1.747],
    [3.487, 3.273, 2.958, 2.684, 2.375, 1.817],
    [3.530, 3.309, 3.000, 2.734, 2.438, 1.890],
    [3.560, 3.352, 3.040, 2.782, 2.474, 1.937],
];

const REFERENCE_GENERATOR: &str = "published-reference";

/// Slack when matching an alpha against a table column.
const ALPHA_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaRow {
    pub n: u64,
    pub alpha: f64,
    pub beta: f64,
    pub trials: u64,
    /// Absent for the published table, whose seeds are unknown.
    pub seed: Option<u64>,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaTable {
    pub rows: Vec<BetaRow>,
    pub generator: String,
}

const CSV_HEADER: [&str; 6] = ["n", "alpha", "beta", "trials", "seed", "generator"];

impl BetaTable {
    pub fn new(rows: Vec<BetaRow>, generator: impl Into<String>) -> Self {
        Self {
            rows,
            generator: generator.into(),
        }
    }

    /// The published 1,000,000-trial reference table.
    pub fn reference() -> Self {
        let rows = REFERENCE_NS
            .iter()
            .zip(REFERENCE_BETAS.iter())
            .flat_map(|(&n, betas)| {
                REFERENCE_ALPHAS.iter().zip(betas).map(move |(&alpha, &beta)| BetaRow {
                    n,
                    alpha,
                    beta,
                    trials: REFERENCE_TRIALS,
                    seed: None,
                    generator: REFERENCE_GENERATOR.into(),
                })
            })
            .collect();
        Self::new(rows, REFERENCE_GENERATOR)
    }

    pub fn get(&self, n: u64, alpha: f64) -> Option<&BetaRow> {
        self.rows
            .iter()
            .find(|r| r.n == n && (r.alpha - alpha).abs() <= ALPHA_EPS)
    }

    /// CSV with header `n,alpha,beta,trials,seed,generator`, beta to 4 places.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.alpha.to_string(),
                format!("{:.4}", r.beta),
                r.trials.to_string(),
                r.seed.map(|s| s.to_string()).unwrap_or_default(),
                r.generator.clone(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = rdr
            .headers()
            .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
            .clone();
        if header.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {}", CSV_HEADER.join(",")),
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i as u64 + 2;
            let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
            let bad = |what: &str| Error::Parse { line, message: format!("bad {what}") };
            let seed = match &rec[4] {
                "" => None,
                s => Some(s.parse().map_err(|_| bad("seed"))?),
            };
            rows.push(BetaRow {
                n: rec[0].parse().map_err(|_| bad("n"))?,
                alpha: rec[1].parse().map_err(|_| bad("alpha"))?,
                beta: rec[2].parse().map_err(|_| bad("beta"))?,
                trials: rec[3].parse().map_err(|_| bad("trials"))?,
                seed,
                generator: rec[5].to_string(),
            });
        }
        let generator = rows.first().map(|r| r.generator.clone()).unwrap_or_default();
        Ok(Self::new(rows, generator))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LookupResult {
    pub beta: f64,
    pub resolved_n: u64,
    pub resolved_alpha: f64,
}

/// Reference-table lookup, rounding `n` up to the next row and `alpha` down
/// to the next column. Both roundings can only increase `beta`.
pub fn beta_lookup(n: u64, alpha: f64) -> Result<LookupResult> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::Invalid("n must be at least 1".into()));
    }
    let row = REFERENCE_NS.iter().position(|&r| r >= n);
    let col = REFERENCE_ALPHAS.iter().rposition(|&c| c <= alpha + ALPHA_EPS);
    match (row, col) {
        (Some(row), Some(col)) => Ok(LookupResult {
            beta: REFERENCE_BETAS[row][col],
            resolved_n: REFERENCE_NS[row],
            resolved_alpha: REFERENCE_ALPHAS[col],
        }),
        _ => Err(Error::OutOfTable { n, alpha }),
    }
}

/// Residuals of the fitted formula against a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// `(n, alpha, |formula - table|)` per row.
    pub residuals: Vec<(u64, f64, f64)>,
    pub max: f64,
    pub median: f64,
}

pub fn fit_report(table: &BetaTable) -> Result<FitReport> {
    if table.rows.is_empty() {
        return Err(Error::Invalid("empty table".into()));
    }
    let residuals = table
        .rows
        .iter()
        .map(|r| Ok((r.n, r.alpha, (beta_formula(r.n, r.alpha)? - r.beta).abs())))
        .collect::<Result<Vec<_>>>()?;
    let mut sorted: Vec<f64> = residuals.iter().map(|r| r.2).collect();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    };
    Ok(FitReport {
        max: *sorted.last().expect("nonempty"),
        median,
        residuals,
    })
}
