//! Plot-ready tables: raw scatter points and per-column histograms.

use wica::Dataset;

use crate::error::{CliError, CliResult};

pub const DEFAULT_BINS: usize = 50;

pub fn scatter_csv(x: &Dataset) -> String {
    x.to_csv_string()
}

/// `column,bin,lo,hi,count`, equal-width bins over each column's range.
/// The last bin is closed on the right.
pub fn marginals_csv(x: &Dataset, bins: usize) -> CliResult<String> {
    if bins == 0 {
        return Err(CliError::Usage("--bins must be positive".into()));
    }
    let mut out = String::from("column,bin,lo,hi,count\n");
    for j in 0..x.ncols() {
        let col = x.column(j);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut counts = vec![0usize; bins];
        for &v in col.iter() {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        for (b, c) in counts.iter().enumerate() {
            let a = lo + b as f64 * width;
            out.push_str(&format!("{j},{b},{a},{},{c}\n", a + width));
        }
    }
    Ok(out)
}
