//! Statistical feature extraction from wavelet decompositions.
//!
//! Each decomposition band (details first, finest to coarsest, then the final
//! approximation) is reduced to eleven summary statistics, concatenated
//! band-major into one row. At the default eight-level analysis this yields
//! 9 bands x 11 statistics = 99 features per waveform. Labeled rows are
//! collected into a [`Dataset`] that round-trips through CSV exactly.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synth::{SynthesisConfig, Waveform};
use crate::types::{ClassId, SnrDb};
use crate::wavelet::{decompose, WaveletError, WaveletFilter};

/// Statistics computed per band, in column order.
pub const STAT_COUNT: usize = 11;
/// Bands at the default eight-level decomposition (8 details + approximation).
pub const BAND_COUNT: usize = 9;
/// Width of a standard pipeline feature row.
pub const FEATURE_COUNT: usize = BAND_COUNT * STAT_COUNT;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// One labeled feature row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: ClassId,
}

/// A labeled feature table with uniform row width and a single noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<FeatureVector>,
    pub snr_db: SnrDb,
    pub provenance: SynthesisConfig,
}

impl Dataset {
    /// Panics on empty or ragged rows — both indicate a construction bug.
    pub fn new(rows: Vec<FeatureVector>, snr_db: SnrDb, provenance: SynthesisConfig) -> Self {
        assert!(!rows.is_empty(), "dataset must contain at least one row");
        let width = rows[0].values.len();
        assert!(
            rows.iter().all(|r| r.values.len() == width),
            "all rows must share one width"
        );
        Self {
            rows,
            snr_db,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of feature columns.
    pub fn feature_count(&self) -> usize {
        self.rows.first().map_or(0, |r| r.values.len())
    }

    /// Rows per class, indexed by [`ClassId::index`].
    pub fn class_counts(&self) -> [usize; crate::types::CLASS_COUNT] {
        let mut counts = [0usize; crate::types::CLASS_COUNT];
        for row in &self.rows {
            counts[row.label.index()] += 1;
        }
        counts
    }

    /// Serializes to CSV: `#`-prefixed metadata lines, a header
    /// `f001..fNNN,label,snr_db`, then one row per line with full-precision
    /// (shortest round-trip) number formatting.
    pub fn to_csv(&self) -> String {
        let width = self.feature_count();
        let mut out = String::new();
        let provenance =
            serde_json::to_string(&self.provenance).expect("synthesis config serializes");
        writeln!(out, "# provenance = {provenance}").unwrap();
        for i in 1..=width {
            write!(out, "f{i:03},").unwrap();
        }
        out.push_str("label,snr_db\n");
        for row in &self.rows {
            for v in &row.values {
                write!(out, "{v:?},").unwrap();
            }
            writeln!(out, "{},{}", row.label, self.snr_db).unwrap();
        }
        out
    }

    /// Parses the [`Dataset::to_csv`] format. Unknown `#` metadata keys are
    /// ignored so callers may annotate files with extra lines.
    pub fn from_csv(text: &str) -> Result<Self, FeatureError> {
        let err = |line: usize, msg: String| FeatureError::Csv { line, msg };
        let mut provenance: Option<SynthesisConfig> = None;
        let mut width: Option<usize> = None;
        let mut rows: Vec<FeatureVector> = Vec::new();
        let mut snr: Option<SnrDb> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(json) = comment.trim().strip_prefix("provenance =") {
                    provenance = Some(
                        serde_json::from_str(json.trim())
                            .map_err(|e| err(line_no, format!("bad provenance: {e}")))?,
                    );
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            match width {
                None => {
                    // Header row: fNNN columns then label and snr_db.
                    if fields.len() < 3 || fields[fields.len() - 2] != "label"
                        || fields[fields.len() - 1] != "snr_db"
                    {
                        return Err(err(line_no, "header must end with label,snr_db".into()));
                    }
                    let w = fields.len() - 2;
                    for (i, name) in fields[..w].iter().enumerate() {
                        let expect = format!("f{:03}", i + 1);
                        if *name != expect {
                            return Err(err(
                                line_no,
                                format!("column {} named {name:?}, expected {expect:?}", i + 1),
                            ));
                        }
                    }
                    width = Some(w);
                }
                Some(w) => {
                    if fields.len() != w + 2 {
                        return Err(err(
                            line_no,
                            format!("expected {} fields, got {}", w + 2, fields.len()),
                        ));
                    }
                    let mut values = Vec::with_capacity(w);
                    for field in &fields[..w] {
                        let v: f64 = field
                            .parse()
                            .map_err(|e| err(line_no, format!("bad number {field:?}: {e}")))?;
                        if !v.is_finite() {
                            return Err(err(line_no, format!("non-finite value {field:?}")));
                        }
                        values.push(v);
                    }
                    let label: ClassId = fields[w]
                        .parse()
                        .map_err(|e| err(line_no, format!("bad label: {e}")))?;
                    let row_snr: SnrDb = fields[w + 1]
                        .parse()
                        .map_err(|e| err(line_no, format!("bad snr: {e}")))?;
                    match snr {
                        None => snr = Some(row_snr),
                        Some(s) if s.key_bits() != row_snr.key_bits() => {
                            return Err(err(line_no, "mixed snr_db values".into()));
                        }
                        Some(_) => {}
                    }
                    rows.push(FeatureVector { values, label });
                }
            }
        }
        let provenance = provenance.ok_or_else(|| err(0, "missing provenance line".into()))?;
        if rows.is_empty() {
            return Err(err(0, "no data rows".into()));
        }
        Ok(Dataset::new(rows, snr.unwrap(), provenance))
    }
}

/// The eleven per-band statistics, in order: minimum, maximum, median, energy
/// (sum of squares), mean, Shannon entropy of the normalized squared
/// coefficients (natural log, `0 log 0 := 0`), skewness, standard deviation,
/// mean absolute deviation, variance, and kurtosis. Moment denominators use
/// `N - 1`; zero-spread sequences return 0 for skewness and kurtosis.
pub fn stat_functions(c: &[f64]) -> [f64; STAT_COUNT] {
    let n = c.len();
    assert!(n >= 2, "statistics need at least two coefficients");
    let nf = n as f64;

    let min = c.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut sorted = c.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };

    let energy: f64 = c.iter().map(|v| v * v).sum();
    let mean: f64 = c.iter().sum::<f64>() / nf;

    let entropy = if energy > 0.0 {
        -c.iter()
            .map(|v| {
                let p = v * v / energy;
                if p > 0.0 {
                    p * p.ln()
                } else {
                    0.0
                }
            })
            .sum::<f64>()
    } else {
        0.0
    };

    let m2: f64 = c.iter().map(|v| (v - mean).powi(2)).sum();
    let m3: f64 = c.iter().map(|v| (v - mean).powi(3)).sum();
    let m4: f64 = c.iter().map(|v| (v - mean).powi(4)).sum();
    let variance = m2 / (nf - 1.0);
    let sd = variance.sqrt();
    let (skewness, kurtosis) = if sd > 0.0 {
        (m3 / ((nf - 1.0) * sd.powi(3)), m4 / ((nf - 1.0) * sd.powi(4)))
    } else {
        (0.0, 0.0)
    };
    let mean_abs_dev = c.iter().map(|v| (v - mean).abs()).sum::<f64>() / nf;

    [
        min,
        max,
        median,
        energy,
        mean,
        entropy,
        skewness,
        sd,
        mean_abs_dev,
        variance,
        kurtosis,
    ]
}

/// Decomposes a waveform and concatenates the per-band statistics band-major:
/// details 1..levels (finest first), then the final approximation.
pub fn extract(
    w: &Waveform,
    filter: &WaveletFilter,
    levels: u32,
) -> Result<FeatureVector, FeatureError> {
    let d = decompose(&w.samples, filter, levels)?;
    let mut values = Vec::with_capacity((levels as usize + 1) * STAT_COUNT);
    for band in d.bands() {
        values.extend_from_slice(&stat_functions(band));
    }
    debug_assert!(values.iter().all(|v| v.is_finite()));
    Ok(FeatureVector {
        values,
        label: w.spec.class_id,
    })
}

/// Extracts one feature row per waveform. All waveforms must share one noise
/// level; `provenance` records how they were synthesized.
pub fn featurize_dataset(
    waveforms: &[Waveform],
    filter: &WaveletFilter,
    levels: u32,
    provenance: &SynthesisConfig,
) -> Result<Dataset, FeatureError> {
    assert!(!waveforms.is_empty(), "nothing to featurize");
    let snr = waveforms[0].snr_db;
    assert!(
        waveforms.iter().all(|w| w.snr_db.key_bits() == snr.key_bits()),
        "waveforms must share one noise level"
    );
    let rows = waveforms
        .iter()
        .map(|w| extract(w, filter, levels))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset::new(rows, snr, provenance.clone()))
}
