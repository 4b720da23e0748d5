//! Multi-level discrete wavelet decomposition (Mallat pyramid).
//!
//! The transform uses an orthonormal filter bank under periodic (circular)
//! boundary extension. Odd-length levels are made even by appending a single
//! zero sample, which keeps each analysis step an exact isometry; synthesis
//! applies the adjoint operator, so perfect reconstruction and energy
//! conservation hold to rounding error at every depth. Level-`j` coefficient
//! sequences have length `ceil(N / 2^j)`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WaveletError {
    #[error("invalid filter bank: {0}")]
    InvalidFilter(String),
    #[error("sequence of length {length} is too short for {levels} levels")]
    TooShort { length: usize, levels: u32 },
    #[error("coefficient length mismatch at level {level}: expected {expected}, got {got}")]
    LengthMismatch {
        level: u32,
        expected: usize,
        got: usize,
    },
    #[error("frequency band ({f} Hz at {fs} Hz sampling) admits no decomposition level")]
    InvalidBand { f: f64, fs: f64 },
}

/// The sym6 scaling filter in increasing-index order. The remaining three
/// bank filters are derived from it (reversal and alternating signs).
const SYM6_SCALING: [f64; 12] = [
    0.015404109327027373,
    0.0034907120842174702,
    -0.11799011114819057,
    -0.048311742585633,
    0.4910559419267466,
    0.787641141030194,
    0.3379294217276218,
    -0.07263752278646252,
    -0.021060292512300564,
    0.04472490177066578,
    0.0017677118642428036,
    -0.007800708325034148,
];

/// An orthonormal two-channel filter bank.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilter {
    pub name: String,
    pub decomposition_lowpass: Vec<f64>,
    pub decomposition_highpass: Vec<f64>,
    pub reconstruction_lowpass: Vec<f64>,
    pub reconstruction_highpass: Vec<f64>,
}

impl WaveletFilter {
    /// The 6th-order symlet (12 taps), validated on construction.
    pub fn sym6() -> Self {
        let h = SYM6_SCALING;
        let len = h.len();
        let rec_lo: Vec<f64> = h.to_vec();
        let dec_lo: Vec<f64> = h.iter().rev().cloned().collect();
        // Alternating-sign flip of the reversed scaling filter.
        let dec_hi: Vec<f64> = (0..len)
            .map(|k| if k % 2 == 0 { h[k] } else { -h[k] })
            .collect();
        let rec_hi: Vec<f64> = dec_hi.iter().rev().cloned().collect();
        let filter = Self {
            name: "sym6".to_string(),
            decomposition_lowpass: dec_lo,
            decomposition_highpass: dec_hi,
            reconstruction_lowpass: rec_lo,
            reconstruction_highpass: rec_hi,
        };
        filter
            .validate()
            .expect("embedded sym6 constants satisfy the bank invariants");
        filter
    }

    /// Checks the orthonormal-bank invariants: lowpass sums to sqrt(2) with
    /// unit energy, highpass sums to zero, the channels are orthogonal under
    /// even shifts, and synthesis filters are time-reversed analysis filters.
    pub fn validate(&self) -> Result<(), WaveletError> {
        const TOL: f64 = 1e-10;
        let lo = &self.decomposition_lowpass;
        let hi = &self.decomposition_highpass;
        let len = lo.len();
        let fail = |msg: String| Err(WaveletError::InvalidFilter(msg));
        if len < 2 || len % 2 != 0 {
            return fail(format!("filter length {len} must be even and >= 2"));
        }
        if hi.len() != len
            || self.reconstruction_lowpass.len() != len
            || self.reconstruction_highpass.len() != len
        {
            return fail("all four filters must share one length".to_string());
        }
        let lo_sum: f64 = lo.iter().sum();
        if (lo_sum - 2f64.sqrt()).abs() > TOL {
            return fail(format!("lowpass sum {lo_sum} != sqrt(2)"));
        }
        let hi_sum: f64 = hi.iter().sum();
        if hi_sum.abs() > TOL {
            return fail(format!("highpass sum {hi_sum} != 0"));
        }
        for (name, f) in [("lowpass", lo), ("highpass", hi)] {
            let energy: f64 = f.iter().map(|c| c * c).sum();
            if (energy - 1.0).abs() > TOL {
                return fail(format!("{name} energy {energy} != 1"));
            }
            for shift in (2..len).step_by(2) {
                let dot: f64 = (0..len - shift).map(|k| f[k] * f[k + shift]).sum();
                if dot.abs() > TOL {
                    return fail(format!("{name} not orthogonal at shift {shift}: {dot}"));
                }
            }
        }
        for shift in (0..len).step_by(2) {
            let dot: f64 = (0..len - shift).map(|k| lo[k] * hi[k + shift]).sum();
            let dot2: f64 = (0..len - shift).map(|k| hi[k] * lo[k + shift]).sum();
            if dot.abs() > TOL || dot2.abs() > TOL {
                return fail(format!("channels not orthogonal at shift {shift}"));
            }
        }
        let reversed = |f: &[f64]| f.iter().rev().cloned().collect::<Vec<f64>>();
        if self.reconstruction_lowpass != reversed(lo)
            || self.reconstruction_highpass != reversed(hi)
        {
            return fail("synthesis filters must be time-reversed analysis filters".into());
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.decomposition_lowpass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decomposition_lowpass.is_empty()
    }
}

/// Coefficients of a multi-level decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Detail coefficients, index 0 = level 1 (finest).
    pub details: Vec<Vec<f64>>,
    /// Approximation coefficients at the final level.
    pub approximation: Vec<f64>,
    /// Length of the analyzed sequence.
    pub input_len: usize,
}

impl Decomposition {
    pub fn levels(&self) -> u32 {
        self.details.len() as u32
    }

    /// The nine analysis bands in extraction order: details 1..D, then the
    /// final approximation.
    pub fn bands(&self) -> impl Iterator<Item = &[f64]> {
        self.details
            .iter()
            .map(Vec::as_slice)
            .chain(std::iter::once(self.approximation.as_slice()))
    }

    /// Total energy over all coefficient sequences.
    pub fn energy(&self) -> f64 {
        self.bands().flatten().map(|c| c * c).sum()
    }
}

/// Smallest decomposition depth `D` whose dyadic band `[fs/2^(D+1), fs/2^D]`
/// contains the frequency `f`.
pub fn required_levels(f: f64, fs: f64) -> Result<u32, WaveletError> {
    if !(f > 0.0 && f < fs / 2.0 && fs.is_finite()) {
        return Err(WaveletError::InvalidBand { f, fs });
    }
    let mut upper = fs / 2.0;
    for d in 1..=64u32 {
        let lower = upper / 2.0;
        if lower <= f && f <= upper {
            return Ok(d);
        }
        if upper < f {
            break;
        }
        upper = lower;
    }
    Err(WaveletError::InvalidBand { f, fs })
}

/// One analysis step on an even-length block: circular convolution with each
/// decomposition filter, keeping even-indexed outputs.
fn analyze_level(x: &[f64], filter: &WaveletFilter) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    debug_assert!(n % 2 == 0 && n >= filter.len());
    let lo = &filter.decomposition_lowpass;
    let hi = &filter.decomposition_highpass;
    let taps = filter.len();
    let half = n / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let mut a = 0.0;
        let mut d = 0.0;
        for m in 0..taps {
            // Circular index (2k - m) mod n; 2k + n - m stays non-negative.
            let idx = (2 * k + n - m) % n;
            a += lo[m] * x[idx];
            d += hi[m] * x[idx];
        }
        approx[k] = a;
        detail[k] = d;
    }
    (approx, detail)
}

/// Adjoint of [`analyze_level`]: upsample-and-filter with the synthesis
/// filters, accumulating into a length-`2 * approx.len()` block.
fn synthesize_level(approx: &[f64], detail: &[f64], filter: &WaveletFilter) -> Vec<f64> {
    let half = approx.len();
    debug_assert_eq!(half, detail.len());
    let n = 2 * half;
    let taps = filter.len();
    let rec_lo = &filter.reconstruction_lowpass;
    let rec_hi = &filter.reconstruction_highpass;
    let mut x = vec![0.0; n];
    for k in 0..half {
        for m in 0..taps {
            let idx = (2 * k + n - m) % n;
            // rec[taps-1-m] is the matching analysis tap, making this loop
            // the exact transpose of the analysis loop.
            x[idx] += rec_lo[taps - 1 - m] * approx[k] + rec_hi[taps - 1 - m] * detail[k];
        }
    }
    x
}

/// Expected coefficient length at each level: `ceil(input_len / 2^level)`.
fn level_len(input_len: usize, level: u32) -> usize {
    let mut len = input_len;
    for _ in 0..level {
        len = len.div_ceil(2);
    }
    len
}

/// Full pyramid decomposition to the requested depth.
pub fn decompose(
    x: &[f64],
    filter: &WaveletFilter,
    levels: u32,
) -> Result<Decomposition, WaveletError> {
    if levels == 0 || x.len() < (1usize << levels.min(63)) {
        return Err(WaveletError::TooShort {
            length: x.len(),
            levels,
        });
    }
    let mut current = x.to_vec();
    let mut details = Vec::with_capacity(levels as usize);
    for level in 0..levels {
        if current.len() % 2 != 0 {
            current.push(0.0);
        }
        if current.len() < filter.len() {
            return Err(WaveletError::TooShort {
                length: x.len(),
                levels: level + 1,
            });
        }
        let (approx, detail) = analyze_level(&current, filter);
        details.push(detail);
        current = approx;
    }
    Ok(Decomposition {
        details,
        approximation: current,
        input_len: x.len(),
    })
}

/// Inverse pyramid; recovers the analyzed sequence exactly (up to rounding)
/// for decompositions produced with the same filter.
pub fn reconstruct(d: &Decomposition, filter: &WaveletFilter) -> Result<Vec<f64>, WaveletError> {
    let levels = d.levels();
    let expected_final = level_len(d.input_len, levels);
    if d.approximation.len() != expected_final {
        return Err(WaveletError::LengthMismatch {
            level: levels,
            expected: expected_final,
            got: d.approximation.len(),
        });
    }
    for (i, detail) in d.details.iter().enumerate() {
        let level = i as u32 + 1;
        let expected = level_len(d.input_len, level);
        if detail.len() != expected {
            return Err(WaveletError::LengthMismatch {
                level,
                expected,
                got: detail.len(),
            });
        }
    }
    let mut current = d.approximation.clone();
    for level in (1..=levels).rev() {
        let detail = &d.details[(level - 1) as usize];
        let mut block = synthesize_level(&current, detail, filter);
        // Drop the zero sample appended when this level's input was odd.
        block.truncate(level_len(d.input_len, level - 1));
        current = block;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_signal(seed: u64, len: usize) -> Vec<f64> {
        let mut rng = stream(seed, &[0xD17]);
        (0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
    }

    #[test]
    fn sym6_satisfies_bank_invariants() {
        let f = WaveletFilter::sym6();
        assert_eq!(f.len(), 12);
        f.validate().unwrap();
    }

    #[test]
    fn corrupted_filter_fails_validation() {
        let mut f = WaveletFilter::sym6();
        f.decomposition_lowpass[3] += 1e-6;
        assert!(f.validate().is_err());
    }

    #[test]
    fn required_levels_matches_band_rule() {
        assert_eq!(required_levels(50.0, 25_000.0).unwrap(), 8);
        // Exact dyadic boundary: the smaller depth wins.
        assert_eq!(required_levels(250.0, 1000.0).unwrap(), 1);
        assert!(required_levels(0.0, 25_000.0).is_err());
        assert!(required_levels(13_000.0, 25_000.0).is_err());
    }

    #[test]
    fn required_levels_agrees_with_brute_force() {
        let fs = 25_000.0;
        for f in [60.0, 50.0, 100.0, 333.3, 1500.0, 12_000.0, 3.0] {
            let d = required_levels(f, fs).unwrap();
            let satisfied: Vec<u32> = (1..=16)
                .filter(|&k| {
                    fs / 2f64.powi(k as i32 + 1) <= f && f <= fs / 2f64.powi(k as i32)
                })
                .collect();
            assert!(satisfied.contains(&d), "{f} Hz: {d} not in {satisfied:?}");
            assert_eq!(d, satisfied[0], "{f} Hz: smallest depth expected");
        }
    }

    #[test]
    fn constant_sequence_annihilates_details() {
        let filter = WaveletFilter::sym6();
        let c = 3.25;
        let x = vec![c; 64];
        for levels in 1..=2u32 {
            let d = decompose(&x, &filter, levels).unwrap();
            for detail in &d.details {
                for &v in detail {
                    assert!(v.abs() < 1e-10, "detail {v} at {levels} levels");
                }
            }
            let expect = c * 2f64.powf(levels as f64 / 2.0);
            for &a in &d.approximation {
                assert!((a - expect).abs() < 1e-10, "approx {a} vs {expect}");
            }
        }
    }

    #[test]
    fn kronecker_delta_matches_direct_convolution() {
        let filter = WaveletFilter::sym6();
        let n = 32;
        let mut x = vec![0.0; n];
        x[0] = 1.0;
        let d = decompose(&x, &filter, 1).unwrap();
        // Independent direct evaluation with signed index arithmetic.
        for k in 0..n / 2 {
            let (mut a, mut det) = (0.0, 0.0);
            for m in 0..filter.len() {
                let idx = (2 * k as i64 - m as i64).rem_euclid(n as i64) as usize;
                a += filter.decomposition_lowpass[m] * x[idx];
                det += filter.decomposition_highpass[m] * x[idx];
            }
            assert!((d.approximation[k] - a).abs() < 1e-12);
            assert!((d.details[0][k] - det).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_on_random_signal() {
        let filter = WaveletFilter::sym6();
        let x = random_signal(1, 256);
        let d = decompose(&x, &filter, 4).unwrap();
        let y = reconstruct(&d, &filter).unwrap();
        let worst = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "round-trip error {worst}");
    }

    #[test]
    fn round_trip_with_odd_levels() {
        // 1875 -> 938 -> 469 -> ... exercises the zero-pad path repeatedly.
        let filter = WaveletFilter::sym6();
        let x = random_signal(2, 15_000 / 8);
        let d = decompose(&x, &filter, 5).unwrap();
        let y = reconstruct(&d, &filter).unwrap();
        assert_eq!(y.len(), x.len());
        let worst = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "round-trip error {worst}");
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let ec = d.energy();
        assert!(((ex - ec) / ex).abs() < 1e-8, "energy drift {}", ex - ec);
    }

    #[test]
    fn coefficient_lengths_follow_ceil_rule() {
        let filter = WaveletFilter::sym6();
        let x = random_signal(3, 15_000);
        let d = decompose(&x, &filter, 8).unwrap();
        let expected = [7500, 3750, 1875, 938, 469, 235, 118, 59];
        for (j, detail) in d.details.iter().enumerate() {
            assert_eq!(detail.len(), expected[j], "level {}", j + 1);
            assert_eq!(detail.len(), level_len(15_000, j as u32 + 1));
        }
        assert_eq!(d.approximation.len(), 59);
    }

    #[test]
    fn linearity_holds_elementwise() {
        let filter = WaveletFilter::sym6();
        let x = random_signal(4, 300);
        let y = random_signal(5, 300);
        let (a, b) = (1.7, -0.35);
        let combined: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let dc = decompose(&combined, &filter, 5).unwrap();
        let dx = decompose(&x, &filter, 5).unwrap();
        let dy = decompose(&y, &filter, 5).unwrap();
        for ((bc, bx), by) in dc.bands().zip(dx.bands()).zip(dy.bands()) {
            for i in 0..bc.len() {
                let lin = a * bx[i] + b * by[i];
                assert!((bc[i] - lin).abs() < 1e-9, "not linear at {i}");
            }
        }
    }

    #[test]
    fn zeroed_details_reconstruct_a_constant() {
        let filter = WaveletFilter::sym6();
        let x = vec![2.0; 64];
        let mut d = decompose(&x, &filter, 3).unwrap();
        for detail in &mut d.details {
            detail.iter_mut().for_each(|v| *v = 0.0);
        }
        let y = reconstruct(&d, &filter).unwrap();
        for &v in &y {
            assert!((v - 2.0).abs() < 1e-9, "sample {v}");
        }
    }

    #[test]
    fn short_sequences_are_rejected() {
        let filter = WaveletFilter::sym6();
        assert!(matches!(
            decompose(&[1.0; 4], &filter, 3),
            Err(WaveletError::TooShort { .. })
        ));
        // Long enough for the dyadic bound but shorter than the taps at the
        // deepest level.
        assert!(matches!(
            decompose(&[1.0; 16], &filter, 2),
            Err(WaveletError::TooShort { .. })
        ));
    }

    #[test]
    fn tampered_lengths_are_rejected() {
        let filter = WaveletFilter::sym6();
        let x = random_signal(6, 128);
        let mut d = decompose(&x, &filter, 3).unwrap();
        d.details[1].pop();
        assert!(matches!(
            reconstruct(&d, &filter),
            Err(WaveletError::LengthMismatch { level: 2, .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn round_trip_and_energy_on_arbitrary_signals(
            seed in 0u64..1000,
            len in 48usize..400,
            levels in 1u32..4,
        ) {
            let filter = WaveletFilter::sym6();
            let x = random_signal(seed, len);
            let d = decompose(&x, &filter, levels).unwrap();
            let y = reconstruct(&d, &filter).unwrap();
            prop_assert_eq!(y.len(), x.len());
            for (a, b) in x.iter().zip(&y) {
                prop_assert!((a - b).abs() < 1e-8);
            }
            let ex: f64 = x.iter().map(|v| v * v).sum();
            let ec = d.energy();
            prop_assert!(((ex - ec) / ex.max(1e-300)).abs() < 1e-8);
        }
    }
}
