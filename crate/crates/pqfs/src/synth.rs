//! Synthetic power-quality event generation.
//!
//! Fourteen parametric waveform models cover the usual single and combined
//! disturbance classes: pure sinusoid, DC offset, sag, swell, interruption,
//! flicker, notching, harmonics, oscillatory transient, and the sag/swell +
//! harmonics/transient combinations. Every instance is rendered on a fixed
//! sample grid (50 Hz fundamental, 25 kHz sampling, 30 cycles by default) and
//! can be corrupted with zero-mean Gaussian white noise at a prescribed SNR.
//!
//! All random choices flow through named RNG streams (see [`crate::rng`]), so
//! a dataset is fully reproducible from its seed and noisy datasets reuse the
//! event parameters of their clean counterparts.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, purpose};
use crate::types::{ClassId, SnrDb};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthesis config: {0}")]
    InvalidConfig(String),
    #[error("invalid event spec: {0}")]
    InvalidSpec(String),
    #[error("waveform contains non-finite samples")]
    NonFiniteSignal,
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Sample-grid parameters shared by every rendered event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    /// Fundamental grid frequency in hertz.
    pub fundamental_frequency: f64,
    /// Sampling frequency in hertz.
    pub sampling_frequency: f64,
    /// Rendered duration in fundamental cycles.
    pub duration_cycles: u32,
    /// Base seed for all event and noise streams.
    pub rng_seed: u64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            fundamental_frequency: 50.0,
            sampling_frequency: 25_000.0,
            duration_cycles: 30,
            rng_seed: 0,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.fundamental_frequency > 0.0) {
            return Err(SynthError::InvalidConfig(
                "fundamental frequency must be positive".into(),
            ));
        }
        if self.sampling_frequency <= 2.0 * self.fundamental_frequency {
            return Err(SynthError::InvalidConfig(format!(
                "sampling frequency {} must exceed twice the fundamental {}",
                self.sampling_frequency, self.fundamental_frequency
            )));
        }
        if self.duration_cycles < 1 {
            return Err(SynthError::InvalidConfig("need at least one cycle".into()));
        }
        let exact = self.duration_cycles as f64 * self.sampling_frequency
            / self.fundamental_frequency;
        if (exact - exact.round()).abs() > 1e-6 {
            return Err(SynthError::InvalidConfig(format!(
                "sample count {exact} is not an integer"
            )));
        }
        Ok(())
    }

    /// Total number of samples in a rendered waveform (15000 at defaults).
    pub fn sample_count(&self) -> usize {
        let exact = self.duration_cycles as f64 * self.sampling_frequency
            / self.fundamental_frequency;
        exact.round() as usize
    }

    /// One fundamental period in seconds.
    pub fn fundamental_period(&self) -> f64 {
        1.0 / self.fundamental_frequency
    }

    /// Rendered duration in seconds.
    pub fn duration(&self) -> f64 {
        self.duration_cycles as f64 * self.fundamental_period()
    }
}

// ---------------------------------------------------------------------------
// Event parameter models
// ---------------------------------------------------------------------------

/// Harmonic amplitude mix for orders {1, 5, 7, 11, 13}.
///
/// The fundamental amplitude is derived from the unit-energy constraint
/// (sum of squared amplitudes = 1), so only the four overtones are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicMix {
    pub fundamental: f64,
    pub h5: f64,
    pub h7: f64,
    pub h11: f64,
    pub h13: f64,
}

impl HarmonicMix {
    /// Builds a mix from the four overtone amplitudes, solving the
    /// fundamental from the unit-energy constraint.
    pub fn from_overtones(h5: f64, h7: f64, h11: f64, h13: f64) -> Self {
        let rest = h5 * h5 + h7 * h7 + h11 * h11 + h13 * h13;
        Self {
            fundamental: (1.0 - rest).sqrt(),
            h5,
            h7,
            h11,
            h13,
        }
    }

    pub fn energy(&self) -> f64 {
        self.fundamental * self.fundamental
            + self.h5 * self.h5
            + self.h7 * self.h7
            + self.h11 * self.h11
            + self.h13 * self.h13
    }
}

/// Damped high-frequency oscillation rider.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransientShape {
    /// Peak magnitude in per-unit.
    pub magnitude: f64,
    /// Exponential decay rate in 1/s.
    pub damping: f64,
    /// Oscillation frequency in hertz.
    pub frequency: f64,
}

/// Per-class event parameters. Interval endpoints `start`/`end` are in
/// seconds, quantized to the sample grid by the sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EventParams {
    PureSinusoid {
        amplitude: f64,
    },
    DcOffset {
        amplitude: f64,
        offset: f64,
    },
    Sag {
        depth: f64,
        start: f64,
        end: f64,
    },
    Swell {
        rise: f64,
        start: f64,
        end: f64,
    },
    Interruption {
        depth: f64,
        start: f64,
        end: f64,
    },
    Flicker {
        /// Modulation depth (per-unit).
        mod_depth: f64,
        /// Modulation frequency in hertz.
        mod_frequency: f64,
    },
    Notching {
        notch_depth: f64,
        /// Notch window within the first cycle; repeats every period.
        start: f64,
        end: f64,
    },
    Harmonics {
        mix: HarmonicMix,
    },
    OscillatoryTransient {
        transient: TransientShape,
        start: f64,
    },
    SagWithHarmonics {
        depth: f64,
        start: f64,
        end: f64,
        mix: HarmonicMix,
    },
    SwellWithHarmonics {
        rise: f64,
        start: f64,
        end: f64,
        mix: HarmonicMix,
    },
    FlickerWithHarmonics {
        mod_depth: f64,
        /// Modulation frequency in hertz.
        mod_frequency: f64,
        mix: HarmonicMix,
    },
    SagWithTransient {
        depth: f64,
        start: f64,
        end: f64,
        /// Ring onset, drawn independently of the dip window.
        transient_start: f64,
        transient: TransientShape,
    },
    SwellWithTransient {
        rise: f64,
        start: f64,
        end: f64,
        /// Ring onset, drawn independently of the rise window.
        transient_start: f64,
        transient: TransientShape,
    },
}

impl EventParams {
    /// The class this parameter record belongs to.
    pub fn class_id(&self) -> ClassId {
        let number = match self {
            EventParams::PureSinusoid { .. } => 1,
            EventParams::DcOffset { .. } => 2,
            EventParams::Sag { .. } => 3,
            EventParams::Swell { .. } => 4,
            EventParams::Interruption { .. } => 5,
            EventParams::Flicker { .. } => 6,
            EventParams::Notching { .. } => 7,
            EventParams::Harmonics { .. } => 8,
            EventParams::OscillatoryTransient { .. } => 9,
            EventParams::SagWithHarmonics { .. } => 10,
            EventParams::SwellWithHarmonics { .. } => 11,
            EventParams::FlickerWithHarmonics { .. } => 12,
            EventParams::SagWithTransient { .. } => 13,
            EventParams::SwellWithTransient { .. } => 14,
        };
        ClassId::new(number).expect("class number is in range")
    }
}

/// A fully sampled event: class label plus concrete model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub class_id: ClassId,
    pub params: EventParams,
}

impl EventSpec {
    pub fn new(params: EventParams) -> Self {
        Self {
            class_id: params.class_id(),
            params,
        }
    }

    /// Checks every parameter against its model range. Interval checks allow
    /// a 1e-9 s slack for grid rounding.
    pub fn validate(&self, config: &SynthesisConfig) -> Result<(), SynthError> {
        const EPS: f64 = 1e-9;
        let t = config.fundamental_period();
        let d = config.duration();
        let fail = |msg: String| Err(SynthError::InvalidSpec(msg));
        let check_range = |name: &str, v: f64, lo: f64, hi: f64| {
            if v < lo - EPS || v > hi + EPS {
                fail(format!("{name} = {v} outside [{lo}, {hi}]"))
            } else {
                Ok(())
            }
        };
        let check_interval = |start: f64, end: f64, lo_len: f64, hi_len: f64| {
            check_range("interval start", start, 0.0, d)?;
            check_range("interval end", end, 0.0, d)?;
            if end <= start {
                return fail(format!("interval end {end} must exceed start {start}"));
            }
            check_range("interval length", end - start, lo_len, hi_len)
        };
        let check_mix = |mix: &HarmonicMix| {
            for (name, v) in [
                ("h5", mix.h5),
                ("h7", mix.h7),
                ("h11", mix.h11),
                ("h13", mix.h13),
            ] {
                check_range(name, v, f64::MIN_POSITIVE, 0.2)?;
            }
            if (mix.energy() - 1.0).abs() > 1e-9 {
                return fail(format!("harmonic energy {} must be 1", mix.energy()));
            }
            Ok(())
        };
        let check_transient = |tr: &TransientShape, onset: f64| {
            check_range("transient damping", tr.damping, 50.0, 100.0)?;
            check_range("transient magnitude", tr.magnitude, 1.0, 4.0)?;
            check_range("transient frequency", tr.frequency, 1000.0, 10_000.0)?;
            check_range("transient onset fraction", onset / d, 0.3, 0.9)
        };

        if self.class_id != self.params.class_id() {
            return fail("class id does not match parameter record".into());
        }
        match &self.params {
            EventParams::PureSinusoid { amplitude } => {
                check_range("amplitude", *amplitude, 0.9, 1.1)
            }
            EventParams::DcOffset { amplitude, offset } => {
                check_range("amplitude", *amplitude, 0.9, 1.1)?;
                check_range("offset", *offset, 0.0, 0.1)
            }
            EventParams::Sag { depth, start, end } => {
                check_range("sag depth", *depth, 0.1, 0.9)?;
                check_interval(*start, *end, 0.5 * t, 30.0 * t)
            }
            EventParams::Swell { rise, start, end } => {
                check_range("swell rise", *rise, 0.1, 0.8)?;
                check_interval(*start, *end, 0.5 * t, 30.0 * t)
            }
            EventParams::Interruption { depth, start, end } => {
                check_range("interruption depth", *depth, 0.9, 1.0)?;
                check_interval(*start, *end, 0.5 * t, 30.0 * t)
            }
            EventParams::Flicker {
                mod_depth,
                mod_frequency,
            } => {
                check_range("flicker depth", *mod_depth, f64::MIN_POSITIVE, 0.07)?;
                check_range("flicker modulation frequency", *mod_frequency, 1.0, 25.0)
            }
            EventParams::Notching {
                notch_depth,
                start,
                end,
            } => {
                check_range("notch depth", *notch_depth, 0.1, 0.4)?;
                check_range("notch start", *start, 0.0, t)?;
                check_range("notch width", *end - *start, 0.01 * t, 0.05 * t)
            }
            EventParams::Harmonics { mix } => check_mix(mix),
            EventParams::OscillatoryTransient { transient, start } => {
                check_transient(transient, *start)
            }
            EventParams::SagWithHarmonics {
                depth,
                start,
                end,
                mix,
            } => {
                check_range("sag depth", *depth, 0.1, 0.9)?;
                check_interval(*start, *end, 0.5 * t, 30.0 * t)?;
                check_mix(mix)
            }
            EventParams::SwellWithHarmonics {
                rise,
                start,
                end,
                mix,
            } => {
                check_range("swell rise", *rise, 0.1, 0.8)?;
                check_interval(*start, *end, 0.5 * t, 30.0 * t)?;
                check_mix(mix)
            }
            EventParams::FlickerWithHarmonics {
                mod_depth,
                mod_frequency,
                mix,
            } => {
                check_range("flicker depth", *mod_depth, f64::MIN_POSITIVE, 0.07)?;
                check_range("flicker modulation frequency", *mod_frequency, 1.0, 25.0)?;
                check_mix(mix)
            }
            EventParams::SagWithTransient {
                depth,
                start,
                end,
                transient_start,
                transient,
            } => {
                check_range("sag depth", *depth, 0.1, 0.9)?;
                check_interval(*start, *end, 0.5 * t, 30.0 * t)?;
                check_transient(transient, *transient_start)
            }
            EventParams::SwellWithTransient {
                rise,
                start,
                end,
                transient_start,
                transient,
            } => {
                check_range("swell rise", *rise, 0.1, 0.8)?;
                check_interval(*start, *end, 0.5 * t, 30.0 * t)?;
                check_transient(transient, *transient_start)
            }
        }
    }
}

/// A rendered event instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub spec: EventSpec,
    pub snr_db: SnrDb,
}

// ---------------------------------------------------------------------------
// Parameter sampling
// ---------------------------------------------------------------------------

/// Draws uniformly from `[lo, hi)`.
fn uniform(rng: &mut ChaCha12Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draws uniformly from `(lo, hi]` — used for ranges open at the bottom.
fn uniform_open_low(rng: &mut ChaCha12Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (1.0 - rng.random::<f64>())
}

fn sample_mix(rng: &mut ChaCha12Rng) -> HarmonicMix {
    let h5 = uniform_open_low(rng, 0.0, 0.2);
    let h7 = uniform_open_low(rng, 0.0, 0.2);
    let h11 = uniform_open_low(rng, 0.0, 0.2);
    let h13 = uniform_open_low(rng, 0.0, 0.2);
    HarmonicMix::from_overtones(h5, h7, h11, h13)
}

fn sample_transient_shape(rng: &mut ChaCha12Rng) -> TransientShape {
    TransientShape {
        damping: uniform(rng, 50.0, 100.0),
        magnitude: uniform(rng, 1.0, 4.0),
        frequency: uniform(rng, 1000.0, 10_000.0),
    }
}

/// Draws an event interval `[start, end]` quantized to the sample grid, with
/// the duration uniform over `[min_len, min(max_len, window)]` and the onset
/// uniform over what remains of the window.
fn sample_interval(
    rng: &mut ChaCha12Rng,
    config: &SynthesisConfig,
    min_len: f64,
    max_len: f64,
) -> (f64, f64) {
    let fs = config.sampling_frequency;
    let total = config.sample_count() as i64;
    let lo = ((min_len * fs) - 1e-9).ceil() as i64;
    let hi = ((max_len.min(config.duration()) * fs) + 1e-9).floor() as i64;
    assert!(
        (1..=hi).contains(&lo),
        "config window too short for event duration range"
    );
    let len = rng.random_range(lo..=hi);
    let start = rng.random_range(0..=total - len);
    (start as f64 / fs, (start + len) as f64 / fs)
}

/// Draws a transient onset as a grid-quantized fraction of the duration in
/// `[0.3, 0.9]`, returning the onset in seconds.
fn sample_onset_fraction(rng: &mut ChaCha12Rng, config: &SynthesisConfig) -> f64 {
    let total = config.sample_count() as f64;
    let lo = (0.3 * total).ceil() as i64;
    let hi = (0.9 * total).floor() as i64;
    let idx = rng.random_range(lo..=hi);
    idx as f64 / config.sampling_frequency
}

/// Samples a complete parameter record for `class_id`, uniformly over each
/// model range. Interval endpoints land exactly on the sample grid.
pub fn sample_event_spec(
    class_id: ClassId,
    config: &SynthesisConfig,
    rng: &mut ChaCha12Rng,
) -> EventSpec {
    let t = config.fundamental_period();
    let params = match class_id.number() {
        1 => EventParams::PureSinusoid {
            amplitude: uniform(rng, 0.9, 1.1),
        },
        2 => EventParams::DcOffset {
            amplitude: uniform(rng, 0.9, 1.1),
            offset: uniform(rng, 0.0, 0.1),
        },
        3 => {
            let depth = uniform(rng, 0.1, 0.9);
            let (start, end) = sample_interval(rng, config, 0.5 * t, 30.0 * t);
            EventParams::Sag { depth, start, end }
        }
        4 => {
            let rise = uniform(rng, 0.1, 0.8);
            let (start, end) = sample_interval(rng, config, 0.5 * t, 30.0 * t);
            EventParams::Swell { rise, start, end }
        }
        5 => {
            let depth = uniform_open_low(rng, 0.9, 1.0);
            let (start, end) = sample_interval(rng, config, 0.5 * t, 30.0 * t);
            EventParams::Interruption { depth, start, end }
        }
        6 => EventParams::Flicker {
            mod_depth: uniform_open_low(rng, 0.0, 0.07),
            mod_frequency: uniform(rng, 1.0, 25.0),
        },
        7 => {
            let notch_depth = uniform(rng, 0.1, 0.4);
            let fs = config.sampling_frequency;
            let start_idx = rng.random_range(0..=(t * fs).round() as i64);
            let width_lo = ((0.01 * t * fs) - 1e-9).ceil() as i64;
            let width_hi = ((0.05 * t * fs) + 1e-9).floor() as i64;
            let width = rng.random_range(width_lo..=width_hi);
            EventParams::Notching {
                notch_depth,
                start: start_idx as f64 / fs,
                end: (start_idx + width) as f64 / fs,
            }
        }
        8 => EventParams::Harmonics {
            mix: sample_mix(rng),
        },
        9 => EventParams::OscillatoryTransient {
            transient: sample_transient_shape(rng),
            start: sample_onset_fraction(rng, config),
        },
        10 => {
            let depth = uniform(rng, 0.1, 0.9);
            let (start, end) = sample_interval(rng, config, 0.5 * t, 30.0 * t);
            EventParams::SagWithHarmonics {
                depth,
                start,
                end,
                mix: sample_mix(rng),
            }
        }
        11 => {
            let rise = uniform(rng, 0.1, 0.8);
            let (start, end) = sample_interval(rng, config, 0.5 * t, 30.0 * t);
            EventParams::SwellWithHarmonics {
                rise,
                start,
                end,
                mix: sample_mix(rng),
            }
        }
        12 => EventParams::FlickerWithHarmonics {
            mod_depth: uniform_open_low(rng, 0.0, 0.07),
            mod_frequency: uniform(rng, 1.0, 25.0),
            mix: sample_mix(rng),
        },
        13 => {
            let depth = uniform(rng, 0.1, 0.9);
            let (start, end) = sample_interval(rng, config, 0.5 * t, 30.0 * t);
            EventParams::SagWithTransient {
                depth,
                start,
                end,
                transient_start: sample_onset_fraction(rng, config),
                transient: sample_transient_shape(rng),
            }
        }
        14 => {
            let rise = uniform(rng, 0.1, 0.8);
            let (start, end) = sample_interval(rng, config, 0.5 * t, 30.0 * t);
            EventParams::SwellWithTransient {
                rise,
                start,
                end,
                transient_start: sample_onset_fraction(rng, config),
                transient: sample_transient_shape(rng),
            }
        }
        _ => unreachable!("class ids are validated at construction"),
    };
    EventSpec::new(params)
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Unit step: 1 for strictly positive arguments, else 0.
fn step(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Rectangular gate `u(t-start) - u(t-end)`: 1 on `(start, end]`, else 0.
fn gate(t: f64, start: f64, end: f64) -> f64 {
    step(t - start) - step(t - end)
}

/// Sign with `sign(0) = 0`.
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn harmonic_sum(mix: &HarmonicMix, omega_t: f64) -> f64 {
    mix.fundamental * omega_t.sin()
        + mix.h5 * (5.0 * omega_t).sin()
        + mix.h7 * (7.0 * omega_t).sin()
        + mix.h11 * (11.0 * omega_t).sin()
        + mix.h13 * (13.0 * omega_t).sin()
}

/// Damped oscillation rider, zero until its onset.
fn transient_term(tr: &TransientShape, t: f64, onset: f64) -> f64 {
    if t > onset {
        tr.magnitude
            * (-tr.damping * (t - onset)).exp()
            * (2.0 * std::f64::consts::PI * tr.frequency * t).sin()
    } else {
        0.0
    }
}

/// Evaluates the event model on the sample grid `t_i = i / Fs`.
pub fn render(spec: &EventSpec, config: &SynthesisConfig) -> Waveform {
    let n = config.sample_count();
    let omega = 2.0 * std::f64::consts::PI * config.fundamental_frequency;
    let period = config.fundamental_period();
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / config.sampling_frequency;
        let wt = omega * t;
        let v = match &spec.params {
            EventParams::PureSinusoid { amplitude } => amplitude * wt.sin(),
            EventParams::DcOffset { amplitude, offset } => offset + amplitude * wt.sin(),
            EventParams::Sag { depth, start, end } => {
                (1.0 - depth * gate(t, *start, *end)) * wt.sin()
            }
            EventParams::Swell { rise, start, end } => {
                (1.0 + rise * gate(t, *start, *end)) * wt.sin()
            }
            EventParams::Interruption { depth, start, end } => {
                (1.0 - depth * gate(t, *start, *end)) * wt.sin()
            }
            EventParams::Flicker {
                mod_depth,
                mod_frequency,
            } => {
                let mod_phase = 2.0 * std::f64::consts::PI * mod_frequency * t;
                (1.0 + mod_depth * mod_phase.sin()) * wt.sin()
            }
            EventParams::Notching {
                notch_depth,
                start,
                end,
            } => {
                let base = wt.sin();
                let mut notches = 0.0;
                for rep in 0..=60 {
                    let shift = rep as f64 * period;
                    notches += notch_depth * gate(t, start + shift, end + shift);
                }
                base - sign(base) * notches
            }
            EventParams::Harmonics { mix } => harmonic_sum(mix, wt),
            EventParams::OscillatoryTransient { transient, start } => {
                wt.sin() + transient_term(transient, t, *start)
            }
            EventParams::SagWithHarmonics {
                depth,
                start,
                end,
                mix,
            } => (1.0 - depth * gate(t, *start, *end)) * harmonic_sum(mix, wt),
            EventParams::SwellWithHarmonics {
                rise,
                start,
                end,
                mix,
            } => (1.0 + rise * gate(t, *start, *end)) * harmonic_sum(mix, wt),
            EventParams::FlickerWithHarmonics {
                mod_depth,
                mod_frequency,
                mix,
            } => {
                let mod_phase = 2.0 * std::f64::consts::PI * mod_frequency * t;
                (1.0 + mod_depth * mod_phase.sin()) * harmonic_sum(mix, wt)
            }
            EventParams::SagWithTransient {
                depth,
                start,
                end,
                transient_start,
                transient,
            } => {
                (1.0 - depth * gate(t, *start, *end)) * wt.sin()
                    + transient_term(transient, t, *transient_start)
            }
            EventParams::SwellWithTransient {
                rise,
                start,
                end,
                transient_start,
                transient,
            } => {
                (1.0 + rise * gate(t, *start, *end)) * wt.sin()
                    + transient_term(transient, t, *transient_start)
            }
        };
        samples.push(v);
    }
    Waveform {
        samples,
        spec: spec.clone(),
        snr_db: SnrDb::CLEAN,
    }
}

// ---------------------------------------------------------------------------
// Noise injection
// ---------------------------------------------------------------------------

/// Adds zero-mean Gaussian white noise scaled so the signal-to-noise power
/// ratio equals `snr_db`. `SnrDb::CLEAN` is a no-op.
pub fn add_noise(
    w: &Waveform,
    snr_db: SnrDb,
    rng: &mut ChaCha12Rng,
) -> Result<Waveform, SynthError> {
    if w.samples.iter().any(|s| !s.is_finite()) {
        return Err(SynthError::NonFiniteSignal);
    }
    let mut out = w.clone();
    out.snr_db = snr_db;
    if snr_db.is_clean() {
        return Ok(out);
    }
    let n = w.samples.len() as f64;
    let signal_power = w.samples.iter().map(|s| s * s).sum::<f64>() / n;
    let noise_std = (signal_power / 10f64.powf(snr_db.value() / 10.0)).sqrt();
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).expect("finite noise deviation");
        for s in &mut out.samples {
            *s += normal.sample(rng);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------

/// Renders `events_per_class` instances of every class at the given SNR.
///
/// Instance `(class, index)` derives its own event stream, so the same seed
/// always reproduces identical parameters. The noise stream is keyed per
/// event but not per level: sweeping the SNR rescales one fixed
/// interference draw, so levels differ only by noise amplitude and
/// level-to-level comparisons are paired.
pub fn build_dataset(
    config: &SynthesisConfig,
    events_per_class: usize,
    snr_db: SnrDb,
) -> Result<Vec<Waveform>, SynthError> {
    config.validate()?;
    assert!(events_per_class >= 1, "need at least one event per class");
    let mut out = Vec::with_capacity(crate::CLASS_COUNT * events_per_class);
    for class_id in ClassId::all() {
        for index in 0..events_per_class {
            let mut event_rng = rng::stream(
                config.rng_seed,
                &[u64::from(class_id.number()), index as u64, purpose::EVENT],
            );
            let spec = sample_event_spec(class_id, config, &mut event_rng);
            debug_assert!(spec.validate(config).is_ok());
            let clean = render(&spec, config);
            if snr_db.is_clean() {
                out.push(clean);
            } else {
                let mut noise_rng = rng::stream(
                    config.rng_seed,
                    &[u64::from(class_id.number()), index as u64, purpose::NOISE],
                );
                out.push(add_noise(&clean, snr_db, &mut noise_rng)?);
            }
        }
    }
    Ok(out)
}
