use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dynamics::TimeTrace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// Periodic Hann window.
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|k| {
                    let s = (std::f64::consts::PI * k as f64 / n as f64).sin();
                    s * s
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchParams {
    pub segment_length: usize,
    pub overlap: f64,
    pub window: Window,
}

impl WelchParams {
    pub fn new(segment_length: usize) -> Self {
        Self {
            segment_length,
            overlap: 0.5,
            window: Window::Hann,
        }
    }
}

/// One-sided power spectral density on a uniform grid starting at 0 Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub psd: Vec<f64>,
    /// Grid spacing (Hz).
    pub bin_width: f64,
    /// Equivalent noise bandwidth of the window (Hz).
    pub resolution_bandwidth: f64,
    pub segments: usize,
    /// Unit of the PSD values, e.g. "m^2/Hz".
    pub units: String,
}

impl Spectrum {
    /// Builds a spectrum from values sampled on `frequencies` (uniform grid).
    pub fn from_samples(frequencies: Vec<f64>, psd: Vec<f64>, units: &str) -> Result<Self> {
        if frequencies.len() != psd.len() || frequencies.len() < 2 {
            return Err(Error::Analysis("spectrum needs ≥2 matching frequency/psd values".into()));
        }
        let bin_width = frequencies[1] - frequencies[0];
        if !(bin_width > 0.0) {
            return Err(Error::Analysis("frequency grid must be increasing".into()));
        }
        Ok(Self {
            frequencies,
            psd,
            bin_width,
            resolution_bandwidth: bin_width,
            segments: 1,
            units: units.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.psd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psd.is_empty()
    }

    /// Σ PSD·Δf over the whole grid.
    pub fn area(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.bin_width
    }

    /// Indices of the bins whose centre lies in [lo, hi].
    pub fn band_indices(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let first = ((lo - self.frequencies[0]) / self.bin_width).ceil().max(0.0) as usize;
        let last = ((hi - self.frequencies[0]) / self.bin_width).floor() as isize;
        let end = ((last + 1).max(0) as usize).min(self.len());
        first.min(end)..end
    }

    /// Σ PSD·Δf over bins in [lo, hi].
    pub fn band_area(&self, lo: f64, hi: f64) -> f64 {
        self.psd[self.band_indices(lo, hi)].iter().sum::<f64>() * self.bin_width
    }

    pub fn max_frequency(&self) -> f64 {
        *self.frequencies.last().unwrap_or(&0.0)
    }

    /// Index of the largest value in [lo, hi].
    pub fn peak_index(&self, lo: f64, hi: f64) -> Option<usize> {
        let range = self.band_indices(lo, hi);
        let start = range.start;
        self.psd[range]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i + start)
    }

    /// Same spectrum multiplied by `factor` (e.g. a squared calibration).
    pub fn scaled(&self, factor: f64, units: &str) -> Self {
        let mut s = self.clone();
        s.psd.iter_mut().for_each(|v| *v *= factor);
        s.units = units.to_string();
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut body = || -> std::io::Result<()> {
            writeln!(w, "frequency_hz,psd")?;
            for (f, p) in self.frequencies.iter().zip(&self.psd) {
                writeln!(w, "{f:.8e},{p:.8e}")?;
            }
            w.flush()
        };
        body().map_err(|e| Error::io(path, e))
    }
}

/// Welch estimate of the one-sided PSD of `samples` taken at interval `dt`.
/// Each segment has its mean removed before windowing; the scaling makes
/// Σ PSD·Δf equal the mean windowed power, i.e. the variance for stationary
/// input.
pub fn welch_psd_samples(samples: &[f64], dt: f64, params: &WelchParams) -> Result<Spectrum> {
    let n = params.segment_length;
    if n < 2 {
        return Err(Error::Analysis(format!("segment length must be ≥2, got {n}")));
    }
    if !(0.0..1.0).contains(&params.overlap) {
        return Err(Error::Analysis(format!("overlap must lie in [0, 1), got {}", params.overlap)));
    }
    if samples.len() < n {
        return Err(Error::TraceTooShort {
            required: n,
            got: samples.len(),
        });
    }
    let fs = 1.0 / dt;
    let step = (n - (n as f64 * params.overlap).floor() as usize).max(1);
    let segments = 1 + (samples.len() - n) / step;
    let window = params.window.coefficients(n);
    let sum_w2: f64 = window.iter().map(|w| w * w).sum();
    let sum_w: f64 = window.iter().sum();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let n_out = n / 2 + 1;
    let mut acc = vec![0.0; n_out];
    for s in 0..segments {
        let seg = &samples[s * step..s * step + n];
        let mean = seg.iter().sum::<f64>() / n as f64;
        for ((b, x), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let norm = 1.0 / (fs * sum_w2 * segments as f64);
    let psd: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let one_sided = if k == 0 || (n % 2 == 0 && k == n / 2) { 1.0 } else { 2.0 };
            one_sided * v * norm
        })
        .collect();
    let bin_width = fs / n as f64;
    Ok(Spectrum {
        frequencies: (0..n_out).map(|k| k as f64 * bin_width).collect(),
        psd,
        bin_width,
        resolution_bandwidth: bin_width * n as f64 * sum_w2 / (sum_w * sum_w),
        segments,
        units: "1/Hz".into(),
    })
}

/// Welch estimate of one channel of a trace.
pub fn welch_psd(trace: &TimeTrace, channel: &str, params: &WelchParams) -> Result<Spectrum> {
    let samples = trace
        .channel(channel)
        .ok_or_else(|| Error::Analysis(format!("trace has no channel `{channel}`")))?;
    welch_psd_samples(samples, trace.dt(), params)
}
