use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LEVICAV1";

/// Uniformly sampled multichannel record. Samples are stored column-major:
/// channel `c` occupies `data[c * n_samples .. (c + 1) * n_samples]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    dt: f64,
    labels: Vec<String>,
    n_samples: usize,
    data: Vec<f64>,
    seed: u64,
}

impl TimeTrace {
    pub fn new(dt: f64, labels: Vec<String>, columns: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain("dt", format!("must be positive, got {dt}")));
        }
        if labels.len() != columns.len() || labels.is_empty() {
            return Err(Error::Format(format!(
                "{} labels for {} channels",
                labels.len(),
                columns.len()
            )));
        }
        let n_samples = columns[0].len();
        if n_samples < 2 {
            return Err(Error::TraceTooShort {
                required: 2,
                got: n_samples,
            });
        }
        if columns.iter().any(|c| c.len() != n_samples) {
            return Err(Error::Format("channels have different lengths".into()));
        }
        Ok(Self {
            dt,
            labels,
            n_samples,
            data: columns.concat(),
            seed,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_channels(&self) -> usize {
        self.labels.len()
    }

    pub fn duration(&self) -> f64 {
        self.n_samples as f64 * self.dt
    }

    pub fn column(&self, index: usize) -> &[f64] {
        &self.data[index * self.n_samples..(index + 1) * self.n_samples]
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn channel(&self, label: &str) -> Option<&[f64]> {
        self.channel_index(label).map(|i| self.column(i))
    }

    /// Returns a trace with only the named channels.
    pub fn select(&self, labels: &[&str]) -> Result<Self> {
        let mut cols = Vec::with_capacity(labels.len());
        for l in labels {
            let col = self
                .channel(l)
                .ok_or_else(|| Error::Format(format!("trace has no channel `{l}`")))?;
            cols.push(col.to_vec());
        }
        Self::new(self.dt, labels.iter().map(|s| s.to_string()).collect(), cols, self.seed)
    }

    /// Single-channel trace with a new label and samples scaled by `factor`.
    pub fn scaled_channel(&self, label: &str, factor: f64, new_label: &str) -> Result<Self> {
        let col = self
            .channel(label)
            .ok_or_else(|| Error::Format(format!("trace has no channel `{label}`")))?;
        Self::new(
            self.dt,
            vec![new_label.to_string()],
            vec![col.iter().map(|v| v * factor).collect()],
            self.seed,
        )
    }

    /// Binary layout (little endian): magic "LEVICAV1", u32 channel count,
    /// u64 sample count, f64 dt, u64 seed, then per label a u32 byte length and
    /// UTF-8 bytes, then the column-major f64 samples.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.encode(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    fn encode(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.labels.len() as u32).to_le_bytes())?;
        w.write_all(&(self.n_samples as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for l in &self.labels {
            w.write_all(&(l.len() as u32).to_le_bytes())?;
            w.write_all(l.as_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic, path)?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("{} is not a LEVICAV1 trace", path.display())));
        }
        let n_channels = u32::from_le_bytes(read_array(&mut r, path)?) as usize;
        let n_samples = u64::from_le_bytes(read_array(&mut r, path)?) as usize;
        let dt = f64::from_le_bytes(read_array(&mut r, path)?);
        let seed = u64::from_le_bytes(read_array(&mut r, path)?);
        if n_channels == 0 || n_channels > 4096 {
            return Err(Error::Format(format!("implausible channel count {n_channels}")));
        }
        let mut labels = Vec::with_capacity(n_channels);
        for _ in 0..n_channels {
            let len = u32::from_le_bytes(read_array(&mut r, path)?) as usize;
            if len > 1024 {
                return Err(Error::Format(format!("implausible label length {len}")));
            }
            let mut buf = vec![0u8; len];
            read_exact(&mut r, &mut buf, path)?;
            labels.push(String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))?);
        }
        let mut columns = Vec::with_capacity(n_channels);
        for _ in 0..n_channels {
            let mut col = Vec::with_capacity(n_samples);
            for _ in 0..n_samples {
                col.push(f64::from_le_bytes(read_array(&mut r, path)?));
            }
            columns.push(col);
        }
        Self::new(dt, labels, columns, seed)
    }

    /// CSV with a `time_s` column followed by one column per channel,
    /// 9 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            write!(w, "time_s")?;
            for l in &self.labels {
                write!(w, ",{l}")?;
            }
            writeln!(w)?;
            for i in 0..self.n_samples {
                write!(w, "{:.8e}", i as f64 * self.dt)?;
                for c in 0..self.n_channels() {
                    write!(w, ",{:.8e}", self.data[c * self.n_samples + i])?;
                }
                writeln!(w)?;
            }
            w.flush()
        };
        write(&mut w).map_err(|e| Error::io(path, e))
    }
}

impl TimeTrace {
    /// Reads the CSV layout written by [`TimeTrace::write_csv`]. The sample
    /// interval is taken from the first two rows of `time_s`; the seed is 0.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |msg: String| Error::Format(format!("{}: {msg}", path.display()));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty file".into()))?.split(',').map(str::trim).collect();
        if header.first() != Some(&"time_s") || header.len() < 2 {
            return Err(bad("header must start with time_s followed by channel names".into()));
        }
        let mut times = Vec::new();
        let mut columns = vec![Vec::new(); header.len() - 1];
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != header.len() {
                return Err(bad(format!("row {} has {} fields, expected {}", row + 2, fields.len(), header.len())));
            }
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("row {}: {e}", row + 2)));
            times.push(parse(fields[0])?);
            for (c, f) in fields[1..].iter().enumerate() {
                columns[c].push(parse(f)?);
            }
        }
        if times.len() < 2 {
            return Err(bad("need at least two samples".into()));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(bad("time_s must increase".into()));
        }
        Self::new(dt, header[1..].iter().map(|s| s.to_string()).collect(), columns, 0)
    }

    /// Reads a trace, choosing the format by extension (`.csv` or binary).
    pub fn read(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Self::read_csv(path),
            _ => Self::read_binary(path),
        }
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format(format!("{} is truncated", path.display()))
        } else {
            Error::io(path, e)
        }
    })
}

fn read_array<const N: usize>(r: &mut impl Read, path: &Path) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(r, &mut buf, path)?;
    Ok(buf)
}
