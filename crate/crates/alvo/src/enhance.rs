//! Low-light enhancement stage behind a pluggable port.
//!
//! The built-in enhancer is a percentile contrast stretch followed by gamma
//! correction; heavier enhancers (a neural network, an external tool chain)
//! plug in through [`ExternalEnhancer`], which pipes PGM frames through a
//! child process. Enhancers are selected by name at runtime via
//! [`EnhancerChoice`].
//!
//! Enhancement only ever runs on the low-rate analysis stream; the
//! odometry stream consumes raw frames.

use std::io::Write;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::Deserialize;
use thiserror::Error;

use crate::frame::{parse_pgm, Frame};

#[derive(Debug, Error)]
pub enum EnhanceError {
    #[error("external enhancer timed out after {0:?}")]
    Timeout(Duration),
    #[error("external enhancer exited with status {0}")]
    NonZeroExit(i32),
    #[error("external enhancer produced a malformed frame: {0}")]
    MalformedOutput(String),
    #[error("external enhancer returned {got_w}x{got_h}, expected {want_w}x{want_h}")]
    SizeMismatch {
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("failed to run external enhancer: {0}")]
    Spawn(std::io::Error),
    #[error("external enhancer command is empty")]
    EmptyCommand,
}

/// The enhancement port: anything that maps a frame to a same-size 8-bit
/// frame. Depth passes through untouched.
pub trait Enhancer: Send {
    fn name(&self) -> &str;
    fn enhance(&self, frame: &Frame) -> Result<Frame, EnhanceError>;
}

/// Percentile stretch + gamma, the stand-in for a learned enhancer.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct ClassicalConfig {
    /// Gamma exponent applied after the stretch; < 1 brightens shadows.
    pub gamma: f64,
    /// Histogram percentiles (low, high) defining the stretch range.
    pub clip_percentiles: (f64, f64),
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        ClassicalConfig {
            gamma: 0.4,
            clip_percentiles: (1.0, 99.0),
        }
    }
}

impl ClassicalConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.gamma <= 0.0 {
            return Err("gamma must be > 0".into());
        }
        let (lo, hi) = self.clip_percentiles;
        if !(0.0..=100.0).contains(&lo) || !(0.0..=100.0).contains(&hi) || lo >= hi {
            return Err("clip percentiles must satisfy 0 <= low < high <= 100".into());
        }
        Ok(())
    }
}

pub struct ClassicalEnhancer {
    cfg: ClassicalConfig,
}

impl ClassicalEnhancer {
    pub fn new(cfg: ClassicalConfig) -> Self {
        ClassicalEnhancer { cfg }
    }
}

/// Nearest-rank percentile of an 8-bit histogram.
fn percentile(hist: &[u64; 256], total: u64, pct: f64) -> u8 {
    let rank = ((pct / 100.0) * total as f64).ceil().max(1.0) as u64;
    let mut cum = 0u64;
    for (value, &count) in hist.iter().enumerate() {
        cum += count;
        if cum >= rank {
            return value as u8;
        }
    }
    255
}

/// The stretch-then-gamma map. Monotone non-decreasing in the input value;
/// a constant image (degenerate stretch) is gamma-mapped directly.
pub fn classical_enhance(frame: &Frame, cfg: &ClassicalConfig) -> Frame {
    let mut hist = [0u64; 256];
    for &v in &frame.intensity {
        hist[v as usize] += 1;
    }
    let total = frame.intensity.len() as u64;
    let lo = percentile(&hist, total, cfg.clip_percentiles.0) as f64;
    let hi = percentile(&hist, total, cfg.clip_percentiles.1) as f64;

    // Precompute the 256-entry transfer curve.
    let mut lut = [0u8; 256];
    for (v, out) in lut.iter_mut().enumerate() {
        let x = if hi > lo {
            ((v as f64 - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            v as f64 / 255.0
        };
        *out = (255.0 * x.powf(cfg.gamma)).round().clamp(0.0, 255.0) as u8;
    }

    let mut out = frame.clone();
    for v in &mut out.intensity {
        *v = lut[*v as usize];
    }
    out.enhanced = true;
    out
}

impl Enhancer for ClassicalEnhancer {
    fn name(&self) -> &str {
        "classical"
    }

    fn enhance(&self, frame: &Frame) -> Result<Frame, EnhanceError> {
        Ok(classical_enhance(frame, &self.cfg))
    }
}

/// External-process enhancer: PGM (P5, maxval 255) on stdin, a same-size
/// PGM on stdout, exit code 0. Anything else, or exceeding the timeout,
/// is an enhancement failure.
pub struct ExternalEnhancer {
    command: Vec<String>,
    timeout: Duration,
}

impl ExternalEnhancer {
    pub fn new(command: Vec<String>, timeout: Duration) -> Result<Self, EnhanceError> {
        if command.is_empty() {
            return Err(EnhanceError::EmptyCommand);
        }
        Ok(ExternalEnhancer { command, timeout })
    }
}

impl Enhancer for ExternalEnhancer {
    fn name(&self) -> &str {
        "external"
    }

    fn enhance(&self, frame: &Frame) -> Result<Frame, EnhanceError> {
        let mut pgm = Vec::new();
        frame
            .write_pgm(&mut pgm)
            .map_err(|e| EnhanceError::MalformedOutput(e.to_string()))?;

        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(EnhanceError::Spawn)?;

        // Feed stdin and drain stdout on helper threads so neither pipe
        // blocks the deadline loop.
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = std::thread::spawn(move || {
            let _ = stdin.write_all(&pgm);
        });
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = std::thread::spawn(move || {
            use std::io::Read;
            let mut buf = Vec::new();
            let _ = stdout.read_to_end(&mut buf);
            buf
        });

        let deadline = Instant::now() + self.timeout;
        let status = loop {
            match child.try_wait().map_err(EnhanceError::Spawn)? {
                Some(status) => break status,
                None => {
                    if Instant::now() >= deadline {
                        let _ = child.kill();
                        let _ = child.wait();
                        let _ = writer.join();
                        let _ = reader.join();
                        return Err(EnhanceError::Timeout(self.timeout));
                    }
                    std::thread::sleep(Duration::from_millis(2));
                }
            }
        };
        let _ = writer.join();
        let output = reader.join().unwrap_or_default();

        if !status.success() {
            return Err(EnhanceError::NonZeroExit(status.code().unwrap_or(-1)));
        }
        let (w, h, pixels) =
            parse_pgm(&output).map_err(|e| EnhanceError::MalformedOutput(e.to_string()))?;
        if w != frame.width || h != frame.height {
            return Err(EnhanceError::SizeMismatch {
                got_w: w,
                got_h: h,
                want_w: frame.width,
                want_h: frame.height,
            });
        }
        let mut out = frame.clone();
        out.intensity = pixels;
        out.enhanced = true;
        Ok(out)
    }
}

/// Runtime enhancer selection, as written in config files.
#[derive(Debug, Clone, PartialEq)]
pub enum EnhancerChoice {
    Classical(ClassicalConfig),
    External {
        command: Vec<String>,
        timeout: Duration,
        /// Fall back to the classical enhancer when the process fails.
        fallback: bool,
    },
}

impl Default for EnhancerChoice {
    fn default() -> Self {
        EnhancerChoice::Classical(ClassicalConfig::default())
    }
}

/// Build an enhancer from its configured name.
pub fn create(choice: &EnhancerChoice) -> Result<Box<dyn Enhancer>, EnhanceError> {
    match choice {
        EnhancerChoice::Classical(cfg) => Ok(Box::new(ClassicalEnhancer::new(*cfg))),
        EnhancerChoice::External {
            command, timeout, ..
        } => Ok(Box::new(ExternalEnhancer::new(command.clone(), *timeout)?)),
    }
}
