//! Timestamped grayscale frames and their on-disk formats.
//!
//! Intensity rasters are exchanged as binary PGM (P5, maxval 255). Depth
//! rasters are raw little-endian f32, row-major, one value per pixel with
//! NaN marking pixels where no surface was hit; dimensions come from the
//! paired PGM.

use std::io::{self, BufRead, Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("raster size {got} does not match {width}x{height}")]
    SizeMismatch { got: usize, width: u32, height: u32 },
    #[error("malformed PGM: {0}")]
    MalformedPgm(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One camera frame: 8-bit grayscale, optional simulator depth channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u64,
    /// Seconds since episode start; strictly increasing within a stream.
    pub timestamp: f64,
    pub width: u32,
    pub height: u32,
    pub intensity: Vec<u8>,
    /// Camera-frame z depth in meters per pixel; NaN where no hit.
    pub depth: Option<Vec<f32>>,
    /// Set by enhancers; lets the pipeline assert that enhanced frames
    /// never reach the odometry stream.
    pub enhanced: bool,
}

impl Frame {
    pub fn new(
        index: u64,
        timestamp: f64,
        width: u32,
        height: u32,
        intensity: Vec<u8>,
        depth: Option<Vec<f32>>,
    ) -> Result<Self, FrameError> {
        let expected = width as usize * height as usize;
        if intensity.len() != expected {
            return Err(FrameError::SizeMismatch {
                got: intensity.len(),
                width,
                height,
            });
        }
        if let Some(d) = &depth {
            if d.len() != expected {
                return Err(FrameError::SizeMismatch {
                    got: d.len(),
                    width,
                    height,
                });
            }
        }
        Ok(Frame {
            index,
            timestamp,
            width,
            height,
            intensity,
            depth,
            enhanced: false,
        })
    }

    pub fn pixel(&self, x: u32, y: u32) -> u8 {
        self.intensity[(y * self.width + x) as usize]
    }

    /// Depth at a pixel; None for misses or when the channel is absent.
    pub fn depth_at(&self, x: u32, y: u32) -> Option<f64> {
        let d = self.depth.as_ref()?[(y * self.width + x) as usize];
        if d.is_finite() {
            Some(d as f64)
        } else {
            None
        }
    }

    pub fn write_pgm<W: Write>(&self, w: &mut W) -> Result<(), FrameError> {
        write_pgm(w, self.width, self.height, &self.intensity)
    }

    pub fn save_pgm<P: AsRef<Path>>(&self, path: P) -> Result<(), FrameError> {
        let mut f = std::fs::File::create(path)?;
        self.write_pgm(&mut f)
    }

    pub fn save_depth<P: AsRef<Path>>(&self, path: P) -> Result<(), FrameError> {
        let Some(depth) = &self.depth else {
            return Ok(());
        };
        let mut buf = Vec::with_capacity(depth.len() * 4);
        for d in depth {
            buf.extend_from_slice(&d.to_le_bytes());
        }
        std::fs::write(path, buf)?;
        Ok(())
    }
}

/// Write a P5 PGM with maxval 255.
pub fn write_pgm<W: Write>(
    w: &mut W,
    width: u32,
    height: u32,
    data: &[u8],
) -> Result<(), FrameError> {
    let expected = width as usize * height as usize;
    if data.len() != expected {
        return Err(FrameError::SizeMismatch {
            got: data.len(),
            width,
            height,
        });
    }
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(data)?;
    Ok(())
}

/// Parse a P5 PGM (maxval up to 255, `#` comments allowed in the header).
pub fn read_pgm<R: Read>(r: &mut R) -> Result<(u32, u32, Vec<u8>), FrameError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    parse_pgm(&bytes)
}

pub fn parse_pgm(bytes: &[u8]) -> Result<(u32, u32, Vec<u8>), FrameError> {
    let mut pos = 0usize;

    let next_token = |pos: &mut usize| -> Result<String, FrameError> {
        // Skip whitespace and comment lines.
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            } else {
                break;
            }
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(FrameError::MalformedPgm("unexpected end of header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };

    let magic = next_token(&mut pos)?;
    if magic != "P5" {
        return Err(FrameError::MalformedPgm(format!(
            "expected P5, got {magic}"
        )));
    }
    let width: u32 = next_token(&mut pos)?
        .parse()
        .map_err(|_| FrameError::MalformedPgm("bad width".into()))?;
    let height: u32 = next_token(&mut pos)?
        .parse()
        .map_err(|_| FrameError::MalformedPgm("bad height".into()))?;
    let maxval: u32 = next_token(&mut pos)?
        .parse()
        .map_err(|_| FrameError::MalformedPgm("bad maxval".into()))?;
    if maxval == 0 || maxval > 255 {
        return Err(FrameError::MalformedPgm(format!(
            "unsupported maxval {maxval}"
        )));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let expected = width as usize * height as usize;
    if bytes.len() < pos + expected {
        return Err(FrameError::MalformedPgm(format!(
            "raster truncated: have {}, need {expected}",
            bytes.len().saturating_sub(pos)
        )));
    }
    Ok((width, height, bytes[pos..pos + expected].to_vec()))
}

pub fn load_pgm<P: AsRef<Path>>(path: P) -> Result<(u32, u32, Vec<u8>), FrameError> {
    let f = std::fs::File::open(path)?;
    let mut r = io::BufReader::new(f);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    parse_pgm(&bytes)
}

/// Read a raw little-endian f32 depth raster written by [`Frame::save_depth`].
pub fn load_depth<P: AsRef<Path>>(
    path: P,
    width: u32,
    height: u32,
) -> Result<Vec<f32>, FrameError> {
    let bytes = std::fs::read(path)?;
    let expected = width as usize * height as usize;
    if bytes.len() != expected * 4 {
        return Err(FrameError::SizeMismatch {
            got: bytes.len() / 4,
            width,
            height,
        });
    }
    let mut out = Vec::with_capacity(expected);
    for chunk in bytes.chunks_exact(4) {
        out.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
    }
    Ok(out)
}

/// Read lines of a text file, used by trajectory parsers.
pub fn read_lines<P: AsRef<Path>>(path: P) -> Result<Vec<String>, io::Error> {
    let f = std::fs::File::open(path)?;
    io::BufReader::new(f).lines().collect()
}
