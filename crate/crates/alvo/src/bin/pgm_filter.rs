//! Tiny PGM filter speaking the external-enhancer protocol: P5 on stdin,
//! P5 on stdout, exit 0. Doubles as a demo enhancer and as the reference
//! process for the protocol tests.
//!
//! Usage: pgm-filter <identity|invert|gamma G|crop W H>

use std::io::{Read, Write};
use std::process::ExitCode;

use alvo::frame::{parse_pgm, write_pgm};

fn run() -> Result<(), String> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut input = Vec::new();
    std::io::stdin()
        .read_to_end(&mut input)
        .map_err(|e| e.to_string())?;
    let (w, h, mut data) = parse_pgm(&input).map_err(|e| e.to_string())?;

    let (out_w, out_h) = match args.first().map(String::as_str) {
        Some("identity") => (w, h),
        Some("invert") => {
            for v in &mut data {
                *v = 255 - *v;
            }
            (w, h)
        }
        Some("gamma") => {
            let g: f64 = args
                .get(1)
                .ok_or("gamma needs an exponent")?
                .parse()
                .map_err(|_| "bad gamma exponent".to_string())?;
            for v in &mut data {
                *v = (255.0 * (*v as f64 / 255.0).powf(g))
                    .round()
                    .clamp(0.0, 255.0) as u8;
            }
            (w, h)
        }
        Some("crop") => {
            let cw: u32 = args
                .get(1)
                .ok_or("crop needs W H")?
                .parse()
                .map_err(|_| "bad W")?;
            let ch: u32 = args
                .get(2)
                .ok_or("crop needs W H")?
                .parse()
                .map_err(|_| "bad H")?;
            if cw > w || ch > h {
                return Err("crop larger than input".into());
            }
            let mut cropped = Vec::with_capacity((cw * ch) as usize);
            for y in 0..ch {
                let start = (y * w) as usize;
                cropped.extend_from_slice(&data[start..start + cw as usize]);
            }
            data = cropped;
            (cw, ch)
        }
        _ => return Err("usage: pgm-filter <identity|invert|gamma G|crop W H>".into()),
    };

    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    write_pgm(&mut lock, out_w, out_h, &data).map_err(|e| e.to_string())?;
    lock.flush().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("pgm-filter: {msg}");
            ExitCode::FAILURE
        }
    }
}
