use std::io::{Read, Write};
use std::path::Path;

use super::DetectError;

/// An 8-bit grayscale frame with capture metadata.
#[derive(Debug, Clone)]
pub struct GrayFrame {
    pub width: u32,
    pub height: u32,
    /// Row-major, `width * height` bytes.
    pub pixels: Vec<u8>,
    /// Seconds since stream start.
    pub timestamp: f64,
    pub frame_index: u64,
}

impl GrayFrame {
    pub fn new(width: u32, height: u32) -> Self {
        GrayFrame {
            width,
            height,
            pixels: vec![0; (width * height) as usize],
            timestamp: 0.0,
            frame_index: 0,
        }
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        GrayFrame {
            pixels: vec![value; (width * height) as usize],
            ..GrayFrame::new(width, height)
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y * self.width + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        self.pixels[(y * self.width + x) as usize] = v;
    }

    /// Value at a signed coordinate, clamped to the frame border.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> u8 {
        let cx = x.clamp(0, self.width as i64 - 1) as u32;
        let cy = y.clamp(0, self.height as i64 - 1) as u32;
        self.get(cx, cy)
    }

    /// Mean intensity inside a disk; used for `mean_intensity_r4`.
    pub fn mean_in_disk(&self, center: (f64, f64), radius: f64) -> f64 {
        let r = radius.ceil() as i64;
        let (cx, cy) = (center.0.round() as i64, center.1.round() as i64);
        let mut sum = 0.0;
        let mut count = 0u32;
        for dy in -r..=r {
            for dx in -r..=r {
                if (dx * dx + dy * dy) as f64 <= radius * radius {
                    sum += self.get_clamped(cx + dx, cy + dy) as f64;
                    count += 1;
                }
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    /// Writes binary PGM (P5).
    pub fn write_pgm(&self, path: &Path) -> Result<(), DetectError> {
        let mut f = std::fs::File::create(path).map_err(|e| DetectError::FrameIo(e.to_string()))?;
        let header = format!("P5\n{} {}\n255\n", self.width, self.height);
        f.write_all(header.as_bytes())
            .and_then(|_| f.write_all(&self.pixels))
            .map_err(|e| DetectError::FrameIo(e.to_string()))
    }

    /// Reads binary PGM (P5) or 8-bit grayscale PNG, chosen by extension.
    pub fn load(path: &Path) -> Result<Self, DetectError> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("pgm") => Self::read_pgm(path),
            Some("png") => Self::read_png(path),
            other => Err(DetectError::FrameIo(format!(
                "unsupported frame extension {other:?}"
            ))),
        }
    }

    pub fn read_pgm(path: &Path) -> Result<Self, DetectError> {
        let mut raw = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut raw))
            .map_err(|e| DetectError::FrameIo(e.to_string()))?;
        Self::parse_pgm(&raw)
    }

    fn parse_pgm(raw: &[u8]) -> Result<Self, DetectError> {
        // Header: magic, width, height, maxval as whitespace-separated
        // tokens, with '#' comments allowed between them.
        let mut pos = 0usize;
        let mut tokens: Vec<String> = Vec::new();
        while tokens.len() < 4 && pos < raw.len() {
            match raw[pos] {
                b'#' => {
                    while pos < raw.len() && raw[pos] != b'\n' {
                        pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => pos += 1,
                _ => {
                    let start = pos;
                    while pos < raw.len() && !raw[pos].is_ascii_whitespace() {
                        pos += 1;
                    }
                    tokens.push(String::from_utf8_lossy(&raw[start..pos]).into_owned());
                }
            }
        }
        if tokens.len() < 4 || tokens[0] != "P5" {
            return Err(DetectError::FrameIo("not a binary PGM".into()));
        }
        let width: u32 = tokens[1].parse().map_err(|_| {
            DetectError::FrameIo(format!("bad PGM width {:?}", tokens[1]))
        })?;
        let height: u32 = tokens[2].parse().map_err(|_| {
            DetectError::FrameIo(format!("bad PGM height {:?}", tokens[2]))
        })?;
        if tokens[3] != "255" {
            return Err(DetectError::FrameIo("only maxval 255 supported".into()));
        }
        pos += 1; // single whitespace after maxval
        let need = (width * height) as usize;
        if raw.len() < pos + need {
            return Err(DetectError::FrameIo("PGM pixel data truncated".into()));
        }
        Ok(GrayFrame {
            width,
            height,
            pixels: raw[pos..pos + need].to_vec(),
            timestamp: 0.0,
            frame_index: 0,
        })
    }

    pub fn write_png(&self, path: &Path) -> Result<(), DetectError> {
        let img = image::GrayImage::from_raw(self.width, self.height, self.pixels.clone())
            .ok_or_else(|| DetectError::FrameIo("pixel buffer size mismatch".into()))?;
        img.save(path).map_err(|e| DetectError::FrameIo(e.to_string()))
    }

    pub fn read_png(path: &Path) -> Result<Self, DetectError> {
        let img = image::open(path)
            .map_err(|e| DetectError::FrameIo(e.to_string()))?
            .into_luma8();
        Ok(GrayFrame {
            width: img.width(),
            height: img.height(),
            pixels: img.into_raw(),
            timestamp: 0.0,
            frame_index: 0,
        })
    }
}

/// A rectangular region in frame coordinates, half-open on the right/bottom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Roi {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Roi {
    /// Builds an ROI from a center and half-extent, clamped to the frame.
    pub fn around(center: (f64, f64), half_extent: f64, width: u32, height: u32) -> Self {
        let x0 = (center.0 - half_extent).floor().max(0.0) as u32;
        let y0 = (center.1 - half_extent).floor().max(0.0) as u32;
        let x1 = ((center.0 + half_extent).ceil() as u32 + 1).min(width);
        let y1 = ((center.1 + half_extent).ceil() as u32 + 1).min(height);
        Roi { x0, y0, x1, y1 }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Roi {
            x0: 0,
            y0: 0,
            x1: width,
            y1: height,
        }
    }

    pub fn width(&self) -> u32 {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> u32 {
        self.y1.saturating_sub(self.y0)
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        p.0 >= self.x0 as f64 && p.0 < self.x1 as f64 && p.1 >= self.y0 as f64 && p.1 < self.y1 as f64
    }
}
