use super::{Glint, GrayFrame, Roi};

#[derive(Debug, Clone)]
pub struct BlobConfig {
    pub octaves: u32,
    /// DoG levels per octave.
    pub intervals: u32,
    /// Base scale, px.
    pub sigma0: f64,
    /// Minimum DoG contrast (intensity levels) for a candidate.
    pub contrast_threshold: f64,
    /// Hard cap on emitted candidates.
    pub max_candidates: usize,
    /// Minimum spatial separation between candidates, px.
    pub nms_radius: f64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        BlobConfig {
            octaves: 3,
            intervals: 3,
            sigma0: 1.2,
            contrast_threshold: 8.0,
            max_candidates: 40,
            nms_radius: 3.0,
        }
    }
}

/// Bright-blob detection by difference-of-Gaussians extrema.
///
/// Each octave blurs a progressively downsampled copy of the (ROI of the)
/// frame at scales `sigma0 * 2^(i/intervals)` and takes neighboring
/// differences; local maxima above the contrast threshold become candidates.
/// Candidates are non-max suppressed across octaves and returned in
/// descending response order, at most `max_candidates` of them, with
/// integer-pixel centers. Sub-pixel refinement is a separate pass
/// ([`super::refine_centers`]).
pub fn detect_blobs(frame: &GrayFrame, roi: Option<Roi>, cfg: &BlobConfig) -> Vec<Glint> {
    let roi = roi.unwrap_or_else(|| Roi::full(frame.width, frame.height));
    if roi.width() < 8 || roi.height() < 8 {
        return Vec::new();
    }

    // ROI crop to f32.
    let mut base = Buf2::new(roi.width() as usize, roi.height() as usize);
    for y in 0..base.h {
        for x in 0..base.w {
            base.data[y * base.w + x] =
                frame.get(roi.x0 + x as u32, roi.y0 + y as u32) as f32;
        }
    }

    struct Candidate {
        x: f64,
        y: f64,
        response: f32,
        sigma: f64,
    }
    let mut candidates: Vec<Candidate> = Vec::new();
    let k = 2f64.powf(1.0 / cfg.intervals as f64);

    let mut octave_img = base;
    for octave in 0..cfg.octaves {
        if octave > 0 {
            if octave_img.w < 16 || octave_img.h < 16 {
                break;
            }
            octave_img = octave_img.downsample2();
        }
        let scale = (1u32 << octave) as f64;

        let mut prev = octave_img.gaussian(cfg.sigma0);
        for i in 0..cfg.intervals {
            let sigma_next = cfg.sigma0 * k.powi(i as i32 + 1);
            let next = octave_img.gaussian(sigma_next);
            // dog = blur(small) - blur(large): positive on bright blobs.
            let w = prev.w;
            let h = prev.h;
            let dog: Vec<f32> = prev
                .data
                .iter()
                .zip(&next.data)
                .map(|(a, b)| a - b)
                .collect();

            let sigma_here = cfg.sigma0 * k.powi(i as i32) * scale;
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    let v = dog[y * w + x];
                    if v < cfg.contrast_threshold as f32 {
                        continue;
                    }
                    let is_max = [
                        (-1i64, -1i64),
                        (0, -1),
                        (1, -1),
                        (-1, 0),
                        (1, 0),
                        (-1, 1),
                        (0, 1),
                        (1, 1),
                    ]
                    .iter()
                    .all(|&(dx, dy)| {
                        v >= dog[(y as i64 + dy) as usize * w + (x as i64 + dx) as usize]
                    });
                    if is_max {
                        candidates.push(Candidate {
                            // Pixel-center alignment under 2x box downsampling.
                            x: roi.x0 as f64 + (x as f64 + 0.5) * scale - 0.5,
                            y: roi.y0 as f64 + (y as f64 + 0.5) * scale - 0.5,
                            response: v,
                            sigma: sigma_here,
                        });
                    }
                }
            }
            prev = next;
        }
    }

    // Greedy NMS, strongest first. Plateau duplicates and cross-octave
    // re-detections collapse onto the strongest response.
    candidates.sort_by(|a, b| b.response.partial_cmp(&a.response).unwrap());
    let mut kept: Vec<Candidate> = Vec::new();
    for c in candidates {
        let radius = cfg.nms_radius.max(2.0 * c.sigma);
        let clear = kept.iter().all(|k| {
            let d2 = (k.x - c.x).powi(2) + (k.y - c.y).powi(2);
            d2 >= radius * radius
        });
        if clear {
            kept.push(c);
            if kept.len() == cfg.max_candidates {
                break;
            }
        }
    }

    kept.into_iter()
        .map(|c| {
            let center = (c.x.round(), c.y.round());
            Glint {
                center,
                peak_intensity: frame.get_clamped(center.0 as i64, center.1 as i64) as f64,
                mean_intensity_r4: frame.mean_in_disk(center, 4.0),
                scale: c.sigma,
                refined: false,
                response: c.response as f64,
            }
        })
        .collect()
}

/// Minimal f32 image used by the scale-space machinery here and by the
/// optical-flow pyramids in [`crate::track`].
#[derive(Debug, Clone)]
pub(crate) struct Buf2 {
    pub w: usize,
    pub h: usize,
    pub data: Vec<f32>,
}

impl Buf2 {
    pub fn new(w: usize, h: usize) -> Self {
        Buf2 {
            w,
            h,
            data: vec![0.0; w * h],
        }
    }

    pub fn from_frame(frame: &GrayFrame) -> Self {
        Buf2 {
            w: frame.width as usize,
            h: frame.height as usize,
            data: frame.pixels.iter().map(|&p| p as f32).collect(),
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.w + x]
    }

    #[inline]
    fn get_clamped(&self, x: i64, y: i64) -> f32 {
        let cx = x.clamp(0, self.w as i64 - 1) as usize;
        let cy = y.clamp(0, self.h as i64 - 1) as usize;
        self.data[cy * self.w + cx]
    }

    /// Bilinear sample with border clamping.
    pub fn sample(&self, x: f64, y: f64) -> f32 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = (x - x0) as f32;
        let fy = (y - y0) as f32;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let v00 = self.get_clamped(x0, y0);
        let v10 = self.get_clamped(x0 + 1, y0);
        let v01 = self.get_clamped(x0, y0 + 1);
        let v11 = self.get_clamped(x0 + 1, y0 + 1);
        v00 * (1.0 - fx) * (1.0 - fy)
            + v10 * fx * (1.0 - fy)
            + v01 * (1.0 - fx) * fy
            + v11 * fx * fy
    }

    /// 2x2 box downsample.
    pub fn downsample2(&self) -> Buf2 {
        let w = self.w / 2;
        let h = self.h / 2;
        let mut out = Buf2::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let s = self.get(2 * x, 2 * y)
                    + self.get(2 * x + 1, 2 * y)
                    + self.get(2 * x, 2 * y + 1)
                    + self.get(2 * x + 1, 2 * y + 1);
                out.data[y * w + x] = s * 0.25;
            }
        }
        out
    }

    /// Separable Gaussian blur, kernel truncated at 3 sigma, clamped borders.
    pub fn gaussian(&self, sigma: f64) -> Buf2 {
        let radius = (3.0 * sigma).ceil().max(1.0) as i64;
        let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
        let denom = 2.0 * sigma * sigma;
        for i in -radius..=radius {
            kernel.push((-(i * i) as f64 / denom).exp() as f32);
        }
        let sum: f32 = kernel.iter().sum();
        for k in &mut kernel {
            *k /= sum;
        }

        let mut tmp = Buf2::new(self.w, self.h);
        for y in 0..self.h {
            for x in 0..self.w {
                let mut acc = 0.0;
                for (ki, kv) in kernel.iter().enumerate() {
                    let sx = x as i64 + ki as i64 - radius;
                    acc += kv * self.get_clamped(sx, y as i64);
                }
                tmp.data[y * self.w + x] = acc;
            }
        }
        let mut out = Buf2::new(self.w, self.h);
        for y in 0..self.h {
            for x in 0..self.w {
                let mut acc = 0.0;
                for (ki, kv) in kernel.iter().enumerate() {
                    let sy = y as i64 + ki as i64 - radius;
                    acc += kv * tmp.get_clamped(x as i64, sy);
                }
                out.data[y * self.w + x] = acc;
            }
        }
        out
    }
}
