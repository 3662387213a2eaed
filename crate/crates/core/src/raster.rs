//! Binary vessel masks, exact Euclidean distance transforms, binary-kernel
//! convolution and the normalized distance-transform heatmap.
//!
//! Everything outside the raster counts as background, both for the distance
//! transform and for convolution (zero padding).

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Pixel;

/// Binary occupancy raster; 1 = vessel lumen, 0 = background.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridMask {
    width: usize,
    height: usize,
    cells: Vec<u8>,
}

impl GridMask {
    /// All-background mask.
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            cells: vec![0; width * height],
        }
    }

    /// Builds a mask from row-major samples; any nonzero sample is vessel.
    pub fn from_samples(width: usize, height: usize, samples: &[u8]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::parse(None, "mask dimensions must be positive"));
        }
        if samples.len() != width * height {
            return Err(Error::parse(
                None,
                format!(
                    "expected {} samples for {width}x{height}, got {}",
                    width * height,
                    samples.len()
                ),
            ));
        }
        Ok(Self {
            width,
            height,
            cells: samples.iter().map(|&v| u8::from(v != 0)).collect(),
        })
    }

    /// Parses rows of `#`/`1` (vessel) and `.`/`0` (background).
    pub fn from_ascii(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut samples = Vec::with_capacity(width * height);
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::parse(None, format!("row {y} has ragged width")));
            }
            for c in row.chars() {
                samples.push(match c {
                    '#' | '1' => 1,
                    '.' | '0' => 0,
                    other => {
                        return Err(Error::parse(
                            None,
                            format!("unexpected character {other:?}"),
                        ))
                    }
                });
            }
        }
        Self::from_samples(width, height, &samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn in_bounds(&self, p: Pixel) -> bool {
        p.x >= 0 && p.y >= 0 && (p.x as usize) < self.width && (p.y as usize) < self.height
    }

    pub fn index(&self, p: Pixel) -> usize {
        p.y as usize * self.width + p.x as usize
    }

    pub fn pixel_at(&self, idx: usize) -> Pixel {
        Pixel::new((idx % self.width) as i32, (idx / self.width) as i32)
    }

    /// True when `p` is inside the raster and a vessel pixel.
    pub fn is_vessel(&self, p: Pixel) -> bool {
        self.in_bounds(p) && self.cells[self.index(p)] == 1
    }

    pub fn set(&mut self, p: Pixel, vessel: bool) {
        if self.in_bounds(p) {
            let i = self.index(p);
            self.cells[i] = u8::from(vessel);
        }
    }

    pub fn vessel_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 1).count()
    }

    /// Fills every pixel whose center lies within `radius` of `(cx, cy)`.
    pub fn fill_disk(&mut self, cx: f64, cy: f64, radius: f64) {
        let x0 = (cx - radius).floor().max(0.0) as i64;
        let x1 = (cx + radius).ceil().min(self.width as f64 - 1.0) as i64;
        let y0 = (cy - radius).floor().max(0.0) as i64;
        let y1 = (cy + radius).ceil().min(self.height as f64 - 1.0) as i64;
        let r2 = radius * radius;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                if dx * dx + dy * dy <= r2 {
                    self.cells[y as usize * self.width + x as usize] = 1;
                }
            }
        }
    }

    /// Labels of 8-connected vessel components; background gets `u32::MAX`.
    pub fn components(&self) -> (Vec<u32>, usize) {
        let mut labels = vec![u32::MAX; self.cells.len()];
        let mut next = 0u32;
        let mut stack = Vec::new();
        for start in 0..self.cells.len() {
            if self.cells[start] == 0 || labels[start] != u32::MAX {
                continue;
            }
            labels[start] = next;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let p = self.pixel_at(i);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let q = Pixel::new(p.x + dx, p.y + dy);
                        if self.is_vessel(q) {
                            let j = self.index(q);
                            if labels[j] == u32::MAX {
                                labels[j] = next;
                                stack.push(j);
                            }
                        }
                    }
                }
            }
            next += 1;
        }
        (labels, next as usize)
    }

    /// Loads a PNG or PGM image; any nonzero sample is a vessel pixel.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path.as_ref())?.into_luma8();
        let (w, h) = img.dimensions();
        Self::from_samples(w as usize, h as usize, img.as_raw())
    }

    /// Saves as 8-bit grayscale (vessel = 255). `.pgm` writes binary P5,
    /// anything else goes through the PNG encoder.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let samples: Vec<u8> = self.cells.iter().map(|&c| c * 255).collect();
        let is_pgm = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
        if is_pgm {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            write!(f, "P5\n{} {}\n255\n", self.width, self.height)?;
            f.write_all(&samples)?;
            f.flush()?;
        } else {
            image::save_buffer_with_format(
                path,
                &samples,
                self.width as u32,
                self.height as u32,
                image::ExtendedColorType::L8,
                image::ImageFormat::Png,
            )?;
        }
        Ok(())
    }
}

/// Per-pixel nonnegative real field with the same layout as a [`GridMask`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    cells: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            cells: vec![0.0; width * height],
        }
    }

    /// Row-major values; the length must be `width * height`.
    pub fn from_vec(width: usize, height: usize, cells: Vec<f64>) -> Result<Self> {
        if cells.len() != width * height {
            return Err(Error::InvalidParams(format!(
                "expected {} values, got {}",
                width * height,
                cells.len()
            )));
        }
        Ok(Self {
            width,
            height,
            cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.cells[y * self.width + x]
    }

    /// Value at a pixel; 0 outside the raster.
    pub fn at(&self, p: Pixel) -> f64 {
        if p.x < 0 || p.y < 0 || p.x as usize >= self.width || p.y as usize >= self.height {
            0.0
        } else {
            self.get(p.x as usize, p.y as usize)
        }
    }

    pub fn max(&self) -> f64 {
        self.cells.iter().copied().fold(0.0, f64::max)
    }

    /// Row-major rows, handy in tests.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.cells.chunks(self.width).map(<[f64]>::to_vec).collect()
    }
}

/// Shape of the normalization kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelShape {
    #[default]
    Disk,
    Square,
}

/// Binary kernel of side `2 * radius + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiskKernel {
    radius: usize,
    cells: Vec<u8>,
}

impl DiskKernel {
    /// Disk of all offsets with `dx² + dy² <= radius²`.
    pub fn disk(radius: usize) -> Self {
        Self::with_shape(radius, KernelShape::Disk)
    }

    pub fn with_shape(radius: usize, shape: KernelShape) -> Self {
        assert!(radius >= 1, "kernel radius must be at least 1");
        let side = 2 * radius + 1;
        let r = radius as i64;
        let mut cells = Vec::with_capacity(side * side);
        for dy in -r..=r {
            for dx in -r..=r {
                let inside = match shape {
                    KernelShape::Disk => dx * dx + dy * dy <= r * r,
                    KernelShape::Square => true,
                };
                cells.push(u8::from(inside));
            }
        }
        Self { radius, cells }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 1).count()
    }

    /// Contiguous runs `(dy, dx_start, dx_end_inclusive)` of set cells.
    fn runs(&self) -> Vec<(i64, i64, i64)> {
        let side = self.side();
        let r = self.radius as i64;
        let mut runs = Vec::new();
        for ky in 0..side {
            let row = &self.cells[ky * side..(ky + 1) * side];
            let mut kx = 0;
            while kx < side {
                if row[kx] == 1 {
                    let s = kx;
                    while kx < side && row[kx] == 1 {
                        kx += 1;
                    }
                    runs.push((ky as i64 - r, s as i64 - r, kx as i64 - 1 - r));
                } else {
                    kx += 1;
                }
            }
        }
        runs
    }
}

/// Exact Euclidean distance from every vessel pixel to the nearest
/// background pixel (out-of-raster pixels included). Background holds 0.
pub fn distance_transform(mask: &GridMask) -> ScalarField {
    // Pad with a one-pixel background ring so the border acts as background;
    // pixels further out can never be closer than the ring.
    let pw = mask.width + 2;
    let ph = mask.height + 2;
    const INF: i64 = i64::MAX / 4;
    let mut sq = vec![INF; pw * ph];
    for y in 0..ph {
        for x in 0..pw {
            let bg = x == 0
                || y == 0
                || x == pw - 1
                || y == ph - 1
                || mask.cells[(y - 1) * mask.width + (x - 1)] == 0;
            if bg {
                sq[y * pw + x] = 0;
            }
        }
    }

    let mut f = vec![0i64; pw.max(ph)];
    let mut out = vec![0i64; pw.max(ph)];
    let mut v = vec![0usize; pw.max(ph)];
    let mut z = vec![0f64; pw.max(ph) + 1];

    for x in 0..pw {
        for y in 0..ph {
            f[y] = sq[y * pw + x];
        }
        edt_1d(&f[..ph], &mut out[..ph], &mut v, &mut z);
        for y in 0..ph {
            sq[y * pw + x] = out[y];
        }
    }
    for y in 0..ph {
        f[..pw].copy_from_slice(&sq[y * pw..(y + 1) * pw]);
        edt_1d(&f[..pw], &mut out[..pw], &mut v, &mut z);
        sq[y * pw..(y + 1) * pw].copy_from_slice(&out[..pw]);
    }

    let mut field = ScalarField::zeros(mask.width, mask.height);
    for y in 0..mask.height {
        for x in 0..mask.width {
            field.cells[y * mask.width + x] = (sq[(y + 1) * pw + x + 1] as f64).sqrt();
        }
    }
    field
}

/// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) on squared
/// integer distances. Entries equal to the sentinel are treated as absent.
fn edt_1d(f: &[i64], d: &mut [i64], v: &mut [usize], z: &mut [f64]) {
    const INF: i64 = i64::MAX / 4;
    let n = f.len();
    let first = match f.iter().position(|&x| x < INF) {
        Some(i) => i,
        None => {
            d.fill(INF);
            return;
        }
    };
    let sep = |q: usize, p: usize| -> f64 {
        let (qi, pi) = (q as i64, p as i64);
        ((f[q] + qi * qi) - (f[p] + pi * pi)) as f64 / (2 * (qi - pi)) as f64
    };
    let mut k = 0usize;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    #[allow(clippy::needless_range_loop)]
    for q in first + 1..n {
        if f[q] >= INF {
            continue;
        }
        let mut s = sep(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = sep(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate().take(n) {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as i64 - v[k] as i64;
        *out = dq * dq + f[v[k]];
    }
}

/// Counts vessel pixels under the kernel footprint centered at each pixel,
/// with zero padding outside the raster.
pub fn convolve(mask: &GridMask, kernel: &DiskKernel) -> ScalarField {
    let (w, h) = (mask.width, mask.height);
    // Row prefix sums: prefix[y][x] = sum of row y over [0, x).
    let mut prefix = vec![0u32; h * (w + 1)];
    for y in 0..h {
        let row = &mask.cells[y * w..(y + 1) * w];
        let p = &mut prefix[y * (w + 1)..(y + 1) * (w + 1)];
        for x in 0..w {
            p[x + 1] = p[x] + row[x] as u32;
        }
    }
    let runs = kernel.runs();
    let mut field = ScalarField::zeros(w, h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut total = 0u32;
            for &(dy, x0, x1) in &runs {
                let yy = y + dy;
                if yy < 0 || yy >= h as i64 {
                    continue;
                }
                let a = (x + x0).clamp(0, w as i64) as usize;
                let b = (x + x1 + 1).clamp(0, w as i64) as usize;
                if b > a {
                    let p = &prefix[yy as usize * (w + 1)..];
                    total += p[b] - p[a];
                }
            }
            field.cells[y as usize * w + x as usize] = total as f64;
        }
    }
    field
}

/// Normalized distance-transform heatmap with the default disk kernel.
pub fn ndt_heatmap(mask: &GridMask) -> Result<ScalarField> {
    ndt_heatmap_with(mask, KernelShape::Disk)
}

/// `H = D(I) / (I * K_r)` on vessel pixels, `r = ceil(max D(I))`, 0 elsewhere.
pub fn ndt_heatmap_with(mask: &GridMask, shape: KernelShape) -> Result<ScalarField> {
    let dist = distance_transform(mask);
    let max_d = dist.max();
    if max_d <= 0.0 {
        return Err(Error::EmptyMask);
    }
    let kernel = DiskKernel::with_shape(max_d.ceil() as usize, shape);
    let conv = convolve(mask, &kernel);
    let mut field = ScalarField::zeros(mask.width, mask.height);
    for (i, out) in field.cells.iter_mut().enumerate() {
        if mask.cells[i] == 1 {
            // a vessel pixel always covers itself, so the denominator is >= 1
            *out = dist.cells[i] / conv.cells[i];
        }
    }
    Ok(field)
}
