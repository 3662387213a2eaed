//! Procedural vessel phantoms: an aortic-arch template with three labeled
//! branches, a straight corridor fixture, and mask + JSON sidecar storage.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Pixel, Point};
use crate::raster::GridMask;

pub const DEFAULT_PX_PER_MM: f64 = 2.0;
pub const DEFAULT_LUMEN_MM: f64 = 18.0;
pub const DEFAULT_SIZE: usize = 512;
pub const DEFAULT_SEED: u64 = 7;

/// Branch labels in anatomical order along the arch, from the ascending side.
pub const AORTA_TARGETS: [&str; 3] = ["BCA", "LCA", "LSA"];

/// Name of the single corridor target.
pub const CORRIDOR_TARGET: &str = "END";

const SIDECAR_VERSION: u32 = 1;

/// A vessel mask with its entry point, named targets and centerlines.
#[derive(Debug, Clone, PartialEq)]
pub struct VesselPhantom {
    pub mask: GridMask,
    pub start: Pixel,
    pub targets: BTreeMap<String, Pixel>,
    pub trunk_polyline: Vec<Pixel>,
    pub branch_polylines: BTreeMap<String, Vec<Pixel>>,
    pub px_per_mm: f64,
}

impl VesselPhantom {
    pub fn target(&self, name: &str) -> Result<Pixel> {
        self.targets
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownTarget(name.to_string()))
    }

    pub fn target_names(&self) -> Vec<String> {
        self.targets.keys().cloned().collect()
    }

    /// Heading (degrees) of the trunk centerline at its first point.
    pub fn initial_heading(&self) -> f64 {
        let first = self.trunk_polyline.first().copied().unwrap_or(self.start);
        let ahead = self
            .trunk_polyline
            .iter()
            .find(|p| p.dist(first) >= 5.0)
            .or_else(|| self.trunk_polyline.last())
            .copied()
            .unwrap_or(first);
        if ahead == first {
            return 0.0;
        }
        crate::geom::wrap_deg(first.to_point().heading_to(ahead.to_point()))
    }

    pub fn mm_to_px(&self, mm: f64) -> f64 {
        mm * self.px_per_mm
    }

    pub fn px_to_mm(&self, px: f64) -> f64 {
        px / self.px_per_mm
    }

    /// Checks the structural invariants; used after generation and loading.
    pub fn validate(&self) -> Result<()> {
        if !(self.px_per_mm > 0.0 && self.px_per_mm.is_finite()) {
            return Err(Error::parse(Some("px_per_mm".into()), "must be positive"));
        }
        if !self.mask.is_vessel(self.start) {
            return Err(Error::parse(
                Some("start".into()),
                "start is not on a vessel pixel",
            ));
        }
        for (name, t) in &self.targets {
            if !self.mask.is_vessel(*t) {
                return Err(Error::parse(
                    Some("targets".into()),
                    format!("target {name} is not on a vessel pixel"),
                ));
            }
        }
        for (name, poly) in &self.branch_polylines {
            match poly.first() {
                Some(p) if self.trunk_polyline.contains(p) => {}
                _ => {
                    return Err(Error::parse(
                        Some("branch_polylines".into()),
                        format!("branch {name} does not begin on the trunk polyline"),
                    ))
                }
            }
        }
        Ok(())
    }
}

fn catmull_rom(ctrl: &[Point], spacing: f64) -> Vec<Point> {
    if ctrl.len() < 2 {
        return ctrl.to_vec();
    }
    let mut out = vec![ctrl[0]];
    for i in 0..ctrl.len() - 1 {
        let p0 = if i == 0 { ctrl[0] } else { ctrl[i - 1] };
        let p1 = ctrl[i];
        let p2 = ctrl[i + 1];
        let p3 = if i + 2 < ctrl.len() {
            ctrl[i + 2]
        } else {
            ctrl[i + 1]
        };
        let n = ((p1.dist(p2) / spacing).ceil() as usize).max(1);
        for s in 1..=n {
            let t = s as f64 / n as f64;
            let t2 = t * t;
            let t3 = t2 * t;
            let f = |a: f64, b: f64, c: f64, d: f64| {
                0.5 * (2.0 * b
                    + (-a + c) * t
                    + (2.0 * a - 5.0 * b + 4.0 * c - d) * t2
                    + (-a + 3.0 * b - 3.0 * c + d) * t3)
            };
            out.push(Point::new(
                f(p0.x, p1.x, p2.x, p3.x),
                f(p0.y, p1.y, p2.y, p3.y),
            ));
        }
    }
    out
}

/// Rounds a dense curve to pixels, dropping consecutive duplicates.
fn to_pixels(curve: &[Point]) -> Vec<Pixel> {
    let mut out: Vec<Pixel> = Vec::with_capacity(curve.len());
    for p in curve {
        let px = p.pixel();
        if out.last() != Some(&px) && !out.contains(&px) {
            out.push(px);
        }
    }
    out
}

fn paint(mask: &mut GridMask, curve: &[Point], radius: f64) {
    for p in curve {
        mask.fill_disk(p.x, p.y, radius);
    }
}

struct BranchTemplate {
    name: &'static str,
    /// Position on the arch, degrees from the descending side.
    arch_deg: f64,
    /// Screen-CCW direction of the branch axis.
    dir_deg: f64,
}

const BRANCHES: [BranchTemplate; 3] = [
    BranchTemplate {
        name: "LSA",
        arch_deg: 52.0,
        dir_deg: 72.0,
    },
    BranchTemplate {
        name: "LCA",
        arch_deg: 90.0,
        dir_deg: 95.0,
    },
    BranchTemplate {
        name: "BCA",
        arch_deg: 128.0,
        dir_deg: 118.0,
    },
];

/// Aortic-arch phantom at the default scale of 2 px/mm.
pub fn generate_aorta_phantom(
    width: usize,
    height: usize,
    lumen_width_mm: f64,
    seed: u64,
) -> Result<VesselPhantom> {
    generate_aorta_phantom_scaled(width, height, lumen_width_mm, DEFAULT_PX_PER_MM, seed)
}

/// Descending aorta rising from the bottom edge, a semicircular arch, a
/// blind-ended ascending segment, and BCA/LCA/LSA branches off the arch top.
/// Control points are jittered by up to ±5 % of the lumen width.
pub fn generate_aorta_phantom_scaled(
    width: usize,
    height: usize,
    lumen_width_mm: f64,
    px_per_mm: f64,
    seed: u64,
) -> Result<VesselPhantom> {
    let lumen_px = lumen_width_mm * px_per_mm;
    if !(lumen_px >= 3.0 && lumen_px.is_finite()) {
        return Err(Error::GeometryOverflow(format!(
            "lumen width {lumen_width_mm} mm is too small"
        )));
    }
    if !(px_per_mm > 0.0) || width < 64 || height < 64 {
        return Err(Error::GeometryOverflow(format!(
            "raster {width}x{height} at {px_per_mm} px/mm cannot hold the arch template"
        )));
    }
    let (w, h) = (width as f64, height as f64);
    let radius = lumen_px / 2.0;
    let branch_radius = 0.65 * radius;
    let arch_r = 0.16 * w;
    let center = Point::new(0.5 * w, 0.48 * h);
    let branch_len = 0.235 * h;
    if radius > 0.45 * arch_r {
        return Err(Error::GeometryOverflow(format!(
            "lumen of {lumen_px:.1} px closes the arch (radius {arch_r:.1} px)"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter_amp = 0.05 * lumen_px;
    let mut jitter = |p: Point| {
        Point::new(
            p.x + rng.gen_range(-jitter_amp..=jitter_amp),
            p.y + rng.gen_range(-jitter_amp..=jitter_amp),
        )
    };

    let on_arch = |deg: f64| {
        let a = deg.to_radians();
        Point::new(center.x + arch_r * a.cos(), center.y - arch_r * a.sin())
    };

    // Trunk: descending aorta, arch, ascending aorta (blind end toward the heart).
    let desc_x = center.x + arch_r;
    let asc_x = center.x - arch_r;
    let bottom = h - 1.0 - 0.02 * h;
    let start_pt = Point::new(desc_x, bottom);
    let mut ctrl = vec![start_pt];
    for f in [0.75, 0.5, 0.25] {
        ctrl.push(jitter(Point::new(
            desc_x,
            center.y + (bottom - center.y) * f,
        )));
    }
    for deg in (0..=180).step_by(30) {
        ctrl.push(jitter(on_arch(deg as f64)));
    }
    let asc_end = center.y + 0.3 * h;
    for f in [0.33, 0.66, 1.0] {
        ctrl.push(jitter(Point::new(
            asc_x,
            center.y + (asc_end - center.y) * f,
        )));
    }
    let trunk_curve = catmull_rom(&ctrl, 0.5);
    let trunk_polyline = to_pixels(&trunk_curve);

    let mut mask = GridMask::new(width, height);
    paint(&mut mask, &trunk_curve, radius);

    let mut targets = BTreeMap::new();
    let mut branch_polylines = BTreeMap::new();
    let mut branch_curves = Vec::new();
    for b in &BRANCHES {
        let origin_guess = on_arch(b.arch_deg);
        let origin = *trunk_polyline
            .iter()
            .min_by(|a, c| {
                a.to_point()
                    .dist(origin_guess)
                    .total_cmp(&c.to_point().dist(origin_guess))
            })
            .expect("trunk polyline is non-empty");
        let dir = Point::heading_unit(b.dir_deg);
        let o = origin.to_point();
        let bctrl = vec![
            o,
            jitter(o.offset(dir, branch_len * 0.35)),
            jitter(o.offset(dir, branch_len * 0.7)),
            jitter(o.offset(dir, branch_len)),
        ];
        let curve = catmull_rom(&bctrl, 0.5);
        let poly = to_pixels(&curve);
        // target sits short of the blind end
        let along = branch_len - 1.2 * branch_radius - 0.05 * branch_len;
        let target = *poly
            .iter()
            .min_by(|a, c| {
                let da = (a.dist(origin) - along).abs();
                let dc = (c.dist(origin) - along).abs();
                da.total_cmp(&dc)
            })
            .expect("branch polyline is non-empty");
        targets.insert(b.name.to_string(), target);
        branch_polylines.insert(b.name.to_string(), poly);
        branch_curves.push(curve);
    }

    // Every painted disk must stay inside the frame.
    let margin = radius.max(branch_radius) + 1.0;
    let fits = |p: &Point| {
        p.x - radius >= 0.0 && p.y - margin >= 0.0 && p.x + margin <= w - 1.0 && p.y <= h - 1.0
    };
    let all_fit = trunk_curve.iter().all(fits)
        && branch_curves.iter().flatten().all(|p| {
            p.x - branch_radius >= 0.0
                && p.y - branch_radius >= 0.0
                && p.x + branch_radius <= w - 1.0
                && p.y + branch_radius <= h - 1.0
        });
    if !all_fit {
        return Err(Error::GeometryOverflow(format!(
            "arch template with {lumen_px:.1} px lumen exceeds the {width}x{height} raster"
        )));
    }
    for c in &branch_curves {
        paint(&mut mask, c, branch_radius);
    }

    let phantom = VesselPhantom {
        mask,
        start: start_pt.pixel(),
        targets,
        trunk_polyline,
        branch_polylines,
        px_per_mm,
    };
    phantom
        .validate()
        .map_err(|e| Error::GeometryOverflow(e.to_string()))?;
    if phantom.mask.components().1 != 1 {
        return Err(Error::GeometryOverflow(
            "mask is not a single component".into(),
        ));
    }
    Ok(phantom)
}

/// The default 512×512 arch phantom (18 mm lumen, seed 7).
pub fn standard_aorta() -> VesselPhantom {
    generate_aorta_phantom(DEFAULT_SIZE, DEFAULT_SIZE, DEFAULT_LUMEN_MM, DEFAULT_SEED)
        .expect("default template fits")
}

const CORRIDOR_MARGIN: usize = 16;

/// Straight horizontal corridor centered in the frame with a 16 px margin.
/// Start is at the left end, the single `END` target at the right end.
pub fn generate_corridor(length_mm: f64, width_mm: f64, px_per_mm: f64) -> Result<VesselPhantom> {
    if !(length_mm > 0.0 && width_mm > 0.0 && px_per_mm > 0.0)
        || !(length_mm * width_mm * px_per_mm).is_finite()
    {
        return Err(Error::GeometryOverflow(
            "corridor dimensions must be positive".into(),
        ));
    }
    let len_px = (length_mm * px_per_mm).round() as usize;
    let wid_px = (width_mm * px_per_mm).round() as usize;
    if len_px < 2 || wid_px < 1 || len_px > 1 << 14 || wid_px > 1 << 14 {
        return Err(Error::GeometryOverflow(format!(
            "corridor of {len_px}x{wid_px} px is degenerate or too large"
        )));
    }
    let m = CORRIDOR_MARGIN;
    let mut mask = GridMask::new(len_px + 2 * m, wid_px + 2 * m);
    for y in m..m + wid_px {
        for x in m..m + len_px {
            mask.set(Pixel::new(x as i32, y as i32), true);
        }
    }
    let cy = (m + wid_px / 2) as i32;
    let start = Pixel::new(m as i32, cy);
    let end = Pixel::new((m + len_px - 1) as i32, cy);
    let trunk_polyline = (start.x..=end.x).map(|x| Pixel::new(x, cy)).collect();
    Ok(VesselPhantom {
        mask,
        start,
        targets: BTreeMap::from([(CORRIDOR_TARGET.to_string(), end)]),
        trunk_polyline,
        branch_polylines: BTreeMap::new(),
        px_per_mm,
    })
}

/// JSON sidecar stored next to the mask image.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    version: u32,
    /// Mask file name, relative to the sidecar.
    mask: String,
    width: usize,
    height: usize,
    px_per_mm: f64,
    start: Pixel,
    targets: BTreeMap<String, Pixel>,
    trunk_polyline: Vec<Pixel>,
    #[serde(default)]
    branch_polylines: BTreeMap<String, Vec<Pixel>>,
}

/// Sidecar path for a mask path (`aorta.png` -> `aorta.json`).
pub fn sidecar_path(mask_path: &Path) -> PathBuf {
    mask_path.with_extension("json")
}

/// Writes the mask image (`.png` or `.pgm`) and its JSON sidecar.
pub fn save_phantom(phantom: &VesselPhantom, mask_path: impl AsRef<Path>) -> Result<()> {
    let mask_path = mask_path.as_ref();
    if mask_path.extension().and_then(|e| e.to_str()) == Some("json") {
        return Err(Error::Config(
            "phantom mask path must be an image, not .json".into(),
        ));
    }
    phantom.mask.save(mask_path)?;
    let sidecar = Sidecar {
        version: SIDECAR_VERSION,
        mask: mask_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        width: phantom.mask.width(),
        height: phantom.mask.height(),
        px_per_mm: phantom.px_per_mm,
        start: phantom.start,
        targets: phantom.targets.clone(),
        trunk_polyline: phantom.trunk_polyline.clone(),
        branch_polylines: phantom.branch_polylines.clone(),
    };
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(sidecar_path(mask_path), text + "\n")?;
    Ok(())
}

/// Loads a phantom from either its mask image or its JSON sidecar.
pub fn load_phantom(path: impl AsRef<Path>) -> Result<VesselPhantom> {
    let path = path.as_ref();
    let json_path = if path.extension().and_then(|e| e.to_str()) == Some("json") {
        path.to_path_buf()
    } else {
        sidecar_path(path)
    };
    let text = std::fs::read_to_string(&json_path)?;
    let sidecar = parse_sidecar(&text).map_err(|e| with_path(e, &json_path))?;
    if sidecar.version != SIDECAR_VERSION {
        return Err(with_path(
            Error::parse(
                Some("version".into()),
                format!("unsupported sidecar version {}", sidecar.version),
            ),
            &json_path,
        ));
    }
    let mask_path = json_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&sidecar.mask);
    let mask = GridMask::load(&mask_path)?;
    if mask.width() != sidecar.width || mask.height() != sidecar.height {
        return Err(with_path(
            Error::parse(
                Some(
                    if mask.width() != sidecar.width {
                        "width"
                    } else {
                        "height"
                    }
                    .into(),
                ),
                format!(
                    "metadata says {}x{} but {} is {}x{}",
                    sidecar.width,
                    sidecar.height,
                    mask_path.display(),
                    mask.width(),
                    mask.height()
                ),
            ),
            &json_path,
        ));
    }
    let phantom = VesselPhantom {
        mask,
        start: sidecar.start,
        targets: sidecar.targets,
        trunk_polyline: sidecar.trunk_polyline,
        branch_polylines: sidecar.branch_polylines,
        px_per_mm: sidecar.px_per_mm,
    };
    phantom.validate().map_err(|e| with_path(e, &json_path))?;
    Ok(phantom)
}

fn parse_sidecar(text: &str) -> Result<Sidecar> {
    serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        // serde reports e.g. "missing field `targets` at line 3 column 1"
        let field = msg
            .split('`')
            .nth(1)
            .filter(|_| msg.contains("field"))
            .map(str::to_string);
        Error::Parse {
            path: None,
            field,
            line: Some(e.line()),
            message: msg,
        }
    })
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse {
            field,
            line,
            message,
            ..
        } => Error::Parse {
            path: Some(path.to_path_buf()),
            field,
            line,
            message,
        },
        other => other,
    }
}
