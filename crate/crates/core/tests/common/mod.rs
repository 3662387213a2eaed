//! Independent brute-force oracles and corpus generators shared by the
//! integration tests.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vascnav::raster::{GridMask, ScalarField};
use vascnav::Pixel;

pub const UNITS: f64 = (1u64 << 30) as f64;

/// Minimum Euclidean distance to a background pixel, counting every pixel of
/// the one-pixel ring around the raster as background.
pub fn brute_distance(mask: &GridMask) -> Vec<f64> {
    let (w, h) = (mask.width() as i32, mask.height() as i32);
    let mut background = Vec::new();
    for y in -1..=h {
        for x in -1..=w {
            let p = Pixel::new(x, y);
            if !mask.is_vessel(p) {
                background.push(p);
            }
        }
    }
    let mut out = vec![0.0; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let p = Pixel::new(x, y);
            if mask.is_vessel(p) {
                out[(y * w + x) as usize] = background
                    .iter()
                    .map(|b| (((b.x - x).pow(2) + (b.y - y).pow(2)) as f64).sqrt())
                    .fold(f64::INFINITY, f64::min);
            }
        }
    }
    out
}

/// Disk footprint of radius `r`: offsets with dx² + dy² ≤ r².
pub fn disk_offsets(r: i32) -> Vec<(i32, i32)> {
    let mut v = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                v.push((dx, dy));
            }
        }
    }
    v
}

/// Nested-loop count of vessel pixels under the footprint.
pub fn brute_convolve(mask: &GridMask, offsets: &[(i32, i32)]) -> Vec<f64> {
    let (w, h) = (mask.width() as i32, mask.height() as i32);
    let mut out = vec![0.0; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            out[(y * w + x) as usize] = offsets
                .iter()
                .filter(|&&(dx, dy)| mask.is_vessel(Pixel::new(x + dx, y + dy)))
                .count() as f64;
        }
    }
    out
}

/// Heatmap evaluated per pixel from the two oracles above.
pub fn brute_heatmap(mask: &GridMask) -> Vec<f64> {
    let d = brute_distance(mask);
    let r = d.iter().cloned().fold(0.0, f64::max).ceil() as i32;
    let c = brute_convolve(mask, &disk_offsets(r));
    d.iter()
        .zip(&c)
        .map(|(&d, &c)| if d > 0.0 { d / c } else { 0.0 })
        .collect()
}

/// Node charge in fixed-point units for weight `omega` and boundary value `b`.
pub fn charge_units(omega: f64, b: f64) -> u64 {
    (omega * b * UNITS).round() as u64
}

pub fn step_cost_units(dx: i32, dy: i32) -> u64 {
    if dx != 0 && dy != 0 {
        (2f64.sqrt() * UNITS).ceil() as u64
    } else {
        UNITS as u64
    }
}

/// Plain Dijkstra over vessel pixels: moving into `v` costs the step length
/// plus `node[v]`.
pub fn dijkstra(
    mask: &GridMask,
    node: &[u64],
    start: Pixel,
    goal: Pixel,
    eight: bool,
) -> Option<u64> {
    let (w, h) = (mask.width() as i32, mask.height() as i32);
    let idx = |p: Pixel| (p.y * w + p.x) as usize;
    let mut dist = vec![u64::MAX; (w * h) as usize];
    let mut heap = BinaryHeap::new();
    dist[idx(start)] = 0;
    heap.push(Reverse((0u64, idx(start))));
    let moves: Vec<(i32, i32)> = if eight {
        vec![
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ]
    } else {
        vec![(1, 0), (-1, 0), (0, 1), (0, -1)]
    };
    while let Some(Reverse((d, i))) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        let p = Pixel::new(i as i32 % w, i as i32 / w);
        if p == goal {
            return Some(d);
        }
        for &(dx, dy) in &moves {
            let q = Pixel::new(p.x + dx, p.y + dy);
            if !mask.is_vessel(q) {
                continue;
            }
            let j = idx(q);
            let nd = d + step_cost_units(dx, dy) + node[j];
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(Reverse((nd, j)));
            }
        }
    }
    None
}

/// One corpus case: a random mask with two vessel pixels in the same
/// 8-connected component.
#[derive(Debug, Clone)]
pub struct Case {
    pub mask: GridMask,
    pub start: Pixel,
    pub goal: Pixel,
}

/// Deterministic corpus of random masks up to 32×32.
pub fn corpus(n: usize, seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = rng.gen_range(2..=32usize);
        let h = rng.gen_range(2..=32usize);
        let density = rng.gen_range(0.45..0.9);
        let samples: Vec<u8> = (0..w * h)
            .map(|_| u8::from(rng.gen_bool(density)))
            .collect();
        let mask = GridMask::from_samples(w, h, &samples).unwrap();
        if mask.vessel_count() < 2 {
            continue;
        }
        let (labels, _) = mask.components();
        let vessels: Vec<usize> = (0..w * h).filter(|&i| samples[i] != 0).collect();
        let s = vessels[rng.gen_range(0..vessels.len())];
        let same: Vec<usize> = vessels
            .iter()
            .copied()
            .filter(|&i| labels[i] == labels[s])
            .collect();
        let g = same[rng.gen_range(0..same.len())];
        out.push(Case {
            start: mask.pixel_at(s),
            goal: mask.pixel_at(g),
            mask,
        });
    }
    out
}

pub fn field_values(f: &ScalarField) -> Vec<f64> {
    f.cells().to_vec()
}

/// Prints one acceptance line and returns whether it passed.
pub fn report(name: &str, pass: bool, detail: impl std::fmt::Display) -> bool {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

/// Request lines of the scripted protocol session used for the golden
/// transcript.
pub const GOLDEN_SCRIPT: &[&str] = &[
    r#"{"type":"hello","seq":1,"client":"golden"}"#,
    r#"{"type":"list_phantoms","seq":2}"#,
    r#"{"type":"step","seq":3,"translate_mm":5,"rotate_deg":0}"#,
    r#"{"type":"reset","seq":4,"phantom":"corridor","target":"END","seed":3,"mode":"agent"}"#,
    r#"{"type":"step","seq":5,"translate_mm":20,"rotate_deg":0}"#,
    r#"{"type":"step","seq":6,"translate_mm":-5,"rotate_deg":10,"render":true}"#,
    r#"{"type":"render","seq":7,"format":"png"}"#,
    r#"{"type":"motor_echo","seq":8,"translate_mm":20,"rotate_deg":90}"#,
    r#"{"type":"step","seq":9,"translate_mm":20,"rotate_deg":-10}"#,
    "{broken",
    r#"{"type":"step","seq":10,"translate_mm":20,"rotate_deg":0}"#,
    r#"{"type":"step","seq":11,"translate_mm":20,"rotate_deg":0}"#,
    r#"{"type":"step","seq":12,"translate_mm":20,"rotate_deg":0}"#,
    r#"{"type":"metrics","seq":13}"#,
    r#"{"type":"bye","seq":14}"#,
];

pub const GOLDEN_PATH: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/tests/golden/protocol_session.txt"
);

/// Joins requests and masked replies as `> request` / `< reply` lines.
pub fn transcript_text(requests: &[&str], replies: &[String]) -> String {
    let mut out = String::new();
    for (q, a) in requests.iter().zip(replies) {
        out.push_str("> ");
        out.push_str(q);
        out.push('\n');
        out.push_str("< ");
        out.push_str(&vascnav::service::mask_timestamps(a));
        out.push('\n');
    }
    out
}
