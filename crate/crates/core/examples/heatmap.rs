//! Distance transform and normalized heatmap of the standard aorta phantom,
//! written as grayscale PNGs.
//!
//! cargo run --example heatmap -- [out_dir]

use image::GrayImage;
use vascnav::phantom::standard_aorta;
use vascnav::raster::{distance_transform, ndt_heatmap, ScalarField};

fn to_gray(f: &ScalarField) -> GrayImage {
    let max = f.max().max(f64::MIN_POSITIVE);
    GrayImage::from_fn(f.width() as u32, f.height() as u32, |x, y| {
        image::Luma([(255.0 * f.get(x as usize, y as usize) / max).round() as u8])
    })
}

fn main() -> vascnav::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out".into());
    std::fs::create_dir_all(&out)?;
    let ph = standard_aorta();
    let dt = distance_transform(&ph.mask);
    let heat = ndt_heatmap(&ph.mask)?;
    println!(
        "{}x{} mask, {} vessel px",
        ph.mask.width(),
        ph.mask.height(),
        ph.mask.vessel_count()
    );
    println!(
        "max distance {:.3} px, max heat {:.5}",
        dt.max(),
        heat.max()
    );
    to_gray(&dt).save(format!("{out}/distance.png"))?;
    to_gray(&heat).save(format!("{out}/heatmap.png"))?;
    println!("wrote {out}/distance.png and {out}/heatmap.png");
    Ok(())
}
