use std::fmt::Write as _;
use std::path::Path;

use log::info;
use mamsr::image_io::{load_png, save_gray_png};
use mamsr::Tensor;

use crate::args::InspectArgs;
use crate::commands::{create_dir, load_model};
use crate::error::CliError;

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Other(anyhow::anyhow!("cannot write {}: {e}", path.display())))
}

fn min_max(v: &[f32]) -> (f32, f32) {
    v.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// One grayscale PNG per channel. With `fixed`, values are written as-is
/// (they already lie in `[0, 1]`); otherwise each map is min-max stretched.
fn dump_planes(t: &Tensor<f32>, dir: &Path, label: &str, fixed: bool, bounds: &mut String) -> Result<(), CliError> {
    create_dir(dir)?;
    let s = t.shape();
    for c in 0..s.c {
        let plane = t.plane(0, c);
        let (lo, hi) = min_max(plane);
        let values: Vec<f32> = if fixed {
            plane.to_vec()
        } else if hi > lo {
            plane.iter().map(|v| (v - lo) / (hi - lo)).collect()
        } else {
            vec![0.5; plane.len()]
        };
        save_gray_png(s.w, s.h, &values, dir.join(format!("ch{c:03}.png")))?;
        let (plo, phi) = if fixed { (0.0, 1.0) } else { (lo, hi) };
        writeln!(bounds, "{label},{c},{lo:e},{hi:e},{plo:e},{phi:e}").unwrap();
    }
    Ok(())
}

pub fn run(args: InspectArgs) -> Result<(), CliError> {
    let model = load_model(&args.ckpt, &args.net)?;
    let r = model.cfg.blocks;
    if args.block == 0 || args.block > r {
        return Err(CliError::Config(format!("block {} is out of range 1..={r}", args.block)));
    }
    let img = load_png(&args.input)?;
    let maps = model.modulation_maps(&img)?.swap_remove(args.block - 1);
    create_dir(&args.out)?;

    if let (Some(pooled), Some(m)) = (&maps.csi_pooled, &maps.m_csi) {
        let mut csv = String::from("channel,pooled,m_csi\n");
        for (c, (p, v)) in pooled.item(0).iter().zip(m.item(0)).enumerate() {
            writeln!(csv, "{c},{p:e},{v:e}").unwrap();
        }
        write(&args.out.join("csi.csv"), &csv)?;
    }
    if let Some(m) = &maps.m_icd {
        let mut csv = String::from("channel,m_icd\n");
        for (c, v) in m.item(0).iter().enumerate() {
            writeln!(csv, "{c},{v:e}").unwrap();
        }
        write(&args.out.join("icd.csv"), &csv)?;
    }

    // Columns: observed range, then the range mapped to black and white.
    let mut bounds = String::from("map,channel,min,max,black,white\n");
    if let Some(m) = &maps.m_csd {
        dump_planes(m, &args.out.join("csd"), "csd", false, &mut bounds)?;
    }
    if let Some(g) = &maps.gate {
        dump_planes(g, &args.out.join("gate"), "gate", true, &mut bounds)?;
    }
    write(&args.out.join("bounds.csv"), &bounds)?;
    info!("block {} of {r}: maps written to {}", args.block, args.out.display());
    Ok(())
}
