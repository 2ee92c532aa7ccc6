use std::path::PathBuf;

use log::info;
use mamsr::image_io::{load_png, save_png};
use mamsr::train::data::list_pngs;

use crate::args::SrArgs;
use crate::commands::{create_dir, load_model};
use crate::error::CliError;

pub fn run(args: SrArgs) -> Result<(), CliError> {
    let model = load_model(&args.ckpt, &args.net)?;
    let inputs: Vec<PathBuf> = if args.input.is_dir() {
        list_pngs(&args.input)?
    } else if args.input.is_file() {
        vec![args.input.clone()]
    } else {
        return Err(CliError::Data(format!("input {} does not exist", args.input.display())));
    };
    if inputs.is_empty() {
        return Err(CliError::Data(format!("no PNG images in {}", args.input.display())));
    }
    create_dir(&args.out)?;
    for path in inputs {
        let lr = load_png(&path)?;
        let sr = model.super_resolve(&lr)?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let out = args.out.join(format!("{stem}_x{}.png", model.cfg.scale));
        save_png(&sr, &out)?;
        info!("{} ({}x{}) -> {} ({}x{})", path.display(), lr.width(), lr.height(), out.display(), sr.width(), sr.height());
    }
    Ok(())
}
