use log::info;
use mamsr::eval::{evaluate, Predictor};

use crate::args::{Baseline, EvalArgs};
use crate::commands::{announce, load_model};
use crate::error::CliError;

pub fn run(args: EvalArgs) -> Result<(), CliError> {
    let model;
    let (predictor, scale) = match (args.identity_check, args.baseline, &args.ckpt) {
        (true, _, _) => (Predictor::GroundTruth, args.net.resolve()?.scale),
        (false, Some(Baseline::Bicubic), _) => (Predictor::Bicubic, args.net.resolve()?.scale),
        (false, None, Some(path)) => {
            model = load_model(path, &args.net)?;
            (Predictor::Model(&model), model.cfg.scale)
        }
        (false, None, None) => {
            return Err(CliError::Config("--ckpt is required unless --baseline or --identity-check is given".into()))
        }
    };
    if !matches!(predictor, Predictor::Model(_)) {
        announce(&args.net.resolve()?);
    }

    let report = evaluate(predictor, &args.hr_dir, args.lr_dir.as_deref(), scale)?;
    if report.rows.is_empty() {
        return Err(CliError::Data(format!("no image in {} could be evaluated", args.hr_dir.display())));
    }
    print!("{}", report.to_table());
    std::fs::write(&args.out, report.to_csv())
        .map_err(|e| CliError::Other(anyhow::anyhow!("cannot write {}: {e}", args.out.display())))?;
    info!("wrote {}", args.out.display());
    Ok(())
}
