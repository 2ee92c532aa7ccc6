use mamsr::model::{count_params, count_params_by_layer};
use mamsr::Paths;

use crate::args::ParamsArgs;
use crate::commands::announce;
use crate::error::CliError;

pub fn run(args: ParamsArgs) -> Result<(), CliError> {
    let cfg = args.net.resolve()?;
    announce(&cfg);
    for (name, n) in count_params_by_layer(&cfg) {
        println!("{name:<24} {n:>10}");
    }
    let total = count_params(&cfg);
    let baseline = count_params(&mamsr::NetworkConfig { paths: Paths::NONE, ..cfg.clone() });
    let increase = 100.0 * (total as f64 - baseline as f64) / baseline as f64;
    println!("total {total} ({:.0}K)", total as f64 / 1000.0);
    println!("baseline {baseline} ({:.0}K)", baseline as f64 / 1000.0);
    println!("increase {increase:+.2}% ({increase:+.5}%)");
    Ok(())
}
