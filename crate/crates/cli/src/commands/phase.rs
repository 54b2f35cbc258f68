//! Phase diagram grid: limiting free energy and regime label over a
//! rectangle in the (coupling, temperature) plane, where the temperature
//! axis is 1/(2 beta).

use std::collections::BTreeMap;

use serde_json::json;

use sskcw::analytics::{self, Regime};

use crate::config::resolve;
use crate::{usage, Ctx, Failure, Format};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    j_min: Option<f64>,
    #[arg(long)]
    j_max: Option<f64>,
    #[arg(long)]
    j_steps: Option<usize>,
    /// Temperature axis bounds, temperature = 1/(2 beta)
    #[arg(long)]
    temp_min: Option<f64>,
    #[arg(long)]
    temp_max: Option<f64>,
    #[arg(long)]
    temp_steps: Option<usize>,
}

fn regime_label(r: Regime) -> &'static str {
    match r {
        Regime::SpinGlass => "spin_glass",
        Regime::Paramagnetic => "paramagnetic",
        Regime::Ferromagnetic => "ferromagnetic",
    }
}

pub fn run(ctx: &Ctx, args: &Args) -> Result<(), Failure> {
    let sec = ctx.config.section("phase");
    let j_min = resolve(args.j_min, sec.f64("j_min"), 0.2).map_err(usage)?;
    let j_max = resolve(args.j_max, sec.f64("j_max"), 3.0).map_err(usage)?;
    let j_steps = resolve(args.j_steps, sec.usize("j_steps"), 57).map_err(usage)?;
    let temp_min = resolve(args.temp_min, sec.f64("temp_min"), 0.2).map_err(usage)?;
    let temp_max = resolve(args.temp_max, sec.f64("temp_max"), 3.0).map_err(usage)?;
    let temp_steps = resolve(args.temp_steps, sec.usize("temp_steps"), 57).map_err(usage)?;
    if !(j_min > 0.0 && j_max > j_min && temp_min > 0.0 && temp_max > temp_min) {
        return Err(usage(format!(
            "grid ranges must be positive and increasing: j in [{j_min}, {j_max}], temperature in [{temp_min}, {temp_max}]"
        )));
    }
    if j_steps < 2 || temp_steps < 2 {
        return Err(usage("grid needs at least 2 steps on each axis"));
    }

    let mut csv = String::from("# phase grid v1\nj,half_inv_beta,regime,f\n");
    let mut rows = Vec::new();
    for ji in 0..j_steps {
        let j = j_min + (j_max - j_min) * ji as f64 / (j_steps - 1) as f64;
        for ti in 0..temp_steps {
            let temp = temp_min + (temp_max - temp_min) * ti as f64 / (temp_steps - 1) as f64;
            let beta = 1.0 / (2.0 * temp);
            let (f, regime) = analytics::limiting_free_energy(beta, j)
                .map_err(|e| Failure::Hard(format!("free energy at j = {j}, temperature = {temp}: {e}")))?;
            let label = regime_label(regime);
            csv.push_str(&format!("{j},{temp},{label},{f}\n"));
            if ctx.format == Format::Json {
                rows.push(json!({ "j": j, "half_inv_beta": temp, "regime": label, "f": f }));
            }
        }
    }
    ctx.write_file("phase.csv", &csv)?;
    if ctx.format == Format::Json {
        let text = serde_json::to_string_pretty(&rows)
            .map_err(|e| Failure::Hard(format!("encoding phase grid: {e}")))?;
        ctx.write_file("phase.json", &format!("{text}\n"))?;
    }

    let mut params = BTreeMap::new();
    params.insert("j_min".to_string(), j_min.to_string());
    params.insert("j_max".to_string(), j_max.to_string());
    params.insert("j_steps".to_string(), j_steps.to_string());
    params.insert("temp_min".to_string(), temp_min.to_string());
    params.insert("temp_max".to_string(), temp_max.to_string());
    params.insert("temp_steps".to_string(), temp_steps.to_string());
    ctx.write_manifest("phase", &params)
}
