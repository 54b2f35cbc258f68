//! Small-system cross-checks: the contour evaluation of the log partition
//! function against direct sphere quadrature (tiny systems) or sphere
//! Monte Carlo (slightly larger ones). Disagreement is a hard failure,
//! this is the pipeline's ground truth.

use std::collections::BTreeMap;

use serde_json::json;

use sskcw::ensembles::{assemble_deformed, sample_wigner, EnsembleConfig};
use sskcw::partition::{self, DirectMethod};
use sskcw::rng::trial_seed;
use sskcw::spectral::Spectrum;

use crate::commands::parse_dist;
use crate::config::resolve;
use crate::{usage, Ctx, Failure, Format};

#[derive(clap::Args)]
pub struct Args {
    /// System sizes, comma separated (quadrature for n <= 3, Monte Carlo above)
    #[arg(long, value_name = "N,N,...")]
    n_list: Option<String>,
    /// Instances per size
    #[arg(long)]
    count: Option<usize>,
    /// Inverse temperature
    #[arg(long)]
    beta: Option<f64>,
    /// Coupling strength, must exceed 1
    #[arg(long)]
    j: Option<f64>,
    /// Entry law: goe, gaussian, rademacher, two_point:<w3>
    #[arg(long)]
    dist: Option<String>,
    /// Sphere Monte Carlo sample count for n > 3
    #[arg(long)]
    mc_samples: Option<usize>,
}

pub fn run(ctx: &Ctx, args: &Args) -> Result<(), Failure> {
    let sec = ctx.config.section("oracle");
    let n_list: Vec<usize> = match &args.n_list {
        Some(text) => {
            let mut out = Vec::new();
            for item in text.split(',') {
                out.push(
                    item.trim()
                        .parse::<usize>()
                        .map_err(|_| usage(format!("n_list: bad size {item:?}")))?,
                );
            }
            out
        }
        None => match sec.list("n_list").map_err(usage)? {
            None => vec![1, 2, 3],
            Some(items) => {
                let mut out = Vec::new();
                for item in &items {
                    out.push(
                        item.parse::<usize>()
                            .map_err(|_| usage(format!("n_list: bad size {item:?}")))?,
                    );
                }
                out
            }
        },
    };
    let count = resolve(args.count, sec.usize("count"), 5).map_err(usage)?;
    let beta = resolve(args.beta, sec.f64("beta"), 0.3).map_err(usage)?;
    let j = resolve(args.j, sec.f64("j"), 2.0).map_err(usage)?;
    let dist_token =
        resolve(args.dist.clone(), Ok(sec.string("dist")), "gaussian".to_string()).map_err(usage)?;
    let mc_samples = resolve(args.mc_samples, sec.usize("mc_samples"), 200_000).map_err(usage)?;
    let seed = match ctx.seed {
        Some(s) => s,
        None => sec.u64("seed").map_err(usage)?.unwrap_or(1),
    };
    if n_list.is_empty() || count == 0 {
        return Err(usage("oracle needs at least one size and one instance"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(usage(format!("beta = {beta} must be positive")));
    }
    if mc_samples < 1000 {
        return Err(usage(format!("mc_samples = {mc_samples}: need at least 1000")));
    }
    let dist = parse_dist(&dist_token)?;

    let mut csv = String::from(
        "# oracle checks v1\nn,instance,seed,beta,log_z_contour,log_z_direct,mc_std_error,abs_diff,rel_diff\n",
    );
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for (ni, &n) in n_list.iter().enumerate() {
        for k in 0..count {
            let seed_k = trial_seed(seed, ni as u64 * 1000 + k as u64);
            let config = EnsembleConfig::new(n, j, dist, seed_k);
            config.validate().map_err(|e| usage(e.to_string()))?;
            let m = assemble_deformed(
                &sample_wigner(&config).map_err(|e| Failure::Hard(e.to_string()))?,
            );
            let spectrum = Spectrum::from_deformed(&m, j, Some(seed_k))
                .map_err(|e| Failure::Hard(e.to_string()))?;
            let contour = partition::contour_log_partition(&spectrum, beta)
                .map_err(|e| Failure::Hard(format!("contour at n = {n}: {e}")))?;
            let method = if n <= 3 {
                DirectMethod::Quadrature
            } else {
                DirectMethod::MonteCarlo { samples: mc_samples, seed: seed_k ^ 0x9E37_79B9_7F4A_7C15 }
            };
            let direct = partition::direct_log_partition(&m, beta, method)
                .map_err(|e| Failure::Hard(format!("direct evaluation at n = {n}: {e}")))?;
            let diff = (contour - direct.log_z).abs();
            let rel = diff / direct.log_z.abs().max(f64::MIN_POSITIVE);
            match direct.std_error {
                None => {
                    if rel > 1e-6 {
                        violations.push(format!(
                            "n = {n} instance {k}: contour {contour} vs quadrature {} (relative {rel:.2e})",
                            direct.log_z
                        ));
                    }
                }
                Some(se) => {
                    if diff > 4.0 * se {
                        violations.push(format!(
                            "n = {n} instance {k}: contour {contour} vs Monte Carlo {} ({:.1} standard errors)",
                            direct.log_z,
                            diff / se
                        ));
                    }
                }
            }
            let se_cell = direct.std_error.map(|s| s.to_string()).unwrap_or_default();
            csv.push_str(&format!(
                "{n},{k},{seed_k},{beta},{contour},{},{se_cell},{diff},{rel}\n",
                direct.log_z
            ));
            if ctx.format == Format::Json {
                rows.push(json!({
                    "n": n,
                    "instance": k,
                    "seed": seed_k,
                    "beta": beta,
                    "log_z_contour": contour,
                    "log_z_direct": direct.log_z,
                    "mc_std_error": direct.std_error,
                    "abs_diff": diff,
                    "rel_diff": rel,
                }));
            }
        }
    }
    ctx.write_file("oracle.csv", &csv)?;
    if ctx.format == Format::Json {
        let text = serde_json::to_string_pretty(&rows)
            .map_err(|e| Failure::Hard(format!("encoding oracle rows: {e}")))?;
        ctx.write_file("oracle.json", &format!("{text}\n"))?;
    }

    let mut params = BTreeMap::new();
    params.insert(
        "n_list".to_string(),
        n_list.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(", "),
    );
    params.insert("count".to_string(), count.to_string());
    params.insert("beta".to_string(), beta.to_string());
    params.insert("j".to_string(), j.to_string());
    params.insert("dist".to_string(), dist_token);
    params.insert("mc_samples".to_string(), mc_samples.to_string());
    params.insert("seed".to_string(), seed.to_string());
    ctx.write_manifest("oracle", &params)?;

    if !violations.is_empty() {
        return Err(Failure::Hard(format!(
            "oracle disagreement: {}",
            violations.join("; ")
        )));
    }
    Ok(())
}
