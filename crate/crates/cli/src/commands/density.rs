//! Kernel density curves of the transitional functional applied to its
//! Gaussian argument, one curve per window position B.

use std::collections::BTreeMap;

use serde_json::json;

use sskcw::analytics::{self, Moments, TransitionParams};
use sskcw::rng::{domain, Stream};

use crate::config::resolve;
use crate::kde;
use crate::{usage, Ctx, Failure, Format};

#[derive(clap::Args)]
pub struct Args {
    /// Coupling strength, must exceed 1
    #[arg(long)]
    j: Option<f64>,
    /// Window positions, comma separated
    #[arg(long, value_name = "B,B,...", allow_hyphen_values = true)]
    b_list: Option<String>,
    /// Samples per curve, at least 10000
    #[arg(long)]
    samples: Option<usize>,
    /// Off-diagonal third moment of the entry law
    #[arg(long, allow_hyphen_values = true)]
    w3: Option<f64>,
}

pub fn run(ctx: &Ctx, args: &Args) -> Result<(), Failure> {
    let sec = ctx.config.section("density");
    let j = resolve(args.j, sec.f64("j"), 2.0).map_err(usage)?;
    let samples = resolve(args.samples, sec.usize("samples"), 20_000).map_err(usage)?;
    let w3 = resolve(args.w3, sec.f64("w3"), 0.0).map_err(usage)?;
    let b_list = match &args.b_list {
        Some(text) => {
            let mut out = Vec::new();
            for item in text.split(',') {
                out.push(
                    item.trim()
                        .parse::<f64>()
                        .map_err(|_| usage(format!("b_list: bad number {item:?}")))?,
                );
            }
            out
        }
        None => sec.f64_list("b_list").map_err(usage)?.unwrap_or_else(|| vec![-1.0, 0.0, 1.0]),
    };
    let seed = match ctx.seed {
        Some(s) => s,
        None => sec.u64("seed").map_err(usage)?.unwrap_or(1),
    };
    if samples < 10_000 {
        return Err(usage(format!("samples = {samples}: need at least 10000 for a stable curve")));
    }
    if b_list.is_empty() {
        return Err(usage("b_list must name at least one window position"));
    }

    let moments = Moments { w2: 2.0, w3, w4: 3.0 };
    let mut csv = String::from("# density curves v1\nb,x,density\n");
    let mut rows = Vec::new();
    for (bi, &b) in b_list.iter().enumerate() {
        let p = TransitionParams::new(j, b).map_err(|e| usage(e.to_string()))?;
        let law = analytics::transition_law(&p, moments);
        let sd = law.var2.sqrt();
        let mut qs = Vec::with_capacity(samples);
        for i in 0..samples {
            let g2 = law.mean2
                + sd * Stream::for_cell(seed, domain::LIMIT_SAMPLE, i as u64, 1000 + bi as u64)
                    .next_normal();
            let q = analytics::q_of_x(g2, &p)
                .map_err(|e| Failure::Hard(format!("functional at B = {b}: {e}")))?;
            qs.push(q);
        }
        let curve = kde::gaussian_kde(&qs, 1024).map_err(Failure::Hard)?;
        println!("B = {b}: {} samples, bandwidth {:.4}", qs.len(), curve.bandwidth);
        let mass = curve.integral();
        if (mass - 1.0).abs() > 1e-3 {
            println!("warning: B = {b} curve integrates to {mass:.6}, grid may be too narrow");
        }
        let modes = curve.local_maxima(0.01);
        if modes != 1 {
            println!("warning: B = {b} curve has {modes} modes, expected a single peak");
        }
        for (x, y) in curve.xs.iter().zip(curve.ys.iter()) {
            csv.push_str(&format!("{b},{x},{y}\n"));
            if ctx.format == Format::Json {
                rows.push(json!({ "b": b, "x": x, "density": y }));
            }
        }
    }
    ctx.write_file("density.csv", &csv)?;
    if ctx.format == Format::Json {
        let text = serde_json::to_string_pretty(&rows)
            .map_err(|e| Failure::Hard(format!("encoding density: {e}")))?;
        ctx.write_file("density.json", &format!("{text}\n"))?;
    }

    // plot helper for the emitted table
    let words = b_list.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" ");
    let script = format!(
        "set datafile separator ','\nBS = \"{words}\"\nplot for [i=1:words(BS)] 'density.csv' using (column(1) == word(BS, i) + 0 ? column(2) : NaN):3 with lines title sprintf('B = %s', word(BS, i))\n"
    );
    ctx.write_file("density.gp", &script)?;

    let mut params = BTreeMap::new();
    params.insert("j".to_string(), j.to_string());
    params.insert(
        "b_list".to_string(),
        b_list.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(", "),
    );
    params.insert("samples".to_string(), samples.to_string());
    params.insert("w3".to_string(), w3.to_string());
    params.insert("seed".to_string(), seed.to_string());
    ctx.write_manifest("density", &params)
}
