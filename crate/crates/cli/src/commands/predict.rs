//! Analytic predictions for the transition window: the bivariate limit
//! law and the linear-statistic Gaussian parameters for named test
//! functions, as one JSON document.

use std::collections::BTreeMap;

use serde_json::json;

use sskcw::analytics::{self, Moments, StatisticKind, TransitionParams};
use sskcw::montecarlo::TestFn;

use crate::commands::split_flag_list;
use crate::config::resolve;
use crate::{usage, Ctx, Failure};

#[derive(clap::Args)]
pub struct Args {
    /// Coupling strength, must exceed 1
    #[arg(long)]
    j: Option<f64>,
    /// Window position within the transitional scaling
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    /// Diagonal entry variance
    #[arg(long)]
    w2: Option<f64>,
    /// Off-diagonal third moment
    #[arg(long, allow_hyphen_values = true)]
    w3: Option<f64>,
    /// Off-diagonal fourth moment
    #[arg(long)]
    w4: Option<f64>,
    /// Test functions, comma separated: g, x, x2, log-spike
    #[arg(long)]
    phi: Option<String>,
}

pub fn run(ctx: &Ctx, args: &Args) -> Result<(), Failure> {
    let sec = ctx.config.section("predict");
    let j = resolve(args.j, sec.f64("j"), 2.0).map_err(usage)?;
    let b = resolve(args.b, sec.f64("b"), 0.0).map_err(usage)?;
    let w2 = resolve(args.w2, sec.f64("w2"), 2.0).map_err(usage)?;
    let w3 = resolve(args.w3, sec.f64("w3"), 0.0).map_err(usage)?;
    let w4 = resolve(args.w4, sec.f64("w4"), 3.0).map_err(usage)?;
    let phis = match split_flag_list(&args.phi) {
        Some(list) => list,
        None => sec.list("phi").map_err(usage)?.unwrap_or_else(|| {
            vec!["g".into(), "x".into(), "x2".into(), "log-spike".into()]
        }),
    };

    let p = TransitionParams::new(j, b).map_err(|e| usage(e.to_string()))?;
    if !(w2 >= 0.0) {
        return Err(usage(format!("moments: diagonal variance w2 = {w2} must be nonnegative")));
    }
    if !(w4 >= 1.0 && w3 * w3 <= w4) {
        return Err(usage(format!(
            "moments: need w4 >= 1 and w3^2 <= w4 for a unit-variance entry law, got w3 = {w3}, w4 = {w4}"
        )));
    }
    let moments = Moments { w2, w3, w4 };
    let law = analytics::transition_law(&p, moments);

    let mut clt = serde_json::Map::new();
    for tag in &phis {
        let phi = TestFn::parse(tag).map_err(|e| usage(e.to_string()))?;
        let f = phi.make(j);
        let partial = analytics::clt_params(&f, StatisticKind::Partial, j, moments)
            .map_err(|e| usage(format!("clt for {tag}: {e}")))?;
        // the full statistic is undefined when phi blows up at the spike
        let full = analytics::clt_params(&f, StatisticKind::Full, j, moments).ok();
        clt.insert(
            tag.clone(),
            json!({
                "partial": { "mean": partial.mean, "variance": partial.variance },
                "full": full.map(|p| json!({ "mean": p.mean, "variance": p.variance })),
            }),
        );
    }

    let doc = json!({
        "j": j,
        "b": b,
        "j_hat": j + 1.0 / j,
        "moments": moments,
        "transition_law": law,
        "clt_params": clt,
    });
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Failure::Hard(format!("encoding predictions: {e}")))?;
    ctx.write_file("predictions.json", &format!("{text}\n"))?;

    let mut params = BTreeMap::new();
    params.insert("j".to_string(), j.to_string());
    params.insert("b".to_string(), b.to_string());
    params.insert("w2".to_string(), w2.to_string());
    params.insert("w3".to_string(), w3.to_string());
    params.insert("w4".to_string(), w4.to_string());
    params.insert("phi".to_string(), phis.join(", "));
    ctx.write_manifest("predict", &params)
}
