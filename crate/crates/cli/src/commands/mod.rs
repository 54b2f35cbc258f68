pub mod density;
pub mod experiment;
pub mod oracle;
pub mod phase;
pub mod predict;

use sskcw::ensembles::{make_two_point, EntryDistribution};

use crate::{usage, Failure};

/// Entry law tokens: goe, gaussian, rademacher, or two_point:<w3>.
pub fn parse_dist(token: &str) -> Result<EntryDistribution, Failure> {
    match token {
        "goe" => Ok(EntryDistribution::goe()),
        "gaussian" => Ok(EntryDistribution::gaussian()),
        "rademacher" => Ok(EntryDistribution::rademacher()),
        other => {
            if let Some(w3) = other.strip_prefix("two_point:") {
                let w3: f64 = w3
                    .parse()
                    .map_err(|_| usage(format!("dist: bad third moment in {other:?}")))?;
                return Ok(make_two_point(w3));
            }
            Err(usage(format!(
                "dist: expected goe, gaussian, rademacher or two_point:<w3>, found {other:?}"
            )))
        }
    }
}

/// Comma list from an optional flag value, e.g. --phi g,x2.
pub fn split_flag_list(flag: &Option<String>) -> Option<Vec<String>> {
    flag.as_ref().map(|v| {
        v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
    })
}
