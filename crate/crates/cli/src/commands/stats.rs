use ridgeline::correspondence::{centroid_size, gpa};
use ridgeline::shapestats::{pca as principal_components, perm_test_component, perm_test_hotelling, perm_test_t, PcaResult};
use serde_json::{json, Value};

use super::require;
use crate::error::{CliError, CliResult};
use crate::output::Output;
use crate::samples::ModelSet;
use crate::settings::{Metric, Settings};

fn load(s: &Settings) -> CliResult<(ModelSet, PcaResult, Vec<f64>)> {
    let set = ModelSet::load(require(&s.inputs.models, "inputs.models", "--models")?)?;
    let configs = set.configs();
    let sizes = configs.iter().map(|c| centroid_size(c)).collect();
    let aligned = gpa(&configs, s.stats.scale.unwrap_or(true))?.aligned;
    let res = principal_components(&aligned)?;
    Ok((set, res, sizes))
}

pub fn pca(s: &Settings, out: &mut Output) -> CliResult<Value> {
    let (set, res, sizes) = load(s)?;
    let variance = s.stats.variance.unwrap_or(0.9);
    let q = res.components_for(variance);
    let r = res.eigenvalues.len();
    let mut csv = String::from("name,group,centroid_size");
    for k in 1..=r {
        csv.push_str(&format!(",pc{k}"));
    }
    csv.push('\n');
    for (i, m) in set.models.iter().enumerate() {
        csv.push_str(&format!("{},{},{}", m.name, m.group.as_deref().unwrap_or(""), sizes[i]));
        for k in 0..r {
            csv.push_str(&format!(",{}", res.scores[(i, k)]));
        }
        csv.push('\n');
    }
    out.write_text("scores.csv", &csv)?;
    let report = json!({
        "configurations": set.models.len(),
        "points": set.labels.len(),
        "scaled": s.stats.scale.unwrap_or(true),
        "variance_target": variance,
        "components_for_target": q,
        "eigenvalues": res.eigenvalues,
        "cumulative_variance": res.cumulative_variance,
        "mean": res.mean,
    });
    out.write_json("pca.json", &report)?;
    Ok(json!({ "components": r, "components_for_target": q }))
}

pub fn permtest(s: &Settings, out: &mut Output) -> CliResult<Value> {
    let (set, res, sizes) = load(s)?;
    let (labels, groups) = set.binary_labels()?;
    let metric = s.stats.metric.ok_or_else(|| CliError::config("stats.metric", "required (pass --metric)"))?;
    let perms = s.stats.perms.unwrap_or(1000);
    let seed = s.seed();
    let mut report = json!({ "metric": metric, "groups": groups, "n_perm": perms, "seed": seed });
    let test = match metric {
        Metric::Size => perm_test_t(&sizes, &labels, perms, seed)?,
        Metric::Hotelling => {
            let q = s.stats.q.unwrap_or_else(|| res.components_for(s.stats.variance.unwrap_or(0.9)));
            if q > res.eigenvalues.len() {
                return Err(CliError::config(
                    "stats.q",
                    format!("{q} components requested, the sample has {}", res.eigenvalues.len()),
                ));
            }
            report["q"] = json!(q);
            perm_test_hotelling(&res.leading_scores(q), &labels, perms, seed)?
        }
        Metric::Component => {
            let k = s.stats.component.ok_or_else(|| CliError::config("stats.component", "required (pass --component)"))?;
            if k > res.eigenvalues.len() {
                return Err(CliError::config(
                    "stats.component",
                    format!("component {k} requested, the sample has {}", res.eigenvalues.len()),
                ));
            }
            report["component"] = json!(k);
            perm_test_component(&res.component_scores(k - 1), &labels, perms, seed)?
        }
    };
    report["statistic"] = json!(test.statistic);
    report["p_value"] = json!(test.p_value);
    out.write_json("permtest.json", &report)?;
    Ok(json!({ "p_value": test.p_value }))
}
