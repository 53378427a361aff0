use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::measures::{
    check_pct, hit_ratio_at_k, ndcg_at_k, precision_at_pct, rmse, user_precision, RelevanceTies,
};
use super::protocol::{leave_one_out_lists, rating_candidates, rating_pairs};
use crate::data::InteractionMatrix;
use crate::error::{Error, Result};
use crate::model::Hypothesis;
use crate::numerics::Real;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Rmse,
    Precision,
    Hr,
    Ndcg,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Rmse, Metric::Precision, Metric::Hr, Metric::Ndcg];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Rmse => "rmse",
            Metric::Precision => "precision",
            Metric::Hr => "hr",
            Metric::Ndcg => "ndcg",
        }
    }

    pub fn is_ranking(self) -> bool {
        matches!(self, Metric::Hr | Metric::Ndcg)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Metric parameters, recorded verbatim in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSettings {
    pub metrics: Vec<Metric>,
    #[serde(default = "default_p_pct")]
    pub p_pct: f64,
    #[serde(default)]
    pub ties: RelevanceTies,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_negatives")]
    pub num_negatives: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub per_user: bool,
}

fn default_p_pct() -> f64 {
    25.0
}

fn default_k() -> usize {
    10
}

fn default_negatives() -> usize {
    99
}

impl EvalSettings {
    pub fn new(metrics: Vec<Metric>) -> Self {
        EvalSettings {
            metrics,
            p_pct: default_p_pct(),
            ties: RelevanceTies::default(),
            k: default_k(),
            num_negatives: default_negatives(),
            seed: 0,
            per_user: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.metrics.is_empty() {
            return Err(Error::Config("no metrics requested".into()));
        }
        check_pct(self.p_pct)?;
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if self.metrics.iter().any(|m| m.is_ranking()) && self.num_negatives + 1 < self.k {
            return Err(Error::Config(format!(
                "{} negatives cannot fill a top-{} list",
                self.num_negatives, self.k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserScore {
    pub user: u32,
    pub metric: Metric,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Split protocol the held-out data came from.
    pub split: String,
    pub settings: EvalSettings,
    pub scores: BTreeMap<Metric, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_user: Vec<UserScore>,
}

impl EvalReport {
    pub fn score(&self, metric: Metric) -> Option<f64> {
        self.scores.get(&metric).copied()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `metric,value` rows.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["metric", "value"])?;
        for (m, v) in &self.scores {
            w.write_record([m.name(), &format!("{v:.12}")])?;
        }
        finish_csv(w)
    }

    /// `user,metric,value` rows.
    pub fn per_user_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["user", "metric", "value"])?;
        for s in &self.per_user {
            w.write_record([s.user.to_string(), s.metric.name().into(), format!("{:.12}", s.value)])?;
        }
        finish_csv(w)
    }

    /// Writes `report.json`, `report.csv` and, when present, `per_user.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let put = |name: &str, text: String| {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
        };
        put("report.json", self.to_json()?)?;
        put("report.csv", self.to_csv()?)?;
        if !self.per_user.is_empty() {
            put("per_user.csv", self.per_user_csv()?)?;
        }
        Ok(())
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::io("csv buffer", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Scores `h` on `heldout`. Ranking negatives avoid every item of the user
/// in `observed` and are drawn from the evaluation stream of
/// `settings.seed`.
pub fn evaluate<T: Real>(
    h: &Hypothesis<T>,
    observed: &InteractionMatrix,
    heldout: &InteractionMatrix,
    split: &str,
    settings: &EvalSettings,
) -> Result<EvalReport> {
    settings.validate()?;
    let mut scores = BTreeMap::new();
    let mut per_user = Vec::new();
    let wants = |m: Metric| settings.metrics.contains(&m);

    if wants(Metric::Rmse) {
        scores.insert(Metric::Rmse, rmse(&rating_pairs(h, heldout)?)?);
        if settings.per_user {
            for j in (0..heldout.num_users()).filter(|&j| heldout.row_len(j) > 0) {
                let pairs: Vec<(f64, f64)> = heldout
                    .row(j)
                    .iter()
                    .map(|e| Ok((e.value, h.score(j, e.item as usize)?.as_f64())))
                    .collect::<Result<_>>()?;
                per_user.push(UserScore { user: j as u32, metric: Metric::Rmse, value: rmse(&pairs)? });
            }
        }
    }
    if wants(Metric::Precision) {
        let candidates = rating_candidates(h, heldout)?;
        scores.insert(Metric::Precision, precision_at_pct(&candidates, settings.p_pct, settings.ties)?);
        if settings.per_user {
            for c in &candidates {
                if let Some(value) = user_precision(c, settings.p_pct, settings.ties)? {
                    per_user.push(UserScore { user: c.user, metric: Metric::Precision, value });
                }
            }
        }
    }
    if wants(Metric::Hr) || wants(Metric::Ndcg) {
        let mut rng = rng::stream(settings.seed, Stream::Eval);
        let lists = leave_one_out_lists(h, observed, heldout, settings.num_negatives, &mut rng)?;
        for metric in [Metric::Hr, Metric::Ndcg] {
            if !wants(metric) {
                continue;
            }
            let score = match metric {
                Metric::Hr => hit_ratio_at_k(&lists, settings.k)?,
                _ => ndcg_at_k(&lists, settings.k)?,
            };
            scores.insert(metric, score);
            if settings.per_user {
                for l in &lists {
                    let value = match metric {
                        Metric::Hr => l.hit(settings.k),
                        _ => l.ndcg(settings.k),
                    };
                    per_user.push(UserScore { user: l.user, metric, value });
                }
            }
        }
    }
    Ok(EvalReport {
        split: split.into(),
        settings: settings.clone(),
        scores,
        per_user,
    })
}
