use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ExDosModel, Polarity};
use crate::corpus::FeatureGroup;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub cluster: usize,
    pub polarity: Polarity,
    /// Feature group name; features outside the fixed schema fall under `other`.
    pub group: String,
    pub mean_weight: f64,
    /// Number of features averaged.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub rows: Vec<ImportanceRow>,
}

impl FeatureImportance {
    /// Group means pooled over every cluster of the given polarity.
    pub fn by_polarity(&self, polarity: Polarity) -> BTreeMap<String, f64> {
        let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.polarity == polarity) {
            let e = acc.entry(r.group.clone()).or_default();
            e.0 += r.mean_weight * r.count as f64;
            e.1 += r.count;
        }
        acc.into_iter().map(|(g, (s, n))| (g, s / n as f64)).collect()
    }
}

fn group_name(feature: &str) -> &'static str {
    FeatureGroup::of(feature).map_or("other", FeatureGroup::name)
}

/// Mean weight of each feature group within each cluster.
pub fn feature_importance(model: &ExDosModel) -> FeatureImportance {
    let mut rows = Vec::new();
    for (k, w) in model.weights.iter().enumerate() {
        let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for (j, &wj) in w.iter().enumerate() {
            let name = model.feature_names.get(j).map_or("other", |n| group_name(n));
            let e = acc.entry(name).or_default();
            e.0 += wj;
            e.1 += 1;
        }
        rows.extend(acc.into_iter().map(|(g, (s, n))| ImportanceRow {
            cluster: k,
            polarity: model.polarity[k],
            group: g.to_string(),
            mean_weight: s / n as f64,
            count: n,
        }));
    }
    FeatureImportance { rows }
}
