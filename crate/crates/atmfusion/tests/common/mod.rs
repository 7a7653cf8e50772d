#![allow(dead_code)]

use atmfusion::ExperimentConfig;

/// 8 ATMs over a week with frequent two-hour outages and small ensembles:
/// enough down instances for SMOTE and the DSEL, quick to train.
pub const SMALL_TOML: &str = r#"
[sim]
n_atms = 8
horizon_days = 7
seed = 3

[profile]
down_prevalence = 0.05
mean_outage_s = 7200.0

[models.forest]
n_trees = 15

[models.bagging]
n_estimators = 10

[models.lgbm]
n_rounds = 15

[models.cat]
n_rounds = 15
"#;

pub fn small_config() -> ExperimentConfig {
    ExperimentConfig::from_toml(SMALL_TOML, "<small>").unwrap()
}
