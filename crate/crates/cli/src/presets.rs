use fblab_core::nonlinearity::Weight;
use fblab_core::verification::Thresholds;
use fblab_core::NonlinearityModel;

use crate::config::{DomainConfig, RunConfig, RunSection, ScheduleConfig, SolverConfig, SweepConfig};

pub const NAMES: [&str; 4] = ["square_p4", "sum_of_powers", "weighted_power", "critical_radial"];

fn square(name: &str, n: usize, model: NonlinearityModel, nehari: bool) -> RunConfig {
    RunConfig {
        name: name.into(),
        domain: DomainConfig::Box {
            nx: n,
            ny: n,
            x_range: [-1.0, 1.0],
            y_range: [-1.0, 1.0],
        },
        model,
        schedule: ScheduleConfig::default(),
        solver: SolverConfig {
            nehari,
            ..SolverConfig::default()
        },
        verify: Thresholds::default(),
        run: RunSection::default(),
        sweep: None,
    }
}

pub fn preset(name: &str) -> Option<RunConfig> {
    Some(match name {
        "square_p4" => square(name, 129, NonlinearityModel::PurePower { p: 4.0 }, true),
        "sum_of_powers" => square(
            name,
            129,
            NonlinearityModel::SumOfPowers {
                exponents: vec![3.0, 4.0],
            },
            false,
        ),
        "weighted_power" => square(
            name,
            129,
            NonlinearityModel::WeightedPower {
                mu: 3.0,
                weight: Weight::SpatialAffine {
                    a3: 1.0,
                    a4: 1.0,
                    p: 4.0,
                },
            },
            false,
        ),
        "critical_radial" => {
            let mut c = square(
                name,
                513,
                NonlinearityModel::CriticalCombo {
                    kappa: 0.1,
                    lambda: 1.0,
                    mu: 3.0,
                    dim: 3,
                },
                false,
            );
            c.domain = DomainConfig::Radial {
                dim: 3,
                radius: 1.0,
                n: 513,
            };
            // geometric κ axis; the critical level verdict marks the breakdown
            c.sweep = Some(SweepConfig {
                parameter: "model.kappa".into(),
                values: [0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 50.0, 100.0, 500.0, 1e3, 5e3, 1e4, 2e4, 5e4, 1e5]
                    .iter()
                    .map(|&k| toml::Value::Float(k))
                    .collect(),
            });
            c
        }
        _ => return None,
    })
}

pub fn all() -> Vec<RunConfig> {
    NAMES.iter().map(|n| preset(n).unwrap()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for c in all() {
            let text = c.to_toml_string();
            let back = RunConfig::from_toml_str(&text).unwrap();
            assert_eq!(back, c);
            back.validate().unwrap();
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn sweep_values_rebuild_valid_configs() {
        let c = preset("critical_radial").unwrap();
        let sw = c.sweep.clone().unwrap();
        for v in &sw.values {
            let one = c.with_parameter(&sw.parameter, v).unwrap();
            assert!(one.sweep.is_none());
            one.validate().unwrap();
        }
    }
}
