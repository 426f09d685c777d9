#![allow(dead_code)]

pub mod properties;

use hdp_slds::dynamics::{
    set_hyperparameters_from_data, HyperPreset, MniwHyper, ModelShape,
};
use hdp_slds::gibbs::{ModelConfig, PriorFamily, Schedule};
use hdp_slds::hdp::{ConcentrationPrior, HdpPriors, StickinessPrior};
use hdp_slds::linalg::{Mat, Vector};

/// AR(1), d = 1, L = 3 with n0 = 10, S0 = 1, K = 10 and moderate HDP hyperpriors.
pub fn geweke_config() -> ModelConfig {
    let shape = ModelShape::Ar { d: 1, order: 1 };
    let dummy: Vec<Vector> = (0..10).map(|i| Vector::from_element(1, i as f64)).collect();
    let mut hypers = set_hyperparameters_from_data(&dummy, shape, HyperPreset::default()).unwrap();
    hypers.mniw = MniwHyper {
        m: Mat::zeros(1, 1),
        k: Mat::from_element(1, 1, 10.0),
        n0: 10.0,
        s0: Mat::from_element(1, 1, 1.0),
    };
    ModelConfig {
        hdp: HdpPriors {
            alpha_plus_kappa: ConcentrationPrior::Gamma { shape: 4.0, rate: 1.0 },
            gamma: ConcentrationPrior::Gamma { shape: 3.0, rate: 1.0 },
            rho: StickinessPrior::Beta { a: 5.0, b: 2.0 },
        },
        schedule: Schedule {
            iterations: 10,
            burn_in: 5,
            thin: 1,
            sequential_period: 0,
            inner_iterations: 1,
        },
        hypers,
        ..ModelConfig::from_data(&dummy, shape, PriorFamily::Mniw, 3).unwrap()
    }
}
