#![allow(dead_code)]

use std::sync::Arc;

use scale_picard::kimura::{
    kimura_setup, CorrelationHierarchy, DiscreteSpace, KimuraModel, KimuraSetup, Profile, RateData,
    Slope,
};
use scale_picard::scale::{Radius, ScaleWindow};

pub struct Desk {
    pub name: &'static str,
    pub model: Arc<KimuraModel>,
    pub rho0: Vec<f64>,
    pub radius: f64,
}

impl Desk {
    pub fn k0(&self) -> CorrelationHierarchy {
        self.model.poisson(&self.rho0).unwrap()
    }

    pub fn window(&self) -> ScaleWindow {
        ScaleWindow::new(0.0, 0.5, 1.0, 0.0, 0.5, 1.0, Radius::Finite(self.radius), 1.0).unwrap()
    }

    pub fn setup(&self) -> KimuraSetup {
        kimura_setup(self.model.clone(), &self.k0(), &self.window(), Slope::Auto(2.0)).unwrap()
    }
}

fn model(m: usize, w: f64, rates: RateData, n_max: usize) -> Arc<KimuraModel> {
    Arc::new(KimuraModel::new(DiscreteSpace::uniform(m, w).unwrap(), rates, n_max, 1.0).unwrap())
}

pub fn epistatic() -> Desk {
    Desk {
        name: "desk-epistatic",
        model: model(4, 0.25, RateData::constant(1.0, 0.2, 0.5), 4),
        rho0: vec![0.5; 4],
        radius: 1.0,
    }
}

pub fn poisson() -> Desk {
    Desk {
        name: "desk-poisson",
        model: model(3, 0.25, RateData::constant(1.0, 0.0, 0.5), 3),
        rho0: vec![0.5; 3],
        radius: 1.0,
    }
}

pub fn smooth() -> Desk {
    let mut r = RateData::constant(0.1, 0.02, 0.05);
    r.h.profile = Profile::Sinusoidal {
        amplitude: 0.5,
        frequency: 150.0,
        phase: 0.0,
    };
    Desk {
        name: "desk-smooth",
        model: model(4, 0.25, r, 4),
        rho0: vec![0.25; 4],
        radius: 0.25,
    }
}

pub fn all() -> Vec<Desk> {
    vec![poisson(), epistatic(), smooth()]
}

pub fn rel_dev(norm: &dyn scale_picard::scale::ScaleNorm, a: &[f64], b: &[f64], alpha: f64) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm.norm(&d, alpha) / norm.norm(b, alpha)
}
