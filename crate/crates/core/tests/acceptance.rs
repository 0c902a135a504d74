//! One pass/fail line per acceptance criterion, at the stated tolerances.

use std::path::Path;
use std::sync::Arc;

use scale_picard::config::ExperimentConfig;
use scale_picard::kimura::{KimuraSetup, KimuraModel, CorrelationHierarchy};
use scale_picard::linear::affine_problem;
use scale_picard::oracles::{bound_verifier, bruteforce_oracle, evolution_laws, poisson_oracle};
use scale_picard::scale::{Radius, ScaleNorm, ScaleWindow, weighted_gamma_distance};
use scale_picard::solver::{
    apriori_check, picard_solve, residual_check, ConvergenceReport, InitialIterate, SolverSettings,
    TriangleSolution,
};
use scale_picard::stability::{lambda1, loglog_slope, stability_experiment, PerturbedFamily};

struct Desk {
    name: &'static str,
    cfg: ExperimentConfig,
    setup: KimuraSetup,
    k0: CorrelationHierarchy,
    u: TriangleSolution,
    rep: ConvergenceReport,
}

impl Desk {
    fn model(&self) -> &Arc<KimuraModel> {
        &self.setup.model
    }
}

fn load(name: &'static str) -> Desk {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../../configs/{name}.json"));
    let cfg = ExperimentConfig::load(&path).unwrap().config;
    let (setup, k0) = cfg.setup().unwrap();
    let (u, rep) = picard_solve(&setup.problem, &setup.window, &cfg.solver).unwrap();
    Desk { name, cfg, setup, k0, u, rep }
}

fn rel(norm: &dyn ScaleNorm, a: &[f64], b: &[f64], alpha: f64) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm.norm(&d, alpha) / norm.norm(b, alpha)
}

type Outcome = (bool, String);

fn contraction(desks: &[Desk]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in desks {
        let worst = d.rep.ratios.iter().flatten().fold(0.0f64, |a, &r| a.max(r));
        ok &= d.rep.ratios.iter().flatten().all(|&r| r <= d.rep.rho + 1e-9);
        ok &= (d.rep.lambda - 2.0 * d.rep.lambda0.value).abs() <= 1e-12 * d.rep.lambda;
        parts.push(format!("{}: max ratio {worst:.3e} vs rho {:.3e}", d.name, d.rep.rho));
    }
    (ok, parts.join("; "))
}

fn geometric(desks: &[Desk]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in desks {
        let inc = &d.rep.increments;
        let d0 = inc[0];
        let mut worst = 0.0f64;
        for (k, &dk) in inc.iter().enumerate() {
            if dk < 1e-10 && k > 0 {
                break;
            }
            let bound = d.rep.rho.powi(k as i32) * d0 * (1.0 + 1e-6);
            ok &= dk <= bound;
            worst = worst.max(dk / bound);
        }
        parts.push(format!("{}: max d_k / (rho^k d_0) {worst:.3e}", d.name));
    }
    (ok, parts.join("; "))
}

fn apriori(desks: &[Desk]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in desks {
        let r = apriori_check(&d.setup.problem, &d.setup.window, &d.u, d.cfg.solver.tau_samples).unwrap();
        let iter_margin = d.rep.apriori_margins().into_iter().fold(f64::INFINITY, f64::min);
        ok &= r.margin >= 0.0 && iter_margin >= 0.0;
        parts.push(format!("{}: margin {:.3e} over {} samples", d.name, r.margin, r.samples));
    }
    (ok, parts.join("; "))
}

fn poisson_match(d: &Desk) -> Outcome {
    let model = d.model();
    let norm = model.norm();
    let alpha = d.setup.window.alpha_top;
    let rho0 = d.cfg.initial_density().unwrap();
    // the oracle is validated against brute force first, on [0, T] and on the solve grid
    let bf_long = bruteforce_oracle(model, &d.k0, model.horizon(), 200).unwrap();
    let mut validation = 0.0f64;
    for (t, v) in bf_long.times.iter().zip(&bf_long.values) {
        validation = validation.max(rel(&norm, v, poisson_oracle(model, &rho0, *t).unwrap().values(), alpha));
    }
    let bf = bruteforce_oracle(model, &d.k0, d.rep.grid_end, d.u.times().len() - 1).unwrap();
    let mut solve = 0.0f64;
    for (j, &t) in d.u.times().iter().enumerate() {
        let o = poisson_oracle(model, &rho0, t).unwrap();
        validation = validation.max(rel(&norm, &bf.values[j], o.values(), alpha));
        solve = solve.max(rel(&norm, d.u.value(j), o.values(), alpha));
    }
    let ok = validation <= 1e-8 && solve <= 1e-6;
    (ok, format!("{}: oracle vs brute force {validation:.3e}, solve vs oracle {solve:.3e}", d.name))
}

fn bruteforce_match(desks: &[&Desk]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in desks {
        let norm = d.model().norm();
        let end = d.rep.grid_end;
        ok &= (end - 0.9 * d.rep.solution_horizon).abs() <= 1e-12 * end;
        let bf = bruteforce_oracle(d.model(), &d.k0, end, d.u.times().len() - 1).unwrap();
        let worst = (0..d.u.times().len())
            .map(|j| rel(&norm, d.u.value(j), &bf.values[j], d.setup.window.alpha_top))
            .fold(0.0f64, f64::max);
        ok &= worst <= 1e-6;
        parts.push(format!("{}: {worst:.3e}", d.name));
    }
    (ok, parts.join("; "))
}

fn normalization(desks: &[Desk]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in desks {
        let worst = d.u.values().iter().fold(0.0f64, |a, v| a.max((v[0] - 1.0).abs()));
        ok &= worst <= 1e-12;
        parts.push(format!("{}: {worst:.3e}", d.name));
    }
    (ok, parts.join("; "))
}

fn evolution(desks: &[Desk]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in desks {
        let r = evolution_laws(d.model(), &d.setup.window, &d.setup.evolution, 100, 42).unwrap();
        ok &= r.failures().is_empty() && r.check("identity").unwrap().worst_ratio == 0.0;
        let c = r.check("cocycle").unwrap();
        let g = r.check("growth").unwrap();
        parts.push(format!(
            "{}: cocycle {:.3e}, growth ratio {:.3}, violations {}",
            d.name,
            c.worst_ratio * 1e-8,
            g.worst_ratio,
            c.violations + g.violations
        ));
    }
    (ok, parts.join("; "))
}

fn verifier(desks: &[Desk]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in desks {
        let run = || {
            bound_verifier(d.model(), &d.setup.window, &d.k0, &d.setup.problem.constants, &d.setup.evolution, 100, 42)
                .unwrap()
        };
        let a = run();
        let again = run();
        ok &= a.failures().is_empty() && a == again;
        let worst = a
            .checks
            .iter()
            .filter(|c| c.gating)
            .map(|c| format!("{} {:.2}", c.name, c.worst_ratio))
            .collect::<Vec<_>>()
            .join(" ");
        parts.push(format!("{}: {worst}", d.name));
    }
    (ok, parts.join("; "))
}

fn residual_order(d: &Desk) -> Outcome {
    let residual = |steps: usize| {
        let settings = SolverSettings { steps, ..d.cfg.solver.clone() };
        let (u, _) = picard_solve(&d.setup.problem, &d.setup.window, &settings).unwrap();
        residual_check(&d.setup.problem, &d.setup.window, &u).unwrap().max_residual
    };
    let r: Vec<f64> = [50, 100, 200].into_iter().map(residual).collect();
    let ratios = [r[0] / r[1], r[1] / r[2]];
    let ok = ratios.iter().all(|q| (3.5..=4.5).contains(q));
    (ok, format!("{}: residual ratios {:.3}, {:.3}", d.name, ratios[0], ratios[1]))
}

fn stability() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/stability-h-scale.json");
    let cfg = ExperimentConfig::load(&path).unwrap().config;
    let (family, window) = cfg.family().unwrap();
    let r = stability_experiment(&family, &window, window.alpha_top, cfg.solver.theta * window.solution_horizon(), &cfg.solver)
        .unwrap();
    let s: Vec<f64> = r.rows.iter().map(|r| r.deviation).collect();
    let first5 = s[..5].windows(2).all(|w| w[1] < w[0]);
    let tail = r.rows.windows(2).all(|w| w[1].deviation <= w[1].floor || w[1].deviation < w[0].deviation);
    let floor = r.rows.iter().position(|r| r.deviation <= r.floor);

    let base = ScaleWindow::new(0.0, 0.5, 1.0, 0.0, 0.5, 1.0, Radius::Infinite, 1.0).unwrap();
    let scalar = |x: f64| affine_problem(1.0, 0.5, vec![0.3, 0.3], vec![x, -2.0 * x], &base).unwrap();
    let ns = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    let sizes: Vec<f64> = ns.iter().map(|n| 2.0 / n).collect();
    let fam = PerturbedFamily::new(scalar(1.0), ns.iter().map(|n| scalar(1.0 + 1.0 / n)).collect(), sizes.clone()).unwrap();
    let w = base.with_lambda(2.0 * lambda1(&fam, &base).unwrap()).unwrap();
    let sr = stability_experiment(&fam, &w, 1.0, 0.9 * w.solution_horizon(), &SolverSettings::default()).unwrap();
    let slope = loglog_slope(&sizes, &sr.rows.iter().map(|r| r.deviation).collect::<Vec<_>>()).unwrap();

    let ok = first5 && tail && floor.is_some() && (slope - 1.0).abs() <= 0.1;
    let at = floor.map_or("never".to_string(), |i| format!("member {}", cfg.run.family.as_ref().unwrap().indices()[i]));
    (
        ok,
        format!(
            "h-family s_1..s_5 = {:.2e} .. {:.2e}, floor reached at {at}; scalar log-log slope {slope:.4}",
            s[0], s[4]
        ),
    )
}

fn uniqueness(desks: &[Desk]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in desks {
        let settings = SolverSettings { start: InitialIterate::Constant, ..d.cfg.solver.clone() };
        let (v, _) = picard_solve(&d.setup.problem, &d.setup.window, &settings).unwrap();
        let w = &d.setup.window;
        let dist = weighted_gamma_distance(&d.u, &v, w, w.gamma, &*d.setup.problem.scale).unwrap();
        let bound = 2.0 * d.cfg.solver.tol / (1.0 - d.rep.rho);
        ok &= dist <= bound;
        parts.push(format!("{}: {dist:.3e} <= {bound:.3e}", d.name));
    }
    (ok, parts.join("; "))
}

fn main() {
    let desks = vec![load("desk-poisson"), load("desk-epistatic"), load("desk-smooth")];
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("contraction certificate", Box::new(|| contraction(&desks))),
        ("geometric convergence", Box::new(|| geometric(&desks))),
        ("a-priori estimate", Box::new(|| apriori(&desks))),
        ("Poisson oracle match", Box::new(|| poisson_match(&desks[0]))),
        ("brute-force equivalence", Box::new(|| bruteforce_match(&[&desks[1], &desks[2]]))),
        ("normalization", Box::new(|| normalization(&desks))),
        ("evolution-system laws", Box::new(|| evolution(&desks))),
        ("operator bound verifier", Box::new(|| verifier(&desks))),
        ("residual order", Box::new(|| residual_order(&desks[2]))),
        ("stability", Box::new(stability)),
        ("uniqueness surrogate", Box::new(|| uniqueness(&desks))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = check();
        println!("{} {:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1);
        failed += usize::from(!ok);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
