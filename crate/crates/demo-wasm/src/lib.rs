//! Browser bindings for three qheat operations: the eigenmodes of `L`, the
//! mass of a forward run and a source recovery from noisy mass data.

use qheat::cli::{run, Command, RunConfig};
use qheat::{find_eigenvalues, solve_forward, QParams, ScalarFn, SourceSpec};
use wasm_bindgen::prelude::*;

/// Curves sharing one abscissa.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    x: Vec<f64>,
    series: Vec<Vec<f64>>,
    labels: Vec<String>,
    note: String,
}

#[wasm_bindgen]
impl Plot {
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    pub fn count(&self) -> usize {
        self.series.len()
    }

    pub fn series(&self, i: usize) -> Vec<f64> {
        self.series.get(i).cloned().unwrap_or_default()
    }

    pub fn label(&self, i: usize) -> String {
        self.labels.get(i).cloned().unwrap_or_default()
    }

    pub fn note(&self) -> String {
        self.note.clone()
    }
}

fn context(q: f64) -> Result<QParams, String> {
    QParams::with_q(q).map_err(|e| e.to_string())
}

/// Orthonormal eigenfunctions `φ̃_1..φ̃_count` on the q-lattice of `[0, 1]`.
pub fn eigenmode_plot(q: f64, count: usize) -> Result<Plot, String> {
    let ctx = context(q)?;
    let spec = find_eigenvalues(&ctx, count).map_err(|e| e.to_string())?;
    let mut x = spec.space_lattice().points().to_vec();
    x.reverse();
    let mut series = Vec::new();
    let mut labels = Vec::new();
    for k in 1..=spec.len() {
        let mut s = spec.basis_samples(k).to_vec();
        s.reverse();
        series.push(s);
        labels.push(format!("k={k}  λ={:.6}", spec.lambdas()[k - 1]));
    }
    Ok(Plot {
        x,
        series,
        labels,
        note: format!("{} eigenvalues at q = {q}", spec.len()),
    })
}

/// Mass and modal norm of the solution with `φ = x(1 - x)`, `f ≡ 1`,
/// `v ≡ amplitude`, against time.
pub fn forward_plot(q: f64, amplitude: f64) -> Result<Plot, String> {
    let ctx = context(q)?;
    let spec = find_eigenvalues(&ctx, 6).map_err(|e| e.to_string())?;
    let v = ScalarFn::constant(0.0, 1.0, amplitude).map_err(|e| e.to_string())?;
    let src = SourceSpec::new(|_, _| 1.0, v, 1.0).map_err(|e| e.to_string())?;
    let phi = ScalarFn::on_unit(|x| x * (1.0 - x));
    let bundle = solve_forward(&phi, &src, &spec, &ctx).map_err(|e| e.to_string())?;
    let mut x = bundle.time_lattice().points().to_vec();
    let mut mass = bundle.mass().to_vec();
    let mut norm: Vec<f64> = bundle.modal_u_all().iter().map(|m| m.l2_norm()).collect();
    x.reverse();
    mass.reverse();
    norm.reverse();
    Ok(Plot {
        x,
        series: vec![mass, norm],
        labels: vec!["mass ∫u d_qx".into(), "‖u(t)‖".into()],
        note: format!("source amplitude {amplitude}, q = {q}"),
    })
}

/// True and recovered `v(t) = 1 + t/2` from mass data with relative noise.
pub fn source_plot(q: f64, noise: f64, seed: u64) -> Result<Plot, String> {
    let mut config = RunConfig {
        command: Some(Command::InverseSource),
        q,
        scenario: Some("affine-v".into()),
        seed,
        ..RunConfig::default()
    };
    if noise > 0.0 {
        config.noise = Some(noise);
    }
    let outcome = run(&config).map_err(|e| e.to_string())?;
    let mut x = Vec::new();
    let mut truth = Vec::new();
    let mut recovered = Vec::new();
    for row in outcome.table.rows.iter().rev() {
        let cell = |i: usize| row[i].parse::<f64>().map_err(|e| e.to_string());
        x.push(cell(0)?);
        truth.push(cell(1)?);
        recovered.push(cell(2)?);
    }
    Ok(Plot {
        x,
        series: vec![truth, recovered],
        labels: vec!["v true".into(), "v recovered".into()],
        note: format!("max abs error {:.3e}", outcome.max_err),
    })
}

#[wasm_bindgen]
pub fn eigenmodes(q: f64, count: usize) -> Result<Plot, JsError> {
    eigenmode_plot(q, count).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn forward_mass(q: f64, amplitude: f64) -> Result<Plot, JsError> {
    forward_plot(q, amplitude).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn recover_source(q: f64, noise: f64, seed: u32) -> Result<Plot, JsError> {
    source_plot(q, noise, u64::from(seed)).map_err(|e| JsError::new(&e))
}
