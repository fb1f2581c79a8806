#![allow(dead_code)]

use std::sync::Arc;

use pfrac::fem::FeSpace;
use pfrac::material::{Material, MaterialParams};
use pfrac::mesh;

pub fn params() -> MaterialParams {
    MaterialParams { mu: 100.0, lambda: 150.0, sigma_ts: 1.0, sigma_hs: 1.2, g_c: 0.002, eps: 0.05, eta_eps: 1e-5, delta_eps: 1.0 }
}

pub fn material() -> Material {
    Material::new(params()).unwrap()
}

/// Unit square with uneven spacing in both directions.
pub fn irregular_square(n: usize) -> FeSpace {
    let lines: Vec<f64> = (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            t + 0.15 * (std::f64::consts::PI * t).sin() * (1.0 - t) * 0.5
        })
        .collect();
    FeSpace::new(Arc::new(mesh::generate_tensor_grid(&lines, &lines).unwrap()))
}

pub fn rect_space(w: f64, h: f64, nx: usize, ny: usize) -> FeSpace {
    FeSpace::new(Arc::new(mesh::generate_rect(w, h, nx, ny).unwrap()))
}
