//! Built-in configurations reproducing the reference figures.

use std::f64::consts::PI;

use crate::field::BeamParams;

use super::config::{DEFAULT_CHANNELS, DEFAULT_FOCAL_LENGTH, DEFAULT_WAVELENGTH};

pub const PRESETS: &[(&str, &str)] = &[
    ("grover", "lossless pulsed search, single centred oracle, N = 400"),
    ("fig2a", "two-mode steady state, chi = 0.05, t = 0.15 (resolved doublet)"),
    ("fig2b", "two-mode steady state, chi = 0.05, t = 0.5 (bad cavity)"),
    ("fig4", "pulsed search with 50 % round-trip loss, single oracle"),
    ("fig5", "pulsed search with 50 % round-trip loss, three oracle spots"),
    ("fig6", "steady-state scan, g = 0.75, 150 um apertures on and beside the solution"),
    ("fig6-empty", "fig6 with the oracle plate removed"),
];

fn spot_radius() -> f64 {
    BeamParams::from_channels(DEFAULT_WAVELENGTH, DEFAULT_FOCAL_LENGTH, DEFAULT_CHANNELS)
        .expect("default beam is valid")
        .spot_radius
}

/// Excess loss that brings `R = 0.9` mirrors to round-trip power `g^2`.
fn excess_for(g2: f64) -> f64 {
    1.0 - g2 / 0.81
}

fn fig6(with_oracle: bool) -> String {
    let rs = spot_radius();
    let oracle = if with_oracle { "" } else { "[oracle]\nspots = []\n\n" };
    format!(
        "kind = \"scan\"\n\n{oracle}[loss]\nreflectivity = 0.9\nexcess = {excess}\n\n\
         [run]\nsnapshots = 1\n\n\
         [[run.probes]]\nname = \"on\"\ncenter = [0.0, 0.0]\nradius = 7.5e-5\n\n\
         [[run.probes]]\nname = \"off\"\ncenter = [{off}, 0.0]\nradius = 7.5e-5\n",
        excess = excess_for(0.75 * 0.75),
        off = 3.5 * rs,
    )
}

/// Configuration text of a named preset.
pub fn preset(name: &str) -> Option<String> {
    let rs = spot_radius();
    let lossy = format!("[loss]\nreflectivity = 0.9\nexcess = {}\n", excess_for(0.5));
    Some(match name {
        "grover" => "kind = \"pulse\"\n\n[run]\nround_trips = 40\n".to_string(),
        "fig2a" => "kind = \"twomode\"\n\n[twomode]\nchi = 0.05\nt = 0.15\n".to_string(),
        "fig2b" => "kind = \"twomode\"\n\n[twomode]\nchi = 0.05\nt = 0.5\n".to_string(),
        "fig4" => format!("kind = \"pulse\"\n\n{lossy}\n[run]\nround_trips = 8\nsnapshots = 1\n"),
        "fig5" => {
            let r = 3.0 * rs;
            let spots: String = (0..3)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / 3.0;
                    format!("[[oracle.spots]]\nx = {}\ny = {}\n\n", r * a.cos(), r * a.sin())
                })
                .collect();
            format!("kind = \"pulse\"\n\n{spots}{lossy}\n[run]\nround_trips = 8\nsnapshots = 1\n")
        }
        "fig6" => fig6(true),
        "fig6-empty" => fig6(false),
        _ => return None,
    })
}
