//! Regenerates `fixtures/offdiag_threshold.json`, the oracle-derived bound
//! used by the four-photon off-diagonal acceptance check:
//!
//! ```text
//! cargo test -p kpo-sweep --test offdiag_fixture -- --ignored
//! ```
//!
//! The oracle is run where the stationary off-diagonal elements change `|Γ|`
//! the most. The threshold is `FACTOR` times the largest `||Γ_oracle| − |Γ_modified||`
//! found there, so the effect has to stand well clear of the modified
//! method's own error.

use kpo_core::model::{coupling_matrices, eigensystem_at};
use kpo_core::spectrum::{Measurement, Method, SpectrumContext};
use kpo_core::steady::{steady_state, SteadyOptions};
use kpo_core::{DriveKind, KpoModel, LossSpec};
use kpo_sweep::config::{linspace, OracleBlock};
use kpo_sweep::run::compare_with_oracle;
use serde_json::json;

const FACTOR: f64 = 10.0;
const DIM: usize = 12;
const PUMP: f64 = 0.5;
const POINTS: usize = 3;

#[test]
#[ignore = "runs the time-domain oracle for a few minutes"]
fn regenerate_offdiag_threshold() {
    let model = KpoModel::new(DriveKind::FourPhoton, 15.0, 10.0, PUMP, DIM).unwrap();
    let loss = LossSpec::new(1.0, 0.1).unwrap();
    let eig = eigensystem_at(&model).unwrap();
    let c = coupling_matrices(&eig, DIM).unwrap();
    let s = steady_state(&eig, &loss, DIM, &SteadyOptions::default()).unwrap();
    let ctx = SpectrumContext::new(c, s, loss, Measurement::Reflection).unwrap();

    let grid = linspace(-40.0, 30.0, 701);
    let full = ctx.trace(Method::Modified, &grid).unwrap().magnitudes();
    let zeroed = ctx.trace(Method::ModifiedZeroedOffdiag, &grid).unwrap().magnitudes();
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| (full[b] - zeroed[b]).abs().total_cmp(&(full[a] - zeroed[a]).abs()));
    let mut picked: Vec<usize> = Vec::new();
    for i in order {
        if picked.iter().all(|&j| (grid[i] - grid[j]).abs() > 1.0) {
            picked.push(i);
        }
        if picked.len() == POINTS {
            break;
        }
    }

    let block = OracleBlock { periods: 40, ..OracleBlock::default() };
    let mut discrepancy = 0.0f64;
    let mut rows = Vec::new();
    for &i in &picked {
        let cmp = compare_with_oracle(&ctx, &block, PUMP, grid[i]).unwrap();
        let d = (cmp.gamma_oracle.norm() - cmp.gamma_modified.norm()).abs();
        discrepancy = discrepancy.max(d);
        rows.push(json!({
            "omega_in_over_2pi_MHz": grid[i],
            "abs_gamma_modified": cmp.gamma_modified.norm(),
            "abs_gamma_oracle": cmp.gamma_oracle.norm(),
            "abs_gamma_zeroed_offdiag": zeroed[i],
            "rk4_steps": cmp.steps,
        }));
        eprintln!("{:?}", rows.last().unwrap());
    }

    let out = json!({
        "kind": "four-photon",
        "delta_over_2pi_MHz": 15.0,
        "kerr_over_2pi_MHz": 10.0,
        "p_over_2pi_MHz": PUMP,
        "kappa_ex_over_2pi_MHz": 1.0,
        "kappa_int_over_2pi_MHz": 0.1,
        "dim": DIM,
        "amplitude_ratio": block.amplitude_ratio,
        "periods": block.periods,
        "factor": FACTOR,
        "oracle_discrepancy": discrepancy,
        "threshold": FACTOR * discrepancy,
        "points": rows,
    });
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/offdiag_threshold.json");
    std::fs::write(path, serde_json::to_string_pretty(&out).unwrap() + "\n").unwrap();
}
