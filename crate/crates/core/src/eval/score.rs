use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Decay rate making a single object's score 0.25 at 10 cm: `ln(4) / 0.10`.
pub const SCORE_DECAY: f64 = 2.0 * LN_2 / 0.10;

/// Per-goal score: `sum_o exp(-c * |target_o - final_o|)` over 3D positions.
pub fn goal_score(targets: &[[f64; 3]], finals: &[[f64; 3]]) -> Result<f64> {
    if targets.len() != finals.len() || targets.is_empty() {
        return Err(Error::CountMismatch {
            targets: targets.len(),
            finals: finals.len(),
        });
    }
    Ok(targets
        .iter()
        .zip(finals)
        .map(|(t, f)| {
            let d = ((t[0] - f[0]).powi(2) + (t[1] - f[1]).powi(2) + (t[2] - f[2]).powi(2)).sqrt();
            (-SCORE_DECAY * d).exp()
        })
        .sum())
}
