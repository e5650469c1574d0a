//! Grid quadrature of the weight-concentration ratio
//! P(w, f) = (∫ w f)² / ∫ w² f for w = N(p, I), f = N(0, I) in two dimensions.

use crate::OracleError;

fn density2(x: f64, y: f64, px: f64, py: f64) -> f64 {
    ((-(x - px).powi(2) - (y - py).powi(2)) / 2.0).exp() / (2.0 * std::f64::consts::PI)
}

fn ratio_at_step(p: [f64; 2], half_width: f64, step: f64) -> f64 {
    let cells = (2.0 * half_width / step).round() as usize;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..cells {
        let x = -half_width + (i as f64 + 0.5) * step;
        for j in 0..cells {
            let y = -half_width + (j as f64 + 0.5) * step;
            let w = density2(x, y, p[0], p[1]);
            let f = density2(x, y, 0.0, 0.0);
            num += w * f;
            den += w * w * f;
        }
    }
    let area = step * step;
    (num * area).powi(2) / (den * area)
}

/// Midpoint-rule value of P(N(p,I), N(0,I)) on [−half_width, half_width]²,
/// checked against a run at half the step.
pub fn quadrature_p(p: [f64; 2], half_width: f64, step: f64) -> Result<f64, OracleError> {
    if !(step > 0.0) || !(half_width > 0.0) {
        return Err(OracleError::Invalid("grid step and width must be positive".into()));
    }
    let coarse = ratio_at_step(p, half_width, step);
    let fine = ratio_at_step(p, half_width, step / 2.0);
    let change = (coarse - fine).abs();
    if change > 1e-3 {
        return Err(OracleError::NotConverged(change));
    }
    Ok(fine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_value_is_three_quarters() {
        let v = quadrature_p([0.0, 0.0], 8.0, 0.05).unwrap();
        assert!((v - 0.75).abs() < 1e-4, "{v}");
    }

    #[test]
    fn normalized_value_at_norm_sq_six() {
        let s = 3.0f64.sqrt();
        let v = quadrature_p([s, s], 8.0, 0.05).unwrap() / quadrature_p([0.0, 0.0], 8.0, 0.05).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-3, "{v}");
    }

    #[test]
    fn refinement_is_stable() {
        let a = ratio_at_step([0.5, -1.0], 8.0, 0.1);
        let b = ratio_at_step([0.5, -1.0], 8.0, 0.05);
        assert!((a - b).abs() < 1e-4);
    }

    #[test]
    fn coarse_grid_is_flagged() {
        assert!(matches!(quadrature_p([0.0, 0.0], 8.0, 4.0), Err(OracleError::NotConverged(_))));
    }
}
