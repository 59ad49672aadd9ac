use std::f64::consts::FRAC_PI_2;

/// Uniform panel count for the composite Simpson rule.
pub const SIMPSON_PANELS: usize = 1024;

fn simpson_weight(i: usize) -> f64 {
    if i == 0 || i == SIMPSON_PANELS {
        1.0
    } else if i % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

/// ∫₀^θ sinᵖ(x) dx by composite Simpson on [`SIMPSON_PANELS`] panels, with
/// θ clamped into [0, π/2].
pub fn sin_power_integral(p: u32, theta_max: f64) -> f64 {
    let theta = clamp_angle(theta_max);
    if theta == 0.0 {
        return 0.0;
    }
    let h = theta / SIMPSON_PANELS as f64;
    let sum: f64 = (0..=SIMPSON_PANELS)
        .map(|i| simpson_weight(i) * (i as f64 * h).sin().powi(p as i32))
        .sum();
    sum * h / 3.0
}

/// The two integrals behind the anisotropic weights, from one Simpson pass:
/// `(∫₀^θ sin^{d̄−2}x·cos²x dx, ∫₀^θ sin^{d̄}x dx)`.
///
/// The first equals `∫ sin^{d̄−2} − sin^{d̄}`; integrating the product form
/// avoids cancellation at small angles. Sines and cosines on the grid come
/// from an angle-addition recurrence.
pub fn aniso_integrals(dbar: u32, theta_max: f64) -> (f64, f64) {
    debug_assert!(dbar >= 2);
    let theta = clamp_angle(theta_max);
    if theta == 0.0 {
        return (0.0, 0.0);
    }
    let h = theta / SIMPSON_PANELS as f64;
    let (step_sin, step_cos) = h.sin_cos();
    let low = (dbar - 2) as i32;
    let (mut s, mut c) = (0.0f64, 1.0f64);
    let (mut par, mut bot) = (0.0, 0.0);
    for i in 0..=SIMPSON_PANELS {
        if i % 64 == 0 {
            // Re-anchor to keep recurrence drift negligible.
            (s, c) = (i as f64 * h).sin_cos();
        }
        let w = simpson_weight(i);
        let sp = s.powi(low);
        par += w * sp * c * c;
        bot += w * sp * s * s;
        (s, c) = (s * step_cos + c * step_sin, c * step_cos - s * step_sin);
    }
    (par * h / 3.0, bot * h / 3.0)
}

fn clamp_angle(theta: f64) -> f64 {
    if theta.is_nan() {
        0.0
    } else {
        theta.clamp(0.0, FRAC_PI_2)
    }
}
