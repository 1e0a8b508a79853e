//! Dickman's function from the delay equation uρ'(u) = −ρ(u−1).

use std::sync::OnceLock;

/// Nodes per unit interval of the default table.
pub const DEFAULT_STEPS_PER_UNIT: usize = 4096;

/// Largest argument carried by the default table; beyond it ρ is reported as 0.
pub const DEFAULT_U_MAX: usize = 64;

/// ρ on the grid u = j/n for 0 ≤ j ≤ n·u_max.
#[derive(Debug, Clone)]
pub struct DickmanTable {
    steps_per_unit: usize,
    u_max: usize,
    values: Vec<f64>,
}

impl DickmanTable {
    /// Integrates ρ(u) = ρ(m) − ∫_m^u ρ(t−1)/t dt unit by unit.
    ///
    /// Each step uses the cubic through four nodes of the current unit
    /// interval, so no stencil straddles an integer where ρ loses smoothness.
    /// Forward integration alone carries absolute errors undamped while ρ
    /// decays super-exponentially, so every ρ(m) is re-anchored through
    /// mρ(m) = ∫_{m−1}^{m} ρ(t) dt, whose integrand is positive.
    pub fn new(steps_per_unit: usize, u_max: usize) -> Self {
        assert!(
            steps_per_unit >= 4 && steps_per_unit.is_multiple_of(4),
            "nodes per unit must be a positive multiple of four"
        );
        assert!(u_max >= 1);
        let n = steps_per_unit;
        let h = 1.0 / n as f64;
        let mut values = vec![1.0; n * u_max + 1];
        for m in 1..u_max {
            let base = m * n;
            if m >= 2 {
                values[base] = boole(&values[base - n..=base], h) / m as f64;
            }
            // Integrand f(t) = ρ(t−1)/t at the nodes of [m, m+1].
            let f: Vec<f64> = (0..=n)
                .map(|i| values[base - n + i] / ((base + i) as f64 * h))
                .collect();
            for i in 0..n {
                let area = if i == 0 {
                    9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]
                } else if i == n - 1 {
                    f[n - 3] - 5.0 * f[n - 2] + 19.0 * f[n - 1] + 9.0 * f[n]
                } else {
                    -f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]
                };
                values[base + i + 1] = values[base + i] - area * h / 24.0;
            }
        }
        Self {
            steps_per_unit,
            u_max,
            values,
        }
    }

    pub fn step(&self) -> f64 {
        1.0 / self.steps_per_unit as f64
    }

    pub fn grid(&self) -> &[f64] {
        &self.values
    }

    /// ρ(u) by cubic Hermite interpolation with ρ'(u) = −ρ(u−1)/u.
    pub fn rho(&self, u: f64) -> f64 {
        if u.is_nan() {
            return f64::NAN;
        }
        if u <= 1.0 {
            return 1.0;
        }
        if u >= self.u_max as f64 {
            return 0.0;
        }
        let n = self.steps_per_unit;
        let x = u * n as f64;
        let j = (x.floor() as usize).min(n * self.u_max - 1);
        let t = x - j as f64;
        let h = self.step();
        let (u0, u1) = (j as f64 * h, (j + 1) as f64 * h);
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        let d0 = -self.values[j - n] / u0;
        let d1 = -self.values[j + 1 - n] / u1;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * d1
    }
}

/// Composite Boole rule over equally spaced samples (count ≡ 1 mod 4).
fn boole(samples: &[f64], h: f64) -> f64 {
    let acc: f64 = samples
        .windows(5)
        .step_by(4)
        .map(|w| 7.0 * (w[0] + w[4]) + 32.0 * (w[1] + w[3]) + 12.0 * w[2])
        .sum();
    acc * 2.0 * h / 45.0
}

fn default_table() -> &'static DickmanTable {
    static TABLE: OnceLock<DickmanTable> = OnceLock::new();
    TABLE.get_or_init(|| DickmanTable::new(DEFAULT_STEPS_PER_UNIT, DEFAULT_U_MAX))
}

/// Dickman's ρ(u) from the shared default table.
pub fn dickman_rho(u: f64) -> f64 {
    default_table().rho(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_on_first_two_units() {
        assert_eq!(dickman_rho(0.3), 1.0);
        assert_eq!(dickman_rho(1.0), 1.0);
        assert!((dickman_rho(2.0) - (1.0 - 2f64.ln())).abs() < 1e-12);
        for &u in &[1.1, 1.37, 1.5, 1.999] {
            assert!((dickman_rho(u) - (1.0 - u.ln())).abs() < 1e-12, "u = {u}");
        }
    }

    #[test]
    fn half_step_oracle() {
        let fine = DickmanTable::new(2 * DEFAULT_STEPS_PER_UNIT, 12);
        for &u in &[2.5, 3.0, 4.25, 7.0, 10.0] {
            let a = dickman_rho(u);
            let b = fine.rho(u);
            assert!(((a - b) / b).abs() < 1e-11, "u = {u}: {a} vs {b}");
        }
    }

    #[test]
    fn known_values() {
        // ρ(3) = 1 − log 3 + ∫_2^3 log(t−1)/t dt
        assert!((dickman_rho(3.0) - 0.048_608_388_291_131_57).abs() < 1e-12);
        assert!((dickman_rho(10.0) - 2.770_171_837_725_958e-11).abs() < 1e-8 * 2.77e-11);
    }

    #[test]
    fn monotone_positive() {
        let g = DickmanTable::new(256, 20);
        let v = g.grid();
        assert!(v[256..].windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
    }
}
