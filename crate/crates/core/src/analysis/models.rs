use crate::error::{Error, Result};

/// Two-bath steady state T = (γ_gas·T_gas + Ṫ_noise)/(γ_gas + γ_c).
pub fn two_bath_temperature(gas_damping: f64, cooling_rate: f64, gas_temperature: f64, noise_heating: f64) -> Result<f64> {
    let total = gas_damping + cooling_rate;
    if !(total > 0.0) {
        return Err(Error::Analysis(format!(
            "two-bath temperature needs γ_gas + γ_c > 0, got {total:e}"
        )));
    }
    Ok((gas_damping * gas_temperature + noise_heating) / total)
}

/// Linewidth with nonlinear broadening added in quadrature:
/// γ = √(γ_NL² + (γ_gas + γ_c)²).
pub fn damping_model(nonlinear: f64, gas_damping: f64, cooling_rate: f64) -> f64 {
    nonlinear.hypot(gas_damping + cooling_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::TWO_PI;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn two_bath_examples() {
        assert_eq!(two_bath_temperature(5.0, 0.0, 300.0, 0.0).unwrap(), 300.0);
        let t = two_bath_temperature(TWO_PI * 2.5, TWO_PI * 1.3e3, 300.0, 0.0).unwrap();
        assert_relative_eq!(t, 0.5758, max_relative = 1e-3);
        let t = two_bath_temperature(0.0, TWO_PI * 1.3e3, 300.0, 33.0).unwrap();
        assert_relative_eq!(t, 4.04e-3, max_relative = 1e-2);
        assert!(two_bath_temperature(0.0, 0.0, 300.0, 1.0).is_err());
    }

    #[test]
    fn damping_examples() {
        assert_eq!(damping_model(0.0, 2.0, 3.0), 5.0);
        assert_eq!(damping_model(7.0, 0.0, 0.0), 7.0);
        assert_relative_eq!(damping_model(TWO_PI * 300.0, TWO_PI * 100.0, TWO_PI * 300.0), TWO_PI * 500.0, max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn two_bath_decreases_with_cooling(g in 1e-3f64..1e3, c in 0.0f64..1e4, dc in 1e-3f64..1e3, n in 0.0f64..1e3) {
            let a = two_bath_temperature(g, c, 300.0, n).unwrap();
            let b = two_bath_temperature(g, c + dc, 300.0, n).unwrap();
            prop_assert!(b < a);
        }

        #[test]
        fn damping_bounded_below(nl in 0.0f64..1e4, g in 0.0f64..1e4, c in 0.0f64..1e4) {
            let d = damping_model(nl, g, c);
            prop_assert!(d >= nl.max(g + c));
        }
    }
}
