//! Privacy-loss accounting via sequential composition.
//!
//! Releasing `d` coordinates, each through an `eps1`-DP mechanism, is a
//! `d * eps1`-DP release of the whole vector. Only pure epsilon-DP with basic
//! composition is tracked here; there is no advanced composition and cluster
//! sampling is not credited as amplification.

use crate::error::{Error, Result};
use serde::Serialize;

/// Per-device privacy budget for one vector release.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrivacyBudget {
    /// Per-coordinate privacy loss.
    pub eps1_per_coord: f64,
    /// Number of released coordinates.
    pub dim: usize,
    /// Composed loss for the release: `dim * eps1_per_coord`.
    pub eps_total: f64,
}

/// Sequential composition: the budget of a sequence of mechanisms is the sum
/// of their budgets. The empty composition costs nothing.
pub fn compose(eps_list: &[f64]) -> Result<f64> {
    for (index, &e) in eps_list.iter().enumerate() {
        if !e.is_finite() || e < 0.0 {
            return Err(Error::NegativeBudgetEntry { index, value: e });
        }
    }
    Ok(eps_list.iter().sum())
}

/// Budget of one d-dimensional release at `eps1` per coordinate.
pub fn per_device_budget(eps1: f64, dim: usize) -> Result<PrivacyBudget> {
    if !eps1.is_finite() || eps1 < 0.0 {
        return Err(Error::InvalidEpsilon(eps1));
    }
    if dim < 1 {
        return Err(Error::ZeroDimension);
    }
    Ok(PrivacyBudget {
        eps1_per_coord: eps1,
        dim,
        eps_total: dim as f64 * eps1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn compose_sums() {
        assert_relative_eq!(compose(&[0.1, 0.2, 0.3]).unwrap(), 0.6);
        assert_eq!(compose(&[]).unwrap(), 0.0);
    }

    #[test]
    fn compose_rejects_negative() {
        let err = compose(&[0.1, -0.2]).unwrap_err();
        assert!(matches!(
            err,
            Error::NegativeBudgetEntry { index: 1, .. }
        ));
    }

    #[test]
    fn d_copies_compose_to_d_eps() {
        let eps = 1e-6;
        let list = vec![eps; 159_010];
        assert_relative_eq!(
            compose(&list).unwrap(),
            per_device_budget(eps, 159_010).unwrap().eps_total,
            max_relative = 1e-9
        );
    }

    #[test]
    fn budget_examples() {
        // full-scale two-layer model
        let b = per_device_budget(1e-6, 159_010).unwrap();
        assert_relative_eq!(b.eps_total, 0.159_010, max_relative = 1e-12);
        // reduced-scale logistic model
        let b = per_device_budget(1e-6, 7850).unwrap();
        assert_relative_eq!(b.eps_total, 7.85e-3, max_relative = 1e-12);
        // zero loss composes to zero
        assert_eq!(per_device_budget(0.0, 123).unwrap().eps_total, 0.0);
    }

    #[test]
    fn budget_rejects_bad_input() {
        assert!(per_device_budget(1.0, 0).is_err());
        assert!(per_device_budget(-1.0, 10).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // order-invariance and additivity over concatenation
        #[test]
        fn composition_order_invariant(mut eps in proptest::collection::vec(0.0f64..10.0, 0..20)) {
            let forward = compose(&eps).unwrap();
            eps.reverse();
            let backward = compose(&eps).unwrap();
            prop_assert!((forward - backward).abs() < 1e-12);
        }

        #[test]
        fn composition_additive_over_concat(
            a in proptest::collection::vec(0.0f64..5.0, 0..10),
            b in proptest::collection::vec(0.0f64..5.0, 0..10),
        ) {
            let joined: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
            let lhs = compose(&joined).unwrap();
            let rhs = compose(&a).unwrap() + compose(&b).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        // eps_total monotone in both arguments
        #[test]
        fn budget_monotone(eps in 0.0f64..1.0, d in 1usize..1000, extra in 1usize..100) {
            let base = per_device_budget(eps, d).unwrap().eps_total;
            prop_assert!(per_device_budget(eps, d + extra).unwrap().eps_total >= base);
            prop_assert!(per_device_budget(eps * 2.0, d).unwrap().eps_total >= base);
        }
    }
}
