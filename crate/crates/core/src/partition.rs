//! The partition function used to split off the right asymptote of `u`.

/// Quintic smoothstep: zero on `(-inf, 0]`, one on `[1, inf)`, with first
/// and second derivatives vanishing at both junctions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PartitionFn;

impl PartitionFn {
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
        }
    }

    #[inline]
    pub fn d1(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            0.0
        } else {
            let s = x * (1.0 - x);
            30.0 * s * s
        }
    }

    #[inline]
    pub fn d2(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            0.0
        } else {
            60.0 * x * (1.0 - x) * (1.0 - 2.0 * x)
        }
    }

    /// `chi'^2 + chi chi''`, the density of the background correction.
    #[inline]
    pub fn correction(&self, x: f64) -> f64 {
        let d1 = self.d1(x);
        d1 * d1 + self.value(x) * self.d2(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CHI: PartitionFn = PartitionFn;

    #[test]
    fn boundary_values() {
        assert_eq!(CHI.value(-3.0), 0.0);
        assert_eq!(CHI.value(0.0), 0.0);
        assert_eq!(CHI.value(1.0), 1.0);
        assert_eq!(CHI.value(7.0), 1.0);
        assert!((CHI.value(0.5) - 0.5).abs() < 1e-15);
        for x in [0.0, 1.0] {
            assert!(CHI.d1(x).abs() < 1e-15);
            assert!(CHI.d2(x).abs() < 1e-15);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let eps = 1e-6;
        for i in 1..100 {
            let x = i as f64 / 100.0;
            let fd1 = (CHI.value(x + eps) - CHI.value(x - eps)) / (2.0 * eps);
            let fd2 = (CHI.d1(x + eps) - CHI.d1(x - eps)) / (2.0 * eps);
            assert!((fd1 - CHI.d1(x)).abs() < 1e-8, "x={x}");
            assert!((fd2 - CHI.d2(x)).abs() < 1e-7, "x={x}");
        }
    }

    proptest! {
        #[test]
        fn monotone_and_supported(x in -3.0f64..4.0) {
            prop_assert!(CHI.d1(x) >= 0.0);
            prop_assert!((0.0..=1.0).contains(&CHI.value(x)));
            if !(0.0..=1.0).contains(&x) {
                prop_assert_eq!(CHI.d1(x), 0.0);
                prop_assert_eq!(CHI.value(x) * CHI.d2(x), 0.0);
            }
        }
    }
}
