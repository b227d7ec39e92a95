use std::fmt;

/// Formats an `f64` with the shortest digits that parse back to the same
/// value, switching to exponent notation outside `[1e-5, 1e16)`.
pub struct Shortest(pub f64);

impl fmt::Display for Shortest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = self.0;
        let a = x.abs();
        if a == 0.0 || (1e-5..1e16).contains(&a) {
            write!(f, "{x}")
        } else {
            write!(f, "{x:e}")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn readable_forms() {
        assert_eq!(Shortest(0.1).to_string(), "0.1");
        assert_eq!(Shortest(-2.0).to_string(), "-2");
        assert_eq!(Shortest(1e-300).to_string(), "1e-300");
        assert_eq!(Shortest(0.0).to_string(), "0");
    }

    proptest! {
        #[test]
        fn round_trips(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let back: f64 = Shortest(x).to_string().parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
