//! Tail probabilities of the reference distributions, evaluated in `f64`.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// `P(X ≥ x)` for chi-squared with `df` degrees of freedom.
pub fn chi_squared_upper(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df).expect("positive degrees of freedom").sf(x).clamp(0.0, 1.0)
}

/// `P(Z ≥ z)` for the standard normal.
pub fn normal_upper(z: f64) -> f64 {
    Normal::standard().sf(z).clamp(0.0, 1.0)
}
