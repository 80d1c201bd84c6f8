//! Float helpers that `core` lacks.

#[inline]
pub(crate) fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

#[inline]
pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub(crate) fn is_integral(x: f64) -> bool {
    libm::trunc(x) == x
}
