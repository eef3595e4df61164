//! Small numeric helpers shared across modules.

/// Compensated (Neumaier) summation in the iteration order given.
/// Reductions that feed normalization constants must go through this with a
/// fixed order so that output bytes do not depend on thread count.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// sin(x)/x, continuously extended to 1 at x = 0.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}
