//! Small descriptive statistics over slices, generic in the float type.

use num_traits::Float;

/// Z-score magnitude above which a value is an outlier.
pub const Z_THRESHOLD: f64 = 3.0;
/// Below this many points the IQR fence replaces the z-score rule.
pub const IQR_MIN_POINTS: usize = 10;

fn cast<T: Float>(x: f64) -> T {
    T::from(x).expect("constant representable in float type")
}

fn len<T: Float>(xs: &[T]) -> T {
    T::from(xs.len()).expect("length representable in float type")
}

pub fn mean<T: Float>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    Some(xs.iter().fold(T::zero(), |acc, &x| acc + x) / len(xs))
}

/// Population standard deviation.
pub fn std_dev<T: Float>(xs: &[T]) -> Option<T> {
    let m = mean(xs)?;
    let var = xs.iter().fold(T::zero(), |acc, &x| acc + (x - m) * (x - m)) / len(xs);
    Some(var.sqrt())
}

/// Least-squares line `y = slope * x + intercept`. `None` for fewer than two points or constant x.
pub fn linear_fit<T: Float>(xs: &[T], ys: &[T]) -> Option<(T, T)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let mx = mean(xs)?;
    let my = mean(ys)?;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxy = sxy + (x - mx) * (y - my);
        sxx = sxx + (x - mx) * (x - mx);
    }
    if sxx == T::zero() {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Pearson correlation; `None` when either side is constant or has fewer than two points.
pub fn pearson<T: Float>(xs: &[T], ys: &[T]) -> Option<T> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let mx = mean(xs)?;
    let my = mean(ys)?;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        sxy = sxy + (x - mx) * (y - my);
        sxx = sxx + (x - mx) * (x - mx);
        syy = syy + (y - my) * (y - my);
    }
    if sxx == T::zero() || syy == T::zero() {
        return None;
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Some(r.max(-T::one()).min(T::one()))
}

/// Linear-interpolated quantile of already sorted data.
pub fn quantile_sorted<T: Float>(sorted: &[T], q: T) -> Option<T> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * cast::<T>((sorted.len() - 1) as f64);
    let lo = pos.floor();
    let frac = pos - lo;
    let i = lo.to_usize()?;
    let j = (i + 1).min(sorted.len() - 1);
    Some(sorted[i] + (sorted[j] - sorted[i]) * frac)
}

/// Indices of outlying values.
///
/// With at least ten points a value is an outlier when its population z-score exceeds 3 in
/// magnitude; with fewer, when it lies outside the 1.5 x IQR fences.
pub fn outliers<T: Float>(xs: &[T]) -> Vec<usize> {
    if xs.len() < 3 {
        return Vec::new();
    }
    if xs.len() < IQR_MIN_POINTS {
        let mut sorted = xs.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let q1 = quantile_sorted(&sorted, cast(0.25)).unwrap_or_else(T::zero);
        let q3 = quantile_sorted(&sorted, cast(0.75)).unwrap_or_else(T::zero);
        let fence = (q3 - q1) * cast(1.5);
        return (0..xs.len())
            .filter(|&i| xs[i] < q1 - fence || xs[i] > q3 + fence)
            .collect();
    }
    let (Some(m), Some(sd)) = (mean(xs), std_dev(xs)) else {
        return Vec::new();
    };
    if sd == T::zero() {
        return Vec::new();
    }
    let z = cast::<T>(Z_THRESHOLD);
    (0..xs.len()).filter(|&i| ((xs[i] - m) / sd).abs() > z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_of_exact_line() {
        let (s, b) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((s - 2.0f64).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0f64], &[1.0]).is_none());
    }

    #[test]
    fn pearson_bounds_and_identity() {
        let xs = [1.0f32, 4.0, 2.0, 8.0];
        assert!((pearson(&xs, &xs).unwrap() - 1.0).abs() < 1e-6);
        let neg: Vec<f32> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-6);
        assert!(pearson(&[1.0f64, 1.0], &[2.0, 3.0]).is_none());
    }

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.5), Some(2.5));
        assert_eq!(quantile_sorted(&s, 0.25), Some(1.75));
    }

    #[test]
    fn small_samples_use_iqr() {
        assert_eq!(outliers(&[10.0, 11.0, 12.0, 11.0, 95.0]), vec![4]);
        assert!(outliers(&[1.0, 2.0, 3.0, 4.0, 5.0]).is_empty());
    }

    #[test]
    fn large_samples_use_z_score() {
        let mut xs = vec![10.0f64; 30];
        for (i, x) in xs.iter_mut().enumerate() {
            *x += (i % 5) as f64;
        }
        xs.push(200.0);
        assert_eq!(outliers(&xs), vec![30]);
    }
}
