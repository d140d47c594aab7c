//! Square Gray-coded QAM constellations normalized to unit average power.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    bits_per_axis: u32,
    /// Point for each label, indexed by label value.
    points: Vec<Complex64>,
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

impl Constellation {
    /// Builds the `order`-point square constellation. Only 4, 16 and 64 are supported.
    pub fn new(order: usize) -> Result<Self> {
        let bits_per_axis = match order {
            4 => 1,
            16 => 2,
            64 => 3,
            _ => {
                return Err(Error::config(
                    "waveform.J",
                    format!("QAM order must be 4, 16 or 64, got {order}"),
                ))
            }
        };
        let levels = 1usize << bits_per_axis;
        let norm = (2.0 * ((levels * levels) as f64 - 1.0) / 3.0).sqrt();
        let amplitude = |gray: usize| (2 * gray_to_binary(gray)) as f64 - (levels - 1) as f64;
        let points = (0..order)
            .map(|label| {
                // High half of the label drives I, low half drives Q.
                let i_gray = label >> bits_per_axis;
                let q_gray = label & (levels - 1);
                Complex64::new(amplitude(i_gray), amplitude(q_gray)) / norm
            })
            .collect();
        Ok(Self {
            bits_per_axis,
            points,
        })
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis as usize
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    /// Label of the point minimizing `|z - gain * point|`. Ties go to the
    /// lowest label.
    pub fn nearest_scaled(&self, z: Complex64, gain: Complex64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        let tol = 1e-12 * (z.norm_sqr() + gain.norm_sqr()).max(f64::MIN_POSITIVE);
        for (label, &p) in self.points.iter().enumerate() {
            let d = (z - gain * p).norm_sqr();
            if d < best_dist - tol {
                best = label;
                best_dist = d;
            }
        }
        best
    }

    /// Label of `symbol` if it is (to rounding) a constellation point.
    pub fn label_of(&self, symbol: Complex64) -> Option<usize> {
        let label = self.nearest_scaled(symbol, Complex64::new(1.0, 0.0));
        ((self.points[label] - symbol).norm() < 1e-9).then_some(label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_average_power() {
        for order in [4, 16, 64] {
            let c = Constellation::new(order).unwrap();
            let avg: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
            assert!((avg - 1.0).abs() < 1e-12, "order {order}: {avg}");
        }
    }

    #[test]
    fn zero_label_is_bottom_left_corner() {
        let c = Constellation::new(4).unwrap();
        let expect = Complex64::new(-1.0, -1.0) / 2f64.sqrt();
        assert!((c.point(0) - expect).norm() < 1e-15);
        let c16 = Constellation::new(16).unwrap();
        let expect = Complex64::new(-3.0, -3.0) / 10f64.sqrt();
        assert!((c16.point(0) - expect).norm() < 1e-15);
    }

    #[test]
    fn gray_neighbours_differ_by_one_bit() {
        for order in [4, 16, 64] {
            let c = Constellation::new(order).unwrap();
            let min_dist = (c.point(0) - c.point(1)).norm();
            for a in 0..order {
                for b in 0..order {
                    let d = (c.point(a) - c.point(b)).norm();
                    if a != b && (d - min_dist).abs() < 1e-9 {
                        assert_eq!((a ^ b).count_ones(), 1, "labels {a} and {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn equidistant_point_resolves_to_lowest_label() {
        let c = Constellation::new(4).unwrap();
        assert_eq!(c.nearest_scaled(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)), 0);
        // Midway between labels 2 and 3 (both have I > 0).
        let mid = (c.point(2) + c.point(3)) / 2.0;
        assert_eq!(c.nearest_scaled(mid, Complex64::new(1.0, 0.0)), 2);
    }

    #[test]
    fn rejects_unsupported_orders() {
        assert!(Constellation::new(8).is_err());
        assert!(Constellation::new(256).is_err());
    }
}
