//! Quadrature on the reference triangle `{(s, t): s, t >= 0, s + t <= 1}`
//! and on the unit interval.

/// Points in barycentric coordinates with weights summing to the reference
/// measure (`1/2` on the triangle, `1` on the interval).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Highest total polynomial degree integrated exactly.
    pub degree: u32,
}

impl QuadratureRule {
    /// Seven-point rule of degree 5 (Radon).
    ///
    /// Degree 5 integrates the convection integrand `w . grad(v) . z` of
    /// three quadratic fields exactly, so the discrete integration by parts
    /// behind the skew-symmetric form holds to roundoff.
    pub fn triangle_degree5() -> Self {
        let s15 = 15f64.sqrt();
        let (a1, b1) = ((6.0 - s15) / 21.0, (9.0 + 2.0 * s15) / 21.0);
        let (a2, b2) = ((6.0 + s15) / 21.0, (9.0 - 2.0 * s15) / 21.0);
        let (w1, w2) = ((155.0 - s15) / 1200.0, (155.0 + s15) / 1200.0);
        let third = 1.0 / 3.0;
        let points = vec![
            [third, third, third],
            [a1, a1, b1],
            [a1, b1, a1],
            [b1, a1, a1],
            [a2, a2, b2],
            [a2, b2, a2],
            [b2, a2, a2],
        ];
        let weights = [9.0 / 40.0, w1, w1, w1, w2, w2, w2]
            .iter()
            .map(|w| 0.5 * w)
            .collect();
        Self {
            points,
            weights,
            degree: 5,
        }
    }

    /// Three-point Gauss-Legendre rule on `[0, 1]`; points are `(1 - t, t, 0)`.
    pub fn edge_gauss3() -> Self {
        let d = 0.5 * (0.6f64).sqrt();
        let ts = [0.5 - d, 0.5, 0.5 + d];
        Self {
            points: ts.iter().map(|&t| [1.0 - t, t, 0.0]).collect(),
            weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
            degree: 5,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}
