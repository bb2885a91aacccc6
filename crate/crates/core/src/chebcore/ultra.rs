use super::BandMatrix;
use crate::error::{Error, Result};

/// Ultraspherical operators between first- and second-kind coefficients.
///
/// `d` and `s` map T-coefficients to U-coefficients; `m_plus` and `m_minus`
/// multiply U-series by `1 + y` and `1 - y`.
#[derive(Debug, Clone)]
pub struct UltraOps {
    size: usize,
    pub d: BandMatrix,
    pub s: BandMatrix,
    pub m_plus: BandMatrix,
    pub m_minus: BandMatrix,
}

impl UltraOps {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidParameter(format!(
                "ultraspherical operators need size >= 2, got {size}"
            )));
        }
        let mut d = BandMatrix::zeros(size, size, 0, 1);
        let mut s = BandMatrix::zeros(size, size, 0, 2);
        let mut m_plus = BandMatrix::zeros(size, size, 1, 1);
        let mut m_minus = BandMatrix::zeros(size, size, 1, 1);
        for k in 0..size {
            if k >= 1 {
                d.set(k - 1, k, k as f64);
            }
            match k {
                0 => s.set(0, 0, 1.0),
                1 => s.set(1, 1, 0.5),
                _ => {
                    s.set(k, k, 0.5);
                    s.set(k - 2, k, -0.5);
                }
            }
            // y U_k = (U_{k+1} + U_{k-1}) / 2
            m_plus.set(k, k, 1.0);
            m_minus.set(k, k, 1.0);
            if k + 1 < size {
                m_plus.set(k + 1, k, 0.5);
                m_minus.set(k + 1, k, -0.5);
            }
            if k >= 1 {
                m_plus.set(k - 1, k, 0.5);
                m_minus.set(k - 1, k, -0.5);
            }
        }
        Ok(Self {
            size,
            d,
            s,
            m_plus,
            m_minus,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebcore::{clenshaw, BasisKind};

    #[test]
    fn derivative_of_t3() {
        let ops = UltraOps::new(4).unwrap();
        assert_eq!(ops.d.matvec(&[0.0, 0.0, 0.0, 1.0]), vec![0.0, 0.0, 3.0, 0.0]);
    }

    #[test]
    fn conversion_of_t2() {
        let ops = UltraOps::new(3).unwrap();
        assert_eq!(ops.s.matvec(&[0.0, 0.0, 1.0]), vec![-0.5, 0.0, 0.5]);
        let ops = UltraOps::new(2).unwrap();
        assert_eq!(ops.s.matvec(&[0.0, 1.0]), vec![0.0, 0.5]);
    }

    #[test]
    fn one_plus_y_times_u0() {
        let ops = UltraOps::new(2).unwrap();
        assert_eq!(ops.m_plus.matvec(&[1.0, 0.0]), vec![1.0, 0.5]);
        assert_eq!(ops.m_minus.matvec(&[1.0, 0.0]), vec![1.0, -0.5]);
    }

    #[test]
    fn structure() {
        let ops = UltraOps::new(12).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let dij = ops.d.get(i, j);
                if j >= 1 && i == j - 1 {
                    assert_eq!(dij, j as f64);
                } else {
                    assert_eq!(dij, 0.0);
                }
                if i.abs_diff(j) > 1 {
                    assert_eq!(ops.m_plus.get(i, j), 0.0);
                }
            }
        }
        assert!(UltraOps::new(1).is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let n = 15;
        let ops = UltraOps::new(n + 1).unwrap();
        let p: Vec<f64> = (0..=n).map(|k| 1.0 / (1.0 + k as f64)).collect();
        let dp = ops.d.matvec(&p);
        let h = 1e-4;
        for i in 1..20 {
            let y = -0.95 + 0.1 * i as f64;
            let fd = (clenshaw(BasisKind::T, &p, y + h) - clenshaw(BasisKind::T, &p, y - h)) / (2.0 * h);
            let exact = clenshaw(BasisKind::U, &dp, y);
            // O(h^2) with third derivative bounded by ~n^6 / 15
            assert!((fd - exact).abs() < 1e-3, "y = {y}: {fd} vs {exact}");
        }
    }

    #[test]
    fn conversion_preserves_values() {
        let ops = UltraOps::new(9).unwrap();
        let p: Vec<f64> = (0..9).map(|k| (k as f64 * 0.37).cos()).collect();
        let u = ops.s.matvec(&p);
        for i in 0..=10 {
            let y = -1.0 + 0.2 * i as f64;
            let a = clenshaw(BasisKind::T, &p, y);
            let b = clenshaw(BasisKind::U, &u, y);
            assert!((a - b).abs() < 1e-13);
        }
    }
}
