//! Streaming sample moments with exact parallel merging.

/// Count, mean and central moment sums `M2..M4` (Pébay's one-pass update).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SampleMoments {
    n: f64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl SampleMoments {
    pub fn push(&mut self, v: f64) {
        let n1 = self.n;
        self.n += 1.0;
        let n = self.n;
        let delta = v - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let term1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += term1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += term1;
    }

    pub fn merge(&self, other: &SampleMoments) -> SampleMoments {
        if self.n == 0.0 {
            return *other;
        }
        if other.n == 0.0 {
            return *self;
        }
        let (na, nb) = (self.n, other.n);
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let d4 = d2 * d2;
        let mean = self.mean + delta * nb / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3 + other.m3 + d3 * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;
        SampleMoments { n, mean, m2, m3, m4 }
    }

    pub fn count(&self) -> f64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            self.m2 / (self.n - 1.0)
        }
    }

    pub fn std_error_mean(&self) -> f64 {
        (self.variance() / self.n).sqrt()
    }

    /// Large-sample standard error of the variance estimate,
    /// `sqrt((m4 - s^4) / n)`.
    pub fn std_error_variance(&self) -> f64 {
        let m4 = self.m4 / self.n;
        let s2 = self.m2 / self.n;
        ((m4 - s2 * s2).max(0.0) / self.n).sqrt()
    }
}

impl FromIterator<f64> for SampleMoments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = SampleMoments::default();
        for v in iter {
            s.push(v);
        }
        s
    }
}
