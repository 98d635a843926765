//! Posterior information in whitened coordinates.
//!
//! For a learner with diagonal prior Σ₀, a sample `x` from a source with noise
//! variance σ² enters as `z = Σ₀^{1/2} x / σ`. The normalized information
//! matrix is then `M = I + Σ z zᵀ`, whose log-determinant equals
//! `log det(Σ xxᵀ/σ² + Σ₀⁻¹) + log det Σ₀` and is 0 for an empty batch.
//! Singular priors (zero variances) need no special casing here.
//!
//! `M` is kept as a lower Cholesky factor updated in O(d²) per sample, and
//! every update reports its marginal gain `log(1 + zᵀ M⁻¹ z)`.

use nalgebra::DMatrix;

#[derive(Clone, Debug)]
pub struct InfoMatrix {
    d: usize,
    /// Column-major lower factor: `l[k * d + i]` is L[i, k].
    l: Vec<f64>,
    logdet: f64,
}

impl InfoMatrix {
    pub fn identity(d: usize) -> Self {
        let mut m = InfoMatrix { d, l: vec![0.0; d * d], logdet: 0.0 };
        m.reset();
        m
    }

    /// Back to the empty batch.
    pub fn reset(&mut self) {
        self.l.iter_mut().for_each(|x| *x = 0.0);
        for k in 0..self.d {
            self.l[k * self.d + k] = 1.0;
        }
        self.logdet = 0.0;
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// Adds `z zᵀ` and returns the gain. `z` is used as scratch space.
    pub fn push(&mut self, z: &mut [f64]) -> f64 {
        let d = self.d;
        debug_assert_eq!(z.len(), d);
        let mut gain = 0.0;
        for k in 0..d {
            let wk = z[k];
            if wk == 0.0 {
                continue;
            }
            let col = &mut self.l[k * d..(k + 1) * d];
            let lkk = col[k];
            let s = wk / lkk;
            let c = (1.0 + s * s).sqrt();
            col[k] = lkk * c;
            gain += (s * s).ln_1p();
            for i in (k + 1)..d {
                let li = (col[i] + s * z[i]) / c;
                z[i] = c * z[i] - s * li;
                col[i] = li;
            }
        }
        self.logdet += gain;
        gain
    }

    /// Gain of adding `z` without changing the matrix.
    pub fn gain(&self, z: &[f64]) -> f64 {
        let d = self.d;
        let mut y = z.to_vec();
        for k in 0..d {
            let col = &self.l[k * d..(k + 1) * d];
            y[k] /= col[k];
            let yk = y[k];
            for i in (k + 1)..d {
                y[i] -= col[i] * yk;
            }
        }
        y.iter().map(|v| v * v).sum::<f64>().ln_1p()
    }

    /// The factor L as a dense matrix.
    pub fn factor(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.d, self.d, &self.l)
    }

    /// The assembled matrix L Lᵀ.
    pub fn dense(&self) -> DMatrix<f64> {
        let l = self.factor();
        &l * l.transpose()
    }
}

/// Whitening factors of one learner: `scale[s][i]` maps a standard normal
/// draw to the whitened feature `z_i` of a sample from source `s`, i.e.
/// `sqrt(Σ_s[i] Σ₀[i]) / σ_{s,t}`.
#[derive(Clone, Debug)]
pub struct Whitening {
    pub prior_std: Vec<f64>,
    pub scale: Vec<Vec<f64>>,
    pub noise_std: Vec<f64>,
}

impl Whitening {
    pub fn new(prior_var: &[f64], source_var: &[Vec<f64>], noise_var: &[f64]) -> Self {
        let prior_std: Vec<f64> = prior_var.iter().map(|v| v.sqrt()).collect();
        let noise_std: Vec<f64> = noise_var.iter().map(|v| v.sqrt()).collect();
        let scale = source_var
            .iter()
            .zip(&noise_std)
            .map(|(sv, sd)| sv.iter().zip(&prior_std).map(|(v, p)| v.sqrt() * p / sd).collect())
            .collect();
        Whitening { prior_std, scale, noise_std }
    }

    /// Whitens a raw feature vector from `source` into `out`.
    pub fn whiten(&self, source: usize, x: &[f64], out: &mut [f64]) {
        let sd = self.noise_std[source];
        for ((o, xi), p) in out.iter_mut().zip(x).zip(&self.prior_std) {
            *o = xi * p / sd;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn dense_logdet(zs: &[Vec<f64>], d: usize) -> f64 {
        let mut m = DMatrix::<f64>::identity(d, d);
        for z in zs {
            let v = nalgebra::DVector::from_column_slice(z);
            m += &v * v.transpose();
        }
        m.cholesky().unwrap().l().diagonal().iter().map(|x| 2.0 * x.ln()).sum()
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(InfoMatrix::identity(4).logdet(), 0.0);
    }

    #[test]
    fn one_unit_sample() {
        let mut m = InfoMatrix::identity(1);
        let g = m.push(&mut [1.0]);
        assert!((g - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_sample_changes_nothing() {
        let mut m = InfoMatrix::identity(3);
        m.push(&mut [0.3, -1.0, 2.0]);
        let before = m.dense();
        assert_eq!(m.push(&mut [0.0; 3]), 0.0);
        assert_eq!(m.dense(), before);
    }

    #[test]
    fn matches_dense_assembly() {
        let mut rng = crate::rng::stream(1, &[]);
        let d = 7;
        let zs: Vec<Vec<f64>> = (0..12).map(|_| (0..d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect()).collect();
        let mut m = InfoMatrix::identity(d);
        for z in &zs {
            let peek = m.gain(z);
            let got = m.push(&mut z.clone());
            assert!((peek - got).abs() < 1e-12);
        }
        assert!((m.logdet() - dense_logdet(&zs, d)).abs() < 1e-10);
        let mut want = DMatrix::<f64>::identity(d, d);
        for z in &zs {
            let v = nalgebra::DVector::from_column_slice(z);
            want += &v * v.transpose();
        }
        assert!((m.dense() - want).amax() < 1e-10);
    }
}
