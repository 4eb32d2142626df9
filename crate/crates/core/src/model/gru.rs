use crate::error::{Error, Result};
use crate::numerics::{Matrix, Real};

/// GRU weights. Input matrices are `H × D_x`, recurrent ones `H × H`,
/// biases `H × 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams<T> {
    pub w_xz: Matrix<T>,
    pub w_hz: Matrix<T>,
    pub b_z: Matrix<T>,
    pub w_xr: Matrix<T>,
    pub w_hr: Matrix<T>,
    pub b_r: Matrix<T>,
    pub w_xh: Matrix<T>,
    pub w_hh: Matrix<T>,
    pub b_h: Matrix<T>,
}

impl<T: Real> GruParams<T> {
    pub fn zeros(d_x: usize, hidden: usize) -> Self {
        Self {
            w_xz: Matrix::zeros(hidden, d_x),
            w_hz: Matrix::zeros(hidden, hidden),
            b_z: Matrix::zeros(hidden, 1),
            w_xr: Matrix::zeros(hidden, d_x),
            w_hr: Matrix::zeros(hidden, hidden),
            b_r: Matrix::zeros(hidden, 1),
            w_xh: Matrix::zeros(hidden, d_x),
            w_hh: Matrix::zeros(hidden, hidden),
            b_h: Matrix::zeros(hidden, 1),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hz.rows()
    }

    pub fn d_x(&self) -> usize {
        self.w_xz.cols()
    }
}

/// Gate values of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct GruStep<T> {
    pub x: Vec<T>,
    pub h_prev: Vec<T>,
    pub z: Vec<T>,
    pub r: Vec<T>,
    pub candidate: Vec<T>,
    pub h_next: Vec<T>,
}

#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn affine<T: Real>(w: &Matrix<T>, x: &[T], u: &Matrix<T>, h: &[T], b: &Matrix<T>) -> Vec<T> {
    let wx = w.matvec(x).expect("checked shape");
    let uh = u.matvec(h).expect("checked shape");
    wx.iter().zip(&uh).zip(b.as_slice()).map(|((&a, &c), &bb)| a + c + bb).collect()
}

/// One recurrence step, with the update gate weighting the previous state:
///
/// ```text
/// z  = σ(W_xz x + W_Hz H + b_z)
/// r  = σ(W_xr x + W_Hr H + b_r)
/// H~ = tanh(W_xH x + W_HH (r ⊙ H) + b_H)
/// H' = z ⊙ H + (1 − z) ⊙ H~
/// ```
pub fn gru_step<T: Real>(x: &[T], h_prev: &[T], p: &GruParams<T>) -> Result<GruStep<T>> {
    if x.len() != p.d_x() || h_prev.len() != p.hidden() {
        return Err(Error::Shape {
            op: "gru_step",
            left: (x.len(), h_prev.len()),
            right: (p.d_x(), p.hidden()),
        });
    }
    let z: Vec<T> = affine(&p.w_xz, x, &p.w_hz, h_prev, &p.b_z).into_iter().map(sigmoid).collect();
    let r: Vec<T> = affine(&p.w_xr, x, &p.w_hr, h_prev, &p.b_r).into_iter().map(sigmoid).collect();
    let rh: Vec<T> = r.iter().zip(h_prev).map(|(&a, &b)| a * b).collect();
    let candidate: Vec<T> = affine(&p.w_xh, x, &p.w_hh, &rh, &p.b_h).into_iter().map(T::tanh).collect();
    let h_next = (0..p.hidden())
        .map(|k| z[k] * h_prev[k] + (T::one() - z[k]) * candidate[k])
        .collect();
    Ok(GruStep {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        z,
        r,
        candidate,
        h_next,
    })
}

/// Backward through one step. Accumulates parameter gradients into `grads`
/// and returns `(∂L/∂H_prev, ∂L/∂x)`.
pub(crate) fn gru_backward<T: Real>(step: &GruStep<T>, p: &GruParams<T>, d_next: &[T], grads: &mut GruParams<T>) -> (Vec<T>, Vec<T>) {
    let n = p.hidden();
    let one = T::one();
    let mut da_z = vec![T::zero(); n];
    let mut da_h = vec![T::zero(); n];
    let mut d_prev = vec![T::zero(); n];
    for k in 0..n {
        let (z, c) = (step.z[k], step.candidate[k]);
        da_z[k] = d_next[k] * (step.h_prev[k] - c) * z * (one - z);
        da_h[k] = d_next[k] * (one - z) * (one - c * c);
        d_prev[k] = d_next[k] * z;
    }
    let d_rh = p.w_hh.tr_matvec(&da_h).expect("checked shape");
    let mut da_r = vec![T::zero(); n];
    for k in 0..n {
        let r = step.r[k];
        da_r[k] = d_rh[k] * step.h_prev[k] * r * (one - r);
        d_prev[k] += d_rh[k] * r;
    }
    let rh: Vec<T> = step.r.iter().zip(&step.h_prev).map(|(&a, &b)| a * b).collect();

    grads.w_xz.add_outer(one, &da_z, &step.x);
    grads.w_hz.add_outer(one, &da_z, &step.h_prev);
    grads.w_xr.add_outer(one, &da_r, &step.x);
    grads.w_hr.add_outer(one, &da_r, &step.h_prev);
    grads.w_xh.add_outer(one, &da_h, &step.x);
    grads.w_hh.add_outer(one, &da_h, &rh);
    for k in 0..n {
        grads.b_z.as_mut_slice()[k] += da_z[k];
        grads.b_r.as_mut_slice()[k] += da_r[k];
        grads.b_h.as_mut_slice()[k] += da_h[k];
    }

    for (d, v) in d_prev.iter_mut().zip(p.w_hz.tr_matvec(&da_z).expect("checked shape")) {
        *d += v;
    }
    for (d, v) in d_prev.iter_mut().zip(p.w_hr.tr_matvec(&da_r).expect("checked shape")) {
        *d += v;
    }
    let mut dx = p.w_xz.tr_matvec(&da_z).expect("checked shape");
    for (d, v) in dx.iter_mut().zip(p.w_xr.tr_matvec(&da_r).expect("checked shape")) {
        *d += v;
    }
    for (d, v) in dx.iter_mut().zip(p.w_xh.tr_matvec(&da_h).expect("checked shape")) {
        *d += v;
    }
    (d_prev, dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    #[test]
    fn zero_parameters_halve_state() {
        let p = GruParams::<f64>::zeros(3, 4);
        let h = [0.8, -1.2, 3.0, 0.0];
        let s = gru_step(&[1.0, 2.0, -1.0], &h, &p).unwrap();
        assert!(s.z.iter().chain(&s.r).all(|&g| g == 0.5));
        assert!(s.candidate.iter().all(|&c| c == 0.0));
        for (a, b) in s.h_next.iter().zip(&h) {
            assert!((a - 0.5 * b).abs() <= 1e-12);
        }
    }

    #[test]
    fn saturated_update_gate_keeps_state() {
        let mut rng = Rng::new(4);
        let mut p = GruParams::<f64>::zeros(3, 4);
        for m in [&mut p.w_xr, &mut p.w_hr, &mut p.w_xh, &mut p.w_hh] {
            for v in m.as_mut_slice() {
                *v = rng.uniform_range(-1.0, 1.0);
            }
        }
        p.b_z.fill(10.0);
        let h = [0.5, -2.0, 1.0, 0.1];
        let s = gru_step(&[0.3, -0.7, 2.0], &h, &p).unwrap();
        let inf = h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let diff = s.h_next.iter().zip(&h).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff <= 1e-4 * (1.0 + inf + 1.0), "{diff}");
    }

    #[test]
    fn shape_mismatch() {
        let p = GruParams::<f64>::zeros(3, 4);
        assert!(gru_step(&[0.0; 2], &[0.0; 4], &p).is_err());
        assert!(gru_step(&[0.0; 3], &[0.0; 5], &p).is_err());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!(sigmoid(-800.0f64) >= 0.0);
        assert_eq!(sigmoid(800.0f64), 1.0);
    }
}
