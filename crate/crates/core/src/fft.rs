//! Multi-dimensional DFT on the box grid.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::lattice::LatticeBox;
use crate::linmap::C64;

#[derive(Clone)]
pub struct BoxFft {
    bx: LatticeBox,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl BoxFft {
    pub fn new(bx: LatticeBox) -> Self {
        let mut planner = FftPlanner::new();
        let s = bx.side();
        BoxFft {
            bx,
            fwd: planner.plan_fft_forward(s),
            inv: planner.plan_fft_inverse(s),
        }
    }

    pub fn lattice_box(&self) -> LatticeBox {
        self.bx
    }

    /// Momentum of grid index k along one axis: 2πk/(2L+1).
    pub fn xi(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.bx.side() as f64
    }

    /// Momentum vector for a flat grid index.
    pub fn xi_vec(&self, idx: usize) -> Vec<f64> {
        let s = self.bx.side();
        let mut out = vec![0.0; self.bx.dim];
        let mut r = idx;
        for k in (0..self.bx.dim).rev() {
            out[k] = self.xi(r % s);
            r /= s;
        }
        out
    }

    fn along_axes(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let s = self.bx.side();
        let d = self.bx.dim;
        let total = data.len();
        let mut line = vec![C64::new(0.0, 0.0); s];
        for axis in 0..d {
            let stride = s.pow((d - 1 - axis) as u32);
            let block = stride * s;
            for start in (0..total).step_by(block) {
                for off in 0..stride {
                    for (k, l) in line.iter_mut().enumerate() {
                        *l = data[start + off + k * stride];
                    }
                    plan.process(&mut line);
                    for (k, l) in line.iter().enumerate() {
                        data[start + off + k * stride] = *l;
                    }
                }
            }
        }
    }

    /// Unnormalised forward transform, e^{−2πi jk/N} on array indices.
    pub fn forward(&self, data: &mut [C64]) {
        self.along_axes(data, &self.fwd);
    }

    /// Normalised inverse transform.
    pub fn inverse(&self, data: &mut [C64]) {
        self.along_axes(data, &self.inv);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|x| *x *= scale);
    }
}
