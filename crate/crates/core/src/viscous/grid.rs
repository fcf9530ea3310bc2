//! Fast evaluation of a Gaussian-smoothed particle CDF at many points.
//!
//! Centers are binned on a grid of spacing `sigma / 2`; each bin keeps the Taylor
//! moments of its members' offsets. Convolving the moments with tabulated derivatives
//! of the normal CDF (by FFT) gives, at every grid node, the Taylor coefficients of
//! `F` in the distance to that node. A query then costs one polynomial evaluation.
//! With combined offsets of at most `sigma / 2` the expansion truncated at order
//! `ORDER` is accurate to about 1e-16.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use super::{std_normal_cdf, std_normal_pdf};

pub(super) const ORDER: usize = 20;

// grid spacing in units of sigma
const SPACING: f64 = 0.5;

// kernel taps reach 9.5 sigma: beyond it every derivative is below 1e-19
const HALF_TAPS: usize = 19;

pub(super) struct TaylorGrid {
    origin: f64,
    delta: f64,
    inv_sigma: f64,
    nodes: usize,
    // coef[k * (ORDER + 1) + q]: F(g_k + u sigma) = sum_q coef_q u^q
    coef: Vec<f64>,
}

struct Spectra {
    fft: Arc<dyn RealToComplex<f64>>,
    ifft: Arc<dyn ComplexToReal<f64>>,
    // transforms of the taps of Phi^(n), n = 0..=ORDER (n = 0 minus the unit step)
    kernels: Vec<Vec<Complex64>>,
}

thread_local! {
    static SPECTRA: RefCell<HashMap<usize, Rc<Spectra>>> = RefCell::new(HashMap::new());
}

fn spectra(size: usize) -> Rc<Spectra> {
    SPECTRA.with(|cache| {
        cache
            .borrow_mut()
            .entry(size)
            .or_insert_with(|| Rc::new(build_spectra(size)))
            .clone()
    })
}

/// `Phi^(n)(z)` for `n = 0..=ORDER`.
fn cdf_derivatives(z: f64) -> [f64; ORDER + 1] {
    let mut out = [0.0; ORDER + 1];
    out[0] = std_normal_cdf(z);
    let pdf = std_normal_pdf(z);
    // Phi^(n) = (-1)^(n-1) He_{n-1}(z) phi(z)
    let (mut he_prev, mut he) = (0.0, 1.0);
    for n in 1..=ORDER {
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        out[n] = sign * he * pdf;
        let k = (n - 1) as f64;
        let next = z * he - k * he_prev;
        he_prev = he;
        he = next;
    }
    out
}

fn build_spectra(size: usize) -> Spectra {
    let mut planner = RealFftPlanner::new();
    let fft = planner.plan_fft_forward(size);
    let ifft = planner.plan_fft_inverse(size);
    let mut taps = vec![vec![0.0; size]; ORDER + 1];
    let k = HALF_TAPS as isize;
    for r in -k..=k {
        let mut d = cdf_derivatives(r as f64 * SPACING);
        if r > 0 {
            d[0] -= 1.0;
        }
        let idx = r.rem_euclid(size as isize) as usize;
        for (n, v) in d.iter().enumerate() {
            taps[n][idx] = *v;
        }
    }
    let kernels = taps
        .iter_mut()
        .map(|t| {
            let mut spec = fft.make_output_vec();
            fft.process(t, &mut spec).expect("buffer sizes match the plan");
            spec
        })
        .collect();
    Spectra { fft, ifft, kernels }
}

// smallest even 2^a 3^b that is at least `n`
fn transform_size(n: usize) -> usize {
    let mut best = n.next_power_of_two().max(2);
    let mut p3 = 1;
    while p3 < best {
        let mut m = p3 * 2;
        while m < n {
            m *= 2;
        }
        best = best.min(m);
        p3 *= 3;
    }
    best
}

impl TaylorGrid {
    /// Returns `None` when the grid would be much larger than the particle count
    /// (tiny `sigma`), where direct summation is cheaper.
    pub(super) fn build(centers: &[f64], sigma: f64) -> Option<Self> {
        let n = centers.len();
        let delta = SPACING * sigma;
        let pad = (HALF_TAPS + 2) as f64 * delta;
        let origin = centers[0] - pad;
        let span = centers[n - 1] + pad - origin;
        let nodes_f = (span / delta).ceil() + 1.0;
        if !nodes_f.is_finite() || nodes_f > (8 * n + 256) as f64 {
            return None;
        }
        let nodes = nodes_f as usize;
        let size = transform_size(nodes + 2 * HALF_TAPS + 1);
        let spectra = spectra(size);
        let inv_sigma = 1.0 / sigma;

        let mut inv_fact = [1.0; ORDER + 1];
        for l in 1..=ORDER {
            inv_fact[l] = inv_fact[l - 1] / l as f64;
        }

        // binned moments A_l[m] = sum (-d/sigma)^l / l!
        let mut moments = vec![vec![0.0; size]; ORDER + 1];
        let mut counts = vec![0.0; nodes];
        for &c in centers {
            let m = ((c - origin) / delta).round() as usize;
            let v = -(c - (origin + m as f64 * delta)) * inv_sigma;
            let mut pw = 1.0;
            for (l, row) in moments.iter_mut().enumerate() {
                row[m] += pw * inv_fact[l];
                pw *= v;
            }
            counts[m] += 1.0;
        }
        let moments: Vec<Vec<Complex64>> = moments
            .iter_mut()
            .map(|row| {
                let mut spec = spectra.fft.make_output_vec();
                spectra.fft.process(row, &mut spec).expect("buffer sizes match the plan");
                spec
            })
            .collect();

        let mut coef = vec![0.0; nodes * (ORDER + 1)];
        let mut acc = spectra.ifft.make_input_vec();
        let mut out = spectra.ifft.make_output_vec();
        let scale = 1.0 / (size as f64 * n as f64);
        for q in 0..=ORDER {
            acc.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
            for l in 0..=ORDER - q {
                let (mom, ker) = (&moments[l], &spectra.kernels[q + l]);
                for ((a, x), y) in acc.iter_mut().zip(mom).zip(ker) {
                    *a += x * y;
                }
            }
            // spectrum of a real sequence: the end bins are real up to rounding
            acc[0].im = 0.0;
            if let Some(last) = acc.last_mut() {
                last.im = 0.0;
            }
            spectra
                .ifft
                .process(&mut acc, &mut out)
                .expect("buffer sizes match the plan");
            for k in 0..nodes {
                coef[k * (ORDER + 1) + q] = out[k] * scale * inv_fact[q];
            }
        }
        // unit-step part of the zeroth-order kernel: members of bins strictly left
        let mut below = 0.0;
        for k in 0..nodes {
            coef[k * (ORDER + 1)] += below / n as f64;
            below += counts[k];
        }

        Some(Self {
            origin,
            delta,
            inv_sigma,
            nodes,
            coef,
        })
    }

    /// `(F(x), F'(x))`, or `None` outside the grid.
    #[inline]
    pub(super) fn eval_with_density(&self, x: f64) -> Option<(f64, f64)> {
        let pos = ((x - self.origin) / self.delta).round();
        if !(pos >= 0.0 && pos < self.nodes as f64) {
            return None;
        }
        let k = pos as usize;
        let u = (x - (self.origin + k as f64 * self.delta)) * self.inv_sigma;
        let c = &self.coef[k * (ORDER + 1)..(k + 1) * (ORDER + 1)];
        let (mut f, mut df) = (c[ORDER], 0.0);
        for q in (0..ORDER).rev() {
            df = df * u + f;
            f = f * u + c[q];
        }
        Some((f, df * self.inv_sigma))
    }
}
