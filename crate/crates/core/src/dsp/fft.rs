//! Complex FFT for arbitrary lengths.
//!
//! Lengths whose prime factors are all small go through a recursive
//! mixed-radix decimation-in-time transform (radix 4 and 2 butterflies, plus a
//! generic small-prime butterfly). Lengths with a large prime factor fall back
//! to Bluestein's chirp-z algorithm over a power-of-two transform.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

/// Largest prime handled by the generic butterfly before switching to Bluestein.
const MAX_DIRECT_PRIME: usize = 61;

pub struct Fft {
    n: usize,
    kind: Kind,
}

enum Kind {
    Direct {
        factors: Vec<usize>,
        twiddles: Vec<Complex64>,
    },
    Bluestein(Box<Bluestein>),
}

struct Bluestein {
    inner: Fft,
    chirp: Vec<Complex64>,
    kernel_spectrum: Vec<Complex64>,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        match factorize(n) {
            Some(factors) => Self {
                n,
                kind: Kind::Direct {
                    factors,
                    twiddles: twiddle_table(n),
                },
            },
            None => Self {
                n,
                kind: Kind::Bluestein(Box::new(Bluestein::new(n))),
            },
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform, `X[k] = Σ x[j]·e^{-2πi jk/n}`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n);
        match &self.kind {
            Kind::Direct { factors, twiddles } => {
                let input = buf.to_vec();
                let mut scratch = Vec::new();
                recurse(&input, 0, 1, buf, factors, twiddles, self.n, &mut scratch);
            }
            Kind::Bluestein(b) => b.forward(buf),
        }
    }

    /// Inverse transform normalized by `1/n`.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        for v in buf.iter_mut() {
            *v = v.conj();
        }
        self.forward(buf);
        let scale = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v = v.conj() * scale;
        }
    }
}

fn factorize(mut n: usize) -> Option<Vec<usize>> {
    let mut factors = Vec::new();
    while n.is_multiple_of(4) {
        factors.push(4);
        n /= 4;
    }
    while n.is_multiple_of(2) {
        factors.push(2);
        n /= 2;
    }
    let mut p = 3;
    while n > 1 {
        if p > MAX_DIRECT_PRIME {
            return None;
        }
        while n.is_multiple_of(p) {
            factors.push(p);
            n /= p;
        }
        p += 2;
    }
    Some(factors)
}

fn twiddle_table(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|j| {
            let theta = -2.0 * PI * j as f64 / n as f64;
            Complex64::new(theta.cos(), theta.sin())
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    input: &[Complex64],
    offset: usize,
    stride: usize,
    out: &mut [Complex64],
    factors: &[usize],
    twiddles: &[Complex64],
    total: usize,
    scratch: &mut Vec<Complex64>,
) {
    let n = out.len();
    if n == 1 {
        out[0] = input[offset];
        return;
    }
    let p = factors[0];
    if n == p {
        // Last factor: a plain length-p DFT of the strided input.
        let root_step = total / p;
        for (s, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut idx = 0;
            for q in 0..p {
                acc += input[offset + q * stride] * twiddles[idx * root_step];
                idx += s;
                if idx >= p {
                    idx -= p;
                }
            }
            *o = acc;
        }
        return;
    }
    let m = n / p;
    for q in 0..p {
        recurse(
            input,
            offset + q * stride,
            stride * p,
            &mut out[q * m..(q + 1) * m],
            &factors[1..],
            twiddles,
            total,
            scratch,
        );
    }
    let step = total / n;
    match p {
        2 => {
            let (lo, hi) = out.split_at_mut(m);
            for k in 0..m {
                let a = lo[k];
                let b = hi[k] * twiddles[k * step];
                lo[k] = a + b;
                hi[k] = a - b;
            }
        }
        4 => {
            for k in 0..m {
                let y0 = out[k];
                let y1 = out[k + m] * twiddles[k * step];
                let y2 = out[k + 2 * m] * twiddles[2 * k * step];
                let y3 = out[k + 3 * m] * twiddles[3 * k * step];
                let t0 = y0 + y2;
                let t1 = y0 - y2;
                let t2 = y1 + y3;
                let d = y1 - y3;
                // (y1 - y3) · (-i)
                let t3 = Complex64::new(d.im, -d.re);
                out[k] = t0 + t2;
                out[k + m] = t1 + t3;
                out[k + 2 * m] = t0 - t2;
                out[k + 3 * m] = t1 - t3;
            }
        }
        _ => {
            let root_step = total / p;
            scratch.clear();
            scratch.resize(2 * p, Complex64::new(0.0, 0.0));
            let (vals, roots) = scratch.split_at_mut(p);
            for (j, r) in roots.iter_mut().enumerate() {
                *r = twiddles[j * root_step];
            }
            for k in 0..m {
                for q in 0..p {
                    vals[q] = out[k + q * m] * twiddles[q * k * step];
                }
                for s in 0..p {
                    let mut acc = vals[0];
                    let mut idx = s;
                    for v in &vals[1..] {
                        acc += v * roots[idx];
                        idx += s;
                        if idx >= p {
                            idx -= p;
                        }
                    }
                    out[k + s * m] = acc;
                }
            }
        }
    }
}

impl Bluestein {
    fn new(n: usize) -> Self {
        let m = (2 * n - 1).next_power_of_two();
        let inner = Fft::new(m);
        let two_n = 2 * n as u128;
        let chirp: Vec<Complex64> = (0..n)
            .map(|k| {
                // k² mod 2n keeps the phase argument small.
                let k2 = ((k as u128 * k as u128) % two_n) as f64;
                let theta = -PI * k2 / n as f64;
                Complex64::new(theta.cos(), theta.sin())
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for k in 1..n {
            kernel[k] = chirp[k].conj();
            kernel[m - k] = chirp[k].conj();
        }
        inner.forward(&mut kernel);
        Self {
            inner,
            chirp,
            kernel_spectrum: kernel,
        }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let n = buf.len();
        let m = self.inner.len();
        let mut work = vec![Complex64::new(0.0, 0.0); m];
        for k in 0..n {
            work[k] = buf[k] * self.chirp[k];
        }
        self.inner.forward(&mut work);
        for (w, h) in work.iter_mut().zip(&self.kernel_spectrum) {
            *w *= h;
        }
        self.inner.inverse(&mut work);
        for k in 0..n {
            buf[k] = work[k] * self.chirp[k];
        }
    }
}

/// Full complex spectrum of a real signal.
pub fn real_spectrum(plan: &Fft, x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.forward(&mut buf);
    buf
}

/// Spectra of two real signals computed with a single complex transform.
pub fn real_spectrum_pair(plan: &Fft, x: &[f64], y: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = x.len();
    let mut z: Vec<Complex64> = x.iter().zip(y).map(|(&a, &b)| Complex64::new(a, b)).collect();
    plan.forward(&mut z);
    let mut sx = Vec::with_capacity(n);
    let mut sy = Vec::with_capacity(n);
    for k in 0..n {
        let zk = z[k];
        let zc = z[(n - k) % n].conj();
        sx.push((zk + zc) * 0.5);
        let d = (zk - zc) * 0.5;
        // divide by i
        sy.push(Complex64::new(d.im, -d.re));
    }
    (sx, sy)
}

/// Real parts of the inverse transforms of two Hermitian spectra.
pub fn inverse_real_pair(plan: &Fft, sx: &[Complex64], sy: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let mut z: Vec<Complex64> = sx
        .iter()
        .zip(sy)
        .map(|(a, b)| a + Complex64::new(-b.im, b.re))
        .collect();
    plan.inverse(&mut z);
    (z.iter().map(|v| v.re).collect(), z.iter().map(|v| v.im).collect())
}

/// Real part of the inverse transform of a Hermitian spectrum.
pub fn inverse_real(plan: &Fft, spectrum: &[Complex64]) -> Vec<f64> {
    let mut buf = spectrum.to_vec();
    plan.inverse(&mut buf);
    buf.into_iter().map(|v| v.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let theta = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
                        v * Complex64::new(theta.cos(), theta.sin())
                    })
                    .sum()
            })
            .collect()
    }

    fn signal(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                Complex64::new((0.37 * t).sin() + 0.1 * t.cos(), (1.3 * t).cos() - 0.02 * t)
            })
            .collect()
    }

    #[test]
    fn matches_direct_dft_for_all_small_lengths() {
        for n in 1..=64 {
            let x = signal(n);
            let expect = dft(&x);
            let mut got = x.clone();
            Fft::new(n).forward(&mut got);
            let err = got
                .iter()
                .zip(&expect)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-9, "n={n} max error {err}");
        }
    }

    #[test]
    fn bluestein_lengths_match_dft() {
        for n in [67, 127, 134, 2 * 3 * 101] {
            assert!(factorize(n).is_none());
            let x = signal(n);
            let expect = dft(&x);
            let mut got = x.clone();
            Fft::new(n).forward(&mut got);
            let err = got
                .iter()
                .zip(&expect)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-8, "n={n} max error {err}");
        }
    }

    #[test]
    fn inverse_round_trips() {
        let x = signal(300);
        let plan = Fft::new(300);
        let mut buf = x.clone();
        plan.forward(&mut buf);
        plan.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn paired_real_spectra_match_single() {
        let n = 90;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.05).cos() + 0.5).collect();
        let plan = Fft::new(n);
        let (sx, sy) = real_spectrum_pair(&plan, &x, &y);
        let ex = real_spectrum(&plan, &x);
        let ey = real_spectrum(&plan, &y);
        for k in 0..n {
            assert!((sx[k] - ex[k]).norm() < 1e-10);
            assert!((sy[k] - ey[k]).norm() < 1e-10);
        }
        let (bx, by) = inverse_real_pair(&plan, &sx, &sy);
        for k in 0..n {
            assert!((bx[k] - x[k]).abs() < 1e-12);
            assert!((by[k] - y[k]).abs() < 1e-12);
        }
    }
}
