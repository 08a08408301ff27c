//! Uniformly partitioned overlap-save convolution in the frequency domain.

use std::sync::Arc;

use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

/// Forward/inverse transforms of size `2 * block` with their scratch space.
pub struct Transforms {
    block: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    time: Vec<f64>,
    spectrum: Vec<Complex64>,
    scratch_fwd: Vec<Complex64>,
    scratch_inv: Vec<Complex64>,
}

impl Transforms {
    pub fn new(block: usize) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(2 * block);
        let inverse = planner.plan_fft_inverse(2 * block);
        let scratch_fwd = forward.make_scratch_vec();
        let scratch_inv = inverse.make_scratch_vec();
        Self {
            block,
            time: vec![0.0; 2 * block],
            spectrum: vec![Complex64::new(0.0, 0.0); block + 1],
            scratch_fwd,
            scratch_inv,
            forward,
            inverse,
        }
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn bins(&self) -> usize {
        self.block + 1
    }

    /// Spectrum of `frame` (length `2 * block`) into split re/im arrays.
    fn forward(&mut self, frame: &[f64], re: &mut [f64], im: &mut [f64]) {
        self.time.copy_from_slice(frame);
        self.forward
            .process_with_scratch(&mut self.time, &mut self.spectrum, &mut self.scratch_fwd)
            .expect("buffer sizes match the plan");
        for ((c, r), i) in self.spectrum.iter().zip(re.iter_mut()).zip(im.iter_mut()) {
            *r = c.re;
            *i = c.im;
        }
    }

    /// Inverse transform of split re/im arrays; writes the last `block`
    /// samples (the valid overlap-save part) to `out`.
    fn inverse_tail(&mut self, re: &[f64], im: &[f64], out: &mut [f64]) {
        for ((c, &r), &i) in self.spectrum.iter_mut().zip(re).zip(im) {
            *c = Complex64::new(r, i);
        }
        let last = self.block;
        self.spectrum[0].im = 0.0;
        self.spectrum[last].im = 0.0;
        self.inverse
            .process_with_scratch(&mut self.spectrum, &mut self.time, &mut self.scratch_inv)
            .expect("buffer sizes match the plan");
        out.copy_from_slice(&self.time[self.block..]);
    }
}

/// Partition spectra of one impulse response, pre-scaled by the inverse
/// transform normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    block: usize,
    partitions: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Kernel {
    pub fn prepare(rir: &[f64], transforms: &mut Transforms) -> Self {
        let block = transforms.block();
        let bins = transforms.bins();
        let partitions = rir.len().div_ceil(block);
        let mut re = vec![0.0; partitions * bins];
        let mut im = vec![0.0; partitions * bins];
        let mut frame = vec![0.0; 2 * block];
        let scale = 1.0 / (2 * block) as f64;
        for p in 0..partitions {
            frame.fill(0.0);
            let chunk = &rir[p * block..((p + 1) * block).min(rir.len())];
            for (f, &h) in frame.iter_mut().zip(chunk) {
                *f = h * scale;
            }
            let range = p * bins..(p + 1) * bins;
            let (r, i) = (&mut re[range.clone()], &mut im[range]);
            transforms.forward(&frame, r, i);
        }
        Self { block, partitions, re, im }
    }

    pub fn partitions(&self) -> usize {
        self.partitions
    }

    pub fn block(&self) -> usize {
        self.block
    }
}

/// Frequency-domain delay line: spectra of the most recent input frames.
pub struct DelayLine {
    bins: usize,
    capacity: usize,
    head: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    frame: Vec<f64>,
    acc_re: Vec<f64>,
    acc_im: Vec<f64>,
}

impl DelayLine {
    /// Holds enough history for kernels of up to `capacity` partitions.
    pub fn new(block: usize, capacity: usize) -> Self {
        let bins = block + 1;
        let capacity = capacity.max(1);
        Self {
            bins,
            capacity,
            head: 0,
            re: vec![0.0; capacity * bins],
            im: vec![0.0; capacity * bins],
            frame: vec![0.0; 2 * block],
            acc_re: vec![0.0; bins],
            acc_im: vec![0.0; bins],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Shifts in one block of input.
    pub fn push(&mut self, block: &[f64], transforms: &mut Transforms) {
        let b = transforms.block();
        self.frame.copy_within(b.., 0);
        self.frame[b..].copy_from_slice(block);
        self.head = (self.head + 1) % self.capacity;
        let range = self.head * self.bins..(self.head + 1) * self.bins;
        transforms.forward(&self.frame, &mut self.re[range.clone()], &mut self.im[range]);
    }

    /// Output block of the convolution of the input history with `kernel`.
    pub fn convolve(&mut self, kernel: &Kernel, transforms: &mut Transforms, out: &mut [f64]) {
        self.acc_re.fill(0.0);
        self.acc_im.fill(0.0);
        let bins = self.bins;
        for p in 0..kernel.partitions.min(self.capacity) {
            let slot = (self.head + self.capacity - p) % self.capacity;
            let (xr, xi) = (&self.re[slot * bins..(slot + 1) * bins], &self.im[slot * bins..(slot + 1) * bins]);
            let (hr, hi) = (&kernel.re[p * bins..(p + 1) * bins], &kernel.im[p * bins..(p + 1) * bins]);
            for k in 0..bins {
                self.acc_re[k] += xr[k] * hr[k] - xi[k] * hi[k];
                self.acc_im[k] += xr[k] * hi[k] + xi[k] * hr[k];
            }
        }
        transforms.inverse_tail(&self.acc_re, &self.acc_im, out);
    }
}
