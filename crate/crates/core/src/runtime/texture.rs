//! Band-limited noise textures.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::RuntimeError;
use crate::rng::Rng;
use crate::scene::Texture;

/// Signed frequency of DFT bin `k` of an `n`-point transform, in cycles
/// per texture.
pub fn bin_frequency(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Radial frequency of bin `(ky, kx)`.
pub fn radial_frequency(ky: usize, kx: usize, n: usize) -> f64 {
    bin_frequency(ky, n).hypot(bin_frequency(kx, n))
}

/// In-place 2D DFT of a row-major `n × n` array.
pub fn fft2(data: &mut [Complex64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    for row in data.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for x in 0..n {
        for y in 0..n {
            col[y] = data[y * n + x];
        }
        fft.process(&mut col);
        for y in 0..n {
            data[y * n + x] = col[y];
        }
    }
}

fn rescale(values: &[f64]) -> Vec<f32> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    if hi <= lo {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| ((v - lo) / (hi - lo)) as f32).collect()
}

/// White noise low-pass filtered to radial frequency `cutoff` (cycles per
/// texture; DC always kept) and rescaled affinely to `[0, 1]`. A constant
/// result maps to 0.5.
pub fn band_limited_noise(size: usize, cutoff: f64, rng: &mut Rng) -> Result<Texture, RuntimeError> {
    if !(cutoff > 0.0) {
        return Err(RuntimeError::InvalidCutoff(cutoff));
    }
    if size == 0 || !size.is_power_of_two() {
        return Err(RuntimeError::InvalidJobSpec(format!("texture size {size} is not a power of two")));
    }
    let n = size;
    let noise: Vec<f64> = (0..n * n).map(|_| rng.next_f64()).collect();
    let max_radius = (n as f64 / 2.0) * std::f64::consts::SQRT_2;
    if cutoff >= max_radius {
        return Ok(Texture { size, data: rescale(&noise) });
    }
    if cutoff < 1.0 {
        return Ok(Texture { size, data: vec![0.5; n * n] });
    }
    let mut spectrum: Vec<Complex64> = noise.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    fft2(&mut spectrum, n, false);
    for ky in 0..n {
        for kx in 0..n {
            if (ky, kx) != (0, 0) && radial_frequency(ky, kx, n) > cutoff {
                spectrum[ky * n + kx] = Complex64::new(0.0, 0.0);
            }
        }
    }
    fft2(&mut spectrum, n, true);
    let scale = 1.0 / (n * n) as f64;
    let filtered: Vec<f64> = spectrum.iter().map(|c| c.re * scale).collect();
    Ok(Texture { size, data: rescale(&filtered) })
}
