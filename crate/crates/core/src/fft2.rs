//! Row-column 2D FFT helpers over row-major complex buffers.

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

/// In-place 2D FFT of a `rows`×`cols` row-major buffer. The inverse
/// transform is unnormalized; callers divide by `rows * cols` if needed.
pub fn fft2(data: &mut [Complex64], rows: usize, cols: usize, direction: FftDirection) {
    assert_eq!(data.len(), rows * cols);
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft(cols, direction);
    for line in data.chunks_exact_mut(cols) {
        row_fft.process(line);
    }
    let col_fft = planner.plan_fft(rows, direction);
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[r * cols + c];
        }
        col_fft.process(&mut column);
        for r in 0..rows {
            data[r * cols + c] = column[r];
        }
    }
}

/// Swaps quadrants so index `(0, 0)` moves to `(rows/2, cols/2)`.
pub fn fftshift<T: Copy>(data: &[T], rows: usize, cols: usize) -> Vec<T> {
    roll(data, rows, cols, rows / 2, cols / 2)
}

/// Inverse of [`fftshift`]; identical for even sizes.
pub fn ifftshift<T: Copy>(data: &[T], rows: usize, cols: usize) -> Vec<T> {
    roll(data, rows, cols, rows - rows / 2, cols - cols / 2)
}

fn roll<T: Copy>(data: &[T], rows: usize, cols: usize, dr: usize, dc: usize) -> Vec<T> {
    let mut out = data.to_vec();
    for r in 0..rows {
        let rr = (r + dr) % rows;
        for c in 0..cols {
            out[rr * cols + (c + dc) % cols] = data[r * cols + c];
        }
    }
    out
}
