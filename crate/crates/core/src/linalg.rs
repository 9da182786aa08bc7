//! Dense kernels used on hot paths.

/// Dot product with a fixed summation order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out[r * n_cols + c] = rows[r] . cols[c]` for row-major `rows` (`n_rows x k`)
/// and row-major `cols` (`n_cols x k`).
pub fn gram_block(rows: &[f64], n_rows: usize, cols: &[f64], n_cols: usize, k: usize, out: &mut [f64]) {
    assert_eq!(rows.len(), n_rows * k);
    assert_eq!(cols.len(), n_cols * k);
    assert_eq!(out.len(), n_rows * n_cols);
    if n_rows == 0 || n_cols == 0 {
        return;
    }
    if k == 0 {
        out.fill(0.0);
        return;
    }
    // SAFETY: the slice lengths checked above cover every index dgemm touches
    // with the given strides.
    unsafe {
        matrixmultiply::dgemm(
            n_rows,
            k,
            n_cols,
            1.0,
            rows.as_ptr(),
            k as isize,
            1,
            cols.as_ptr(),
            1,
            k as isize,
            0.0,
            out.as_mut_ptr(),
            n_cols as isize,
            1,
        );
    }
}

const LN2_HI: f64 = 6.931_471_803_691_238_164_9e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
/// `1.5 * 2^52`: adding and subtracting it rounds to the nearest integer.
const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0;
/// `1/n!` for `n = 13, 12, ..., 0`.
const INV_FACT: [f64; 14] = [
    1.0 / 6_227_020_800.0,
    1.0 / 479_001_600.0,
    1.0 / 39_916_800.0,
    1.0 / 3_628_800.0,
    1.0 / 362_880.0,
    1.0 / 40_320.0,
    1.0 / 5_040.0,
    1.0 / 720.0,
    1.0 / 120.0,
    1.0 / 24.0,
    1.0 / 6.0,
    0.5,
    1.0,
    1.0,
];

/// Branch-free `exp` accurate to a few ulp, written so loops over it vectorize.
/// Inputs are clamped to `[-708, 708]`.
#[inline(always)]
pub fn exp_fast(x: f64) -> f64 {
    let x = x.max(-708.0).min(708.0);
    let shifted = x * std::f64::consts::LOG2_E + ROUND_MAGIC;
    let k = shifted - ROUND_MAGIC;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    let mut p = INV_FACT[0];
    for c in &INV_FACT[1..] {
        p = p * r + c;
    }
    let ki = (shifted.to_bits() as i64).wrapping_sub(ROUND_MAGIC.to_bits() as i64);
    p * f64::from_bits(((ki + 1023) << 52) as u64)
}

#[inline(always)]
fn sigmoid_sq_residual_sum_body(lambda: f64, z: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 8;
    let n = z.len().min(b.len());
    let chunks = n / LANES;
    let mut acc = [0.0f64; LANES];
    for c in 0..chunks {
        let zs = &z[c * LANES..(c + 1) * LANES];
        let bs = &b[c * LANES..(c + 1) * LANES];
        for i in 0..LANES {
            let r = 1.0 / (1.0 + exp_fast(-lambda * zs[i])) - bs[i];
            acc[i] += r * r;
        }
    }
    let mut tail = 0.0;
    for i in chunks * LANES..n {
        let r = 1.0 / (1.0 + exp_fast(-lambda * z[i])) - b[i];
        tail += r * r;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn sigmoid_sq_residual_sum_avx512(lambda: f64, z: &[f64], b: &[f64]) -> f64 {
    sigmoid_sq_residual_sum_body(lambda, z, b)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn sigmoid_sq_residual_sum_avx2(lambda: f64, z: &[f64], b: &[f64]) -> f64 {
    sigmoid_sq_residual_sum_body(lambda, z, b)
}

/// `sum_m (sigmoid(lambda z_m) - b_m)^2`. Same result on every instruction
/// set, since no operation is fused or reordered.
pub fn sigmoid_sq_residual_sum(lambda: f64, z: &[f64], b: &[f64]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: the feature was detected at runtime.
            return unsafe { sigmoid_sq_residual_sum_avx512(lambda, z, b) };
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the feature was detected at runtime.
            return unsafe { sigmoid_sq_residual_sum_avx2(lambda, z, b) };
        }
    }
    sigmoid_sq_residual_sum_body(lambda, z, b)
}
