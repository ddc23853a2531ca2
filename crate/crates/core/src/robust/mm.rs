use crate::error::{Error, Result};
use crate::robust::aggregate::{aggregate_unchecked, AggRule};

/// Median of K block means. Samples are split in order into K contiguous
/// blocks of size ⌊n/K⌋, with the remainder handed out one extra sample per
/// block starting from the first.
pub fn mm_mean(samples: &[f64], k: usize) -> Result<f64> {
    let n = samples.len();
    if k == 0 {
        return Err(Error::InvalidParameter("number of blocks must be at least 1".into()));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!("{k} blocks requested for {n} samples")));
    }
    let base = n / k;
    if base < 2 {
        log::warn!("median-of-means block size {base} is below 2");
    }
    let extra = n % k;
    let mut means = Vec::with_capacity(k);
    let mut start = 0;
    for b in 0..k {
        let len = base + usize::from(b < extra);
        let block = &samples[start..start + len];
        means.push(block.iter().sum::<f64>() / len as f64);
        start += len;
    }
    Ok(aggregate_unchecked(&means, AggRule::Median))
}

/// K = ⌈8 ln(2/δ)⌉ blocks for confidence 1 − δ.
pub fn k_for_delta(delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok((8.0 * (2.0 / delta).ln()).ceil() as usize)
}
