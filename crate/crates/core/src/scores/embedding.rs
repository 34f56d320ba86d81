use crate::error::{Error, Result};

const MAX_FREQUENCY: f64 = 1e4;

/// Sinusoidal embedding of a time already normalized to `[0, 1]`.
///
/// Returns interleaved `(sin(t w_j), cos(t w_j))` pairs with `dim / 2`
/// frequencies spaced geometrically from 1 to 1e4.
pub fn time_embedding(t: f64, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "embedding dimension must be even and positive, got {dim}"
        )));
    }
    let mut out = Vec::with_capacity(dim);
    write_time_embedding(t, &mut out, dim);
    Ok(out)
}

pub(crate) fn write_time_embedding(t: f64, out: &mut Vec<f64>, dim: usize) {
    let half = dim / 2;
    for j in 0..half {
        let w = if half == 1 {
            1.0
        } else {
            MAX_FREQUENCY.powf(j as f64 / (half - 1) as f64)
        };
        let (s, c) = (t * w).sin_cos();
        out.push(s);
        out.push(c);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_alternates() {
        let e = time_embedding(0.0, 8).unwrap();
        assert_eq!(e, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn odd_dimension_rejected() {
        assert!(time_embedding(0.5, 7).is_err());
        assert!(time_embedding(0.5, 0).is_err());
    }

    #[test]
    fn bounded_and_injective_on_discrete_grid() {
        let embs: Vec<Vec<f64>> = (1..=1000)
            .map(|t| time_embedding(t as f64 / 1000.0, 32).unwrap())
            .collect();
        for e in &embs {
            assert!(e.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
        for i in 0..embs.len() {
            for j in (i + 1)..embs.len() {
                assert_ne!(embs[i], embs[j], "grid points {} and {}", i + 1, j + 1);
            }
        }
    }
}
