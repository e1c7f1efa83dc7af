use crate::tensor::Tensor;

/// Interleaved sinusoidal encoding: channel `2k` is `sin(t w_k)`, channel
/// `2k + 1` is `cos(t w_k)`, with `w_k = 10000^(-2k / dim)`.
pub fn sinusoidal_pe(t_len: usize, dim: usize) -> Tensor {
    let mut out = Tensor::zeros(t_len, dim);
    for t in 0..t_len {
        for c in 0..dim {
            let k = (c / 2) as f64;
            let w = 10000f64.powf(-2.0 * k / dim as f64);
            let angle = t as f64 * w;
            out.set(t, c, if c % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn position_zero_is_sin_zero_cos_one() {
        let pe = sinusoidal_pe(3, 32);
        for c in 0..32 {
            assert_eq!(pe.get(0, c), if c % 2 == 0 { 0.0 } else { 1.0 });
        }
    }

    #[test]
    fn bounded_and_rows_distinct() {
        let pe = sinusoidal_pe(300, 32);
        assert!(pe.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        for a in 0..300 {
            for b in a + 1..300 {
                let d: f64 = pe.row_slice(a).iter().zip(pe.row_slice(b)).map(|(x, y)| (x - y).abs()).sum();
                assert!(d > 1e-6, "rows {a} and {b} collide");
            }
        }
    }
}
