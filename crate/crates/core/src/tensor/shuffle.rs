use super::{Dims, Tensor};
use crate::error::{Error, Result};

pub fn pixel_shuffle_dims(input: Dims, r: usize) -> Result<Dims> {
    let [n, c, h, w] = input;
    if r == 0 {
        return Err(Error::invalid("pixel_shuffle", "factor must be >= 1"));
    }
    if c % (r * r) != 0 {
        return Err(Error::shape(
            "pixel_shuffle",
            "channels",
            format!("multiple of {}", r * r),
            c,
        ));
    }
    Ok([n, c / (r * r), h * r, w * r])
}

/// Rearranges `(b, c*r^2, h, w)` into `(b, c, h*r, w*r)`:
/// `out[b][c][y*r+dy][x*r+dx] = in[b][c*r^2 + dy*r + dx][y][x]`.
pub fn pixel_shuffle(input: &Tensor, r: usize) -> Result<Tensor> {
    let out_dims = pixel_shuffle_dims(input.shape(), r)?;
    let [n, c, oh, ow] = out_dims;
    let (h, w) = (input.height(), input.width());
    let mut out = Tensor::zeros(out_dims);
    for b in 0..n {
        for ch in 0..c {
            for dy in 0..r {
                for dx in 0..r {
                    let src = input.plane(b, ch * r * r + dy * r + dx);
                    for y in 0..h {
                        for x in 0..w {
                            let i = out.index(b, ch, y * r + dy, x * r + dx);
                            out.data_mut()[i] = src[y * w + x];
                        }
                    }
                }
            }
        }
    }
    debug_assert_eq!(out.shape(), [n, c, oh, ow]);
    Ok(out)
}

/// Exact inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle(input: &Tensor, r: usize) -> Result<Tensor> {
    let [n, c, h, w] = input.shape();
    if r == 0 {
        return Err(Error::invalid("pixel_unshuffle", "factor must be >= 1"));
    }
    if h % r != 0 {
        return Err(Error::shape("pixel_unshuffle", "height", format!("multiple of {r}"), h));
    }
    if w % r != 0 {
        return Err(Error::shape("pixel_unshuffle", "width", format!("multiple of {r}"), w));
    }
    let (oh, ow) = (h / r, w / r);
    let mut out = Tensor::zeros([n, c * r * r, oh, ow]);
    for b in 0..n {
        for ch in 0..c {
            for dy in 0..r {
                for dx in 0..r {
                    let oc = ch * r * r + dy * r + dx;
                    for y in 0..oh {
                        for x in 0..ow {
                            let v = input.get(b, ch, y * r + dy, x * r + dx);
                            out.set(b, oc, y, x, v);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stated_mapping() {
        let x = Tensor::new([1, 4, 1, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = pixel_shuffle(&x, 2).unwrap();
        assert_eq!(y.shape(), [1, 1, 2, 2]);
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(pixel_unshuffle(&y, 2).unwrap(), x);
    }

    #[test]
    fn factor_one_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::random_uniform([1, 3, 4, 5], -1.0, 1.0, &mut rng);
        assert_eq!(pixel_shuffle(&x, 1).unwrap(), x);
        assert_eq!(pixel_unshuffle(&x, 1).unwrap(), x);
    }

    #[test]
    fn round_trip_48_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::random_uniform([1, 48, 7, 5], -1.0, 1.0, &mut rng);
        let up = pixel_shuffle(&x, 4).unwrap();
        assert_eq!(up.shape(), [1, 3, 28, 20]);
        assert_eq!(pixel_unshuffle(&up, 4).unwrap(), x);
    }

    #[test]
    fn shape_of_x4_tail() {
        assert_eq!(pixel_shuffle_dims([1, 48, 16, 16], 4).unwrap(), [1, 3, 64, 64]);
    }

    #[test]
    fn indivisible_inputs_error() {
        assert!(pixel_shuffle(&Tensor::zeros([1, 6, 2, 2]), 2).is_err());
        assert!(pixel_unshuffle(&Tensor::zeros([1, 1, 3, 4]), 2).is_err());
        assert!(pixel_unshuffle(&Tensor::zeros([1, 1, 4, 3]), 2).is_err());
    }

    proptest! {
        #[test]
        fn shuffle_is_a_permutation(c in 1usize..4, r in 1usize..4, h in 1usize..5, w in 1usize..5, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Tensor::random_uniform([1, c * r * r, h, w], -1.0, 1.0, &mut rng);
            let y = pixel_shuffle(&x, r).unwrap();
            let mut a: Vec<u64> = x.data().iter().map(|v| v.to_bits()).collect();
            let mut b: Vec<u64> = y.data().iter().map(|v| v.to_bits()).collect();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
            prop_assert_eq!(pixel_unshuffle(&y, r).unwrap(), x);
        }
    }
}
