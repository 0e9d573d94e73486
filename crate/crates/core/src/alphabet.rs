//! Mid-rise finite alphabets, bipolar bit-plane encoding and two's-complement
//! input quantization.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

pub const MAX_ALPHABET_BITS: u32 = 8;
pub const MAX_INPUT_BITS: u32 = 32;

/// Odd integers `-(2^K - 1), ..., -1, +1, ..., 2^K - 1` in ascending order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MidRiseAlphabet {
    bits: u32,
    values: Vec<i32>,
}

impl MidRiseAlphabet {
    pub fn new(bits: u32) -> Result<Self> {
        check_alphabet_bits(bits)?;
        let top = max_level(bits);
        Ok(Self {
            bits,
            values: (-top..=top).step_by(2).collect(),
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn max_level(&self) -> i32 {
        max_level(self.bits)
    }

    pub fn contains(&self, v: i64) -> bool {
        v.rem_euclid(2) == 1 && v.abs() <= self.max_level() as i64
    }
}

pub fn alphabet_values(bits: u32) -> Result<MidRiseAlphabet> {
    MidRiseAlphabet::new(bits)
}

pub(crate) fn check_alphabet_bits(bits: u32) -> Result<()> {
    if !(1..=MAX_ALPHABET_BITS).contains(&bits) {
        return Err(Error::InvalidArgument(format!(
            "alphabet resolution must be 1..={MAX_ALPHABET_BITS} bits, got {bits}"
        )));
    }
    Ok(())
}

/// Largest alphabet magnitude, `2^K - 1`.
#[inline]
pub fn max_level(bits: u32) -> i32 {
    (1i32 << bits) - 1
}

/// Nearest alphabet value; a value midway between two levels goes up and
/// anything beyond the outer levels clips.
pub fn quantize_to_alphabet<T: Real>(z: T, bits: u32) -> Result<i32> {
    check_alphabet_bits(bits)?;
    if !z.is_finite() {
        return Err(Error::NonFinite("alphabet quantizer input"));
    }
    Ok(quantize_unchecked(z.to_f64_lossy(), bits))
}

#[inline]
pub(crate) fn quantize_unchecked(z: f64, bits: u32) -> i32 {
    let top = max_level(bits) as f64;
    let z = z.clamp(-top - 1.0, top + 1.0);
    // the odd integer 2*floor(z/2)+1 is nearest on [2m, 2m+2)
    let q = 2.0 * (z / 2.0).floor() + 1.0;
    q.clamp(-top, top) as i32
}

/// Quantizes real and imaginary parts independently.
pub(crate) fn quantize_complex(z: Complex<f64>, bits: u32) -> Complex<i32> {
    Complex::new(quantize_unchecked(z.re, bits), quantize_unchecked(z.im, bits))
}

/// Bipolar digits `c_k in {-1, +1}` with `value = sum_k 2^k c_k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitPlanes {
    signs: Vec<i8>,
}

impl BitPlanes {
    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// Stored-bit view (`1` for `+1`, `0` for `-1`), least significant first.
    pub fn bits(&self) -> impl Iterator<Item = u8> + '_ {
        self.signs.iter().map(|&c| u8::from(c > 0))
    }
}

pub fn bitplane_encode(value: i32, bits: u32) -> Result<BitPlanes> {
    check_alphabet_bits(bits)?;
    if !MidRiseAlphabet::new(bits)?.contains(value as i64) {
        return Err(Error::NotInAlphabet {
            value: value as i64,
            bits,
        });
    }
    // (v + 2^K - 1) / 2 is the unsigned index whose binary digits are the planes
    let index = ((value + max_level(bits)) / 2) as u32;
    Ok(BitPlanes {
        signs: (0..bits)
            .map(|k| if (index >> k) & 1 == 1 { 1 } else { -1 })
            .collect(),
    })
}

pub fn bitplane_decode(planes: &BitPlanes) -> i32 {
    planes
        .signs
        .iter()
        .enumerate()
        .map(|(k, &c)| (1i32 << k) * c as i32)
        .sum()
}

/// `L`-bit two's-complement integer vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointVector {
    bits: u32,
    entries: Vec<i64>,
}

impl FixedPointVector {
    pub fn new(bits: u32, entries: Vec<i64>) -> Result<Self> {
        check_input_bits(bits)?;
        let (lo, hi) = input_range(bits);
        if let Some(&bad) = entries.iter().find(|&&e| e < lo || e > hi) {
            return Err(Error::InvalidArgument(format!(
                "entry {bad} does not fit in {bits}-bit two's complement"
            )));
        }
        Ok(Self { bits, entries })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn entries(&self) -> &[i64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub(crate) fn check_input_bits(bits: u32) -> Result<()> {
    if !(2..=MAX_INPUT_BITS).contains(&bits) {
        return Err(Error::InvalidArgument(format!(
            "input word length must be 2..={MAX_INPUT_BITS} bits, got {bits}"
        )));
    }
    Ok(())
}

/// `[-2^(L-1), 2^(L-1) - 1]`.
pub fn input_range(bits: u32) -> (i64, i64) {
    let half = 1i64 << (bits - 1);
    (-half, half - 1)
}

/// Rounds `x / scale` half away from zero and saturates to `L` bits.
pub fn quantize_scalar(x: f64, bits: u32, scale: f64) -> i64 {
    let (lo, hi) = input_range(bits);
    let r = (x / scale).round();
    if r.is_nan() {
        0
    } else {
        r.clamp(lo as f64, hi as f64) as i64
    }
}

/// Quantizes real and imaginary parts of `y` to `L`-bit integers.
pub fn quantize_input<T: Real>(
    y: &[Complex<T>],
    bits: u32,
    scale: f64,
) -> Result<(FixedPointVector, FixedPointVector)> {
    check_input_bits(bits)?;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let re = y.iter().map(|z| quantize_scalar(z.re.to_f64_lossy(), bits, scale)).collect();
    let im = y.iter().map(|z| quantize_scalar(z.im.to_f64_lossy(), bits, scale)).collect();
    Ok((
        FixedPointVector { bits, entries: re },
        FixedPointVector { bits, entries: im },
    ))
}

/// Bit `l` of each entry's two's-complement encoding (`l = L - 1` is the
/// sign bit).
pub fn extract_bitplane(v: &FixedPointVector, l: u32) -> Result<Vec<u8>> {
    if l >= v.bits {
        return Err(Error::InvalidArgument(format!(
            "bit index {l} out of range for {}-bit words",
            v.bits
        )));
    }
    Ok(v.entries.iter().map(|&e| ((e >> l) & 1) as u8).collect())
}

/// Weight of bit `l` in an `L`-bit two's-complement word.
pub fn bit_weight(l: u32, bits: u32) -> i64 {
    if l + 1 == bits {
        -(1i64 << l)
    } else {
        1i64 << l
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn alphabet_levels() {
        assert_eq!(alphabet_values(1).unwrap().values(), &[-1, 1]);
        assert_eq!(alphabet_values(2).unwrap().values(), &[-3, -1, 1, 3]);
        assert_eq!(alphabet_values(3).unwrap().values(), &[-7, -5, -3, -1, 1, 3, 5, 7]);
        assert!(alphabet_values(0).is_err());
        assert!(alphabet_values(9).is_err());
        let a = alphabet_values(8).unwrap();
        assert_eq!(a.values().len(), 256);
        assert!(a.values().windows(2).all(|w| w[1] - w[0] == 2));
    }

    #[test]
    fn quantizer_examples() {
        assert_eq!(quantize_to_alphabet(2.2, 2).unwrap(), 3);
        for k in 1..=8 {
            assert_eq!(quantize_to_alphabet(0.0, k).unwrap(), 1);
        }
        assert_eq!(quantize_to_alphabet(-5.0, 2).unwrap(), -3);
        assert_eq!(quantize_to_alphabet(-2.0, 2).unwrap(), -1);
        assert_eq!(quantize_to_alphabet(1e300, 3).unwrap(), 7);
        assert!(quantize_to_alphabet(f64::NAN, 1).is_err());
        assert!(quantize_to_alphabet(f64::INFINITY, 1).is_err());
    }

    #[test]
    fn bitplane_examples() {
        assert_eq!(bitplane_encode(3, 2).unwrap().signs(), &[1, 1]);
        assert_eq!(bitplane_encode(-1, 2).unwrap().signs(), &[1, -1]);
        assert_eq!(bitplane_encode(1, 1).unwrap().signs(), &[1]);
        assert!(bitplane_encode(2, 2).is_err());
        assert!(bitplane_encode(5, 2).is_err());
    }

    #[test]
    fn input_quantizer_examples() {
        let y = [
            Complex::new(3.4, -8.7),
            Complex::new(7.9, 0.5),
            Complex::new(-0.5, 2.5),
        ];
        let (re, im) = quantize_input(&y, 4, 1.0).unwrap();
        assert_eq!(re.entries(), &[3, 7, -1]);
        assert_eq!(im.entries(), &[-8, 1, 3]);
        assert!(quantize_input(&y, 4, 0.0).is_err());
    }

    #[test]
    fn bitplane_extraction_examples() {
        let v = FixedPointVector::new(3, vec![-3]).unwrap();
        let planes: Vec<u8> = (0..3).rev().map(|l| extract_bitplane(&v, l).unwrap()[0]).collect();
        assert_eq!(planes, vec![1, 0, 1]);
        let z = FixedPointVector::new(5, vec![0, 0]).unwrap();
        assert!((0..5).all(|l| extract_bitplane(&z, l).unwrap() == vec![0, 0]));
        let m = FixedPointVector::new(4, vec![-1]).unwrap();
        assert!((0..4).all(|l| extract_bitplane(&m, l).unwrap() == vec![1]));
        assert!(extract_bitplane(&m, 4).is_err());
        assert!(FixedPointVector::new(4, vec![8]).is_err());
        assert!(FixedPointVector::new(1, vec![0]).is_err());
    }

    proptest! {
        #[test]
        fn bitplanes_round_trip(bits in 1u32..=8, idx in 0u32..256) {
            let a = alphabet_values(bits).unwrap();
            let v = a.values()[(idx as usize) % a.values().len()];
            prop_assert_eq!(bitplane_decode(&bitplane_encode(v, bits).unwrap()), v);
            prop_assert_eq!(quantize_to_alphabet(v as f64, bits).unwrap(), v);
        }

        #[test]
        fn quantizer_is_monotone(bits in 1u32..=8, a in -300.0f64..300.0, d in 0.0f64..50.0) {
            let lo = quantize_to_alphabet(a, bits).unwrap();
            let hi = quantize_to_alphabet(a + d, bits).unwrap();
            prop_assert!(lo <= hi);
            // nearest level
            let top = max_level(bits) as f64;
            if a.abs() <= top {
                prop_assert!((a - lo as f64).abs() <= 1.0);
            }
        }

        #[test]
        fn twos_complement_reconstruction(bits in 2u32..=32, raw in any::<i64>()) {
            let (lo, hi) = input_range(bits);
            let e = lo + (raw.rem_euclid(hi - lo + 1));
            let v = FixedPointVector::new(bits, vec![e]).unwrap();
            let rebuilt: i64 = (0..bits)
                .map(|l| bit_weight(l, bits) * extract_bitplane(&v, l).unwrap()[0] as i64)
                .sum();
            prop_assert_eq!(rebuilt, e);
        }
    }
}
