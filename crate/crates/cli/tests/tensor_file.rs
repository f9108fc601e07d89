use itst::tensor::Tensor;
use itst_cli::tensor_file::{decode, encode, AnyTensor};
use proptest::collection::vec;
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = Vec<usize>> {
    vec(1..6usize, 1..=4)
}

proptest! {
    #[test]
    fn f64_round_trip_is_bit_exact(
        (dims, bits) in shape().prop_flat_map(|d| {
            let n: usize = d.iter().product();
            (Just(d), vec(any::<u64>(), n))
        })
    ) {
        let t = Tensor::new(dims, bits.iter().map(|&b| f64::from_bits(b)).collect()).unwrap();
        let bytes = encode(&t);
        prop_assert_eq!(bytes.len(), 8 + 4 * t.rank() + 8 * t.numel());
        match decode(&bytes).unwrap() {
            AnyTensor::F64(back) => {
                prop_assert_eq!(back.shape(), t.shape());
                let a: Vec<u64> = back.data().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(a, bits);
            }
            other => prop_assert!(false, "wrong dtype {:?}", other.shape()),
        }
    }

    #[test]
    fn f32_round_trip_is_bit_exact(
        (dims, bits) in shape().prop_flat_map(|d| {
            let n: usize = d.iter().product();
            (Just(d), vec(any::<u32>(), n))
        })
    ) {
        let t = Tensor::new(dims, bits.iter().map(|&b| f32::from_bits(b)).collect()).unwrap();
        let bytes = encode(&t);
        prop_assert_eq!(bytes[6], 0);
        match decode(&bytes).unwrap() {
            AnyTensor::F32(back) => {
                let a: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(a, bits);
            }
            other => prop_assert!(false, "wrong dtype {:?}", other.shape()),
        }
    }
}
