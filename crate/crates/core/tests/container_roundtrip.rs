use cpse_core::container::{read_manifest, TensorData, MAGIC};
use cpse_core::{read_container, validate_container, write_container, Container, ContainerError, WeightTensor};
use proptest::prelude::*;

mod common;

use common::container;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn write_then_read_is_identity(c in container()) {
        prop_assert!(validate_container(&c).is_empty());
        let bytes = write_container(&c.layers, c.graph.as_ref()).unwrap();
        let back = read_container(&bytes).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn truncation_is_detected(c in container(), cut in any::<prop::sample::Index>()) {
        let bytes = c.to_bytes().unwrap();
        let at = cut.index(bytes.len());
        prop_assert!(read_container(&bytes[..at]).is_err());
    }
}

#[test]
fn header_layout() {
    let c = Container::new(vec![WeightTensor::f32("w", vec![2, 2], vec![1.0, 2.0, 3.0, 4.0])], None);
    let bytes = c.to_bytes().unwrap();
    assert_eq!(bytes[..4], MAGIC);
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let (manifest, data_start) = read_manifest(&bytes).unwrap();
    assert_eq!(data_start, 16 + len);
    assert_eq!(manifest.layers[0].nbytes, 16);
    assert_eq!(bytes.len(), data_start + 16);
    assert_eq!(&bytes[data_start..data_start + 4], &1.0f32.to_le_bytes());
}

#[test]
fn nan_payloads_survive() {
    let weird = f64::from_bits(0x7ff8_dead_beef_0001);
    let c = Container::new(vec![WeightTensor::f64("w", vec![1], vec![weird])], None);
    let back = read_container(&c.to_bytes().unwrap()).unwrap();
    match &back.layers[0].data {
        TensorData::F64(v) => assert_eq!(v[0].to_bits(), weird.to_bits()),
        other => panic!("{other:?}"),
    }
}

#[test]
fn not_a_container() {
    assert!(matches!(
        read_container(b"PK\x03\x04 zip file"),
        Err(ContainerError::BadMagic)
    ));
}
