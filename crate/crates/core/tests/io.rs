mod common;

use common::gen;
use mmm::io::{
    read_file, read_file_as, read_matrix, write_any, write_file, write_matrix, HEADER_LEN,
};
use mmm::matgen::Structure;
use mmm::matrix::AnyMatrix;
use mmm::{DenseMatrix, ElemKind, Error, LaneConfig};

#[test]
fn large_random_round_trip_both_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let a: DenseMatrix<f32> = gen(1024, 1024, Structure::Random, 0.5, 1);
    let path = dir.path().join("a.mmm");
    write_file(&a, &path).unwrap();
    assert_eq!(
        std::fs::metadata(&path).unwrap().len() as usize,
        HEADER_LEN + 1024 * 1024 * 4
    );
    match read_file(&path).unwrap() {
        AnyMatrix::F32(back) => assert!(back.logical_eq(&a)),
        AnyMatrix::F64(_) => panic!("kind changed"),
    }

    let b: DenseMatrix<f64> = gen(300, 257, Structure::BlockColumn, 0.3, 2);
    let path = dir.path().join("b.mmm");
    write_any(&AnyMatrix::F64(b.clone()), &path).unwrap();
    let back: DenseMatrix<f64> =
        read_file_as(&path, LaneConfig::default_for(ElemKind::F64)).unwrap();
    assert!(back.logical_eq(&b));
    assert!(back.padding_is_zero());
}

#[test]
fn reading_with_other_lanes_repads() {
    let a: DenseMatrix<f32> = gen(20, 70, Structure::Random, 0.2, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.mmm");
    write_file(&a, &path).unwrap();
    let wide = LaneConfig::new(8, 8, 4).unwrap();
    let back: DenseMatrix<f32> = read_file_as(&path, wide).unwrap();
    assert_eq!(back.padded_cols(), 256);
    assert_eq!(back.to_row_major(), a.to_row_major());
}

#[test]
fn wrong_kind_and_damaged_files_are_rejected() {
    let a: DenseMatrix<f32> = gen(4, 4, Structure::Random, 0.0, 1);
    let mut bytes = Vec::new();
    write_matrix(&a, &mut bytes).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.mmm");
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(
        read_file_as::<f64>(&path, LaneConfig::default_for(ElemKind::F64)),
        Err(Error::KindMismatch { .. })
    ));

    let cut = &bytes[..bytes.len() - 1];
    assert!(matches!(
        read_matrix(&mut &cut[..]),
        Err(Error::Truncated { .. })
    ));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(
        read_matrix(&mut &bad[..]),
        Err(Error::BadMagic(_))
    ));
    assert!(matches!(
        read_file(dir.path().join("missing.mmm")),
        Err(Error::Io(_))
    ));
}
