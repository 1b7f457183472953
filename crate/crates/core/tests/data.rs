mod support;

use std::io::Write;

use lapdae::data::{load_cifar10, load_mnist, DatasetKind, Split};
use lapdae::{Error, ErrorClass};

#[test]
fn fixture_trees_load_with_exact_counts() {
    let dir = tempfile::tempdir().unwrap();
    support::write_mnist_fixture(dir.path(), 60, 10);
    support::write_cifar_fixture(dir.path(), 7, 4);
    let train = DatasetKind::Mnist.load(dir.path(), Split::Train).unwrap();
    let test = DatasetKind::Mnist.load(dir.path(), Split::Test).unwrap();
    assert_eq!((train.len(), test.len()), (60, 10));
    assert_eq!(train.images.shape(), &[60, 1, 28, 28]);
    assert_eq!(&train.labels[..3], &[0, 1, 2]);
    let ctrain = DatasetKind::Cifar10.load(dir.path(), Split::Train).unwrap();
    let ctest = DatasetKind::Cifar10.load(dir.path(), Split::Test).unwrap();
    assert_eq!((ctrain.len(), ctest.len()), (35, 4));
    assert_eq!(ctrain.images.shape(), &[35, 3, 32, 32]);
    // The second batch starts where the first ended.
    assert_eq!(ctrain.labels[7], (14 % 10) as u8);
}

#[test]
fn gzip_archives_match_plain_files() {
    let dir = tempfile::tempdir().unwrap();
    support::write_mnist_fixture(dir.path(), 12, 5);
    let mnist = dir.path().join("mnist");
    let plain = load_mnist(&mnist, Split::Train).unwrap();
    for name in ["train-images-idx3-ubyte", "train-labels-idx1-ubyte"] {
        let bytes = std::fs::read(mnist.join(name)).unwrap();
        let mut gz = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        gz.write_all(&bytes).unwrap();
        std::fs::write(mnist.join(format!("{name}.gz")), gz.finish().unwrap()).unwrap();
        std::fs::remove_file(mnist.join(name)).unwrap();
    }
    let packed = load_mnist(&mnist, Split::Train).unwrap();
    assert_eq!(packed.images.data(), plain.images.data());
    assert_eq!(packed.labels, plain.labels);
}

#[test]
fn corrupted_fixtures_are_rejected_as_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    support::write_mnist_fixture(dir.path(), 20, 5);
    support::write_cifar_fixture(dir.path(), 3, 2);
    let mnist = dir.path().join("mnist");
    let images = mnist.join("train-images-idx3-ubyte");
    let good = std::fs::read(&images).unwrap();

    let mut bad = good.clone();
    bad[3] = 0x07;
    std::fs::write(&images, &bad).unwrap();
    let e = load_mnist(&mnist, Split::Train).unwrap_err();
    assert!(matches!(e, Error::BadMagic { .. }), "{e}");
    assert_eq!(e.class(), ErrorClass::Data);

    std::fs::write(&images, &good[..good.len() - 100]).unwrap();
    let e = load_mnist(&mnist, Split::Train).unwrap_err();
    assert!(matches!(e, Error::Truncated { .. }), "{e}");

    std::fs::write(&images, &good).unwrap();
    std::fs::write(mnist.join("train-labels-idx1-ubyte"), support::idx_labels(19)).unwrap();
    let e = load_mnist(&mnist, Split::Train).unwrap_err();
    assert!(matches!(e, Error::CountMismatch { images: 20, labels: 19 }), "{e}");

    let cifar = dir.path().join("cifar-10-batches-bin");
    let batch = cifar.join("data_batch_3.bin");
    let bytes = std::fs::read(&batch).unwrap();
    std::fs::write(&batch, &bytes[..bytes.len() - 10]).unwrap();
    let e = load_cifar10(&cifar, Split::Train).unwrap_err();
    match e {
        Error::Truncated { offset, .. } => assert_eq!(offset, 2 * 3073),
        other => panic!("{other}"),
    }
    std::fs::remove_file(cifar.join("test_batch.bin")).unwrap();
    let e = load_cifar10(&cifar, Split::Test).unwrap_err();
    assert_eq!(e.class(), ErrorClass::Data);
}

#[test]
fn installed_mnist_loads_if_present() {
    let Some(root) = support::data_root("mnist") else {
        eprintln!("LAPDAE_DATA_DIR has no mnist/; skipped");
        return;
    };
    for split in [Split::Train, Split::Test] {
        let d = DatasetKind::Mnist.load(&root, split).unwrap();
        assert_eq!(d.images.shape()[1..], [1, 28, 28]);
        assert_eq!(d.labels.len(), d.len());
        assert!(d.labels.iter().all(|&l| l < 10));
        let data = d.images.data();
        assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
