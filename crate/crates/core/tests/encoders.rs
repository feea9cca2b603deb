use pacla::encoders::CategoryEncoder;

// Overlap of two independent k-subsets of an n-set is hypergeometric with
// mean k^2/n and variance k^2(n-k)^2 / (n^2 (n-1)).
#[test]
fn category_overlap_matches_hypergeometric() {
    let (n, k) = (1024usize, 20usize);
    let mut enc = CategoryEncoder::new(n, k, 2024).unwrap();
    let pairs = 100;
    let mut total = 0usize;
    for i in 0..pairs {
        let a = enc.encode(&format!("a{i}"));
        let b = enc.encode(&format!("b{i}"));
        total += a.overlap(&b).unwrap();
    }
    let (nf, kf) = (n as f64, k as f64);
    let mean = kf * kf / nf;
    let var = kf * kf * (nf - kf).powi(2) / (nf * nf * (nf - 1.0));
    let observed = total as f64 / pairs as f64;
    let sigma = (var / pairs as f64).sqrt();
    assert!(
        (observed - mean).abs() <= 3.0 * sigma,
        "observed {observed}, expected {mean} +- {}",
        3.0 * sigma
    );
}

#[test]
fn distinct_symbols_rarely_share_bits() {
    let mut enc = CategoryEncoder::new(1024, 20, 1).unwrap();
    let a = enc.encode("A");
    let b = enc.encode("B");
    assert!(a.overlap(&b).unwrap() < 5);
    assert_eq!(enc.encode("A"), a);
}
