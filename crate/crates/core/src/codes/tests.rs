use super::*;
use crate::gf::mul_reference;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_bytes(rng: &mut ChaCha8Rng, len: usize) -> Vec<u8> {
    (0..len).map(|_| rng.gen()).collect()
}

fn msr(n: usize, k: usize, symbol_size: usize) -> CodeSpec {
    build_code(n, k, CodeKind::Msr, symbol_size).unwrap()
}

#[test]
fn msr_6_3_shape_and_systematic() {
    let spec = msr(6, 3, 4);
    assert_eq!(spec.r(), 3);
    assert_eq!(spec.generator().rows(), 18);
    assert_eq!(spec.generator().cols(), 9);
    for i in 0..9 {
        for j in 0..9 {
            let e = if i == j { 1 } else { 0 };
            assert_eq!(spec.generator()[(i, j)].0, e);
        }
    }
    assert_eq!(spec.stripe_data_bytes(), 9 * 4);
}

#[test]
fn rs_6_3_shape() {
    let spec = build_code(6, 3, CodeKind::ReedSolomon, 8).unwrap();
    assert_eq!(spec.r(), 1);
    assert_eq!((spec.generator().rows(), spec.generator().cols()), (6, 3));
    assert!(matches!(spec.enc(4, 0, &[0; 8]), Err(CodeError::NotMsr)));
}

#[test]
fn invalid_parameters_are_rejected() {
    for (n, k, kind) in [
        (6, 6, CodeKind::Msr),
        (6, 0, CodeKind::ReedSolomon),
        (7, 3, CodeKind::Msr),
        (300, 10, CodeKind::ReedSolomon),
    ] {
        let err = build_code(n, k, kind, 1).unwrap_err();
        assert!(matches!(err, CodeError::InvalidParams(_)), "{n},{k}: {err}");
    }
    assert!(build_code(6, 3, CodeKind::Msr, 0).is_err());
}

#[test]
fn msr_6_3_every_node_subset_is_full_rank() {
    let spec = msr(6, 3, 1);
    let mut count = 0;
    for nodes in Combinations::new(6, 3) {
        let rows: Vec<usize> = nodes.iter().flat_map(|&i| (0..3).map(move |j| i * 3 + j)).collect();
        let sub = spec.generator().select_rows(&rows);
        assert_eq!(sub.rank(), 9, "nodes {nodes:?}");
        assert!(sub.invert().is_ok());
        count += 1;
    }
    assert_eq!(count, 20);
}

#[test]
fn construction_is_deterministic() {
    assert_eq!(msr(8, 4, 2), msr(8, 4, 2));
    assert_eq!(
        msr(8, 4, 2).enc_coefficients(1, 0).unwrap(),
        msr(8, 4, 2).enc_coefficients(1, 0).unwrap()
    );
}

#[test]
fn encode_zero_and_systematic() {
    let spec = msr(6, 3, 5);
    let zero = spec.encode_stripe(&[0; 45]).unwrap();
    for i in 0..6 {
        assert!(zero.strip(i).unwrap().iter().all(|&b| b == 0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let data = random_bytes(&mut rng, 45);
    let stripe = spec.encode_stripe(&data).unwrap();
    for i in 0..3 {
        assert_eq!(stripe.strip(i).unwrap(), &data[i * 15..(i + 1) * 15]);
    }
    assert!(matches!(
        spec.encode_stripe(&data[1..]),
        Err(CodeError::DataLength { expected: 45, got: 44 })
    ));
}

#[test]
fn parity_matches_scalar_loop() {
    let spec = msr(6, 3, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let data = random_bytes(&mut rng, 27);
    let stripe = spec.encode_stripe(&data).unwrap();
    let g = spec.generator();
    for i in 3..6 {
        let strip = stripe.strip(i).unwrap();
        for j in 0..3 {
            for b in 0..3 {
                let mut acc = 0u8;
                for c in 0..9 {
                    acc ^= mul_reference(g[(i * 3 + j, c)].0, data[c * 3 + b]);
                }
                assert_eq!(strip[j * 3 + b], acc);
            }
        }
    }
}

#[test]
fn enc_is_a_dot_product() {
    let spec = msr(6, 3, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let strip = random_bytes(&mut rng, 12);
    assert!(spec.enc(2, 2, &strip).is_err());
    let zero = spec.enc(2, 0, &[0; 12]).unwrap();
    assert!(zero.payload.iter().all(|&b| b == 0));
    let e = spec.enc(2, 0, &strip).unwrap();
    assert_eq!(e.payload.len(), 4);
    for b in 0..4 {
        let mut acc = 0u8;
        for j in 0..3 {
            acc ^= mul_reference(e.coefficients[j].0, strip[j * 4 + b]);
        }
        assert_eq!(e.payload[b], acc);
    }
    // same coefficients whatever the stripe content
    let other = spec.enc(2, 0, &random_bytes(&mut rng, 12)).unwrap();
    assert_eq!(e.coefficients, other.coefficients);
}

fn encoded_for(spec: &CodeSpec, stripe: &StripeView, f: usize) -> Vec<EncodedSymbol> {
    spec.helpers(f)
        .into_iter()
        .map(|i| spec.enc(i, f, stripe.strip(i).unwrap()).unwrap())
        .collect()
}

#[test]
fn single_failure_repair_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for (n, k) in [(4, 2), (6, 3), (8, 4), (10, 5), (12, 6)] {
        let spec = msr(n, k, 7);
        let data = random_bytes(&mut rng, spec.stripe_data_bytes());
        let stripe = spec.encode_stripe(&data).unwrap();
        for f in 0..n {
            let symbols = encoded_for(&spec, &stripe, f);
            assert_eq!(spec.rec(f, &symbols).unwrap(), stripe.strip(f).unwrap(), "({n},{k}) f={f}");
        }
    }
}

#[test]
fn rec_matrix_times_payloads_is_output() {
    let spec = msr(6, 3, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let stripe = spec.encode_stripe(&random_bytes(&mut rng, 9)).unwrap();
    for f in 0..6 {
        let symbols = encoded_for(&spec, &stripe, f);
        let y: Vec<Gf256> = symbols.iter().map(|s| Gf256(s.payload[0])).collect();
        let expect = spec.rec_matrix(f).unwrap().mul_vec(&y).unwrap();
        let got = spec.rec(f, &symbols).unwrap();
        assert_eq!(got, expect.iter().map(|x| x.0).collect::<Vec<_>>());
    }
}

#[test]
fn rec_rejects_bad_inputs() {
    let spec = msr(6, 3, 2);
    let stripe = spec.encode_stripe(&[0; 18]).unwrap();
    let mut symbols = encoded_for(&spec, &stripe, 0);
    assert!(spec.rec(0, &symbols[1..]).is_err());
    symbols[0].for_node = 1;
    assert!(spec.rec(0, &symbols).is_err());
    let mut dup = encoded_for(&spec, &stripe, 0);
    dup[1] = dup[0].clone();
    assert!(spec.rec(0, &dup).is_err());
    let zero = spec.rec(0, &encoded_for(&spec, &stripe, 0)).unwrap();
    assert!(zero.iter().all(|&b| b == 0));
}

#[test]
fn any_k_subset_decodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for (n, k, kind) in [
        (6, 3, CodeKind::Msr),
        (8, 4, CodeKind::Msr),
        (6, 3, CodeKind::ReedSolomon),
        (10, 4, CodeKind::ReedSolomon),
    ] {
        let spec = build_code(n, k, kind, 3).unwrap();
        let data = random_bytes(&mut rng, spec.stripe_data_bytes());
        let stripe = spec.encode_stripe(&data).unwrap();
        let mut subsets = 0;
        for nodes in Combinations::new(n, k) {
            let strips: Vec<(usize, &[u8])> =
                nodes.iter().map(|&i| (i, stripe.strip(i).unwrap())).collect();
            assert_eq!(spec.decode_original(&strips).unwrap(), data, "{nodes:?}");
            subsets += 1;
        }
        assert_eq!(subsets as u64, binomial(n as u64, k as u64));
    }
}

#[test]
fn decode_requires_k_distinct_strips() {
    let spec = msr(6, 3, 1);
    let stripe = spec.encode_stripe(&[1; 9]).unwrap();
    let s = |i| (i, stripe.strip(i).unwrap());
    assert!(spec.decode_original(&[s(0), s(1)]).is_err());
    assert!(spec.decode_original(&[s(0), s(1), s(1)]).is_err());
    assert_eq!(spec.decode_original(&[s(0), s(1), s(2)]).unwrap(), vec![1; 9]);
}

#[test]
fn encode_node_matches_stripe() {
    let spec = msr(8, 4, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let data = random_bytes(&mut rng, spec.stripe_data_bytes());
    let stripe = spec.encode_stripe(&data).unwrap();
    for i in 0..8 {
        assert_eq!(spec.encode_node(i, &data).unwrap(), stripe.strip(i).unwrap());
    }
}

#[test]
fn unavailable_strip_is_an_error() {
    let spec = msr(6, 3, 1);
    let stripe = spec.encode_stripe(&[3; 9]).unwrap().with_failed(&[4]);
    assert!(matches!(stripe.strip(4), Err(CodeError::Unavailable(4))));
    assert_eq!(stripe.available(), vec![true, true, true, true, false, true]);
}

#[test]
fn document_round_trip_is_byte_exact() {
    for spec in [msr(6, 3, 16), build_code(9, 5, CodeKind::ReedSolomon, 1).unwrap()] {
        let text = spec.to_document();
        let back = CodeSpec::from_document(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.to_document(), text);
    }
}

#[test]
fn tampered_document_is_rejected() {
    let text = msr(6, 3, 16).to_document();
    let mut doc: CodeDocument = serde_json::from_str(&text).unwrap();
    doc.generator[10].replace_range(0..2, "ff");
    let tampered = serde_json::to_string(&doc).unwrap();
    assert!(matches!(CodeSpec::from_document(&tampered), Err(CodeError::Document(_))));
    let mut doc: CodeDocument = serde_json::from_str(&text).unwrap();
    doc.version = 99;
    assert!(CodeSpec::from_document(&serde_json::to_string(&doc).unwrap()).is_err());
}

#[test]
fn single_failure_bandwidth_is_gamma_msr() {
    // (n-1) symbols per stripe = M (n-1) / (k (n-k))
    for (n, k) in [(6, 3), (8, 4), (10, 5)] {
        let spec = msr(n, k, 9);
        let stripe = spec.encode_stripe(&vec![5; spec.stripe_data_bytes()]).unwrap();
        let bytes: usize = encoded_for(&spec, &stripe, 0).iter().map(|e| e.payload.len()).sum();
        let m = spec.stripe_data_bytes();
        assert_eq!(bytes * k * (n - k), m * (n - 1));
    }
}

#[test]
fn combinations_enumerate_in_order() {
    let all: Vec<Vec<usize>> = Combinations::new(4, 2).collect();
    assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    assert_eq!(Combinations::new(3, 0).count(), 1);
    assert_eq!(Combinations::new(2, 3).count(), 0);
    assert_eq!(binomial(20, 10), 184_756);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn enc_and_rec_are_linear(seed in any::<u64>(), f in 0usize..8) {
        let spec = msr(8, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = spec.encode_stripe(&random_bytes(&mut rng, 48)).unwrap();
        let b = spec.encode_stripe(&random_bytes(&mut rng, 48)).unwrap();
        let sum = StripeView::from_strips(
            (0..8)
                .map(|i| {
                    Some(a.strip(i).unwrap().iter().zip(b.strip(i).unwrap()).map(|(x, y)| x ^ y).collect())
                })
                .collect(),
        );
        let ea = encoded_for(&spec, &a, f);
        let eb = encoded_for(&spec, &b, f);
        let es = encoded_for(&spec, &sum, f);
        for ((x, y), z) in ea.iter().zip(&eb).zip(&es) {
            let xor: Vec<u8> = x.payload.iter().zip(&y.payload).map(|(p, q)| p ^ q).collect();
            prop_assert_eq!(&z.payload, &xor);
        }
        let ra = spec.rec(f, &ea).unwrap();
        let rb = spec.rec(f, &eb).unwrap();
        let rs = spec.rec(f, &es).unwrap();
        let xor: Vec<u8> = ra.iter().zip(&rb).map(|(p, q)| p ^ q).collect();
        prop_assert_eq!(rs, xor);
    }

    #[test]
    fn decode_inverts_encode(seed in any::<u64>(), pick in 0usize..70) {
        let spec = msr(8, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_bytes(&mut rng, spec.stripe_data_bytes());
        let stripe = spec.encode_stripe(&data).unwrap();
        let nodes = Combinations::new(8, 4).nth(pick).unwrap();
        let strips: Vec<(usize, &[u8])> = nodes.iter().map(|&i| (i, stripe.strip(i).unwrap())).collect();
        prop_assert_eq!(spec.decode_original(&strips).unwrap(), data);
    }
}
