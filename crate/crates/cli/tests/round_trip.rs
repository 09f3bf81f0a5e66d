//! Document round trip over randomized certificate trees, valid or not.

use std::collections::BTreeMap;

use qprime::{
    certify, seeded_rng, Certificate, CertificateKind, CertifyConfig, CertifyOutcome, CostReport,
    Counters, EngineKind, Natural, PrimePower, WitnessMode, Witnesses,
};
use qprime_cli::document::CertificateDocument;
use rand::Rng;

fn big<R: Rng>(rng: &mut R) -> Natural {
    // up to ~300 bits so nothing fits a machine word
    let words: Vec<u32> = (0..rng.gen_range(1..10)).map(|_| rng.gen()).collect();
    Natural::from_slice(&words)
}

fn random_tree<R: Rng>(rng: &mut R, depth: u32) -> Certificate {
    let kind = match rng.gen_range(0..3) {
        0 => CertificateKind::SmallPrime,
        1 => CertificateKind::Theorem1,
        _ => CertificateKind::Theorem2,
    };
    let factorization: Vec<PrimePower> = (0..rng.gen_range(0..4))
        .map(|_| PrimePower {
            prime: big(rng),
            exponent: rng.gen(),
        })
        .collect();
    let witnesses = match rng.gen_range(0..3) {
        0 => Witnesses::None,
        1 => Witnesses::Single(big(rng)),
        _ => Witnesses::PerPrime(
            (0..rng.gen_range(0..4))
                .map(|_| (big(rng), big(rng)))
                .collect::<BTreeMap<_, _>>(),
        ),
    };
    let children = if depth == 0 {
        Vec::new()
    } else {
        (0..rng.gen_range(0..3))
            .map(|_| random_tree(rng, depth - 1))
            .collect()
    };
    Certificate {
        target: big(rng),
        kind,
        factorization,
        witnesses,
        children,
    }
}

fn counters<R: Rng>(rng: &mut R) -> Counters {
    Counters {
        modular_multiplications: rng.gen(),
        order_finding_invocations: rng.gen(),
        trial_divisions: rng.gen(),
        witness_trials: rng.gen(),
        factor_splits: rng.gen(),
    }
}

#[test]
fn thousand_random_trees_round_trip() {
    let mut rng = seeded_rng(1234);
    for i in 0..1000 {
        let cert = random_tree(&mut rng, 4);
        let report = CostReport {
            target: cert.target.clone(),
            p1_factorization: counters(&mut rng),
            p2_verification: counters(&mut rng),
            totals: counters(&mut rng),
        };
        let seed: u64 = rng.gen();
        let mode = if i % 2 == 0 {
            WitnessMode::Theorem1
        } else {
            WitnessMode::Theorem2
        };
        let doc = CertificateDocument::new(&cert, seed, EngineKind::AnalyticSampling, mode, Some(&report));
        let text = doc.to_json();
        let back = CertificateDocument::from_json(&text).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.certificate().unwrap(), cert);
        assert_eq!(back.cost_report.as_ref().unwrap().to_report().unwrap(), report);
        assert_eq!(back.metadata.seed.parse::<u64>().unwrap(), seed);
        assert_eq!(back.to_json(), text);
    }
}

#[test]
fn real_certificates_round_trip() {
    let mut rng = seeded_rng(77);
    let mut done = 0;
    while done < 50 {
        let n = Natural::from(rng.gen_range(3u64..1 << 32));
        let cfg = CertifyConfig {
            engine: EngineKind::AnalyticSampling,
            seed: done,
            ..CertifyConfig::default()
        };
        let run = certify(&n, &cfg).unwrap();
        if let CertifyOutcome::Prime(cert) = run.outcome {
            let doc = CertificateDocument::new(&cert, done, cfg.engine, cfg.mode, Some(&run.report));
            let back = CertificateDocument::from_json(&doc.to_json()).unwrap();
            assert_eq!(back.certificate().unwrap(), cert);
            done += 1;
        }
    }
}
