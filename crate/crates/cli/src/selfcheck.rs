//! Built-in verification suites, each printing one pass/fail line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use recgan::codec::{decode_row, encode_row, encode_symbols, CodecConfig};
use recgan::eval::{cvr_exact, jaccard_exact};
use recgan::gan::{coupled_gradient_check, GanConfig};
use recgan::ingest::SparseBinary;
use recgan::nn::gradcheck::layer_suite;
use recgan::recgen::RecommendationSet;
use recgan::reference::codec::reference_encode;
use recgan::reference::metrics::{brute_conversion, brute_percent, brute_similarity};

use crate::CliError;

const GRAD_TOLERANCE: f64 = 1e-4;

fn codec_suite(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let cfg = CodecConfig::default();
    for i in 0..2000 {
        let n = rng.random_range(0..=300);
        let density = rng.random_range(0.0..0.1);
        let row: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < density)).collect();
        let coded = encode_row(&row, &cfg).map_err(|e| format!("row {i}: {e}"))?;
        if decode_row(coded.bits(), n, &cfg) != row {
            return Err(format!("row {i} (n={n}) did not round-trip"));
        }
        if i < 200 && encode_symbols(&row, cfg.model()) != reference_encode(&row, cfg.prior_num, cfg.prior_den) {
            return Err(format!("row {i} differs from the reference coder"));
        }
    }
    for _ in 0..2000 {
        let bits: Vec<u8> = (0..cfg.width).map(|_| rng.random_range(0..2)).collect();
        let n = rng.random_range(0..=300);
        if decode_row(&bits, n, &cfg).len() != n {
            return Err("decoding a random pattern gave the wrong length".into());
        }
    }
    Ok("2000 rows round-trip, 200 match the reference coder, 2000 random patterns decode".into())
}

fn gradient_suite(seed: u64) -> Result<String, String> {
    let mut worst = 0.0f64;
    for (name, rep) in layer_suite(seed) {
        if !(rep.max_rel_error < GRAD_TOLERANCE) {
            return Err(format!("{name}: relative error {:.3e}", rep.max_rel_error));
        }
        worst = worst.max(rep.max_rel_error);
    }
    let cfg = GanConfig {
        seed,
        ..GanConfig::toy(6, 8)
    };
    let rep = coupled_gradient_check(&cfg, 6, seed).map_err(|e| e.to_string())?;
    if !(rep.max_rel_error() < GRAD_TOLERANCE) {
        return Err(format!("coupled objectives: relative error {:.3e}", rep.max_rel_error()));
    }
    Ok(format!(
        "layers max rel error {worst:.2e}, coupled objectives {:.2e}",
        rep.max_rel_error()
    ))
}

fn random_set(lens: &[usize], rng: &mut ChaCha8Rng) -> RecommendationSet {
    let pv = rng.random_range(0.0..0.5);
    let pb = rng.random_range(0.0..0.5);
    let mut cells = |p: f64| -> SparseBinary {
        lens.iter()
            .enumerate()
            .flat_map(|(c, &len)| (0..len).map(move |i| (c, i)))
            .filter(|_| rng.random::<f64>() < p)
            .collect()
    };
    RecommendationSet::from_cells(0, &cells(pv), &cells(pb))
}

fn metric_suite(rng: &mut ChaCha8Rng) -> Result<String, String> {
    for round in 0..50 {
        let lens: Vec<usize> = (0..rng.random_range(1..5)).map(|_| rng.random_range(1..6)).collect();
        let sets: Vec<RecommendationSet> = (0..20).map(|_| random_set(&lens, rng)).collect();
        let (conv, _, conv_skipped) = brute_percent(&sets, &lens, brute_conversion);
        let (sim, _, sim_skipped) = brute_percent(&sets, &lens, brute_similarity);
        let hundred = num_rational::BigRational::from_integer(100.into());
        let c = cvr_exact(&sets);
        let j = jaccard_exact(&sets);
        if c.mean.map(|m| m * &hundred) != conv || c.skipped != conv_skipped {
            return Err(format!("CVR disagrees with the oracle in round {round}"));
        }
        if j.mean.map(|m| m * &hundred) != sim || j.skipped != sim_skipped {
            return Err(format!("category similarity disagrees with the oracle in round {round}"));
        }
    }
    Ok("1000 random sets agree exactly with the brute-force oracle".into())
}

pub fn run(seed: u64) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let results = [
        ("codec round-trip", codec_suite(&mut rng)),
        ("gradient check", gradient_suite(seed)),
        ("metric oracle", metric_suite(&mut rng)),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        return Err(CliError::runtime(format!("{failed} self-check suite(s) failed")));
    }
    Ok(())
}
