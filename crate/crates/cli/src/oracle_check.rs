//! Exact hypercube oracles against Monte-Carlo estimates.

use chowfilter::bench::ConceptSpec;
use chowfilter::oracle::{
    exact_chow, exact_expectation_hypercube, exact_lambda, hypercube_point_into, FiniteDistribution,
    LabeledFiniteDistribution, MAX_HYPERCUBE_DIM,
};
use chowfilter::polycore::{empirical_gram, enumerate_basis, MonomialBasis, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;

/// Deviations beyond this many standard errors fail.
const Z_MAX: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn cube_sample(d: usize, n: usize, rng: &mut ChaCha8Rng) -> Sample {
    let flat = (0..n * d).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    Sample::from_flat(d, flat, None).expect("well-formed sample")
}

/// Exact Gram matrix over all `2^d` points in one pass. Entries are sums of
/// `+-1`, so the accumulation is exact.
fn exact_gram(basis: &MonomialBasis, d: usize) -> Vec<f64> {
    let k = basis.len();
    let mut g = vec![0.0; k * k];
    let mut x = vec![0.0; d];
    let mut m = vec![0.0; k];
    for idx in 0..1usize << d {
        hypercube_point_into(idx, &mut x);
        basis.features_into(&x, &mut m);
        for a in 0..k {
            for b in 0..k {
                g[a * k + b] += m[a] * m[b];
            }
        }
    }
    let total = (1u64 << d) as f64;
    g.iter_mut().for_each(|v| *v /= total);
    g
}

pub fn run_checks(d: usize, n: usize, seed: u64) -> Result<Vec<Check>, CliError> {
    if d == 0 || d > MAX_HYPERCUBE_DIM {
        return Err(CliError::validation(format!("--d must lie in 1..={MAX_HYPERCUBE_DIM}, got {d}")));
    }
    if n < 2 {
        return Err(CliError::validation("--n must be at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let degree = if d <= 12 { 2 } else { 1 };
    let basis = enumerate_basis(d, degree, true)?;
    let k = basis.len();
    let nn = n as f64;

    let g = exact_gram(&basis, d);
    let off = (0..k * k).map(|i| (g[i] - f64::from(u8::from(i / k == i % k))).abs()).fold(0.0, f64::max);
    checks.push(Check {
        name: "exact gram is identity",
        pass: off <= 1e-12,
        detail: format!("{k} monomials of degree <= {degree}, max deviation {off:.1e}"),
    });

    let s = cube_sample(d, n, &mut rng);
    let eg = empirical_gram(&basis, &s)?;
    let mut z: f64 = 0.0;
    for a in 0..k {
        for b in 0..k {
            let truth = f64::from(u8::from(a == b));
            let dev = (eg[(a, b)] - truth).abs();
            z = z.max(if a == b {
                if dev <= 1e-12 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                dev * nn.sqrt()
            });
        }
    }
    checks.push(Check {
        name: "empirical gram",
        pass: z <= Z_MAX,
        detail: format!("n={n}, max {z:.2} standard errors"),
    });

    let f = ConceptSpec::Halfspace { weights: (0..d).map(|i| 1 + (i % 3) as i64).collect(), bias: 0 }.to_classifier();
    let chow = exact_chow(&f, &basis, d)?;
    let mean_f = chow[0];
    let mut z: f64 = 0.0;
    let mut m = vec![0.0; k];
    let mut sums = vec![0.0; k];
    for x in s.points() {
        if f.eval(x) {
            basis.features_into(x, &mut m);
            sums.iter_mut().zip(&m).for_each(|(acc, v)| *acc += v);
        }
    }
    for j in 0..k {
        let var = mean_f - chow[j] * chow[j];
        let dev = (sums[j] / nn - chow[j]).abs();
        z = z.max(if var <= 0.0 {
            if dev <= 1e-12 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            dev / (var / nn).sqrt()
        });
    }
    checks.push(Check {
        name: "chow parameters",
        pass: z <= Z_MAX,
        detail: format!("halfspace, max {z:.2} standard errors"),
    });

    let sq = |x: &[f64]| x.iter().sum::<f64>().powi(2) / x.len() as f64;
    let e = exact_expectation_hypercube(d, sq)?;
    let e2 = exact_expectation_hypercube(d, |x| sq(x).powi(2))?;
    let est = s.points().map(sq).sum::<f64>() / nn;
    let zz = if e2 - e * e > 0.0 { (est - e).abs() / ((e2 - e * e) / nn).sqrt() } else { 0.0 };
    checks.push(Check {
        name: "expectation",
        pass: (e - 1.0).abs() <= 1e-12 && zz <= Z_MAX,
        detail: format!("E[(sum x)^2/d] = {e} (exactly 1 expected), Monte-Carlo {zz:.2} standard errors"),
    });

    if d <= 12 {
        let cube = FiniteDistribution::uniform_hypercube(d)?;
        let concept = ConceptSpec::Conjunction { literals: vec![1] };
        let dist = LabeledFiniteDistribution::with_noise(cube, |x| concept.eval(x), 0.1);
        let class = [concept.to_classifier(), ConceptSpec::Conjunction { literals: vec![-1] }.to_classifier()];
        let report = exact_lambda(&class, &dist, &dist)?;
        let err = dist.error(|x| concept.eval(x));
        let labeled = dist.sample(n, &mut rng);
        let labels = labeled.require_labels()?;
        let mc = labeled.points().zip(labels).filter(|(x, y)| u8::from(concept.eval(x)) != **y).count() as f64 / nn;
        let zl = (mc - err).abs() / (err * (1.0 - err) / nn).sqrt();
        let exact_ok = (report.lambda - 0.2).abs() <= 1e-12 && (err - 0.1).abs() <= 1e-12;
        checks.push(Check {
            name: "finite distribution and lambda",
            pass: exact_ok && zl <= Z_MAX,
            detail: format!(
                "lambda={} (0.2 expected), error {err}, Monte-Carlo {zl:.2} standard errors",
                report.lambda
            ),
        });
    }
    Ok(checks)
}
