//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topogen::dyadic::{combine, Dyadic};
use topogen::genpair::{certify, compute_beta, construct_pair, reach_target, GenPairError};
use topogen::kronecker::{is_topological_generator, max_gap, max_gap_exact, CoordVector};
use topogen::liegen::{cover_profile, so3_net, Rotation};
use topogen::permgroups::{
    escape_construction, qna_modulus_check, qna_negative_control, QnaConfig, SubmeasureSpec,
};
use topogen::stevens::{circle_norm, norm, norm_oracle, WeightSequence};

type Outcome = Result<String, String>;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn norm_identity() -> Outcome {
    let ws = WeightSequence::harmonic();
    for n in 0..=64u32 {
        let got = norm(&Dyadic::pow2_neg(n), &ws)
            .map_err(|e| e.to_string())?
            .value;
        let want = ws.weight_at(i64::from(n)).unwrap();
        ensure(got == want, || format!("n={n}: {got} != {want}"))?;
    }
    Ok("65 exact values".into())
}

fn oracle_equivalence() -> Outcome {
    let ws = WeightSequence::harmonic();
    let mut checked = 0;
    for m in 0..=8u32 {
        for k in -255i64..=255 {
            let x = Dyadic::new(k, m);
            let dp = norm(&x, &ws).map_err(|e| e.to_string())?.value;
            for maxcoeff in [1, 3] {
                let brute = norm_oracle(&x, &ws, -10, i64::from(m), maxcoeff)
                    .map_err(|e| format!("{x}: {e}"))?;
                ensure(dp == brute, || {
                    format!("x={x} maxcoeff={maxcoeff}: {dp} != {brute}")
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} comparisons"))
}

fn norm_axioms() -> Outcome {
    let ws = WeightSequence::harmonic();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let random = |rng: &mut ChaCha8Rng| {
        Dyadic::new(
            rng.gen_range(-1_000_000i64..=1_000_000),
            rng.gen_range(0..=30),
        )
    };
    let n = |x: &Dyadic| norm(x, &ws).map(|r| r.value).map_err(|e| e.to_string());
    for _ in 0..10_000 {
        let (x, y) = (random(&mut rng), random(&mut rng));
        let (nx, ny) = (n(&x)?, n(&y)?);
        ensure(n(&(&x + &y))? <= &nx + &ny, || {
            format!("subadditivity fails at {x}, {y}")
        })?;
        ensure(n(&-&x)? == nx, || format!("symmetry fails at {x}"))?;
        ensure(nx.is_zero() == x.is_zero(), || {
            format!("definiteness fails at {x}")
        })?;
        if !x.is_zero() {
            let lsb = i64::from(x.lsb_position().unwrap());
            ensure(nx >= ws.weight_at(lsb).unwrap(), || {
                format!("forced digit fails at {x}")
            })?;
        }
    }
    Ok("10000 pairs".into())
}

fn pair_certificates() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut certified = 0;
    let mut parity = 0;
    for _ in 0..500 {
        let k1 = loop {
            let k = rng.gen_range(-1_000_000i64..=1_000_000);
            if k != 0 {
                break BigInt::from(k);
            }
        };
        let k2 = BigInt::from(rng.gen_range(-1_000_000i64..=1_000_000));
        let m = rng.gen_range(0..=20u32);
        let beta = compute_beta(&k1, &k2).map_err(|e| e.to_string())?;
        ensure(beta.is_odd(), || format!("beta {beta} even"))?;
        let g0 = Dyadic::new(k1.clone(), m);
        let h0 = Dyadic::new(k2.clone(), m);
        for n in 0..=64u32 {
            let a = &k1 << n as usize;
            let b = (&k2 << n as usize) + &beta;
            match certify(&k1, &k2, &beta, n) {
                Ok((u, v)) => {
                    ensure(a.gcd(&b).is_one(), || "gcd is not 1".into())?;
                    ensure(&u * &a + &v * &b == BigInt::one(), || {
                        format!("Bezout fails k1={k1} k2={k2} N={n}")
                    })?;
                    let h = &h0 + &Dyadic::new(beta.clone(), m + n);
                    ensure(combine(&u, &g0, &v, &h) == Dyadic::pow2_neg(m + n), || {
                        format!("combine fails k1={k1} k2={k2} m={m} N={n}")
                    })?;
                    certified += 1;
                }
                // at depth 0 an even k1 and odd k2 make both sides even
                Err(GenPairError::NotCoprime(g)) if n == 0 && k1.is_even() && k2.is_odd() => {
                    ensure(g.is_even(), || "unexpected common factor".into())?;
                    parity += 1;
                }
                Err(e) => return Err(format!("k1={k1} k2={k2} N={n}: {e}")),
            }
        }
    }
    Ok(format!(
        "{certified} certificates, {parity} depth-0 parity cases rejected"
    ))
}

fn density_reach() -> Outcome {
    let (g0, h0): (Dyadic, Dyadic) = ("3/2".parse().unwrap(), "1/2".parse().unwrap());
    for j in 0..=30u32 {
        let cert = construct_pair(&g0, &h0, j).map_err(|e| e.to_string())?;
        let target = Dyadic::pow2_neg(j);
        let (a, b) = reach_target(&cert, &target).ok_or_else(|| format!("2^-{j} unreachable"))?;
        ensure(combine(&a, &g0, &b, &cert.h) == target, || {
            format!("j={j} inexact")
        })?;
    }
    Ok("31 targets".into())
}

fn circle_quotient() -> Outcome {
    let ws = WeightSequence::harmonic();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let c = |x: &Dyadic| circle_norm(x, &ws).map_err(|e| e.to_string());
    for _ in 0..100 {
        let x = Dyadic::new(rng.gen_range(-100_000i64..=100_000), rng.gen_range(0..=20));
        let base = c(&x)?;
        for k in -5i64..=5 {
            ensure(c(&(&x + &Dyadic::from(k)))? == base, || {
                format!("x={x} k={k}")
            })?;
        }
    }
    ensure(c(&Dyadic::one())?.is_zero(), || {
        "circle_norm(1) != 0".into()
    })?;
    let g0 = Dyadic::one();
    for h0 in [0i64, 1, 5, -3, 12] {
        for n in 0..=30u32 {
            let cert = construct_pair(&g0, &Dyadic::from(h0), n).map_err(|e| e.to_string())?;
            let vh = combine(&BigInt::zero(), &g0, &cert.v, &cert.h);
            let rest = &vh - &Dyadic::pow2_neg(n);
            ensure(rest.is_integer(), || format!("h0={h0} N={n}: v h = {vh}"))?;
        }
    }
    Ok("periodicity on 100 points, v h = 2^-N mod 1 for N <= 30".into())
}

fn qna_modulus() -> Outcome {
    let cfg = QnaConfig {
        model: "du:12".parse().unwrap(),
        epsilon: q(1, 4),
        generators: 3,
        max_len: 8,
        trials: 100,
        seed: 7,
        ball_cap: 5_000_000,
    };
    let report = qna_modulus_check(&cfg).map_err(|e| e.to_string())?;
    ensure(report.passed(), || {
        format!(
            "{} containment and {} distance failures",
            report.containment_failures(),
            report.bound_failures()
        )
    })?;
    let main = format!(
        "{} words, max distance {}, {} nontrivial generators",
        report.words_checked(),
        report.max_distance(),
        report.nontrivial_generators()
    );

    // on 12 points the eps/k ball holds only the identity; 48 points leave room
    let wide = QnaConfig {
        model: "du:48".parse().unwrap(),
        max_len: 6,
        ..cfg.clone()
    };
    let wide_report = qna_modulus_check(&wide).map_err(|e| e.to_string())?;
    ensure(wide_report.passed(), || "du:48 supplement failed".into())?;
    ensure(wide_report.nontrivial_generators() > 0, || {
        "du:48 supplement is vacuous".into()
    })?;

    let control = qna_negative_control(&cfg.model, &cfg.epsilon, 3, 8, 5_000_000)
        .map_err(|e| e.to_string())?;
    ensure(control.bound_failures > 0, || {
        "negative control did not escape".into()
    })?;
    Ok(format!(
        "{main}; du:48 L=6: {} words, max distance {}, {} nontrivial generators; control max distance {}",
        wide_report.words_checked(),
        wide_report.max_distance(),
        wide_report.nontrivial_generators(),
        control.max_distance
    ))
}

fn escape_witness() -> Outcome {
    let d = BigInt::from(10);
    let mut notes = Vec::new();
    for eps in [q(1, 5), q(1, 10), q(1, 20)] {
        let blocks = (BigRational::from_integer(&d * 2) / &eps)
            .ceil()
            .to_integer();
        let blocks: usize = blocks.try_into().unwrap();
        let w = escape_construction(&SubmeasureSpec::harmonic(), &eps, blocks)
            .map_err(|e| e.to_string())?;
        w.verify().map_err(|e| format!("eps={eps}: {e}"))?;
        ensure(w.blocks.iter().all(|b| b.mass.upper < eps), || {
            format!("eps={eps}: generator outside ball")
        })?;
        ensure(
            w.distance.lower >= BigRational::from_integer(d.clone()),
            || format!("eps={eps}: product too close"),
        )?;
        notes.push(format!(
            "eps={eps}: {blocks} blocks up to {}",
            w.blocks.last().unwrap().last
        ));
    }
    Ok(notes.join(", "))
}

fn kronecker() -> Outcome {
    let third = CoordVector::new(0, vec![vec![q(1, 3)]]).unwrap();
    ensure(!is_topological_generator(&third), || {
        "1/3 reported as generator".into()
    })?;
    let gap = max_gap_exact(&q(1, 3), 100).map_err(|e| e.to_string())?;
    ensure(gap == q(1, 3), || format!("1/3 gap {gap}"))?;

    let sqrt2 = CoordVector::new(1, vec![vec![q(0, 1), q(1, 1)]]).unwrap();
    ensure(is_topological_generator(&sqrt2), || {
        "sqrt2 not a generator".into()
    })?;
    let r = max_gap(2f64.sqrt(), 1000).map_err(|e| e.to_string())?;
    ensure(r < 0.005, || format!("sqrt2 radius {r}"))?;
    // a rational within 1e-30 of sqrt 2 moves each orbit point by under 1e-26
    let approx = BigRational::new(
        "1414213562373095048801688724209".parse().unwrap(),
        BigInt::from(10).pow(30),
    );
    let exact = max_gap_exact(&approx, 1000).map_err(|e| e.to_string())?;
    let exact: f64 = num_traits::ToPrimitive::to_f64(&exact).unwrap();
    ensure((exact - r).abs() < 1e-9, || {
        format!("float gap {r} vs exact {exact}")
    })?;
    Ok(format!("sqrt2 radius {r:.6} at K=1000"))
}

fn so3_contrast() -> Outcome {
    let target = 0.4;
    let grid = target / 4.0;
    let net = so3_net(2000, 1).map_err(|e| e.to_string())?;
    let orth = [Rotation::rot_x(0.3), Rotation::rot_z(0.3)];
    let same = [Rotation::rot_z(0.3), Rotation::rot_z(0.5)];
    let a = cover_profile(&orth, 14, &net.points, grid, 20_000_000).map_err(|e| e.to_string())?;
    let b = cover_profile(&same, 14, &net.points, grid, 20_000_000).map_err(|e| e.to_string())?;
    let monotone = a.windows(2).all(|w| w[1].radius <= w[0].radius);
    let floor = b.iter().map(|s| s.radius).fold(f64::INFINITY, f64::min);
    let last = a.last().unwrap();
    let summary = format!(
        "net mesh {:.3}, grid {grid}; orthogonal pair radius {:.4} at L=14 ({} elements); same-axis min radius {floor:.4}",
        net.mesh, last.radius, last.ball_size
    );
    ensure(monotone, || format!("not monotone; {summary}"))?;
    ensure(floor >= 1.0, || {
        format!("same-axis pair below 1.0; {summary}")
    })?;
    ensure(last.radius < target, || {
        format!("orthogonal pair radius not below {target}; {summary}")
    })?;
    Ok(summary)
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion {
            id: 1,
            name: "norm of 2^-n equals r_n",
            limit: secs(1),
            run: norm_identity,
        },
        Criterion {
            id: 2,
            name: "dp norm equals brute-force oracle",
            limit: secs(30),
            run: oracle_equivalence,
        },
        Criterion {
            id: 3,
            name: "group norm axioms and forced digit",
            limit: None,
            run: norm_axioms,
        },
        Criterion {
            id: 4,
            name: "dense pair certificates",
            limit: secs(10),
            run: pair_certificates,
        },
        Criterion {
            id: 5,
            name: "density reach for 3/2, 1/2",
            limit: None,
            run: density_reach,
        },
        Criterion {
            id: 6,
            name: "circle quotient",
            limit: None,
            run: circle_quotient,
        },
        Criterion {
            id: 7,
            name: "quasi non-archimedean modulus",
            limit: secs(60),
            run: qna_modulus,
        },
        Criterion {
            id: 8,
            name: "harmonic escape witness",
            limit: secs(30),
            run: escape_witness,
        },
        Criterion {
            id: 9,
            name: "kronecker rank and gaps",
            limit: secs(1),
            run: kronecker,
        },
        Criterion {
            id: 10,
            name: "SO(3) covering contrast",
            limit: secs(120),
            run: so3_contrast,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took longer than {limit:?}")),
            (o, _) => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if outcome.is_err() {
            failed += 1;
        }
        println!(
            "{tag} {:>2} {} [{:.2}s] {detail}",
            c.id,
            c.name,
            elapsed.as_secs_f64()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
