//! End-to-end checks shared by the integration tests and the acceptance
//! harness. Each returns a one-line summary on success.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use readiness_core::federated::wire::{decode_frame, encode_frame, Envelope, Message};
use readiness_core::federated::{evaluate_local_at, merge_summaries, ClientSummary, Coordinator, FlagCode};
use readiness_core::flsim::{
    exclusion_experiment, generate_synthetic, logistic_gradient, logistic_loss, FedTrainConfig, Samples,
    SyntheticFedSpec,
};
use readiness_core::governance::reid_risk;
use readiness_core::report::{canonical_json, render_html, render_json};
use readiness_core::{evaluate, inspect, Column, Dataset, EvalConfig, RoleMap};

use super::check::{check_table, parse};
use super::oracle::random_table;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn oracle_suite(tables: u64) -> Outcome {
    for seed in 0..tables {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_table(&mut rng);
        check_table(&t, &mut rng).map_err(|e| format!("seed {seed}: {e}"))?;
    }
    Ok(format!("{tables} tables agree"))
}

pub fn exclusion(seeds: u64) -> Outcome {
    let seeds: Vec<u64> = (0..seeds).collect();
    let out = exclusion_experiment(
        &SyntheticFedSpec::default(),
        &FedTrainConfig::default(),
        &EvalConfig::default(),
        &seeds,
    )
    .map_err(|e| e.to_string())?;
    let degenerate = format!("client-{}", SyntheticFedSpec::default().degenerate.unwrap().index);
    let both_flags = out
        .trials
        .iter()
        .filter(|t| {
            let codes: BTreeSet<FlagCode> =
                t.flags.iter().filter(|f| f.client_id == degenerate).map(|f| f.code).collect();
            codes.contains(&FlagCode::SingleClass) && codes.contains(&FlagCode::ZeroVarianceFeature)
        })
        .count();
    let summary = format!(
        "acc_all {:.4}, acc_excluded {:.4}, diff {:+.4}, flagged {both_flags}/{}",
        out.mean_acc_all,
        out.mean_acc_excluded,
        out.mean_difference(),
        seeds.len()
    );
    ensure(out.mean_difference() > 0.0 && both_flags == seeds.len(), || summary.clone())?;
    Ok(summary)
}

/// Random tables with an all-constant feature spliced in.
pub fn undefined_correlation(tables: u64) -> Outcome {
    for seed in 0..tables {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_table(&mut rng);
        let base = parse(&t);
        let n = base.row_count();
        let value = rng.random_range(-5i32..5) as f64;
        let mut cols: Vec<Column> = base.columns().to_vec();
        cols.insert(rng.random_range(0..=cols.len()), Column::numeric("const", vec![Some(value); n]).unwrap());
        let extra: Vec<Option<f64>> = (0..n).map(|i| Some(i as f64)).collect();
        cols.push(Column::numeric("ramp", extra).unwrap());
        let d = Dataset::new("const.csv", cols).map_err(|e| e.to_string())?;

        let ev = evaluate(&d, &EvalConfig::default()).map_err(|e| e.to_string())?;
        let ctx = || format!("seed {seed}");
        ensure(
            ev.flags
                .iter()
                .any(|f| f.code == FlagCode::ZeroVarianceFeature && f.column.as_deref() == Some("const")),
            || format!("{}: no ZERO_VARIANCE_FEATURE flag", ctx()),
        )?;
        let corr = ev.results.iter().find(|r| r.metric_id == "correlations").unwrap();
        if let Some(table) = corr.find_table("correlation") {
            let j = table.columns.iter().position(|c| c == "const").ok_or_else(ctx)?;
            for row in &table.rows {
                ensure(row.cells[j].is_none(), || format!("{}: column cell in row {}", ctx(), row.label))?;
                if row.label == "const" {
                    ensure(row.cells.iter().all(Option::is_none), || format!("{}: row not null", ctx()))?;
                }
            }
        } else if n >= 2 {
            return Err(format!("{}: correlation matrix missing", ctx()));
        }

        let report = inspect(&d, &EvalConfig::default()).map_err(|e| e.to_string())?;
        let summary = evaluate_local_at(&d, &EvalConfig::default(), "c", DateTime::UNIX_EPOCH).unwrap();
        for bytes in [render_json(&report), render_html(&report), summary.to_wire()] {
            let text = String::from_utf8_lossy(&bytes);
            let bad = ["NaN", "Infinity", ">inf<", "\"inf\"", " inf,"];
            ensure(bad.iter().all(|b| !text.contains(b)), || format!("{}: NaN in output", ctx()))?;
        }
    }
    Ok(format!("{tables} datasets, constant feature nulled and flagged, no NaN"))
}

const SENTINEL_NUMBER: &str = "61.72839";
const SENTINEL_TEXT: &str = "PLANTED-4d1e-VALUE";

/// Fixed schema: numeric features on fixed ranges, a categorical, a
/// high-cardinality identifier and a binary label. One numeric cell and one
/// identifier cell carry sentinels.
pub fn privacy_dataset(rows: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("id,age,score,site,label\n");
    let planted = rows / 3;
    for i in 0..rows {
        let id = if i == planted { SENTINEL_TEXT.to_string() } else { format!("p{i:06}") };
        let age = rng.random_range(18..90);
        let score = if i == planted {
            SENTINEL_NUMBER.to_string()
        } else {
            format!("{:.1}", rng.random_range(0.0..100.0f64))
        };
        let site = ["north", "south", "east"][rng.random_range(0..3)];
        let label = if rng.random_bool(0.4) { "yes" } else { "no" };
        csv.push_str(&format!("{id},{age},{score},{site},{label}\n"));
    }
    readiness_core::parse_csv(csv.as_bytes(), "privacy.csv", &Default::default()).unwrap()
}

pub fn privacy() -> Outcome {
    let cfg = EvalConfig {
        roles: RoleMap {
            target: Some("label".into()),
            sensitive: ["site".to_string()].into(),
            quasi_identifiers: ["age".to_string(), "site".to_string()].into(),
            ..Default::default()
        },
        ..Default::default()
    };
    let wire = |rows: usize| {
        evaluate_local_at(&privacy_dataset(rows, 7), &cfg, "c", DateTime::UNIX_EPOCH)
            .unwrap()
            .to_wire()
    };
    let (small, large) = (wire(100), wire(10_000));
    let change = (large.len() as f64 - small.len() as f64).abs() / small.len() as f64;
    ensure(change < 0.01, || format!("size {} -> {} ({:.3}%)", small.len(), large.len(), change * 100.0))?;
    let number_forms = [SENTINEL_NUMBER.to_string(), format!("{:.16e}", SENTINEL_NUMBER.parse::<f64>().unwrap())];
    for bytes in [&small, &large] {
        let text = String::from_utf8_lossy(bytes);
        ensure(!text.contains(SENTINEL_TEXT), || "identifier sentinel leaked".into())?;
        for s in &number_forms {
            ensure(!text.contains(s.as_str()), || format!("numeric sentinel {s} leaked"))?;
        }
    }
    Ok(format!(
        "{} -> {} bytes ({:.3}% change), sentinels absent",
        small.len(),
        large.len(),
        change * 100.0
    ))
}

fn exchange(c: &Coordinator, msg: Message, now: DateTime<Utc>) -> Result<Message, String> {
    let reply = c.handle_frame(&encode_frame(&Envelope::new(msg)), now);
    let (env, used) = decode_frame(&reply).map_err(|e| e.to_string())?;
    ensure(used == reply.len(), || "trailing bytes after frame".into())?;
    Ok(env.message)
}

/// Drives one run over the frame protocol, clients in the given order.
pub fn protocol_run(datasets: &[Dataset], cfg: &EvalConfig, order: &[usize]) -> Result<Vec<u8>, String> {
    let now = DateTime::UNIX_EPOCH;
    let coordinator = Coordinator::new();
    let expected: BTreeSet<String> = datasets.iter().map(|d| d.source_id().to_string()).collect();
    coordinator.create_run(cfg.clone(), expected, None).map_err(|e| e.to_string())?;
    for (k, &i) in order.iter().enumerate() {
        let client_id = datasets[i].source_id().to_string();
        let pushed = match exchange(
            &coordinator,
            Message::Hello {
                run_id: cfg.run_id.clone(),
                client_id: client_id.clone(),
            },
            now,
        )? {
            Message::ConfigPush { config, .. } => config,
            other => return Err(format!("expected ConfigPush, got {other:?}")),
        };
        let summary = evaluate_local_at(&datasets[i], &pushed, &client_id, now).map_err(|e| e.to_string())?;
        let summary = ClientSummary::from_wire(&summary.to_wire()).map_err(|e| e.to_string())?;
        match exchange(&coordinator, Message::SummarySubmit { summary }, now)? {
            Message::Ack { run_closed, .. } => {
                ensure(run_closed == (k + 1 == order.len()), || format!("unexpected run_closed at {k}"))?
            }
            other => return Err(format!("expected Ack, got {other:?}")),
        }
    }
    let report = coordinator.report(&cfg.run_id, now).map_err(|e| e.to_string())?;
    Ok(canonical_json(&report))
}

pub fn protocol(orders: usize) -> Outcome {
    let datasets = generate_synthetic(&SyntheticFedSpec {
        rows_per_client: 120,
        seed: 11,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let cfg = EvalConfig {
        run_id: "protocol-check".into(),
        ..Default::default()
    };
    let direct: Vec<ClientSummary> = datasets
        .iter()
        .map(|d| evaluate_local_at(d, &cfg, d.source_id(), DateTime::UNIX_EPOCH).unwrap())
        .collect();
    let expected = canonical_json(&merge_summaries(&direct, &cfg).map_err(|e| e.to_string())?);

    let identity: Vec<usize> = (0..datasets.len()).collect();
    ensure(protocol_run(&datasets, &cfg, &identity)? == expected, || "protocol run differs from direct merge".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for k in 0..orders {
        let mut order = identity.clone();
        order.shuffle(&mut rng);
        ensure(protocol_run(&datasets, &cfg, &order)? == expected, || format!("order {order:?} differs"))?;
        let mut shuffled = direct.clone();
        shuffled.shuffle(&mut rng);
        let merged = canonical_json(&merge_summaries(&shuffled, &cfg).map_err(|e| e.to_string())?);
        ensure(merged == expected, || format!("direct merge permutation {k} differs"))?;
    }
    Ok(format!("{} clients, {orders} random orders byte-identical", datasets.len()))
}

pub fn gradient(points: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, p) = (80, 6);
    let mut s = Samples::default();
    for _ in 0..n {
        let x: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        s.y.push(if rng.random_bool(0.5) { 1.0 } else { 0.0 });
        s.x.push(x);
    }
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..points {
        let w: Vec<f64> = (0..=p).map(|_| rng.random_range(-1.5..1.5)).collect();
        let g = logistic_gradient(&w, &s);
        for j in 0..w.len() {
            let (mut a, mut b) = (w.clone(), w.clone());
            a[j] += h;
            b[j] -= h;
            let fd = (logistic_loss(&a, &s) - logistic_loss(&b, &s)) / (2.0 * h);
            worst = worst.max((fd - g[j]).abs());
        }
    }
    ensure(worst < 1e-6, || format!("max abs error {worst:.3e}"))?;
    Ok(format!("{points} points, max abs error {worst:.2e}"))
}

pub fn k_anonymity_monotone(tables: u64) -> Outcome {
    let mut checked = 0;
    for seed in 0..tables {
        let t = random_table(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
        let d = parse(&t);
        let all: BTreeSet<String> = t.names.iter().cloned().collect();
        let full = reid_risk(&d, &all).map_err(|e| e.to_string())?;
        for name in &all {
            let mut fewer = all.clone();
            fewer.remove(name);
            if fewer.is_empty() {
                continue;
            }
            let r = reid_risk(&d, &fewer).map_err(|e| e.to_string())?;
            checked += 1;
            ensure(r.k_anonymity >= full.k_anonymity, || format!("seed {seed}: k fell dropping {name}"))?;
            ensure(r.average_risk <= full.average_risk + 1e-15, || {
                format!("seed {seed}: risk rose dropping {name}")
            })?;
        }
    }
    Ok(format!("{tables} tables, {checked} drops"))
}
