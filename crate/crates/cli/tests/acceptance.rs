//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::process::Command;
use std::time::{Duration, Instant};

use nucache::combinatorics::{binom, enumerate_chains};
use nucache::converse::{converse_bound, second_differences};
use nucache::delivery::{decode, description_layout, encode_delivery, row_count, DemandVector};
use nucache::numeric::{int, parse_rational, ratio, to_f64, Rational};
use nucache::optimizer::{
    baseline_grouping, baseline_uniform, breakpoints, optimal_allocation, region_boundaries, slope_plus,
};
use nucache::oracle::{all_demands, exhaustive_decode, lemma1_sweep};
use nucache::placement::{place, place_structure, random_files, PlacementConfig};
use nucache::{PrimeField, Profile};

type Outcome = Result<String, String>;

fn q(s: &str) -> Rational {
    parse_rational(s).unwrap()
}

fn within(label: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{label} = {got}, expected {want} +- {tol}"))
    }
}

fn deadline(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    if took <= limit {
        Ok(())
    } else {
        Err(format!("took {took:?}, limit {limit:?}"))
    }
}

const TABLE: &[(usize, usize, &str, &str, &str)] = &[
    (0, 0, "2", "1", "1"),
    (1, 0, "7/4", "3/4", "1"),
    (1, 1, "5/4", "3/4", "3/4"),
    (2, 0, "3/2", "1/2", "1"),
    (2, 1, "1", "1/2", "3/4"),
    (2, 2, "2/3", "1/2", "1/2"),
    (3, 0, "5/4", "1/4", "1"),
    (3, 1, "3/4", "1/4", "3/4"),
    (3, 2, "1/2", "1/4", "1/2"),
    (3, 3, "1/4", "1/4", "1/4"),
    (4, 0, "1", "0", "1"),
    (4, 1, "3/4", "0", "3/4"),
    (4, 2, "1/2", "0", "1/2"),
    (4, 3, "1/4", "0", "1/4"),
    (4, 4, "0", "0", "0"),
];

fn rate_table() -> Outcome {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_nucache"))
        .args(["rate-table", "--users", "4"])
        .output()
        .map_err(|e| e.to_string())?;
    let took = start.elapsed();
    if !out.status.success() {
        return Err(format!("exit status {}", out.status));
    }
    let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    if rows.len() != TABLE.len() {
        return Err(format!("{} rows, expected {}", rows.len(), TABLE.len()));
    }
    let mut cells = 0;
    for (row, &(r1, r2, both, one, two)) in rows.iter().zip(TABLE) {
        let want = [r1.to_string(), r2.to_string(), both.into(), one.into(), two.into()];
        for (i, w) in want.iter().enumerate() {
            if row[i] != w {
                return Err(format!("row ({r1},{r2}) column {i}: {} != {w}", row[i]));
            }
        }
        cells += 3;
    }
    deadline(start, Duration::from_secs(1))?;
    Ok(format!("{cells} entries string-equal, {took:?}"))
}

fn worked_pipeline() -> Outcome {
    let field = PrimeField::default();
    let cfg = PlacementConfig::new(4, Profile::new(vec![2, 1]).unwrap(), 8, field).map_err(|e| e.to_string())?;
    let files = random_files(2, cfg.file_len().unwrap(), field, 2024);
    let map = place(&cfg, &files).map_err(|e| e.to_string())?;
    let d = DemandVector::new(vec![1, 1, 1, 2], 2).unwrap();
    let msg = encode_delivery(&d, &files, &cfg).map_err(|e| e.to_string())?;
    if (msg.rows.len(), msg.columns.len()) != (12, 15) {
        return Err(format!("outer system {}x{}", msg.rows.len(), msg.columns.len()));
    }
    for u in 1..=4 {
        let got = decode(u, map.user(u).unwrap(), &msg).map_err(|e| e.to_string())?;
        if got != files[d.of(u) - 1] {
            return Err(format!("user {u} decoded a wrong file"));
        }
    }
    let rate = ratio(msg.symbols() as i64, cfg.file_len().unwrap() as i64);
    if rate != int(1) {
        return Err(format!("realized rate {rate}"));
    }
    Ok("12x15 outer system, 4/4 users bit-exact, realized rate 1".into())
}

fn worked_optimum() -> Outcome {
    let a = optimal_allocation(4, &q("0.8"), &q("3/4")).map_err(|e| e.to_string())?;
    if (a.t1.clone(), a.t2.clone()) != (int(2), int(1)) {
        return Err(format!("allocation ({}, {})", a.t1, a.t2));
    }
    if a.rbar != ratio(1987, 2500) {
        return Err(format!("rate {} != 1987/2500", a.rbar));
    }
    within("rate", to_f64(&a.rbar), 0.79, 5e-3)?;
    Ok(format!("(t1,t2) = (2,1), rate {} = {}", a.rbar, to_f64(&a.rbar)))
}

fn landmarks() -> Outcome {
    let start = Instant::now();
    let m = int(1);
    let p = q("0.85");
    let a = optimal_allocation(6, &p, &m).map_err(|e| e.to_string())?;
    let un = to_f64(&baseline_uniform(6, &p, &m).unwrap());
    let nc = to_f64(&baseline_grouping(6, &p, &m).unwrap());
    within("optimal rate", to_f64(&a.rbar), 0.582, 1e-3)?;
    within("R_nc", nc, 0.623, 1e-3)?;
    within("R_un", un, 0.625, 1e-3)?;
    let b = region_boundaries(6, &m, 200, 40).map_err(|e| e.to_string())?;
    let gaps: Vec<f64> = b.iter().map(|x| x.gap).collect();
    if gaps.len() != 3 {
        return Err(format!("boundaries {gaps:?}"));
    }
    for (g, want) in gaps.iter().zip([0.48, 0.70, 0.78]) {
        within("boundary", *g, want, 0.01)?;
    }
    deadline(start, Duration::from_secs(5))?;
    Ok(format!(
        "rate {:.6}, R_nc {nc:.6}, R_un {un:.6}, boundaries {:.4} {:.4} {:.4}, {:?}",
        to_f64(&a.rbar),
        gaps[0],
        gaps[1],
        gaps[2],
        start.elapsed()
    ))
}

fn optimality_equality() -> Outcome {
    let start = Instant::now();
    let mut n = 0;
    let mut worst = 0.0f64;
    for k in 2..=8usize {
        for m4 in 0..=8i64 {
            let m = ratio(m4, 4);
            for p100 in (50..=95).step_by(5) {
                let p1 = ratio(p100, 100);
                let a = optimal_allocation(k, &p1, &m).map_err(|e| e.to_string())?;
                let p = vec![p1.clone(), int(1) - &p1];
                let b = converse_bound(k, &p, &m).map_err(|e| e.to_string())?;
                let gap = to_f64(&(&a.rbar - &b.value)).abs();
                worst = worst.max(gap);
                if gap > 1e-12 {
                    return Err(format!("K={k} M={m} p1={p1}: {} vs {}", a.rbar, b.value));
                }
                n += 1;
            }
        }
    }
    deadline(start, Duration::from_secs(30))?;
    Ok(format!("{n} cases, max |gap| {worst:e}, {:?}", start.elapsed()))
}

fn exhaustive() -> Outcome {
    let start = Instant::now();
    let report = exhaustive_decode(5, &[1, 2, 3], 2, PrimeField::default());
    let bad: Vec<_> = report.instances.iter().filter(|i| !i.pass).collect();
    if let Some(first) = bad.first() {
        return Err(format!("{} failing instances, first {:?}", bad.len(), first));
    }
    let tight = report.instances.iter().filter(|i| i.tight).count();
    deadline(start, Duration::from_secs(120))?;
    Ok(format!(
        "{} instances x 3 seeds decoded, {} tight, {:?}",
        report.instances.len(),
        tight,
        start.elapsed()
    ))
}

fn entropy_identities() -> Outcome {
    let start = Instant::now();
    let reports = lemma1_sweep(5, PrimeField::default());
    let mut checks = 0;
    for r in &reports {
        let r = r.as_ref().map_err(|e| e.to_string())?;
        if let Some(c) = r.checks.iter().find(|c| !c.pass) {
            return Err(format!("K={} r={:?} d={:?}: {c:?}", r.users, r.r, r.demand));
        }
        checks += r.checks.len();
    }
    deadline(start, Duration::from_secs(120))?;
    Ok(format!("{} instances, {checks} equalities, {:?}", reports.len(), start.elapsed()))
}

fn scaled(s: u64, k: usize, a: usize, r: usize) -> Option<usize> {
    let num = s as u128 * binom(k as i64 - a as i64, r as i64);
    let den = binom(k as i64, r as i64);
    (num % den == 0).then(|| (num / den) as usize)
}

fn structural() -> Outcome {
    let field = PrimeField::default();
    let mut n = 0;
    for k in 1..=8usize {
        for r1 in 0..=k {
            for r2 in 0..=r1 {
                let profile = Profile::new(vec![r1, r2]).unwrap();
                let cfg = PlacementConfig::new(k, profile.clone(), 1, field).unwrap();
                let s = cfg.subpacketization().unwrap();
                let map = place_structure(&cfg).unwrap();
                for u in 1..=k {
                    if map.user(u).unwrap().entries.len() * k != s as usize * (r1 + r2) {
                        return Err(format!("K={k} r=({r1},{r2}): cache size of user {u}"));
                    }
                }
                let chains = enumerate_chains(k, &profile).unwrap();
                for d in all_demands(k) {
                    n += 1;
                    let rows = row_count(&cfg, &d).unwrap();
                    let a = |r| scaled(s, k, 1, r).unwrap();
                    let b = |r| scaled(s, k, 2, r).unwrap();
                    let want = match d.requested().as_slice() {
                        [1] => a(r1),
                        [2] => a(r2),
                        _ => (a(r1) + b(r2)).max(a(r2) + b(r1)),
                    };
                    if rows != want {
                        return Err(format!("K={k} r=({r1},{r2}) d={:?}: rows {rows}", d.d));
                    }
                    if !d.is_two_sided() {
                        continue;
                    }
                    for (i, ri) in [(1usize, r1), (2, r2)] {
                        let layout = description_layout(i, &d, &profile).unwrap();
                        let len = scaled(s, k, 1, ri).ok_or("length not integral")?;
                        if layout.len() != len {
                            return Err(format!("K={k} r=({r1},{r2}) d={:?}: len(W*_{i}) {}", d.d, layout.len()));
                        }
                        let e = scaled(s, k, 2, ri).ok_or("e_j not integral")?;
                        for j in (1..=k).filter(|&j| d.of(j) != i) {
                            let known: usize = layout
                                .groups
                                .iter()
                                .filter(|g| g.constituents.iter().all(|c| c.tau(i).contains(j)))
                                .map(|g| g.theta)
                                .sum();
                            if layout.len() - known != e {
                                return Err(format!("K={k} r=({r1},{r2}) d={:?}: e_{j} = {}", d.d, layout.len() - known));
                            }
                        }
                    }
                    let covered: usize = [1, 2]
                        .iter()
                        .map(|&i| description_layout(i, &d, &profile).unwrap().groups.iter().map(|g| g.kappa).sum::<usize>())
                        .sum();
                    if covered > 2 * chains.len() {
                        return Err("groups overlap".into());
                    }
                }
            }
        }
    }
    Ok(format!("{n} (K, r, demand) instances for K <= 8"))
}

fn convexity() -> Outcome {
    let mut coords = 0;
    for k in 1..=12usize {
        for i in 1..=k {
            if let Some(d) = second_differences(k, i).iter().find(|d| **d < int(0)) {
                return Err(format!("K={k} i={i}: second difference {d}"));
            }
            coords += 1;
        }
    }
    let mut lines = 0;
    for k in 2..=12usize {
        for m8 in 0..=16i64 {
            let m = ratio(m8, 8);
            let slopes: Vec<Rational> = breakpoints(k, &m)
                .unwrap()
                .iter()
                .filter_map(|b| slope_plus(&b.t1, k, &m).unwrap())
                .collect();
            if slopes.windows(2).any(|w| w[0] > w[1]) {
                return Err(format!("K={k} M={m}: slopes {slopes:?}"));
            }
            lines += 1;
        }
    }
    Ok(format!("{coords} coordinate functions convex, {lines} lines with monotone slopes"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("rate table for K=4", rate_table),
        ("worked pipeline K=4 r=(2,1) d=(1,1,1,2)", worked_pipeline),
        ("optimum K=4 p1=0.8 M=3/4", worked_optimum),
        ("K=6 M=1 landmarks", landmarks),
        ("achievable equals converse", optimality_equality),
        ("exhaustive decode K<=5", exhaustive),
        ("entropy identities K<=5", entropy_identities),
        ("structural identities", structural),
        ("convexity", convexity),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("acceptance {} PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("acceptance {} FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
