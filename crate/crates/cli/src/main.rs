use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nucache::converse::converse_bound;
use nucache::delivery::{decode, encode_delivery, DeliveryMessage, DemandVector};
use nucache::numeric::{self, format_rational, parse_rational, Rational};
use nucache::optimizer::{baseline_grouping, baseline_uniform, optimal_allocation, region_boundaries};
use nucache::oracle::{exhaustive_decode, lemma1_sweep};
use nucache::placement::{place, random_files, CacheMap, PlacementConfig};
use nucache::rates::{expected_rate, one_sided_rate, two_sided_rate};
use nucache::scheme::{share_plan, JointScheme, SharePlan};
use nucache::{PrimeField, Profile, DEFAULT_PRIME};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "nucache", version, about = "Coded caching for files with non-uniform popularity")]
struct Cli {
    /// Prime field used for all coding.
    #[arg(long, global = true, env = "NUCACHE_FIELD_PRIME", default_value_t = DEFAULT_PRIME)]
    prime: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Split random files into subfiles and fill every cache.
    Place(PlaceArgs),
    /// Encode the broadcast for a demand vector.
    Deliver {
        #[arg(long)]
        map: PathBuf,
        /// Requested file per user, comma separated.
        #[arg(long, value_delimiter = ',')]
        demand: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover one user's file from its cache and a message.
    Decode {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        msg: PathBuf,
        #[arg(long)]
        user: usize,
    },
    /// Delivery rates for every integer profile, as CSV.
    RateTable {
        #[arg(long)]
        users: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimal two-file allocation and the two baselines.
    Optimal {
        #[arg(long)]
        users: usize,
        #[arg(long)]
        p1: String,
        #[arg(long)]
        memory: String,
        #[arg(long)]
        json: bool,
    },
    /// Lower bound for uncoded placement and its minimizer.
    Converse {
        #[arg(long)]
        users: usize,
        #[arg(long)]
        files: Option<usize>,
        /// Popularities, comma separated; must sum to 1.
        #[arg(long, value_delimiter = ',')]
        p: Vec<String>,
        #[arg(long)]
        memory: String,
    },
    /// Values of `p1` where the optimal allocation changes.
    Regions {
        #[arg(long)]
        users: usize,
        #[arg(long)]
        memory: String,
        #[arg(long, default_value_t = 200)]
        steps: i64,
    },
    /// Plot-ready CSV over popularity, memory or the integer profile grid.
    Sweep(SweepArgs),
    /// Exhaustive decode and entropy-identity check.
    Verify {
        #[arg(long, default_value_t = 4)]
        k_max: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 2)]
        subfile_len: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct PlaceArgs {
    #[arg(long)]
    users: usize,
    #[arg(long)]
    files: usize,
    /// Integer profile, one entry per file.
    #[arg(long, value_delimiter = ',', conflicts_with = "t", required_unless_present = "t")]
    r: Vec<usize>,
    /// Fractional two-file allocation, realized by memory sharing.
    #[arg(long, value_delimiter = ',')]
    t: Vec<String>,
    /// Symbols per subfile (per unit of the minimal length for `--t`).
    #[arg(long, default_value_t = nucache::placement::DEFAULT_SUBFILE_LEN)]
    subfile_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMode {
    Prob,
    Memory,
    Surface,
}

#[derive(clap::Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    mode: SweepMode,
    #[arg(long)]
    users: usize,
    #[arg(long, default_value = "1")]
    memory: String,
    #[arg(long, default_value = "0.8")]
    p1: String,
    #[arg(long, default_value_t = 100)]
    steps: i64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct PlaceArtifact {
    schema_version: u32,
    #[serde(rename = "N")]
    files: usize,
    #[serde(rename = "K")]
    users: usize,
    prime: u64,
    seed: u64,
    file_len: u64,
    /// `relabel[j]` is the caller's label of internal file `j + 1`.
    relabel: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    plan: Option<SharePlan>,
    /// Symbols per subfile of each segment.
    subfile_len: Vec<usize>,
    segments: Vec<CacheMap>,
    /// Ground-truth files in internal labels.
    data: Vec<Vec<u64>>,
}

#[derive(Serialize, Deserialize)]
struct MessageArtifact {
    schema_version: u32,
    demand: Vec<usize>,
    messages: Vec<DeliveryMessage>,
}

enum Outcome {
    Ok,
    VerificationFailed,
}

fn rational(s: &str) -> anyhow::Result<Rational> {
    Ok(parse_rational(s)?)
}

fn emit(out: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(p: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
}

fn f64s(x: &Rational) -> String {
    format!("{}", numeric::to_f64(x))
}

/// Indices `0..n` ordered by decreasing `key`, stable.
fn descending<T: PartialOrd>(key: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..key.len()).collect();
    idx.sort_by(|&a, &b| key[b].partial_cmp(&key[a]).expect("comparable keys"));
    idx
}

fn cmd_place(args: PlaceArgs, field: PrimeField) -> anyhow::Result<Outcome> {
    let (relabel, plan, profiles_len): (Vec<usize>, Option<SharePlan>, Vec<(Profile, usize)>);
    let file_len: u64;
    if !args.t.is_empty() {
        if args.files != 2 || args.t.len() != 2 {
            bail!("--t needs exactly two files");
        }
        let t: Vec<Rational> = args.t.iter().map(|s| rational(s)).collect::<anyhow::Result<_>>()?;
        let order = descending(&t);
        let p = share_plan(args.users, &t[order[0]], &t[order[1]])?;
        file_len = p.minimal_file_len()? * args.subfile_len as u64;
        let scheme = JointScheme::new(p.clone(), file_len, field)?;
        profiles_len = scheme.segment_configs()?.into_iter().map(|c| (c.profile, c.subfile_len)).collect();
        relabel = order.iter().map(|i| i + 1).collect();
        plan = Some(p);
    } else {
        if args.r.len() != args.files {
            bail!("--r has {} entries for {} files", args.r.len(), args.files);
        }
        let order = descending(&args.r);
        let profile = Profile::for_users(order.iter().map(|&i| args.r[i]).collect(), args.users)?;
        let cfg = PlacementConfig::new(args.users, profile.clone(), args.subfile_len, field)?;
        file_len = cfg.file_len()? as u64;
        profiles_len = vec![(profile, args.subfile_len)];
        relabel = order.iter().map(|i| i + 1).collect();
        plan = None;
    }
    let original = random_files(args.files, file_len as usize, field, args.seed);
    let data: Vec<Vec<u64>> = relabel.iter().map(|&f| original[f - 1].clone()).collect();
    let mut segments = Vec::new();
    let mut offset = 0usize;
    for (profile, len) in &profiles_len {
        let cfg = PlacementConfig::new(args.users, profile.clone(), *len, field)?;
        let seg_len = cfg.file_len()?;
        let seg: Vec<Vec<u64>> = data.iter().map(|f| f[offset..offset + seg_len].to_vec()).collect();
        segments.push(place(&cfg, &seg)?);
        offset += seg_len;
    }
    let artifact = PlaceArtifact {
        schema_version: SCHEMA_VERSION,
        files: args.files,
        users: args.users,
        prime: field.prime(),
        seed: args.seed,
        file_len,
        relabel,
        plan,
        subfile_len: profiles_len.iter().map(|(_, l)| *l).collect(),
        segments,
        data,
    };
    emit(&args.out, &serde_json::to_string(&artifact)?)?;
    if args.out.is_some() {
        eprintln!(
            "placed {} files of {} symbols for {} users in {} segment(s)",
            args.files,
            file_len,
            args.users,
            artifact.segments.len()
        );
    }
    Ok(Outcome::Ok)
}

fn segment_configs(a: &PlaceArtifact) -> anyhow::Result<Vec<PlacementConfig>> {
    let field = PrimeField::new(a.prime)?;
    a.segments
        .iter()
        .zip(&a.subfile_len)
        .map(|(m, &l)| Ok(PlacementConfig::new(a.users, m.r.clone(), l, field)?))
        .collect()
}

fn internal_demand(a: &PlaceArtifact, demand: &[usize]) -> anyhow::Result<DemandVector> {
    if demand.len() != a.users {
        bail!("demand has {} entries for {} users", demand.len(), a.users);
    }
    let d = demand
        .iter()
        .map(|&f| {
            a.relabel
                .iter()
                .position(|&x| x == f)
                .map(|j| j + 1)
                .with_context(|| format!("demanded file {f} not in the library"))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(DemandVector::new(d, a.files)?)
}

fn cmd_deliver(map: &Path, demand: &[usize], out: &Option<PathBuf>, field: PrimeField) -> anyhow::Result<Outcome> {
    let a: PlaceArtifact = read_json(map)?;
    if a.prime != field.prime() {
        bail!("map was built over p = {}, current field is p = {}", a.prime, field.prime());
    }
    if a.files != 2 {
        bail!("delivery is implemented for two files, map has {}", a.files);
    }
    let d = internal_demand(&a, demand)?;
    let mut messages = Vec::new();
    let mut offset = 0usize;
    for cfg in segment_configs(&a)? {
        let seg_len = cfg.file_len()?;
        let seg: Vec<Vec<u64>> = a.data.iter().map(|f| f[offset..offset + seg_len].to_vec()).collect();
        messages.push(encode_delivery(&d, &seg, &cfg)?);
        offset += seg_len;
    }
    let sent: usize = messages.iter().map(|m| m.symbols()).sum();
    let rate = Rational::new((sent as i64).into(), (a.file_len as i64).into());
    let artifact = MessageArtifact { schema_version: SCHEMA_VERSION, demand: demand.to_vec(), messages };
    emit(out, &serde_json::to_string(&artifact)?)?;
    let shape: Vec<String> =
        artifact.messages.iter().map(|m| format!("{}x{}", m.rows.len(), m.columns.len())).collect();
    eprintln!("outer systems {}; rate {} ({})", shape.join(", "), format_rational(&rate), f64s(&rate));
    Ok(Outcome::Ok)
}

fn digest(symbols: &[u64]) -> String {
    let mut h = Sha256::new();
    for s in symbols {
        h.update(s.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn cmd_decode(map: &Path, msg: &Path, user: usize, field: PrimeField) -> anyhow::Result<Outcome> {
    let a: PlaceArtifact = read_json(map)?;
    let m: MessageArtifact = read_json(msg)?;
    if a.prime != field.prime() {
        bail!("map was built over p = {}, current field is p = {}", a.prime, field.prime());
    }
    if m.messages.len() != a.segments.len() {
        bail!("{} messages for {} segments", m.messages.len(), a.segments.len());
    }
    if user == 0 || user > a.users {
        bail!("user {user} outside [1, {}]", a.users);
    }
    let mut out = Vec::new();
    for (seg, msg) in a.segments.iter().zip(&m.messages) {
        out.extend(decode(user, seg.user(user)?, msg)?);
    }
    let wanted = m.messages[0].demand.of(user);
    let ok = out == a.data[wanted - 1];
    println!(
        "user {user} file {} symbols {} sha256 {} {}",
        a.relabel[wanted - 1],
        out.len(),
        digest(&out),
        if ok { "verified" } else { "MISMATCH" }
    );
    Ok(if ok { Outcome::Ok } else { Outcome::VerificationFailed })
}

fn rate_table(users: usize) -> String {
    let mut s = String::from("r1,r2,R12,R1,R2,R12_f64,R1_f64,R2_f64\n");
    for r1 in 0..=users {
        for r2 in 0..=r1 {
            let both = two_sided_rate(users, r1, r2);
            let a = one_sided_rate(users, r1);
            let b = one_sided_rate(users, r2);
            s += &format!(
                "{r1},{r2},{},{},{},{},{},{}\n",
                format_rational(&both),
                format_rational(&a),
                format_rational(&b),
                f64s(&both),
                f64s(&a),
                f64s(&b)
            );
        }
    }
    s
}

#[derive(Serialize)]
struct OptimalReport {
    #[serde(rename = "K")]
    users: usize,
    p1: String,
    memory: String,
    t1: String,
    t2: String,
    rbar: String,
    rbar_f64: f64,
    r_un: String,
    r_un_f64: f64,
    r_nc: String,
    r_nc_f64: f64,
    tie: bool,
}

fn cmd_optimal(users: usize, p1: &str, memory: &str, json: bool) -> anyhow::Result<Outcome> {
    let p = rational(p1)?;
    let m = rational(memory)?;
    let a = optimal_allocation(users, &p, &m)?;
    let (t1, t2) = a.original_labels();
    let un = baseline_uniform(users, &p, &m)?;
    let nc = baseline_grouping(users, &p, &m)?;
    let r = OptimalReport {
        users,
        p1: format_rational(&p),
        memory: format_rational(&m),
        t1: format_rational(&t1),
        t2: format_rational(&t2),
        rbar: format_rational(&a.rbar),
        rbar_f64: numeric::to_f64(&a.rbar),
        r_un: format_rational(&un),
        r_un_f64: numeric::to_f64(&un),
        r_nc: format_rational(&nc),
        r_nc_f64: numeric::to_f64(&nc),
        tie: a.tie,
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&r)?);
    } else {
        println!("t1 = {}, t2 = {}", r.t1, r.t2);
        println!("rbar = {} ({})", r.rbar, r.rbar_f64);
        println!("r_un = {} ({})", r.r_un, r.r_un_f64);
        println!("r_nc = {} ({})", r.r_nc, r.r_nc_f64);
        if r.tie {
            println!("tie: larger t1 on the same flat segment are optimal too");
        }
    }
    Ok(Outcome::Ok)
}

fn cmd_converse(users: usize, files: Option<usize>, p: &[String], memory: &str) -> anyhow::Result<Outcome> {
    let p: Vec<Rational> = p.iter().map(|s| rational(s)).collect::<anyhow::Result<_>>()?;
    if let Some(n) = files {
        if n != p.len() {
            bail!("--files {n} but {} popularities", p.len());
        }
    }
    let m = rational(memory)?;
    let r = converse_bound(users, &p, &m)?;
    println!("{}", serde_json::to_string_pretty(&serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "bound": format_rational(&r.value),
        "bound_f64": numeric::to_f64(&r.value),
        "t": r.t.iter().map(format_rational).collect::<Vec<_>>(),
        "method": r.method,
        "lp_value": r.lp_value,
        "certified": r.certified,
        "ties": r.ties,
    }))?);
    Ok(if r.certified { Outcome::Ok } else { Outcome::VerificationFailed })
}

fn cmd_regions(users: usize, memory: &str, steps: i64) -> anyhow::Result<Outcome> {
    let m = rational(memory)?;
    let b = region_boundaries(users, &m, steps, 40)?;
    println!("p1,gap,from_t1,to_t1");
    for x in b {
        println!("{:.6},{:.6},{},{}", x.p1, x.gap, format_rational(&x.from_t1), format_rational(&x.to_t1));
    }
    Ok(Outcome::Ok)
}

fn allocation_row(users: usize, p: &Rational, m: &Rational) -> anyhow::Result<String> {
    let a = optimal_allocation(users, p, m)?;
    let (t1, t2) = a.original_labels();
    let un = baseline_uniform(users, p, m)?;
    let nc = baseline_grouping(users, p, m)?;
    Ok(format!(
        "{},{},{},{},{},{},{},{},{}",
        format_rational(&t1),
        format_rational(&t2),
        format_rational(&a.rbar),
        f64s(&a.rbar),
        format_rational(&un),
        f64s(&un),
        format_rational(&nc),
        f64s(&nc),
        a.tie
    ))
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<Outcome> {
    let k = args.users;
    if args.steps < 1 {
        bail!("--steps must be positive");
    }
    let text = match args.mode {
        SweepMode::Prob => {
            let m = rational(&args.memory)?;
            let rows = (0..args.steps)
                .into_par_iter()
                .map(|i| {
                    let p = numeric::ratio(args.steps + i, 2 * args.steps);
                    let gap = numeric::int(2) * &p - numeric::int(1);
                    Ok(format!("{},{},{}", format_rational(&p), f64s(&gap), allocation_row(k, &p, &m)?))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            format!("p1,gap_f64,t1,t2,rbar,rbar_f64,r_un,r_un_f64,r_nc,r_nc_f64,tie\n{}\n", rows.join("\n"))
        }
        SweepMode::Memory => {
            let p = rational(&args.p1)?;
            let rows = (0..=args.steps)
                .into_par_iter()
                .map(|i| {
                    let m = numeric::ratio(2 * i, args.steps);
                    Ok(format!("{},{}", format_rational(&m), allocation_row(k, &p, &m)?))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            format!("M,t1,t2,rbar,rbar_f64,r_un,r_un_f64,r_nc,r_nc_f64,tie\n{}\n", rows.join("\n"))
        }
        SweepMode::Surface => {
            let p = rational(&args.p1)?;
            let mut s = String::from("r1,r2,M,rbar,rbar_f64\n");
            for r1 in 0..=k {
                for r2 in 0..=r1 {
                    let t1 = numeric::int(r1 as i64);
                    let t2 = numeric::int(r2 as i64);
                    let v = expected_rate(k, &p, &t1, &t2)?;
                    let m = numeric::ratio((r1 + r2) as i64, k as i64);
                    s += &format!("{r1},{r2},{},{},{}\n", format_rational(&m), format_rational(&v), f64s(&v));
                }
            }
            s
        }
    };
    emit(&args.out, &text)?;
    Ok(Outcome::Ok)
}

fn cmd_verify(k_max: usize, seeds: &[u64], subfile_len: usize, out: &Option<PathBuf>, field: PrimeField) -> anyhow::Result<Outcome> {
    let report = exhaustive_decode(k_max, seeds, subfile_len, field);
    let lemma: Vec<_> = lemma1_sweep(k_max, field).into_iter().collect::<Result<_, _>>()?;
    let decode_fail = report.instances.iter().filter(|i| !i.pass).count();
    let lemma_fail = lemma.iter().filter(|r: &&nucache::oracle::Lemma1Report| !r.pass).count();
    let json = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "decode": report,
        "entropy_identities": lemma,
    });
    if let Some(p) = out {
        fs::write(p, serde_json::to_string_pretty(&json)?)?;
    }
    println!(
        "decode: {} instances, {} failed; entropy identities: {} instances, {} failed",
        json["decode"]["instances"].as_array().map_or(0, |v| v.len()),
        decode_fail,
        lemma.len(),
        lemma_fail
    );
    Ok(if decode_fail == 0 && lemma_fail == 0 { Outcome::Ok } else { Outcome::VerificationFailed })
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let field = PrimeField::new(cli.prime)?;
    match cli.cmd {
        Cmd::Place(args) => cmd_place(args, field),
        Cmd::Deliver { map, demand, out } => cmd_deliver(&map, &demand, &out, field),
        Cmd::Decode { map, msg, user } => cmd_decode(&map, &msg, user, field),
        Cmd::RateTable { users, out } => {
            emit(&out, &rate_table(users))?;
            Ok(Outcome::Ok)
        }
        Cmd::Optimal { users, p1, memory, json } => cmd_optimal(users, &p1, &memory, json),
        Cmd::Converse { users, files, p, memory } => cmd_converse(users, files, &p, &memory),
        Cmd::Regions { users, memory, steps } => cmd_regions(users, &memory, steps),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Verify { k_max, seeds, subfile_len, out } => cmd_verify(k_max, &seeds, subfile_len, &out, field),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
