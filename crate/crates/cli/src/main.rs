//! `triway`: command-line front end for triway-core.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use triway_core::alloc::{self, ChannelShape, DemandTuple};
use triway_core::regions::{self, SpecialKind};
use triway_core::sim::{self, SimConfig};
use triway_core::sweep::{self, N3Policy};
use triway_core::{polytope, scd, Convention, Error, SnrTriple};

#[derive(Parser, Debug)]
#[command(name = "triway", version, about = "Gaussian 3-way channel toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,

    /// Write the document here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Which {
    Thm1,
    Lemma1,
    Prop1,
    Prop2,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Topo {
    P2p,
    ManyToOne,
    OneToMany,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Bounds of one region at a 3WC triple.
    Region {
        #[arg(long)]
        snr: String,
        #[arg(long, value_enum)]
        which: Which,
        #[arg(long)]
        n3: Option<u32>,
        /// Depth for prop1; defaults to the smallest admissible value.
        #[arg(long)]
        n1_tilde: Option<u32>,
        #[arg(long)]
        grouped: bool,
    },
    /// Per-dimension gap between lemma1 and prop2 (or thm1).
    Gap {
        #[arg(long)]
        snr: String,
        #[arg(long)]
        n3: Option<u32>,
        #[arg(long)]
        grouped: bool,
        /// Inner region.
        #[arg(long, value_enum, default_value_t = Which::Prop2)]
        which: Which,
    },
    /// Gap sweep over triples, or over Γ3 decades with (Γ3^(1/3), Γ3^(2/3), Γ3).
    Sweep {
        /// Repeatable.
        #[arg(long)]
        snr: Vec<String>,
        /// `lo,hi,points` in log10 of Γ3.
        #[arg(long)]
        decades: Option<String>,
        #[arg(long, default_value = "all")]
        n3: String,
    },
    /// Successive channel decomposition.
    Scd {
        /// One SNR for p2p, three (strongest first) otherwise.
        #[arg(long)]
        snr: String,
        #[arg(long, value_enum, default_value_t = Topo::P2p)]
        topology: Topo,
        /// Number of sub-channels of the strongest user.
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 1)]
        kappa: u32,
    },
    /// Place a demand on sub-channels.
    Alloc {
        #[arg(long)]
        demand: String,
        /// `Ñ1,Ñ2,Ñ3`; N1 follows from Ñ1 + N1 = Ñ2 + Ñ3.
        #[arg(long)]
        n_tilde: String,
    },
    /// Run the relay protocol; exit 0 iff every message decodes.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Used with --n-tilde when no config is given.
        #[arg(long)]
        demand: Option<String>,
        #[arg(long)]
        n_tilde: Option<String>,
        #[arg(long)]
        q: Option<u64>,
        #[arg(long)]
        blocks: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the per-transmission trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Sampled special-case frontiers.
    Special {
        #[arg(long)]
        snr: String,
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 64)]
        grid: usize,
    },
    /// Loss from forbidding adaptation.
    Adaptation {
        #[arg(long)]
        g1: f64,
        #[arg(long)]
        g2: f64,
    },
}

enum Failure {
    /// Bad input; exit 2.
    Validation { code: String, message: String },
    /// Exit 1.
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Internal { what } => Failure::Internal(what),
            e => Failure::Validation {
                code: e.code().to_string(),
                message: e.to_string(),
            },
        }
    }
}

fn invalid(code: &str, message: impl Into<String>) -> Failure {
    Failure::Validation {
        code: code.into(),
        message: message.into(),
    }
}

enum Doc {
    Json(Value),
    /// Header then rows; floats already rounded.
    Csv(Vec<String>, Vec<Vec<String>>),
}

struct Outcome {
    doc: Doc,
    /// Nonzero only for a simulation that did not decode.
    code: u8,
}

fn parse_list<T: std::str::FromStr>(s: &str, n: Option<usize>, code: &str, what: &str) -> Result<Vec<T>, Failure> {
    let v: Option<Vec<T>> = s.split(',').map(|x| x.trim().parse().ok()).collect();
    match v {
        Some(v) if n.map_or(!v.is_empty(), |n| v.len() == n) => Ok(v),
        _ => Err(invalid(code, format!("cannot parse {what} from {s:?}"))),
    }
}

fn parse_snr(s: &str) -> Result<SnrTriple, Failure> {
    let g: Vec<f64> = parse_list(s, Some(3), "malformed_snr", "g1,g2,g3")?;
    Ok(SnrTriple::new(g[0], g[1], g[2], Convention::ThreeWay)?)
}

fn parse_demand(s: &str) -> Result<DemandTuple, Failure> {
    let d: Vec<u32> = parse_list(s, Some(6), "malformed_demand", "r21,r31,r12,r32,r13,r23")?;
    Ok(DemandTuple([d[0], d[1], d[2], d[3], d[4], d[5]]))
}

fn parse_shape(s: &str) -> Result<ChannelShape, Failure> {
    let n: Vec<u32> = parse_list(s, Some(3), "malformed_n_tilde", "n1,n2,n3")?;
    if n[1] + n[2] < n[0] {
        return Err(invalid("config", format!("Ñ2 + Ñ3 < Ñ1 in {n:?}")));
    }
    Ok(ChannelShape::new([n[0], n[1], n[2]], n[1] + n[2] - n[0])?)
}

fn first_n3(s: &SnrTriple) -> Result<u32, Failure> {
    let w = regions::admissible_n3(s);
    match w.first() {
        Some(&n) => Ok(n as u32),
        None => Err(Error::Feasibility {
            param: "N3".into(),
            value: 0,
            lo: regions::prop2_window(s).0,
            hi: regions::prop2_window(s).1,
            admissible: w,
        }
        .into()),
    }
}

/// Rounds to 9 significant digits so output is stable across platforms.
fn round9(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.8e}").parse().unwrap_or(x)
    } else {
        x
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64().map(round9).and_then(serde_json::Number::from_f64) {
                *n = x;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(m) => m.values_mut().for_each(round_value),
        _ => {}
    }
}

fn to_value(x: &impl Serialize) -> Result<Value, Failure> {
    serde_json::to_value(x).map_err(|e| Failure::Internal(e.to_string()))
}

fn json(x: &impl Serialize) -> Result<Outcome, Failure> {
    Ok(Outcome {
        doc: Doc::Json(to_value(x)?),
        code: 0,
    })
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) if n.is_f64() => round9(n.as_f64().unwrap_or(f64::NAN)).to_string(),
        v => v.to_string(),
    }
}

fn gap_csv(rows: &[sweep::SweepRow<f64>]) -> Result<Doc, Failure> {
    let header = ["g1", "g2", "g3", "N3", "grouped", "exact_gap", "sufficient_gap", "skipped"];
    let mut out = Vec::new();
    for r in rows {
        let v = to_value(r)?;
        out.push(header.iter().map(|h| cell(&v[*h])).collect());
    }
    Ok(Doc::Csv(header.iter().map(|s| s.to_string()).collect(), out))
}

fn region_csv(r: &regions::Region<f64>) -> Doc {
    let header = ["label", "R21", "R31", "R12", "R32", "R13", "R23", "rhs"];
    let rows = r
        .bounds
        .iter()
        .map(|b| {
            let mut row = vec![b.label.clone()];
            row.extend(b.coeffs.iter().map(|c| c.to_string()));
            row.push(round9(b.rhs).to_string());
            row
        })
        .collect();
    Doc::Csv(header.iter().map(|s| s.to_string()).collect(), rows)
}

fn threads() -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("TRIWAY_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| invalid("config", format!("TRIWAY_THREADS must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Failure::Internal(e.to_string()))
}

fn read_config(path: &Path) -> Result<SimConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid("io", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid("config", format!("{}: {e}", path.display())))
}

fn dispatch(cli: &Cli) -> Result<Outcome, Failure> {
    let csv = cli.format == Format::Csv;
    match &cli.cmd {
        Cmd::Region {
            snr,
            which,
            n3,
            n1_tilde,
            grouped,
        } => {
            let s = parse_snr(snr)?;
            let r = match which {
                Which::Thm1 => regions::theorem1_region(&s)?,
                Which::Lemma1 => regions::lemma1_outer(&s)?,
                Which::Prop2 => {
                    let n = match n3 {
                        Some(n) => *n,
                        None => first_n3(&s)?,
                    };
                    regions::prop2_3wc_region(&s, n, *grouped)?
                }
                Which::Prop1 => {
                    let y = regions::y_of_3wc(&s)?;
                    let n = match n1_tilde {
                        Some(n) => *n,
                        None => regions::admissible_n1_tilde(&y).first().map_or(0, |&n| n as u32),
                    };
                    regions::prop1_y_region(&y, n)?
                }
            };
            if csv {
                return Ok(Outcome {
                    doc: region_csv(&r),
                    code: 0,
                });
            }
            json(&r)
        }
        Cmd::Gap { snr, n3, grouped, which } => {
            let s = parse_snr(snr)?;
            let outer = regions::lemma1_outer(&s)?;
            let (inner, n) = match which {
                Which::Thm1 => (regions::theorem1_region(&s)?, None),
                Which::Prop2 => {
                    let n = match n3 {
                        Some(n) => *n,
                        None => first_n3(&s)?,
                    };
                    (regions::prop2_3wc_region(&s, n, *grouped)?, Some(n))
                }
                w => return Err(invalid("config", format!("gap inner region must be thm1 or prop2, got {w:?}"))),
            };
            let g = polytope::per_dimension_gap(&outer, &inner)?;
            if csv {
                let row = sweep::SweepRow {
                    g1: s.g1,
                    g2: s.g2,
                    g3: s.g3,
                    n3: n,
                    grouped: n.map(|_| *grouped),
                    exact_gap: Some(g.exact_gap),
                    sufficient_gap: g.sufficient_gap,
                    skipped: false,
                };
                return Ok(Outcome {
                    doc: gap_csv(&[row])?,
                    code: 0,
                });
            }
            json(&g)
        }
        Cmd::Sweep { snr, decades, n3 } => {
            let policy: N3Policy = n3.parse()?;
            let mut grid = snr.iter().map(|s| parse_snr(s)).collect::<Result<Vec<_>, _>>()?;
            if let Some(d) = decades {
                let p: Vec<f64> = parse_list(d, Some(3), "malformed_decades", "lo,hi,points")?;
                let k = p[2] as usize;
                if k < 1 || p[2].fract() != 0.0 {
                    return Err(invalid("malformed_decades", "points must be a positive integer"));
                }
                for i in 0..k {
                    let e = if k == 1 { p[0] } else { p[0] + (p[1] - p[0]) * i as f64 / (k - 1) as f64 };
                    let g3 = 10f64.powf(e);
                    grid.push(SnrTriple::new(g3.cbrt(), g3.powf(2.0 / 3.0), g3, Convention::ThreeWay)?);
                }
            }
            if grid.is_empty() {
                return Err(invalid("config", "sweep needs --snr or --decades"));
            }
            let points = threads()?.install(|| sweep::sweep(&grid, policy))?;
            if csv {
                return Ok(Outcome {
                    doc: gap_csv(&sweep::rows(&points))?,
                    code: 0,
                });
            }
            json(&points)
        }
        Cmd::Scd { snr, topology, n, kappa } => {
            let g: Vec<f64> = parse_list(snr, None, "malformed_snr", "SNR list")?;
            let d = match topology {
                Topo::P2p if g.len() == 1 => scd::decompose_p2p(g[0], *n)?,
                Topo::P2p => return Err(invalid("malformed_snr", "p2p takes a single SNR")),
                Topo::ManyToOne => scd::decompose_many_to_one(&g, *n, *kappa)?,
                Topo::OneToMany => scd::decompose_one_to_many(&g, *n)?,
            };
            json(&d)
        }
        Cmd::Alloc { demand, n_tilde } => {
            let d = parse_demand(demand)?;
            let sh = parse_shape(n_tilde)?;
            json(&alloc::allocate(&d, &sh)?)
        }
        Cmd::Simulate {
            config,
            demand,
            n_tilde,
            q,
            blocks,
            seed,
            trace,
        } => {
            let mut cfg = match (config, demand, n_tilde) {
                (Some(p), None, None) => read_config(p)?,
                (None, Some(d), Some(n)) => {
                    let a = alloc::allocate(&parse_demand(d)?, &parse_shape(n)?)?;
                    SimConfig::random(a, q.unwrap_or(64), blocks.unwrap_or(3), seed.unwrap_or(0))
                }
                _ => return Err(invalid("config", "give either --config or both --demand and --n-tilde")),
            };
            if config.is_some() {
                let fresh = cfg.messages.is_empty() || q.is_some() || blocks.is_some() || seed.is_some();
                cfg.q = q.unwrap_or(cfg.q);
                cfg.blocks = blocks.unwrap_or(cfg.blocks);
                cfg.seed = seed.unwrap_or(cfg.seed);
                if fresh {
                    cfg = SimConfig::random(cfg.allocation, cfg.q, cfg.blocks, cfg.seed);
                }
            }
            let out = sim::run(&cfg)?;
            if let Some(p) = trace {
                let f = std::fs::File::create(p).map_err(|e| invalid("io", format!("{}: {e}", p.display())))?;
                let mut w = std::io::BufWriter::new(f);
                out.trace.write_jsonl(&mut w).map_err(|e| Failure::Internal(e.to_string()))?;
            }
            let ok = out.success && out.decoded.iter().all(|(k, v)| {
                cfg.messages.get(k).is_some_and(|m| v.iter().zip(m).all(|(a, b)| *a == Some(*b)) && v.len() == m.len())
            });
            let doc = json!({
                "success": ok,
                "decoded": out.decoded,
                "residual": out.residual,
                "decode_log": out.trace.decode_log,
                "blocked": out.trace.blocked,
            });
            Ok(Outcome {
                doc: Doc::Json(doc),
                code: if ok { 0 } else { 3 },
            })
        }
        Cmd::Special { snr, kind, grid } => {
            let s = parse_snr(snr)?;
            let k: SpecialKind = kind.parse()?;
            json(&regions::special_case_region(k, &s, *grid)?)
        }
        Cmd::Adaptation { g1, g2 } => {
            let gap = regions::adaptation_gap(*g1, *g2)?;
            json(&json!({ "g1": g1, "g2": g2, "adaptation_gap": gap }))
        }
    }
}

fn render(doc: Doc) -> Result<Vec<u8>, Failure> {
    match doc {
        Doc::Json(mut v) => {
            round_value(&mut v);
            let mut b = serde_json::to_vec_pretty(&v).map_err(|e| Failure::Internal(e.to_string()))?;
            b.push(b'\n');
            Ok(b)
        }
        Doc::Csv(header, rows) => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let err = |e: csv::Error| Failure::Internal(e.to_string());
            w.write_record(&header).map_err(err)?;
            for r in rows {
                w.write_record(&r).map_err(err)?;
            }
            w.into_inner().map_err(|e| Failure::Internal(e.to_string()))
        }
    }
}

fn fail(code: &str, message: &str) {
    let e = json!({ "error": code, "message": message });
    eprintln!("{e}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let code = match e.kind() {
                K::InvalidSubcommand => "unknown_subcommand",
                K::MissingSubcommand => "missing_subcommand",
                K::UnknownArgument => "unknown_argument",
                K::MissingRequiredArgument => "missing_argument",
                _ => "usage",
            };
            fail(code, e.to_string().trim());
            return ExitCode::from(2);
        }
    };
    let res = dispatch(&cli).and_then(|o| {
        if cli.format == Format::Csv && matches!(o.doc, Doc::Json(_)) {
            return Err(invalid("config", "csv output is only available for region, gap and sweep"));
        }
        Ok((render(o.doc)?, o.code))
    });
    match res {
        Ok((bytes, code)) => {
            let written = match &cli.out {
                Some(p) => std::fs::write(p, &bytes),
                None => std::io::stdout().lock().write_all(&bytes),
            };
            if let Err(e) = written {
                fail("io", &e.to_string());
                return ExitCode::from(2);
            }
            ExitCode::from(code)
        }
        Err(Failure::Validation { code, message }) => {
            fail(&code, &message);
            ExitCode::from(2)
        }
        Err(Failure::Internal(m)) => {
            fail("internal", &m);
            ExitCode::from(1)
        }
    }
}
