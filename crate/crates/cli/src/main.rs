use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use jindex::james::{
    self, coding_tree, cs_tree, extract_summand, is_cs, jt_witness, np1_inclusion_check, rat, Body, CsTree,
    JamesError, Matrix, SpaceNorm, Q,
};
use jindex::ramsey::{
    homogenize_chain, homogenize_lambda_e, homogenize_levels, longest_homogeneous_chain, reduce_colors_chain,
    sharp_coloring, shuffle_maps, ChainOutcome, PairColoring, RamseyError, TripleColoring,
};
use jindex::{find_monotone_map, t_xi_truncate, BTree, Cutoffs, Kind, Ordinal, Product, TreeError};

mod selftest;

#[derive(Parser)]
#[command(name = "jindex", version, about = "Ordinals, well-founded trees, tree Ramsey constructions and convex-separation indices")]
struct Cli {
    #[command(flatten)]
    run: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunConfig {
    /// Print machine-readable JSON
    #[arg(long, global = true)]
    json: bool,
    /// Seed for randomized inputs and suites
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Depth cap for tree enumerations
    #[arg(long, global = true)]
    depth_cap: Option<usize>,
    /// Largest k for 1/k thresholds
    #[arg(long, global = true, default_value_t = 4)]
    kmax: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Ordinal arithmetic in Cantor normal form
    #[command(subcommand)]
    Ord(OrdCmd),
    /// Tree orders, products and monotone maps
    #[command(subcommand)]
    Tree(TreeCmd),
    /// Homogenization of colorings
    #[command(subcommand)]
    Ramsey(RamseyCmd),
    /// Convex separation of polyhedral bodies and operators
    #[command(subcommand)]
    James(JamesCmd),
    /// Seeded property checks across all modules
    Selftest {
        /// Cases per suite
        #[arg(long, default_value_t = 50)]
        cases: usize,
    },
}

#[derive(Subcommand)]
enum OrdCmd {
    /// Ordinal sum a + b
    Add { a: String, b: String },
    /// Ordinal product a * b
    Mul { a: String, b: String },
    /// Natural (Hessenberg) sum
    Nsum { a: String, b: String },
    /// Compare two ordinals
    Cmp { a: String, b: String },
    /// Zero, successor or limit
    Classify { a: String },
    /// All pairs (x, y) whose natural sum is a
    Decomp { a: String },
    /// n-th term of the fundamental sequence of a limit
    Fund { a: String, n: u64 },
}

#[derive(Subcommand)]
enum TreeCmd {
    /// Order of a tree, or of the product of two trees
    Order {
        #[arg(required_unless_present = "product")]
        file: Option<PathBuf>,
        #[arg(long, num_args = 2, value_names = ["T0", "T1"])]
        product: Option<Vec<PathBuf>>,
    },
    /// Search for a monotone map from the first tree into the second
    Map { from: PathBuf, to: PathBuf },
    /// Finite truncation of the canonical tree of order w^xi
    Txi {
        xi: String,
        /// Branching used for each w in the truncation
        #[arg(long, default_value_t = 2)]
        cutoff: u64,
    },
}

#[derive(Subcommand)]
enum RamseyCmd {
    /// Homogeneous n-subset of a pair coloring of a chain
    Chain {
        /// Size of the homogeneous chain
        #[arg(short)]
        n: usize,
        /// Expected chain length; also the length of a random coloring
        #[arg(short = 'M')]
        m: Option<usize>,
        /// Coloring JSON
        #[arg(long)]
        coloring: Option<PathBuf>,
        /// Number of colors for a seeded random coloring
        #[arg(long, default_value_t = 2)]
        colors: u32,
    },
    /// Homogeneous chain for a coloring of extension triples
    LambdaE {
        /// Size of the homogeneous chain
        #[arg(short)]
        n: usize,
        /// Coloring JSON
        #[arg(long)]
        coloring: PathBuf,
    },
    /// Cross-level homogenization in a product with a chain
    Levels {
        /// Size of the homogeneous chain
        #[arg(short)]
        n: usize,
        /// Tree JSON for the unit
        #[arg(long)]
        unit: PathBuf,
        /// Coloring JSON
        #[arg(long)]
        coloring: PathBuf,
    },
    /// Shuffle maps of a tree into its product with T_2
    Shuffle { tree: PathBuf },
    /// Sharpness coloring and its longest homogeneous chains
    Sharp {
        xi: String,
        zeta0: String,
        zeta1: String,
        /// Branching used for each w in the truncation
        #[arg(long, default_value_t = 2)]
        cutoff: usize,
    },
}

#[derive(Subcommand)]
enum JamesCmd {
    /// Tree of all (K, eps)-cs sequences over a point set
    Cstree {
        /// Body JSON
        #[arg(short = 'K')]
        body: PathBuf,
        /// Point list JSON
        #[arg(short = 'P')]
        points: PathBuf,
        /// Separation threshold, a rational such as 1/2
        #[arg(long)]
        eps: String,
        /// Norm JSON; every point must lie in its unit ball
        #[arg(long)]
        ball: Option<PathBuf>,
    },
    /// Decide whether a sequence is (K, eps)-cs
    Iscs {
        /// Body JSON
        #[arg(short = 'K')]
        body: PathBuf,
        /// Point list JSON
        #[arg(short = 'P')]
        points: PathBuf,
        /// Separation threshold, a rational such as 1/2
        #[arg(long)]
        eps: String,
    },
    /// Extract a cs tree for K or L from one for K + L
    Extract {
        /// Body JSON for K
        #[arg(short = 'K')]
        first: PathBuf,
        /// Body JSON for L
        #[arg(short = 'L')]
        second: PathBuf,
        /// Separation threshold, a rational such as 1/2
        #[arg(long)]
        eps: String,
        /// Cs tree for K + L; built from -P when absent
        #[arg(short = 'W')]
        tree: Option<PathBuf>,
        /// Point list JSON
        #[arg(short = 'P')]
        points: Option<PathBuf>,
    },
    /// Witness for the James tree space norm of a tree
    Jt { tree: PathBuf },
    /// Coding tree of an operator
    Coding {
        /// Matrix JSON
        #[arg(short = 'A')]
        matrix: PathBuf,
        /// Norm JSON of the domain
        #[arg(long)]
        x_norm: PathBuf,
        /// Norm JSON of the codomain
        #[arg(long)]
        y_norm: PathBuf,
        /// Point list JSON
        #[arg(short = 'P')]
        points: PathBuf,
    },
    /// Lower l1 tree inclusion check
    L1 {
        /// Matrix JSON
        #[arg(short = 'A')]
        matrix: PathBuf,
        /// Lower l1 constant, a rational
        #[arg(long)]
        c: String,
        /// Norm JSON of the codomain
        #[arg(long)]
        y_norm: PathBuf,
        /// Point list JSON
        #[arg(short = 'P')]
        points: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    Verification(String),
    Usage(String),
    Schema(String),
    Cap(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Schema(_) => 3,
            Failure::Cap(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Verification(m) | Failure::Usage(m) | Failure::Schema(m) | Failure::Cap(m) => m,
        }
    }
}

impl From<JamesError> for Failure {
    fn from(e: JamesError) -> Self {
        let m = e.to_string();
        match e {
            JamesError::Cap(_) => Failure::Cap(m),
            JamesError::Parameter(_) => Failure::Usage(m),
            JamesError::Verification(_) | JamesError::Insufficient { .. } => Failure::Verification(m),
            JamesError::Dimension { .. } | JamesError::Empty(_) | JamesError::OutsideBall(_) | JamesError::Split(_) => {
                Failure::Schema(m)
            }
        }
    }
}

impl From<RamseyError> for Failure {
    fn from(e: RamseyError) -> Self {
        let m = e.to_string();
        match e {
            RamseyError::Cap(_) => Failure::Cap(m),
            RamseyError::Parameter(_) | RamseyError::WrongK { .. } => Failure::Usage(m),
            RamseyError::Verification(_) | RamseyError::Map(_) | RamseyError::Insufficient { .. } => {
                Failure::Verification(m)
            }
            RamseyError::NotChain
            | RamseyError::NotUnitConstant(_)
            | RamseyError::Coloring(_)
            | RamseyError::Tree(_) => Failure::Schema(m),
        }
    }
}

impl From<TreeError> for Failure {
    fn from(e: TreeError) -> Self {
        Failure::Schema(e.to_string())
    }
}

/// A report: human lines plus the JSON value printed under `--json`.
struct Report {
    lines: Vec<String>,
    json: Value,
}

type Outcome = Result<Report, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            let mut out = std::io::stdout().lock();
            if cli.run.json {
                let _ = writeln!(out, "{}", serde_json::to_string_pretty(&report.json).expect("json"));
            } else {
                for l in &report.lines {
                    if writeln!(out, "{l}").is_err() {
                        break;
                    }
                }
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            if cli.run.json {
                println!("{}", json!({"error": f.message(), "exit": f.code()}));
            }
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Ord(c) => run_ord(c),
        Command::Tree(c) => run_tree(c),
        Command::Ramsey(c) => run_ramsey(c, &cli.run),
        Command::James(c) => run_james(c, &cli.run),
        Command::Selftest { cases } => selftest::run(cli.run.seed, *cases),
    }
}

fn ordinal(s: &str) -> Result<Ordinal, Failure> {
    Ordinal::parse(s).map_err(|e| Failure::Usage(format!("{s:?}: {e}")))
}

fn rational(s: &str) -> Result<Q, Failure> {
    rat::parse(s).map_err(Failure::Usage)
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Schema(format!("{}: {e}", path.display())))
}

#[derive(Deserialize)]
#[serde(transparent)]
struct Points(#[serde(with = "jindex::james::rat::mat")] Vec<Vec<Q>>);

fn single(text: String, value: Value) -> Report {
    Report {
        lines: vec![text],
        json: value,
    }
}

fn run_ord(c: &OrdCmd) -> Outcome {
    let binary = |a: &str, b: &str, f: fn(&Ordinal, &Ordinal) -> Ordinal| -> Outcome {
        let r = f(&ordinal(a)?, &ordinal(b)?).to_string();
        Ok(single(r.clone(), json!({ "result": r })))
    };
    match c {
        OrdCmd::Add { a, b } => binary(a, b, Ordinal::add),
        OrdCmd::Mul { a, b } => binary(a, b, Ordinal::mul),
        OrdCmd::Nsum { a, b } => binary(a, b, Ordinal::natural_sum),
        OrdCmd::Cmp { a, b } => {
            let sym = match ordinal(a)?.compare(&ordinal(b)?) {
                std::cmp::Ordering::Less => "<",
                std::cmp::Ordering::Equal => "=",
                std::cmp::Ordering::Greater => ">",
            };
            Ok(single(sym.into(), json!({ "result": sym })))
        }
        OrdCmd::Classify { a } => {
            let (kind, pred) = match ordinal(a)?.classify() {
                Kind::Zero => ("zero", None),
                Kind::Successor(p) => ("successor", Some(p.to_string())),
                Kind::Limit => ("limit", None),
            };
            let text = match &pred {
                Some(p) => format!("successor of {p}"),
                None => kind.to_string(),
            };
            Ok(single(text, json!({ "kind": kind, "predecessor": pred })))
        }
        OrdCmd::Decomp { a } => {
            let pairs = ordinal(a)?.natural_decompositions();
            let mut lines = vec![format!("{} pairs", pairs.len())];
            lines.extend(pairs.iter().map(|(x, y)| format!("{x} # {y}")));
            let list: Vec<Value> = pairs.iter().map(|(x, y)| json!([x.to_string(), y.to_string()])).collect();
            Ok(Report {
                lines,
                json: json!({ "count": pairs.len(), "pairs": list }),
            })
        }
        OrdCmd::Fund { a, n } => match ordinal(a)?.fundamental(*n) {
            Some(x) => Ok(single(x.to_string(), json!({ "result": x.to_string() }))),
            None => Err(Failure::Usage(format!("{a} is not a limit ordinal"))),
        },
    }
}

fn run_tree(c: &TreeCmd) -> Outcome {
    match c {
        TreeCmd::Order { file, product } => {
            if let Some(files) = product {
                let t0: BTree = load(&files[0])?;
                let t1: BTree = load(&files[1])?;
                let p = Product::new(&t0, &t1)?;
                let (o0, o1, o) = (t0.order(), t1.order(), p.tree.order());
                if o != o0 * o1 {
                    return Err(Failure::Verification(format!("product order {o} is not {o0} * {o1}")));
                }
                Ok(single(
                    o.to_string(),
                    json!({ "order": o, "factors": [o0, o1], "nodes": p.tree.len() }),
                ))
            } else {
                let t: BTree = load(file.as_ref().expect("required by clap"))?;
                let o = t.order();
                Ok(single(o.to_string(), json!({ "order": o, "nodes": t.len() })))
            }
        }
        TreeCmd::Map { from, to } => {
            let a: BTree = load(from)?;
            let b: BTree = load(to)?;
            let expected = a.order() <= b.order();
            match find_monotone_map(&a, &b) {
                Some(m) => {
                    m.verify().map_err(|e| Failure::Verification(e.to_string()))?;
                    let pairs: Vec<Value> = m
                        .pairs()
                        .iter()
                        .map(|(x, y)| json!([jindex::tree::show_node(x), jindex::tree::show_node(y)]))
                        .collect();
                    let mut lines = vec!["monotone map found".to_string()];
                    lines.extend(
                        m.pairs()
                            .iter()
                            .map(|(x, y)| format!("{} -> {}", jindex::tree::show_node(x), jindex::tree::show_node(y))),
                    );
                    Ok(Report {
                        lines,
                        json: json!({ "exists": true, "map": pairs }),
                    })
                }
                None if expected => Err(Failure::Verification(
                    "no monotone map found although the orders allow one".into(),
                )),
                None => Ok(single(
                    format!("no monotone map: order {} exceeds {}", a.order(), b.order()),
                    json!({ "exists": false }),
                )),
            }
        }
        TreeCmd::Txi { xi, cutoff } => {
            if *cutoff == 0 {
                return Err(Failure::Usage("cutoff must be positive".into()));
            }
            let t = t_xi_truncate(&ordinal(xi)?, &Cutoffs::uniform(*cutoff))?;
            Ok(Report {
                lines: vec![format!("nodes {}", t.len()), format!("order {}", t.order())],
                json: json!({ "nodes": t.len(), "order": t.order(), "tree": t }),
            })
        }
    }
}

fn run_ramsey(c: &RamseyCmd, cfg: &RunConfig) -> Outcome {
    match c {
        RamseyCmd::Chain { n, m, coloring, colors } => {
            let f: PairColoring = match coloring {
                Some(p) => load(p)?,
                None => {
                    let len = m.ok_or_else(|| Failure::Usage("give --coloring or -M for a random coloring".into()))?;
                    if *colors == 0 {
                        return Err(Failure::Usage("--colors must be positive".into()));
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    PairColoring::with_colors(BTree::chain(len), (0..*colors).collect(), |_| rng.gen_range(0..*colors))?
                }
            };
            if let Some(len) = m {
                if f.tree().len() != *len {
                    return Err(Failure::Schema(format!(
                        "coloring is on a chain of {} nodes, -M says {len}",
                        f.tree().len()
                    )));
                }
            }
            if f.used_colors().len() > 2 {
                let w = match reduce_colors_chain(&f, *n) {
                    Ok(w) => w,
                    Err(RamseyError::Insufficient { stage, detail }) => {
                        return Ok(Report {
                            lines: vec!["insufficient".into(), format!("{stage}: {detail}")],
                            json: json!({ "outcome": "insufficient", "stage": stage, "detail": detail }),
                        })
                    }
                    Err(e) => return Err(e.into()),
                };
                let levels: Vec<usize> = w.map.map.assignment.iter().map(|i| i + 1).collect();
                let mut lines = vec![format!("homogeneous color {} at levels {levels:?}", w.color)];
                lines.extend(w.stages.iter().map(|s| {
                    format!("  stage {}: needed {}, had {}, produced {}", s.name, s.required, s.available, s.produced)
                }));
                lines.push(format!("verified {} pairs", w.checked));
                return Ok(Report {
                    lines,
                    json: json!({ "outcome": "homogeneous", "levels": levels, "witness": w }),
                });
            }
            match homogenize_chain(*n, &f)? {
                ChainOutcome::Homogeneous { levels, witness } => Ok(Report {
                    lines: vec![
                        format!("homogeneous color {} at levels {levels:?}", witness.color),
                        format!("verified {} pairs", witness.checked),
                    ],
                    json: serde_json::to_value(ChainOutcome::Homogeneous { levels, witness }).expect("json"),
                }),
                ChainOutcome::Insufficient { searched } => Ok(Report {
                    lines: vec![
                        "insufficient".into(),
                        format!("no homogeneous {n}-set among {searched} subsets"),
                    ],
                    json: json!({ "outcome": "insufficient", "searched": searched }),
                }),
            }
        }
        RamseyCmd::LambdaE { n, coloring } => {
            let f: TripleColoring = load(coloring)?;
            match homogenize_lambda_e(&f, *n) {
                Ok(w) => {
                    let mut lines = vec![format!("homogeneous color {} on a chain of {n}", w.color)];
                    lines.extend(w.stages.iter().map(|s| {
                        format!("  stage {}: needed {}, had {}, produced {}", s.name, s.required, s.available, s.produced)
                    }));
                    lines.push(format!("verified {} triples", w.checked));
                    Ok(Report {
                        lines,
                        json: json!({ "outcome": "homogeneous", "witness": w }),
                    })
                }
                Err(RamseyError::Insufficient { stage, detail }) => Ok(single(
                    format!("insufficient at {stage}: {detail}"),
                    json!({ "outcome": "insufficient", "stage": stage, "detail": detail }),
                )),
                Err(e) => Err(e.into()),
            }
        }
        RamseyCmd::Levels { n, unit, coloring } => {
            let t: BTree = load(unit)?;
            let f: PairColoring = load(coloring)?;
            let k = jindex::ramsey::levels_required(*n);
            match homogenize_levels(&t, k, &f, *n) {
                Ok(w) => Ok(Report {
                    lines: vec![
                        format!("cross-level color {} on levels {:?}", w.color, w.levels),
                        format!("epsilons {:?}", w.epsilons),
                        format!("verified {} cross-level pairs", w.checked),
                    ],
                    json: json!({
                        "outcome": "homogeneous",
                        "color": w.color,
                        "levels": w.levels,
                        "epsilons": w.epsilons,
                        "checked": w.checked,
                        "map": w.map.pairs().iter().map(|(a, b)| json!([jindex::tree::show_node(a), jindex::tree::show_node(b)])).collect::<Vec<_>>(),
                    }),
                }),
                Err(RamseyError::Insufficient { stage, detail }) => Ok(single(
                    format!("insufficient at {stage}: {detail}"),
                    json!({ "outcome": "insufficient", "stage": stage, "detail": detail }),
                )),
                Err(e) => Err(e.into()),
            }
        }
        RamseyCmd::Shuffle { tree } => {
            let t: BTree = load(tree)?;
            let sh = shuffle_maps(&t)?;
            if !sh.interleaves() {
                return Err(Failure::Verification("shuffle maps do not interleave".into()));
            }
            let show = |m: &jindex::MonotoneMap| -> Vec<Value> {
                m.pairs()
                    .iter()
                    .map(|(a, b)| json!([jindex::tree::show_node(a), jindex::tree::show_node(b)]))
                    .collect()
            };
            let mut lines = vec!["interleaving verified".to_string()];
            for s in 0..t.len() {
                lines.push(format!(
                    "{}: p = {}, q = {}",
                    jindex::tree::show_node(t.node(s)),
                    jindex::tree::show_node(sh.p.codomain.node(sh.p.apply(s))),
                    jindex::tree::show_node(sh.q.codomain.node(sh.q.apply(s)))
                ));
            }
            Ok(Report {
                lines,
                json: json!({ "interleaves": true, "p": show(&sh.p), "q": show(&sh.q) }),
            })
        }
        RamseyCmd::Sharp { xi, zeta0, zeta1, cutoff } => {
            let inst = sharp_coloring(&ordinal(xi)?, &ordinal(zeta0)?, &ordinal(zeta1)?, *cutoff)?;
            let longest: Vec<usize> = (0..2).map(|e| longest_homogeneous_chain(&inst.coloring, e).len()).collect();
            for e in 0..2 {
                if longest[e] as u64 != inst.bounds[e] {
                    return Err(Failure::Verification(format!(
                        "longest {e}-homogeneous chain has {} nodes, expected {}",
                        longest[e], inst.bounds[e]
                    )));
                }
            }
            Ok(Report {
                lines: vec![
                    format!("tree of {} nodes, order {}", inst.tree.len(), inst.tree.order()),
                    format!("longest homogeneous chains {longest:?} match bounds {:?}", inst.bounds),
                ],
                json: json!({
                    "nodes": inst.tree.len(),
                    "order": inst.tree.order(),
                    "bounds": inst.bounds,
                    "longest": longest,
                }),
            })
        }
    }
}

fn cs_lines(tree: &CsTree) -> Vec<String> {
    let mut lines = Vec::new();
    for c in &tree.certificates {
        lines.push(format!("  {}", jindex::tree::show_node(&c.node)));
        for s in &c.splits {
            lines.push(format!(
                "    split {}: functional [{}] margin {}",
                s.m,
                s.functional.iter().map(rat::to_string).collect::<Vec<_>>().join(", "),
                rat::to_string(&s.margin)
            ));
        }
    }
    lines
}

fn run_james(c: &JamesCmd, cfg: &RunConfig) -> Outcome {
    match c {
        JamesCmd::Cstree { body, points, eps, ball } => {
            let k: Body = load(body)?;
            let Points(pts) = load(points)?;
            let eps = rational(eps)?;
            let ball: Option<SpaceNorm> = ball.as_deref().map(load).transpose()?;
            let res = cs_tree(&k, &eps, &pts, ball.as_ref(), cfg.depth_cap)?;
            res.tree.verify(Some(&k)).map_err(Failure::Verification)?;
            let mut lines = vec![
                format!("order {}", res.order_with_root),
                format!("nodes {}", res.tree.nodes.len()),
                "certificates verified".into(),
            ];
            if res.truncated {
                lines.push("truncated by the depth cap".into());
            }
            lines.extend(cs_lines(&res.tree));
            Ok(Report {
                lines,
                json: json!({
                    "order": res.order_with_root,
                    "truncated": res.truncated,
                    "verified": true,
                    "tree": res.tree,
                }),
            })
        }
        JamesCmd::Iscs { body, points, eps } => {
            let k: Body = load(body)?;
            let Points(pts) = load(points)?;
            let eps = rational(eps)?;
            let check = is_cs(&k, &eps, &pts)?;
            if let Some(cert) = &check.certificate {
                cert.verify(Some(&k), &eps).map_err(Failure::Verification)?;
            }
            let distances: Vec<String> = check.distances.iter().map(rat::to_string).collect();
            let text = if check.holds {
                "cs: yes".to_string()
            } else {
                format!("cs: no (split {} fails)", check.failing_split.unwrap_or(0))
            };
            Ok(Report {
                lines: vec![text, format!("distances {distances:?}")],
                json: json!({
                    "holds": check.holds,
                    "failing_split": check.failing_split,
                    "distances": distances,
                    "certificate": check.certificate,
                }),
            })
        }
        JamesCmd::Extract {
            first,
            second,
            eps,
            tree,
            points,
        } => {
            let k: Body = load(first)?;
            let l: Body = load(second)?;
            let eps = rational(eps)?;
            let w: CsTree = match (tree, points) {
                (Some(p), _) => load(p)?,
                (None, Some(p)) => {
                    let Points(pts) = load(p)?;
                    let sum = k.minkowski(&l)?;
                    cs_tree(&sum.body, &eps, &pts, None, cfg.depth_cap.or(Some(3)))?.tree
                }
                (None, None) => return Err(Failure::Usage("give -W or -P".into())),
            };
            match extract_summand(&k, &l, &eps, &w) {
                Ok(x) => {
                    let body = match x.side {
                        james::Side::First => &k,
                        james::Side::Second => &l,
                    };
                    x.tree.verify(Some(body)).map_err(Failure::Verification)?;
                    let side = if x.side == james::Side::First { "first" } else { "second" };
                    let mut lines = vec![
                        format!("side {side}"),
                        format!("order {} (input order {})", x.order, x.input_order),
                        format!(
                            "min margin {} at eps/3 = {}",
                            x.min_margin.as_ref().map_or("none".into(), rat::to_string),
                            rat::to_string(&x.tree.eps)
                        ),
                        format!("gap {}", rat::to_string(&x.gap)),
                    ];
                    lines.extend(x.stages.iter().map(|s| {
                        format!("  stage {}: needed {}, had {}, produced {}", s.name, s.required, s.available, s.produced)
                    }));
                    lines.extend(cs_lines(&x.tree));
                    Ok(Report {
                        lines,
                        json: serde_json::to_value(&x).expect("json"),
                    })
                }
                Err(JamesError::Insufficient { stage, detail }) => Ok(single(
                    format!("insufficient at {stage}: {detail}"),
                    json!({ "outcome": "insufficient", "stage": stage, "detail": detail }),
                )),
                Err(e) => Err(e.into()),
            }
        }
        JamesCmd::Jt { tree } => {
            let t: BTree = load(tree)?;
            if t.is_empty() {
                return Err(Failure::Schema("the tree is empty".into()));
            }
            let w = jt_witness(&t);
            w.verify(None).map_err(Failure::Verification)?;
            let margin = w.min_margin();
            Ok(Report {
                lines: vec![
                    format!("order {} (tree order {})", w.nodes.order(), t.order()),
                    format!("min margin {}", margin.as_ref().map_or("none".into(), rat::to_string)),
                    "certificates verified".into(),
                ],
                json: json!({ "order": w.nodes.order(), "tree_order": t.order(), "witness": w }),
            })
        }
        JamesCmd::Coding {
            matrix,
            x_norm,
            y_norm,
            points,
        } => {
            let a: Matrix = load(matrix)?;
            let xn: SpaceNorm = load(x_norm)?;
            let yn: SpaceNorm = load(y_norm)?;
            let Points(pts) = load(points)?;
            let ct = coding_tree(&a, &xn, &yn, &pts, cfg.kmax, cfg.depth_cap)?;
            if !ct.identity_holds() && !ct.truncated {
                return Err(Failure::Verification(format!(
                    "coding tree order {} differs from 1 + max cs order",
                    ct.order_with_root
                )));
            }
            Ok(Report {
                lines: vec![
                    format!("order {}", ct.order_with_root),
                    format!("cs orders {:?}", ct.cs_orders),
                    format!("excluded {:?}", ct.excluded),
                ],
                json: serde_json::to_value(&ct).expect("json"),
            })
        }
        JamesCmd::L1 { matrix, c, y_norm, points } => {
            let a: Matrix = load(matrix)?;
            let yn: SpaceNorm = load(y_norm)?;
            let Points(pts) = load(points)?;
            let c = rational(c)?;
            let rep = np1_inclusion_check(&a, &c, &pts, &yn)?;
            if !rep.violations.is_empty() {
                return Err(Failure::Verification(rep.violations.join("; ")));
            }
            Ok(Report {
                lines: vec![format!("inclusion holds at {} nodes", rep.nodes_checked)],
                json: serde_json::to_value(&rep).expect("json"),
            })
        }
    }
}
