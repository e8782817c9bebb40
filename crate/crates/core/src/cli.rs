//! Command-line front end. Options may also come from a `key = value` file
//! passed with `--config`; flags given on the command line win.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use log::info;
use sha2::{Digest, Sha256};

use crate::metrics::{evaluate_dataset, EvalItem, EvalReport};
use crate::netcore::{load_checkpoint, Architecture, ModelCheckpoint};
use crate::placer::{solve as place_tensor, Board, FrameMode, PlaceOptions};
use crate::puzzle::{erode, load_bundle, load_solution, render as render_board, save_bundle, save_solution, shuffle, slice_image, PuzzleBundle};
use crate::scorer::{
    baseline_dissimilarity, load_tensor, neural_dissimilarity, oracle_dissimilarity, save_tensor, DissimilarityTensor,
    ScorerKind,
};
use crate::trainer::{train_phase1, train_phase2, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "gapfill", version, about = "Solve square jigsaw puzzles with eroded piece boundaries")]
struct Cli {
    /// Seed for every random choice of this run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (1 = fully sequential).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `key = value` file supplying defaults for any option.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Slice, erode and shuffle every image of a directory into bundles.
    Generate(GenerateArgs),
    /// Write a corpus of procedural images.
    Synth(SynthArgs),
    /// Train the inpainting phase.
    TrainInpaint(TrainInpaintArgs),
    /// Train the neighbor classifier.
    TrainClassify(TrainClassifyArgs),
    /// Build a dissimilarity tensor for one bundle.
    Score(ScoreArgs),
    /// Place pieces from a dissimilarity tensor.
    Solve(SolveArgs),
    /// Compare solved boards with ground truth.
    Evaluate(EvaluateArgs),
    /// Draw a board with the bundle's pieces.
    Render(RenderArgs),
    /// Score, solve and evaluate a whole dataset.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Directory of source images.
    #[arg(long)]
    images: PathBuf,
    /// Output root; receives `bundles/<name>/` and `solutions/<name>.json`.
    #[arg(long)]
    out: PathBuf,
    /// Piece side in pixels.
    #[arg(long, alias = "pieces", default_value_t = 64)]
    piece_size: usize,
    /// Eroded fraction of the piece side on each edge.
    #[arg(long, default_value_t = 0.07)]
    erosion: f64,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 448)]
    height: u32,
}

#[derive(Debug, Args)]
struct TrainCommon {
    /// Output directory for checkpoints, loss logs and the resolved config.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    erosion: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Examples (phase 1) or pair iterations (phase 2) per epoch.
    #[arg(long)]
    pairs: Option<usize>,
    /// Divide every layer width by this factor.
    #[arg(long)]
    width_divisor: Option<usize>,
    /// Extra `key=value` training options; applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Args)]
struct TrainInpaintArgs {
    /// Image directory for inpainting examples.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Classification corpus, only checked for overlap.
    #[arg(long)]
    phase2_corpus: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lr_generator: Option<f64>,
    #[arg(long)]
    lr_discriminator: Option<f64>,
    /// Also erode the outer frame of training pairs.
    #[arg(long)]
    erode_outer_frame: bool,
    #[command(flatten)]
    common: TrainCommon,
}

#[derive(Debug, Args)]
struct TrainClassifyArgs {
    /// Image directory for classification puzzles.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Inpainting corpus, only checked for overlap.
    #[arg(long)]
    phase1_corpus: Option<PathBuf>,
    /// Inpainting checkpoint to continue from.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    lr: Option<f64>,
    /// Start the classifier from fresh weights.
    #[arg(long)]
    fresh_discriminator: bool,
    /// Classify raw gapped pairs (implies --fresh-discriminator).
    #[arg(long)]
    no_inpaint: bool,
    #[command(flatten)]
    common: TrainCommon,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, value_parser = ["neural", "baseline", "oracle"])]
    scorer: String,
    /// Classifier checkpoint (neural scorer).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Ground truth (oracle scorer).
    #[arg(long)]
    solution: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    tensor: PathBuf,
    /// Bundle whose grid size bounds the board.
    #[arg(long)]
    bundle: Option<PathBuf>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long, value_parser = ["constrained", "unbounded"], default_value = "constrained")]
    frame: String,
    /// Break piece ties with a `--seed`-derived order instead of ids.
    #[arg(long)]
    seeded_ties: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Directory of `<name>.txt` boards.
    #[arg(long)]
    boards: PathBuf,
    /// Directory of `<name>.json` solutions.
    #[arg(long)]
    solutions: PathBuf,
    /// Report CSV; the table always goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    board: PathBuf,
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Directory of bundle directories.
    #[arg(long)]
    bundles: PathBuf,
    #[arg(long)]
    solutions: PathBuf,
    #[arg(long, value_parser = ["neural", "baseline", "oracle"])]
    scorer: String,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_parser = ["constrained", "unbounded"], default_value = "constrained")]
    frame: String,
    #[arg(long)]
    seeded_ties: bool,
    /// Receives `tensors/`, `boards/` and `report.csv`.
    #[arg(long)]
    out: PathBuf,
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let (cli, extra) = match parse(argv) {
        Ok(v) => v,
        Err(ParseFailure::Clap(e)) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
        Err(ParseFailure::Other(e)) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let result = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Internal(e.to_string()))
            .and_then(|pool| pool.install(|| execute(&cli, &extra))),
        None => execute(&cli, &extra),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

enum ParseFailure {
    Clap(clap::Error),
    Other(Error),
}

impl From<clap::Error> for ParseFailure {
    fn from(e: clap::Error) -> Self {
        ParseFailure::Clap(e)
    }
}

impl From<Error> for ParseFailure {
    fn from(e: Error) -> Self {
        ParseFailure::Other(e)
    }
}

fn given_on_command_line(m: &ArgMatches, id: &str) -> bool {
    matches!(m.try_get_raw(id), Ok(Some(_))) && m.value_source(id) == Some(ValueSource::CommandLine)
}

/// Parses the command line, splicing in values from `--config` for options
/// not given as flags. Config keys that name no option are returned for
/// the training commands to interpret.
fn parse(argv: Vec<OsString>) -> std::result::Result<(Cli, BTreeMap<String, String>), ParseFailure> {
    let root = Cli::command();
    let m = root.clone().try_get_matches_from(&argv)?;
    let Some(cfg) = m.get_one::<PathBuf>("config").cloned() else {
        return Ok((Cli::from_arg_matches(&m)?, BTreeMap::new()));
    };
    let kv = crate::kvfile::read(&cfg)?;
    let (sub_name, sub_m) = m.subcommand().expect("subcommand is required");
    let sub = root.find_subcommand(sub_name).expect("parsed subcommand exists");

    let mut spliced: Vec<OsString> = Vec::new();
    let mut rest = BTreeMap::new();
    for (key, value) in kv {
        let id = key.replace('-', "_");
        let arg = sub
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_id().as_str() == id && a.get_long().is_some());
        let Some(arg) = arg.filter(|a| a.get_id() != "config") else {
            rest.insert(key, value);
            continue;
        };
        if given_on_command_line(sub_m, &id) || given_on_command_line(&m, &id) {
            continue;
        }
        let long = format!("--{}", arg.get_long().expect("filtered"));
        if arg.get_action().takes_values() {
            spliced.push(long.into());
            spliced.push(value.into());
        } else {
            let on: bool = value
                .parse()
                .map_err(|_| Error::invalid(format!("config key '{key}' expects true or false, got '{value}'")))?;
            if on {
                spliced.push(long.into());
            }
        }
    }
    let pos = argv
        .iter()
        .position(|a| a == sub_name)
        .ok_or_else(|| Error::Internal("subcommand not found in argv".into()))?;
    let mut full = argv[..=pos].to_vec();
    full.extend(spliced);
    full.extend_from_slice(&argv[pos + 1..]);
    let m = root.try_get_matches_from(full)?;
    Ok((Cli::from_arg_matches(&m)?, rest))
}

fn reject_extra(extra: &BTreeMap<String, String>) -> Result<()> {
    match extra.keys().next() {
        Some(k) => Err(Error::invalid(format!("unknown config key '{k}'"))),
        None => Ok(()),
    }
}

fn execute(cli: &Cli, extra: &BTreeMap<String, String>) -> Result<()> {
    info!("{} seed={} threads={:?}", crate::TOOL_VERSION, cli.seed, cli.threads);
    info!("resolved options: {:?}", cli.command);
    match &cli.command {
        Command::Generate(a) => {
            reject_extra(extra)?;
            generate(a, cli.seed)
        }
        Command::Synth(a) => {
            reject_extra(extra)?;
            crate::synth::write_corpus(&a.out, a.count, a.width, a.height, cli.seed)?;
            info!("wrote {} images to {}", a.count, a.out.display());
            Ok(())
        }
        Command::TrainInpaint(a) => train_inpaint(a, cli.seed, extra),
        Command::TrainClassify(a) => train_classify(a, cli.seed, extra),
        Command::Score(a) => {
            reject_extra(extra)?;
            let ckpt = a.checkpoint.as_deref().map(|p| load_checkpoint(p, None)).transpose()?;
            let t = score_bundle(&a.bundle, &a.scorer, ckpt.as_ref(), a.solution.as_deref(), cli.seed)?;
            save_tensor(&t, &a.out)?;
            info!("wrote {}", a.out.display());
            Ok(())
        }
        Command::Solve(a) => {
            reject_extra(extra)?;
            let t = load_tensor(&a.tensor)?;
            let (rows, cols) = match (&a.bundle, a.rows, a.cols) {
                (Some(b), _, _) => {
                    let b = load_bundle(b)?;
                    (b.rows, b.cols)
                }
                (None, Some(r), Some(c)) => (r, c),
                _ => return Err(Error::invalid("solve needs --bundle or both --rows and --cols")),
            };
            let board = solve_tensor(&t, rows, cols, &a.frame, a.seeded_ties, cli.seed)?;
            save_board(&board, &t, &a.out, cli.seed)
        }
        Command::Evaluate(a) => {
            reject_extra(extra)?;
            let report = evaluate_dirs(&a.boards, &a.solutions)?;
            print!("{}", report.to_table());
            if let Some(out) = &a.out {
                write_file(out, &report.to_csv(Some(cli.seed)))?;
            }
            Ok(())
        }
        Command::Render(a) => {
            reject_extra(extra)?;
            let board = Board::load(&a.board)?;
            let bundle = load_bundle(&a.bundle)?;
            let img = render_board(&board, &bundle)?;
            crate::puzzle::write_png(&img, &a.out, &[("seed", cli.seed.to_string())])?;
            info!("wrote {}", a.out.display());
            Ok(())
        }
        Command::Pipeline(a) => {
            reject_extra(extra)?;
            pipeline(a, cli.seed)
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn name_seed(seed: u64, name: &str) -> u64 {
    let h = Sha256::digest(name.as_bytes());
    seed ^ u64::from_le_bytes(h[..8].try_into().expect("8 bytes"))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    v.sort();
    Ok(v)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn generate(a: &GenerateArgs, seed: u64) -> Result<()> {
    let images = crate::trainer::load_corpus(&a.images)?;
    for img in &images {
        let name = stem(&img.path);
        let (bundle, solution) = slice_image(&img.image, a.piece_size)?;
        let eroded = erode(&bundle, a.erosion)?;
        let (shuffled, sol) = shuffle(&eroded, &solution, name_seed(seed, &name));
        save_bundle(&shuffled, &a.out.join("bundles").join(&name))?;
        save_solution(&sol, &a.out.join("solutions").join(format!("{name}.json")))?;
        info!(
            "{name}: {} pieces ({}x{}), erosion width {}",
            shuffled.len(),
            shuffled.rows,
            shuffled.cols,
            shuffled.erosion_width
        );
    }
    Ok(())
}

fn apply_common(c: &mut TrainConfig, common: &TrainCommon) -> Result<()> {
    if let Some(e) = common.erosion {
        c.erosion_pct = e;
    }
    if let Some(d) = common.width_divisor {
        if d == 0 {
            return Err(Error::invalid("--width-divisor must be positive"));
        }
        let size = c.architecture.piece_size;
        c.architecture = Architecture::reduced(d);
        c.architecture.piece_size = size;
    }
    c.out_dir = Some(common.out.clone());
    Ok(())
}

fn apply_sets(c: &mut TrainConfig, sets: &[String]) -> Result<()> {
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("--set expects key=value, got '{s}'")))?;
        c.set(k.trim(), v.trim())?;
    }
    Ok(())
}

fn log_config(c: &TrainConfig) -> Result<()> {
    info!("resolved training config:\n{}", c.to_text());
    if let Some(out) = &c.out_dir {
        let text = format!("# tool = {}\n# seed = {}\n{}", crate::TOOL_VERSION, c.seed, c.to_text());
        write_file(&out.join("train_config.txt"), &text)?;
    }
    Ok(())
}

fn train_inpaint(a: &TrainInpaintArgs, seed: u64, extra: &BTreeMap<String, String>) -> Result<()> {
    let mut c = TrainConfig::default();
    c.apply(extra)?;
    c.seed = seed;
    apply_common(&mut c, &a.common)?;
    if let Some(p) = &a.corpus {
        c.phase1_corpus = Some(p.clone());
    }
    if let Some(p) = &a.phase2_corpus {
        c.phase2_corpus = Some(p.clone());
    }
    if let Some(v) = a.common.epochs {
        c.epochs_phase1 = v;
    }
    if let Some(v) = a.common.pairs {
        c.pairs_phase1 = v;
    }
    if let Some(v) = a.lambda {
        c.lambda = v;
    }
    if let Some(v) = a.lr_generator {
        c.lr_generator = v;
    }
    if let Some(v) = a.lr_discriminator {
        c.lr_discriminator_phase1 = v;
    }
    if a.erode_outer_frame {
        c.erode_outer_frame = true;
    }
    apply_sets(&mut c, &a.common.set)?;
    c.validate()?;
    log_config(&c)?;
    train_phase1(&c)?;
    info!("phase 1 done; checkpoint {}", a.common.out.join("phase1.ckpt").display());
    Ok(())
}

fn train_classify(a: &TrainClassifyArgs, seed: u64, extra: &BTreeMap<String, String>) -> Result<()> {
    let mut c = TrainConfig::default();
    c.apply(extra)?;
    c.seed = seed;
    let warm: Option<ModelCheckpoint> = a.init.as_deref().map(|p| load_checkpoint(p, None)).transpose()?;
    if let Some(w) = &warm {
        c.architecture = w.architecture.clone();
        c.epochs_phase1 = w.meta.epochs_phase1;
    }
    apply_common(&mut c, &a.common)?;
    if let Some(p) = &a.corpus {
        c.phase2_corpus = Some(p.clone());
    }
    if let Some(p) = &a.phase1_corpus {
        c.phase1_corpus = Some(p.clone());
    }
    if let Some(v) = a.common.epochs {
        c.epochs_phase2 = v;
    }
    if let Some(v) = a.common.pairs {
        c.pairs_phase2 = v;
    }
    if let Some(v) = a.lr {
        c.lr_phase2 = v;
    }
    if a.fresh_discriminator || a.no_inpaint {
        c.fresh_discriminator = true;
    }
    if a.no_inpaint {
        c.inpaint = false;
    }
    apply_sets(&mut c, &a.common.set)?;
    c.validate()?;
    if let Some(w) = &warm {
        let width = c.erosion_width()?;
        if w.meta.erosion_width != width {
            return Err(Error::Incompatible(format!(
                "checkpoint was trained for erosion width {}, this run uses {width}",
                w.meta.erosion_width
            )));
        }
    }
    log_config(&c)?;
    train_phase2(&c, warm.as_ref())?;
    info!("phase 2 done; checkpoint {}", a.common.out.join("phase2.ckpt").display());
    Ok(())
}

/// The tensor the `score` command writes for one bundle directory.
fn score_bundle(
    bundle_dir: &Path,
    scorer: &str,
    ckpt: Option<&ModelCheckpoint>,
    solution: Option<&Path>,
    seed: u64,
) -> Result<DissimilarityTensor> {
    let bundle = load_bundle(bundle_dir)?;
    let mut t = match ScorerKind::parse(scorer)? {
        ScorerKind::Neural => {
            let ckpt = ckpt.ok_or_else(|| Error::invalid("the neural scorer needs --checkpoint"))?;
            if ckpt.meta.erosion_width != bundle.erosion_width {
                return Err(Error::Incompatible(format!(
                    "checkpoint was trained for erosion width {}, bundle {} has {}",
                    ckpt.meta.erosion_width,
                    bundle_dir.display(),
                    bundle.erosion_width
                )));
            }
            neural_dissimilarity(ckpt, &bundle)?
        }
        ScorerKind::Baseline => baseline_dissimilarity(&bundle)?,
        ScorerKind::Oracle => {
            let path = solution.ok_or_else(|| Error::invalid("the oracle scorer needs --solution"))?;
            let sol = load_solution(path)?;
            check_solution_fits(&bundle, &sol)?;
            oracle_dissimilarity(&sol, bundle.len())?
        }
    };
    t.meta.seed = Some(seed);
    t.meta.erosion_width = bundle.erosion_width;
    t.meta.piece_size = bundle.piece_size;
    Ok(t)
}

fn check_solution_fits(bundle: &PuzzleBundle, sol: &crate::puzzle::Solution) -> Result<()> {
    if (sol.rows, sol.cols) != (bundle.rows, bundle.cols) || sol.len() != bundle.len() {
        return Err(Error::Incompatible(format!(
            "solution is {}x{} but bundle is {}x{}",
            sol.rows, sol.cols, bundle.rows, bundle.cols
        )));
    }
    Ok(())
}

fn solve_tensor(t: &DissimilarityTensor, rows: usize, cols: usize, frame: &str, seeded_ties: bool, seed: u64) -> Result<Board> {
    if rows * cols != t.n() {
        return Err(Error::DimensionMismatch(format!(
            "tensor covers {} pieces, grid is {rows}x{cols}",
            t.n()
        )));
    }
    let opts = PlaceOptions {
        frame: FrameMode::parse(frame)?,
        rows,
        cols,
        tiebreak_seed: seeded_ties.then_some(seed),
    };
    place_tensor(t, &opts)
}

fn save_board(board: &Board, t: &DissimilarityTensor, path: &Path, seed: u64) -> Result<()> {
    let header = [
        ("seed", seed.to_string()),
        ("scorer", t.meta.scorer.name().to_string()),
        ("checkpoint", t.meta.checkpoint.clone().unwrap_or_else(|| "-".into())),
        (
            "erosion_pct",
            t.meta.erosion_pct().map_or("-".to_string(), |p| p.to_string()),
        ),
    ];
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    board.save(path, &header)?;
    info!("wrote {}", path.display());
    Ok(())
}

/// `# key: value` lines at the top of a text artifact.
fn read_header(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .map_while(|l| l.strip_prefix('#'))
        .filter_map(|l| l.split_once(':'))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

fn evaluate_dirs(boards: &Path, solutions: &Path) -> Result<EvalReport> {
    let mut items = Vec::new();
    for path in sorted_entries(boards)? {
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let name = stem(&path);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let header = read_header(&text);
        let board = Board::parse_text(&text).map_err(|e| Error::load(&path, e.to_string()))?;
        let solution = load_solution(&solutions.join(format!("{name}.json")))?;
        items.push(EvalItem {
            puzzle_id: name,
            erosion_pct: header.get("erosion_pct").and_then(|v| v.parse().ok()).unwrap_or(f64::NAN),
            scorer: header.get("scorer").cloned().unwrap_or_else(|| "-".into()),
            board,
            solution,
        });
    }
    evaluate_dataset(&items)
}

fn pipeline(a: &PipelineArgs, seed: u64) -> Result<()> {
    let ckpt = a.checkpoint.as_deref().map(|p| load_checkpoint(p, None)).transpose()?;
    let bundles: Vec<PathBuf> = sorted_entries(&a.bundles)?
        .into_iter()
        .filter(|p| p.join(crate::puzzle::MANIFEST_FILE).is_file())
        .collect();
    if bundles.is_empty() {
        return Err(Error::invalid(format!("no bundles under {}", a.bundles.display())));
    }
    for dir in &bundles {
        let name = stem(dir);
        let sol_path = a.solutions.join(format!("{name}.json"));
        let t = score_bundle(dir, &a.scorer, ckpt.as_ref(), Some(&sol_path), seed)?;
        let tensor_path = a.out.join("tensors").join(format!("{name}.csv"));
        save_tensor(&t, &tensor_path)?;
        let bundle = load_bundle(dir)?;
        let board = solve_tensor(&t, bundle.rows, bundle.cols, &a.frame, a.seeded_ties, seed)?;
        save_board(&board, &t, &a.out.join("boards").join(format!("{name}.txt")), seed)?;
    }
    let report = evaluate_dirs(&a.out.join("boards"), &a.solutions)?;
    print!("{}", report.to_table());
    write_file(&a.out.join("report.csv"), &report.to_csv(Some(seed)))?;
    info!("pipeline processed {} puzzles", bundles.len());
    Ok(())
}
