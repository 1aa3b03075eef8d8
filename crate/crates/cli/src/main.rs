use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, warn};

use facadereg::em::{register, BoundingBox, EmConfig, Registration};
use facadereg::eval::{
    evaluate, generate_instance, grid_oracle, Axis, GridRanges, RegError, DEFAULT_SCALE_THRESHOLDS,
    DEFAULT_TRANSLATION_THRESHOLDS,
};
use facadereg::io::{
    format_result, format_trace, parse_key_values, read_lpm_file, read_lpmix_file, read_pgm_file, synth_plan_from_config,
    write_atomic, write_lpm, write_lpmix, write_pgm, Config, GrayImage, RegistrationResult,
};
use facadereg::model::{Exponent, LabelProbMap, LabelSet, LpMixtureModel, Similarity};
use facadereg::posterior::{posterior_labels, render_posterior_map};
use facadereg::reference::{build_model, ReferenceSegmentation};
use facadereg::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "facadereg", version)]
#[command(about = "Facade registration and segmentation with Lp Gaussian mixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct EmArgs {
    /// Detection box X,Y,W,H in target pixels; repeat for several starts
    #[arg(long = "box", value_name = "X,Y,W,H", required = true)]
    boxes: Vec<String>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 2)]
    stride: usize,
    /// Minimum facade probability for a pixel to become a point
    #[arg(long, default_value_t = 0.01)]
    threshold: f64,
}

impl EmArgs {
    fn config(&self) -> EmConfig {
        EmConfig {
            epsilon: self.epsilon,
            max_iters: self.max_iters,
            stride: self.stride,
            threshold: self.threshold,
            ..EmConfig::default()
        }
    }

    fn boxes(&self) -> Result<Vec<BoundingBox>, Error> {
        self.boxes.iter().map(|b| BoundingBox::parse(b)).collect()
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a reference mixture to an indexed segmentation mask
    FitReference {
        /// P5 PGM: 0 background, j+1 label j
        seg: PathBuf,
        /// Comma-separated label names, in mask order
        #[arg(long)]
        labels: String,
        /// Even shape exponent
        #[arg(long, default_value_t = 4)]
        p: u32,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Register a reference mixture onto a target probability map
    Register {
        model: PathBuf,
        target: PathBuf,
        #[command(flatten)]
        em: EmArgs,
        #[arg(short, long)]
        output: PathBuf,
        /// Write the refined label-probability map
        #[arg(long)]
        posterior: Option<PathBuf>,
        /// Write the per-iterate trace as TSV
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Register, then write only the refined label-probability map
    Segment {
        model: PathBuf,
        target: PathBuf,
        #[command(flatten)]
        em: EmArgs,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the argmax labels as PGM (0 background, j+1 label j)
        #[arg(long)]
        argmax: Option<PathBuf>,
    },
    /// Generate synthetic facades with ground truth
    Synth {
        /// key = value config
        #[arg(long)]
        spec: PathBuf,
        /// Output directory; one sub-directory per instance
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Cumulative error histograms over a directory of runs
    Evaluate {
        /// Directory whose sub-directories hold truth.txt and result.txt
        #[arg(long)]
        runs: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Brute-force maximiser of the MAP objective over a grid
    Oracle {
        model: PathBuf,
        target: PathBuf,
        /// Grid `tx0:tx1:step,ty0:ty1:step,s0:s1:step`
        #[arg(long)]
        grid: String,
        /// Outlier rate held fixed during the search
        #[arg(long, default_value_t = 0.3)]
        alpha: f64,
        #[arg(long, default_value_t = 0.01)]
        threshold: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    NotConverged,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::NotConverged) => {
            eprintln!("error: registration did not converge");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) => ExitCode::from(EXIT_FAILURE),
                _ => ExitCode::from(EXIT_INVALID),
            }
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::FitReference { seg, labels, p, output } => {
            let labels = LabelSet::parse_list(&labels)?;
            let img = read_pgm_file(&seg)?;
            let seg = ReferenceSegmentation::new(img.width, img.height, labels, img.pixels)?;
            let model = build_model(&seg, Exponent::new(p)?)?;
            info!("fitted {} components", model.len());
            write_atomic(&output, write_lpmix(&model).as_bytes())?;
        }
        Command::Register {
            model,
            target,
            em,
            output,
            posterior,
            trace,
        } => {
            let (reg, model, target) = run_registration(&model, &target, &em)?;
            let report = &reg.multi.report;
            let selected = (em.boxes.len() > 1).then_some(reg.multi.selected);
            let result = RegistrationResult::from_report(report, selected);
            write_atomic(&output, format_result(&result).as_bytes())?;
            if let Some(path) = trace {
                write_atomic(&path, format_trace(&report.trace).as_bytes())?;
            }
            if let Some(path) = posterior {
                let map = refined_map(&reg, &target, &model)?;
                write_atomic(&path, &write_lpm(&map))?;
            }
            if !result.converged {
                return Err(CliError::NotConverged);
            }
        }
        Command::Segment {
            model,
            target,
            em,
            output,
            argmax,
        } => {
            let (reg, model, target) = run_registration(&model, &target, &em)?;
            let map = refined_map(&reg, &target, &model)?;
            write_atomic(&output, &write_lpm(&map))?;
            if let Some(path) = argmax {
                write_atomic(&path, &write_pgm(&argmax_image(&map)))?;
            }
            if !reg.multi.report.converged {
                return Err(CliError::NotConverged);
            }
        }
        Command::Synth { spec, output } => synth(&spec, &output)?,
        Command::Evaluate { runs, output } => {
            let errors = collect_run_errors(&runs)?;
            let table = evaluate(&errors, &DEFAULT_TRANSLATION_THRESHOLDS, &DEFAULT_SCALE_THRESHOLDS)?;
            match output {
                Some(path) => write_atomic(&path, table.to_tsv().as_bytes())?,
                None => print!("{}", table.to_tsv()),
            }
        }
        Command::Oracle {
            model,
            target,
            grid,
            alpha,
            threshold,
            output,
        } => {
            let model = read_lpmix_file(&model)?;
            let target = read_lpm_file(&target)?;
            let points = facadereg::extraction::extract_points(&target, threshold)?;
            let ranges = parse_grid(&grid)?;
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")).into());
            }
            let (best, value) = grid_oracle(&points, &model, &model.weights(), alpha, &ranges);
            let text = format!("tx={}\nty={}\ns={}\nalpha={alpha}\nR={value}\n", best.tx, best.ty, best.s);
            match output {
                Some(path) => write_atomic(&path, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn run_registration(model: &Path, target: &Path, em: &EmArgs) -> Result<(Registration, LpMixtureModel, LabelProbMap), CliError> {
    let model = read_lpmix_file(model)?;
    let target = read_lpm_file(target)?;
    let reg = register(&model, &target, &em.boxes()?, &em.config())?;
    for (k, c) in reg.multi.candidates.iter().enumerate() {
        info!("start {k}: R = {:.6}, final {:?}", c.objective, c.final_similarity);
    }
    Ok((reg, model, target))
}

fn refined_map(reg: &Registration, target: &LabelProbMap, model: &LpMixtureModel) -> Result<LabelProbMap, CliError> {
    let post = posterior_labels(&reg.points, &reg.multi.report.responsibilities, model)?;
    Ok(render_posterior_map(&reg.points, &post, target)?)
}

fn argmax_image(map: &LabelProbMap) -> GrayImage {
    let (w, h) = (map.width(), map.height());
    let mut pixels = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            // background wins when the residual exceeds every label
            let residual = 1.0 - map.pixel_sum(x, y);
            if let Some(j) = map.argmax(x, y) {
                if f64::from(map.get(j, x, y)) > residual {
                    pixels[y * w + x] = (j + 1) as u8;
                }
            }
        }
    }
    GrayImage {
        width: w,
        height: h,
        pixels,
    }
}

fn synth(spec: &Path, output: &Path) -> Result<(), CliError> {
    let plan = synth_plan_from_config(&Config::from_file(spec)?)?;
    fs::create_dir_all(output)?;
    for k in 0..plan.instances {
        let (spec, init_box) = plan.instance(k)?;
        let inst = generate_instance(&spec)?;
        let dir = output.join(format!("instance_{k:03}"));
        fs::create_dir_all(&dir)?;
        let reference = &inst.reference;
        let pgm = GrayImage {
            width: reference.width(),
            height: reference.height(),
            pixels: reference.mask().to_vec(),
        };
        write_atomic(&dir.join("reference.pgm"), &write_pgm(&pgm))?;
        write_atomic(&dir.join("target.lpm"), &write_lpm(&inst.target))?;
        let t = &inst.truth.similarity;
        let b = &init_box;
        let truth = format!(
            "tx={}\nty={}\ns={}\nlabels={}\nbox={},{},{},{}\nseed={}\n",
            t.tx,
            t.ty,
            t.s,
            reference.labels().names().join(","),
            b.x,
            b.y,
            b.width,
            b.height,
            spec.seed
        );
        write_atomic(&dir.join("truth.txt"), truth.as_bytes())?;
    }
    info!("wrote {} instances to {}", plan.instances, output.display());
    Ok(())
}

fn read_similarity(path: &Path) -> Result<Similarity, CliError> {
    let kv = parse_key_values(&fs::read_to_string(path)?)?;
    let get = |key: &str| -> Result<f64, Error> {
        kv.iter()
            .find(|(k, _)| k == key)
            .ok_or_else(|| Error::InvalidInput(format!("{} is missing `{key}`", path.display())))?
            .1
            .parse()
            .map_err(|e| Error::InvalidInput(format!("{}: `{key}`: {e}", path.display())))
    };
    Ok(Similarity::new(get("tx")?, get("ty")?, get("s")?)?)
}

/// Errors of every sub-directory holding both `truth.txt` and `result.txt`.
fn collect_run_errors(runs: &Path) -> Result<Vec<RegError>, CliError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(runs)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut errors = Vec::new();
    for dir in dirs {
        let (truth, result) = (dir.join("truth.txt"), dir.join("result.txt"));
        if !(truth.exists() && result.exists()) {
            warn!("skipping {}: needs truth.txt and result.txt", dir.display());
            continue;
        }
        errors.push(RegError::between(&read_similarity(&result)?, &read_similarity(&truth)?));
    }
    if errors.is_empty() {
        return Err(Error::InvalidInput(format!("no completed runs under {}", runs.display())).into());
    }
    Ok(errors)
}

fn parse_grid(text: &str) -> Result<GridRanges, Error> {
    let axes: Vec<Axis> = text
        .split(',')
        .map(|part| {
            let v: Vec<f64> = part
                .split(':')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| Error::InvalidInput(format!("bad grid axis {part:?}: {e}")))?;
            match v[..] {
                [lo, hi, step] => Axis::new(lo, hi, step),
                _ => Err(Error::InvalidInput(format!("grid axis {part:?} must be lo:hi:step"))),
            }
        })
        .collect::<Result<_, _>>()?;
    match axes[..] {
        [tx, ty, s] => Ok(GridRanges { tx, ty, s }),
        _ => Err(Error::InvalidInput("grid needs three axes tx,ty,s".into())),
    }
}
