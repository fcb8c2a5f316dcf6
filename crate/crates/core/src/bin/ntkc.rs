use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array2, Array3, Axis};

use ntk_complete::cntk::ArchSpec;
use ntk_complete::dual::Activation;
use ntk_complete::error::{Error, Result};
use ntk_complete::fc::{complete_matrix, normalize_prior, ObservationSet};
use ntk_complete::kernel_file::{self, KernelFile};
use ntk_complete::pipeline::{self, MaskedImage, PriorSpec};
use ntk_complete::priors::{self, method_output_prior};
use ntk_complete::solve::{Ridge, SolveMode, SolveOptions};
use ntk_complete::{csv_io, metrics};

#[derive(Parser)]
#[command(name = "ntkc", version, about = "Matrix completion and inpainting with neural tangent kernels")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// Seed for random priors and solver subsampling
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `none`, `trace:C` (lambda = C tr(K)/n), `abs:L`, or a bare number
    #[arg(long, global = true, default_value = "none")]
    ridge: Ridge,
    /// Iteration budget of the iterative solver
    #[arg(long, global = true, default_value_t = 100)]
    epochs: usize,
    /// Positive factor applied to the kernel before solving
    #[arg(long, global = true, default_value_t = 1.0)]
    kernel_scale: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Direct,
    Iterative,
}

#[derive(Args)]
struct KernelSource {
    /// Precomputed NTKC kernel file
    #[arg(long, conflicts_with_all = ["arch", "prior"])]
    kernel: Option<PathBuf>,
    /// Architecture file, built on the fly at the image size
    #[arg(long)]
    arch: Option<PathBuf>,
    /// Image prior: uniform[:RHO], random:C[:HIGH], meshgrid, identity, onehot
    #[arg(long, default_value = "uniform")]
    prior: PriorSpec,
}

#[derive(Subcommand)]
enum Command {
    /// Build a full kernel and write it as an NTKC file
    Precompute {
        #[arg(long)]
        arch: PathBuf,
        #[arg(long, default_value = "uniform")]
        prior: PriorSpec,
        /// Override the architecture's input size, e.g. 8x8
        #[arg(long)]
        size: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Expand a base kernel to resolution 2^p2 in compact form
    Expand {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        p2: u32,
        /// Check that the kernel was built from this architecture
        #[arg(long)]
        arch: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fill the missing pixels of an image
    Inpaint {
        #[arg(long)]
        image: PathBuf,
        /// Mask PNG; black pixels are missing
        #[arg(long)]
        mask: PathBuf,
        #[command(flatten)]
        source: KernelSource,
        #[arg(long, value_enum, default_value_t = Solver::Direct)]
        solver: Solver,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a kernel row K(i, j, :, :) as a grayscale PNG
    Heatmap {
        #[command(flatten)]
        source: KernelSource,
        /// Image size when building from --arch, e.g. 16x16
        #[arg(long)]
        size: Option<String>,
        #[arg(long)]
        row: usize,
        #[arg(long)]
        col: usize,
        /// Zero out this percentile of the smallest values
        #[arg(long, default_value_t = 0.0)]
        percentile: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Complete a matrix with the fully connected NTK
    Complete {
        /// Dense CSV (empty or NaN cells missing) or, with --triples, row,col,value
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        triples: bool,
        /// Matrix shape MxN for triples (default: largest indices + 1)
        #[arg(long)]
        shape: Option<String>,
        /// Column prior: identity, onehot:LABELS_CSV, or csv:PATH (dense p x n)
        #[arg(long, default_value = "identity")]
        prior: String,
        /// Stack this multiple of the identity under a csv prior
        #[arg(long)]
        augment: Option<f64>,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long, default_value = "relu")]
        activation: Activation,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare predictions to ground truth (CSV or PNG), or score CV folds
    Metrics {
        #[arg(long, required_unless_present = "folds")]
        pred: Option<PathBuf>,
        #[arg(long, required_unless_present = "folds")]
        truth: Option<PathBuf>,
        /// k x r CSV of per-fold metric differences
        #[arg(long, conflicts_with_all = ["pred", "truth"], requires_all = ["n1", "n2"])]
        folds: Option<PathBuf>,
        #[arg(long)]
        n1: Option<usize>,
        #[arg(long)]
        n2: Option<usize>,
        /// Put the variance term of the t statistic under a square root
        #[arg(long)]
        sqrt_denominator: bool,
    },
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidParameter(format!("size must look like MxN, got `{s}`"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn load_arch(path: &PathBuf) -> Result<ArchSpec> {
    ArchSpec::parse(&std::fs::read_to_string(path)?)
}

fn solve_options(shared: &Shared, mode: SolveMode) -> Result<SolveOptions> {
    let opts = SolveOptions {
        mode,
        ridge: shared.ridge,
        kernel_scale: shared.kernel_scale,
        epochs: shared.epochs,
        seed: shared.seed,
        ..SolveOptions::default()
    };
    opts.validate()?;
    Ok(opts)
}

/// Loads `--kernel` or builds from `--arch` at `dims`.
fn kernel_for(source: &KernelSource, dims: Option<(usize, usize)>, seed: u64) -> Result<KernelFile> {
    if let Some(path) = &source.kernel {
        return kernel_file::load(path);
    }
    let arch_path = source
        .arch
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("pass --kernel or --arch".into()))?;
    let mut arch = load_arch(arch_path)?;
    if let Some((m, n)) = dims {
        arch = arch.with_input(m, n)?;
    }
    let (m, n) = arch.input();
    let prior = source.prior.build(m, n, seed)?;
    pipeline::precompute(&arch, &prior)
}

/// CSVs load as one channel; PNGs as one or three.
fn read_planes(path: &PathBuf) -> Result<Array3<f64>> {
    let png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if png {
        pipeline::read_png(path)
    } else {
        Ok(csv_io::read_dense_file(path)?.insert_axis(Axis(0)))
    }
}

/// Channels stacked vertically, for the matrix metrics.
fn flatten_planes(a: &Array3<f64>) -> Array2<f64> {
    let (c, m, n) = a.dim();
    a.to_shape((c * m, n)).expect("contiguous").to_owned()
}

fn mean_over_planes(p: &Array3<f64>, t: &Array3<f64>, f: fn(ndarray::ArrayView2<f64>, ndarray::ArrayView2<f64>) -> Result<f64>) -> Result<f64> {
    if p.dim() != t.dim() {
        return Err(Error::Shape(format!("prediction is {:?} but truth is {:?}", p.dim(), t.dim())));
    }
    let mut total = 0.0;
    for (a, b) in p.outer_iter().zip(t.outer_iter()) {
        total += f(a, b)?;
    }
    Ok(total / p.dim().0 as f64)
}

fn run(cli: Cli) -> Result<()> {
    let shared = &cli.shared;
    if let Some(t) = shared.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    let started = Instant::now();
    match &cli.command {
        Command::Precompute { arch, prior, size, out } => {
            let mut arch = load_arch(arch)?;
            if let Some(s) = size {
                let (m, n) = parse_size(s)?;
                arch = arch.with_input(m, n)?;
            }
            let (m, n) = arch.input();
            let p = prior.build(m, n, shared.seed)?;
            let file = pipeline::precompute(&arch, &p)?;
            kernel_file::save(out, &file)?;
            eprintln!("{}", pipeline::resource_line("precompute", started, pipeline::estimate_bytes(3 * (m * n).pow(2), 0)));
        }
        Command::Expand { input, p2, arch, out } => {
            let file = kernel_file::load(input)?;
            if let Some(a) = arch {
                let arch = load_arch(a)?;
                if arch.hash() != file.meta().arch_hash {
                    return Err(Error::InvalidParameter("kernel was built from a different architecture".into()));
                }
            }
            let compact = pipeline::expand_file(&file, *p2)?;
            let stored = compact.stored_len();
            kernel_file::save(out, &KernelFile::Compact(compact))?;
            eprintln!("{}", pipeline::resource_line("expand", started, pipeline::estimate_bytes(stored, 0)));
        }
        Command::Inpaint { image, mask, source, solver, out } => {
            let img = MaskedImage::load(image, mask)?;
            let kernel = kernel_for(source, Some(img.dims()), shared.seed)?;
            let mode = match solver {
                Solver::Direct => SolveMode::Direct,
                Solver::Iterative => SolveMode::Iterative,
            };
            let opts = solve_options(shared, mode)?;
            let result = pipeline::inpaint(&img, kernel.as_pixel_kernel(), &opts)?;
            pipeline::write_png(out, &result.pixels)?;
            if let Some(report) = &result.diagnostics.report {
                eprintln!("{report}");
            }
            let sys = if opts.mode == SolveMode::Direct { result.diagnostics.observed } else { 0 };
            eprintln!("{}", pipeline::resource_line("inpaint", started, pipeline::estimate_bytes(stored_values(&kernel), sys)));
        }
        Command::Heatmap { source, size, row, col, percentile, out } => {
            let dims = size.as_deref().map(parse_size).transpose()?;
            let kernel = kernel_for(source, dims, shared.seed)?;
            let map = pipeline::heatmap(kernel.as_pixel_kernel(), *row, *col, *percentile)?;
            pipeline::write_png(out, &map.insert_axis(Axis(0)))?;
            eprintln!("{}", pipeline::resource_line("heatmap", started, pipeline::estimate_bytes(stored_values(&kernel), 0)));
        }
        Command::Complete { observations, triples, shape, prior, augment, depth, activation, out } => {
            let obs = if *triples {
                let entries = csv_io::read_triples_file(observations)?;
                let shape = match shape {
                    Some(s) => parse_size(s)?,
                    None => entries
                        .iter()
                        .fold((0, 0), |(m, n), &(i, j, _)| (m.max(i + 1), n.max(j + 1))),
                };
                ObservationSet::new(shape, entries)?
            } else {
                ObservationSet::from_dense(csv_io::read_dense_file(observations)?.view())
            };
            let n = obs.shape().1;
            let feature_prior = match prior.split_once(':') {
                None if prior == "identity" => priors::identity_prior(n)?,
                Some(("onehot", path)) => {
                    let labels = csv_io::read_dense_file(path)?;
                    let labels: Vec<usize> = labels
                        .iter()
                        .map(|&v| {
                            if v >= 0.0 && v.fract() == 0.0 {
                                Ok(v as usize)
                            } else {
                                Err(Error::InvalidParameter(format!("label {v} is not a class index")))
                            }
                        })
                        .collect::<Result<_>>()?;
                    let classes = labels.iter().max().map_or(0, |&c| c + 1);
                    priors::one_hot_prior(&labels, classes)?
                }
                Some(("csv", path)) => method_output_prior(path, *augment)?,
                Some(("raw", path)) => normalize_prior(csv_io::read_dense_file(path)?)?,
                _ => return Err(Error::InvalidParameter(format!("unknown column prior `{prior}`"))),
            };
            let opts = solve_options(shared, SolveMode::Direct)?;
            let completion = complete_matrix(&obs, &feature_prior, *depth, *activation, &opts)?;
            csv_io::write_dense_file(out, completion.values.view())?;
            let d = &completion.diagnostics;
            eprintln!(
                "factorizations={} shared_pattern={} max_residual={:.3e} ridge={:.3e}",
                d.factorizations, d.shared_pattern, d.max_residual, d.ridge
            );
            eprintln!("{}", pipeline::resource_line("complete", started, pipeline::estimate_bytes(n * n, n)));
        }
        Command::Metrics { pred, truth, folds, n1, n2, sqrt_denominator } => {
            println!("metric\tvalue");
            if let Some(f) = folds {
                let d = csv_io::read_dense_file(f)?;
                let fd = metrics::FoldDifferences::new(d, n1.unwrap_or(0), n2.unwrap_or(0))?;
                let t = if *sqrt_denominator { metrics::corrected_t_sqrt(&fd)? } else { metrics::corrected_t(&fd)? };
                println!("corrected_t\t{}", t.t);
                println!("dof\t{}", t.dof);
            } else {
                let (Some(p), Some(t)) = (pred, truth) else { unreachable!("clap enforces both") };
                let p = read_planes(p)?;
                let t = read_planes(t)?;
                let (pf, tf) = (flatten_planes(&p), flatten_planes(&t));
                let show = |name: &str, v: Result<f64>| match v {
                    Ok(v) => println!("{name}\t{v}"),
                    Err(e) => println!("{name}\tNA ({e})"),
                };
                show("psnr", metrics::psnr(pf.view(), tf.view()));
                show("ssim", mean_over_planes(&p, &t, metrics::ssim));
                show("pearson_r", metrics::pearson_r_paper(pf.view(), tf.view()));
                show("mean_r2", metrics::mean_r2(pf.view(), tf.view()));
                show("mean_cosine", metrics::mean_cosine(pf.view(), tf.view()));
            }
        }
    }
    Ok(())
}

fn stored_values(kernel: &KernelFile) -> usize {
    match kernel {
        KernelFile::Compact(c) => c.stored_len(),
        KernelFile::Full { kernel, .. } => kernel.matrix.len(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
