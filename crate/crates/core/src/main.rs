use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use geoflow::io::read_binary_mask;
use geoflow::oracle::{check_intersection_predicate, check_quad_membership};
use geoflow::{
    blocked_count, crossing_count, epe, finite_diff_check, flow_to_color, gradcheck_scene, optimize_flow_pair,
    read_flo, read_image, total_loss, write_flo, write_image, Config, Error, FlowField, LossSelector, OcclusionMask,
    ValidityMask,
};

#[derive(Parser)]
#[command(name = "geoflow", version, about = "Optical-flow losses, optimizer and evaluation tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every loss term for a flow between two frames.
    Losses {
        img1: PathBuf,
        img2: PathBuf,
        flow: PathBuf,
        /// Backward flow; defaults to the negated forward flow.
        flow_back: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Estimate forward and backward flow by direct optimization.
    Optimize {
        img1: PathBuf,
        img2: PathBuf,
        #[arg(long)]
        out_fwd: PathBuf,
        #[arg(long)]
        out_bwd: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write per-step loss terms as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare a flow against ground truth.
    Eval {
        flow: PathBuf,
        gt: PathBuf,
        /// Mask image; nonzero pixels carry ground truth.
        #[arg(long)]
        valid: Option<PathBuf>,
        /// Mask image; nonzero pixels are non-occluded.
        #[arg(long)]
        noc: Option<PathBuf>,
    },
    /// Render a flow field with the color wheel.
    Viz {
        flow: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_mag: Option<f64>,
    },
    /// Check analytic gradients against central differences.
    Gradcheck {
        /// census, smooth, inter or block; all when omitted.
        #[arg(long)]
        loss: Option<LossSelector>,
        #[arg(long, default_value_t = 100)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare the geometric predicates against reference implementations.
    OracleCheck {
        /// Segment pairs; a tenth as many quadrilaterals are drawn.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Validation(String),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

type CliResult = Result<(), Failure>;

fn load_config(path: Option<&Path>) -> Result<Config, Error> {
    path.map_or_else(|| Ok(Config::default()), Config::load)
}

fn load_mask(path: &Path, dims: (usize, usize)) -> Result<Vec<bool>, Error> {
    let (h, w, bits) = read_binary_mask(path)?;
    if (h, w) != dims {
        return Err(Error::DimensionMismatch {
            context: "mask",
            expected_h: dims.0,
            expected_w: dims.1,
            got_h: h,
            got_w: w,
        });
    }
    Ok(bits)
}

fn run_losses(img1: &Path, img2: &Path, flow: &Path, flow_back: Option<&Path>, config: Option<&Path>) -> CliResult {
    let cfg = load_config(config)?;
    let (a, b) = (read_image(img1)?, read_image(img2)?);
    let fwd = read_flo(flow)?;
    let bwd = match flow_back {
        Some(p) => read_flo(p)?,
        None => {
            let mut neg = fwd.clone();
            neg.as_mut_slice().iter_mut().for_each(|v| *v = [-v[0], -v[1]]);
            neg
        }
    };
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            context: "second image",
            expected_h: a.dims().0,
            expected_w: a.dims().1,
            got_h: b.dims().0,
            got_w: b.dims().1,
        }
        .into());
    }
    let out = total_loss(&a, &b, &fwd, &bwd, &cfg.loss)?;
    let t = out.terms;
    println!("census={:.9}", t.census);
    println!("smooth={:.9}", t.smoothness);
    println!("inter={:.9}", t.non_intersection);
    println!("block={:.9}", t.non_blocking);
    println!("total={:.9}", t.total);
    println!("occluded_fwd={}", out.occ_forward.occluded_count());
    println!("occluded_bwd={}", out.occ_backward.occluded_count());
    println!("crossings_fwd={}", crossing_count(&fwd, &out.occ_forward)?);
    println!("blocked_fwd={}", blocked_count(&fwd, &out.occ_forward)?);
    Ok(())
}

fn run_optimize(
    img1: &Path,
    img2: &Path,
    out_fwd: &Path,
    out_bwd: &Path,
    config: Option<&Path>,
    trace: Option<&Path>,
) -> CliResult {
    let cfg = load_config(config)?;
    let (a, b) = (read_image(img1)?, read_image(img2)?);
    let result = optimize_flow_pair(&a, &b, &cfg.loss, &cfg.optimize)?;
    write_flo(out_fwd, &result.forward)?;
    write_flo(out_bwd, &result.backward)?;
    if let Some(path) = trace {
        let mut csv = String::from("step,census,smooth,inter,block,total\n");
        for e in &result.trace {
            let t = e.terms;
            writeln!(
                csv,
                "{},{:e},{:e},{:e},{:e},{:e}",
                e.step, t.census, t.smoothness, t.non_intersection, t.non_blocking, t.total
            )
            .expect("writing to a String");
        }
        fs::write(path, csv).map_err(Error::from)?;
    }
    if let Some(last) = result.trace.last() {
        println!("steps={}", last.step + 1);
        println!("total={:.9}", last.terms.total);
    }
    Ok(())
}

fn run_eval(flow: &Path, gt: &Path, valid: Option<&Path>, noc: Option<&Path>) -> CliResult {
    let f = read_flo(flow)?;
    let g = read_flo(gt)?;
    let (h, w) = f.dims();
    let validity = match valid {
        Some(p) => ValidityMask::new(h, w, load_mask(p, (h, w))?)?,
        None => ValidityMask::all(h, w),
    };
    let occluded = match noc {
        Some(p) => {
            let bits = load_mask(p, (h, w))?;
            Some(OcclusionMask::new(h, w, bits.into_iter().map(|b| !b).collect())?)
        }
        None => None,
    };
    let r = epe(&f, &g, &validity, occluded.as_ref())?;
    println!("epe_mean={:.6}", r.epe_mean);
    match r.epe_mean_noc {
        Some(v) => println!("epe_mean_noc={v:.6}"),
        None => println!("epe_mean_noc=nan"),
    }
    println!("error_rate={:.6}", r.error_rate);
    println!("valid_count={}", r.valid_count);
    Ok(())
}

fn run_viz(flow: &Path, out: &Path, max_mag: Option<f64>) -> CliResult {
    let f: FlowField = read_flo(flow)?;
    write_image(out, &flow_to_color(&f, max_mag))?;
    Ok(())
}

fn run_gradcheck(loss: Option<LossSelector>, probes: usize, seed: u64) -> CliResult {
    let selected = loss.map_or_else(|| LossSelector::ALL.to_vec(), |l| vec![l]);
    let mut failed = Vec::new();
    for l in selected {
        let scene = gradcheck_scene(l, seed);
        let report = finite_diff_check(l, &scene, probes, l.default_step(), seed)?;
        let ok = report.passes(l.tolerance()) && report.probes >= probes;
        println!(
            "loss={} probes={} skipped={} max_rel_err={:.3e} tol={:.0e} {}",
            l,
            report.probes,
            report.skipped,
            report.max_relative_error,
            l.tolerance(),
            if ok { "PASS" } else { "FAIL" }
        );
        if let Some(w) = report.worst.filter(|_| !ok) {
            println!(
                "  worst field={} row={} col={} ch={} analytic={:.6e} numeric={:.6e} largest={:.3e}",
                w.field, w.row, w.col, w.channel, w.analytic, w.numeric, report.largest_gradient
            );
        }
        if !ok {
            failed.push(l.name());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("gradient check failed for {}", failed.join(", "))))
    }
}

fn run_oracle_check(samples: usize, seed: u64) -> CliResult {
    let pairs = check_intersection_predicate(samples, seed, 1e-9);
    println!(
        "suite=intersection checked={} skipped={} crossings={} disagreements={}",
        pairs.checked, pairs.skipped, pairs.positives, pairs.disagreements
    );
    let quads = check_quad_membership((samples / 10).max(1), 10, seed.wrapping_add(1), 1e-6);
    println!(
        "suite=membership checked={} skipped={} inside={} concave_quads={} disagreements={}",
        quads.checked, quads.skipped, quads.positives, quads.concave, quads.disagreements
    );
    if pairs.disagreements + quads.disagreements > 0 {
        return Err(Failure::Validation("predicate disagrees with reference".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Losses { img1, img2, flow, flow_back, config } => {
            run_losses(img1, img2, flow, flow_back.as_deref(), config.as_deref())
        }
        Command::Optimize { img1, img2, out_fwd, out_bwd, config, trace } => {
            run_optimize(img1, img2, out_fwd, out_bwd, config.as_deref(), trace.as_deref())
        }
        Command::Eval { flow, gt, valid, noc } => run_eval(flow, gt, valid.as_deref(), noc.as_deref()),
        Command::Viz { flow, out, max_mag } => run_viz(flow, out, *max_mag),
        Command::Gradcheck { loss, probes, seed } => run_gradcheck(*loss, *probes, *seed),
        Command::OracleCheck { samples, seed } => run_oracle_check(*samples, *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
