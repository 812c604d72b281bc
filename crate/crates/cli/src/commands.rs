use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use thresh_forge::io::{read_image, write_image, write_mask};
use thresh_forge::{
    binarize_classic, binarize_improved, cluster_image, generate, kernel_1d, run_comparison,
    smooth, verify_ring_axioms, CheckMode, GrayImage, Init, KMeansConfig, KMeansSummary,
    PipelineConfig, Result, RunReport, SynthSpec,
};

use crate::{BinarizeArgs, Cli, Command, MethodArg, PipelineArgs, SceneArgs, ShapeArg};

/// Report printed by `kmeans`.
#[derive(Debug, Serialize)]
struct KMeansReport {
    k: usize,
    spatial: bool,
    init: Init,
    width: usize,
    height: usize,
    #[serde(flatten)]
    summary: KMeansSummary,
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn finish_report(report: RunReport, no_timings: bool) -> RunReport {
    if no_timings {
        report.without_timings()
    } else {
        report
    }
}

impl PipelineArgs {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            k: self.k,
            select: self.select,
            sigma: self.sigma,
            order: self.order,
            spatial: self.spatial,
            ..PipelineConfig::default()
        }
    }
}

impl SceneArgs {
    fn spec(&self) -> SynthSpec {
        let base = match self.shape {
            ShapeArg::Disk => SynthSpec::disk(self.width, self.height),
            ShapeArg::TriLobe => SynthSpec::tri_lobe(self.width, self.height),
        };
        SynthSpec {
            fg_level: self.fg,
            bg_level: self.bg,
            noise_sigma: self.noise,
            ..base
        }
    }
}

fn binarize(args: &BinarizeArgs, no_timings: bool) -> Result<()> {
    let img = read_image(&args.input)?;
    let (mask, report) = match args.method {
        MethodArg::Classic => binarize_classic(&img)?,
        MethodArg::Improved => binarize_improved(&img, &args.pipeline.config())?,
    };
    if let Some(out) = &args.out {
        write_mask(&mask, out)?;
    }
    emit_json(&finish_report(report, no_timings), args.report.as_deref())
}

fn label_image(labels: &[usize], width: usize, height: usize) -> Result<GrayImage> {
    let pixels = labels.iter().map(|&l| l.min(255) as u8).collect();
    GrayImage::new(width, height, pixels)
}

/// Runs one subcommand and returns the process exit code.
pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Otsu { input, out, report } => {
            let img = read_image(&input)?;
            let (mask, run) = binarize_classic(&img)?;
            if let Some(out) = out {
                write_mask(&mask, out)?;
            }
            emit_json(&finish_report(run, cli.no_timings), report.as_deref())?;
        }
        Command::Binarize(args) => binarize(&args, cli.no_timings)?,
        Command::Blur {
            input,
            sigma,
            out,
            dump_kernel,
        } => {
            let kernel = kernel_1d(sigma)?;
            let img = read_image(&input)?;
            let smoothed = smooth(&img, sigma)?;
            if let Some(out) = out {
                write_image(&smoothed, out)?;
            }
            if dump_kernel {
                emit_json(&kernel.weights(), None)?;
            }
        }
        Command::Kmeans {
            input,
            k,
            spatial,
            seed,
            labels_out,
            report,
        } => {
            let img = read_image(&input)?;
            let init = seed.map_or(Init::Spread, |seed| Init::Random { seed });
            let (result, map) = cluster_image(&img, &KMeansConfig::new(k, init), spatial)?;
            if let Some(out) = labels_out {
                write_image(&label_image(&map.labels, map.width, map.height)?, out)?;
            }
            let summary = KMeansReport {
                k,
                spatial,
                init,
                width: img.width(),
                height: img.height(),
                summary: result.summary(),
            };
            emit_json(&summary, report.as_deref())?;
        }
        Command::Synth {
            scene,
            seed,
            out,
            truth_out,
        } => {
            let spec = SynthSpec {
                seed,
                ..scene.spec()
            };
            let (img, truth) = generate(&spec)?;
            write_image(&img, out)?;
            write_mask(&truth, truth_out)?;
        }
        Command::Compare {
            scene,
            seeds,
            pipeline,
            csv,
            report,
        } => {
            let result = run_comparison(&scene.spec(), &pipeline.config(), seeds)?;
            if let Some(path) = csv {
                let mut w = BufWriter::new(File::create(path)?);
                result.write_csv(&mut w)?;
                w.flush()?;
            }
            emit_json(&result, report.as_deref())?;
        }
        Command::Ringcheck {
            sample,
            seed,
            report,
            ..
        } => {
            let mode = match (sample, seed) {
                (Some(n), Some(seed)) => CheckMode::Sampled { n, seed },
                _ => CheckMode::Exhaustive,
            };
            let result = verify_ring_axioms(mode);
            emit_json(&result, report.as_deref())?;
            if !result.is_ring {
                eprintln!("thresh-forge: ring axioms violated");
                return Ok(1);
            }
        }
    }
    Ok(0)
}
