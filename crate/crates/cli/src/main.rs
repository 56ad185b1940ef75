use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use simtrans_core::bleu::corpus_bleu;
use simtrans_core::harness::{
    ee_over_timeline, load_inputs, prepare_corpus, run, summary_table, train_lm, train_scorer, HarnessError, Overrides,
    PrepareMode, RunConfig,
};
use simtrans_core::EeParams;

#[derive(Parser)]
#[command(name = "simtrans", version, about = "Simultaneous translation pipeline simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a token stream through normalization, detection, translation and metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// full, sub_sentence, wait_k or context_aware
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        k_wait: Option<usize>,
        #[arg(long)]
        k_discard: Option<usize>,
        #[arg(long)]
        ee_r: Option<f64>,
        #[arg(long)]
        must_include: Option<PathBuf>,
        #[arg(long)]
        forbid: Option<PathBuf>,
        /// Report file; without one the report goes to stdout
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        no_normalize: bool,
    },
    /// Build training records from a bitext, or detector samples from punctuated text.
    Prepare {
        /// partial, context or detector-samples
        #[arg(long)]
        mode: PrepareMode,
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: Option<PathBuf>,
        /// Pharaoh-format alignments, one line per sentence pair
        #[arg(long)]
        alignments: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Corpus-level 4-gram overlap score.
    Bleu {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
    },
    /// Equilibrium efficiency over a `utt TAB LX TAB LY` timeline file.
    Ee {
        #[arg(long)]
        timeline: PathBuf,
        #[arg(long, default_value_t = EeParams::DEFAULT_R)]
        ee_r: f64,
    },
    /// Train the reference boundary scorer from detector samples.
    TrainScorer {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the n-gram model used by the abnormal-content filter.
    TrainLm {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &Path, what: &str) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("cannot read {what} {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|e| HarnessError::Config(format!("cannot write {}: {e}", path.display())))
}

fn lines_to_text(lines: &[String]) -> String {
    lines.iter().map(|l| format!("{l}\n")).collect()
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run {
            config,
            policy,
            k_wait,
            k_discard,
            ee_r,
            must_include,
            forbid,
            report,
            no_normalize,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.apply(&Overrides {
                policy,
                k_wait,
                k_discard,
                ee_r,
                must_include,
                forbid,
                report,
                no_normalize,
            });
            let result = run(&load_inputs(&cfg)?)?;
            match cfg.report_path() {
                Some(path) => {
                    write(&path, &result.to_json())?;
                    print!("{}", summary_table(&result));
                }
                None => {
                    print!("{}", result.to_json());
                    eprint!("{}", summary_table(&result));
                }
            }
        }
        Command::Prepare {
            mode,
            source,
            target,
            alignments,
            out,
        } => {
            let src = read(&source, "source text")?;
            let tgt = target.as_deref().map(|p| read(p, "target text")).transpose()?;
            let aln = alignments.as_deref().map(|p| read(p, "alignments")).transpose()?;
            let (records, stats) = prepare_corpus(mode, &src, tgt.as_deref(), aln.as_deref())?;
            write(&out, &lines_to_text(&records))?;
            println!(
                "lines {}  records {}  sub-sentence splits {}  segment splits {}  positive {}  negative {}",
                stats.lines,
                stats.records,
                stats.sub_sentence_splits,
                stats.segment_splits,
                stats.positive_samples,
                stats.negative_samples
            );
        }
        Command::Bleu { hyp, reference } => {
            let split = |t: String| {
                t.lines()
                    .map(|l| l.split_whitespace().map(String::from).collect())
                    .collect::<Vec<Vec<String>>>()
            };
            let h = split(read(&hyp, "hypotheses")?);
            let r = split(read(&reference, "references")?);
            let score = corpus_bleu(&h, &r).map_err(|e| HarnessError::Data(e.to_string()))?;
            let prec: Vec<String> = score
                .matches
                .iter()
                .zip(&score.totals)
                .map(|(m, t)| format!("{m}/{t}"))
                .collect();
            println!(
                "BLEU = {:.2} ({}, BP = {:.4}, hyp_len = {}, ref_len = {})",
                score.score,
                prec.join(" "),
                score.brevity_penalty,
                score.hyp_len,
                score.ref_len
            );
        }
        Command::Ee { timeline, ee_r } => {
            let params = EeParams::new(ee_r).map_err(|e| HarnessError::Config(e.to_string()))?;
            println!("utt\tsegments\tEE\t1/EE");
            for row in ee_over_timeline(&read(&timeline, "timeline")?, params)? {
                println!("{}\t{}\t{}\t{}", row.utt, row.segments, row.ee, row.inverse_ee);
            }
        }
        Command::TrainScorer { samples, out } => {
            let scorer = train_scorer(&read(&samples, "samples")?)?;
            write(&out, &scorer.to_text())?;
        }
        Command::TrainLm {
            corpus,
            order,
            alpha,
            out,
        } => {
            let lm = train_lm(&read(&corpus, "corpus")?, order, alpha)?;
            write(&out, &lm.to_text())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage problems count as configuration errors
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("simtrans: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
