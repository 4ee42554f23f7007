use std::path::PathBuf;

use anyhow::bail;
use clap::{Parser, Subcommand, ValueEnum};
use crewroom_core::study::{cronbach_alpha, paired_comparison, sus_grade, SurveyDataset};

#[derive(Parser)]
#[command(
    name = "crewroom-study",
    version,
    about = "Survey scoring and comparison"
)]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    /// Mean response across the selected items.
    Mean,
    /// SUS score; needs exactly ten items in questionnaire order.
    Sus,
}

#[derive(Subcommand)]
enum Command {
    /// Per-participant SUS scores, their mean and its curved grade.
    ScoreSus { csv: PathBuf },
    /// Cronbach's alpha over the chosen items (all columns by default).
    Alpha {
        csv: PathBuf,
        #[arg(long, value_delimiter = ',')]
        items: Vec<String>,
    },
    /// Paired t-test between two conditions answered by the same participants.
    Compare {
        csv_a: PathBuf,
        csv_b: PathBuf,
        #[arg(long, value_enum, default_value = "mean")]
        metric: Metric,
        #[arg(long, value_delimiter = ',')]
        items: Vec<String>,
    },
}

fn select(dataset: SurveyDataset, items: &[String]) -> anyhow::Result<SurveyDataset> {
    if items.is_empty() {
        return Ok(dataset);
    }
    let labels: Vec<&str> = items.iter().map(String::as_str).collect();
    Ok(dataset.select(&labels)?)
}

fn scores(dataset: &SurveyDataset, metric: Metric) -> anyhow::Result<Vec<f64>> {
    Ok(match metric {
        Metric::Mean => dataset.row_means(),
        Metric::Sus => dataset.sus_scores()?,
    })
}

/// Lines rows up by participant id when both files carry ids, otherwise by
/// row order.
fn align(
    a: &SurveyDataset,
    b: &SurveyDataset,
    sa: Vec<f64>,
    sb: Vec<f64>,
) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let numbered = |d: &SurveyDataset| {
        d.participants
            .iter()
            .enumerate()
            .all(|(i, p)| *p == format!("P{}", i + 1))
    };
    if numbered(a) || numbered(b) {
        if sa.len() != sb.len() {
            bail!("files have {} and {} participants", sa.len(), sb.len());
        }
        return Ok((sa, sb));
    }
    let mut out_b = Vec::with_capacity(sa.len());
    for p in &a.participants {
        match b.participants.iter().position(|q| q == p) {
            Some(j) => out_b.push(sb[j]),
            None => bail!("participant {p:?} is missing from the second file"),
        }
    }
    if b.participants.len() != a.participants.len() {
        bail!(
            "files have {} and {} participants",
            a.participants.len(),
            b.participants.len()
        );
    }
    Ok((sa, out_b))
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::ScoreSus { csv } => {
            let dataset = SurveyDataset::load(&csv)?;
            let per = dataset.sus_scores()?;
            let mean = per.iter().sum::<f64>() / per.len() as f64;
            let sd = if per.len() > 1 {
                (per.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (per.len() as f64 - 1.0))
                    .sqrt()
            } else {
                0.0
            };
            let grade = sus_grade(mean)?;
            if cli.json {
                let rows: Vec<_> = dataset
                    .participants
                    .iter()
                    .zip(&per)
                    .map(|(p, s)| serde_json::json!({ "participant": p, "sus": s }))
                    .collect();
                let doc = serde_json::json!({
                    "participants": rows, "mean": mean, "sd": sd,
                    "grade": grade.grade, "family": grade.family.to_string(),
                });
                println!("{}", serde_json::to_string_pretty(&doc)?);
            } else {
                for (p, s) in dataset.participants.iter().zip(&per) {
                    println!("{p}\t{s:.2}");
                }
                println!(
                    "mean\t{mean:.2}\nsd\t{sd:.2}\ngrade\t{} ({})",
                    grade.grade, grade.family
                );
            }
        }
        Command::Alpha { csv, items } => {
            let dataset = select(SurveyDataset::load(&csv)?, &items)?;
            let report = cronbach_alpha(&dataset)?;
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!(
                    "alpha\t{:.4}\nk\t{}\nn\t{}\nlabel\t{}",
                    report.alpha, report.k, report.n, report.label
                );
            }
        }
        Command::Compare {
            csv_a,
            csv_b,
            metric,
            items,
        } => {
            let a = select(SurveyDataset::load(&csv_a)?, &items)?;
            let b = select(SurveyDataset::load(&csv_b)?, &items)?;
            let (sa, sb) = align(&a, &b, scores(&a, metric)?, scores(&b, metric)?)?;
            let summary = paired_comparison(&sa, &sb)?;
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&summary)?);
            } else {
                println!(
                    "a\tmean {:.2}\tsd {:.2}\nb\tmean {:.2}\tsd {:.2}\nn\t{}\nt({})\t{:.4}\np\t{:.4}",
                    summary.mean_a,
                    summary.sd_a,
                    summary.mean_b,
                    summary.sd_b,
                    summary.n,
                    summary.df,
                    summary.t_stat,
                    summary.p_value
                );
            }
        }
    }
    Ok(())
}
