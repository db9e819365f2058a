use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use oversight_core::eval::TraceRecord;
use oversight_core::layout::{attr_of, Pair, N_PAIRS};

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Trace file (JSON lines, one record per step).
    #[arg(long)]
    pub trace: PathBuf,
    /// Print only the stored record with this step index, verbatim.
    #[arg(long)]
    pub step: Option<usize>,
}

fn pair(i: usize) -> Pair {
    Pair::from_index(i).expect("index below N_PAIRS")
}

fn pairs(bits: impl Iterator<Item = (usize, bool)>) -> String {
    let names: Vec<String> = bits.filter(|(_, on)| *on).map(|(i, _)| pair(i).to_string()).collect();
    if names.is_empty() {
        "-".into()
    } else {
        names.join(" ")
    }
}

/// One line of the textual walk-through for `rec`, given the previous record.
pub fn describe(prev: Option<&TraceRecord>, rec: &TraceRecord) -> String {
    let mut line = format!("step {:>3} t={:>6.1} reward {:>12.2}", rec.step, rec.t, rec.reward);
    let _ = write!(
        line,
        " | highlight: {}",
        pairs(rec.action.bits.iter().copied().enumerate())
    );
    match rec.fixation {
        Some(p) => {
            let _ = write!(line, " | fixation: {p}");
        }
        None if !rec.client_fixations.is_empty() => {
            let names: Vec<String> = rec.client_fixations.iter().map(Pair::to_string).collect();
            let _ = write!(line, " | client fixations: {}", names.join(" "));
        }
        None => {}
    }
    let mut changes = Vec::new();
    let mut learned = Vec::new();
    for i in 0..N_PAIRS {
        let (before_att, before_usr) = prev.map_or((None, None), |p| (Some(p.s_att[i]), Some(p.s_usr[i])));
        let (lo, hi) = attr_of(i).range();
        // Jitter-sized moves are left out.
        if before_att.is_some_and(|b| (b - rec.s_att[i]).abs() > 0.05 * (hi - lo)) {
            changes.push(format!("{} {:.3}->{:.3}", pair(i), before_att.unwrap(), rec.s_att[i]));
        }
        if before_usr.is_some_and(|b| b != rec.s_usr[i]) {
            learned.push(format!("{}={:.3}", pair(i), rec.s_usr[i]));
        }
    }
    if !learned.is_empty() {
        let _ = write!(line, " | belief: {}", learned.join(" "));
    }
    if !changes.is_empty() {
        let _ = write!(line, "\n    changed: {}", changes.join(", "));
    }
    line
}

pub fn run(args: ReplayArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.trace).with_context(|| format!("reading {}", args.trace.display()))?;
    let mut prev: Option<TraceRecord> = None;
    let mut total = 0.0;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceRecord = serde_json::from_str(line).map_err(|e| oversight_core::Error::Parse {
            path: format!("{}:{}", args.trace.display(), n + 1),
            message: e.to_string(),
        })?;
        match args.step {
            Some(step) if rec.step == step => {
                println!("{line}");
                return Ok(());
            }
            Some(_) => {}
            None => {
                total += rec.reward;
                println!("{}", describe(prev.as_ref(), &rec));
            }
        }
        prev = Some(rec);
    }
    if let Some(step) = args.step {
        bail!("trace {} has no record for step {step}", args.trace.display());
    }
    println!("total reward {total:.2}");
    Ok(())
}
