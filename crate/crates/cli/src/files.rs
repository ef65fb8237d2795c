//! Case and results file formats: tab-separated rows with commented
//! headers, written atomically (temp sibling + rename).

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{bail, Context, Result};

use unscramble_core::blob::write_text_atomic;
use unscramble_core::solver::{CaseRow, SuiteCase, WidthSummary};
use unscramble_core::{Metric, Puzzle, PuzzleSpec};

/// Parse `# puzzle: <family> [metric]` into a spec.
fn parse_spec_line(value: &str) -> Result<PuzzleSpec> {
    let mut parts = value.split_whitespace();
    let family = parts
        .next()
        .context("empty puzzle header")?
        .parse()
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let metric = match parts.next() {
        Some(m) => m.parse().map_err(|e| anyhow::anyhow!("{e}"))?,
        None => Metric::QuarterTurn,
    };
    Ok(PuzzleSpec::new(family, metric))
}

/// Case files: `# puzzle:` header then one `case_id<TAB>state` row each.
pub fn write_cases(path: &Path, puzzle: &Puzzle, cases: &[SuiteCase]) -> Result<()> {
    let mut out = String::from("# unscramble cases v1\n");
    out.push_str(&format!("# puzzle: {}\n", puzzle.spec()));
    for case in cases {
        out.push_str(&format!("{}\t{}\n", case.id, puzzle.format_state(&case.state)));
    }
    write_text_atomic(path, &out)?;
    Ok(())
}

pub fn read_cases(path: &Path) -> Result<(PuzzleSpec, Vec<SuiteCase>)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading case file {}", path.display()))?;
    let mut spec: Option<PuzzleSpec> = None;
    let mut cases = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(value) = rest.trim().strip_prefix("puzzle:") {
                spec = Some(parse_spec_line(value.trim())?);
            }
            continue;
        }
        let spec = spec.context("case rows before the `# puzzle:` header")?;
        let puzzle = Puzzle::new(spec);
        let (id, state_text) = line
            .split_once('\t')
            .with_context(|| format!("line {}: expected case_id<TAB>state", lineno + 1))?;
        let state = puzzle
            .parse_state(state_text)
            .with_context(|| format!("line {}: bad state", lineno + 1))?;
        cases.push(SuiteCase { id: id.to_string(), state });
    }
    let spec = spec.context("case file is missing the `# puzzle:` header")?;
    if cases.is_empty() {
        bail!("case file holds no cases");
    }
    Ok((spec, cases))
}

const RESULT_COLUMNS: &str = "case_id\twidth\tsolved\tlength\toptimal_length\tnodes\tseconds\tsolution";

fn format_row(puzzle: &Puzzle, row: &CaseRow) -> String {
    let r = &row.result;
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{}\n",
        row.case_id,
        row.width,
        r.solved,
        if r.solved { r.length.to_string() } else { "-".into() },
        row.optimal_length.map(|o| o.to_string()).unwrap_or_else(|| "-".into()),
        r.nodes_expanded,
        r.wall_time,
        if r.solved { puzzle.format_moves(&r.solution) } else { "-".into() },
    )
}

fn format_summary(s: &WidthSummary) -> String {
    format!(
        "# summary width={} cases={} solved={} mean_length={} optimality_pct={} mean_nodes={:.2} mean_seconds={:.6}\n",
        s.width,
        s.cases,
        s.solved,
        s.mean_length.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
        s.optimality_pct.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into()),
        s.mean_nodes,
        s.mean_seconds,
    )
}

/// Results accumulate one width at a time; after each width completes the
/// whole file is rewritten atomically, so interrupted sweeps resume at
/// width granularity.
pub struct ResultsFile {
    header: String,
    pub completed: Vec<(Vec<CaseRow>, WidthSummary)>,
}

impl ResultsFile {
    pub fn new(puzzle: &Puzzle, checkpoint: &str) -> Self {
        let header = format!(
            "# unscramble results v1\n# puzzle: {}\n# checkpoint: {}\n# columns: {}\n",
            puzzle.spec(),
            checkpoint,
            RESULT_COLUMNS
        );
        ResultsFile { header, completed: Vec::new() }
    }

    /// Widths whose summary rows are already present in an existing file.
    pub fn completed_widths(path: &Path) -> BTreeSet<usize> {
        let Ok(text) = std::fs::read_to_string(path) else {
            return BTreeSet::new();
        };
        text.lines()
            .filter_map(|l| l.strip_prefix("# summary width="))
            .filter_map(|rest| rest.split_whitespace().next())
            .filter_map(|w| w.parse().ok())
            .collect()
    }

    pub fn push_width(&mut self, rows: Vec<CaseRow>, summary: WidthSummary) {
        self.completed.push((rows, summary));
    }

    pub fn write(&self, path: &Path, puzzle: &Puzzle) -> Result<()> {
        let mut out = self.header.clone();
        for (rows, summary) in &self.completed {
            for row in rows {
                out.push_str(&format_row(puzzle, row));
            }
            out.push_str(&format_summary(summary));
        }
        write_text_atomic(path, &out)?;
        Ok(())
    }
}

/// Comma-separated list of beam widths, e.g. `1,2,4,8`.
pub fn parse_widths(text: &str) -> Result<Vec<usize>> {
    let widths: Vec<usize> = text
        .split(',')
        .map(|w| w.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .context("widths must be a comma-separated list of integers")?;
    if widths.is_empty() || widths.contains(&0) {
        bail!("widths must be positive");
    }
    Ok(widths)
}

pub fn parse_budgets(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|b| {
            b.trim()
                .parse::<f64>()
                .with_context(|| format!("bad budget `{b}`"))
        })
        .collect()
}
