//! FNR–FPR trajectory emission from an epoch log: CSV plus a hand-rolled SVG
//! (no plotting dependency; the curve is a polyline with labeled epochs).

use std::path::Path;

use guardgate_core::curriculum::EpochRecord;

pub fn read_epoch_log(path: &Path) -> anyhow::Result<Vec<EpochRecord>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("epoch log {}: {e}", path.display()))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: EpochRecord = serde_json::from_str(line)
            .map_err(|e| anyhow::anyhow!("epoch log line {}: {e}", i + 1))?;
        records.push(record);
    }
    anyhow::ensure!(!records.is_empty(), "epoch log is empty");
    Ok(records)
}

pub fn trajectory_csv(records: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,priority,loss,held_out_fnr,held_out_fpr\n");
    for r in records {
        out.push_str(&format!(
            "{},{:?},{},{},{}\n",
            r.epoch,
            r.priority,
            r.loss,
            r.held_out_fnr,
            r.held_out_fpr
        ));
    }
    out
}

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;

fn scale(value: f64, max: f64, span: f64) -> f64 {
    MARGIN + (value / max) * (span - 2.0 * MARGIN)
}

/// FPR on the x-axis, FNR on the y-axis (origin bottom-left), epochs joined
/// in order and labeled.
pub fn trajectory_svg(records: &[EpochRecord]) -> String {
    let max_fpr = records.iter().map(|r| r.held_out_fpr).fold(0.05, f64::max) * 1.15;
    let max_fnr = records.iter().map(|r| r.held_out_fnr).fold(0.05, f64::max) * 1.15;
    let x = |v: f64| scale(v, max_fpr, WIDTH);
    let y = |v: f64| HEIGHT - scale(v, max_fnr, HEIGHT);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"11\">\n"
    ));
    svg.push_str(&format!(
        "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n  <line x1=\"{m}\" \
         y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n  <line x1=\"{m}\" y1=\"{m}\" \
         x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">FPR</text>\n  <text x=\"14\" y=\"{}\" \
         text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">FNR</text>\n",
        WIDTH / 2.0,
        HEIGHT - 12.0,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
    ));
    for tick in [0.0, max_fpr / 2.0, max_fpr] {
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{:.2}</text>\n",
            x(tick),
            HEIGHT - MARGIN + 16.0,
            tick
        ));
    }
    for tick in [0.0, max_fnr / 2.0, max_fnr] {
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{:.2}</text>\n",
            MARGIN - 6.0,
            y(tick) + 4.0,
            tick
        ));
    }

    let points: Vec<String> =
        records.iter().map(|r| format!("{:.2},{:.2}", x(r.held_out_fpr), y(r.held_out_fnr))).collect();
    svg.push_str(&format!(
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"#1f6feb\" stroke-width=\"1.5\"/>\n",
        points.join(" ")
    ));
    for r in records {
        svg.push_str(&format!(
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f6feb\"/>\n  <text x=\"{:.2}\" \
             y=\"{:.2}\">e{}</text>\n",
            x(r.held_out_fpr),
            y(r.held_out_fnr),
            x(r.held_out_fpr) + 6.0,
            y(r.held_out_fnr) - 6.0,
            r.epoch
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
