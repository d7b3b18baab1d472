//! Static line charts for run records.

use std::fmt::Write as _;

use popdyn_core::RunRecord;

const WIDTH: f64 = 720.0;
const PANEL: f64 = 220.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

struct Panel {
    top: f64,
    t_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Panel {
    fn point(&self, t: f64, y: f64) -> (f64, f64) {
        let px = MARGIN + (WIDTH - 2.0 * MARGIN) * t / self.t_max.max(f64::MIN_POSITIVE);
        let span = (self.y_max - self.y_min).max(1e-12);
        let py = self.top + PANEL * (1.0 - (y - self.y_min) / span);
        (px, py)
    }

    fn frame(&self, out: &mut String, title: &str) {
        let _ = writeln!(
            out,
            r##"<rect x="{MARGIN}" y="{}" width="{}" height="{PANEL}" fill="none" stroke="#444"/>"##,
            self.top,
            WIDTH - 2.0 * MARGIN
        );
        let _ = writeln!(
            out,
            r#"<text x="{MARGIN}" y="{}" font-size="13" font-family="sans-serif">{title}</text>"#,
            self.top - 8.0
        );
        for (label, y) in [(self.y_max, self.top + 4.0), (self.y_min, self.top + PANEL)] {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{y}" font-size="10" text-anchor="end" font-family="sans-serif">{label:.3}</text>"#,
                MARGIN - 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10" text-anchor="end" font-family="sans-serif">t = {}</text>"#,
            WIDTH - MARGIN,
            self.top + PANEL + 14.0,
            self.t_max
        );
    }

    fn polyline(&self, out: &mut String, ts: &[f64], ys: &[f64], color: &str, dotted: bool) {
        let mut pts = String::new();
        for (t, y) in ts.iter().zip(ys) {
            let (px, py) = self.point(*t, *y);
            let _ = write!(pts, "{px:.2},{py:.2} ");
        }
        let dash = if dotted { r#" stroke-dasharray="2,3""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            pts.trim_end()
        );
    }
}

fn document(body: &str, panels: usize) -> String {
    let height = MARGIN + panels as f64 * (PANEL + MARGIN);
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

fn legend(out: &mut String, x: f64, y: f64, label: &str, color: &str, dotted: bool) {
    let dash = if dotted { r#" stroke-dasharray="2,3""# } else { "" };
    let _ = writeln!(
        out,
        r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="1.5"{dash}/><text x="{}" y="{}" font-size="10" font-family="sans-serif">{label}</text>"#,
        x + 18.0,
        x + 22.0,
        y + 3.0
    );
}

fn distance_series(r: &RunRecord) -> Vec<f64> {
    r.d_ne.iter().zip(&r.d_br).map(|(ne, br)| ne.unwrap_or(*br)).collect()
}

/// Shares and distance to the equilibrium set over time. Runs with a
/// best-response term are drawn dotted.
pub fn run_chart(r: &RunRecord) -> String {
    let dotted = r.summary.scenario.alpha > 0.0;
    let t_max = r.times.last().copied().unwrap_or(1.0);
    let n = r.summary.scenario.n;
    let mut body = String::new();
    let shares = Panel {
        top: MARGIN,
        t_max,
        y_min: 0.0,
        y_max: 1.0,
    };
    shares.frame(&mut body, &format!("{}: population shares", r.summary.scenario.name));
    for i in 0..n {
        let ys: Vec<f64> = r.x.iter().map(|x| x[i]).collect();
        let color = COLORS[i % COLORS.len()];
        shares.polyline(&mut body, &r.times, &ys, color, dotted);
        legend(&mut body, WIDTH - MARGIN - 60.0, MARGIN + 12.0 + 14.0 * i as f64, &format!("x{}", i + 1), color, dotted);
    }
    let d = distance_series(r);
    let dist = Panel {
        top: 2.0 * MARGIN + PANEL,
        t_max,
        y_min: 0.0,
        y_max: d.iter().copied().fold(0.0, f64::max).max(1e-6),
    };
    let label = if r.d_ne.iter().all(Option::is_some) {
        "distance to the Nash set"
    } else {
        "distance to best response"
    };
    dist.frame(&mut body, label);
    dist.polyline(&mut body, &r.times, &d, COLORS[0], dotted);
    document(&body, 2)
}

/// Distance to the equilibrium set for several runs on one chart.
pub fn batch_chart(records: &[&RunRecord]) -> String {
    let t_max = records
        .iter()
        .filter_map(|r| r.times.last().copied())
        .fold(0.0, f64::max);
    let series: Vec<Vec<f64>> = records.iter().map(|r| distance_series(r)).collect();
    let y_max = series
        .iter()
        .flat_map(|s| s.iter().copied())
        .fold(0.0, f64::max)
        .max(1e-6);
    let panel = Panel {
        top: MARGIN,
        t_max,
        y_min: 0.0,
        y_max,
    };
    let mut body = String::new();
    panel.frame(&mut body, "distance to the Nash set (dotted: with best-response term)");
    // Same color for runs sharing a rule so the alpha pairs read together.
    let mut rules: Vec<String> = Vec::new();
    for (r, d) in records.iter().zip(&series) {
        let rule = r.summary.scenario.rule.clone().unwrap_or_default();
        let idx = rules.iter().position(|x| *x == rule).unwrap_or_else(|| {
            rules.push(rule.clone());
            rules.len() - 1
        });
        let color = COLORS[idx % COLORS.len()];
        let dotted = r.summary.scenario.alpha > 0.0;
        panel.polyline(&mut body, &r.times, d, color, dotted);
    }
    for (i, rule) in rules.iter().enumerate() {
        legend(&mut body, WIDTH - MARGIN - 80.0, MARGIN + 12.0 + 14.0 * i as f64, rule, COLORS[i % COLORS.len()], false);
    }
    document(&body, 1)
}
