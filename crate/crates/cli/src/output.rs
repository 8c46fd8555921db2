//! File emission: state and summary CSVs, gnuplot series, the run manifest
//! and optional SVG line charts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use crossdiff_core::{StateField, Trajectory};
use serde::Serialize;

/// Shortest decimal that parses back to the same value.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Output directory of one experiment, tracking every file written.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> Vec<String> {
        self.written.iter().map(|p| p.to_string_lossy().replace('\\', "/")).collect()
    }

    fn target(&mut self, relative: &str) -> Result<PathBuf> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        self.written.push(PathBuf::from(relative));
        Ok(path)
    }

    pub fn csv(&mut self, relative: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.target(relative)?;
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Columns `t, x, u_1, ..., u_m`, one row per output time and cell.
    pub fn states(&mut self, relative: &str, states: &[StateField]) -> Result<()> {
        let Some(first) = states.first() else {
            return self.csv(relative, &["t", "x"], &[]);
        };
        let m = first.species();
        let names: Vec<String> = (1..=m).map(|i| format!("u_{i}")).collect();
        let mut header = vec!["t", "x"];
        header.extend(names.iter().map(String::as_str));
        let mut rows = Vec::new();
        for s in states {
            for n in 0..s.grid().cells() {
                let mut row = vec![num(s.time), num(s.grid().midpoint(n))];
                row.extend((0..m).map(|i| num(s.get(i, n))));
                rows.push(row);
            }
        }
        self.csv(relative, &header, &rows)
    }

    pub fn trajectory(&mut self, relative: &str, traj: &Trajectory) -> Result<()> {
        self.states(relative, &traj.states)
    }

    /// Whitespace-separated columns with a `#` comment header.
    pub fn series(&mut self, relative: &str, columns: &[&str], points: &[Vec<f64>]) -> Result<()> {
        let path = self.target(relative)?;
        let mut text = format!("# {}\n", columns.join(" "));
        for p in points {
            let line: Vec<String> = p.iter().map(|v| num(*v)).collect();
            text.push_str(&line.join(" "));
            text.push('\n');
        }
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn svg(&mut self, relative: &str, chart: &Chart) -> Result<()> {
        let path = self.target(relative)?;
        fs::write(&path, chart.render()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn manifest(&mut self, value: &impl Serialize) -> Result<()> {
        let path = self.root.join("manifest.json");
        let mut f = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        serde_json::to_writer_pretty(&mut f, value)?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

/// Minimal line chart.
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

const PALETTE: [&str; 6] = ["#1b6ca8", "#d1495b", "#2e8b57", "#edae49", "#6a4c93", "#444444"];

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            log_y: false,
            series: Vec::new(),
        }
    }

    pub fn loglog(mut self) -> Self {
        self.log_x = true;
        self.log_y = true;
        self
    }

    pub fn with(mut self, name: &str, points: Vec<(f64, f64)>) -> Self {
        self.series.push((name.into(), points));
        self
    }

    fn map(&self, p: (f64, f64)) -> Option<(f64, f64)> {
        let x = if self.log_x { p.0.log10() } else { p.0 };
        let y = if self.log_y { p.1.log10() } else { p.1 };
        (x.is_finite() && y.is_finite()).then_some((x, y))
    }

    pub fn render(&self) -> String {
        let (w, h, pad) = (640.0, 420.0, 60.0);
        let pts: Vec<(f64, f64)> = self.series.iter().flat_map(|s| s.1.iter().filter_map(|p| self.map(*p))).collect();
        let (mut x0, mut x1, mut y0, mut y1) = pts
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY), |(a, b, c, d), (x, y)| {
                (a.min(*x), b.max(*x), c.min(*y), d.max(*y))
            });
        if pts.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 <= 0.0 {
            (x0, x1) = (x0 - 0.5, x1 + 0.5);
        }
        if y1 - y0 <= 0.0 {
            (y0, y1) = (y0 - 0.5, y1 + 0.5);
        }
        let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        let tick = |v: f64, log: bool| if log { format!("1e{v:.1}") } else { format!("{v:.3}") };
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
             <rect x=\"{pad}\" y=\"{pad}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            w - 2.0 * pad,
            h - 2.0 * pad,
            w / 2.0,
            escape(&self.title),
            w / 2.0,
            h - 16.0,
            escape(&self.x_label),
            h / 2.0,
            h / 2.0,
            escape(&self.y_label),
        );
        for (v, anchor, x, y) in [(x0, "start", sx(x0), h - pad + 16.0), (x1, "end", sx(x1), h - pad + 16.0)] {
            out += &format!("<text x=\"{x}\" y=\"{y}\" text-anchor=\"{anchor}\">{}</text>\n", tick(v, self.log_x));
        }
        for (v, y) in [(y0, sy(y0)), (y1, sy(y1) + 10.0)] {
            out += &format!("<text x=\"{}\" y=\"{y}\" text-anchor=\"end\">{}</text>\n", pad - 4.0, tick(v, self.log_y));
        }
        for (k, (name, series)) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let coords: Vec<String> =
                series.iter().filter_map(|p| self.map(*p)).map(|(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            out += &format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                coords.join(" ")
            );
            let ly = pad + 16.0 + 16.0 * k as f64;
            out += &format!(
                "<text x=\"{}\" y=\"{ly}\" fill=\"{color}\">{}</text>\n",
                w - pad - 8.0 - 7.0 * name.len() as f64,
                escape(name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 2.5e17, -0.0, 4.0 / 3.0] {
            assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(opt(None), "");
    }

    #[test]
    fn chart_skips_non_positive_points_on_log_axes() {
        let svg = Chart::new("t", "x", "y").loglog().with("a", vec![(0.0, 1.0), (1.0, 2.0), (10.0, 20.0)]).render();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn csv_uses_lf_and_quotes_when_needed() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.csv("a.csv", &["name", "value"], &[vec!["x,y".into(), num(0.5)]]).unwrap();
        let text = fs::read_to_string(dir.path().join("a.csv")).unwrap();
        assert_eq!(text, "name,value\n\"x,y\",0.5\n");
        assert_eq!(out.files(), vec!["a.csv".to_string()]);
    }
}
