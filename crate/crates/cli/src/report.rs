//! Report tables, SVG figures and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// First line of every emitted CSV.
pub fn provenance_line(config_hash: &str, seeds: &[u64]) -> String {
    let seeds: Vec<String> = seeds.iter().map(u64::to_string).collect();
    format!("# config_hash={config_hash} seeds={}\n", seeds.join(","))
}

/// Writes `bytes` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// A CSV table built row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Table {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Values of one column parsed as floats.
    pub fn column_f64(&self, name: &str) -> Vec<f64> {
        let Some(j) = self.header.iter().position(|h| h == name) else {
            return Vec::new();
        };
        self.rows.iter().map(|r| r[j].parse().unwrap_or(f64::NAN)).collect()
    }

    pub fn column(&self, name: &str) -> Vec<&str> {
        let Some(j) = self.header.iter().position(|h| h == name) else {
            return Vec::new();
        };
        self.rows.iter().map(|r| r[j].as_str()).collect()
    }

    pub fn to_csv(&self, provenance: &str) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let body = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(format!("{provenance}{}", String::from_utf8_lossy(&body)))
    }
}

/// One line of a plot.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

impl Figure {
    fn transform(&self, (x, y): (f64, f64)) -> Option<(f64, f64)> {
        let x = if self.log_x { x.log10() } else { x };
        let y = if self.log_y { y.log10() } else { y };
        (x.is_finite() && y.is_finite()).then_some((x, y))
    }

    /// A self-contained SVG line chart.
    pub fn to_svg(&self) -> String {
        let (w, h) = (640.0, 420.0);
        let (left, right, top, bottom) = (70.0, 150.0, 40.0, 50.0);
        let pts: Vec<(f64, f64)> =
            self.series.iter().flat_map(|s| s.points.iter().filter_map(|p| self.transform(*p))).collect();
        let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
        );
        if pts.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 <= 0.0 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 <= 0.0 {
            y1 = y0 + 1.0;
        }
        let pw = w - left - right;
        let ph = h - top - bottom;
        let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;
        let label = |v: f64, log: bool| if log { format!("{:.0e}", 10f64.powf(v)) } else { format!("{v:.3}") };

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, left + pw / 2.0, escape(&self.title));
        let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let (px, py) = (sx(xv), sy(yv));
            let _ = writeln!(s, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, top + ph + 15.0, label(xv, self.log_x));
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, left - 5.0, py + 4.0, label(yv, self.log_y));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 10.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="15" y="{0}" text-anchor="middle" transform="rotate(-90 15 {0})">{1}</text>"#,
            top + ph / 2.0,
            escape(&self.y_label)
        );
        for (k, series) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let path: Vec<String> = series
                .points
                .iter()
                .filter_map(|p| self.transform(*p))
                .map(|(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
            let ly = top + 15.0 * (k as f64 + 1.0);
            let _ = writeln!(s, r#"<line x1="{0}" y1="{ly}" x2="{1}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, w - right + 10.0, w - right + 30.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, w - right + 35.0, ly + 4.0, escape(&series.name));
        }
        s.push_str("</svg>\n");
        s
    }

    /// Gnuplot data: one block per series, separated by two blank lines.
    pub fn to_dat(&self) -> String {
        let mut s = String::new();
        for series in &self.series {
            let _ = writeln!(s, "# {}", series.name);
            for (x, y) in &series.points {
                let _ = writeln!(s, "{x} {y}");
            }
            s.push_str("\n\n");
        }
        s
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub version: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub tables: Vec<String>,
    pub figures: Vec<String>,
}

/// Everything one experiment run produces.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub tables: BTreeMap<String, Table>,
    pub figures: BTreeMap<String, Figure>,
    pub manifest: Manifest,
    /// The configuration exactly as hashed.
    pub config_json: String,
}

impl ReportBundle {
    pub fn new(experiment: &str, config_json: String, seeds: Vec<u64>) -> ReportBundle {
        ReportBundle {
            tables: BTreeMap::new(),
            figures: BTreeMap::new(),
            manifest: Manifest {
                experiment: experiment.to_string(),
                config_hash: sha256_hex(config_json.as_bytes()),
                seeds,
                version: env!("CARGO_PKG_VERSION").to_string(),
                status: "running".into(),
                error: None,
                tables: Vec::new(),
                figures: Vec::new(),
            },
            config_json,
        }
    }

    pub fn table_mut(&mut self, name: &str, header: &[&str]) -> &mut Table {
        self.tables.entry(name.to_string()).or_insert_with(|| Table::new(header))
    }

    pub fn csv(&self, name: &str) -> Result<Option<String>> {
        let prov = provenance_line(&self.manifest.config_hash, &self.manifest.seeds);
        self.tables.get(name).map(|t| t.to_csv(&prov)).transpose()
    }

    /// Writes `<name>.csv` per table, `<name>.svg` and `<name>.dat` per
    /// figure (when `plots`), `config.json` and `manifest.json`. Returns
    /// the written paths.
    pub fn write_to(&mut self, dir: &Path, plots: bool) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let prov = provenance_line(&self.manifest.config_hash, &self.manifest.seeds);
        for (name, table) in &self.tables {
            let p = dir.join(format!("{name}.csv"));
            write_atomic(&p, table.to_csv(&prov)?.as_bytes())?;
            written.push(p);
        }
        self.manifest.tables = self.tables.keys().cloned().collect();
        if plots {
            for (name, fig) in &self.figures {
                let p = dir.join(format!("{name}.svg"));
                write_atomic(&p, fig.to_svg().as_bytes())?;
                written.push(p);
                let p = dir.join(format!("{name}.dat"));
                write_atomic(&p, fig.to_dat().as_bytes())?;
                written.push(p);
            }
            self.manifest.figures = self.figures.keys().cloned().collect();
        }
        let p = dir.join("config.json");
        write_atomic(&p, self.config_json.as_bytes())?;
        written.push(p);
        let p = dir.join("manifest.json");
        write_atomic(&p, serde_json::to_string_pretty(&self.manifest)?.as_bytes())?;
        written.push(p);
        Ok(written)
    }
}
