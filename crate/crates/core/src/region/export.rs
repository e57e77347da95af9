use std::fmt::Write;

use super::FlexibilityMap;
use crate::geometry::Point;

pub const CSV_HEADER: &str = "t,h,alpha,p_pcc,q_pcc";

/// One row per vertex; `t` and `h` are 1-based.
pub fn map_csv(map: &FlexibilityMap) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (t, poly) in map.periods.iter().enumerate() {
        for (h, &(p, q)) in poly.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{},{}", t + 1, h + 1, map.directions.angles[h], p, q);
        }
    }
    out
}

/// Vertices read back from [`map_csv`] output.
#[derive(Debug, Clone, PartialEq)]
pub struct MapCsv {
    pub angles: Vec<f64>,
    /// `[t][h]`.
    pub periods: Vec<Vec<Point>>,
}

pub fn read_map_csv(text: &str) -> Result<MapCsv, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => return Err(format!("expected header `{CSV_HEADER}`, got {other:?}")),
    }
    let mut rows: Vec<(usize, usize, f64, f64, f64)> = Vec::new();
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(format!("row {}: expected 5 fields", n + 2));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| format!("row {}: {e}", n + 2));
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("row {}: {e}", n + 2));
        let (t, h) = (int(f[0])?, int(f[1])?);
        if t == 0 || h == 0 {
            return Err(format!("row {}: indices are 1-based", n + 2));
        }
        rows.push((t - 1, h - 1, num(f[2])?, num(f[3])?, num(f[4])?));
    }
    let t_count = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let h_count = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
    if rows.len() != t_count * h_count {
        return Err(format!("expected {} rows for T={t_count}, H={h_count}", t_count * h_count));
    }
    let mut periods = vec![vec![(f64::NAN, f64::NAN); h_count]; t_count];
    let mut angles = vec![f64::NAN; h_count];
    for (t, h, a, p, q) in rows {
        if !periods[t][h].0.is_nan() {
            return Err(format!("duplicate vertex t={} h={}", t + 1, h + 1));
        }
        periods[t][h] = (p, q);
        angles[h] = a;
    }
    Ok(MapCsv { angles, periods })
}

const SCALE: f64 = 160.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Frame {
    p0: f64,
    p1: f64,
    q0: f64,
    q1: f64,
}

impl Frame {
    fn around<'a>(polys: impl Iterator<Item = &'a Vec<Point>>) -> Frame {
        let (mut p0, mut p1, mut q0, mut q1) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(p, q) in polys.flatten() {
            p0 = p0.min(p);
            p1 = p1.max(p);
            q0 = q0.min(q);
            q1 = q1.max(q);
        }
        if !p0.is_finite() {
            (p0, p1, q0, q1) = (0.0, 0.0, 0.0, 0.0);
        }
        // Grid cells are 1 p.u.; the frame snaps outward to whole units.
        Frame {
            p0: (p0 - 0.25).floor(),
            p1: (p1 + 0.25).ceil(),
            q0: (q0 - 0.25).floor(),
            q1: (q1 + 0.25).ceil(),
        }
    }

    fn x(&self, p: f64) -> f64 {
        MARGIN + (p - self.p0) * SCALE
    }

    fn y(&self, q: f64) -> f64 {
        MARGIN + (self.q1 - q) * SCALE
    }

    fn open(&self, out: &mut String, title: &str) {
        let w = 2.0 * MARGIN + (self.p1 - self.p0) * SCALE;
        let h = 2.0 * MARGIN + (self.q1 - self.q0) * SCALE;
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, w / 2.0);
        let mut p = self.p0;
        while p <= self.p1 + 1e-9 {
            let x = self.x(p);
            let _ = writeln!(
                out,
                r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#ddd"/><text x="{x}" y="{}" text-anchor="middle">{p}</text>"##,
                self.y(self.q1),
                self.y(self.q0),
                self.y(self.q0) + 16.0
            );
            p += 1.0;
        }
        let mut q = self.q0;
        while q <= self.q1 + 1e-9 {
            let y = self.y(q);
            let _ = writeln!(
                out,
                r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{q}</text>"##,
                self.x(self.p0),
                self.x(self.p1),
                self.x(self.p0) - 6.0,
                y + 4.0
            );
            q += 1.0;
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">P (p.u.)</text>"#,
            w / 2.0,
            h - 8.0
        );
        let _ = writeln!(
            out,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">Q (p.u.)</text>"#,
            h / 2.0,
            h / 2.0
        );
    }

    fn polygon(&self, out: &mut String, poly: &[Point], color: &str, label: &str) {
        let pts: Vec<String> =
            poly.iter().map(|&(p, q)| format!("{:.3},{:.3}", self.x(p), self.y(q))).collect();
        let _ = writeln!(
            out,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="{color}" stroke-width="2"><title>{label}</title></polygon>"#,
            pts.join(" ")
        );
        for &(p, q) in poly {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.3}" cy="{:.3}" r="3" fill="{color}"/>"#,
                self.x(p),
                self.y(q)
            );
        }
    }
}

/// Closed polygon of period `t` (0-based) on a 1 p.u. grid.
pub fn period_svg(map: &FlexibilityMap, t: usize) -> String {
    let frame = Frame::around(std::iter::once(&map.periods[t]));
    let mut out = String::new();
    frame.open(&mut out, &format!("Flexibility region, t = {}", t + 1));
    frame.polygon(&mut out, &map.periods[t], COLORS[0], &format!("t = {}", t + 1));
    out.push_str("</svg>\n");
    out
}

/// All periods drawn over each other in one frame.
pub fn overlay_svg(map: &FlexibilityMap) -> String {
    let frame = Frame::around(map.periods.iter());
    let mut out = String::new();
    frame.open(&mut out, "Flexibility map");
    for (t, poly) in map.periods.iter().enumerate() {
        frame.polygon(&mut out, poly, COLORS[t % COLORS.len()], &format!("t = {}", t + 1));
    }
    out.push_str("</svg>\n");
    out
}
