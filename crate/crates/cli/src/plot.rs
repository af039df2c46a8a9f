//! Deterministic SVG output: PCA scatter plots and training curves.

use std::fmt::Write;

use decvae::model::EpochLog;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Leading eigenvector of a symmetric matrix by power iteration, with the
/// largest-magnitude entry made positive.
fn leading_eigvec(cov: &[Vec<f64>]) -> Vec<f64> {
    let d = cov.len();
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 0.01 * i as f64).collect();
    for _ in 0..500 {
        let mut w: Vec<f64> = cov.iter().map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-300 {
            return vec![0.0; d];
        }
        w.iter_mut().for_each(|x| *x /= n);
        let delta: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = w;
        if delta < 1e-12 {
            break;
        }
    }
    let big = v.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if big < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// Projects rows onto their first two principal components.
pub fn pca_2d(rows: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return vec![[0.0, 0.0]; n];
    }
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let centred: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&mean).map(|(a, m)| a - m).collect()).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in &centred {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += r[i] * r[j] / n as f64;
            }
        }
    }
    let v1 = leading_eigvec(&cov);
    let l1: f64 = cov.iter().zip(&v1).map(|(r, a)| a * r.iter().zip(&v1).map(|(c, b)| c * b).sum::<f64>()).sum();
    for i in 0..d {
        for j in 0..d {
            cov[i][j] -= l1 * v1[i] * v1[j];
        }
    }
    let v2 = if d > 1 { leading_eigvec(&cov) } else { vec![0.0; d] };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    centred.iter().map(|r| [dot(r, &v1), dot(r, &v2)]).collect()
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN - 110.0,
        H - 2.0 * MARGIN
    );
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn legend(s: &mut String, entries: &[(String, &str)]) {
    let x = W - MARGIN - 95.0;
    for (i, (label, colour)) in entries.iter().enumerate() {
        let y = MARGIN + 14.0 + 18.0 * i as f64;
        let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{:.1}" r="5" fill="{colour}"/>"#, y - 4.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{y:.1}" font-family="sans-serif" font-size="12">{}</text>"#, x + 10.0, escape(label));
    }
}

/// Scatter of 2-D points coloured by class index.
pub fn scatter_svg(points: &[[f64; 2]], classes: &[usize], class_names: &[String], title: &str) -> String {
    let mut s = header(title);
    let (x0, x1) = range(points.iter().map(|p| p[0]));
    let (y0, y1) = range(points.iter().map(|p| p[1]));
    let pw = W - 2.0 * MARGIN - 110.0;
    let ph = H - 2.0 * MARGIN;
    for (p, &c) in points.iter().zip(classes) {
        let x = MARGIN + 5.0 + (p[0] - x0) / (x1 - x0) * (pw - 10.0);
        let y = H - MARGIN - 5.0 - (p[1] - y0) / (y1 - y0) * (ph - 10.0);
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{}" fill-opacity="0.7"/>"#, PALETTE[c % PALETTE.len()]);
    }
    let entries: Vec<(String, &str)> =
        class_names.iter().enumerate().take(20).map(|(i, n)| (n.clone(), PALETTE[i % PALETTE.len()])).collect();
    legend(&mut s, &entries);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">PC1</text>"#, MARGIN + pw / 2.0, H - 15.0);
    let _ = writeln!(s, r#"<text x="15" y="{:.1}" font-family="sans-serif" font-size="12" transform="rotate(-90 15 {:.1})" text-anchor="middle">PC2</text>"#, MARGIN + ph / 2.0, MARGIN + ph / 2.0);
    s.push_str("</svg>\n");
    s
}

/// Total, reconstruction, orthogonality and prior losses against epoch.
pub fn loss_svg(log: &[EpochLog]) -> String {
    let mut s = header("training losses");
    let series: [(&str, fn(&EpochLog) -> f64); 4] = [
        ("total", |l| l.loss_total),
        ("recon", |l| l.loss_recon),
        ("ortho", |l| l.loss_ortho),
        ("prior", |l| l.loss_prior),
    ];
    let (e0, e1) = range(log.iter().map(|l| l.epoch as f64));
    let (v0, v1) = range(log.iter().flat_map(|l| series.iter().map(move |(_, f)| f(l))));
    let pw = W - 2.0 * MARGIN - 110.0;
    let ph = H - 2.0 * MARGIN;
    let px = |e: f64| MARGIN + 5.0 + (e - e0) / (e1 - e0) * (pw - 10.0);
    let py = |v: f64| H - MARGIN - 5.0 - (v - v0) / (v1 - v0) * (ph - 10.0);
    for (i, (name, f)) in series.iter().enumerate() {
        let colour = PALETTE[i];
        let pts: Vec<String> = log.iter().map(|l| format!("{:.2},{:.2}", px(l.epoch as f64), py(f(l)))).collect();
        let _ = writeln!(s, r#"<polyline class="curve" data-series="{name}" fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        if log.len() == 1 {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#, px(log[0].epoch as f64), py(f(&log[0])));
        }
    }
    let entries: Vec<(String, &str)> = series.iter().enumerate().map(|(i, (n, _))| (n.to_string(), PALETTE[i])).collect();
    legend(&mut s, &entries);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{:.1}" font-family="sans-serif" font-size="11">{v0:.3}</text>"#, H - MARGIN + 14.0);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{:.1}" font-family="sans-serif" font-size="11">{v1:.3}</text>"#, MARGIN - 4.0);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">epoch</text>"#, MARGIN + pw / 2.0, H - 15.0);
    s.push_str("</svg>\n");
    s
}
