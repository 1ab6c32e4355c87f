use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::profile::ProfileRow;
use crate::error::{Error, Result};
use crate::pipeline::{FrameMetrics, RunSummary};
use crate::rawframe::BoundingBox;

pub const FRAMES_CSV_HEADER: &str = "frame_id,captured_at_s,rendered_at_s,e2e_latency_ms,transmitted_bytes,tiles_sent,config_id,key_frame,eab_bytes_per_s,queue_wait_ms,detections,dropped";

pub const PROFILE_CSV_HEADER: &str = "config_id,stride,channels,map,f1,mean_frame_bytes,mean_tile_bytes,mse";

pub fn frames_csv(frames: &[FrameMetrics]) -> String {
    let mut s = format!("{FRAMES_CSV_HEADER}\n");
    for m in frames {
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{:.3},{},{},{},{},{:.0},{:.3},{},{}",
            m.frame_id,
            m.captured_at,
            m.rendered_at,
            m.e2e_latency * 1e3,
            m.transmitted_bytes,
            m.tiles_sent,
            m.config_used.id(),
            m.key_frame as u8,
            m.eab,
            m.queue_wait * 1e3,
            m.detections.len(),
            m.dropped as u8,
        );
    }
    s
}

pub fn profile_csv(rows: &[ProfileRow]) -> String {
    let mut s = format!("{PROFILE_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6},{:.1},{:.1},{:.4}",
            r.config.id(),
            r.config.stride(),
            r.config.channels(),
            r.map,
            r.f1,
            r.mean_frame_bytes,
            r.mean_tile_bytes,
            r.mse
        );
    }
    s
}

pub fn summary_text(s: &RunSummary) -> String {
    format!(
        "frames = {}\ndropped = {}\nthroughput_fps = {:.3}\nsteady_throughput_fps = {:.3}\nactive_duration_s = {:.4}\n\
         mean_latency_ms = {:.3}\np95_latency_ms = {:.3}\nmax_latency_ms = {:.3}\nmean_frame_bytes = {:.1}\n\
         mean_tiles = {:.3}\nmax_queue_wait_ms = {:.3}\nmap = {:.4}\nf1 = {:.4}\nprecision = {:.4}\nrecall = {:.4}\n",
        s.frames,
        s.dropped,
        s.throughput,
        s.steady_throughput,
        s.active_duration,
        s.mean_latency * 1e3,
        s.p95_latency * 1e3,
        s.max_latency * 1e3,
        s.mean_frame_bytes,
        s.mean_tiles,
        s.max_queue_wait * 1e3,
        s.map,
        s.f1,
        s.precision,
        s.recall
    )
}

/// Per-frame box lists as `frame class [confidence] x y w h` lines, the
/// format [`parse_frame_boxes`] reads.
pub fn write_frame_boxes(frames: &[Vec<BoundingBox>], with_confidence: bool) -> String {
    let mut s =
        String::from(if with_confidence { "# frame class confidence x y w h\n" } else { "# frame class x y w h\n" });
    for (f, boxes) in frames.iter().enumerate() {
        for b in boxes {
            let _ = write!(s, "{f} {} ", b.class_id);
            if with_confidence {
                let _ = write!(s, "{} ", b.confidence);
            }
            let _ = writeln!(s, "{} {} {} {}", b.x, b.y, b.w, b.h);
        }
    }
    s
}

/// Parses `frame class [confidence] x y w h` lines into per-frame lists.
/// Without the confidence column every box gets confidence 1. At least
/// `min_frames` lists are returned, so frames without boxes still count.
pub fn parse_frame_boxes(text: &str, with_confidence: bool, min_frames: usize) -> Result<Vec<Vec<BoundingBox>>> {
    let fields = if with_confidence { 7 } else { 6 };
    let mut by_frame: BTreeMap<usize, Vec<BoundingBox>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = || Error::format("box file", format!("line {}: expected {fields} numeric fields", n + 1));
        let v: Vec<&str> = line.split_whitespace().collect();
        if v.len() != fields {
            return Err(bad());
        }
        let frame: usize = v[0].parse().map_err(|_| bad())?;
        let class_id: u16 = v[1].parse().map_err(|_| bad())?;
        let nums: Vec<f32> = v[2..].iter().map(|x| x.parse().map_err(|_| bad())).collect::<Result<_>>()?;
        let (confidence, r) = if with_confidence { (nums[0], &nums[1..]) } else { (1.0, &nums[..]) };
        by_frame.entry(frame).or_default().push(BoundingBox {
            class_id,
            x: r[0],
            y: r[1],
            w: r[2],
            h: r[3],
            confidence,
        });
    }
    let count = by_frame.keys().next_back().map_or(0, |&k| k + 1).max(min_frames);
    let mut out = vec![Vec::new(); count];
    for (f, boxes) in by_frame {
        out[f] = boxes;
    }
    Ok(out)
}

fn svg_plot(title: &str, x_label: &str, y_label: &str, series: &[(&str, Vec<(f64, f64)>)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let pts = series.iter().flat_map(|s| s.1.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\">{title}</text>\n\
         <line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>\n\
         <text x=\"15\" y=\"{}\" transform=\"rotate(-90 15 {})\" text-anchor=\"middle\">{y_label}</text>\n\
         <text x=\"{M}\" y=\"{}\">{x0:.3}</text><text x=\"{}\" y=\"{}\" text-anchor=\"end\">{x1:.3}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{y0:.3}</text><text x=\"{}\" y=\"{}\" text-anchor=\"end\">{y1:.3}</text>\n",
        W / 2.0,
        H - M,
        W - M,
        H - M,
        H - M,
        W / 2.0,
        H - 10.0,
        H / 2.0,
        H / 2.0,
        H - M + 15.0,
        W - M,
        H - M + 15.0,
        M - 4.0,
        H - M,
        M - 4.0,
        M + 4.0,
    );
    for (i, (name, points)) in series.iter().enumerate() {
        let color = colors[i % colors.len()];
        let path: Vec<String> = points.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" points=\"{}\"/>", path.join(" "));
        for &(x, y) in points {
            let _ = writeln!(s, "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"2.5\" fill=\"{color}\"/>", sx(x), sy(y));
        }
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{name}</text>", W - M - 120.0, M + 15.0 * i as f64);
    }
    s.push_str("</svg>\n");
    s
}

/// Accuracy against mean key-frame bytes, one point per configuration.
pub fn pareto_svg(rows: &[ProfileRow]) -> String {
    let mut pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.mean_frame_bytes, r.map)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    svg_plot("accuracy vs. bytes", "mean frame bytes", "mAP", &[("configs", pts)])
}

pub fn latency_svg(frames: &[FrameMetrics]) -> String {
    let pts = frames.iter().filter(|m| !m.dropped).map(|m| (m.frame_id as f64, m.e2e_latency * 1e3)).collect();
    svg_plot("per-frame latency", "frame", "e2e latency (ms)", &[("latency", pts)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_box_files_roundtrip() {
        let frames = vec![
            vec![BoundingBox { confidence: 0.5, ..BoundingBox::truth(1, 1.0, 2.0, 3.0, 4.0) }],
            vec![],
            vec![BoundingBox::truth(0, 5.0, 6.0, 7.0, 8.0)],
        ];
        let text = write_frame_boxes(&frames, true);
        assert_eq!(parse_frame_boxes(&text, true, 0).unwrap(), frames);
        let bare: Vec<Vec<BoundingBox>> = frames
            .iter()
            .map(|f| f.iter().map(|b| BoundingBox { confidence: 1.0, ..*b }).collect())
            .collect();
        assert_eq!(parse_frame_boxes(&write_frame_boxes(&frames, false), false, 3).unwrap(), bare);
        assert_eq!(parse_frame_boxes("", true, 2).unwrap(), vec![vec![], vec![]]);
        let truth = parse_frame_boxes("1 3 0 0 10 10\n", false, 0).unwrap();
        assert_eq!(truth, vec![vec![], vec![BoundingBox::truth(3, 0.0, 0.0, 10.0, 10.0)]]);
        assert!(parse_frame_boxes("1 3 0 0 10", false, 0).is_err());
        assert!(parse_frame_boxes("x 3 0 0 10 10", false, 0).is_err());
    }

    #[test]
    fn svg_is_well_formed() {
        let s = svg_plot("t", "x", "y", &[("a", vec![(0.0, 1.0), (2.0, 3.0)]), ("b", vec![])]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(svg_plot("t", "x", "y", &[]).contains("</svg>"));
    }
}
