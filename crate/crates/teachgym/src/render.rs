//! SVG renderings: the maze feedback overlay, top-down and side projections
//! of pick-and-place realizations, and per-step metric plots. Output is a
//! pure function of the inputs; coordinates are printed with two decimals.

use std::fmt::Write as _;

use teachgym_core::metrics::{MetricsReport, RealizationRecord};
use teachgym_core::task::{MazeTask, PickPlaceTask, Task};
use teachgym_core::{Demonstration, Point, Trajectory};

use crate::error::{AppError, AppResult};

pub const SUCCESS_COLOR: &str = "#2ca02c";
pub const FAIL_COLOR: &str = "#d62728";
pub const DEMO_COLOR: &str = "#1f77b4";
pub const MAZE_WIDTH: f64 = 800.0;
pub const MAZE_HEIGHT: f64 = 1200.0;
const OBSTACLE_COLOR: &str = "#7f7f7f";
const PROJECTION_SIZE: f64 = 800.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
];

/// Grab-distance ramp: cool at zero, the mid color at the grab threshold,
/// hot at twice the threshold and beyond.
pub const RAMP: [(f64, [u8; 3]); 3] = [
    (0.0, [44, 123, 182]),
    (0.5, [255, 255, 191]),
    (1.0, [215, 25, 28]),
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn hex([r, g, b]: [u8; 3]) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Ramp color for a grab `distance` given the grab threshold.
pub fn grab_color(distance: f64, grab_threshold: f64) -> [u8; 3] {
    let u = if grab_threshold > 0.0 {
        (distance / (2.0 * grab_threshold)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let u = if u.is_nan() { 1.0 } else { u };
    let i = RAMP
        .iter()
        .rposition(|(s, _)| *s <= u)
        .unwrap_or(0)
        .min(RAMP.len() - 2);
    let ((s0, c0), (s1, c1)) = (RAMP[i], RAMP[i + 1]);
    let w = (u - s0) / (s1 - s0);
    let mut out = [0u8; 3];
    for k in 0..3 {
        out[k] = (c0[k] as f64 + w * (c1[k] as f64 - c0[k] as f64)).round() as u8;
    }
    out
}

/// Affine map from task meters to pixels, y pointing up in task space.
#[derive(Clone, Copy)]
struct Viewport {
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
    left: f64,
    bottom: f64,
}

impl Viewport {
    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.left + (x - self.x0) * self.sx,
            self.bottom - (y - self.y0) * self.sy,
        )
    }
}

fn svg_open(s: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">"
    );
    let _ = writeln!(
        s,
        "<rect width=\"{w:.0}\" height=\"{h:.0}\" fill=\"#ffffff\"/>"
    );
}

fn polyline_points(points: impl Iterator<Item = (f64, f64)>) -> String {
    let mut out = String::new();
    for (i, (x, y)) in points.enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x:.2},{y:.2}");
    }
    out
}

fn maze_viewport(m: &MazeTask) -> Viewport {
    let b = m.bounds();
    Viewport {
        x0: b.xmin,
        y0: b.ymin,
        sx: MAZE_WIDTH / b.width(),
        sy: MAZE_HEIGHT / b.height(),
        left: 0.0,
        bottom: MAZE_HEIGHT,
    }
}

fn demo_layer(s: &mut String, demos: &[Demonstration], project: impl Fn(&Point) -> (f64, f64)) {
    let _ = writeln!(s, "<g id=\"demonstrations\">");
    for (i, d) in demos.iter().enumerate() {
        let pts = polyline_points(d.trajectory.positions().map(&project));
        let _ = writeln!(
            s,
            "<polyline class=\"demo\" data-order=\"{}\" fill=\"none\" stroke=\"{DEMO_COLOR}\" stroke-width=\"3\" points=\"{pts}\"/>",
            i + 1
        );
        let (x, y) = project(d.trajectory.first());
        let _ = writeln!(
            s,
            "<text class=\"demo-label\" x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"20\" fill=\"{DEMO_COLOR}\">{}</text>",
            x + 6.0,
            y - 6.0,
            i + 1
        );
    }
    let _ = writeln!(s, "</g>");
}

/// Maze geometry with realizations colored by membership and demonstrations
/// numbered in the order given.
pub fn render_feedback(
    task: &Task,
    realizations: &[RealizationRecord],
    demos: &[Demonstration],
) -> AppResult<String> {
    let Task::Maze(m) = task else {
        return Err(AppError::Usage(
            "feedback overlays need a 2D task; use render_projection for pick-and-place".into(),
        ));
    };
    let vp = maze_viewport(m);
    let mut s = String::new();
    svg_open(&mut s, MAZE_WIDTH, MAZE_HEIGHT);
    let rect = |s: &mut String, r: &teachgym_core::Rect, attrs: &str| {
        let (x, y) = vp.px(r.xmin, r.ymax);
        let _ = writeln!(
            s,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" {attrs}/>",
            r.width() * vp.sx,
            r.height() * vp.sy
        );
    };
    rect(
        &mut s,
        m.bounds(),
        "fill=\"none\" stroke=\"#000000\" stroke-width=\"2\"",
    );
    let _ = writeln!(s, "<g id=\"obstacles\">");
    for o in m.obstacles() {
        rect(
            &mut s,
            o,
            &format!("class=\"obstacle\" fill=\"{OBSTACLE_COLOR}\""),
        );
    }
    let _ = writeln!(s, "</g>");
    rect(&mut s, m.start_zone(), "id=\"start-zone\" fill=\"none\" stroke=\"#000000\" stroke-width=\"2\" stroke-dasharray=\"8 4\"");
    let t = m.target();
    let (cx, cy) = vp.px(t.center.x(), t.center.y());
    let _ = writeln!(
        s,
        "<circle id=\"target\" cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{:.2}\" fill=\"none\" stroke=\"#000000\" stroke-width=\"2\"/>",
        t.radius * vp.sx
    );
    let _ = writeln!(s, "<g id=\"realizations\">");
    for r in realizations {
        let (class, color) = if r.membership.is_member {
            ("success", SUCCESS_COLOR)
        } else {
            ("fail", FAIL_COLOR)
        };
        let pts = polyline_points(r.trajectory.positions().map(|p| vp.px(p.x(), p.y())));
        let _ = writeln!(
            s,
            "<polyline class=\"realization {class}\" data-item=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{pts}\"/>",
            r.test_item
        );
    }
    let _ = writeln!(s, "</g>");
    demo_layer(&mut s, demos, |p| vp.px(p.x(), p.y()));
    s.push_str("</svg>\n");
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    Xy,
    Xz,
}

impl Plane {
    fn axes(self) -> (usize, usize) {
        match self {
            Plane::Xy => (0, 1),
            Plane::Xz => (0, 2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Plane::Xy => "xy",
            Plane::Xz => "xz",
        }
    }
}

/// Grab point of a realization, when it emitted one.
fn grab_point(t: &Trajectory) -> Option<Point> {
    t.action_marks().map(|m| t.samples()[m.grab].position)
}

/// Orthographic projection of the pick-and-place workspace: targets as
/// crosses, the bin, grab points as discs colored by grab distance, and
/// numbered demonstrations.
pub fn render_projection(
    task: &PickPlaceTask,
    realizations: &[RealizationRecord],
    demos: &[Demonstration],
    plane: Plane,
) -> String {
    let (a, b) = plane.axes();
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in task.targets().iter().chain([task.bin(), task.start()]) {
        for (k, axis) in [a, b].into_iter().enumerate() {
            lo[k] = lo[k].min(p.as_slice()[axis]);
            hi[k] = hi[k].max(p.as_slice()[axis]);
        }
    }
    for k in 0..2 {
        let pad = 0.1 * (hi[k] - lo[k]).max(0.05);
        lo[k] -= pad;
        hi[k] += pad;
    }
    let inner = PROJECTION_SIZE - 2.0 * MARGIN - 60.0;
    let scale = (inner / (hi[0] - lo[0])).min(inner / (hi[1] - lo[1]));
    let vp = Viewport {
        x0: lo[0],
        y0: lo[1],
        sx: scale,
        sy: scale,
        left: MARGIN,
        bottom: MARGIN + (hi[1] - lo[1]) * scale,
    };
    let project = |p: &Point| vp.px(p.as_slice()[a], p.as_slice()[b]);
    let mut s = String::new();
    svg_open(&mut s, PROJECTION_SIZE, PROJECTION_SIZE);
    let _ = writeln!(
        s,
        "<text x=\"{MARGIN:.0}\" y=\"24\" font-family=\"sans-serif\" font-size=\"18\">{} projection</text>",
        plane.name().to_uppercase()
    );
    let _ = writeln!(s, "<g id=\"targets\">");
    for (i, t) in task.targets().iter().enumerate() {
        let (x, y) = project(t);
        let _ = writeln!(
            s,
            "<path class=\"target\" data-item=\"{i}\" d=\"M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}\" stroke=\"{DEMO_COLOR}\" stroke-width=\"1.5\"/>",
            x - 5.0, y - 5.0, x + 5.0, y + 5.0, x - 5.0, y + 5.0, x + 5.0, y - 5.0
        );
    }
    let _ = writeln!(s, "</g>");
    let (bx, by) = project(task.bin());
    let half = task.release_threshold() * scale;
    let _ = writeln!(
        s,
        "<rect id=\"bin\" x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#000000\" stroke-width=\"2\"/>",
        bx - half, by - half, 2.0 * half, 2.0 * half
    );
    let (sx, sy) = project(task.start());
    let _ = writeln!(s, "<circle id=\"start\" cx=\"{sx:.2}\" cy=\"{sy:.2}\" r=\"6\" fill=\"none\" stroke=\"#000000\" stroke-width=\"2\"/>");
    let _ = writeln!(s, "<g id=\"grabs\">");
    for r in realizations {
        let (Some(g), Some(target)) = (grab_point(&r.trajectory), task.targets().get(r.test_item))
        else {
            continue;
        };
        let d = g.distance(target);
        let (x, y) = project(&g);
        let _ = writeln!(
            s,
            "<circle class=\"grab\" data-item=\"{}\" data-distance=\"{d:.4}\" cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"5\" fill=\"{}\" stroke=\"#000000\" stroke-width=\"0.5\"/>",
            r.test_item,
            hex(grab_color(d, task.grab_threshold()))
        );
    }
    let _ = writeln!(s, "</g>");
    demo_layer(&mut s, demos, project);
    let legend_y = PROJECTION_SIZE - 50.0;
    let _ = writeln!(s, "<g id=\"legend\">");
    let steps = 20;
    let width = 300.0 / steps as f64;
    for i in 0..=steps {
        let d = 2.0 * task.grab_threshold() * i as f64 / steps as f64;
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{legend_y:.2}\" width=\"{width:.2}\" height=\"14\" fill=\"{}\"/>",
            MARGIN + i as f64 * width,
            hex(grab_color(d, task.grab_threshold()))
        );
    }
    for (i, label) in [
        "0 m".to_string(),
        format!("{:.3} m", task.grab_threshold()),
        format!("{:.3} m", 2.0 * task.grab_threshold()),
    ]
    .iter()
    .enumerate()
    {
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\">{label}</text>",
            MARGIN + i as f64 * 150.0 * (steps + 1) as f64 / steps as f64,
            legend_y + 30.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\">grab distance from target</text>",
        MARGIN + 340.0,
        legend_y + 12.0
    );
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

/// One labeled series of per-step metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSeries {
    pub label: String,
    /// `(demo_count, efficacy, efficiency)` per step.
    pub points: Vec<(usize, f64, f64)>,
}

impl MetricsSeries {
    pub fn from_report(label: &str, report: &MetricsReport) -> Self {
        MetricsSeries {
            label: label.to_string(),
            points: report
                .steps
                .iter()
                .map(|s| (s.demo_count, s.efficacy, s.efficiency))
                .collect(),
        }
    }
}

const PLOT_W: f64 = 800.0;
const PLOT_H: f64 = 500.0;

/// Per-step efficacy (solid) and efficiency (dashed) for each series.
pub fn render_metrics(series: &[MetricsSeries]) -> AppResult<String> {
    if series.iter().all(|s| s.points.is_empty()) {
        return Err(AppError::Usage(
            "metric plots need at least one step".into(),
        ));
    }
    let max_m = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .max()
        .unwrap_or(1)
        .max(2);
    let (left, right, top, bottom) = (60.0, PLOT_W - 180.0, 30.0, PLOT_H - 50.0);
    let x = |m: usize| left + (m as f64 - 1.0) / (max_m as f64 - 1.0) * (right - left);
    let y = |v: f64| bottom - v.clamp(0.0, 1.0) * (bottom - top);
    let mut s = String::new();
    svg_open(&mut s, PLOT_W, PLOT_H);
    let _ = writeln!(
        s,
        "<g id=\"axes\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(s, "<path d=\"M{left:.2},{top:.2}L{left:.2},{bottom:.2}L{right:.2},{bottom:.2}\" fill=\"none\" stroke=\"#000000\"/>");
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{v:.2}</text>",
            left - 6.0,
            y(v) + 4.0
        );
    }
    for m in 1..=max_m {
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{m}</text>",
            x(m),
            bottom + 18.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">demonstrations</text>",
        (left + right) / 2.0,
        bottom + 40.0
    );
    let _ = writeln!(s, "</g>");
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let label = escape(&ser.label);
        let _ = writeln!(s, "<g class=\"series\" data-label=\"{label}\">");
        let eff = polyline_points(ser.points.iter().map(|p| (x(p.0), y(p.1))));
        let _ = writeln!(s, "<polyline class=\"efficacy\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{eff}\"/>");
        for p in &ser.points {
            let _ = writeln!(s, "<circle class=\"efficacy-point\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>", x(p.0), y(p.1));
        }
        let eta = polyline_points(ser.points.iter().map(|p| (x(p.0), y(p.2))));
        let _ = writeln!(
            s,
            "<polyline class=\"efficiency\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" stroke-dasharray=\"6 4\" points=\"{eta}\"/>"
        );
        let ly = top + 20.0 * i as f64;
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{ly:.2}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{label}</text>",
            right + 20.0
        );
        let _ = writeln!(s, "</g>");
    }
    for (i, line) in ["solid: efficacy", "dashed: efficiency"].iter().enumerate() {
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\">{line}</text>",
            right + 20.0,
            bottom - 16.0 + 16.0 * i as f64
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// The plotted points as CSV.
pub fn metrics_csv(series: &[MetricsSeries]) -> String {
    let mut s = String::from("series,demo_count,efficacy,efficiency\n");
    for ser in series {
        let label = if ser.label.contains([',', '"']) {
            format!("\"{}\"", ser.label.replace('"', "\"\""))
        } else {
            ser.label.clone()
        };
        for (m, nu, eta) in &ser.points {
            let _ = writeln!(s, "{label},{m},{nu},{eta}");
        }
    }
    s
}
