//! Minimal static SVG emitters for run artifacts. Geometry is derived from
//! the same data written to the CSVs; styling is fixed.

use crate::maze::MazeSpec;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 60.0;

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_points<'a>(points: impl Iterator<Item = (&'a f64, &'a f64)>) -> Self {
        let mut f = Frame {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for (&x, &y) in points {
            f.x_min = f.x_min.min(x);
            f.x_max = f.x_max.max(x);
            f.y_min = f.y_min.min(y);
            f.y_max = f.y_max.max(y);
        }
        if !f.x_min.is_finite() {
            f = Frame {
                x_min: 0.0,
                x_max: 1.0,
                y_min: 0.0,
                y_max: 1.0,
            };
        }
        if f.x_max == f.x_min {
            f.x_max = f.x_min + 1.0;
        }
        if f.y_max == f.y_min {
            f.y_max = f.y_min + 1.0;
        }
        f
    }

    fn sx(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - 2.0 * MARGIN)
    }

    // SVG y grows downward.
    fn sy(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"16\">{title}</text>\n",
        WIDTH / 2.0
    )
}

fn axes(f: &Frame, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{x_label}</text>\n",
        WIDTH / 2.0,
        HEIGHT - MARGIN / 3.0
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 {x} {y})\">{y_label}</text>\n",
        MARGIN / 3.0,
        HEIGHT / 2.0,
        x = MARGIN / 3.0,
        y = HEIGHT / 2.0
    ));
    for i in 0..=4 {
        let fx = f.x_min + (f.x_max - f.x_min) * i as f64 / 4.0;
        let fy = f.y_min + (f.y_max - f.y_min) * i as f64 / 4.0;
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">{fx:.3}</text>\n",
            f.sx(fx),
            HEIGHT - MARGIN + 16.0
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{fy:.3}</text>\n",
            MARGIN - 6.0,
            f.sy(fy) + 4.0
        ));
    }
    s
}

/// Polyline chart of one or more named series over a shared x axis.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(&str, Vec<(f64, f64)>)],
) -> String {
    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let f = Frame::from_points(
        series
            .iter()
            .flat_map(|(_, pts)| pts.iter().map(|(x, y)| (x, y))),
    );
    let mut s = header(title);
    s.push_str(&axes(&f, x_label, y_label));
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = palette[i % palette.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", f.sx(x), f.sy(y)))
            .collect();
        s.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            coords.join(" ")
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{name}</text>\n",
            WIDTH - MARGIN - 120.0,
            MARGIN + 16.0 * (i + 1) as f64
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Scatter plot; an optional value per point is mapped to a blue-red ramp.
pub fn scatter(
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[(f64, f64, Option<f64>)],
) -> String {
    let f = Frame::from_points(points.iter().map(|(x, y, _)| (x, y)));
    let (lo, hi) = points
        .iter()
        .filter_map(|(_, _, v)| *v)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let mut s = header(title);
    s.push_str(&axes(&f, x_label, y_label));
    for &(x, y, v) in points {
        let color = match v {
            Some(v) if hi > lo => ramp((v - lo) / (hi - lo)),
            _ => "#1f77b4".to_string(),
        };
        s.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\" fill-opacity=\"0.6\"/>\n",
            f.sx(x),
            f.sy(y)
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Scatter of world points over the maze wall layout.
pub fn maze_scatter(title: &str, maze: &MazeSpec, points: &[(f64, f64, Option<f64>)]) -> String {
    let f = Frame {
        x_min: maze.bounds.min.x,
        x_max: maze.bounds.max.x,
        y_min: maze.bounds.min.y,
        y_max: maze.bounds.max.y,
    };
    let mut s = header(title);
    s.push_str(&format!(
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>\n",
        f.sx(f.x_min),
        f.sy(f.y_max),
        f.sx(f.x_max) - f.sx(f.x_min),
        f.sy(f.y_min) - f.sy(f.y_max)
    ));
    for w in &maze.walls {
        s.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"2\"/>\n",
            f.sx(w.a.x),
            f.sy(w.a.y),
            f.sx(w.b.x),
            f.sy(w.b.y)
        ));
    }
    let (lo, hi) = points
        .iter()
        .filter_map(|(_, _, v)| *v)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    for &(x, y, v) in points {
        let color = match v {
            Some(v) if hi > lo => ramp((v - lo) / (hi - lo)),
            _ => "#1f77b4".to_string(),
        };
        s.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{color}\" fill-opacity=\"0.5\"/>\n",
            f.sx(x),
            f.sy(y)
        ));
    }
    // Start and goal markers.
    s.push_str(&format!(
        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"5\" fill=\"red\"/>\n",
        f.sx(maze.start.x),
        f.sy(maze.start.y)
    ));
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">x</text>\n",
        f.sx(maze.goal.x),
        f.sy(maze.goal.y)
    ));
    s.push_str("</svg>\n");
    s
}

/// Blue-to-red color ramp over t in [0, 1].
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (31.0 + t * (214.0 - 31.0)) as u8;
    let g = (119.0 - t * (119.0 - 39.0)) as u8;
    let b = (180.0 - t * (180.0 - 40.0)) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}
