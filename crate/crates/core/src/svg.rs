//! Static 512×512 figures of the unit square.

use std::fmt::Write as _;

use crate::orbifold::NumericPoint;

pub const SIZE: f64 = 512.0;

fn px(p: &NumericPoint) -> (f64, f64) {
    (p.theta * SIZE, (1.0 - p.phi) * SIZE)
}

/// Splits a torus polyline wherever it wraps across an edge of the square.
fn runs(points: &[NumericPoint]) -> Vec<&[NumericPoint]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..points.len() {
        let (a, b) = (&points[i - 1], &points[i]);
        if (a.theta - b.theta).abs() > 0.5 || (a.phi - b.phi).abs() > 0.5 {
            out.push(&points[start..i]);
            start = i;
        }
    }
    if start < points.len() {
        out.push(&points[start..]);
    }
    out.retain(|r| r.len() > 1);
    out
}

pub fn render(leaves: &[Vec<NumericPoint>], zeros: &[NumericPoint], singular: &[NumericPoint]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"512\" height=\"512\" viewBox=\"0 0 512 512\">"
    );
    s.push_str("<rect x=\"0\" y=\"0\" width=\"512\" height=\"512\" fill=\"white\" stroke=\"black\"/>\n");
    for leaf in leaves {
        for run in runs(leaf) {
            s.push_str("<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"0.5\" points=\"");
            for (i, p) in run.iter().enumerate() {
                let (x, y) = px(p);
                if i > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{x:.2},{y:.2}");
            }
            s.push_str("\"/>\n");
        }
    }
    for z in zeros {
        let (x, y) = px(z);
        let _ = writeln!(s, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"crimson\"/>");
    }
    for c in singular {
        let (x, y) = px(c);
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"8\" height=\"8\" fill=\"black\"/>",
            x - 4.0,
            y - 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraps_split_polylines() {
        let pts = vec![
            NumericPoint::new(0.9, 0.5),
            NumericPoint::new(0.95, 0.5),
            NumericPoint::new(0.01, 0.5),
            NumericPoint::new(0.05, 0.5),
        ];
        let svg = render(&[pts], &[NumericPoint::new(0.5, 0.5)], &[NumericPoint::new(0.0, 0.0)]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.contains("width=\"512\""));
    }
}
