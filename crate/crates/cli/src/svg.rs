//! SVG overlay of a filtering result: reference points on the left,
//! sensed points offset to the right, residual matches in one stroke
//! class and deleted matches in another.

use std::fmt::Write as _;

use vtm_core::{CorrespondenceSet, Point2};

const MARGIN: f64 = 20.0;

struct Bounds {
    min_x: f64,
    min_y: f64,
    max_x: f64,
    max_y: f64,
}

fn bounds<'a>(points: impl Iterator<Item = &'a Point2>) -> Bounds {
    let mut b = Bounds {
        min_x: f64::INFINITY,
        min_y: f64::INFINITY,
        max_x: f64::NEG_INFINITY,
        max_y: f64::NEG_INFINITY,
    };
    for p in points {
        b.min_x = b.min_x.min(p.x);
        b.min_y = b.min_y.min(p.y);
        b.max_x = b.max_x.max(p.x);
        b.max_y = b.max_y.max(p.y);
    }
    if !b.min_x.is_finite() {
        b = Bounds {
            min_x: 0.0,
            min_y: 0.0,
            max_x: 1.0,
            max_y: 1.0,
        };
    }
    b
}

fn coord(v: f64) -> String {
    format!("{v:.2}")
}

/// Renders the overlay. Deleted matches are drawn first so the residual
/// strokes sit on top.
pub fn render(residual: &CorrespondenceSet, deleted: &CorrespondenceSet) -> String {
    let ref_bounds = bounds(residual.reference().iter().chain(deleted.reference()));
    let sen_bounds = bounds(residual.sensed().iter().chain(deleted.sensed()));
    let ref_w = ref_bounds.max_x - ref_bounds.min_x;
    let sen_offset = ref_w + 2.0 * MARGIN;
    let width = sen_offset + (sen_bounds.max_x - sen_bounds.min_x) + 2.0 * MARGIN;
    let height =
        (ref_bounds.max_y - ref_bounds.min_y).max(sen_bounds.max_y - sen_bounds.min_y) + 2.0 * MARGIN;

    let map_ref = |p: &Point2| (p.x - ref_bounds.min_x + MARGIN, p.y - ref_bounds.min_y + MARGIN);
    let map_sen = |p: &Point2| {
        (
            p.x - sen_bounds.min_x + sen_offset + MARGIN,
            p.y - sen_bounds.min_y + MARGIN,
        )
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\">",
        coord(width),
        coord(height)
    );
    out.push_str(
        "<style>\n\
         line.residual { stroke: #e6b800; stroke-width: 1; }\n\
         line.deleted { stroke: #cc2200; stroke-width: 1; }\n\
         circle { fill: #333333; }\n\
         </style>\n",
    );
    let draw = |set: &CorrespondenceSet, class: &str, out: &mut String| {
        for (_, r, s) in set.iter() {
            let (x1, y1) = map_ref(&r);
            let (x2, y2) = map_sen(&s);
            let _ = writeln!(
                out,
                "<line class=\"{class}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>",
                coord(x1),
                coord(y1),
                coord(x2),
                coord(y2)
            );
            let _ = writeln!(out, "<circle cx=\"{}\" cy=\"{}\" r=\"1.5\"/>", coord(x1), coord(y1));
            let _ = writeln!(out, "<circle cx=\"{}\" cy=\"{}\" r=\"1.5\"/>", coord(x2), coord(y2));
        }
    };
    draw(deleted, "deleted", &mut out);
    draw(residual, "residual", &mut out);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_is_deterministic_and_classed() {
        let residual = CorrespondenceSet::from_pairs([(
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 10.0),
        )]);
        let deleted =
            CorrespondenceSet::from_pairs([(Point2::new(5.0, 5.0), Point2::new(50.0, 1.0))]);
        let a = render(&residual, &deleted);
        let b = render(&residual, &deleted);
        assert_eq!(a, b);
        assert!(a.contains("class=\"residual\""));
        assert!(a.contains("class=\"deleted\""));
        assert!(a.starts_with("<svg"));
    }
}
