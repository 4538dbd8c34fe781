//! Raster map drawing.

use tiny_skia::{Color as SkColor, FillRule, Paint, Path, PathBuilder, Pixmap, Stroke, Transform};

use super::{simplify_geometry, ServiceError};
use crate::geo::ProjectedPoint;
use crate::smartcache::{CacheLayer, Rect, SmartCache};
use crate::warehouse::{Color, Geometry, Style};

/// Sea color behind every map.
pub const BACKGROUND: Color = Color([0xdc, 0xeb, 0xf5, 0xff]);

fn paint(c: Color) -> Paint<'static> {
    let mut p = Paint::default();
    let [r, g, b, a] = c.0;
    p.set_color_rgba8(r, g, b, a);
    p.anti_alias = true;
    p
}

struct View {
    min_x: f64,
    max_y: f64,
    res: f64,
}

impl View {
    fn px(&self, p: &ProjectedPoint) -> (f32, f32) {
        (((p.x() - self.min_x) / self.res) as f32, ((self.max_y - p.y()) / self.res) as f32)
    }

    fn add_chain(&self, pb: &mut PathBuilder, v: &[ProjectedPoint], close: bool) {
        let mut it = v.iter();
        if let Some(first) = it.next() {
            let (x, y) = self.px(first);
            pb.move_to(x, y);
            for p in it {
                let (x, y) = self.px(p);
                pb.line_to(x, y);
            }
            if close {
                pb.close();
            }
        }
    }
}

fn symbol(kind: Option<&str>, x: f32, y: f32, r: f32) -> Option<Path> {
    match kind.unwrap_or("circle") {
        "square" => {
            let mut pb = PathBuilder::new();
            pb.move_to(x - r, y - r);
            pb.line_to(x + r, y - r);
            pb.line_to(x + r, y + r);
            pb.line_to(x - r, y + r);
            pb.close();
            pb.finish()
        }
        "triangle" => {
            let mut pb = PathBuilder::new();
            pb.move_to(x, y - r * 1.2);
            pb.line_to(x + r * 1.1, y + r * 0.8);
            pb.line_to(x - r * 1.1, y + r * 0.8);
            pb.close();
            pb.finish()
        }
        _ => PathBuilder::from_circle(x, y, r),
    }
}

fn draw_feature(pm: &mut Pixmap, view: &View, g: &Geometry<ProjectedPoint>, style: &Style) {
    let stroke = Stroke {
        width: style.stroke_width as f32,
        ..Stroke::default()
    };
    let id = Transform::identity();
    match g {
        Geometry::Point(p) => {
            let (x, y) = view.px(p);
            let r = 2.5 + 1.5 * style.stroke_width as f32;
            if let Some(path) = symbol(style.symbol.as_deref(), x, y, r) {
                pm.fill_path(&path, &paint(style.fill.unwrap_or(style.stroke)), FillRule::Winding, id, None);
                if style.stroke_width > 0.0 {
                    pm.stroke_path(&path, &paint(style.stroke), &Stroke { width: 1.0, ..Stroke::default() }, id, None);
                }
            }
        }
        Geometry::PolyLine(v) => {
            let mut pb = PathBuilder::new();
            view.add_chain(&mut pb, v, false);
            if let Some(path) = pb.finish() {
                if style.stroke_width > 0.0 {
                    pm.stroke_path(&path, &paint(style.stroke), &stroke, id, None);
                }
            }
        }
        Geometry::Polygon(_) | Geometry::MultiPolygon(_) => {
            let mut pb = PathBuilder::new();
            for r in g.polygons().into_iter().flatten() {
                view.add_chain(&mut pb, r, true);
            }
            if let Some(path) = pb.finish() {
                if let Some(fill) = style.fill {
                    pm.fill_path(&path, &paint(fill), FillRule::EvenOdd, id, None);
                }
                if style.stroke_width > 0.0 {
                    pm.stroke_path(&path, &paint(style.stroke), &stroke, id, None);
                }
            }
        }
    }
}

/// Draws `layers` in order over `bbox` and returns PNG bytes.
pub(super) fn draw(
    cache: &SmartCache,
    layers: &[&CacheLayer],
    bbox: &Rect,
    width: u32,
    height: u32,
    simplify_tol: f64,
) -> Result<Vec<u8>, ServiceError> {
    let mut pm = Pixmap::new(width, height).ok_or_else(|| ServiceError::internal("cannot allocate image"))?;
    let [r, g, b, a] = BACKGROUND.0;
    pm.fill(SkColor::from_rgba8(r, g, b, a));
    let view = View {
        min_x: bbox[0],
        max_y: bbox[3],
        res: (bbox[2] - bbox[0]) / width as f64,
    };
    // Pad the query so strokes and symbols just outside the frame still show.
    let pad = 12.0 * view.res;
    let q = [bbox[0] - pad, bbox[1] - pad, bbox[2] + pad, bbox[3] + pad];
    for l in layers {
        let style = &l.spec().style;
        for f in cache.query_bbox(&l.spec().name, &q)? {
            draw_feature(&mut pm, &view, &simplify_geometry(&f.geometry, simplify_tol), style);
        }
    }
    pm.encode_png().map_err(|e| ServiceError::internal(format!("png encoding failed: {e}")))
}
