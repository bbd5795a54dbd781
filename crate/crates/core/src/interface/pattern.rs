//! Laser-cut drawings of the five unit strips.
//!
//! Every strip is drawn flat with four layers:
//!
//! * `cut`: the strip outline, including a chamfered connection tab on every
//!   hexagon side and on the closing slanted edge, with all corners rounded.
//! * `crease`: tendon diagonals (valley) and interior slanted creases
//!   (mountain), perforated as dash segments.
//! * `eyelet`: one aperture per cell on the tendon diagonal, next to its
//!   bottom end.
//! * `tab`: the perforated hinge line of every tab.
//!
//! Strips are stacked top to bottom, palm section first, 10 mm apart.
//! Coordinates are millimetres with y pointing down, as in SVG.

use super::{format_number, InterfaceError};
use crate::geometry::{unroll_strip, CreaseKind, CreasePattern, EdgeRole};
use crate::sizing::OrthosisDesign;
use nalgebra::{Point2, Vector2};
use std::fmt::Write as _;

pub const DEFAULT_DASH_ON_MM: f64 = 2.0;
pub const DEFAULT_DASH_OFF_MM: f64 = 2.0;
pub const DEFAULT_FILLET_MM: f64 = 1.5;
pub const DEFAULT_EYELET_MM: f64 = 4.0;
pub const DEFAULT_TAB_MM: f64 = 8.0;
pub const LAYER_NAMES: [&str; 4] = ["cut", "crease", "eyelet", "tab"];

const MARGIN_MM: f64 = 10.0;
const STRIP_GAP_MM: f64 = 10.0;
/// Tab sides are chamfered at this angle to the hinge line.
const TAB_CHAMFER_DEG: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternStyle {
    pub dash_on_mm: f64,
    pub dash_off_mm: f64,
    pub fillet_radius_mm: f64,
    pub eyelet_diameter_mm: f64,
    pub tab_width_mm: f64,
}

impl Default for PatternStyle {
    fn default() -> Self {
        PatternStyle {
            dash_on_mm: DEFAULT_DASH_ON_MM,
            dash_off_mm: DEFAULT_DASH_OFF_MM,
            fillet_radius_mm: DEFAULT_FILLET_MM,
            eyelet_diameter_mm: DEFAULT_EYELET_MM,
            tab_width_mm: DEFAULT_TAB_MM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathCommand {
    MoveTo(Point2<f64>),
    LineTo(Point2<f64>),
    /// Circular arc; `sweep` is the SVG sweep flag (clockwise on screen).
    ArcTo { to: Point2<f64>, center: Point2<f64>, radius: f64, sweep: bool },
    Close,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Path(Vec<PathCommand>),
    Circle { center: Point2<f64>, radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: String,
    /// Extra attributes written verbatim, e.g. `("data-role", "valley")`.
    pub attributes: Vec<(&'static str, String)>,
    pub shape: Shape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: &'static str,
    pub elements: Vec<Element>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportedDrawing {
    pub width: f64,
    pub height: f64,
    pub layers: Vec<Layer>,
}

impl ExportedDrawing {
    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }
}

fn infeasible(msg: String) -> InterfaceError {
    InterfaceError::StyleInfeasible(msg)
}

fn check_style(style: &PatternStyle, design: &OrthosisDesign) -> Result<(), InterfaceError> {
    let values = [
        ("dash on", style.dash_on_mm),
        ("dash off", style.dash_off_mm),
        ("fillet radius", style.fillet_radius_mm),
        ("eyelet diameter", style.eyelet_diameter_mm),
        ("tab width", style.tab_width_mm),
    ];
    for (name, v) in values {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(infeasible(format!("{name} must be a non-negative length, got {v}")));
        }
    }
    if style.dash_on_mm == 0.0 {
        return Err(infeasible("dash length must be positive".into()));
    }
    for (i, u) in design.units().iter().enumerate() {
        let smallest = u.a1().min(u.a2()).min(u.b());
        if style.eyelet_diameter_mm >= smallest {
            return Err(infeasible(format!(
                "section {}: eyelet {} mm does not fit a {smallest} mm cell feature",
                i + 1,
                style.eyelet_diameter_mm
            )));
        }
    }
    Ok(())
}

/// Dash segments covering `a → b`: the first starts at `a`, the last ends at
/// `b`, and dash and gap lengths keep their ratio.
pub fn dash_segments(a: Point2<f64>, b: Point2<f64>, on: f64, off: f64) -> Vec<(Point2<f64>, Point2<f64>)> {
    let length = (b - a).norm();
    if off == 0.0 || length <= on {
        return vec![(a, b)];
    }
    let n = (((length + off) / (on + off)).floor() as usize).max(1);
    let s = length / (n as f64 * on + (n - 1) as f64 * off);
    let dir = (b - a) / length;
    (0..n)
        .map(|i| {
            let start = i as f64 * (on + off) * s;
            let end = start + on * s;
            let p = if i == 0 { a } else { a + dir * start };
            let q = if i + 1 == n { b } else { a + dir * end };
            (p, q)
        })
        .collect()
}

fn dashed_path(segments: &[(Point2<f64>, Point2<f64>)]) -> Shape {
    Shape::Path(segments.iter().flat_map(|&(p, q)| [PathCommand::MoveTo(p), PathCommand::LineTo(q)]).collect())
}

fn centroid(points: &[Point2<f64>]) -> Point2<f64> {
    let sum = points.iter().fold(Vector2::zeros(), |acc, p| acc + p.coords);
    Point2::from(sum / points.len() as f64)
}

/// Outer corners of a tab on edge `u → v`, pointing away from `inside`.
fn tab_corners(u: Point2<f64>, v: Point2<f64>, inside: Point2<f64>, width: f64) -> Result<[Point2<f64>; 2], String> {
    let length = (v - u).norm();
    let t = (v - u) / length;
    let mut n = Vector2::new(-t.y, t.x);
    if n.dot(&(inside - u)) > 0.0 {
        n = -n;
    }
    let inset = width / TAB_CHAMFER_DEG.to_radians().tan();
    if 2.0 * inset >= length {
        return Err(format!("tab width {width} mm too large for a {length} mm edge"));
    }
    Ok([u + n * width + t * inset, v + n * width - t * inset])
}

/// Strip outline in pattern coordinates: bottom edge, closing edge, top edge
/// back, then the free slanted edge.
fn outline(pattern: &CreasePattern, tab: f64) -> Result<Vec<Point2<f64>>, String> {
    let (bottom, top) = (&pattern.bottom, &pattern.top);
    let inside = |cell: usize| centroid(&pattern.cells[cell].vertices);
    let mut edges: Vec<(Point2<f64>, Point2<f64>, Option<usize>)> = Vec::new();
    for k in 0..6 {
        edges.push((bottom[k], bottom[k + 1], Some(k)));
    }
    edges.push((bottom[6], top[6], Some(5)));
    for k in (0..6).rev() {
        edges.push((top[k + 1], top[k], Some(k)));
    }
    edges.push((top[0], bottom[0], None));

    let mut points = Vec::new();
    for (u, v, cell) in edges {
        points.push(u);
        if let (Some(cell), true) = (cell, tab > 0.0) {
            points.extend(tab_corners(u, v, inside(cell), tab)?);
        }
    }
    Ok(points)
}

fn cross(u: Vector2<f64>, v: Vector2<f64>) -> f64 {
    u.x * v.y - u.y * v.x
}

/// Closed path through `points` with every corner rounded to `radius`.
fn filleted_path(points: &[Point2<f64>], radius: f64) -> Result<Vec<PathCommand>, String> {
    let n = points.len();
    if radius == 0.0 {
        let mut cmds = vec![PathCommand::MoveTo(points[0])];
        cmds.extend(points[1..].iter().map(|&p| PathCommand::LineTo(p)));
        cmds.push(PathCommand::Close);
        return Ok(cmds);
    }
    // (entry tangent point, arc) per vertex.
    let mut corners: Vec<(Point2<f64>, Option<PathCommand>)> = Vec::with_capacity(n);
    for i in 0..n {
        let (a, v, b) = (points[(i + n - 1) % n], points[i], points[(i + 1) % n]);
        let (la, lb) = ((v - a).norm(), (b - v).norm());
        let (d1, d2) = ((v - a) / la, (b - v) / lb);
        let turn = d1.dot(&d2).clamp(-1.0, 1.0).acos();
        if turn < 1e-9 {
            corners.push((v, None));
            continue;
        }
        let t = radius * (turn / 2.0).tan();
        if t > 0.5 * la.min(lb) {
            return Err(format!("fillet radius {radius} mm too large for a corner with {} mm edges", la.min(lb)));
        }
        let left = cross(d1, d2) > 0.0;
        let normal = if left { Vector2::new(-d1.y, d1.x) } else { Vector2::new(d1.y, -d1.x) };
        let entry = v - d1 * t;
        let exit = v + d2 * t;
        let arc = PathCommand::ArcTo { to: exit, center: entry + normal * radius, radius, sweep: left };
        corners.push((entry, Some(arc)));
    }
    let start = match corners[0].1 {
        Some(PathCommand::ArcTo { to, .. }) => to,
        _ => corners[0].0,
    };
    let mut cmds = vec![PathCommand::MoveTo(start)];
    for i in (1..n).chain(std::iter::once(0)) {
        let (entry, arc) = corners[i];
        match arc {
            Some(arc) => {
                cmds.push(PathCommand::LineTo(entry));
                cmds.push(arc);
            }
            None if i != 0 => cmds.push(PathCommand::LineTo(entry)),
            None => {}
        }
    }
    cmds.push(PathCommand::Close);
    Ok(cmds)
}

/// Segment `a → b` with `trim` removed at both ends.
fn trimmed(a: Point2<f64>, b: Point2<f64>, trim: f64) -> Result<(Point2<f64>, Point2<f64>), String> {
    let length = (b - a).norm();
    if 2.0 * trim >= length {
        return Err(format!("fillet radius {trim} mm consumes a {length} mm crease"));
    }
    let dir = (b - a) / length;
    Ok((a + dir * trim, b - dir * trim))
}

fn distance_to_segment(p: Point2<f64>, a: Point2<f64>, b: Point2<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn attrs(section: usize, cell: Option<usize>, role: &str) -> Vec<(&'static str, String)> {
    let mut out = vec![("data-section", section.to_string())];
    if let Some(c) = cell {
        out.push(("data-cell", c.to_string()));
    }
    out.push(("data-role", role.to_string()));
    out
}

pub fn export_pattern(design: &OrthosisDesign, style: &PatternStyle) -> Result<ExportedDrawing, InterfaceError> {
    check_style(style, design)?;
    let mut layers: Vec<Layer> = LAYER_NAMES.iter().map(|&name| Layer { name, elements: Vec::new() }).collect();
    let mut cursor = MARGIN_MM;
    let mut width: f64 = 0.0;
    let fillet = style.fillet_radius_mm;

    for (i, unit) in design.units().iter().enumerate() {
        let section = i + 1;
        let context = |msg: String| infeasible(format!("section {section}: {msg}"));
        let pattern = unroll_strip(unit)?;
        let raw_outline = outline(&pattern, style.tab_width_mm).map_err(context)?;
        let (mut min, mut max) = (raw_outline[0], raw_outline[0]);
        for p in &raw_outline {
            min = Point2::new(min.x.min(p.x), min.y.min(p.y));
            max = Point2::new(max.x.max(p.x), max.y.max(p.y));
        }
        let top_edge = cursor;
        let place = move |p: Point2<f64>| Point2::new(p.x - min.x + MARGIN_MM, top_edge + (max.y - p.y));
        width = width.max(max.x - min.x + 2.0 * MARGIN_MM);
        cursor += max.y - min.y + STRIP_GAP_MM;

        let placed: Vec<Point2<f64>> = raw_outline.iter().map(|&p| place(p)).collect();
        layers[0].elements.push(Element {
            id: format!("s{section}-outline"),
            attributes: attrs(section, None, "outline"),
            shape: Shape::Path(filleted_path(&placed, fillet).map_err(context)?),
        });

        let mut slanted = 0;
        for crease in &pattern.creases {
            let (a, b) = (place(crease.start), place(crease.end));
            let (layer, id, role, cell) = match (crease.kind, crease.role) {
                (CreaseKind::Valley, _) => {
                    let c = crease.cells[0];
                    (1, format!("s{section}-c{c}-valley"), "valley", Some(c))
                }
                (CreaseKind::Mountain, EdgeRole::Slanted) => {
                    slanted += 1;
                    (1, format!("s{section}-e{slanted}-slanted"), "slanted", None)
                }
                (_, EdgeRole::BottomSide) if style.tab_width_mm > 0.0 => {
                    let c = crease.cells[0];
                    (3, format!("s{section}-c{c}-bottom"), "bottom", Some(c))
                }
                (_, EdgeRole::TopSide) if style.tab_width_mm > 0.0 => {
                    let c = crease.cells[0];
                    (3, format!("s{section}-c{c}-top"), "top", Some(c))
                }
                (CreaseKind::Boundary, EdgeRole::Slanted) if style.tab_width_mm > 0.0 && crease.cells == [5] => {
                    (3, format!("s{section}-closure"), "closure", None)
                }
                _ => continue,
            };
            let (a, b) = trimmed(a, b, fillet).map_err(context)?;
            let kind = match crease.kind {
                CreaseKind::Valley => "valley",
                _ => "mountain",
            };
            let mut attributes = attrs(section, cell, role);
            attributes.push(("class", kind.to_string()));
            layers[layer].elements.push(Element {
                id,
                attributes,
                shape: dashed_path(&dash_segments(a, b, style.dash_on_mm, style.dash_off_mm)),
            });
        }

        let radius = style.eyelet_diameter_mm / 2.0;
        if radius > 0.0 {
            for (k, cell) in pattern.cells.iter().enumerate() {
                let anchor = pattern.eyelet_anchors[k];
                let dir = (cell.vertices[3] - anchor).normalize();
                let center = anchor + dir * style.eyelet_diameter_mm;
                let v = &cell.vertices;
                for e in 0..4 {
                    if distance_to_segment(center, v[e], v[(e + 1) % 4]) < radius {
                        return Err(context(format!("eyelet of cell {k} crosses the cell boundary")));
                    }
                }
                layers[2].elements.push(Element {
                    id: format!("s{section}-c{k}-eyelet"),
                    attributes: attrs(section, Some(k), "eyelet"),
                    shape: Shape::Circle { center: place(center), radius },
                });
            }
        }
    }
    let height = cursor - STRIP_GAP_MM + MARGIN_MM;
    Ok(ExportedDrawing { width, height, layers })
}

fn n(x: f64) -> String {
    format_number(x)
}

fn layer_stroke(name: &str) -> &'static str {
    match name {
        "cut" => "#ff0000",
        "crease" => "#0000ff",
        "eyelet" => "#00a000",
        _ => "#ff8000",
    }
}

pub fn to_svg(drawing: &ExportedDrawing) -> String {
    let mut out = String::new();
    let (w, h) = (n(drawing.width), n(drawing.height));
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}mm\" height=\"{h}mm\" viewBox=\"0 0 {w} {h}\">"
    );
    for layer in &drawing.layers {
        let _ = writeln!(
            out,
            "  <g id=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"0.1\">",
            layer.name,
            layer_stroke(layer.name)
        );
        for el in &layer.elements {
            let mut extra = String::new();
            for (k, v) in &el.attributes {
                let _ = write!(extra, " {k}=\"{v}\"");
            }
            match &el.shape {
                Shape::Circle { center, radius } => {
                    let _ = writeln!(
                        out,
                        "    <circle id=\"{}\"{extra} cx=\"{}\" cy=\"{}\" r=\"{}\"/>",
                        el.id,
                        n(center.x),
                        n(center.y),
                        n(*radius)
                    );
                }
                Shape::Path(cmds) => {
                    let mut d = Vec::with_capacity(cmds.len());
                    for c in cmds {
                        d.push(match c {
                            PathCommand::MoveTo(p) => format!("M {} {}", n(p.x), n(p.y)),
                            PathCommand::LineTo(p) => format!("L {} {}", n(p.x), n(p.y)),
                            PathCommand::ArcTo { to, radius, sweep, .. } => {
                                format!("A {r} {r} 0 0 {} {} {}", u8::from(*sweep), n(to.x), n(to.y), r = n(*radius))
                            }
                            PathCommand::Close => "Z".to_string(),
                        });
                    }
                    let _ = writeln!(out, "    <path id=\"{}\"{extra} d=\"{}\"/>", el.id, d.join(" "));
                }
            }
        }
        out.push_str("  </g>\n");
    }
    out.push_str("</svg>\n");
    out
}

/// Same geometry as [`to_svg`] as DXF R12 entities (y pointing up), one DXF
/// layer per drawing layer.
pub fn to_dxf(drawing: &ExportedDrawing) -> String {
    let mut out = String::new();
    let flip = |p: &Point2<f64>| Point2::new(p.x, drawing.height - p.y);
    let mut pair = |code: u32, value: String| {
        let _ = writeln!(out, "{code}\n{value}");
    };
    pair(0, "SECTION".into());
    pair(2, "ENTITIES".into());
    for layer in &drawing.layers {
        for el in &layer.elements {
            match &el.shape {
                Shape::Circle { center, radius } => {
                    let c = flip(center);
                    pair(0, "CIRCLE".into());
                    pair(8, layer.name.into());
                    pair(10, n(c.x));
                    pair(20, n(c.y));
                    pair(30, "0".into());
                    pair(40, n(*radius));
                }
                Shape::Path(cmds) => {
                    let mut current: Option<Point2<f64>> = None;
                    let mut first: Option<Point2<f64>> = None;
                    for cmd in cmds {
                        match *cmd {
                            PathCommand::MoveTo(p) => {
                                current = Some(p);
                                first = Some(p);
                            }
                            PathCommand::LineTo(_) | PathCommand::Close if current.is_some() => {
                                let to = if let PathCommand::LineTo(p) = *cmd { p } else { first.expect("subpath start") };
                                let (a, b) = (flip(&current.expect("current point")), flip(&to));
                                pair(0, "LINE".into());
                                pair(8, layer.name.into());
                                pair(10, n(a.x));
                                pair(20, n(a.y));
                                pair(30, "0".into());
                                pair(11, n(b.x));
                                pair(21, n(b.y));
                                pair(31, "0".into());
                                current = Some(to);
                            }
                            PathCommand::ArcTo { to, center, radius, sweep } => {
                                let from = current.expect("arc start");
                                let (c, a, b) = (flip(&center), flip(&from), flip(&to));
                                let angle = |p: Point2<f64>| (p.y - c.y).atan2(p.x - c.x).to_degrees().rem_euclid(360.0);
                                // Clockwise on screen runs clockwise in y-up coordinates too;
                                // DXF arcs always run counter-clockwise.
                                let (start, end) = if sweep { (angle(b), angle(a)) } else { (angle(a), angle(b)) };
                                pair(0, "ARC".into());
                                pair(8, layer.name.into());
                                pair(10, n(c.x));
                                pair(20, n(c.y));
                                pair(30, "0".into());
                                pair(40, n(radius));
                                pair(50, n(start));
                                pair(51, n(end));
                                current = Some(to);
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
    }
    pair(0, "ENDSEC".into());
    pair(0, "EOF".into());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::tests::table_orthosis2;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dashes_span_the_segment() {
        let (a, b) = (Point2::new(0.0, 0.0), Point2::new(10.0, 0.0));
        let d = dash_segments(a, b, 2.0, 2.0);
        assert_eq!(d.len(), 3);
        assert_eq!(d[0].0, a);
        assert_eq!(d[2].1, b);
        assert_abs_diff_eq!((d[0].1 - d[0].0).norm(), 2.0 * 10.0 / 10.0, epsilon = 1e-12);
        assert_eq!(dash_segments(a, b, 2.0, 0.0), vec![(a, b)]);
        assert_eq!(dash_segments(a, b, 20.0, 2.0), vec![(a, b)]);
    }

    #[test]
    fn fillet_tangents_sit_on_both_edges() {
        let square = [Point2::new(0.0, 0.0), Point2::new(10.0, 0.0), Point2::new(10.0, 10.0), Point2::new(0.0, 10.0)];
        let cmds = filleted_path(&square, 1.0).unwrap();
        let arcs: Vec<_> = cmds.iter().filter(|c| matches!(c, PathCommand::ArcTo { .. })).collect();
        assert_eq!(arcs.len(), 4);
        if let PathCommand::ArcTo { to, center, .. } = arcs[0] {
            assert_abs_diff_eq!((to - center).norm(), 1.0, epsilon = 1e-12);
        }
        assert!(filleted_path(&square, 6.0).is_err());
    }

    #[test]
    fn style_guards() {
        let d = table_orthosis2();
        let eyelet = PatternStyle { eyelet_diameter_mm: 40.0, ..Default::default() };
        assert!(matches!(export_pattern(&d, &eyelet), Err(InterfaceError::StyleInfeasible(_))));
        let fillet = PatternStyle { fillet_radius_mm: 30.0, ..Default::default() };
        assert!(matches!(export_pattern(&d, &fillet), Err(InterfaceError::StyleInfeasible(_))));
        let negative = PatternStyle { tab_width_mm: -1.0, ..Default::default() };
        assert!(matches!(export_pattern(&d, &negative), Err(InterfaceError::StyleInfeasible(_))));
    }

    #[test]
    fn layer_counts() {
        let drawing = export_pattern(&table_orthosis2(), &PatternStyle::default()).unwrap();
        assert_eq!(drawing.layer("cut").unwrap().elements.len(), 5);
        assert_eq!(drawing.layer("eyelet").unwrap().elements.len(), 30);
        assert_eq!(drawing.layer("crease").unwrap().elements.len(), 5 * 11);
        assert_eq!(drawing.layer("tab").unwrap().elements.len(), 5 * 13);
        let dxf = to_dxf(&drawing);
        assert!(dxf.starts_with("0\nSECTION\n2\nENTITIES\n"));
        assert!(dxf.ends_with("0\nEOF\n"));
        assert_eq!(dxf.matches("\nCIRCLE\n").count(), 30);
    }
}
