//! Reads exported SVG drawings back with an XML parser and re-measures them.

use kresling_orthosis::interface::pattern::{export_pattern, to_svg, PatternStyle};
use kresling_orthosis::sizing::OrthosisDesign;
use std::collections::HashMap;

pub type Pt = (f64, f64);

/// Vertices of every subpath of an SVG path (M, L, A and Z commands); arcs
/// contribute their end point.
pub fn subpaths(d: &str) -> Vec<Vec<Pt>> {
    let tokens: Vec<&str> = d.split_whitespace().collect();
    let mut out: Vec<Vec<Pt>> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        match tokens[i] {
            "M" | "L" => {
                let p = (tokens[i + 1].parse().unwrap(), tokens[i + 2].parse().unwrap());
                if tokens[i] == "M" {
                    out.push(Vec::new());
                }
                out.last_mut().unwrap().push(p);
                i += 3;
            }
            "A" => {
                let p = (tokens[i + 6].parse().unwrap(), tokens[i + 7].parse().unwrap());
                out.last_mut().unwrap().push(p);
                i += 8;
            }
            "Z" => i += 1,
            other => panic!("unexpected path command {other}"),
        }
    }
    out
}

pub fn dist(a: Pt, b: Pt) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Crease from the first to the last point of a dashed path.
pub fn span(d: &str) -> (Pt, Pt, usize) {
    let parts = subpaths(d);
    (parts[0][0], *parts.last().unwrap().last().unwrap(), parts.len())
}

pub struct Parsed {
    pub groups: Vec<String>,
    /// Path data by element id.
    pub paths: HashMap<String, String>,
    pub circles: Vec<(usize, usize)>,
}

pub fn parse(svg: &str) -> Parsed {
    let doc = roxmltree::Document::parse(svg).unwrap();
    let root = doc.root_element();
    assert_eq!(root.attribute("version"), Some("1.1"));
    assert!(root.attribute("width").unwrap().ends_with("mm"));
    let mut parsed = Parsed { groups: Vec::new(), paths: HashMap::new(), circles: Vec::new() };
    for g in root.children().filter(|n| n.has_tag_name("g")) {
        let layer = g.attribute("id").unwrap().to_string();
        for el in g.children().filter(|n| n.is_element()) {
            let id = el.attribute("id").unwrap().to_string();
            if el.has_tag_name("circle") {
                assert_eq!(layer, "eyelet");
                let section = el.attribute("data-section").unwrap().parse().unwrap();
                let cell = el.attribute("data-cell").unwrap().parse().unwrap();
                parsed.circles.push((section, cell));
            } else {
                parsed.paths.insert(id, el.attribute("d").unwrap().to_string());
            }
        }
        parsed.groups.push(layer);
    }
    parsed
}

pub fn sharp_style() -> PatternStyle {
    PatternStyle { fillet_radius_mm: 0.0, ..PatternStyle::default() }
}

/// Exports `design` without fillets and checks every cell edge, valley
/// perforation and eyelet. Returns the number of edges measured.
pub fn check_parse_back(design: &OrthosisDesign) -> usize {
    let mut measured = 0;
    let svg = to_svg(&export_pattern(design, &sharp_style()).unwrap());
    let parsed = parse(&svg);
    assert_eq!(parsed.groups, ["cut", "crease", "eyelet", "tab"]);
    for (i, unit) in design.units().iter().enumerate() {
        let s = i + 1;
        let edge = |id: String| {
            let (a, b, _) = span(&parsed.paths[&id]);
            dist(a, b)
        };
        let outline = subpaths(&parsed.paths[&format!("s{s}-outline")]).remove(0);
        let free_edge = dist(*outline.last().unwrap(), outline[0]);
        for k in 0..6 {
            let left = if k == 0 { free_edge } else { edge(format!("s{s}-e{k}-slanted")) };
            let right = if k == 5 { edge(format!("s{s}-closure")) } else { edge(format!("s{s}-e{}-slanted", k + 1)) };
            let bottom = edge(format!("s{s}-c{k}-bottom"));
            let top = edge(format!("s{s}-c{k}-top"));
            for (got, want, name) in [(bottom, unit.a1(), "a1"), (top, unit.a2(), "a2"), (left, unit.b(), "b"), (right, unit.b(), "b")] {
                assert!((got - want).abs() < 1e-6, "section {s} cell {k} {name}: {got} vs {want}");
                measured += 1;
            }
            let (_, _, dashes) = span(&parsed.paths[&format!("s{s}-c{k}-valley")]);
            assert!(dashes > 1, "section {s} cell {k}: valley is not perforated");
        }
        let eyelets: Vec<usize> = parsed.circles.iter().filter(|c| c.0 == s).map(|c| c.1).collect();
        assert_eq!(eyelets, [0, 1, 2, 3, 4, 5]);
    }
    measured
}
