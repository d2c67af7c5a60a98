use forage::report::{
    color_ramp, heatmap_cells, histogram_bins, render_heatmap, render_histogram, render_scatter, FigureKind,
    FigureSpec,
};
use forage::stats::{histogram_counts, LinearFit};
use proptest::prelude::*;
use roxmltree::Document;

fn spec(kind: FigureKind) -> FigureSpec {
    FigureSpec::new(kind, "t", "x", "y", "f.svg")
}

fn count(doc: &Document, tag: &str) -> usize {
    doc.descendants().filter(|n| n.has_tag_name(tag)).count()
}

#[test]
fn scatter_has_one_circle_per_point_and_a_flat_fit_line() {
    let pts = [(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)];
    let svg = render_scatter(&pts, LinearFit { slope: 0.0, intercept: 1.0 }, &spec(FigureKind::Scatter)).unwrap();
    let doc = Document::parse(&svg).unwrap();
    assert_eq!(count(&doc, "circle"), 3);
    let lines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("line")).collect();
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0].attribute("y1"), lines[0].attribute("y2"));
}

#[test]
fn root_carries_size_and_viewbox() {
    let svg = render_histogram(&[1.0, 2.0], 4, &spec(FigureKind::Histogram)).unwrap();
    let doc = Document::parse(&svg).unwrap();
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    assert_eq!(root.attribute("width"), Some("640"));
    assert_eq!(root.attribute("height"), Some("480"));
    assert_eq!(root.attribute("viewBox"), Some("0 0 640 480"));
}

#[test]
fn histogram_of_four_points_in_two_bins() {
    let s = spec(FigureKind::Histogram);
    let (lo, hi, counts) = histogram_bins(&[0.0, 1.0, 2.0, 3.0], 2, &s);
    assert_eq!((lo, hi), (0.0, 3.0));
    assert_eq!(counts, vec![2, 2]);
    let (_, _, same) = histogram_bins(&[5.0; 7], 5, &s);
    assert_eq!(same.iter().filter(|&&c| c > 0).count(), 1);
    assert_eq!(same.iter().sum::<usize>(), 7);
    let svg = render_histogram(&[0.0, 1.0, 2.0, 3.0], 2, &s).unwrap();
    let doc = Document::parse(&svg).unwrap();
    let bars = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("bar"))
        .count();
    assert_eq!(bars, 2);
}

#[test]
fn heatmap_single_agent_lights_one_cell() {
    let svg = render_heatmap(&[(2000.0, 0.3, 42.0)], 20, 20, &spec(FigureKind::Heatmap)).unwrap();
    let doc = Document::parse(&svg).unwrap();
    let lit = doc.descendants().filter(|n| n.attribute("class") == Some("cell")).count();
    let empty = doc.descendants().filter(|n| n.attribute("class") == Some("empty")).count();
    assert_eq!(lit, 1);
    assert_eq!(empty, 399);
}

#[test]
fn heatmap_averages_agents_sharing_a_cell() {
    let cells = heatmap_cells(&[(1.0, 1.0, 10.0), (1.1, 1.1, 20.0), (9.0, 9.0, 0.0)], 2, 2, (0.0, 10.0), (0.0, 10.0));
    assert_eq!(cells, vec![Some(15.0), None, None, Some(0.0)]);
}

#[test]
fn heatmap_with_no_data_is_all_gray() {
    let svg = render_heatmap(&[], 3, 2, &spec(FigureKind::Heatmap)).unwrap();
    let doc = Document::parse(&svg).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.attribute("class") == Some("empty")).count(), 6);
}

/// Darkness (lower channel sum) must grow with the cell mean.
#[test]
fn heatmap_darkens_as_culture_grows() {
    let mut s = spec(FigureKind::Heatmap);
    s.x_bounds = Some((1000.0, 3000.0));
    s.y_bounds = Some((0.2, 0.5));
    let ny = 10;
    let pts: Vec<(f64, f64, f64)> = (0..ny)
        .map(|i| {
            let p = 0.2 + 0.3 * (i as f64 + 0.5) / ny as f64;
            (2000.0, p, 100.0 * (1.0 - p))
        })
        .collect();
    let svg = render_heatmap(&pts, 1, ny, &s).unwrap();
    let doc = Document::parse(&svg).unwrap();
    let mut brightness = Vec::new();
    for iy in 0..ny {
        let id = format!("cell-0-{iy}");
        let node = doc.descendants().find(|n| n.attribute("id") == Some(id.as_str())).unwrap();
        let fill = node.attribute("fill").unwrap();
        let rgb = [1, 3, 5].map(|i| u32::from_str_radix(&fill[i..i + 2], 16).unwrap());
        brightness.push(rgb.iter().sum::<u32>());
    }
    // rows go up in p, so culture falls and brightness must not fall
    for w in brightness.windows(2) {
        assert!(w[1] >= w[0], "{brightness:?}");
    }
    assert!(brightness[ny - 1] > brightness[0]);
}

#[test]
fn rendering_is_deterministic() {
    let pts: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, (i * i) as f64 / 7.0)).collect();
    let fit = LinearFit { slope: 2.0, intercept: -3.0 };
    let s = spec(FigureKind::Scatter);
    assert_eq!(render_scatter(&pts, fit, &s).unwrap(), render_scatter(&pts, fit, &s).unwrap());
}

proptest! {
    #[test]
    fn binning_conserves_counts(values in prop::collection::vec(-1e3f64..1e3, 1..200), bins in 1usize..40) {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let counts = histogram_counts(&values, bins, lo, hi);
        prop_assert_eq!(counts.len(), bins);
        prop_assert_eq!(counts.iter().sum::<usize>(), values.len());
    }

    #[test]
    fn color_ramp_is_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (c0, c1) = (color_ramp(lo), color_ramp(hi));
        prop_assert!(c1.0 <= c0.0 && c1.1 <= c0.1 && c1.2 <= c0.2);
    }

    #[test]
    fn every_figure_is_well_formed(
        pts in prop::collection::vec((0.0f64..3000.0, 0.0f64..1.0, 0.0f64..365.0), 1..60),
    ) {
        let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p.1, p.2)).collect();
        let scatter = render_scatter(&xy, LinearFit { slope: -100.0, intercept: 200.0 }, &spec(FigureKind::Scatter)).unwrap();
        let values: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let hist = render_histogram(&values, 20, &spec(FigureKind::Histogram)).unwrap();
        let heat = render_heatmap(&pts, 20, 20, &spec(FigureKind::Heatmap)).unwrap();
        for svg in [&scatter, &hist, &heat] {
            prop_assert!(Document::parse(svg).is_ok());
        }
        let doc = Document::parse(&scatter).unwrap();
        prop_assert_eq!(count(&doc, "circle"), pts.len());
    }
}
