use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::attributes::AttributeDistribution;
use crate::evaluation::fmt_num;

/// One `set,attribute,category,proportion` row per category, then a
/// blank line and an `attribute,tv_distance` block.
pub fn diversity_csv(sets: &[(&str, &AttributeDistribution)], tv: &BTreeMap<String, f64>) -> String {
    let mut s = String::from("set,attribute,category,proportion\n");
    for (name, dist) in sets {
        for (attr, cats) in dist.attributes() {
            for (cat, p) in cats {
                let _ = writeln!(s, "{name},{attr},{cat},{}", fmt_num(*p));
            }
        }
    }
    if !tv.is_empty() {
        s.push_str("\nattribute,tv_distance\n");
        for (attr, v) in tv {
            let _ = writeln!(s, "{attr},{}", fmt_num(*v));
        }
    }
    s
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Scatter plot of 2-D points coloured by group index.
pub fn scatter_svg(points: &[[f64; 2]], groups: &[usize], names: &[&str]) -> String {
    let (w, h, m) = (480.0, 480.0, 30.0);
    let bound = |k: usize| {
        points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[k]), hi.max(p[k])))
    };
    let ((x0, x1), (y0, y1)) = (bound(0), bound(1));
    let sx = |v: f64| m + (w - 2.0 * m) * if x1 > x0 { (v - x0) / (x1 - x0) } else { 0.5 };
    let sy = |v: f64| h - m - (h - 2.0 * m) * if y1 > y0 { (v - y0) / (y1 - y0) } else { 0.5 };
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for (i, p) in points.iter().enumerate() {
        let g = groups.get(i).copied().unwrap_or(0);
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#, sx(p[0]), sy(p[1]), COLORS[g % COLORS.len()]);
    }
    for (g, name) in names.iter().enumerate() {
        let _ = writeln!(s, r#"<text x="{m}" y="{}" fill="{}">{name}</text>"#, 16.0 + 14.0 * g as f64, COLORS[g % COLORS.len()]);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diversity::{compare_distributions, records_from_counts, summarize_distribution, BASELINE_COUNTS, ENHANCED_COUNTS};

    #[test]
    fn csv_layout() {
        let (g, a, e) = BASELINE_COUNTS;
        let base = summarize_distribution(&records_from_counts(&g, &a, &e).unwrap()).unwrap();
        let (g, a, e) = ENHANCED_COUNTS;
        let enh = summarize_distribution(&records_from_counts(&g, &a, &e).unwrap()).unwrap();
        let tv = compare_distributions(&base, &enh).unwrap();
        let csv = diversity_csv(&[("baseline", &base), ("enhanced", &enh)], &tv);
        assert!(csv.starts_with("set,attribute,category,proportion\nbaseline,age_bucket,18-30,0.61\n"));
        assert!(csv.contains("baseline,perceived_gender,M,0.73\n"));
        assert!(csv.contains("\nattribute,tv_distance\n"));
        assert!(csv.contains("perceived_gender,0.13\n"));
        assert_eq!(csv.lines().count(), 1 + 2 * 11 + 2 + 3);
    }
}
