//! Deterministic SVG rendering of the combined graph of a rigid system:
//! one polyline per component, dashed verticals at the switch numbers.

use num::Zero;
use pgn::plfun::PLFun;
use pgn::rat::{self, Rat};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 40.0;

pub fn render(components: &[PLFun], switch_numbers: &[Rat], mesh: &Rat) -> String {
    let q0 = components
        .iter()
        .map(|f| f.q0.clone())
        .min()
        .unwrap_or_else(Rat::zero);
    let last = switch_numbers.last().cloned().unwrap_or_else(|| {
        components
            .iter()
            .filter_map(|f| f.domain_end())
            .max()
            .unwrap_or_else(|| &q0 + rat::rat_i64(10))
    });
    let qmax = &last + rat::rat_i64(2) * mesh;
    let x0 = rat::rat_to_f64(&q0);
    let x1 = rat::rat_to_f64(&qmax).max(x0 + 1.0);
    // Components live in [0, qmax]; use the top component's maximum.
    let mut vmax = 1.0f64;
    for f in components {
        if let Ok(v) = f.eval(&qmax) {
            vmax = vmax.max(rat::rat_to_f64(&v));
        }
    }
    let sx = |q: f64| MARGIN + (q - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |v: f64| H - MARGIN - v / vmax * (H - 2.0 * MARGIN);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n"
    ));
    out.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    // Axes.
    out.push_str(&format!(
        "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        sx(x0),
        sy(0.0),
        sx(x1),
        sy(0.0)
    ));
    out.push_str(&format!(
        "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        sx(x0),
        sy(0.0),
        sx(x0),
        sy(vmax)
    ));
    // Dashed verticals at the switch numbers.
    for q in switch_numbers {
        let x = sx(rat::rat_to_f64(q));
        out.push_str(&format!(
            "  <line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"#999\" \
             stroke-dasharray=\"4 3\"/>\n",
            sy(0.0),
            sy(vmax)
        ));
        out.push_str(&format!(
            "  <text x=\"{x}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">q={}</text>\n",
            H - MARGIN / 2.0,
            rat::fmt_rat(q)
        ));
    }
    // One polyline per component.
    for (j, f) in components.iter().enumerate() {
        let mut qs: Vec<Rat> = vec![q0.clone()];
        for b in f.breakpoints() {
            if b > q0 && b < qmax {
                qs.push(b);
            }
        }
        qs.push(qmax.clone());
        qs.sort();
        qs.dedup();
        let pts: Vec<String> = qs
            .iter()
            .filter_map(|q| {
                f.eval(q).ok().map(|v| {
                    format!(
                        "{:.2},{:.2}",
                        sx(rat::rat_to_f64(q)),
                        sy(rat::rat_to_f64(&v))
                    )
                })
            })
            .collect();
        out.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            PALETTE[j % PALETTE.len()],
            pts.join(" ")
        ));
    }
    out.push_str("</svg>\n");
    out
}
