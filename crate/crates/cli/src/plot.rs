//! Static SVG line charts of per-epoch training curves.

use mcda_core::mcda::TrainLog;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 300.0;
const MARGIN: f64 = 48.0;

/// One chart: `values[i]` is plotted at epoch `epochs[i]`; `None` leaves a
/// gap. The y axis spans [0, 1].
pub fn line_chart(title: &str, epochs: &[usize], values: &[Option<f64>]) -> String {
    let max_epoch = epochs.iter().copied().max().unwrap_or(0).max(1) as f64;
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let px = |e: usize| MARGIN + plot_w * e as f64 / max_epoch;
    let py = |v: f64| MARGIN + plot_h * (1.0 - v.clamp(0.0, 1.0));

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    );
    svg.push_str(&format!(
        "<polyline points=\"{l},{t} {l},{b} {r},{b}\" fill=\"none\" stroke=\"black\"/>\n",
        l = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    ));
    for tick in [0.0, 0.5, 1.0] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">{tick:.1}</text>\n",
            MARGIN - 6.0,
            py(tick) + 3.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">epoch (0 to {})</text>\n",
        WIDTH / 2.0,
        HEIGHT - MARGIN / 3.0,
        max_epoch as usize
    ));

    let mut segment: Vec<String> = Vec::new();
    let flush = |segment: &mut Vec<String>, svg: &mut String| {
        if segment.len() > 1 {
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\"/>\n",
                segment.join(" ")
            ));
        }
        segment.clear();
    };
    for (&e, v) in epochs.iter().zip(values) {
        match v {
            Some(v) if v.is_finite() => segment.push(format!("{:.2},{:.2}", px(e), py(*v))),
            _ => flush(&mut segment, &mut svg),
        }
    }
    flush(&mut segment, &mut svg);
    for (&e, v) in epochs.iter().zip(values) {
        if let Some(v) = v.filter(|v| v.is_finite()) {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\"/>\n",
                px(e),
                py(v)
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// The three curves of a run, as (file stem, svg).
pub fn training_curves(log: &TrainLog) -> Vec<(&'static str, String)> {
    let epochs: Vec<usize> = log.records.iter().map(|r| r.epoch).collect();
    let title = |what: &str| format!("{} seed {}: {what}", log.method, log.seed);
    vec![
        (
            "gated_frac",
            line_chart(
                &title("fraction of targets below the entropy threshold"),
                &epochs,
                &log.records.iter().map(|r| Some(r.gated_frac)).collect::<Vec<_>>(),
            ),
        ),
        (
            "pl_acc",
            line_chart(
                &title("pseudo-label accuracy on gated targets"),
                &epochs,
                &log.records.iter().map(|r| r.pl_acc).collect::<Vec<_>>(),
            ),
        ),
        (
            "acc_tgt_mean",
            line_chart(
                &title("mean target accuracy"),
                &epochs,
                &log.records.iter().map(|r| Some(r.acc_tgt_mean)).collect::<Vec<_>>(),
            ),
        ),
    ]
}
