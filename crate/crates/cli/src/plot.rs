use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use conceptbench::experiments::{read_results_csv, summarize_records, write_summary_csv, SummaryRow};
use plotters::prelude::*;
use plotters::style::FontStyle;

use crate::error::CliError;

const SIZE: (u32, u32) = (800, 500);
const FONT_ENV: &str = "CONCEPTBENCH_FONT";
const FONT_CANDIDATES: [&str; 5] = [
    "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
    "/usr/share/fonts/TTF/DejaVuSans.ttf",
    "/usr/share/fonts/dejavu/DejaVuSans.ttf",
    "/usr/share/fonts/truetype/liberation/LiberationSans-Regular.ttf",
    "/Library/Fonts/Arial.ttf",
];

/// Registers the first readable font; without one figures carry no text.
fn has_font() -> bool {
    static FONT: OnceLock<bool> = OnceLock::new();
    *FONT.get_or_init(|| {
        let mut paths: Vec<String> = std::env::var(FONT_ENV).ok().into_iter().collect();
        paths.extend(FONT_CANDIDATES.iter().map(|s| s.to_string()));
        paths.iter().any(|p| match fs::read(p) {
            Ok(bytes) => plotters::style::register_font("sans-serif", FontStyle::Normal, Box::leak(bytes.into_boxed_slice())).is_ok(),
            Err(_) => false,
        })
    })
}

fn plot_err(e: impl std::fmt::Display) -> CliError {
    CliError::Plot(e.to_string())
}

fn file_stem(parts: &[&str]) -> String {
    parts
        .iter()
        .filter(|p| !p.is_empty())
        .map(|p| p.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect::<String>())
        .collect::<Vec<_>>()
        .join("__")
}

type Series = (String, Vec<(f64, f64)>);

fn line_chart(path: &Path, title: &str, x_desc: &str, series: &[Series], log_x: bool) -> Result<(), CliError> {
    let text = has_font();
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let xs: Vec<f64> = series.iter().flat_map(|(_, p)| p.iter().map(|&(x, _)| tx(x))).collect();
    let (mut lo, mut hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = (hi - lo) * 0.03;
    let root = BitMapBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut builder = ChartBuilder::on(&root);
    builder.margin(15).x_label_area_size(if text { 40 } else { 5 }).y_label_area_size(if text { 50 } else { 5 });
    if text {
        builder.caption(title, ("sans-serif", 20));
    }
    let mut chart = builder.build_cartesian_2d(lo - pad..hi + pad, 0f64..1.02).map_err(plot_err)?;
    let fmt_x = |v: &f64| if log_x { format!("{:.3}", 10f64.powf(*v)) } else { format!("{v:.0}") };
    let mut mesh = chart.configure_mesh();
    if text {
        mesh.x_desc(x_desc).y_desc("accuracy").x_label_formatter(&fmt_x).label_style(("sans-serif", 13));
    } else {
        mesh.x_labels(0).y_labels(0);
    }
    mesh.draw().map_err(plot_err)?;
    for (i, (name, points)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (tx(x), y)).collect();
        let drawn = chart.draw_series(LineSeries::new(pts.clone(), color.stroke_width(2))).map_err(plot_err)?;
        if text {
            drawn.label(name.as_str()).legend(move |(x, y)| PathElement::new([(x, y), (x + 18, y)], color.stroke_width(2)));
        }
        chart.draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled()))).map_err(plot_err)?;
    }
    if text {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .label_font(("sans-serif", 13))
            .draw()
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)
}

/// Grouped bars; `values[m][g]` is the height of method `m` in group `g`.
fn bar_chart(path: &Path, title: &str, groups: &[String], methods: &[String], values: &[Vec<Option<f64>>]) -> Result<(), CliError> {
    let text = has_font();
    let g = groups.len() as f64;
    let root = BitMapBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut builder = ChartBuilder::on(&root);
    builder.margin(15).x_label_area_size(if text { 40 } else { 5 }).y_label_area_size(if text { 50 } else { 5 });
    if text {
        builder.caption(title, ("sans-serif", 20));
    }
    let mut chart = builder.build_cartesian_2d(-0.5f64..g - 0.5, 0f64..1.02).map_err(plot_err)?;
    let fmt_x = |v: &f64| {
        let i = v.round();
        if (v - i).abs() < 1e-6 && i >= 0.0 && (i as usize) < groups.len() {
            groups[i as usize].clone()
        } else {
            String::new()
        }
    };
    let mut mesh = chart.configure_mesh();
    mesh.disable_x_mesh();
    if text {
        mesh.y_desc("accuracy").x_labels(groups.len() * 2 + 1).x_label_formatter(&fmt_x).label_style(("sans-serif", 13));
    } else {
        mesh.x_labels(0).y_labels(0);
    }
    mesh.draw().map_err(plot_err)?;
    let width = 0.8 / methods.len().max(1) as f64;
    for (m, name) in methods.iter().enumerate() {
        let color = Palette99::pick(m).to_rgba();
        let bars: Vec<_> = values[m]
            .iter()
            .enumerate()
            .filter_map(|(gi, v)| v.map(|v| (gi, v)))
            .map(|(gi, v)| {
                let x0 = gi as f64 - 0.4 + m as f64 * width;
                Rectangle::new([(x0, 0.0), (x0 + width * 0.95, v)], color.filled())
            })
            .collect();
        let drawn = chart.draw_series(bars).map_err(plot_err)?;
        if text {
            drawn.label(name.as_str()).legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 12, y + 5)], color.filled()));
        }
    }
    if text {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .label_font(("sans-serif", 13))
            .draw()
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)
}

fn ordered<'a>(rows: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rows {
        if !out.iter().any(|o| o == r) {
            out.push(r.to_string());
        }
    }
    out
}

fn is_concept(name: &str) -> bool {
    name != "average" && name != "task"
}

/// Draws every figure the results support and writes the tidy rows behind
/// each one next to it. Returns the image paths.
pub fn emit_plots(results_csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let records = read_results_csv(results_csv)?;
    if records.is_empty() {
        return Err(CliError::Validation(format!("{} has no rows to plot", results_csv.display())));
    }
    let summary = summarize_records(&records)?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut emit = |stem: String, rows: Vec<&SummaryRow>, draw: &dyn Fn(&Path) -> Result<(), CliError>| -> Result<(), CliError> {
        let png = out_dir.join(format!("{stem}.png"));
        draw(&png)?;
        let owned: Vec<SummaryRow> = rows.into_iter().cloned().collect();
        write_summary_csv(&out_dir.join(format!("{stem}.csv")), &owned)?;
        written.push(png);
        Ok(())
    };

    let mut by_figure: BTreeMap<(String, String, String), Vec<&SummaryRow>> = BTreeMap::new();
    for r in &summary {
        let key = match r.experiment.as_str() {
            "data_efficiency" => (r.experiment.clone(), r.dataset.clone(), String::new()),
            _ => (r.experiment.clone(), r.dataset.clone(), r.setup.clone()),
        };
        by_figure.entry(key).or_default().push(r);
    }

    for ((experiment, dataset, setup), rows) in by_figure {
        match experiment.as_str() {
            "data_efficiency" => {
                let rows: Vec<&SummaryRow> = rows.into_iter().filter(|r| r.concept == "average").collect();
                let series: Vec<Series> = ordered(rows.iter().map(|r| r.method.as_str()))
                    .into_iter()
                    .map(|m| {
                        let pts = rows.iter().filter(|r| r.method == m).map(|r| (r.index, r.median)).collect();
                        (m, pts)
                    })
                    .collect();
                let title = format!("{dataset}: average concept accuracy");
                emit(file_stem(&[&experiment, &dataset]), rows, &|p| line_chart(p, &title, "labelled fraction", &series, true))?;
            }
            "concept_task_dependence" => {
                let methods = ordered(rows.iter().map(|r| r.method.as_str()));
                let mut groups = ordered(rows.iter().map(|r| r.concept.as_str()).filter(|c| is_concept(c)));
                groups.push("task".into());
                let rows: Vec<&SummaryRow> = rows.into_iter().filter(|r| r.concept != "average").collect();
                // Methods are compared at their largest index (final point).
                let values: Vec<Vec<Option<f64>>> = methods
                    .iter()
                    .map(|m| {
                        groups
                            .iter()
                            .map(|g| {
                                rows.iter()
                                    .filter(|r| &r.method == m && &r.concept == g)
                                    .max_by(|a, b| a.index.total_cmp(&b.index))
                                    .map(|r| r.median)
                            })
                            .collect()
                    })
                    .collect();
                let title = format!("{dataset} / {setup}");
                emit(file_stem(&[&experiment, &dataset, &setup]), rows, &|p| bar_chart(p, &title, &groups, &methods, &values))?;
            }
            _ => {
                for m in ordered(rows.iter().map(|r| r.method.as_str())) {
                    let mrows: Vec<&SummaryRow> = rows.iter().copied().filter(|r| r.method == m && is_concept(&r.concept)).collect();
                    let series: Vec<Series> = ordered(mrows.iter().map(|r| r.concept.as_str()))
                        .into_iter()
                        .map(|c| {
                            let pts = mrows.iter().filter(|r| r.concept == c).map(|r| (r.index, r.median)).collect();
                            (c, pts)
                        })
                        .collect();
                    let title = format!("{setup}: {m}");
                    emit(file_stem(&[&experiment, &dataset, &setup, &m]), mrows, &|p| line_chart(p, &title, "step", &series, false))?;
                }
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_are_filesystem_safe() {
        assert_eq!(file_stem(&["a b", "", "c/d"]), "a_b__c_d");
    }

    #[test]
    fn empty_results_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("results.csv");
        conceptbench::experiments::write_results_csv(&p, &[]).unwrap();
        let e = emit_plots(&p, &dir.path().join("plots")).unwrap_err();
        assert!(e.to_string().contains("no rows"));
    }
}
