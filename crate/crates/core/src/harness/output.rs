use std::path::Path;

use plotters::prelude::*;

use super::sweep::{ResultRow, SweepTable};
use crate::error::{Error, Result};
use crate::model::Scheme;

pub const CSV_HEADER: [&str; 12] = [
    "scheme",
    "seed",
    "param",
    "value",
    "total_energy_j",
    "e1_j",
    "e2_j",
    "e20_j",
    "e3_j",
    "outer_iters",
    "feasible",
    "wall_ms",
];

fn record(r: &ResultRow) -> [String; 12] {
    [
        r.scheme.label().to_string(),
        r.seed.map_or_else(|| "median".to_string(), |s| s.to_string()),
        r.param.name().to_string(),
        r.value.to_string(),
        r.total_energy_j.to_string(),
        r.e1_j.to_string(),
        r.e2_j.to_string(),
        r.e20_j.to_string(),
        r.e3_j.to_string(),
        r.outer_iters.to_string(),
        r.feasible.to_string(),
        r.wall_ms.map_or_else(String::new, |w| format!("{w:.3}")),
    ]
}

fn output_err(e: impl std::fmt::Display) -> Error {
    Error::Output(e.to_string())
}

/// CSV text of `table`, header first.
pub fn to_csv(table: &SweepTable) -> Result<String> {
    if table.rows.is_empty() {
        return Err(Error::Output("no rows to write".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(output_err)?;
    for r in &table.rows {
        w.write_record(record(r)).map_err(output_err)?;
    }
    String::from_utf8(w.into_inner().map_err(output_err)?).map_err(output_err)
}

pub fn write_csv(table: &SweepTable, path: &Path) -> Result<()> {
    let text = to_csv(table)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Line chart of median energy against the swept value, one series per
/// scheme, written as SVG. Infeasible medians are left out.
pub fn write_svg(table: &SweepTable, path: &Path) -> Result<()> {
    let Some(first) = table.rows.first() else {
        return Err(Error::Output("no rows to plot".into()));
    };
    let param = first.param;
    let series: Vec<(Scheme, Vec<(f64, f64)>)> = Scheme::ALL
        .iter()
        .map(|&s| (s, table.medians(s).into_iter().filter(|(_, e)| e.is_finite()).collect::<Vec<_>>()))
        .filter(|(_, pts)| !pts.is_empty())
        .collect();
    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return Err(Error::Output("no feasible medians to plot".into()));
    }
    let pad_x = if x1 > x0 { 0.05 * (x1 - x0) } else { 0.5 * x0.abs().max(1.0) };
    let pad_y = if y1 > y0 { 0.1 * (y1 - y0) } else { 0.1 * y0.abs().max(1e-3) };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }

    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(output_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("Median energy vs {}", param.name()), ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d((x0 - pad_x)..(x1 + pad_x), (y0 - pad_y).max(0.0)..(y1 + pad_y))
        .map_err(output_err)?;
    chart
        .configure_mesh()
        .x_desc(param.name())
        .y_desc("total energy (J)")
        .draw()
        .map_err(output_err)?;
    let colors = [RED, BLUE, GREEN];
    for ((scheme, pts), color) in series.iter().zip(colors) {
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(output_err)?
            .label(scheme.label())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
        chart.draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled()))).map_err(output_err)?;
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.8))
        .draw()
        .map_err(output_err)?;
    root.present().map_err(output_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::SweepParam;

    fn table() -> SweepTable {
        let mut rows = Vec::new();
        for (i, v) in [20.0, 30.0].into_iter().enumerate() {
            let r = ResultRow {
                scheme: Scheme::Sdma,
                seed: Some(0),
                param: SweepParam::PMaxDbm,
                value: v,
                total_energy_j: 2.0 - i as f64,
                e1_j: 1.0 - i as f64,
                e2_j: 0.5,
                e20_j: 0.0,
                e3_j: 0.5,
                outer_iters: 3,
                feasible: true,
                wall_ms: None,
            };
            rows.push(r.clone());
            rows.push(ResultRow { seed: None, ..r });
        }
        SweepTable { rows }
    }

    #[test]
    fn header_exact() {
        let text = to_csv(&table()).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(first, "scheme,seed,param,value,total_energy_j,e1_j,e2_j,e20_j,e3_j,outer_iters,feasible,wall_ms");
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains("SDMA,median,p_max_dbm,30,1,0,0.5,0,0.5,3,true,"));
        assert!(to_csv(&SweepTable::default()).is_err());
    }

    #[test]
    fn files_written() {
        let dir = std::env::temp_dir().join(format!("semcom-out-{}", std::process::id()));
        let csv_path = dir.join("t.csv");
        let svg_path = dir.join("t.svg");
        write_csv(&table(), &csv_path).unwrap();
        write_svg(&table(), &svg_path).unwrap();
        let svg = std::fs::read_to_string(&svg_path).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("SDMA"));
        assert_eq!(std::fs::read_to_string(&csv_path).unwrap(), to_csv(&table()).unwrap());
        std::fs::remove_dir_all(dir).unwrap();
    }
}
