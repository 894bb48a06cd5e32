//! Tables and JSON documents. CSV numbers use the shortest representation
//! that parses back to the same `f64`; tables printed for people use four
//! significant digits.

use scalefit_core::fit::HopRecord;
use scalefit_core::{ComputeOptimalPoint, FlatnessReport, IsoFlopCurve, Observation, ScalingLawParams};

/// Shortest round-trip scientific form, e.g. `1.44e7`.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Four significant digits. Plain notation between 0.001 and 99999.5.
pub fn sig4(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs();
    if mag == 0.0 {
        return "0".into();
    }
    if (1e-3..99999.5).contains(&mag) {
        let exponent = mag.log10().floor() as i32;
        let decimals = (3 - exponent).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // Rounding can carry into a fifth digit, e.g. 9999.7 -> 10000.
        if s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len() <= 4 {
            return s;
        }
    }
    format!("{x:.3e}")
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv output is utf-8")
}

pub const FRONTIER_HEADER: [&str; 4] = ["C", "N*", "D*", "r*"];

pub fn frontier_csv(points: &[ComputeOptimalPoint]) -> String {
    csv_table(
        &FRONTIER_HEADER,
        points.iter().map(|p| vec![num(p.compute), num(p.n_star), num(p.d_star), num(p.r_star)]),
    )
}

pub const FLATNESS_HEADER: [&str; 10] = ["C", "L*", "N1", "N2", "dN", "D1", "D2", "dD", "kappa", "truncated"];

pub fn flatness_csv(rows: &[FlatnessReport]) -> String {
    csv_table(
        &FLATNESS_HEADER,
        rows.iter().map(|r| {
            let mut v: Vec<String> =
                [r.compute, r.l_star, r.n1, r.n2, r.delta_n, r.d1, r.d2, r.delta_d, r.kappa]
                    .into_iter()
                    .map(num)
                    .collect();
            v.push(r.truncated.to_string());
            v
        }),
    )
}

/// Two numeric columns, e.g. `C,r*` or `C,M*`.
pub fn pairs_csv(x: &str, y: &str, pairs: &[(f64, f64)]) -> String {
    csv_table(&[x, y], pairs.iter().map(|&(a, b)| vec![num(a), num(b)]))
}

pub fn curves_csv(curves: &[IsoFlopCurve]) -> String {
    csv_table(
        &["C", "N", "D", "mean", "std"],
        curves.iter().flat_map(|c| {
            c.points.iter().map(|p| vec![num(c.compute), num(p.n), num(p.d), num(p.mean), num(p.std)])
        }),
    )
}

/// Per observation: value, prediction, relative error, and which side of the split it fell on.
pub fn residuals_csv<F>(observations: &[Observation], test_indices: &[usize], predict: F) -> String
where
    F: Fn(&Observation) -> f64,
{
    csv_table(
        &["N", "D", "observed", "predicted", "rel_error", "split"],
        observations.iter().enumerate().map(|(i, o)| {
            let pred = predict(o);
            let split = if test_indices.contains(&i) { "test" } else { "train" };
            vec![
                num(o.model_size),
                num(o.dataset_size),
                num(o.mean),
                num(pred),
                num(((pred - o.mean) / o.mean).abs()),
                split.into(),
            ]
        }),
    )
}

pub fn hop_trace_csv(trace: &[HopRecord]) -> String {
    csv_table(
        &["iteration", "objective", "best", "accepted"],
        trace.iter().map(|h| {
            vec![h.iteration.to_string(), num(h.objective), num(h.best), h.accepted.to_string()]
        }),
    )
}

fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for row in rows {
        out += &line(row.iter().map(String::as_str).collect());
    }
    out
}

pub fn frontier_table(points: &[ComputeOptimalPoint]) -> String {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec![sig4(p.compute), sig4(p.n_star), sig4(p.d_star), sig4(p.r_star)])
        .collect();
    text_table(&FRONTIER_HEADER, &rows)
}

pub fn flatness_table(rows: &[FlatnessReport]) -> String {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v: Vec<String> =
                [r.compute, r.l_star, r.n1, r.n2, r.delta_n, r.d1, r.d2, r.delta_d, r.kappa]
                    .into_iter()
                    .map(sig4)
                    .collect();
            v.push(if r.truncated { "yes".into() } else { "no".into() });
            v
        })
        .collect();
    text_table(&FLATNESS_HEADER, &cells)
}

pub fn params_table(p: &ScalingLawParams) -> String {
    let names = scalefit_core::fit::PARAM_NAMES;
    let values: Vec<String> = p.to_array().into_iter().map(sig4).collect();
    text_table(&names, &[values])
}

/// Pretty JSON with a trailing newline.
pub fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_round_trip() {
        for x in [1e18, 1.44e7, 0.1 + 0.2, 801.0, 3.95e-21, 6.0 * 1.1e9 * 2.3e10] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(1e18), "1e18");
        assert_eq!(num(1.44e7), "1.44e7");
    }

    #[test]
    fn four_significant_digits() {
        assert_eq!(sig4(801.2345), "801.2");
        assert_eq!(sig4(0.0074863), "0.007486");
        assert_eq!(sig4(1.44e7), "1.440e7");
        assert_eq!(sig4(9999.7), "1.000e4");
        assert_eq!(sig4(-2.5), "-2.500");
        assert_eq!(sig4(3.95e-21), "3.950e-21");
    }

    #[test]
    fn frontier_columns() {
        let p = ComputeOptimalPoint { compute: 1e18, n_star: 1.5e7, d_star: 1.1e10, r_star: 733.3, l_star: 2.0 };
        let csv = frontier_csv(&[p]);
        assert_eq!(csv, "C,N*,D*,r*\n1e18,1.5e7,1.1e10,7.333e2\n");
    }
}
