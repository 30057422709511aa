//! The experiments behind each subcommand, separated from argument parsing
//! so they can be driven directly from tests.

use proxyid::design::{design_size, DesignLibrary};
use proxyid::matrix::fmt_sci;
use proxyid::proxy::{
    bound_global, bound_proposition, bound_simplified, build_proxy_id, decide_c, max_errors_on_gamma,
    rowwise_error_stats, ProxyID,
};
use proxyid::sampling::{sample_ball, sample_shell, SeededRng};
use proxyid::{PointSet, Result, RunConfig, ShellGeometry};
use serde::Serialize;

use crate::output::Csv;

pub const SEED_COMPRESS: u64 = 1;
pub const SEED_ROWBOUNDS: u64 = 2;
pub const SEED_SWEEP: u64 = 3;
pub const SEED_Y0: u64 = 4;

/// Source set and ID parameters shared by the figure experiments.
#[derive(Clone, Debug, Serialize)]
pub struct ReferenceParams {
    pub r1: f64,
    pub r2: f64,
    pub eps: f64,
    pub c_qr: f64,
    pub n_x0: usize,
    pub c: Option<usize>,
    pub seed: u64,
    pub gamma_samples: usize,
}

impl ReferenceParams {
    /// r1 = 1, r2 = 2, ε = 1e-6, C_qr = 2, 2000 sources, c = 30.
    pub fn reference(seed: u64) -> Self {
        Self {
            r1: 1.0,
            r2: 2.0,
            eps: 1e-6,
            c_qr: 2.0,
            n_x0: 2000,
            c: Some(30),
            seed,
            gamma_samples: proxyid::proxy::GAMMA_SAMPLES,
        }
    }

    pub fn geometry(&self) -> Result<ShellGeometry> {
        ShellGeometry::new(self.r1, self.r2)
    }

    pub fn config(&self) -> Result<RunConfig> {
        let cfg = RunConfig::new(self.geometry()?, self.eps, self.c_qr, self.seed)?;
        Ok(match self.c {
            Some(c) => cfg.with_c(c),
            None => cfg,
        })
    }

    /// Uniform sources in B(0, r1) drawn from the seed.
    pub fn sources(&self) -> PointSet {
        sample_ball(self.n_x0, self.r1, &mut SeededRng::new(self.seed)).with_label("x0")
    }
}

/// Per-row maxima over Γ against the row bound.
#[derive(Clone, Debug, PartialEq)]
pub struct RowBound {
    pub row: usize,
    pub is_skeleton: bool,
    pub max_ei_gamma: f64,
    pub bound_prop: f64,
    /// bound / measured; infinite for skeleton rows.
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RatioSummary {
    pub rows: usize,
    pub skeleton_rows: usize,
    pub min_ratio: f64,
    pub median_ratio: f64,
    pub max_ratio: f64,
    pub violations: usize,
}

#[derive(Clone, Debug)]
pub struct RowboundsResult {
    pub c: usize,
    pub n_yp: usize,
    pub rank: usize,
    /// Sorted by bound, ascending.
    pub rows: Vec<RowBound>,
    pub summary: RatioSummary,
}

pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn run_rowbounds_on(pid: &ProxyID, gamma_samples: usize) -> Result<RowboundsResult> {
    let maxima = max_errors_on_gamma(pid, gamma_samples)?;
    let mut rows: Vec<RowBound> = maxima
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let bound = bound_proposition(&pid.bound_inputs(i));
            let skel = pid.is_skeleton(i);
            RowBound {
                row: i,
                is_skeleton: skel,
                max_ei_gamma: m,
                bound_prop: bound,
                ratio: if skel { f64::INFINITY } else { bound / m },
            }
        })
        .collect();
    rows.sort_by(|a, b| a.bound_prop.total_cmp(&b.bound_prop).then(a.row.cmp(&b.row)));
    let mut ratios: Vec<f64> = rows.iter().filter(|r| !r.is_skeleton).map(|r| r.ratio).collect();
    let violations = rows.iter().filter(|r| !r.is_skeleton && !(r.max_ei_gamma <= r.bound_prop)).count();
    let summary = RatioSummary {
        rows: rows.len(),
        skeleton_rows: pid.rank(),
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        median_ratio: median(&mut ratios),
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        violations,
    };
    Ok(RowboundsResult { c: pid.c(), n_yp: pid.yp().len(), rank: pid.rank(), rows, summary })
}

pub fn run_rowbounds(p: &ReferenceParams, library: &DesignLibrary) -> Result<(ProxyID, RowboundsResult)> {
    let pid = build_proxy_id(&p.sources(), &p.config()?, library)?;
    let res = run_rowbounds_on(&pid, p.gamma_samples)?;
    Ok((pid, res))
}

fn fmt_ratio(r: f64) -> String {
    if r.is_finite() {
        fmt_sci(r)
    } else {
        "inf".to_string()
    }
}

pub fn rowbounds_csv(res: &RowboundsResult) -> String {
    let mut csv = Csv::new(&["sorted_index", "row_index", "max_ei_gamma", "bound_prop", "ratio"]);
    for (k, r) in res.rows.iter().enumerate() {
        csv.row([
            k.to_string(),
            r.row.to_string(),
            fmt_sci(r.max_ei_gamma),
            fmt_sci(r.bound_prop),
            fmt_ratio(r.ratio),
        ]);
    }
    let s = &res.summary;
    csv.comment(&format!(
        "summary: rows={} skeleton_rows={} min_ratio={} median_ratio={} max_ratio={} violations={}",
        s.rows,
        s.skeleton_rows,
        fmt_ratio(s.min_ratio),
        fmt_ratio(s.median_ratio),
        fmt_ratio(s.max_ratio),
        s.violations
    ));
    csv.finish()
}

#[derive(Clone, Debug, PartialEq)]
pub enum SweepStatus {
    Ok,
    Skipped(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub c: usize,
    pub n_yp: usize,
    pub rank: usize,
    pub max_err: f64,
    pub bound_global: f64,
    pub status: SweepStatus,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == SweepStatus::Ok
    }
}

/// Default grid c = 5, ..., 40.
pub fn default_sweep_grid() -> Vec<usize> {
    (5..=40).collect()
}

/// One ID per c on the same sources, each with threshold ε√|Yp|.
pub fn run_sweep(
    p: &ReferenceParams,
    cs: &[usize],
    library: &DesignLibrary,
    mut progress: impl FnMut(&SweepRow),
) -> Result<Vec<SweepRow>> {
    let x0 = p.sources();
    let mut out = Vec::with_capacity(cs.len());
    for &c in cs {
        let cfg = RunConfig { c_override: Some(c), ..p.config()? };
        let row = match build_proxy_id(&x0, &cfg, library) {
            Ok(pid) => {
                let maxima = max_errors_on_gamma(&pid, p.gamma_samples)?;
                SweepRow {
                    c,
                    n_yp: pid.yp().len(),
                    rank: pid.rank(),
                    max_err: maxima.iter().copied().fold(0.0, f64::max),
                    bound_global: bound_global(&pid, p.eps),
                    status: SweepStatus::Ok,
                }
            }
            Err(e @ proxyid::Error::MissingDesign { .. }) => SweepRow {
                c,
                n_yp: 0,
                rank: 0,
                max_err: f64::NAN,
                bound_global: f64::NAN,
                status: SweepStatus::Skipped(e.to_string()),
            },
            Err(e) => return Err(e),
        };
        progress(&row);
        out.push(row);
    }
    Ok(out)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut csv = Csv::new(&["c", "n_yp", "n_rep", "max_err", "bound_global", "status"]);
    for r in rows {
        match &r.status {
            SweepStatus::Ok => csv.row([
                r.c.to_string(),
                r.n_yp.to_string(),
                r.rank.to_string(),
                fmt_sci(r.max_err),
                fmt_sci(r.bound_global),
                "ok".to_string(),
            ]),
            SweepStatus::Skipped(why) => csv.row([
                r.c.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                format!("\"skipped: {}\"", why.replace('"', "'")),
            ]),
        }
    }
    csv.finish()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Y0Row {
    pub row: usize,
    pub is_skeleton: bool,
    pub avg_entry_err: f64,
    pub max_entry_err: f64,
    pub bound_rowwise: f64,
    pub bound_simplified: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Y0Summary {
    pub inner: f64,
    pub outer: f64,
    pub n_y0: usize,
    pub rowwise_violations: usize,
    pub simplified_violations: usize,
    /// Rows whose largest entry error exceeds the rowwise bound.
    pub max_entry_violations: usize,
    /// Median over non-skeleton rows of max_entry_err / avg_entry_err.
    pub median_max_over_avg: f64,
    pub median_avg_entry_err: f64,
}

#[derive(Clone, Debug)]
pub struct Y0Result {
    /// Sorted by bound, ascending.
    pub rows: Vec<Y0Row>,
    pub summary: Y0Summary,
}

/// The two target shells, B(0,4)\B(0,2) and B(0,8)\B(0,2).
pub fn default_shells() -> Vec<(f64, f64)> {
    vec![(2.0, 4.0), (2.0, 8.0)]
}

/// Targets uniform in the shell; the stream is derived from the seed and
/// the shell index so the sets differ between shells.
pub fn shell_targets(seed: u64, index: usize, inner: f64, outer: f64, n: usize) -> PointSet {
    let mut rng = SeededRng::new(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64 + 1));
    sample_shell(n, inner, outer, &mut rng).with_label(format!("y0({inner},{outer})"))
}

pub fn run_y0_on(pid: &ProxyID, y0: &PointSet, inner: f64, outer: f64) -> Result<Y0Result> {
    let report = rowwise_error_stats(pid, y0)?;
    let simplified = bound_simplified(pid.c(), pid.epsilon());
    let mut rows: Vec<Y0Row> = report
        .rows
        .iter()
        .map(|r| Y0Row {
            row: r.row,
            is_skeleton: r.is_skeleton,
            avg_entry_err: r.avg_entry_err,
            max_entry_err: r.max_entry_err,
            bound_rowwise: r.bound_rowwise,
            bound_simplified: simplified,
        })
        .collect();
    rows.sort_by(|a, b| a.bound_rowwise.total_cmp(&b.bound_rowwise).then(a.row.cmp(&b.row)));
    let live: Vec<&Y0Row> = rows.iter().filter(|r| !r.is_skeleton).collect();
    let mut spread: Vec<f64> = live.iter().map(|r| r.max_entry_err / r.avg_entry_err).collect();
    let mut avg: Vec<f64> = live.iter().map(|r| r.avg_entry_err).collect();
    let summary = Y0Summary {
        inner,
        outer,
        n_y0: y0.len(),
        rowwise_violations: rows.iter().filter(|r| !(r.avg_entry_err <= r.bound_rowwise)).count(),
        simplified_violations: rows.iter().filter(|r| !(r.avg_entry_err <= r.bound_simplified)).count(),
        max_entry_violations: rows.iter().filter(|r| !(r.max_entry_err <= r.bound_rowwise)).count(),
        median_max_over_avg: median(&mut spread),
        median_avg_entry_err: median(&mut avg),
    };
    Ok(Y0Result { rows, summary })
}

pub fn y0_csv(res: &Y0Result) -> String {
    let mut csv = Csv::new(&[
        "sorted_index",
        "row_index",
        "avg_entry_err",
        "max_entry_err",
        "bound_rowwise",
        "bound_simplified",
    ]);
    for (k, r) in res.rows.iter().enumerate() {
        csv.row([
            k.to_string(),
            r.row.to_string(),
            fmt_sci(r.avg_entry_err),
            fmt_sci(r.max_entry_err),
            fmt_sci(r.bound_rowwise),
            fmt_sci(r.bound_simplified),
        ]);
    }
    let s = &res.summary;
    csv.comment(&format!(
        "summary: shell=({},{}) n_y0={} rowwise_violations={} simplified_violations={} max_entry_violations={} median_max_over_avg={}",
        s.inner,
        s.outer,
        s.n_y0,
        s.rowwise_violations,
        s.simplified_violations,
        s.max_entry_violations,
        fmt_sci(s.median_max_over_avg)
    ));
    csv.finish()
}

/// File stem for a shell, e.g. `fig_y0_shell_2_4`.
pub fn shell_stem(inner: f64, outer: f64) -> String {
    format!("fig_y0_shell_{inner}_{outer}")
}

/// One row of the parameter table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TableSpec {
    pub r1: f64,
    pub r2: f64,
    pub eps: f64,
    pub c_paper: Option<usize>,
    pub n_yp_paper: Option<usize>,
}

/// Reference (r1, r2, ε) → (c, |Yp|) rows.
pub const TABLE_PRESETS: [TableSpec; 7] = [
    preset(1.0, 2.0, 1e-6, 30, 1862),
    preset(1.0, 2.0, 1e-4, 23, 1106),
    preset(1.0, 2.0, 1e-8, 38, 2965),
    preset(1.0, 4.0, 1e-6, 12, 314),
    preset(1.0, 6.0, 1e-6, 9, 181),
    preset(10.0, 20.0, 1e-6, 27, 1514),
    preset(100.0, 200.0, 1e-6, 23, 1106),
];

const fn preset(r1: f64, r2: f64, eps: f64, c: usize, n: usize) -> TableSpec {
    TableSpec { r1, r2, eps, c_paper: Some(c), n_yp_paper: Some(n) }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableLine {
    pub spec: TableSpec,
    pub c_computed: usize,
    pub n_yp_heuristic: usize,
    pub delta: Option<i64>,
}

impl TableLine {
    pub fn n_yp_delta(&self) -> Option<i64> {
        self.spec.n_yp_paper.map(|n| self.n_yp_heuristic as i64 - n as i64)
    }
}

pub fn run_table(specs: &[TableSpec], c_qr: f64, n_x0: usize) -> Result<Vec<TableLine>> {
    specs
        .iter()
        .map(|s| {
            let g = ShellGeometry::new(s.r1, s.r2)?;
            let c = decide_c(&g, s.eps, c_qr, n_x0);
            Ok(TableLine {
                spec: *s,
                c_computed: c,
                n_yp_heuristic: design_size(c),
                delta: s.c_paper.map(|p| c as i64 - p as i64),
            })
        })
        .collect()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn table_csv(lines: &[TableLine]) -> String {
    let mut csv = Csv::new(&[
        "r1",
        "r2",
        "ratio",
        "eps",
        "c_computed",
        "n_yp_heuristic",
        "c_paper",
        "n_yp_paper",
        "delta",
    ]);
    for l in lines {
        csv.row([
            fmt_sci(l.spec.r1),
            fmt_sci(l.spec.r2),
            fmt_sci(l.spec.r1 / l.spec.r2),
            fmt_sci(l.spec.eps),
            l.c_computed.to_string(),
            l.n_yp_heuristic.to_string(),
            opt(l.spec.c_paper),
            opt(l.spec.n_yp_paper),
            opt(l.delta),
        ]);
    }
    csv.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_presets_within_one() {
        let lines = run_table(&TABLE_PRESETS, 2.0, 2000).unwrap();
        for l in &lines {
            assert!(l.delta.unwrap().abs() <= 1, "{l:?}");
        }
        assert_eq!(lines[2].c_computed, 38);
        assert_eq!(lines[2].n_yp_heuristic, 2966);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }

    #[test]
    fn table_csv_is_stable() {
        let lines = run_table(&TABLE_PRESETS[2..3], 2.0, 2000).unwrap();
        let text = table_csv(&lines);
        assert_eq!(
            text,
            "r1,r2,ratio,eps,c_computed,n_yp_heuristic,c_paper,n_yp_paper,delta\n\
             1.0000000000000000e0,2.0000000000000000e0,5.0000000000000000e-1,1.0000000000000000e-8,38,2966,38,2965,0\n"
        );
    }
}
