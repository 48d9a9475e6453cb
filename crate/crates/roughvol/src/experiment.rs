//! Weak-error measurement pipeline: coupled coarse-vs-reference Monte Carlo
//! estimates, 95% confidence intervals, log-log rate fits with CI-extreme
//! slopes, and CSV report emission/parsing.
//!
//! The estimator couples every coarse grid to one fine-grid path batch by
//! common random numbers: the coarse Euler value is computed from stride
//! views of the same Gaussian draw, so the per-path difference
//! φ(X̄^{ref}) − φ(X̄^{Δt}) has far lower variance than two independent runs.

use crate::cov::build_joint_covariance;
use crate::error::{Result, RoughVolError};
use crate::grid::TimeGrid;
use crate::hurst::HurstParams;
use crate::payoff::{eval_payoff, Payoff};
use crate::psd::{psd_factor, DEFAULT_CLIP_TOL};
use crate::real::{CompensatedSum, Real};
use crate::sampler::{gaussian_chunks, DEFAULT_STREAM_LAYOUT};
use crate::scheme::PsiSpec;
use nalgebra::DMatrix;
use num_traits::Float;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Full experiment description. `h_list × payoffs × log2_n_list` defines the
/// report rows; one fine-grid path batch per H value drives every row.
#[derive(Clone, Debug)]
pub struct RunConfig<T: Real> {
    pub h_list: Vec<T>,
    pub horizon: T,
    pub log2_n_ref: u32,
    pub log2_n_list: Vec<u32>,
    pub m: usize,
    pub seed: u64,
    pub psi: PsiSpec<T>,
    pub payoffs: Vec<Payoff<T>>,
    pub out: Option<PathBuf>,
    pub mem_budget_mb: usize,
    /// RNG chunk width (paths per counter stream); not a config-file key.
    pub stream_layout: usize,
}

pub const MEM_BUDGET_ENV: &str = "ROUGHVOL_MEM_BUDGET_MB";
const DEFAULT_MEM_BUDGET_MB: usize = 2048;

pub fn default_mem_budget_mb() -> usize {
    std::env::var(MEM_BUDGET_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_MEM_BUDGET_MB)
}

impl<T: Real> Default for RunConfig<T> {
    fn default() -> Self {
        RunConfig {
            h_list: vec![T::lit(0.1)],
            horizon: T::one(),
            log2_n_ref: 12,
            log2_n_list: (1..=6).collect(),
            m: 100_000,
            seed: 1,
            psi: PsiSpec::Linear,
            payoffs: vec![Payoff::Square],
            out: None,
            mem_budget_mb: default_mem_budget_mb(),
            stream_layout: DEFAULT_STREAM_LAYOUT,
        }
    }
}

impl<T: Real> RunConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.h_list.is_empty() {
            return Err(RoughVolError::InvalidConfig("H list is empty".into()));
        }
        for &h in &self.h_list {
            HurstParams::new(h)?;
        }
        if !(self.horizon > T::zero()) {
            return Err(RoughVolError::InvalidConfig(format!(
                "horizon must be positive, got {}",
                self.horizon.as_f64()
            )));
        }
        if self.log2_n_ref == 0 || self.log2_n_ref > 24 {
            return Err(RoughVolError::InvalidConfig(format!(
                "log2_n_ref must be in 1..=24, got {}",
                self.log2_n_ref
            )));
        }
        if self.log2_n_list.is_empty() {
            return Err(RoughVolError::InvalidConfig("coarse level list is empty".into()));
        }
        for &j in &self.log2_n_list {
            if j == 0 || j > self.log2_n_ref {
                return Err(RoughVolError::InvalidConfig(format!(
                    "coarse level 2^{j} must divide the reference 2^{}",
                    self.log2_n_ref
                )));
            }
        }
        if self.m < 2 {
            return Err(RoughVolError::InvalidConfig(format!(
                "M must be at least 2, got {}",
                self.m
            )));
        }
        if self.payoffs.is_empty() {
            return Err(RoughVolError::InvalidConfig("payoff list is empty".into()));
        }
        if self.stream_layout == 0 {
            return Err(RoughVolError::InvalidConfig("stream_layout must be positive".into()));
        }
        Ok(())
    }

    /// Resolved config as `# key = value` echo lines, embedded in every
    /// output file so a report is reproducible from its own header.
    pub fn echo_lines(&self) -> Vec<String> {
        let h: Vec<String> = self.h_list.iter().map(|v| format!("{}", v.as_f64())).collect();
        let levels: Vec<String> = self.log2_n_list.iter().map(|j| j.to_string()).collect();
        let payoffs: Vec<String> = self.payoffs.iter().map(|p| p.label()).collect();
        vec![
            format!("# H = {}", h.join(",")),
            format!("# T = {}", self.horizon.as_f64()),
            format!("# log2_n_ref = {}", self.log2_n_ref),
            format!("# log2_n_list = {}", levels.join(",")),
            format!("# M = {}", self.m),
            format!("# seed = {}", self.seed),
            format!("# psi = {}", self.psi.label()),
            format!("# payoffs = {}", payoffs.join("; ")),
            format!(
                "# out = {}",
                self.out
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|| "-".into())
            ),
            format!("# mem_budget_mb = {}", self.mem_budget_mb),
        ]
    }

    /// Bytes to materialize the full (n_ref+1)×M coupled batch (never
    /// allocated — generation always streams blocks; kept for budget
    /// reporting).
    pub fn full_batch_bytes(&self) -> usize {
        ((1usize << self.log2_n_ref) + 1) * self.m * 2 * 8
    }

    fn check_budget(&self) -> Result<()> {
        let two_n = 2usize << self.log2_n_ref;
        let block_cols = usize::min(self.stream_layout, self.m);
        // factor + eigen workspace (~2 copies) + z and x blocks
        let need = two_n * two_n * 8 * 2 + 2 * two_n * block_cols * 8;
        let need_mb = need.div_ceil(1 << 20);
        if need_mb > self.mem_budget_mb {
            return Err(RoughVolError::BudgetExceeded {
                need_mb,
                budget_mb: self.mem_budget_mb,
            });
        }
        Ok(())
    }
}

/// One (H, payoff, Δt) row of the weak-error table.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow<T> {
    pub h: T,
    pub psi: String,
    pub payoff: String,
    pub dt: T,
    pub n: usize,
    pub mean_err: T,
    pub se: T,
    pub ci_lo: T,
    pub ci_hi: T,
    pub m: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct WeakErrorReport<T> {
    pub rows: Vec<ErrorRow<T>>,
    /// `# key = value` comment lines echoed into emitted files.
    pub config_lines: Vec<String>,
}

/// Left-point Euler value along the stride-s view of one fine-grid column.
/// Row layout of `x`: 0..n_ref hold W^H(t_1..t_{n_ref}), n_ref..2n_ref hold
/// W(t_1..t_{n_ref}); both processes start at 0 at t_0 = 0.
fn euler_at_stride<T: Real>(
    x: nalgebra::DVectorView<'_, T>,
    n_ref: usize,
    stride: usize,
    psi: &PsiSpec<T>,
    hp: &HurstParams<T>,
    horizon: T,
) -> T {
    let n = n_ref / stride;
    let nf = T::lit(n as f64);
    let mut acc = CompensatedSum::<T>::new();
    acc.add(psi.eval(T::zero(), T::zero(), hp) * x[n_ref + stride - 1]);
    for k in 1..n {
        let t = horizon * T::lit(k as f64) / nf;
        let psi_val = psi.eval(t, x[k * stride - 1], hp);
        acc.add(psi_val * (x[n_ref + (k + 1) * stride - 1] - x[n_ref + k * stride - 1]));
    }
    acc.value()
}

/// Run the coupled weak-error experiment: per H, sample fine-grid paths once
/// and estimate E[φ(X̄^{ref}) − φ(X̄^{Δt})] for every coarse Δt and payoff
/// from the same draws. Rows are ordered H → payoff → descending Δt
/// (ascending n). Path generation streams blocks of `stream_layout` columns;
/// partial sums merge in block order, so results do not depend on worker
/// count.
pub fn weak_error_curve<T: Real>(config: &RunConfig<T>) -> Result<WeakErrorReport<T>> {
    config.validate()?;
    config.check_budget()?;
    let n_ref = 1usize << config.log2_n_ref;
    let strides: Vec<usize> = config
        .log2_n_list
        .iter()
        .map(|&j| 1usize << (config.log2_n_ref - j))
        .collect();
    let n_levels = strides.len();
    let n_payoffs = config.payoffs.len();
    let mut rows = Vec::with_capacity(config.h_list.len() * n_levels * n_payoffs);

    for &h in &config.h_list {
        let hp = HurstParams::new(h)?;
        let grid = TimeGrid::new(config.horizon, n_ref)?;
        let sigma = build_joint_covariance(&grid, &hp)?.assemble();
        let factor = psd_factor(&sigma, T::lit(DEFAULT_CLIP_TOL))?;
        drop(sigma);

        type Acc<T> = Vec<(CompensatedSum<T>, CompensatedSum<T>)>;
        let partials: Vec<Acc<T>> = gaussian_chunks(
            &factor.factor,
            config.m,
            config.seed,
            config.stream_layout,
            |_, _, x: &DMatrix<T>| {
                let mut acc: Acc<T> =
                    vec![(CompensatedSum::new(), CompensatedSum::new()); n_levels * n_payoffs];
                let mut coarse = vec![T::zero(); n_levels];
                for j in 0..x.ncols() {
                    let col = x.column(j);
                    let x_ref =
                        euler_at_stride(col, n_ref, 1, &config.psi, &hp, config.horizon);
                    for (l, &s) in strides.iter().enumerate() {
                        coarse[l] = if s == 1 {
                            x_ref
                        } else {
                            euler_at_stride(col, n_ref, s, &config.psi, &hp, config.horizon)
                        };
                    }
                    for (p, payoff) in config.payoffs.iter().enumerate() {
                        let phi_ref = eval_payoff(payoff, x_ref);
                        for l in 0..n_levels {
                            let d = phi_ref - eval_payoff(payoff, coarse[l]);
                            let slot = &mut acc[p * n_levels + l];
                            slot.0.add(d);
                            slot.1.add(d * d);
                        }
                    }
                }
                acc
            },
        );

        let mut merged: Acc<T> =
            vec![(CompensatedSum::new(), CompensatedSum::new()); n_levels * n_payoffs];
        for part in &partials {
            for (slot, p) in merged.iter_mut().zip(part) {
                slot.0.merge(&p.0);
                slot.1.merge(&p.1);
            }
        }

        let mf = T::lit(config.m as f64);
        let z95 = T::lit(1.96);
        for (p, payoff) in config.payoffs.iter().enumerate() {
            for (l, &s) in strides.iter().enumerate() {
                let (sum, sum_sq) = &merged[p * n_levels + l];
                let mean = sum.value() / mf;
                let var = Float::max(
                    (sum_sq.value() - sum.value() * sum.value() / mf) / (mf - T::one()),
                    T::zero(),
                );
                let se = Float::sqrt(var / mf);
                let n = n_ref / s;
                rows.push(ErrorRow {
                    h,
                    psi: config.psi.label(),
                    payoff: payoff.label(),
                    dt: config.horizon / T::lit(n as f64),
                    n,
                    mean_err: mean,
                    se,
                    ci_lo: mean - z95 * se,
                    ci_hi: mean + z95 * se,
                    m: config.m,
                    seed: config.seed,
                });
            }
        }
    }

    Ok(WeakErrorReport {
        rows,
        config_lines: config.echo_lines(),
    })
}

/// Least-squares power-law fit for one (H, payoff) series.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFit<T> {
    pub h: T,
    pub psi: String,
    pub payoff: String,
    /// slope of log₂|mean_err| against log₂ Δt
    pub slope: T,
    pub intercept: T,
    /// slope refit with every |mean_err| replaced by its CI endpoint
    /// farther from zero
    pub slope_lo: T,
    /// ... and by the endpoint nearer to zero
    pub slope_hi: T,
    pub r2: T,
    pub used: usize,
    pub dropped: usize,
}

fn ols<T: Real>(xs: &[T], ys: &[T]) -> (T, T, T) {
    let nf = T::lit(xs.len() as f64);
    let mx = xs.iter().fold(T::zero(), |a, &b| a + b) / nf;
    let my = ys.iter().fold(T::zero(), |a, &b| a + b) / nf;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    let mut syy = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxx = sxx + (x - mx) * (x - mx);
        sxy = sxy + (x - mx) * (y - my);
        syy = syy + (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == T::zero() {
        T::one()
    } else {
        let mut sse = T::zero();
        for (&x, &y) in xs.iter().zip(ys) {
            let e = y - (intercept + slope * x);
            sse = sse + e * e;
        }
        T::one() - sse / syy
    };
    (slope, intercept, r2)
}

/// Fit log₂|mean_err| = slope·log₂ Δt + intercept per (H, payoff) series.
/// Rows whose CI straddles 0 (the reference row always does) carry no sign
/// information and are dropped; a series with fewer than 2 surviving rows is
/// an error naming the series. slope_lo/slope_hi refit the line through the
/// CI endpoints farther from / nearer to zero.
pub fn fit_rate<T: Real>(report: &WeakErrorReport<T>) -> Result<Vec<RateFit<T>>> {
    let mut groups: Vec<((T, String), Vec<&ErrorRow<T>>)> = Vec::new();
    for row in &report.rows {
        let key = (row.h, row.payoff.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, rows)) => rows.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    let mut fits = Vec::with_capacity(groups.len());
    for ((h, payoff), rows) in groups {
        let usable: Vec<&&ErrorRow<T>> = rows
            .iter()
            .filter(|r| {
                r.mean_err != T::zero() && !(r.ci_lo <= T::zero() && r.ci_hi >= T::zero())
            })
            .collect();
        if usable.len() < 2 {
            return Err(RoughVolError::TooFewFitPoints {
                group: format!("H={}, payoff={payoff}", h.as_f64()),
                usable: usable.len(),
            });
        }
        let two = T::lit(2.0);
        let xs: Vec<T> = usable.iter().map(|r| Float::log(r.dt, two)).collect();
        let ys: Vec<T> = usable
            .iter()
            .map(|r| Float::log(Float::abs(r.mean_err), two))
            .collect();
        let (slope, intercept, r2) = ols(&xs, &ys);
        let far: Vec<T> = usable
            .iter()
            .map(|r| Float::log(Float::max(Float::abs(r.ci_lo), Float::abs(r.ci_hi)), two))
            .collect();
        let near: Vec<T> = usable
            .iter()
            .map(|r| Float::log(Float::min(Float::abs(r.ci_lo), Float::abs(r.ci_hi)), two))
            .collect();
        let (slope_lo, _, _) = ols(&xs, &far);
        let (slope_hi, _, _) = ols(&xs, &near);
        fits.push(RateFit {
            h,
            psi: usable[0].psi.clone(),
            payoff,
            slope,
            intercept,
            slope_lo,
            slope_hi,
            r2,
            used: usable.len(),
            dropped: rows.len() - usable.len(),
        });
    }
    Ok(fits)
}

pub const CSV_HEADER: &str = "H,psi,payoff,dt,n,mean_err,se,ci_lo,ci_hi,M,seed";

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted => {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    cur.push('"');
                } else {
                    quoted = false;
                }
            }
            '"' if cur.is_empty() => quoted = true,
            ',' if !quoted => fields.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}

fn num<T: Real>(v: T) -> String {
    format!("{}", v.as_f64())
}

/// Render the report (config echo, header, rows) plus `#fit` comment rows.
pub fn render_report<T: Real>(report: &WeakErrorReport<T>, fits: &[RateFit<T>]) -> String {
    let mut out = String::new();
    for line in &report.config_lines {
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out, "{CSV_HEADER}");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            num(r.h),
            csv_field(&r.psi),
            csv_field(&r.payoff),
            num(r.dt),
            r.n,
            num(r.mean_err),
            num(r.se),
            num(r.ci_lo),
            num(r.ci_hi),
            r.m,
            r.seed
        );
    }
    for f in fits {
        let _ = writeln!(
            out,
            "#fit,{},{},{},slope={},intercept={},slope_lo={},slope_hi={},r2={},used={},dropped={}",
            num(f.h),
            csv_field(&f.psi),
            csv_field(&f.payoff),
            num(f.slope),
            num(f.intercept),
            num(f.slope_lo),
            num(f.slope_hi),
            num(f.r2),
            f.used,
            f.dropped
        );
    }
    out
}

pub fn emit_report<T: Real>(
    report: &WeakErrorReport<T>,
    fits: &[RateFit<T>],
    path: &Path,
) -> Result<()> {
    let text = render_report(report, fits);
    let io_err = |source| RoughVolError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    file.write_all(text.as_bytes()).map_err(io_err)
}

/// Parse a report emitted by `emit_report` (or compatible hand-written CSV).
/// Comment lines are preserved in `config_lines` except `#fit` rows, which
/// are derived data and dropped.
pub fn parse_report<T: Real>(text: &str, origin: &str) -> Result<WeakErrorReport<T>> {
    let mut rows = Vec::new();
    let mut config_lines = Vec::new();
    let mut saw_header = false;
    let err = |line: usize, msg: String| RoughVolError::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if !line.starts_with("#fit") {
                config_lines.push(line.to_string());
            }
            continue;
        }
        if !saw_header {
            let canon: String = line.chars().filter(|c| !c.is_whitespace()).collect();
            if canon != CSV_HEADER {
                return Err(err(line_no, format!("expected header `{CSV_HEADER}`")));
            }
            saw_header = true;
            continue;
        }
        let fields = split_csv_line(line);
        if fields.len() != 11 {
            return Err(err(line_no, format!("expected 11 fields, got {}", fields.len())));
        }
        let fnum = |i: usize| -> Result<T> {
            fields[i]
                .trim()
                .parse::<f64>()
                .map(T::lit)
                .map_err(|e| err(line_no, format!("field {}: {e}", i + 1)))
        };
        let fint = |i: usize| -> Result<u64> {
            fields[i]
                .trim()
                .parse::<u64>()
                .map_err(|e| err(line_no, format!("field {}: {e}", i + 1)))
        };
        rows.push(ErrorRow {
            h: fnum(0)?,
            psi: fields[1].clone(),
            payoff: fields[2].clone(),
            dt: fnum(3)?,
            n: fint(4)? as usize,
            mean_err: fnum(5)?,
            se: fnum(6)?,
            ci_lo: fnum(7)?,
            ci_hi: fnum(8)?,
            m: fint(9)? as usize,
            seed: fint(10)?,
        });
    }
    if !saw_header {
        return Err(err(0, "no header row found".into()));
    }
    Ok(WeakErrorReport { rows, config_lines })
}

pub fn parse_report_file<T: Real>(path: &Path) -> Result<WeakErrorReport<T>> {
    let text = std::fs::read_to_string(path).map_err(|source| RoughVolError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_report(&text, &path.display().to_string())
}
