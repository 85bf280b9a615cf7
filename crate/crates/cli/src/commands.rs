//! One function per subcommand. Each returns the text report and the CSV
//! rows; nothing is printed until the whole command has succeeded.

use std::fmt::Write as _;

use twosided::binning::{simulate, Metric, SimOptions, Simulation, TypicalityParams};
use twosided::oracle::{oracle_capacity, GridSpec, DEFAULT_MAX_POINTS};
use twosided::rate_distortion::default_lambda_grid;
use twosided::special::{
    dual_template_of, verify_channel_reduction, verify_source_reduction, AvailabilityPattern,
    Direction, ProblemKind, StateChannel, StateSource,
};
use twosided::{
    solve_capacity, solve_rd_point, sweep_rd_curve, CapacityResult, Diagnostics, RdPoint,
    SearchMode, SolverOptions,
};

use crate::error::CliError;
use crate::report::{bits, text_table, Table};
use crate::spec::{Problem, SpecFile};

pub struct Output {
    pub text: String,
    pub table: Option<Table>,
}

/// Solver knobs shared by the commands.
#[derive(Debug, Clone, Default)]
pub struct Common {
    pub u_size: Option<usize>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
}

impl Common {
    fn seed(&self, spec: &SpecFile) -> u64 {
        self.seed.or(spec.defaults.seed).unwrap_or(0)
    }

    fn options(&self, spec: &SpecFile) -> Result<SolverOptions, CliError> {
        let mut o = SolverOptions {
            seed: self.seed(spec),
            ..SolverOptions::default()
        };
        if let Some(r) = self.restarts {
            if r == 0 {
                return Err(CliError::invalid("--restarts", "must be at least 1"));
            }
            o.restarts = r;
        }
        Ok(o)
    }

    fn u_size(&self, spec: &SpecFile) -> Result<usize, CliError> {
        let u = self
            .u_size
            .or(spec.defaults.u_size)
            .unwrap_or_else(|| match &spec.problem {
                Problem::Channel(p) => p.default_u_size(),
                Problem::Source(p) => p.default_u_size(),
            });
        if u == 0 {
            return Err(CliError::invalid("--u-size", "must be at least 1"));
        }
        Ok(u)
    }
}

fn search_line(d: &Diagnostics) -> String {
    let mode = match d.search {
        SearchMode::Dominant => "dominant strategy set",
        SearchMode::Exhaustive => "exhaustive over strategy sets",
        SearchMode::Sampled => "sampled strategy sets",
    };
    format!(
        "search: {mode}, {} of {} candidate(s) solved, {} iterations\n",
        d.maps_evaluated, d.candidate_count, d.iterations
    )
}

fn flags(out: &mut String, d: &Diagnostics) {
    for f in &d.flags {
        let _ = writeln!(out, "warning: {f}");
    }
}

fn kernel_text(rows: &[f64], width: usize, row_labels: &[String], col: &str) -> String {
    let header: Vec<String> = std::iter::once(String::new())
        .chain((0..width).map(|j| format!("{col}={j}")))
        .collect();
    let body: Vec<Vec<String>> = rows
        .chunks(width)
        .zip(row_labels)
        .map(|(r, l)| {
            std::iter::once(l.clone())
                .chain(r.iter().map(|&v| bits(v)))
                .collect()
        })
        .collect();
    text_table(&header, &body)
}

fn map_text(table: &[usize], nu: usize, nside: usize, side: &str) -> String {
    let header: Vec<String> = std::iter::once(String::new())
        .chain((0..nside).map(|s| format!("{side}={s}")))
        .collect();
    let body: Vec<Vec<String>> = (0..nu)
        .map(|u| {
            std::iter::once(format!("u={u}"))
                .chain((0..nside).map(|s| table[u * nside + s].to_string()))
                .collect()
        })
        .collect();
    text_table(&header, &body)
}

fn capacity_text(res: &CapacityResult, ns1: usize) -> String {
    let mut out = String::new();
    let labels: Vec<String> = (0..ns1).map(|s| format!("s1={s}")).collect();
    let _ = writeln!(out, "p(u | s1):");
    out += &kernel_text(res.u_given_s1.rows(), res.u_size, &labels, "u");
    let _ = writeln!(out, "x = f(u, s1):");
    out += &map_text(res.x_map.table(), res.u_size, ns1, "s1");
    out
}

pub struct CapacityCmd {
    pub common: Common,
    pub oracle: bool,
    pub delta: Option<f64>,
    pub max_points: Option<u64>,
}

pub fn capacity(spec: &SpecFile, cmd: &CapacityCmd) -> Result<Output, CliError> {
    let prob = spec.channel()?;
    let u = cmd.common.u_size(spec)?;
    let opts = cmd.common.options(spec)?;
    let res = solve_capacity(prob, u, &opts).map_err(|e| CliError::core("capacity", e))?;

    let mut text = String::new();
    let _ = writeln!(text, "instance: {}", spec.name);
    let _ = writeln!(text, "capacity: {} bits (|U| = {u})", bits(res.value));
    text += &capacity_text(&res, prob.s1_alpha().size());
    text += &search_line(&res.diagnostics);
    flags(&mut text, &res.diagnostics);

    let mut row = vec![
        spec.name.clone(),
        u.to_string(),
        bits(res.value),
        String::new(),
        String::new(),
    ];
    if cmd.oracle {
        let mut grid = GridSpec::for_alphabet(u);
        if let Some(d) = cmd.delta {
            grid =
                GridSpec::new(d, DEFAULT_MAX_POINTS).map_err(|e| CliError::core("--delta", e))?;
        }
        grid.max_points = cmd.max_points.unwrap_or(DEFAULT_MAX_POINTS);
        let o = oracle_capacity(prob, u, &grid).map_err(|e| CliError::core("oracle", e))?;
        let diff = (res.value - o.value).abs();
        let _ = writeln!(
            text,
            "oracle: {} bits (grid step {}, bound {}, {} points)",
            bits(o.value),
            grid.delta,
            bits(o.bound),
            o.points
        );
        let _ = writeln!(text, "|diff|: {}", bits(diff));
        row[3] = bits(o.value);
        row[4] = bits(diff);
    }
    let mut table = Table::new(vec![
        "instance",
        "u_size",
        "value_bits",
        "oracle_bits",
        "diff",
    ]);
    table.push(row);
    Ok(Output {
        text,
        table: Some(table),
    })
}

pub enum RdMode {
    Point(f64),
    Sweep(Vec<f64>),
}

impl RdMode {
    pub fn sweep_count(n: usize) -> Result<Self, CliError> {
        if n == 0 {
            return Err(CliError::invalid(
                "--sweep",
                "needs at least one multiplier",
            ));
        }
        Ok(RdMode::Sweep(default_lambda_grid(n)))
    }
}

fn lambda_cell(p: &RdPoint) -> String {
    p.lambda.map(bits).unwrap_or_default()
}

pub fn rd(spec: &SpecFile, common: &Common, mode: &RdMode) -> Result<Output, CliError> {
    let prob = spec.source()?;
    let u = common.u_size(spec)?;
    let opts = common.options(spec)?;
    let mut text = String::new();
    let _ = writeln!(text, "instance: {}", spec.name);
    let mut table = Table::new(vec!["instance", "D", "R_bits", "lambda"]);
    match mode {
        RdMode::Point(d) => {
            let p = solve_rd_point(prob, *d, u, &opts).map_err(|e| CliError::core("rd", e))?;
            let _ = writeln!(
                text,
                "R({}) = {} bits (|U| = {u}, achieved D = {})",
                bits(*d),
                bits(p.rate),
                bits(p.achieved_d)
            );
            let (nx, ns1, ns2) = (
                prob.x_alpha().size(),
                prob.s1_alpha().size(),
                prob.s2_alpha().size(),
            );
            let labels: Vec<String> = (0..nx * ns1)
                .map(|r| format!("x={},s1={}", r / ns1, r % ns1))
                .collect();
            let _ = writeln!(text, "p(u | x, s1):");
            text += &kernel_text(p.u_given_xs1.rows(), u, &labels, "u");
            let _ = writeln!(text, "xhat = g(u, s2):");
            text += &map_text(p.xhat_map.table(), u, ns2, "s2");
            text += &search_line(&p.diagnostics);
            flags(&mut text, &p.diagnostics);
            table.push(vec![
                spec.name.clone(),
                bits(*d),
                bits(p.rate),
                lambda_cell(&p),
            ]);
        }
        RdMode::Sweep(grid) => {
            let curve =
                sweep_rd_curve(prob, u, grid, &opts).map_err(|e| CliError::core("rd", e))?;
            let _ = writeln!(
                text,
                "{} nondominated point(s) from {} multipliers (|U| = {u}, D in [{}, {}])",
                curve.points.len(),
                grid.len(),
                bits(curve.d_min),
                bits(curve.d_max)
            );
            let rows: Vec<Vec<String>> = curve
                .points
                .iter()
                .map(|p| vec![bits(p.achieved_d), bits(p.rate), lambda_cell(p)])
                .collect();
            text += &text_table(&["D".into(), "R_bits".into(), "lambda".into()], &rows);
            for (i, j, k, excess) in curve.convexity_violations(1e-4) {
                let _ = writeln!(
                    text,
                    "warning: point {j} lies {} bits above the chord through points {i} and {k}",
                    bits(excess)
                );
            }
            if !curve.is_monotone(1e-6) {
                let _ = writeln!(
                    text,
                    "warning: rates increase with distortion somewhere on the curve"
                );
            }
            for r in rows {
                table.push(std::iter::once(spec.name.clone()).chain(r).collect());
            }
        }
    }
    Ok(Output {
        text,
        table: Some(table),
    })
}

pub fn reduce(
    spec: &SpecFile,
    common: &Common,
    pattern: AvailabilityPattern,
    d: Option<f64>,
) -> Result<Output, CliError> {
    let opts = common.options(spec)?;
    let report = match &spec.problem {
        Problem::Channel(p) => {
            if d.is_some() {
                return Err(CliError::invalid("--d", "only applies to source specs"));
            }
            verify_channel_reduction(&StateChannel::from_two_sided(p), pattern, &opts)
        }
        Problem::Source(p) => {
            let d = d.ok_or_else(|| CliError::invalid("--d", "required for source specs"))?;
            verify_source_reduction(&StateSource::from_two_sided(p), pattern, d, &opts)
        }
    }
    .map_err(|e| CliError::core("reduce", e))?;
    let sym = match spec.problem.kind() {
        ProblemKind::Channel => "C",
        ProblemKind::Source => "R",
    };
    let mut text = String::new();
    let _ = writeln!(text, "instance: {}", spec.name);
    let _ = writeln!(
        text,
        "pattern {} (sender {}, receiver {})",
        pattern,
        if pattern.sender_knows {
            "knows S"
        } else {
            "blind"
        },
        if pattern.receiver_knows {
            "knows S"
        } else {
            "blind"
        }
    );
    if let Some(d) = report.target_d {
        let _ = writeln!(text, "D: {}", bits(d));
    }
    let _ = writeln!(text, "general:   {} bits", bits(report.general));
    let _ = writeln!(
        text,
        "{sym}_{pattern} formula: {} bits",
        bits(report.dedicated)
    );
    let _ = writeln!(text, "|diff|:    {}", bits(report.diff));
    let _ = writeln!(text, "{}", if report.passed { "pass" } else { "FAIL" });
    let mut table = Table::new(vec![
        "instance",
        "pattern",
        "D",
        "general_bits",
        "dedicated_bits",
        "diff",
        "passed",
    ]);
    table.push(vec![
        spec.name.clone(),
        pattern.to_string(),
        report.target_d.map(bits).unwrap_or_default(),
        bits(report.general),
        bits(report.dedicated),
        bits(report.diff),
        report.passed.to_string(),
    ]);
    Ok(Output {
        text,
        table: Some(table),
    })
}

pub struct SimulateCmd {
    pub common: Common,
    pub n: Vec<usize>,
    pub rate: Option<f64>,
    pub d: Option<f64>,
    pub bin_rate: Option<f64>,
    pub trials: usize,
    pub epsilon: Option<f64>,
    pub max_symbols: Option<usize>,
}

pub fn simulate_cmd(spec: &SpecFile, cmd: &SimulateCmd) -> Result<Output, CliError> {
    if cmd.n.is_empty() {
        return Err(CliError::invalid("--n", "needs at least one blocklength"));
    }
    let u = cmd.common.u_size(spec)?;
    let solver = cmd.common.options(spec)?;
    let eps = cmd.epsilon.or(spec.defaults.epsilon).unwrap_or(0.1);
    let mut opts = SimOptions {
        trials: cmd.trials,
        params: TypicalityParams::new(eps).map_err(|e| CliError::core("--epsilon", e))?,
        seed: solver.seed,
        ..SimOptions::default()
    };
    if let Some(m) = cmd.max_symbols {
        opts.max_symbols = m;
    }
    let mut text = String::new();
    let _ = writeln!(text, "instance: {}", spec.name);
    let reports = match &spec.problem {
        Problem::Channel(p) => {
            if cmd.d.is_some() || cmd.bin_rate.is_some() {
                return Err(CliError::invalid("--d", "channel specs take --rate"));
            }
            let rate = cmd
                .rate
                .ok_or_else(|| CliError::invalid("--rate", "required for channel specs"))?;
            let point = solve_capacity(p, u, &solver).map_err(|e| CliError::core("capacity", e))?;
            let _ = writeln!(
                text,
                "channel code at rate {} bits from a capacity point of {} bits (|U| = {u}, epsilon = {eps})",
                bits(rate),
                bits(point.value)
            );
            let sim = Simulation::Channel {
                prob: p,
                point: &point,
                rate,
            };
            simulate(sim, &cmd.n, &opts).map_err(|e| CliError::core("simulate", e))?
        }
        Problem::Source(p) => {
            if cmd.rate.is_some() {
                return Err(CliError::invalid("--rate", "source specs take --d"));
            }
            let d = cmd
                .d
                .ok_or_else(|| CliError::invalid("--d", "required for source specs"))?;
            let point = solve_rd_point(p, d, u, &solver).map_err(|e| CliError::core("rd", e))?;
            let _ = writeln!(
                text,
                "source code for D = {} from R = {} bits at achieved D = {} (|U| = {u}, epsilon = {eps})",
                bits(d),
                bits(point.rate),
                bits(point.achieved_d)
            );
            let sim = Simulation::Source {
                prob: p,
                point: &point,
                bin_rate: cmd.bin_rate,
            };
            simulate(sim, &cmd.n, &opts).map_err(|e| CliError::core("simulate", e))?
        }
    };
    let metric = match reports[0].metric {
        Metric::ErrorRate => "error_rate",
        Metric::MeanDistortion => "mean_distortion",
    };
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                bits(r.value),
                bits(r.ci_half_width),
                r.e1.to_string(),
                r.e2.to_string(),
                r.e3.to_string(),
            ]
        })
        .collect();
    let mut header: Vec<String> = ["n", metric, "ci", "e1", "e2", "e3"]
        .map(String::from)
        .to_vec();
    header.extend(["failures".into(), "codewords".into(), "bins".into()]);
    let text_rows: Vec<Vec<String>> = rows
        .iter()
        .zip(&reports)
        .map(|(row, r)| {
            let mut row = row.clone();
            row.extend([
                r.failures.to_string(),
                r.num_codewords.to_string(),
                r.num_bins.to_string(),
            ]);
            row
        })
        .collect();
    let _ = writeln!(text, "{} trials per blocklength", cmd.trials);
    text += &text_table(&header, &text_rows);
    let mut table = Table::new(vec!["n", metric, "ci", "e1", "e2", "e3"]);
    rows.into_iter().for_each(|r| table.push(r));
    Ok(Output {
        text,
        table: Some(table),
    })
}

fn formula(kind: ProblemKind) -> String {
    let t = dual_template_of(kind);
    let dir = match t.direction {
        Direction::Max => "max",
        Direction::Min => "min",
    };
    format!(
        "{dir} [ I(U; {}, {}) - I(U; {}) ]",
        t.positive[0], t.positive[1], t.negative
    )
}

pub fn duality(kind: ProblemKind) -> Result<Output, CliError> {
    let t = dual_template_of(kind);
    let dual = kind.dual();
    let mut text = String::new();
    let _ = writeln!(text, "{}: {}", kind.name(), formula(kind));
    let _ = writeln!(text, "{}: {}", dual.name(), formula(dual));
    let _ = writeln!(text, "role map ({} <-> {}):", kind.name(), dual.name());
    let rows: Vec<Vec<String>> = t
        .role_map
        .iter()
        .map(|(a, b)| vec![a.to_string(), "<->".into(), b.to_string()])
        .collect();
    text += &text_table(
        &[kind.name().into(), String::new(), dual.name().into()],
        &rows,
    );
    let sym = |k: ProblemKind| if k == ProblemKind::Channel { "C" } else { "R" };
    let pairs: Vec<String> = AvailabilityPattern::ALL
        .iter()
        .map(|&p| {
            format!(
                "{}_{} <-> {}_{}",
                sym(kind),
                p,
                sym(dual),
                t.dual_pattern(p)
            )
        })
        .collect();
    let _ = writeln!(text, "patterns: {}", pairs.join(", "));
    let mapped = t.mapped().map_err(|e| CliError::core("duality", e))?;
    let _ = writeln!(
        text,
        "mapped template: {} [ I(U; {}, {}) - I(U; {}) ]",
        if mapped.direction == Direction::Max {
            "max"
        } else {
            "min"
        },
        mapped.positive[0],
        mapped.positive[1],
        mapped.negative
    );
    if !t.round_trips() {
        return Err(CliError::Duality);
    }
    let _ = writeln!(text, "round trip: identity");
    let mut table = Table::new(vec!["kind", "variable", "dual_variable"]);
    for (a, b) in &t.role_map {
        table.push(vec![kind.name().into(), a.to_string(), b.to_string()]);
    }
    Ok(Output {
        text,
        table: Some(table),
    })
}
