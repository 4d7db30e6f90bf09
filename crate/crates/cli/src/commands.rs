//! Subcommand implementations (everything except the pipelines).

use crate::input::{
    load_canvas, load_input, parse_direction, parse_int_vec, parse_rat_arg, InputFile,
};
use crate::{pipeline, svg, Cli, CliError, Cmd, Format};
use num::{Signed, Zero};
use pgn::lattice::{self, Direction};
use pgn::rat::{self, Rat};
use pgn::realize::{self, RealizeParams};
use pgn::systems::{rigid_from_canvas, validate_canvas, validate_ngamma};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.cmd {
        Cmd::Validate { file } => cmd_validate(file),
        Cmd::Eval { file, at } => cmd_eval(cli, file, at),
        Cmd::Plot { file, output } => cmd_plot(file, output.as_deref()),
        Cmd::Reduce { file, trace } => cmd_reduce(cli, file, *trace),
        Cmd::Rigidify { file, trace } => cmd_rigidify(cli, file, *trace),
        Cmd::Realize { file } => cmd_realize(cli, file),
        Cmd::Minima { direction, qs, grid } => cmd_minima(cli, direction, qs, *grid),
        Cmd::Trajectory { direction, vector, qs } => {
            cmd_trajectory(cli, direction, vector, qs)
        }
        Cmd::Exponents { file, tail_start } => {
            cmd_exponents(cli, file, tail_start.as_deref())
        }
        Cmd::Witness { file } => cmd_witness(cli, file),
        Cmd::Pipeline { mode, file, direction } => {
            pipeline::run(cli, *mode, file.as_deref(), direction.as_deref())
        }
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn cmd_validate(file: &str) -> Result<(), CliError> {
    match load_input(file)? {
        InputFile::Canvas(c) => {
            let rep = validate_canvas(&c);
            print_json(&serde_json::json!({
                "kind": "canvas",
                "ok": rep.ok(),
                "violations": rep.violations,
            }));
            if !rep.ok() {
                return Err(CliError::Validation("canvas rules violated".into()));
            }
        }
        InputFile::System(s) => {
            let rep = validate_ngamma(&s);
            print_json(&serde_json::json!({
                "kind": "system",
                "ok": rep.ok(),
                "violations": rep.violations,
            }));
            if !rep.ok() {
                return Err(CliError::Validation("system rules violated".into()));
            }
        }
    }
    Ok(())
}

/// Components of the input as piecewise-linear functions, plus the
/// switch numbers and mesh when the input is a canvas.
fn components_of(file: &str) -> Result<(Vec<pgn::plfun::PLFun>, Vec<Rat>, Rat), CliError> {
    match load_input(file)? {
        InputFile::Canvas(c) => {
            let r = rigid_from_canvas(&c)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            Ok((r.components, r.switch_numbers, c.mesh))
        }
        InputFile::System(s) => Ok((s.p_components(), vec![], rat::rat_i64(1))),
    }
}

fn cmd_eval(cli: &Cli, file: &str, at: &[String]) -> Result<(), CliError> {
    let (components, _, _) = components_of(file)?;
    let mut rows = Vec::new();
    for qs in at {
        let q = parse_rat_arg(qs, "--at")?;
        let vals: Vec<Rat> = components
            .iter()
            .map(|f| f.eval(&q))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Validation(format!("q = {qs}: {e}")))?;
        rows.push((q, vals));
    }
    match cli.format {
        Format::Json => {
            let items: Vec<_> = rows
                .iter()
                .map(|(q, vals)| {
                    serde_json::json!({
                        "q": rat::fmt_rat(q),
                        "values": vals.iter().map(rat::fmt_rat).collect::<Vec<_>>(),
                    })
                })
                .collect();
            print_json(&serde_json::json!(items));
        }
        Format::Csv => {
            let n = components.len();
            let header: Vec<String> =
                (1..=n).map(|j| format!("P{j}")).collect();
            println!("q,{}", header.join(","));
            for (q, vals) in &rows {
                let cells: Vec<String> = vals.iter().map(rat::fmt_rat).collect();
                println!("{},{}", rat::fmt_rat(q), cells.join(","));
            }
        }
        Format::Svg => {
            return Err(CliError::Parse("eval does not produce SVG".into()));
        }
    }
    // Plain values on stderr-free stdout are covered by csv/json; for
    // quick shell use the json form is canonical.
    Ok(())
}

fn cmd_plot(file: &str, output: Option<&str>) -> Result<(), CliError> {
    let (components, switch_numbers, mesh) = components_of(file)?;
    let doc = svg::render(&components, &switch_numbers, &mesh);
    match output {
        Some(path) => std::fs::write(path, doc)?,
        None => print!("{doc}"),
    }
    Ok(())
}

fn cmd_reduce(cli: &Cli, file: &str, trace: bool) -> Result<(), CliError> {
    let sys = crate::input::load_system(file)?;
    let _ = cli;
    let (out, tr) =
        pgn::reduce::reduce(&sys).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut doc = serde_json::json!({
        "system": out,
        "gamma_reduced": rat::fmt_rat(&(rat::rat_i64(2 * sys.n as i64) * &sys.gamma)),
    });
    if trace {
        doc["trace"] = serde_json::to_value(&tr).expect("serializable");
    }
    print_json(&doc);
    Ok(())
}

fn cmd_rigidify(cli: &Cli, file: &str, trace: bool) -> Result<(), CliError> {
    let sys = crate::input::load_system(file)?;
    let delta = match &cli.mesh {
        Some(s) => parse_rat_arg(s, "--mesh")?,
        None => rat::rat_i64(1),
    };
    let horizon = match &cli.horizon {
        Some(s) => parse_rat_arg(s, "--horizon")?,
        None => rat::rat_i64(500),
    };
    let out = pgn::rigidify::rigidify(&sys, &delta, &horizon)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let n = sys.n as i64;
    let mut doc = serde_json::json!({
        "canvas": out.canvas,
        "safe_horizon": rat::fmt_rat(&out.safe_horizon),
        "certified_sup_bound": rat::fmt_rat(&(rat::rat_i64(3 * n * n) * &delta)),
    });
    if trace {
        doc["trace"] = serde_json::to_value(&out.trace).expect("serializable");
    }
    print_json(&doc);
    Ok(())
}

fn direction_json(u: &Direction) -> serde_json::Value {
    match u {
        Direction::ExactNormal(nv) => serde_json::json!({
            "normal": nv.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        }),
        Direction::FloatVec(v) => serde_json::json!({
            "coords": v.iter().map(rat::fmt_rat).collect::<Vec<_>>(),
        }),
    }
}

/// Upper bound for n·log(8e⁴n).
fn realize_bound_upper(n: usize, prec: u32) -> Rat {
    let ln = pgn::arb::ln_rat(&rat::rat_i64(8 * n as i64), prec).hi;
    rat::rat_i64(n as i64) * (ln + rat::rat_i64(4))
}

fn cmd_realize(cli: &Cli, file: &str) -> Result<(), CliError> {
    let canvas = load_canvas(file)?;
    let prec = cli.precision_bits;
    let params = RealizeParams { precision_bits: prec, mesh_check: true };
    let out = realize::realize_canvas(&canvas, &params)?;
    let rigid =
        rigid_from_canvas(&canvas).map_err(|e| CliError::Validation(e.to_string()))?;
    let measured = realize::measure_sup_dist(&out.direction, &rigid, prec)?;
    let doc = serde_json::json!({
        "direction": direction_json(&out.direction),
        "basis_chain": out.seq.to_json(),
        "measured_sup": rat::fmt_rat(&measured),
        "certified_sup_bound": rat::fmt_rat(&realize_bound_upper(canvas.n, prec)),
        "tail_log_bound": out.tail_log_bound.as_ref().map(rat::fmt_rat),
    });
    print_json(&doc);
    Ok(())
}

/// Abscissae from --q values or the grid flags.
fn abscissae(cli: &Cli, qs: &[String], grid: bool) -> Result<Vec<Rat>, CliError> {
    let mut out = Vec::new();
    for s in qs {
        out.push(parse_rat_arg(s, "--q")?);
    }
    if grid || out.is_empty() {
        let step = match &cli.mesh {
            Some(s) => parse_rat_arg(s, "--mesh")?,
            None => rat::rat_i64(1),
        };
        let horizon = match &cli.horizon {
            Some(s) => parse_rat_arg(s, "--horizon")?,
            None => rat::rat_i64(10),
        };
        if !step.is_positive() || horizon < Rat::zero() {
            return Err(CliError::Parse("grid needs step > 0, horizon ≥ 0".into()));
        }
        let mut q = Rat::zero();
        while q <= horizon {
            out.push(q.clone());
            q += &step;
        }
    }
    Ok(out)
}

struct MinimaRow {
    q: Rat,
    res: lattice::MinimaResult,
    l: Vec<pgn::arb::Interval>,
}

fn cmd_minima(cli: &Cli, direction: &str, qs: &[String], grid: bool) -> Result<(), CliError> {
    let u = parse_direction(direction)?;
    let prec = cli.precision_bits;
    let points = abscissae(cli, qs, grid)?;
    let jobs = cli.jobs.max(1).min(points.len().max(1));
    let chunk = points.len().div_ceil(jobs);
    let results: Vec<Result<MinimaRow, CliError>> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for part in points.chunks(chunk.max(1)) {
            let u = &u;
            handles.push(scope.spawn(move || {
                part.iter()
                    .map(|q| {
                        let qq = lattice::exp_param(q, prec);
                        let res = lattice::successive_minima(u, &qq)?;
                        let l = res.l_values(prec);
                        Ok(MinimaRow { q: q.clone(), res, l })
                    })
                    .collect::<Vec<Result<MinimaRow, CliError>>>()
            }));
        }
        handles.into_iter().flat_map(|h| h.join().expect("worker")).collect()
    });
    let rows: Vec<MinimaRow> = results.into_iter().collect::<Result<_, _>>()?;
    match cli.format {
        Format::Csv => {
            let n = u.dim();
            let header: Vec<String> = (1..=n).map(|j| format!("L{j}")).collect();
            println!("q,{},exact,vectors", header.join(","));
            for row in &rows {
                let ls: Vec<String> =
                    row.l.iter().map(|iv| format!("{:.6}", iv.to_f64())).collect();
                let vecs: Vec<String> = row
                    .res
                    .vectors
                    .iter()
                    .map(|v| {
                        let cs: Vec<String> = v.iter().map(|c| c.to_string()).collect();
                        format!("({})", cs.join(" "))
                    })
                    .collect();
                println!(
                    "{},{},{},{}",
                    rat::fmt_rat(&row.q),
                    ls.join(","),
                    row.res.exact,
                    vecs.join(" ")
                );
            }
        }
        _ => {
            let items: Vec<_> = rows
                .iter()
                .map(|row| {
                    serde_json::json!({
                        "q": rat::fmt_rat(&row.q),
                        "lambda_sq_lo": row.res.lambda_sq_lo.iter().map(rat::fmt_rat)
                            .collect::<Vec<_>>(),
                        "lambda_sq_hi": row.res.lambda_sq_hi.iter().map(rat::fmt_rat)
                            .collect::<Vec<_>>(),
                        "L": row.l.iter().map(|iv| iv.to_f64()).collect::<Vec<_>>(),
                        "exact": row.res.exact,
                        "vectors": row.res.vectors.iter()
                            .map(|v| v.iter().map(|c| c.to_string()).collect::<Vec<_>>())
                            .collect::<Vec<_>>(),
                    })
                })
                .collect();
            print_json(&serde_json::json!(items));
        }
    }
    Ok(())
}

fn cmd_trajectory(
    cli: &Cli,
    direction: &str,
    vector: &str,
    qs: &[String],
) -> Result<(), CliError> {
    let u = parse_direction(direction)?;
    let x = parse_int_vec(vector)?;
    if x.len() != u.dim() {
        return Err(CliError::Parse("vector/direction dimension mismatch".into()));
    }
    let prec = cli.precision_bits;
    let points = abscissae(cli, qs, false)?;
    let vals = lattice::trajectory_values(&x, &u, &points, prec)?;
    let brk = lattice::trajectory_breakpoint(&x, &u, prec)?;
    match cli.format {
        Format::Csv => {
            println!("q,L");
            for (q, v) in points.iter().zip(&vals) {
                println!("{},{:.6}", rat::fmt_rat(q), v.to_f64());
            }
        }
        _ => {
            print_json(&serde_json::json!({
                "breakpoint": brk.map(|b| b.to_f64()),
                "values": points
                    .iter()
                    .zip(&vals)
                    .map(|(q, v)| serde_json::json!({
                        "q": rat::fmt_rat(q),
                        "L": v.to_f64(),
                    }))
                    .collect::<Vec<_>>(),
            }));
        }
    }
    Ok(())
}

fn cmd_exponents(cli: &Cli, file: &str, tail_start: Option<&str>) -> Result<(), CliError> {
    let canvas = load_canvas(file)?;
    let r = rigid_from_canvas(&canvas).map_err(|e| CliError::Validation(e.to_string()))?;
    let tail = match tail_start {
        Some(s) => parse_rat_arg(s, "--tail-start")?,
        None => r.q0().clone(),
    };
    let horizon = match &cli.horizon {
        Some(s) => parse_rat_arg(s, "--horizon")?,
        None => r
            .switch_numbers
            .last()
            .cloned()
            .unwrap_or_else(|| &tail + rat::rat_i64(100)),
    };
    let est = pgn::exponents::quadruple_estimate(&r, &tail, &horizon)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let exps = pgn::exponents::theta_inv(&est.ratios)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    print_json(&serde_json::json!({
        "ratio_quadruple": est.ratios.to_strings(),
        "exponent_quadruple": exps.to_strings(),
        "estimate": est.to_json(),
    }));
    Ok(())
}

fn cmd_witness(cli: &Cli, file: &str) -> Result<(), CliError> {
    let canvas = load_canvas(file)?;
    let prec = cli.precision_bits;
    let params = RealizeParams { precision_bits: prec, mesh_check: true };
    let out = realize::realize_canvas(&canvas, &params)?;
    let rigid =
        rigid_from_canvas(&canvas).map_err(|e| CliError::Validation(e.to_string()))?;
    let eps = realize::measure_sup_dist(&out.direction, &rigid, prec)?;
    let ws = realize::extract_witnesses(&out.direction, &rigid, &eps, prec)?;
    let rep = realize::verify_witnesses(&ws.tuples, &out.direction, &rigid, &eps, prec)?;
    let ok = rep.all_ok();
    print_json(&serde_json::json!({
        "epsilon": rat::fmt_rat(&eps),
        "best_effort": ws.best_effort,
        "tuples": ws.tuples.iter()
            .map(|t| t.iter()
                .map(|v| v.iter().map(|c| c.to_string()).collect::<Vec<_>>())
                .collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "report": rep,
        "all_ok": ok,
    }));
    if !ok {
        return Err(CliError::Validation("witness verification failed".into()));
    }
    Ok(())
}
