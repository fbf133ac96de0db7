use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use lindlift::io::{
    diagnostics_csv, read_json, read_matrix, write_atomic, write_json, LiftFamilyJson,
    LindbladianJson, PlotTable, TrajectoryJson,
};
use lindlift::lift::{
    feasibility_lift, min_dissipation_rate, replacer_lift, spectral_lift, tangent_cone_membership,
    EpsilonPolicy, FeasibilityProblem, Generator, LiftFamily, PointDiagnostics, FEASIBILITY_TOL,
};
use lindlift::matcore::{CMatrix, DensityMatrix, RANK_TOL};
use lindlift::paths::DEFAULT_H;
use lindlift::propagate::verify_lift_series;
use lindlift::scenarios::{self, ScenarioResult};
use lindlift::Error;

#[derive(Parser)]
#[command(name = "lindlift", version, about = "Lindbladian lifts of density-matrix paths")]
struct Cli {
    /// Also write plot CSV (t, named series) next to each output.
    #[arg(long, global = true)]
    plotdata: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a generator family along a sampled trajectory.
    Lift {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// `adaptive`, `paper` or `const:<value>` (replacer method only).
        #[arg(long, default_value = "adaptive", value_parser = parse_policy)]
        epsilon_policy: EpsilonPolicy,
        /// Grid points per segment for the affine method.
        #[arg(long, default_value_t = 200)]
        segment_points: usize,
        #[arg(long)]
        out: PathBuf,
        /// Per-point diagnostics CSV.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Integrate a family and compare it with a trajectory.
    Verify {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        lift: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Report JSON; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide whether a velocity is reachable by some Lindbladian at a state.
    Tangent {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        direction: PathBuf,
        #[arg(long, default_value_t = FEASIBILITY_TOL)]
        tol: f64,
    },
    /// Smallest total dissipation rate realizing a velocity at a state.
    Mindiss {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        direction: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        rel_tol: f64,
    },
    /// Run a built-in scenario and write its artifacts.
    Scenario {
        #[arg(value_enum)]
        name: ScenarioName,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        outdir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Replacer,
    Spectral,
    Affine,
    Feasibility,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioName {
    SinDephasing,
    EternalNm,
    QutritRegion,
    Discrete,
}

fn parse_policy(s: &str) -> Result<EpsilonPolicy, String> {
    match s {
        "adaptive" => Ok(EpsilonPolicy::Adaptive),
        "paper" => Ok(EpsilonPolicy::PaperLiteral),
        _ => {
            let v = s
                .strip_prefix("const:")
                .ok_or_else(|| format!("unknown policy `{s}`"))?;
            let eps: f64 = v.parse().map_err(|e| format!("bad epsilon `{v}`: {e}"))?;
            if eps > 0.0 && eps.is_finite() {
                Ok(EpsilonPolicy::Constant(eps))
            } else {
                Err(format!("epsilon must be positive, got {eps}"))
            }
        }
    }
}

/// Outcome of a failed command, mapped to its exit code.
enum Failure {
    /// Infeasible lift or velocity outside the tangent cone.
    Infeasible(String),
    Input(String),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Infeasible(_) => 2,
            Failure::Input(_) => 3,
            Failure::Verification(_) => 4,
        }
    }
}

impl Failure {
    fn context(self, path: &Path) -> Self {
        let prefix = |m: String| format!("{}: {m}", path.display());
        match self {
            Failure::Infeasible(m) => Failure::Infeasible(prefix(m)),
            Failure::Input(m) => Failure::Input(prefix(m)),
            Failure::Verification(m) => Failure::Verification(prefix(m)),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            Failure::Infeasible(m) | Failure::Input(m) | Failure::Verification(m) => m,
        };
        f.write_str(&msg.replace('\n', " "))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotInTangentCone { .. } => {
                Failure::Infeasible(format!("necessary kernel condition violated: {e}"))
            }
            Error::Infeasible { .. } | Error::ResidualTooLarge { .. } => {
                Failure::Infeasible(e.to_string())
            }
            _ => Failure::Input(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn plot_path(out: &Path) -> PathBuf {
    out.with_extension("plot.csv")
}

fn write_plot(path: &Path, table: &PlotTable) -> Outcome {
    write_atomic(path, table.to_csv().as_bytes())?;
    Ok(())
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("JSON value"));
}

fn in_file(path: &Path) -> impl FnOnce(Error) -> Failure + '_ {
    move |e| Failure::from(e).context(path)
}

fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    read_json(path).map_err(in_file(path))
}

fn read_state(path: &Path) -> Result<CMatrix, Failure> {
    let m = read_matrix(path).map_err(in_file(path))?;
    Ok(DensityMatrix::new(m).map_err(in_file(path))?.into_inner())
}

fn read_direction(path: &Path, dim: usize) -> Result<CMatrix, Failure> {
    let v = read_matrix(path).map_err(in_file(path))?;
    if v.rows() != dim || v.cols() != dim {
        return Err(Error::ShapeMismatch {
            expected: format!("{dim}x{dim}"),
            found: format!("{}x{}", v.rows(), v.cols()),
        }
        .into());
    }
    let deviation = v.hermiticity_deviation();
    if deviation > 1e-12 * (1.0 + v.frobenius_norm()) {
        return Err(Error::NonHermitianInput { deviation }.into());
    }
    if v.trace().norm() > 1e-10 {
        return Err(Failure::Input(format!(
            "direction must be traceless, trace is {}",
            v.trace()
        )));
    }
    Ok(v.hermitian_part())
}

fn lift(
    input: &Path,
    method: Method,
    policy: EpsilonPolicy,
    segment_points: usize,
    out: &Path,
    report: Option<&Path>,
    plotdata: bool,
) -> Outcome {
    let data: TrajectoryJson = load(input)?;
    let family = match method {
        Method::Replacer => replacer_lift(&data.to_trajectory()?, &data.times, policy)?,
        Method::Spectral => spectral_lift(&data.to_trajectory()?, &data.times, RANK_TOL)?,
        Method::Affine => {
            let states = data
                .states
                .iter()
                .map(CMatrix::try_from)
                .collect::<lindlift::Result<Vec<_>>>()?;
            scenarios::knot_lift(&states, &data.times, segment_points, 1e-9)?.family
        }
        Method::Feasibility => {
            let traj = data.to_trajectory()?;
            let mut generators = Vec::with_capacity(data.times.len());
            let mut diagnostics = Vec::with_capacity(data.times.len());
            for &t in &data.times {
                let (rho, v) = traj.sample_with_derivative(t, DEFAULT_H)?;
                let (rho, v) = (rho.into_inner(), v.into_inner());
                let problem = FeasibilityProblem::new(traj.dim(), vec![(rho.clone(), v.clone())]);
                let sol = feasibility_lift(&problem).map_err(|e| match e {
                    Error::Infeasible { residual, .. } => Error::Infeasible {
                        t: Some(t),
                        residual,
                    },
                    e => e,
                })?;
                let g = Generator::Lindblad(sol.generator);
                diagnostics.push(PointDiagnostics::evaluate(t, &g, &rho, &v)?);
                generators.push(g);
            }
            LiftFamily::new(traj.dim(), data.times.clone(), generators, diagnostics)?
        }
    };
    write_json(out, &LiftFamilyJson::from(&family))?;
    if let Some(path) = report {
        write_atomic(path, diagnostics_csv(family.diagnostics()).as_bytes())?;
    }
    if plotdata {
        let mut table = PlotTable::new("lift", &["epsilon", "residual", "sigma_min_eig", "gen_norm"]);
        for d in family.diagnostics() {
            table.push(
                d.t,
                &[
                    d.epsilon.unwrap_or(f64::NAN),
                    d.residual,
                    d.sigma_min_eig.unwrap_or(f64::NAN),
                    d.gen_norm,
                ],
            );
        }
        write_plot(&plot_path(out), &table)?;
    }
    if !family.all_valid() {
        log_warn(&format!(
            "{} of {} generators fail GKSL validation",
            family.diagnostics().iter().filter(|d| !d.gksl_valid).count(),
            family.len()
        ));
    }
    Ok(())
}

fn log_warn(msg: &str) {
    eprintln!("lindlift: warning: {msg}");
}

fn verify(traj: &Path, lift: &Path, step: f64, tol: f64, out: Option<&Path>, plotdata: bool) -> Outcome {
    let traj = load::<TrajectoryJson>(traj)?.to_trajectory()?;
    let family = LiftFamily::try_from(&load::<LiftFamilyJson>(lift)?)?;
    if !(tol > 0.0) {
        return Err(Failure::Input(format!("tolerance must be positive, got {tol}")));
    }
    let (report, series) = verify_lift_series(&traj, &family, step)?;
    match out {
        Some(path) => {
            write_json(path, &report)?;
            if plotdata {
                let mut table = PlotTable::new("verify", &["deviation"]);
                for (t, dev) in series {
                    table.push(t, &[dev]);
                }
                write_plot(&plot_path(path), &table)?;
            }
        }
        None => print_json(&serde_json::to_value(&report).expect("report")),
    }
    if report.max_residual > tol || report.max_traj_deviation > tol || !report.all_steps_cp {
        return Err(Failure::Verification(format!(
            "verification failed: max residual {:.3e}, max deviation {:.3e}, all steps CP {} (tolerance {tol:.1e})",
            report.max_residual, report.max_traj_deviation, report.all_steps_cp
        )));
    }
    Ok(())
}

fn tangent(state: &Path, direction: &Path, tol: f64, plotdata: bool) -> Outcome {
    let rho = read_state(state)?;
    let v = read_direction(direction, rho.rows())?;
    let m = tangent_cone_membership(&rho, &v, tol)?;
    if plotdata {
        let mut table = PlotTable::new("tangent", &["member", "residual", "kernel_min_eig"]);
        table.push(
            0.0,
            &[
                f64::from(u8::from(m.member)),
                m.residual.unwrap_or(f64::NAN),
                m.kernel_min_eig,
            ],
        );
        print!("{}", table.to_csv());
    } else {
        print_json(&json!({
            "member": m.member,
            "necessary_check": m.necessary_check,
            "kernel_min_eig": m.kernel_min_eig,
            "residual": m.residual,
            "witness": m.witness.as_ref().map(LindbladianJson::from),
        }));
    }
    if !m.necessary_check {
        return Err(Failure::Infeasible(format!(
            "necessary kernel condition violated: kernel compression eigenvalue {:.3e}",
            m.kernel_min_eig
        )));
    }
    if !m.member {
        return Err(Failure::Infeasible(format!(
            "no Lindbladian found: residual {:.3e}",
            m.residual.unwrap_or(f64::NAN)
        )));
    }
    Ok(())
}

fn mindiss(state: &Path, direction: &Path, rel_tol: f64, plotdata: bool) -> Outcome {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Failure::Input(format!("rel-tol must lie in (0, 1), got {rel_tol}")));
    }
    let rho = read_state(state)?;
    let v = read_direction(direction, rho.rows())?;
    let rate = min_dissipation_rate(&rho, &v, rel_tol)?;
    if plotdata {
        let mut table = PlotTable::new("mindiss", &["min_rate"]);
        table.push(0.0, &[rate]);
        print!("{}", table.to_csv());
    } else {
        print_json(&json!({ "min_rate": rate, "rel_tol": rel_tol }));
    }
    Ok(())
}

fn params<T: Default + serde::de::DeserializeOwned>(path: Option<&Path>) -> Result<T, Failure> {
    Ok(match path {
        Some(p) => load(p)?,
        None => T::default(),
    })
}

fn scenario(name: ScenarioName, params_path: Option<&Path>, outdir: &Path, plotdata: bool) -> Outcome {
    let result: ScenarioResult = match name {
        ScenarioName::SinDephasing => scenarios::scenario_sin_dephasing(&params(params_path)?)?,
        ScenarioName::EternalNm => scenarios::scenario_eternal_nm(&params(params_path)?)?,
        ScenarioName::QutritRegion => scenarios::scenario_qutrit_region(&params(params_path)?)?,
        ScenarioName::Discrete => scenarios::scenario_discrete_points(&params(params_path)?)?,
    };
    for path in result.write(outdir, plotdata)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    let plotdata = cli.plotdata;
    match cli.command {
        Command::Lift {
            input,
            method,
            epsilon_policy,
            segment_points,
            out,
            report,
        } => lift(
            &input,
            method,
            epsilon_policy,
            segment_points,
            &out,
            report.as_deref(),
            plotdata,
        ),
        Command::Verify {
            traj,
            lift,
            step,
            tol,
            out,
        } => verify(&traj, &lift, step, tol, out.as_deref(), plotdata),
        Command::Tangent {
            state,
            direction,
            tol,
        } => tangent(&state, &direction, tol, plotdata),
        Command::Mindiss {
            state,
            direction,
            rel_tol,
        } => mindiss(&state, &direction, rel_tol, plotdata),
        Command::Scenario {
            name,
            params,
            outdir,
        } => scenario(name, params.as_deref(), &outdir, plotdata),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("lindlift: {line}");
            return ExitCode::from(3);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("lindlift: {f}");
            ExitCode::from(f.code())
        }
    }
}
