//! JSON and CSV file formats.
//!
//! Matrices are nested arrays of rows whose entries are `[re, im]` pairs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gksl::{Dissipator, Lindbladian, BASIS_NAME};
use crate::lift::{Generator, LiftFamily, PointDiagnostics};
use crate::matcore::{CMatrix, C64, MAX_DIM};
use crate::paths::{RankProfile, Source, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixJson(pub Vec<Vec<[f64; 2]>>);

/// Signed zeros are written as `0.0`.
impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        Self(
            (0..m.rows())
                .map(|i| {
                    (0..m.cols())
                        .map(|j| [m[(i, j)].re + 0.0, m[(i, j)].im + 0.0])
                        .collect()
                })
                .collect(),
        )
    }
}

impl TryFrom<&MatrixJson> for CMatrix {
    type Error = Error;

    fn try_from(m: &MatrixJson) -> Result<Self> {
        let n = m.0.len();
        if n == 0 || n > MAX_DIM * MAX_DIM {
            return Err(Error::InvalidInput(format!("matrix with {n} rows")));
        }
        let rows: Vec<Vec<C64>> =
            m.0.iter()
                .map(|r| r.iter().map(|e| C64::new(e[0], e[1])).collect())
                .collect();
        let out = CMatrix::from_rows(&rows)?;
        if !out.is_finite() {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(out)
    }
}

fn matrices(ms: &[MatrixJson]) -> Result<Vec<CMatrix>> {
    ms.iter().map(CMatrix::try_from).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LindbladianJson {
    pub dim: usize,
    pub hamiltonian: MatrixJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jumps: Option<Vec<MatrixJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kossakowski: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<String>,
}

impl From<&Lindbladian> for LindbladianJson {
    fn from(l: &Lindbladian) -> Self {
        let hamiltonian = MatrixJson::from(l.hamiltonian());
        match l.dissipator() {
            Dissipator::Jumps { operators, rates } => Self {
                dim: l.dim(),
                hamiltonian,
                jumps: Some(operators.iter().map(MatrixJson::from).collect()),
                rates: Some(rates.clone()),
                kossakowski: None,
                basis: None,
            },
            Dissipator::Kossakowski(c) => Self {
                dim: l.dim(),
                hamiltonian,
                jumps: None,
                rates: None,
                kossakowski: Some(MatrixJson::from(c)),
                basis: Some(BASIS_NAME.to_string()),
            },
        }
    }
}

impl TryFrom<&LindbladianJson> for Lindbladian {
    type Error = Error;

    fn try_from(j: &LindbladianJson) -> Result<Self> {
        let h = CMatrix::try_from(&j.hamiltonian)?;
        if h.rows() != j.dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0} Hamiltonian", j.dim),
                found: format!("{}x{}", h.rows(), h.cols()),
            });
        }
        match (&j.jumps, &j.rates, &j.kossakowski) {
            (Some(ops), Some(rates), None) => {
                Lindbladian::with_jumps(&h, matrices(ops)?, rates.clone())
            }
            (None, None, Some(c)) => {
                if let Some(b) = &j.basis {
                    if b != BASIS_NAME {
                        return Err(Error::InvalidInput(format!("unknown operator basis {b:?}")));
                    }
                }
                Lindbladian::with_kossakowski(&h, CMatrix::try_from(c)?)
            }
            _ => Err(Error::InvalidInput(
                "a generator needs either jumps and rates or a Kossakowski matrix".into(),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryJson {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivatives: Option<Vec<MatrixJson>>,
}

impl TrajectoryJson {
    /// Samples `traj` on `grid` with derivatives.
    pub fn sample(traj: &Trajectory, grid: &[f64]) -> Result<Self> {
        let mut states = Vec::with_capacity(grid.len());
        let mut derivatives = Vec::with_capacity(grid.len());
        for &t in grid {
            let (rho, v) = traj.sample_with_derivative(t, crate::paths::DEFAULT_H)?;
            states.push(MatrixJson::from(rho.as_matrix()));
            derivatives.push(MatrixJson::from(v.as_matrix()));
        }
        Ok(Self {
            dim: traj.dim(),
            times: grid.to_vec(),
            states,
            derivatives: Some(derivatives),
        })
    }

    /// Stored samples of a discrete trajectory.
    pub fn from_discrete(traj: &Trajectory) -> Result<Self> {
        match traj.source() {
            Source::Grid {
                times,
                states,
                derivatives,
            } => Ok(Self {
                dim: traj.dim(),
                times: times.clone(),
                states: states.iter().map(MatrixJson::from).collect(),
                derivatives: derivatives
                    .as_ref()
                    .map(|ds| ds.iter().map(MatrixJson::from).collect()),
            }),
            Source::PiecewiseAffine { times, states } => Ok(Self {
                dim: traj.dim(),
                times: times.clone(),
                states: states.iter().map(MatrixJson::from).collect(),
                derivatives: None,
            }),
            Source::Analytic(_) => Err(Error::InvalidInput(
                "analytic trajectories must be sampled on a grid".into(),
            )),
        }
    }

    /// Grid trajectory; derivatives, when absent, come from finite differences.
    pub fn to_trajectory(&self) -> Result<Trajectory> {
        let traj = Trajectory::from_grid(
            self.times.clone(),
            matrices(&self.states)?,
            self.derivatives.as_deref().map(matrices).transpose()?,
        )?;
        if traj.dim() != self.dim {
            return Err(Error::ShapeMismatch {
                expected: format!("dim {}", self.dim),
                found: format!("dim {}", traj.dim()),
            });
        }
        Ok(traj)
    }

    /// Piecewise-affine interpolation through the stored states.
    pub fn to_piecewise_affine(&self) -> Result<Trajectory> {
        Trajectory::piecewise_affine(matrices(&self.states)?, self.times.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftFamilyJson {
    pub dim: usize,
    pub times: Vec<f64>,
    pub generators: Vec<LindbladianJson>,
    pub diagnostics: Vec<PointDiagnostics>,
}

impl From<&LiftFamily> for LiftFamilyJson {
    fn from(f: &LiftFamily) -> Self {
        Self {
            dim: f.dim(),
            times: f.times().to_vec(),
            generators: f
                .generators()
                .iter()
                .map(|g| LindbladianJson::from(&g.to_lindbladian()))
                .collect(),
            diagnostics: f.diagnostics().to_vec(),
        }
    }
}

impl TryFrom<&LiftFamilyJson> for LiftFamily {
    type Error = Error;

    fn try_from(j: &LiftFamilyJson) -> Result<Self> {
        let generators = j
            .generators
            .iter()
            .map(|g| Lindbladian::try_from(g).map(Generator::Lindblad))
            .collect::<Result<Vec<_>>>()?;
        if let Some(g) = generators.iter().find(|g| g.dim() != j.dim) {
            return Err(Error::ShapeMismatch {
                expected: format!("dim {}", j.dim),
                found: format!("dim {}", g.dim()),
            });
        }
        LiftFamily::new(j.dim, j.times.clone(), generators, j.diagnostics.clone())
    }
}

/// Shortest decimal text that round-trips, or empty for a missing value.
fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Per-point diagnostics as CSV.
pub fn diagnostics_csv(diagnostics: &[PointDiagnostics]) -> String {
    let mut out = String::from("t,epsilon,residual,sigma_min_eig,gksl_valid,gen_norm\n");
    for d in diagnostics {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            d.t,
            opt(d.epsilon),
            d.residual,
            opt(d.sigma_min_eig),
            d.gksl_valid,
            d.gen_norm
        );
    }
    out
}

/// Rank profile as CSV with columns `t, lambda_1..lambda_d, rank`.
pub fn rank_profile_csv(profile: &RankProfile) -> String {
    let d = profile.eigenvalues.first().map_or(0, Vec::len);
    let mut out = String::from("t");
    for k in 1..=d {
        let _ = write!(out, ",lambda_{k}");
    }
    out.push_str(",rank\n");
    for ((t, ev), r) in profile
        .times
        .iter()
        .zip(&profile.eigenvalues)
        .zip(&profile.ranks)
    {
        out.push_str(&t.to_string());
        for x in ev {
            let _ = write!(out, ",{x}");
        }
        let _ = writeln!(out, ",{r}");
    }
    out
}

/// Columns for external plotting; the first column is `t`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotTable {
    pub fn new(name: &str, series: &[&str]) -> Self {
        let mut columns = vec!["t".to_string()];
        columns.extend(series.iter().map(|s| s.to_string()));
        Self {
            name: name.to_string(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, values: &[f64]) {
        debug_assert_eq!(values.len() + 1, self.columns.len());
        let mut row = vec![t];
        row.extend_from_slice(values);
        self.rows.push(row);
    }

    /// CSV with 17 significant digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn read_matrix(path: &Path) -> Result<CMatrix> {
    CMatrix::try_from(&read_json::<MatrixJson>(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gksl::VALIDITY_TOL;
    use crate::lift::{replacer_lift, EpsilonPolicy};
    use crate::matcore::pauli;
    use std::sync::Arc;

    #[test]
    fn matrix_round_trip() {
        let m = pauli::y();
        let j = MatrixJson::from(&m);
        assert_eq!(
            serde_json::to_string(&j).unwrap(),
            "[[[0.0,0.0],[0.0,-1.0]],[[0.0,1.0],[0.0,0.0]]]"
        );
        assert_eq!(CMatrix::try_from(&j).unwrap(), m);
    }

    #[test]
    fn ragged_matrix_rejected() {
        let j: MatrixJson = serde_json::from_str("[[[1,0],[0,0]],[[0,0]]]").unwrap();
        assert!(CMatrix::try_from(&j).is_err());
    }

    #[test]
    fn lindbladian_forms_round_trip() {
        let l = Lindbladian::with_jumps(
            &pauli::z().scale(0.5),
            vec![CMatrix::unit(2, 1, 0)],
            vec![0.7],
        )
        .unwrap();
        let back = Lindbladian::try_from(&LindbladianJson::from(&l)).unwrap();
        assert_eq!(back, l);
        let k = l.to_kossakowski_form();
        let j = LindbladianJson::from(&k);
        assert_eq!(j.basis.as_deref(), Some(BASIS_NAME));
        let back = Lindbladian::try_from(&j).unwrap();
        assert!(back.to_superoperator().distance(&l.to_superoperator()) <= 1e-12);
        assert!(back.gksl_validity(VALIDITY_TOL).valid);
    }

    #[test]
    fn both_dissipator_forms_rejected() {
        let l = Lindbladian::zero(2);
        let mut j = LindbladianJson::from(&l.to_kossakowski_form());
        j.jumps = Some(vec![]);
        j.rates = Some(vec![]);
        assert!(Lindbladian::try_from(&j).is_err());
    }

    #[test]
    fn family_round_trip_preserves_action() {
        let traj = Trajectory::analytic(
            2,
            0.0,
            1.0,
            Arc::new(|t| {
                (
                    CMatrix::diag(&[0.75 - t / 4.0, 0.25 + t / 4.0]),
                    Some(CMatrix::diag(&[-0.25, 0.25])),
                )
            }),
        )
        .unwrap();
        let fam = replacer_lift(&traj, &[0.0, 0.5, 1.0], EpsilonPolicy::Adaptive).unwrap();
        let text = serde_json::to_string(&LiftFamilyJson::from(&fam)).unwrap();
        let back =
            LiftFamily::try_from(&serde_json::from_str::<LiftFamilyJson>(&text).unwrap()).unwrap();
        for (a, b) in fam.superoperators().iter().zip(back.superoperators()) {
            assert!(a.distance(&b) <= 1e-12);
        }
        assert_eq!(back.diagnostics(), fam.diagnostics());
    }

    #[test]
    fn trajectory_json_round_trip() {
        let traj = Trajectory::analytic(
            2,
            0.0,
            1.0,
            Arc::new(|t| (CMatrix::diag(&[1.0 - t / 2.0, t / 2.0]), None)),
        )
        .unwrap();
        let j = TrajectoryJson::sample(&traj, &[0.0, 0.5, 1.0]).unwrap();
        let back = j.to_trajectory().unwrap();
        assert!(
            back.state(0.25)
                .unwrap()
                .distance(&CMatrix::diag(&[0.875, 0.125]))
                <= 1e-12
        );
        let (_, v) = back.sample_with_derivative(0.5, 1e-5).unwrap();
        assert!(v.distance(&CMatrix::diag(&[-0.5, 0.5])) <= 1e-8);
    }

    #[test]
    fn csv_formats() {
        let mut p = PlotTable::new("demo", &["x"]);
        p.push(0.1, &[1.0 / 3.0]);
        assert_eq!(
            p.to_csv(),
            "t,x\n1.0000000000000001e-1,3.3333333333333331e-1\n"
        );
        let d = PointDiagnostics {
            t: 0.5,
            epsilon: None,
            residual: 0.0,
            sigma_min_eig: None,
            gksl_valid: true,
            gen_norm: 1.5,
        };
        assert_eq!(
            diagnostics_csv(&[d]),
            "t,epsilon,residual,sigma_min_eig,gksl_valid,gen_norm\n0.5,,0,,true,1.5\n"
        );
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = std::env::temp_dir().join(format!("lindlift-io-{}", std::process::id()));
        let path = dir.join("out.json");
        write_json(&path, &vec![1, 2]).unwrap();
        write_json(&path, &vec![3]).unwrap();
        assert_eq!(read_json::<Vec<i32>>(&path).unwrap(), vec![3]);
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }
}
