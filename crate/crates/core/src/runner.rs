//! Config-driven runs: a single case with snapshots and diagnostics, or a
//! convergence sweep over a mesh sequence.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::cases::{
    cylinder_case, kidder_case, kidder_scatter, l2_error, manufactured_case, max_entropy_deviation_pointwise,
    observed_order, scatter_csv, CaseDefinition, Kidder, MeshRecipe, OscillatingCylinder, CYLINDER_BOX_HALF_WIDTH,
    CYLINDER_RADIUS,
};
use crate::config::{CaseName, RunConfig};
use crate::error::{Error, Result};
use crate::euler::{State, NVAR};
use crate::scheme::{SchemeOptions, Solver, StepReport, STAGE_NAMES};
use crate::vtk::write_vtk;

const GEOMETRY_TOL: f64 = 1e-12;

/// Builds the case named in `cfg` on the mesh from `recipe`, with the
/// correction toggles applied. Fails before any time stepping on bad tags.
pub fn build_case(cfg: &RunConfig, recipe: &MeshRecipe) -> Result<CaseDefinition> {
    cfg.validate()?;
    let mesh = recipe.build()?;
    let mut case = match cfg.case {
        CaseName::Manufactured => {
            let radius = match recipe {
                MeshRecipe::Disk { radius, .. } => *radius,
                _ => (0..mesh.num_vertices())
                    .filter(|&v| mesh.is_boundary_vertex(v))
                    .map(|v| mesh.positions()[v][0].hypot(mesh.positions()[v][1]))
                    .fold(0.0, f64::max),
            };
            manufactured_case(mesh, radius, cfg.correction_default)?
        }
        CaseName::Kidder => {
            let k = Kidder::default();
            if let MeshRecipe::Annulus { inner, outer, .. } = recipe {
                if (inner - k.r_inner).abs() > GEOMETRY_TOL || (outer - k.r_outer).abs() > GEOMETRY_TOL {
                    return Err(Error::Config(format!(
                        "kidder shell is [{}, {}], mesh annulus is [{inner}, {outer}]",
                        k.r_inner, k.r_outer
                    )));
                }
            }
            kidder_case(mesh, cfg.correction_default)?
        }
        CaseName::CylinderHorizontal | CaseName::CylinderVertical => {
            if let MeshRecipe::CylinderBox { radius, half_width, .. } = recipe {
                if (radius - CYLINDER_RADIUS).abs() > GEOMETRY_TOL
                    || (half_width - CYLINDER_BOX_HALF_WIDTH).abs() > GEOMETRY_TOL
                {
                    return Err(Error::Config(format!(
                        "cylinder case needs radius {CYLINDER_RADIUS} and half_width {CYLINDER_BOX_HALF_WIDTH}"
                    )));
                }
            }
            let setup = if cfg.case == CaseName::CylinderHorizontal {
                OscillatingCylinder::horizontal()
            } else {
                OscillatingCylinder::vertical()
            };
            cylinder_case(setup, mesh, cfg.correction_default)?
        }
    };
    for (tag, &on) in &cfg.correction {
        let spec = case.boundary.get_mut(tag).ok_or_else(|| {
            Error::Config(format!(
                "correction tag '{tag}' not in the mesh (tags: {})",
                case.mesh.tag_names().join(", ")
            ))
        })?;
        if on && spec.descriptor.is_none() {
            return Err(Error::Config(format!(
                "tag '{tag}' has no boundary descriptor to correct against"
            )));
        }
        spec.corrected = on;
    }
    if let Some(t) = cfg.final_time {
        case.t_final = t;
    }
    Ok(case)
}

/// Reference entropy for isentropic cases.
fn reference_entropy(case: CaseName) -> Option<f64> {
    match case {
        CaseName::Manufactured => None,
        CaseName::Kidder => Some(Kidder::default().entropy),
        CaseName::CylinderHorizontal | CaseName::CylinderVertical => Some(1.0),
    }
}

/// One line of the conservation log.
#[derive(Clone, Debug, PartialEq)]
pub struct ConservationEntry {
    pub step: usize,
    pub time: f64,
    pub totals: State,
    /// `totals_new - totals_old + boundary outflow - source`, per component.
    pub defect: State,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub case: CaseName,
    pub degree: usize,
    pub cells: usize,
    pub grid_size: f64,
    pub steps: usize,
    pub final_time: f64,
    pub snapshot_times: Vec<f64>,
    /// `[rho, u]` L2 errors, when the case has an exact solution.
    pub l2: Option<[f64; 2]>,
    /// Largest pointwise `|S - s_ref|`, for isentropic cases.
    pub entropy_deviation: Option<f64>,
    /// Smallest vertex radius at the end of a Kidder run.
    pub inner_radius: Option<f64>,
    pub conservation: Vec<ConservationEntry>,
    pub stage_seconds: [f64; 5],
    pub wall_seconds: f64,
}

impl RunReport {
    pub fn max_conservation_defect(&self) -> State {
        let mut m = [0.0; NVAR];
        for e in &self.conservation {
            for v in 0..NVAR {
                m[v] = f64::max(m[v], e.defect[v].abs());
            }
        }
        m
    }

    /// Deterministic text summary; timings are left out.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "case = {}", self.case.as_str());
        let _ = writeln!(s, "degree = {}", self.degree);
        let _ = writeln!(s, "cells = {}", self.cells);
        let _ = writeln!(s, "grid_size = {:.16e}", self.grid_size);
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "final_time = {:.16e}", self.final_time);
        let times: Vec<String> = self.snapshot_times.iter().map(|t| format!("{t:.16e}")).collect();
        let _ = writeln!(s, "snapshots = [{}]", times.join(", "));
        if let Some([rho, u]) = self.l2 {
            let _ = writeln!(s, "l2_rho = {rho:.16e}\nl2_u = {u:.16e}");
        }
        if let Some(d) = self.entropy_deviation {
            let _ = writeln!(s, "max_entropy_deviation = {d:.16e}");
        }
        if let Some(r) = self.inner_radius {
            let _ = writeln!(s, "inner_radius = {r:.16e}");
        }
        let d = self.max_conservation_defect();
        let _ = writeln!(
            s,
            "max_conservation_defect = [{:.6e}, {:.6e}, {:.6e}, {:.6e}]",
            d[0], d[1], d[2], d[3]
        );
        s
    }

    pub fn timings(&self) -> String {
        let mut s = format!("wall_seconds = {:.3}\n", self.wall_seconds);
        for (name, t) in STAGE_NAMES.iter().zip(self.stage_seconds) {
            let _ = writeln!(s, "stage {name} = {t:.3}");
        }
        s
    }

    pub fn conservation_csv(&self) -> String {
        let mut s =
            String::from("step,time,mass,momentum_x,momentum_y,energy,defect_mass,defect_mx,defect_my,defect_energy\n");
        for e in &self.conservation {
            let _ = write!(s, "{},{:.16e}", e.step, e.time);
            for v in e.totals.iter().chain(e.defect.iter()) {
                let _ = write!(s, ",{v:.16e}");
            }
            s.push('\n');
        }
        s
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Runs the case to its final time, writing outputs when `output_dir` is set.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    let case = build_case(cfg, &cfg.mesh)?;
    let report = run_case(cfg, &case)?;
    if let Some(dir) = &cfg.output_dir {
        write_text(&dir.join("report.txt"), &(report.summary() + &report.timings()))?;
        write_text(&dir.join("conservation.csv"), &report.conservation_csv())?;
    }
    Ok(report)
}

fn run_case(cfg: &RunConfig, case: &CaseDefinition) -> Result<RunReport> {
    let wall = Instant::now();
    let degree = cfg.degree;
    let gas = case.gas;
    let initial = case.initial_averages(degree).map_err(|e| e.at_stage("initialize", 0))?;
    let options = SchemeOptions {
        degree,
        cfl: cfg.cfl,
        gas,
    };
    let mut solver = Solver::new(
        case.mesh.clone(),
        initial,
        0.0,
        options,
        case.boundary.clone(),
        case.motion.clone(),
        case.source.clone(),
    )?;
    let grid_size = solver.mesh().grid_size();
    let out_dir = cfg.output_dir.as_deref();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let snapshot = |solver: &Solver, index: usize| -> Result<()> {
        if let (Some(dir), true) = (out_dir, cfg.write_vtk) {
            let title = format!("{} t = {:.6e}", cfg.case.as_str(), solver.time());
            write_vtk(
                dir.join(format!("snapshot_{index:04}.vtk")),
                solver.mesh(),
                solver.averages(),
                &gas,
                &title,
            )?;
        }
        Ok(())
    };
    snapshot(&solver, 0)?;

    let mut conservation = Vec::new();
    let mut stage_seconds = [0.0; 5];
    let mut before = solver.totals();
    let mut observe = |s: &Solver, r: &StepReport| {
        let mut defect = [0.0; NVAR];
        for v in 0..NVAR {
            defect[v] = r.totals[v] - before[v] + r.boundary_flux[v] - r.source[v];
        }
        before = r.totals;
        conservation.push(ConservationEntry {
            step: r.step,
            time: s.time(),
            totals: r.totals,
            defect,
        });
        for (acc, t) in stage_seconds.iter_mut().zip(r.stage_seconds) {
            *acc += t;
        }
    };

    let t_final = case.t_final;
    let mut snapshot_times = Vec::new();
    let mut index = 0;
    while solver.time() < t_final {
        let target = match cfg.snapshot_interval {
            // Targets are multiples of the interval so they do not accumulate rounding.
            Some(dt) => (((index + 1) as f64) * dt).min(t_final),
            None => t_final,
        };
        solver.advance_to(target, &mut observe)?;
        index += 1;
        snapshot_times.push(solver.time());
        snapshot(&solver, index)?;
    }

    let polys = solver
        .reconstruct()
        .map_err(|e| e.at_stage("diagnostics", solver.steps()))?;
    let basis = solver.reconstructor().basis();
    let l2 = match &case.exact {
        Some(exact) => Some(l2_error(
            solver.mesh(),
            basis,
            &polys,
            exact.as_ref(),
            solver.time(),
            &gas,
        )?),
        None => None,
    };
    let entropy_deviation = match reference_entropy(cfg.case) {
        Some(s) => Some(max_entropy_deviation_pointwise(basis, &polys, &gas, s)?),
        None => None,
    };
    let inner_radius = (cfg.case == CaseName::Kidder).then(|| {
        solver
            .mesh()
            .positions()
            .iter()
            .map(|p| p[0].hypot(p[1]))
            .fold(f64::INFINITY, f64::min)
    });
    if let (Some(dir), true, CaseName::Kidder) = (out_dir, cfg.write_scatter, cfg.case) {
        write_text(
            &dir.join("scatter.csv"),
            &scatter_csv(&kidder_scatter(solver.mesh(), solver.averages())),
        )?;
    }

    Ok(RunReport {
        case: cfg.case,
        degree,
        cells: solver.mesh().num_cells(),
        grid_size,
        steps: solver.steps(),
        final_time: solver.time(),
        snapshot_times,
        l2,
        entropy_deviation,
        inner_radius,
        conservation,
        stage_seconds,
        wall_seconds: wall.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub grid_size: f64,
    pub cells: usize,
    /// `[rho, u]`.
    pub l2: [f64; 2],
    /// Order against the previous row; `None` on the first row.
    pub order: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Orders come only from consecutive rows.
    pub fn from_errors(entries: &[(f64, usize, [f64; 2])]) -> Self {
        let rows = entries
            .iter()
            .enumerate()
            .map(|(i, &(h, cells, l2))| {
                let order = (i > 0).then(|| {
                    let (h0, _, e0) = entries[i - 1];
                    [observed_order(h0, e0[0], h, l2[0]), observed_order(h0, e0[1], h, l2[1])]
                });
                SweepRow {
                    grid_size: h,
                    cells,
                    l2,
                    order,
                }
            })
            .collect();
        Self { rows }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("grid_size,cells,l2_rho,order_rho,l2_u,order_u\n");
        for r in &self.rows {
            let (o_rho, o_u) = match r.order {
                Some([a, b]) => (format!("{a:.4}"), format!("{b:.4}")),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(
                s,
                "{:.6e},{},{:.6e},{o_rho},{:.6e},{o_u}",
                r.grid_size, r.cells, r.l2[0], r.l2[1]
            );
        }
        s
    }
}

/// Runs the case on every mesh in `cfg.sweep` (or on `cfg.mesh` alone when
/// the list is empty). Writes `sweep.csv` when `output_dir` is set.
pub fn convergence_sweep(cfg: &RunConfig) -> Result<SweepTable> {
    let recipes: Vec<&MeshRecipe> = if cfg.sweep.is_empty() {
        vec![&cfg.mesh]
    } else {
        cfg.sweep.iter().collect()
    };
    // Build every case first so configuration errors surface before any compute.
    let cases = recipes.iter().map(|r| build_case(cfg, r)).collect::<Result<Vec<_>>>()?;
    if cases[0].exact.is_none() {
        return Err(Error::Config(format!(
            "case {} has no exact solution to sweep against",
            cfg.case.as_str()
        )));
    }
    let quiet = RunConfig {
        output_dir: None,
        snapshot_interval: None,
        ..cfg.clone()
    };
    let mut entries = Vec::with_capacity(cases.len());
    for case in &cases {
        let r = run_case(&quiet, case)?;
        entries.push((r.grid_size, r.cells, r.l2.expect("exact solution checked above")));
    }
    let table = SweepTable::from_errors(&entries);
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        write_text(&dir.join("sweep.csv"), &table.to_csv())?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manufactured(rings: usize) -> RunConfig {
        RunConfig::from_toml_str(&format!(
            "case = \"manufactured\"\ndegree = 1\nfinal_time = 0.05\n[mesh]\nkind = \"disk\"\nradius = 1.0\nrings = {rings}\n"
        ))
        .unwrap()
    }

    #[test]
    fn manufactured_smoke() {
        let r = run(&manufactured(3)).unwrap();
        let [rho, u] = r.l2.unwrap();
        assert!(rho > 0.0 && u > 0.0 && rho < 1e-2);
        assert_eq!(r.conservation.len(), r.steps);
        let d = r.max_conservation_defect();
        assert!(d.iter().all(|x| *x < 1e-12), "{d:?}");
        assert_eq!(r.snapshot_times, vec![0.05]);
    }

    #[test]
    fn deterministic() {
        let cfg = manufactured(3);
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.summary(), b.summary());
        assert_eq!(a.conservation, b.conservation);
    }

    #[test]
    fn snapshots_hit_exactly() {
        let mut cfg = manufactured(2);
        cfg.snapshot_interval = Some(0.02);
        let r = run(&cfg).unwrap();
        assert_eq!(r.snapshot_times, vec![0.02, 0.04, 0.05]);
    }

    #[test]
    fn invalid_tag_rejected_before_compute() {
        let mut cfg = manufactured(2);
        cfg.correction.insert("nowhere".into(), true);
        assert!(matches!(build_case(&cfg, &cfg.mesh), Err(Error::Config(_))));
        assert!(matches!(run(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn kidder_geometry_checked() {
        let cfg = RunConfig::from_toml_str(
            "case = \"kidder\"\ndegree = 1\n[mesh]\nkind = \"annulus\"\ninner = 0.5\nouter = 1.0\nn_r = 2\nn_theta = 60\n",
        )
        .unwrap();
        assert!(matches!(build_case(&cfg, &cfg.mesh), Err(Error::Config(_))));
    }

    #[test]
    fn outputs_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::from_toml_str(
            "case = \"kidder\"\ndegree = 1\nfinal_time = 0.01\nwrite_vtk = true\nwrite_scatter = true\n\
             [mesh]\nkind = \"annulus\"\ninner = 0.9\nouter = 1.0\nn_r = 2\nn_theta = 60\n",
        )
        .unwrap();
        cfg.output_dir = Some(dir.path().to_path_buf());
        let r = run(&cfg).unwrap();
        assert!(r.entropy_deviation.unwrap() < 1e-2);
        assert!(r.inner_radius.unwrap() < 0.9);
        for f in [
            "report.txt",
            "conservation.csv",
            "scatter.csv",
            "snapshot_0000.vtk",
            "snapshot_0001.vtk",
        ] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
    }

    #[test]
    fn synthetic_orders_exact() {
        for m in 1..=3 {
            let p = (m + 1) as f64;
            let entries: Vec<_> = [0.2, 0.1, 0.05]
                .iter()
                .map(|&h: &f64| (h, 0, [h.powf(p), 3.0 * h.powf(p)]))
                .collect();
            let t = SweepTable::from_errors(&entries);
            assert!(t.rows[0].order.is_none());
            for r in &t.rows[1..] {
                let [a, b] = r.order.unwrap();
                assert!((a - p).abs() < 1e-12 && (b - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_row_sweep_has_empty_orders() {
        let t = convergence_sweep(&manufactured(2)).unwrap();
        assert_eq!(t.rows.len(), 1);
        let csv = t.to_csv();
        let line = csv.lines().nth(1).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 6);
        assert!(fields[3].is_empty() && fields[5].is_empty());
    }

    #[test]
    fn sweep_rejects_cases_without_exact_solution() {
        let cfg = RunConfig::from_toml_str(
            "case = \"cylinder_horizontal\"\ndegree = 1\n[mesh]\nkind = \"cylinder_box\"\nradius = 1.0\nhalf_width = 10.0\nn_theta = 16\nn_radial = 3\n",
        )
        .unwrap();
        assert!(matches!(convergence_sweep(&cfg), Err(Error::Config(_))));
    }
}
