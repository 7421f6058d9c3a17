use crate::config::{parse_vector, read_floats, read_matrix, Format, GridSpec, Model, Resolved};
use crate::output::{emit, Cell, Table};
use crate::CliError;
use infogeo::geodesics::{
    isonormal_problem, rgauss_problem, vmf_problem, BaseSpace, GeodesicProblem, Termination,
};
use infogeo::model_rgauss::{eta_of_sigma, PsiTable, RGaussModel};
use infogeo::model_vmf::VmfModel;
use infogeo::spd::{affine_distance, SpdMatrix, SpdTangent};
use infogeo::warped::{curvatures, IsoNormalProfile, WarpProfile};
use std::path::Path;

const PSI_SIGMA_GRID: GridSpec = GridSpec { min: 0.05, max: 5.0, count: 40, log: true };
const DEFAULT_SAMPLES: usize = 100_000;
pub const PLATEAU_TOLERANCE: f64 = 0.01;

fn write(cfg: &Resolved, table: &Table) -> Result<(), CliError> {
    emit(&table.render(cfg.format()?), cfg.out()?.as_deref())
}

pub fn table1(cfg: &Resolved) -> Result<(), CliError> {
    let lo = cfg.n()?.unwrap_or(2);
    let hi = cfg.n_max()?.unwrap_or(8);
    if lo < 2 || hi < lo || hi > infogeo::model_vmf::MAX_DIM {
        return Err(CliError::Config(format!(
            "table1 needs 2 <= n <= n-max <= {}",
            infogeo::model_vmf::MAX_DIM
        )));
    }
    let mut table = Table::new(["n", "Ks_inf", "Kr_inf", "plateau_spread"]);
    let mut wide = vec![];
    for n in lo..=hi {
        let p = VmfModel::new(n)?.limiting_curvatures()?;
        if !(p.spread <= PLATEAU_TOLERANCE) {
            wide.push(n);
        }
        table.push(vec![Cell::Int(n as i64), Cell::Float(p.ks), Cell::Float(p.kr), Cell::Float(p.spread)]);
    }
    write(cfg, &table)?;
    if !wide.is_empty() {
        return Err(CliError::Numerical(format!(
            "plateau spread exceeds {PLATEAU_TOLERANCE} for n = {wide:?}"
        )));
    }
    Ok(())
}

pub fn curvature(cfg: &Resolved) -> Result<(), CliError> {
    let model = cfg.model()?.unwrap_or(Model::Vmf);
    let table = match model {
        Model::Vmf => {
            let n = cfg.n()?.unwrap_or(3);
            let grid = cfg.grid(GridSpec { min: 0.05, max: 200.0, count: 100, log: true })?;
            let prof = VmfModel::new(n)?.curvature_profile(&grid.points())?;
            let mut t = Table::new(["eta", "Ks", "Kr"]);
            for p in prof.points {
                t.push(vec![Cell::Float(p.eta), Cell::Float(p.ks), Cell::Float(p.kr)]);
            }
            t
        }
        Model::Isonormal => {
            let d = cfg.n()?.unwrap_or(2);
            let grid = cfg.grid(GridSpec { min: 0.1, max: 10.0, count: 50, log: true })?;
            let profile = IsoNormalProfile::new(d)?;
            let mut t = Table::new(["sigma", "Ks", "Kr"]);
            for s in grid.points() {
                let (ks, kr) = curvatures(&profile, 0.0, s)?;
                t.push(vec![Cell::Float(s), Cell::Float(ks), Cell::Float(kr)]);
            }
            t
        }
        Model::Rgauss => {
            return Err(CliError::Config(
                "curvature supports the single-block models vmf and isonormal".into(),
            ))
        }
    };
    write(cfg, &table)
}

fn psi_table_for(cfg: &Resolved, n: usize) -> Result<PsiTable, CliError> {
    if let Some(path) = cfg.psi_table()? {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        return Ok(PsiTable::from_csv(n, &text)?);
    }
    let grid = cfg.grid(PSI_SIGMA_GRID)?;
    if !(grid.min > 0.0) {
        return Err(CliError::Config("sigma grid must be positive".into()));
    }
    let eta: Vec<f64> = grid.points().into_iter().map(eta_of_sigma).collect();
    Ok(infogeo::model_rgauss::tabulate_psi(n, &eta, cfg.samples(DEFAULT_SAMPLES)?, cfg.seed()?)?)
}

pub fn psi_table(cfg: &Resolved) -> Result<(), CliError> {
    let model = cfg.model()?.unwrap_or(Model::Rgauss);
    if model != Model::Rgauss {
        return Err(CliError::Config("psi-table is only defined for --model rgauss".into()));
    }
    let n = cfg.n()?.unwrap_or(2);
    let table = psi_table_for(cfg, n)?;
    let csv = table.to_csv();
    let text = match cfg.format()? {
        Format::Csv => csv,
        Format::Dat => {
            let mut out = String::from("# ");
            out.push_str(&csv.replace(',', " "));
            out
        }
    };
    emit(&text, cfg.out()?.as_deref())
}

pub fn distance(cfg: &Resolved, a: &Path, b: &Path) -> Result<(), CliError> {
    let model = cfg.model()?.unwrap_or(Model::Rgauss);
    let sigma = cfg.sigma()?.unwrap_or(1.0);
    let table = match model {
        Model::Rgauss => {
            let x = SpdMatrix::new(read_matrix(a)?)?;
            let y = SpdMatrix::new(read_matrix(b)?)?;
            let n = x.dim();
            if y.dim() != n || cfg.n()?.is_some_and(|m| m != n) {
                return Err(CliError::Config("matrix sizes do not agree".into()));
            }
            let d = affine_distance(&x, &y)?;
            let model = RGaussModel::new(n)?.with_table(psi_table_for(cfg, n)?)?;
            let m = model.generalized_mahalanobis(&x, &y, sigma)?;
            let mut t = Table::new(["affine", "mahalanobis"]);
            t.push(vec![Cell::Float(d), Cell::Float(m)]);
            t
        }
        Model::Isonormal => {
            let x = read_floats(a)?;
            let y = read_floats(b)?;
            if x.len() != y.len() || x.is_empty() || cfg.n()?.is_some_and(|m| m != x.len()) {
                return Err(CliError::Config("point dimensions do not agree".into()));
            }
            let m = IsoNormalProfile::new(x.len())?.mahalanobis(&x, &y, sigma)?;
            let e = x.iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let mut t = Table::new(["euclidean", "mahalanobis"]);
            t.push(vec![Cell::Float(e), Cell::Float(m)]);
            t
        }
        Model::Vmf => return Err(CliError::Config("distance supports rgauss and isonormal".into())),
    };
    write(cfg, &table)
}

fn run_geodesic<P: WarpProfile, B: BaseSpace>(cfg: &Resolved, prob: GeodesicProblem<P, B>) -> Result<(), CliError> {
    let path = prob.solve(cfg.t_end()?, cfg.steps()?)?;
    let mut header = vec!["t".to_string(), "sigma".into(), "r".into()];
    header.extend(prob.base.coordinate_names());
    let mut table = Table::new(header);
    for s in &path.samples {
        let mut row = vec![Cell::Float(s.t), Cell::Float(s.sigma), Cell::Float(s.r)];
        row.extend(prob.base.flatten(&s.point).into_iter().map(Cell::Float));
        table.push(row);
    }
    write(cfg, &table)?;
    match path.termination {
        Termination::Completed => Ok(()),
        Termination::Escaped { t, sigma, reason } => {
            Err(CliError::Escape(format!("{reason} at t = {t:.6e} (sigma = {sigma:.6e})")))
        }
    }
}

pub fn geodesic(cfg: &Resolved) -> Result<(), CliError> {
    let model = cfg.model()?.unwrap_or(Model::Vmf);
    let x0 = cfg.x0()?.ok_or_else(|| CliError::Config("geodesic needs --x0".into()))?;
    let u = cfg.u()?;
    match model {
        Model::Vmf => {
            let z = parse_vector(&x0)?;
            let u = parse_vector(u.as_deref().ok_or_else(|| CliError::Config("vmf geodesic needs --u".into()))?)?;
            let vmf = VmfModel::new(z.len())?;
            run_geodesic(cfg, vmf_problem(&vmf, &z, &u)?)
        }
        Model::Isonormal => {
            let x = parse_vector(&x0)?;
            let u = match u {
                Some(text) => parse_vector(&text)?,
                None => vec![0.0; x.len()],
            };
            let sigma = cfg.sigma()?.unwrap_or(1.0);
            run_geodesic(cfg, isonormal_problem(x, sigma, cfg.u_sigma()?, u)?)
        }
        Model::Rgauss => {
            let x = SpdMatrix::new(read_matrix(Path::new(&x0))?)?;
            let n = x.dim();
            let u = match u {
                Some(path) => SpdTangent::new(read_matrix(Path::new(&path))?)?,
                None => SpdTangent::zeros(n),
            };
            let sigma = cfg.sigma()?.unwrap_or(1.0);
            let model = RGaussModel::new(n)?.with_table(psi_table_for(cfg, n)?)?;
            run_geodesic(cfg, rgauss_problem(&model, x, sigma, cfg.u_sigma()?, &u)?)
        }
    }
}
