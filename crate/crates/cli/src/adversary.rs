use crate::config::ExperimentConfig;
use crate::error::{invalid, CliError};
use crate::table::Table;
use disjhh::reductions::{linear_sketch_adversary, random_orthonormal_rows};
use nalgebra::{DMatrix, DVector};
use serde_json::json;

/// Largest `‖M(x1 − x2)‖₂` accepted as indistinguishable, relative to `‖M‖_F`.
const SKETCH_TOLERANCE: f64 = 1e-9;

/// Reads a matrix stored as a JSON array of equal-length rows.
fn read_matrix(path: &std::path::Path) -> Result<DMatrix<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text)
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Format(format!(
            "{}: expected a nonempty array of equal-length rows",
            path.display()
        )));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        cols,
        rows.into_iter().flatten(),
    ))
}

fn heavy(x: &DVector<f64>, i: usize) -> bool {
    x[i] != 0.0 && 16.0 * x[i] * x[i] >= x.norm_squared()
}

pub fn run(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let mut t = Table::new("adversary", vec!["index", "x1", "x2"]);
    let m = match &cfg.input {
        Some(path) => read_matrix(path)?,
        None => {
            let (r, n, seed) = (cfg.r()?, cfg.n()?, cfg.seed()?);
            if r > n {
                return Err(CliError::Config(format!("r = {r} must not exceed n = {n}")));
            }
            t.param("seed", seed);
            random_orthonormal_rows(r, n, seed)
        }
    };
    t.param("r", m.nrows());
    t.param("n", m.ncols());
    let pair = linear_sketch_adversary(&m).map_err(invalid)?;
    let i = pair.istar;
    for j in 0..m.ncols() {
        t.push(vec![json!(j), json!(pair.x1[j]), json!(pair.x2[j])]);
    }
    let gap = (&m * (&pair.x1 - &pair.x2)).norm();
    let tolerance = SKETCH_TOLERANCE * m.norm().max(1.0);
    t.note("istar", i);
    t.note("rank", pair.basis.ncols());
    t.note("sketch_gap", gap);
    t.note("indistinguishable", gap <= tolerance);
    t.note("x1_nonnegative", pair.x1.iter().all(|&v| v >= 0.0));
    t.note("x2_nonnegative", pair.x2.iter().all(|&v| v >= 0.0));
    t.note("istar_heavy_in_x1", heavy(&pair.x1, i));
    t.note("istar_zero_in_x2", pair.x2[i] == 0.0);
    Ok(t)
}
