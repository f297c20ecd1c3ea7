use std::path::{Path, PathBuf};

use speechjudge::meta_corpus::{scatter_data, write_scatter, SUB_DIMENSIONS};
use speechjudge::{correlation_report, load_ratings, RatingRecord};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io;

pub fn load_table(cfg: &RunConfig, path: Option<&Path>) -> CliResult<Vec<RatingRecord>> {
    let path = path
        .or(cfg.paths.ratings.as_deref())
        .ok_or_else(|| CliError::usage("no ratings table: pass --ratings or set paths.ratings"))?;
    load_ratings(io::open(path)?, &cfg.columns)
        .map_err(|e| CliError::input("bad ratings table", format!("{}: {e}", path.display())))
}

pub fn run(cfg: &RunConfig, ratings: Option<&Path>, dump_scatter: bool) -> CliResult<Vec<PathBuf>> {
    let records = load_table(cfg, ratings)?;
    let report = correlation_report(&records).map_err(|e| CliError::input("degenerate table", e.to_string()))?;
    let mut written = vec![io::write_text(&cfg.out_dir, "correlation_report.toml", &report.to_text())?];
    for dim in SUB_DIMENSIONS {
        let fit = report.get(dim).expect("sub-dimension");
        log::info!("{}: r = {:.4}, mos = {:.4} x + {:.4}", dim.key(), fit.pearson_r, fit.slope, fit.intercept);
    }
    if dump_scatter {
        for dim in SUB_DIMENSIONS {
            let (path, w) = io::create(&cfg.out_dir, &format!("scatter_{}.csv", dim.key()))?;
            write_scatter(w, &scatter_data(&records, dim)).map_err(|e| io::write_error(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}
