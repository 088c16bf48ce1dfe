//! End-to-end runs: generate a cloud, build the cubes, evaluate the multiscale sums below a root
//! cube, and emit the report bundle.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::beta::BetaConfig;
use crate::choquet::critical_exponent;
use crate::cubes::{CubeTree, DEFAULT_C0, DEFAULT_RHO};
use crate::datasets::{generate, DatasetSpec};
use crate::error::{Result, TstError};
use crate::geometry::{dist2, PointCloud};
use crate::io::{cube_table_csv, fmt_f64, read_cube_table, to_versioned_json, CubeRow};
use crate::multiscale::{tst_report, TstParams, TstReport};
use crate::nets::NetHierarchy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub rho: f64,
    pub c0: f64,
    pub k_max: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { rho: DEFAULT_RHO, c0: DEFAULT_C0, k_max: 12 }
    }
}

fn default_ratio_ceiling() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub tree: TreeParams,
    #[serde(default)]
    pub tst: TstParams,
    /// Level of Q0, the cube of that level whose centre is nearest the centroid. When absent, the
    /// coarsest level whose spacing s satisfies s·(10A + 2) ≤ diam, so that A·B_{Q0} stays inside
    /// the hull of a curve-like set.
    #[serde(default)]
    pub root_level: Option<usize>,
    /// Pass iff both side-by-side ratios are at most this.
    #[serde(default = "default_ratio_ceiling")]
    pub ratio_ceiling: f64,
    #[serde(default)]
    pub beta: BetaConfig,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSpec, tst: TstParams) -> Self {
        Self {
            dataset,
            tree: TreeParams::default(),
            tst,
            root_level: None,
            ratio_ceiling: default_ratio_ceiling(),
            beta: BetaConfig::default(),
        }
    }

    /// Hard errors for impossible parameters, warnings for the relaxed A floor.
    pub fn validate(&self) -> Result<Vec<String>> {
        let t = &self.tst;
        if !(t.p >= 1.0 && t.p < critical_exponent(t.d as f64)) {
            return Err(TstError::InvalidInput(format!("p = {} outside [1, p(d))", t.p)));
        }
        if !(t.a > 1.0) {
            return Err(TstError::InvalidInput(format!("A = {} must exceed 1", t.a)));
        }
        if !(t.c0 > 1.0) {
            return Err(TstError::InvalidInput(format!("C0 = {} must exceed 1", t.c0)));
        }
        if !(self.tree.rho > 0.0 && self.tree.rho < 1.0) {
            return Err(TstError::InvalidInput("rho must lie in (0,1)".into()));
        }
        let mut warnings = Vec::new();
        if t.a <= 1e5 {
            warnings.push(format!("WARNING: A = {} is far below the 1e5 floor of the two-sided estimate", t.a));
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub dataset: DatasetSpec,
    pub points: usize,
    pub level_counts: Vec<usize>,
    pub root: usize,
    pub root_level: usize,
    pub depth: usize,
    pub ell_root_d: f64,
    pub beta_sum: f64,
    pub tst_sum: f64,
    pub measure_estimate: f64,
    pub bwgl_sum: f64,
    pub bwgl_count: usize,
    /// tst_sum / (ℋ^d proxy + BWGL).
    pub upper_ratio: f64,
    /// (ℋ^d proxy + BWGL) / tst_sum.
    pub lower_ratio: f64,
    /// (tst_sum + BWGL) / (ℋ^d proxy + BWGL).
    pub two_sided_ratio: f64,
    pub ratio_ceiling: f64,
    pub pass: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentBundle {
    pub config: ExperimentConfig,
    pub summary: Summary,
    pub report: TstReport,
}

impl ExperimentBundle {
    pub fn summary_json(&self) -> Result<String> {
        to_versioned_json(&self.summary)
    }

    pub fn report_json(&self) -> Result<String> {
        to_versioned_json(&self.report)
    }

    pub fn cubes_csv(&self) -> String {
        cube_table_csv(&self.report)
    }

    /// summary.json, report.json, cubes.csv.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.json"), self.summary_json()?)?;
        fs::write(dir.join("report.json"), self.report_json()?)?;
        fs::write(dir.join("cubes.csv"), self.cubes_csv())?;
        Ok(())
    }
}

pub fn build_tree(cloud: PointCloud, tree: &TreeParams) -> Result<CubeTree> {
    let nets = NetHierarchy::build(Arc::new(cloud), tree.rho, tree.k_max)?;
    CubeTree::build(nets, tree.c0)
}

pub fn auto_root_level(tree: &CubeTree, a: f64) -> usize {
    let diam = tree.cloud().diameter();
    (0..=tree.depth()).find(|&k| tree.nets.scale(k) * (10.0 * a + 2.0) <= diam).unwrap_or(tree.depth())
}

/// The level-`level` cube whose centre is nearest the centroid (lowest id on ties).
pub fn central_cube(tree: &CubeTree, level: usize) -> Result<usize> {
    let ids = tree
        .levels
        .get(level)
        .ok_or_else(|| TstError::InvalidInput(format!("tree has no level {level} (depth {})", tree.depth())))?;
    let cloud = tree.cloud();
    let n = cloud.dim();
    let mut c = vec![0.0; n];
    for p in cloud.iter() {
        for (ci, pi) in c.iter_mut().zip(p) {
            *ci += pi;
        }
    }
    c.iter_mut().for_each(|v| *v /= cloud.len() as f64);
    let best = ids
        .iter()
        .copied()
        .min_by(|&a, &b| dist2(tree.center(a), &c).total_cmp(&dist2(tree.center(b), &c)).then(a.cmp(&b)))
        .expect("levels are nonempty");
    Ok(best)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentBundle> {
    let warnings = cfg.validate()?;
    let cloud = generate(&cfg.dataset)?;
    let points = cloud.len();
    let tree = build_tree(cloud, &cfg.tree)?;
    let root_level = match cfg.root_level {
        Some(l) => l,
        None => auto_root_level(&tree, cfg.tst.a),
    };
    let root = central_cube(&tree, root_level)?;
    let report = tst_report(&tree, root, &cfg.tst, &cfg.beta)?;
    let upper_ratio = report.tst_sum / (report.measure_estimate + report.bwgl_sum);
    let lower_ratio = (report.measure_estimate + report.bwgl_sum) / report.tst_sum;
    let two_sided_ratio = report.two_sided_ratio();
    let pass = upper_ratio <= cfg.ratio_ceiling && lower_ratio <= cfg.ratio_ceiling;
    let summary = Summary {
        dataset: cfg.dataset.clone(),
        points,
        level_counts: tree.level_counts(),
        root,
        root_level: report.root_level,
        depth: report.depth,
        ell_root_d: report.ell_root_d,
        beta_sum: report.beta_sum,
        tst_sum: report.tst_sum,
        measure_estimate: report.measure_estimate,
        bwgl_sum: report.bwgl_sum,
        bwgl_count: report.bwgl_count,
        upper_ratio,
        lower_ratio,
        two_sided_ratio,
        ratio_ceiling: cfg.ratio_ceiling,
        pass,
        warnings,
    };
    Ok(ExperimentBundle { config: cfg.clone(), summary, report })
}

pub const HISTOGRAM_HEADER: &str = "kind,level,bin_lo,bin_hi,count";
pub const DEPTH_HEADER: &str = "depth,level,tst_partial,bwgl_partial,measure,ratio";
const BIN_WIDTH: f64 = 0.025;
const BINS: usize = 20;

/// Per-level histograms of β and bβ (bins of width 0.025 on [0, 0.5), then one overflow bin) and
/// the ratio series (ℓ(Q0)^d + partial Σβ²ℓ^d + partial BWGL)/(Σ_level ℓ^d + partial BWGL).
/// The root is the row with the smallest level.
pub fn report_from_table(rows: &[CubeRow]) -> (String, String) {
    let mut hist = String::from(HISTOGRAM_HEADER);
    hist.push('\n');
    let mut depth = String::from(DEPTH_HEADER);
    depth.push('\n');
    let Some(root_level) = rows.iter().map(|r| r.level).min() else {
        return (hist, depth);
    };
    let max_level = rows.iter().map(|r| r.level).max().expect("nonempty");
    let nl = max_level - root_level + 1;
    for (kind, get) in [("beta", (|r: &CubeRow| r.beta) as fn(&CubeRow) -> f64), ("bbeta", |r: &CubeRow| r.bbeta)] {
        for j in 0..nl {
            let mut counts = [0usize; BINS + 1];
            for r in rows.iter().filter(|r| r.level == root_level + j) {
                let b = ((get(r) / BIN_WIDTH).floor().max(0.0) as usize).min(BINS);
                counts[b] += 1;
            }
            for (b, c) in counts.iter().enumerate() {
                let lo = b as f64 * BIN_WIDTH;
                let hi = if b == BINS { f64::INFINITY } else { lo + BIN_WIDTH };
                let _ = writeln!(hist, "{kind},{},{},{},{c}", root_level + j, fmt_f64(lo), fmt_f64(hi));
            }
        }
    }
    let ell_root_d = rows.iter().filter(|r| r.level == root_level).map(|r| r.ell_d).next().expect("root row");
    let mut tst = ell_root_d;
    let mut bwgl = 0.0;
    for j in 0..nl {
        let level = root_level + j;
        let at: Vec<&CubeRow> = rows.iter().filter(|r| r.level == level).collect();
        tst += at.iter().map(|r| r.term).sum::<f64>();
        bwgl += at.iter().filter(|r| r.bwgl_flag != 0).map(|r| r.ell_d).sum::<f64>();
        let measure: f64 = at.iter().map(|r| r.ell_d).sum();
        let ratio = (tst + bwgl) / (measure + bwgl);
        let _ = writeln!(depth, "{j},{level},{},{},{},{}", fmt_f64(tst), fmt_f64(bwgl), fmt_f64(measure), fmt_f64(ratio));
    }
    (hist, depth)
}

/// Reads `cubes.csv` and writes `histograms.csv` and `ratio_vs_depth.csv` into `out`.
pub fn report(cubes_csv: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(cubes_csv).map_err(|e| TstError::Io(format!("{}: {e}", cubes_csv.display())))?;
    let rows = read_cube_table(&text)?;
    let (hist, depth) = report_from_table(&rows);
    fs::create_dir_all(out)?;
    fs::write(out.join("histograms.csv"), hist)?;
    fs::write(out.join("ratio_vs_depth.csv"), depth)?;
    Ok(())
}
