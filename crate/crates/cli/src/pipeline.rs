//! Computations shared by several subcommands.

use homog_core::effective::{property_suite, reconstruct_table, PropertyVerdicts};
use homog_core::macroscopic::{agreement, ball_uniform_check, estimate_h, solve_ensemble, Agreement, BallReport, HEstimate};
use homog_core::{Direction, EffectiveTable, Lattice, MacroSolution, Result, RunConfig, TableEntry, Vec2};

/// Minimum number of realizations for the ball-uniform statistics.
pub const BALL_MIN_SEEDS: usize = 8;

pub struct Tables {
    pub forward: EffectiveTable,
    pub reversed: EffectiveTable,
    pub properties: PropertyVerdicts,
}

pub fn effective_tables(cfg: &RunConfig) -> Result<Tables> {
    let spec = cfg.env.spec(0);
    let seeds = cfg.seed_list();
    let grid = cfg.p_grid()?;
    let opts = cfg.effective_options();
    let forward = reconstruct_table(&cfg.family, &spec, &seeds, &grid, Direction::Forward, &opts)?;
    let reversed = reconstruct_table(&cfg.family, &spec, &seeds, &grid, Direction::Reversed, &opts)?;
    let properties = property_suite(&cfg.family, &spec, &forward, &reversed, &opts)?;
    Ok(Tables { forward, reversed, properties })
}

pub struct MacroBlock {
    pub ensemble: Vec<Vec<MacroSolution>>,
    pub estimate: HEstimate,
    pub ball: Option<BallReport>,
    pub entry: TableEntry,
    pub agreement: Agreement,
}

impl MacroBlock {
    /// Solutions at the finest discount, in seed order.
    pub fn finest(&self) -> &[MacroSolution] {
        self.ensemble.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Brackets at the macro momenta, then one ensemble per momentum.
pub fn macro_blocks(cfg: &RunConfig) -> Result<Vec<MacroBlock>> {
    let spec = cfg.env.spec(0);
    let seeds = cfg.seed_list();
    let momenta = cfg.macro_momenta();
    let table = reconstruct_table(&cfg.family, &spec, &seeds, &momenta, Direction::Forward, &cfg.effective_options())?;
    let m = &cfg.macro_;
    momenta
        .iter()
        .zip(table.entries)
        .map(|(&p, entry)| {
            let ensemble = solve_ensemble(&cfg.family, &spec, p, &m.deltas, &seeds, &m.solver)?;
            let estimate = estimate_h(&ensemble)?;
            let ball = if seeds.len() >= BALL_MIN_SEEDS {
                Some(ball_uniform_check(&ensemble, &m.ball_radii)?)
            } else {
                None
            };
            let agreement = agreement(&estimate, &entry, m.scheme_error * cfg.tol_scale);
            Ok(MacroBlock { ensemble, estimate, ball, entry, agreement })
        })
        .collect()
}

/// Lattice of half-width `metric_run.half_width` (capped at `cap` nodes per
/// side) around the origin.
pub fn metric_lattice(cfg: &RunConfig, cap: i64) -> Result<Lattice> {
    let h = cfg.metric.h;
    let half = ((cfg.metric_run.half_width / h).ceil() as i64).clamp(1, cap);
    Lattice::centered(h, half, cfg.metric.stencil(cfg.env.dim)?)
}

pub fn label(p: Vec2, dim: usize) -> String {
    let r = |x: f64| (x * 1e6).round() / 1e6;
    if dim == 1 {
        format!("p={}", r(p.x))
    } else {
        format!("p=({},{})", r(p.x), r(p.y))
    }
}
