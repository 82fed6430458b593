//! Seeded random programs over a small integer range.

use rand::Rng;

use crate::lang::{BExpr, CmpOp, Command, Expr};

#[derive(Clone, Debug)]
pub struct GenConfig {
    /// Variables the program reads and writes; must be non-empty.
    pub vars: Vec<String>,
    /// Values stay in `0..=max`.
    pub max: i64,
    pub depth: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { vars: vec!["x".into(), "y".into()], max: 3, depth: 4 }
    }
}

fn pick<'a, R: Rng>(rng: &mut R, cfg: &'a GenConfig) -> &'a str {
    &cfg.vars[rng.gen_range(0..cfg.vars.len())]
}

pub fn random_predicate<R: Rng>(rng: &mut R, cfg: &GenConfig) -> BExpr {
    let x = Expr::var(pick(rng, cfg));
    let c = Expr::num(rng.gen_range(0..=cfg.max));
    match rng.gen_range(0..8) {
        0 => BExpr::True,
        1 => BExpr::False,
        2 | 3 => BExpr::cmp(CmpOp::Eq, x, c),
        4 => BExpr::cmp(CmpOp::Le, x, c),
        5 => BExpr::cmp(CmpOp::Ne, x, c),
        6 => BExpr::and(BExpr::cmp(CmpOp::Ge, x.clone(), c), random_predicate(rng, cfg)),
        _ => BExpr::or(BExpr::cmp(CmpOp::Gt, x, c), random_predicate(rng, cfg)),
    }
}

fn leaf<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Command {
    let target = pick(rng, cfg);
    let x = Expr::var(pick(rng, cfg));
    match rng.gen_range(0..5) {
        0 => Command::Skip,
        1 | 2 => Command::assign(target, Expr::num(rng.gen_range(0..=cfg.max))),
        3 => Command::assign(target, Expr::Sub(Box::new(Expr::num(cfg.max)), Box::new(x))),
        _ => Command::assume_bool(random_predicate(rng, cfg)),
    }
}

/// A command of AST depth at most `cfg.depth` whose assignments keep the
/// variable in range, so every loop has a finite state space.
pub fn random_command<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Command {
    random_at(rng, cfg, cfg.depth)
}

fn random_at<R: Rng>(rng: &mut R, cfg: &GenConfig, depth: usize) -> Command {
    if depth <= 1 || rng.gen_range(0..4) == 0 {
        return leaf(rng, cfg);
    }
    let d = depth - 1;
    match rng.gen_range(0..5) {
        0 => Command::seq(random_at(rng, cfg, d), random_at(rng, cfg, d)),
        1 => Command::choice(random_at(rng, cfg, d), random_at(rng, cfg, d)),
        2 => {
            let b = random_predicate(rng, cfg);
            Command::If(b, Box::new(random_at(rng, cfg, d)), Box::new(random_at(rng, cfg, d)))
        }
        _ => {
            let b = random_predicate(rng, cfg);
            Command::While(b, Box::new(random_at(rng, cfg, d)))
        }
    }
}
