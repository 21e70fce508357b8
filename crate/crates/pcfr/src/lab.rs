//! The trace/stability laboratory: branch traces as an executable
//! surrogate for the tracing relation, a bounded checker for the pre-trace
//! relation on simple terms, an empirical stability probe, and the
//! Monte-Carlo failure scan.

use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::eval::{DecisionLog, EvalConfig, EvalOutcome, Event, Strategy};
use crate::oracle::{CompareConfig, Comparator, DiffProbe, Verdict};
use crate::registry::PrimRegistry;
use crate::syntax::{alpha_eq, fix_approx, FixDepth, Term, TypeExpr};
use crate::typecheck::{is_simple, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TraceOutcome {
    NormalForm,
    FuelExhausted,
    PrimDomainError,
    Stuck,
}

/// The decision log of a deterministic head normalization plus how it
/// ended. Equality is structural: same decisions in the same order and the
/// same outcome — the branch taken and the binder unfolded count, the
/// numeric guard values do not (nearby points always see different guards).
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BranchTrace {
    pub events: DecisionLog,
    pub outcome: TraceOutcome,
}

impl PartialEq for BranchTrace {
    fn eq(&self, other: &Self) -> bool {
        self.outcome == other.outcome
            && self.events.len() == other.events.len()
            && self.events.iter().zip(&other.events).all(|(a, b)| match (a, b) {
                (
                    Event::CondTaken { branch: x, .. },
                    Event::CondTaken { branch: y, .. },
                ) => x == y,
                (
                    Event::FixUnfolded { binder: x },
                    Event::FixUnfolded { binder: y },
                ) => x == y,
                _ => false,
            })
    }
}

impl Eq for BranchTrace {}

/// Extracts the branch trace of a program run at a point.
pub fn branch_trace(
    prog: &Program,
    r: &[f64],
    cfg: &EvalConfig,
    reg: &PrimRegistry,
) -> BranchTrace {
    let cfg = EvalConfig {
        record_decisions: true,
        ..cfg.clone()
    };
    let out = crate::eval::eval_program_outcome(
        prog,
        r,
        Strategy::HeadDeterministic,
        &cfg,
        reg,
    );
    let outcome = match &out {
        EvalOutcome::NormalForm { .. } => TraceOutcome::NormalForm,
        EvalOutcome::FuelExhausted { .. } => TraceOutcome::FuelExhausted,
        EvalOutcome::PrimDomainError { .. } => TraceOutcome::PrimDomainError,
        EvalOutcome::Stuck { .. } => TraceOutcome::Stuck,
    };
    BranchTrace {
        events: out.log().clone(),
        outcome,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PretraceError {
    #[error("the candidate trace term is not simple (it contains a conditional or fixpoint)")]
    NotSimple,
}

/// Result of the bounded pre-trace check. `bound_hit` reports that some
/// fixpoint search exhausted `fix_bound` on a failing path, so a negative
/// answer may be an artifact of the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pretrace {
    pub holds: bool,
    pub bound_hit: bool,
}

/// The pre-trace relation on types: congruence, plus the splitting rule
/// making a product of pre-traces of A a pre-trace of A.
fn type_pretrace(a1: &TypeExpr, a: &TypeExpr) -> bool {
    if a1 == a {
        return true;
    }
    let congruent = match (a1, a) {
        (TypeExpr::Arrow(d1, c1), TypeExpr::Arrow(d2, c2)) => {
            type_pretrace(d1, d2) && type_pretrace(c1, c2)
        }
        (TypeExpr::Product(xs), TypeExpr::Product(ys)) if xs.len() == ys.len() => {
            xs.iter().zip(ys).all(|(x, y)| type_pretrace(x, y))
        }
        _ => false,
    };
    if congruent {
        return true;
    }
    match a1 {
        TypeExpr::Product(xs) => xs.iter().all(|x| type_pretrace(x, a)),
        _ => false,
    }
}

struct PretraceCtx {
    /// Binder correspondence (trace binder, subject binder), innermost last.
    env: Vec<(String, String)>,
    fix_bound: usize,
    bound_hit: bool,
}

impl PretraceCtx {
    fn vars_match(&self, p: &str, x: &str) -> bool {
        for (a, b) in self.env.iter().rev() {
            if a == p || b == x {
                return a == p && b == x;
            }
        }
        // Both free: programs share argument names.
        p == x
    }

    fn check(&mut self, t: &Rc<Term>, m: &Rc<Term>) -> bool {
        match &**m {
            // Fixpoints: search t against the finite approximants.
            Term::Fix(f, ty, mb) => {
                for d in 1..=self.fix_bound {
                    if let Ok(apx) = fix_approx(f, ty, mb, FixDepth::Finite(d)) {
                        if self.check(t, &apx) {
                            return true;
                        }
                    }
                }
                self.bound_hit = true;
                false
            }
            // Conditionals are sliced: t = pi_i <u, u> with u a pre-trace
            // of the selected branch.
            Term::Cond(_, m1, m2) => {
                if let Term::Proj(i, 2, body) = &**t {
                    if let Term::Tuple(us) = &**body {
                        if us.len() == 2 && alpha_eq(&us[0], &us[1]) {
                            let branch = if *i == 1 { m1 } else { m2 };
                            return self.check(&us[0], branch);
                        }
                    }
                }
                false
            }
            Term::Var(x) => match &**t {
                Term::Var(p) => self.vars_match(p, x),
                // Higher-order splitting admits a projection of a variable.
                Term::Proj(_, _, body) => {
                    matches!(&**body, Term::Var(p) if self.vars_match(p, x))
                }
                _ => false,
            },
            Term::Lam(x, a, mb) => {
                if let Term::Lam(p, a1, tb) = &**t {
                    if !type_pretrace(a1, a) {
                        return false;
                    }
                    self.env.push((p.clone(), x.clone()));
                    let r = self.check(tb, mb);
                    self.env.pop();
                    r
                } else {
                    false
                }
            }
            Term::App(mf, ma) => {
                if let Term::App(tf, ta) = &**t {
                    if !self.check(tf, mf) {
                        return false;
                    }
                    // The argument is a single pre-trace of N, or a tuple
                    // of pre-traces of N (one per use).
                    if self.check(ta, ma) {
                        return true;
                    }
                    if let Term::Tuple(us) = &**ta {
                        return us.iter().all(|u| self.check(u, ma));
                    }
                    false
                } else {
                    false
                }
            }
            Term::Tuple(ms) => {
                if let Term::Tuple(ts) = &**t {
                    ts.len() == ms.len()
                        && ts.iter().zip(ms).all(|(u, v)| self.check(u, v))
                } else {
                    false
                }
            }
            Term::Proj(i, k, mb) => {
                if let Term::Proj(ti, tk, tb) = &**t {
                    ti == i && tk == k && self.check(tb, mb)
                } else {
                    false
                }
            }
            Term::Prim(sym, margs) => {
                if let Term::Prim(tsym, targs) = &**t {
                    tsym == sym
                        && targs.len() == margs.len()
                        && targs.iter().zip(margs).all(|(u, v)| self.check(u, v))
                } else {
                    false
                }
            }
        }
    }
}

/// Bounded decision procedure for `t` being a pre-trace of `M`.
pub fn pretrace_check(
    t: &Rc<Term>,
    m: &Rc<Term>,
    fix_bound: usize,
) -> Result<Pretrace, PretraceError> {
    if !is_simple(t) {
        return Err(PretraceError::NotSimple);
    }
    let mut ctx = PretraceCtx {
        env: Vec::new(),
        fix_bound,
        bound_hit: false,
    };
    let holds = ctx.check(t, m);
    Ok(Pretrace {
        holds,
        bound_hit: ctx.bound_hit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum StabilityVerdict {
    StableEmpirical { radius: f64, probes: usize },
    UnstableEmpirical { witness: Vec<f64> },
    Inconclusive { reason: String },
}

/// Draws a point of the ball B_radius(center): rejection sampling for
/// n <= 3, the bounding box for higher dimensions.
fn sample_ball(rng: &mut ChaCha8Rng, center: &[f64], radius: f64) -> Vec<f64> {
    let n = center.len();
    loop {
        let p: Vec<f64> = center
            .iter()
            .map(|c| c + (rng.gen::<f64>() * 2.0 - 1.0) * radius)
            .collect();
        if n > 3 {
            return p;
        }
        let d2: f64 = p
            .iter()
            .zip(center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum();
        if d2 <= radius * radius {
            return p;
        }
    }
}

/// Compares branch traces over a sampled ball around r. Equal traces that
/// all normalize give empirical stability; the first trace mismatch is an
/// instability witness; fuel exhaustion anywhere is inconclusive.
pub fn stability_probe(
    prog: &Program,
    r: &[f64],
    radius: f64,
    probes: usize,
    seed: u64,
    cfg: &EvalConfig,
    reg: &PrimRegistry,
) -> StabilityVerdict {
    assert!(radius > 0.0 && probes >= 2);
    let center = branch_trace(prog, r, cfg, reg);
    if center.outcome == TraceOutcome::FuelExhausted {
        return StabilityVerdict::Inconclusive {
            reason: "center point exhausted fuel".into(),
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..probes {
        let p = sample_ball(&mut rng, r, radius);
        let tr = branch_trace(prog, &p, cfg, reg);
        if tr.outcome == TraceOutcome::FuelExhausted {
            return StabilityVerdict::Inconclusive {
                reason: "a probe point exhausted fuel".into(),
            };
        }
        if tr != center {
            return StabilityVerdict::UnstableEmpirical { witness: p };
        }
    }
    if center.outcome == TraceOutcome::NormalForm {
        StabilityVerdict::StableEmpirical { radius, probes }
    } else {
        StabilityVerdict::Inconclusive {
            reason: "traces agree but the center run does not normalize".into(),
        }
    }
}

pub const SCHEMA_VERSION: u32 = 1;
const MAX_FAIL_POINTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScanReport {
    pub schema: u32,
    #[serde(rename = "box")]
    pub box_bounds: Vec<(f64, f64)>,
    pub samples: usize,
    pub seed: u64,
    /// Points with a conclusive comparison: agree + fail + outsideDiffDomain.
    pub evaluated: usize,
    pub divergent: usize,
    pub outside_diff_domain: usize,
    pub agree: usize,
    pub fail: usize,
    /// Sorted, capped at 100 entries.
    pub fail_points: Vec<Vec<f64>>,
    pub fail_fraction: f64,
}

/// Monte-Carlo scan for AD failure points: samples the box uniformly
/// (seeded, reproducible) and aggregates the comparison verdicts.
pub fn failure_scan(
    prog: &Program,
    box_bounds: &[(f64, f64)],
    samples: usize,
    seed: u64,
    cfg: &CompareConfig,
    reg: &PrimRegistry,
) -> ScanReport {
    assert_eq!(box_bounds.len(), prog.arity());
    assert!(box_bounds.iter().all(|(lo, hi)| lo < hi));
    let cmp = Comparator::new(prog, cfg, reg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut divergent = 0usize;
    let mut outside = 0usize;
    let mut agree = 0usize;
    let mut fail = 0usize;
    let mut fail_points = Vec::new();
    for _ in 0..samples {
        let p: Vec<f64> = box_bounds
            .iter()
            .map(|(lo, hi)| lo + rng.gen::<f64>() * (hi - lo))
            .collect();
        let report = cmp.compare_at(&p);
        match report.verdict {
            Verdict::Agree => agree += 1,
            Verdict::Fail => {
                fail += 1;
                if fail_points.len() < MAX_FAIL_POINTS {
                    fail_points.push(p);
                }
            }
            Verdict::OutsideDiffDomain => outside += 1,
            // A divergent/erroring evaluation leaves the theorem's domain
            // entirely; other inconclusive probes stay in the evaluated
            // pool as points outside the (empirical) diff domain.
            Verdict::Inconclusive => match report.fd_grad {
                DiffProbe::Undefined => divergent += 1,
                _ => outside += 1,
            },
        }
    }
    fail_points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ScanReport {
        schema: SCHEMA_VERSION,
        box_bounds: box_bounds.to_vec(),
        samples,
        seed,
        evaluated: agree + fail + outside,
        divergent,
        outside_diff_domain: outside,
        agree,
        fail,
        fail_points,
        fail_fraction: fail as f64 / (agree + fail).max(1) as f64,
    }
}
