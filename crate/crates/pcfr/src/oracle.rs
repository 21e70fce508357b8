//! Finite-difference ground truth and the AD-vs-oracle comparison.
//!
//! The probe is an empirical stand-in for the exact differentiability
//! domain: any finite ladder of step sizes can misclassify pathological
//! functions, so its verdicts back acceptance tests on the fixed corpus,
//! never theorems. One-sided slopes that diverge monotonically along the
//! ladder (a jump) are classified NotDifferentiable rather than Unknown.

use serde::Serialize;

use crate::ad::{grad_program, AdMode, GradBuilder};
use crate::eval::{
    decode_ground, eval_program_need, eval_program_outcome, fast_path_applies, EvalConfig,
    Strategy,
};
use crate::registry::PrimRegistry;
use crate::typecheck::{program_coarity, Program};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum DiffProbe {
    Differentiable {
        grad: Vec<f64>,
    },
    NotDifferentiable {
        axis: usize,
        left_slope: f64,
        right_slope: f64,
    },
    /// Some evaluation diverged or hit a primitive domain error.
    Undefined,
    /// Difference quotients did not stabilize across the ladder.
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Agree,
    Fail,
    OutsideDiffDomain,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GradReport {
    pub point: Vec<f64>,
    pub ad_forward: Option<Vec<f64>>,
    pub ad_reverse: Option<Vec<f64>>,
    pub fd_grad: DiffProbe,
    pub verdict: Verdict,
    pub max_abs_err: f64,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct CompareConfig {
    /// Strictly decreasing positive step sizes.
    pub h_ladder: Vec<f64>,
    /// Slope-stabilization tolerance.
    pub probe_tol: f64,
    pub rtol: f64,
    pub atol: f64,
    pub strategy: Strategy,
    pub eval: EvalConfig,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            h_ladder: vec![1e-4, 1e-5, 1e-6],
            probe_tol: 1e-3,
            rtol: 1e-4,
            atol: 1e-6,
            strategy: Strategy::HeadDeterministic,
            eval: EvalConfig::default(),
        }
    }
}

/// Precomputed comparison state for one program: coarity and the two AD
/// transforms are built once, so per-point work is evaluation only. Use
/// this directly when probing many points (scans); the free functions
/// below build a throwaway one.
pub struct Comparator<'a> {
    prog: &'a Program,
    cfg: &'a CompareConfig,
    reg: &'a PrimRegistry,
    scalar: bool,
    fwd: Option<GradBuilder>,
    rev: Option<GradBuilder>,
}

impl<'a> Comparator<'a> {
    pub fn new(
        prog: &'a Program,
        cfg: &'a CompareConfig,
        reg: &'a PrimRegistry,
    ) -> Comparator<'a> {
        assert!(
            cfg.h_ladder.windows(2).all(|w| w[0] > w[1])
                && cfg.h_ladder.iter().all(|&h| h > 0.0),
            "h ladder must be strictly decreasing positives"
        );
        Comparator {
            prog,
            cfg,
            reg,
            scalar: program_coarity(prog, reg) == Some(1),
            fwd: grad_program(prog, AdMode::Forward, reg).ok(),
            rev: grad_program(prog, AdMode::Reverse, reg).ok(),
        }
    }

    fn eval_scalar(&self, r: &[f64]) -> Option<f64> {
        if !self.scalar || r.iter().any(|v| !v.is_finite()) {
            return None;
        }
        if fast_path_applies(self.cfg.strategy, &self.cfg.eval) {
            return eval_program_need(self.prog, r, 1, self.cfg.eval.fuel, self.reg)
                .map(|v| v[0]);
        }
        let out =
            eval_program_outcome(self.prog, r, self.cfg.strategy, &self.cfg.eval, self.reg);
        out.normal_form()
            .and_then(|nf| decode_ground(&nf, 1))
            .map(|v| v[0])
    }

    fn ad_grad(&self, builder: &Option<GradBuilder>, r: &[f64]) -> Option<Vec<f64>> {
        builder
            .as_ref()
            .and_then(|g| g.value_at(r, self.cfg.strategy, &self.cfg.eval, self.reg).ok())
            .flatten()
    }
}

/// Central-difference gradient at step h; nothing when any evaluation is
/// undefined.
pub fn fd_gradient(
    prog: &Program,
    r: &[f64],
    h: f64,
    cfg: &CompareConfig,
    reg: &PrimRegistry,
) -> Option<Vec<f64>> {
    assert!(h > 0.0);
    let cmp = Comparator::new(prog, cfg, reg);
    let mut grad = Vec::with_capacity(r.len());
    for i in 0..r.len() {
        let mut hi = r.to_vec();
        let mut lo = r.to_vec();
        hi[i] += h;
        lo[i] -= h;
        let fp = cmp.eval_scalar(&hi)?;
        let fm = cmp.eval_scalar(&lo)?;
        grad.push((fp - fm) / (2.0 * h));
    }
    Some(grad)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn stable(slopes: &[f64], tol: f64) -> bool {
    slopes
        .windows(2)
        .all(|w| close(w[0], w[1], tol))
}

/// Monotone blow-up along the ladder: the signature of a jump
/// discontinuity, where the one-sided quotient scales like 1/h.
fn diverging(slopes: &[f64]) -> bool {
    slopes.len() >= 2
        && slopes.windows(2).all(|w| w[1].abs() > w[0].abs())
        && slopes.last().unwrap().abs() > 10.0 * slopes[0].abs().max(1.0)
}

impl<'a> Comparator<'a> {
    /// Classifies differentiability at r from one-sided difference
    /// quotients across the h ladder.
    pub fn diff_probe(&self, r: &[f64]) -> DiffProbe {
        let cfg = self.cfg;
        let f0 = match self.eval_scalar(r) {
            Some(v) => v,
            None => return DiffProbe::Undefined,
        };
        let mut grad = Vec::with_capacity(r.len());
        for i in 0..r.len() {
            let mut fwd = Vec::new();
            let mut bwd = Vec::new();
            for &h in &cfg.h_ladder {
                let mut hi = r.to_vec();
                let mut lo = r.to_vec();
                hi[i] += h;
                lo[i] -= h;
                match (self.eval_scalar(&hi), self.eval_scalar(&lo)) {
                    (Some(fp), Some(fm)) => {
                        fwd.push((fp - f0) / h);
                        bwd.push((f0 - fm) / h);
                    }
                    _ => return DiffProbe::Undefined,
                }
            }
            let left = *bwd.last().unwrap();
            let right = *fwd.last().unwrap();
            if !stable(&fwd, cfg.probe_tol) || !stable(&bwd, cfg.probe_tol) {
                if diverging(&fwd) || diverging(&bwd) {
                    return DiffProbe::NotDifferentiable {
                        axis: i + 1,
                        left_slope: left,
                        right_slope: right,
                    };
                }
                return DiffProbe::Unknown;
            }
            if !close(left, right, cfg.probe_tol) {
                return DiffProbe::NotDifferentiable {
                    axis: i + 1,
                    left_slope: left,
                    right_slope: right,
                };
            }
            grad.push((left + right) / 2.0);
        }
        DiffProbe::Differentiable { grad }
    }

    /// Runs both AD modes and the probe at a point and assembles the
    /// verdict. Fail requires a Differentiable probe and at least one AD
    /// vector beyond tolerance; with no trustworthy reference there is no
    /// "wrong" value.
    pub fn compare_at(&self, r: &[f64]) -> GradReport {
        let cfg = self.cfg;
        let ad_forward = self.ad_grad(&self.fwd, r);
        let ad_reverse = self.ad_grad(&self.rev, r);
        let fd_grad = self.diff_probe(r);
        let mut max_abs_err = 0.0f64;
        let mut max_rel_err = 0.0f64;
        let verdict = match &fd_grad {
            DiffProbe::Differentiable { grad } => {
                let vecs: Vec<&Vec<f64>> =
                    [&ad_forward, &ad_reverse].iter().filter_map(|v| v.as_ref()).collect();
                if vecs.is_empty() {
                    Verdict::Inconclusive
                } else {
                    let mut ok = true;
                    for v in vecs {
                        for (a, g) in v.iter().zip(grad) {
                            let abs = (a - g).abs();
                            max_abs_err = max_abs_err.max(abs);
                            max_rel_err = max_rel_err.max(abs / g.abs().max(1e-300));
                            if abs > cfg.atol + cfg.rtol * g.abs() {
                                ok = false;
                            }
                        }
                    }
                    if ok {
                        Verdict::Agree
                    } else {
                        Verdict::Fail
                    }
                }
            }
            DiffProbe::NotDifferentiable { .. } => Verdict::OutsideDiffDomain,
            DiffProbe::Undefined | DiffProbe::Unknown => Verdict::Inconclusive,
        };
        GradReport {
            point: r.to_vec(),
            ad_forward,
            ad_reverse,
            fd_grad,
            verdict,
            max_abs_err,
            max_rel_err,
        }
    }
}

/// One-shot [`Comparator::diff_probe`].
pub fn diff_probe(
    prog: &Program,
    r: &[f64],
    cfg: &CompareConfig,
    reg: &PrimRegistry,
) -> DiffProbe {
    Comparator::new(prog, cfg, reg).diff_probe(r)
}

/// One-shot [`Comparator::compare_at`].
pub fn compare_at(
    prog: &Program,
    r: &[f64],
    cfg: &CompareConfig,
    reg: &PrimRegistry,
) -> GradReport {
    Comparator::new(prog, cfg, reg).compare_at(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::syntax::{num, omega, Term, TypeExpr};

    fn reg() -> PrimRegistry {
        PrimRegistry::default()
    }

    fn unary(t: std::rc::Rc<Term>) -> Program {
        Program::from_term(Term::app(t, Term::var("x")))
    }

    #[test]
    fn fd_of_square() {
        let prog = Program::from_term(Term::mul(Term::var("x"), Term::var("x")));
        let g = fd_gradient(&prog, &[3.0], 1e-6, &CompareConfig::default(), &reg())
            .unwrap();
        assert!((g[0] - 6.0).abs() < 1e-5);
    }

    #[test]
    fn fd_of_constant() {
        let prog = Program::new(num(7.0), vec!["x".into()]);
        let g = fd_gradient(&prog, &[0.4], 1e-6, &CompareConfig::default(), &reg())
            .unwrap();
        assert_eq!(g, vec![0.0]);
        assert_eq!(
            diff_probe(&prog, &[0.4], &CompareConfig::default(), &reg()),
            DiffProbe::Differentiable { grad: vec![0.0] }
        );
    }

    #[test]
    fn fd_of_divergent_program() {
        let rr = TypeExpr::arrow(TypeExpr::Real, TypeExpr::Real);
        let prog = Program::from_term(Term::app(omega(&rr), Term::var("x")));
        let mut cfg = CompareConfig::default();
        cfg.eval.fuel = 5_000;
        assert_eq!(fd_gradient(&prog, &[0.0], 1e-6, &cfg, &reg()), None);
        assert_eq!(diff_probe(&prog, &[0.0], &cfg, &reg()), DiffProbe::Undefined);
    }

    #[test]
    fn relu_probe_at_zero() {
        let probe = diff_probe(
            &unary(corpus::relu()),
            &[0.0],
            &CompareConfig::default(),
            &reg(),
        );
        match probe {
            DiffProbe::NotDifferentiable {
                axis,
                left_slope,
                right_slope,
            } => {
                assert_eq!(axis, 1);
                assert!(left_slope.abs() < 1e-9);
                assert!((right_slope - 1.0).abs() < 1e-9);
            }
            other => panic!("expected NotDifferentiable, got {other:?}"),
        }
    }

    #[test]
    fn silly_id_probe_at_zero_is_differentiable() {
        let probe = diff_probe(
            &unary(corpus::silly_id()),
            &[0.0],
            &CompareConfig::default(),
            &reg(),
        );
        assert_eq!(probe, DiffProbe::Differentiable { grad: vec![1.0] });
    }

    #[test]
    fn floor_probe_at_integer_never_differentiable() {
        let probe = diff_probe(
            &unary(corpus::floor()),
            &[2.0],
            &CompareConfig::default(),
            &reg(),
        );
        assert!(matches!(
            probe,
            DiffProbe::NotDifferentiable { .. } | DiffProbe::Undefined
        ));
    }

    #[test]
    fn silly_id_verdicts() {
        let prog = unary(corpus::silly_id());
        let cfg = CompareConfig::default();
        let at0 = compare_at(&prog, &[0.0], &cfg, &reg());
        assert_eq!(at0.verdict, Verdict::Fail);
        assert_eq!(at0.ad_forward, Some(vec![0.0]));
        let off = compare_at(&prog, &[0.5], &cfg, &reg());
        assert_eq!(off.verdict, Verdict::Agree);
    }

    #[test]
    fn relu_at_zero_is_outside_diff_domain() {
        let report = compare_at(
            &unary(corpus::relu()),
            &[0.0],
            &CompareConfig::default(),
            &reg(),
        );
        assert_eq!(report.verdict, Verdict::OutsideDiffDomain);
    }
}
