//! Primitive function symbols and their registry.
//!
//! Every symbol of arity k carries a partial evaluation function over the
//! reals and the names of its k partial-derivative symbols. The registry is
//! closed under differentiation: derivative chains that would otherwise be
//! infinite (log -> 1/x -> -1/x^2 -> ...) bottom out in a synthetic monomial
//! family `mono1:<c>:<a>` (c * x^a) and `mono2:<c>:<a>:<b>` (c * x^a * y^b)
//! that the registry resolves on demand.
//!
//! Admissibility contract: all shipped primitives are analytic on their
//! domain, so the clone they generate has measure-zero nontrivial zero sets.
//! This is documented by the `analytic` flag, not checked at runtime.

use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

/// A primitive symbol: either a numeral (nullary, carrying its IEEE bits so
/// that term equality is bitwise on numerals) or a named function symbol.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PrimSymbol {
    Lit(u64),
    Named(Rc<str>),
}

impl PrimSymbol {
    pub fn named(name: &str) -> PrimSymbol {
        PrimSymbol::Named(Rc::from(name))
    }

    pub fn name(&self) -> String {
        match self {
            PrimSymbol::Lit(bits) => format!("{:?}", f64::from_bits(*bits)),
            PrimSymbol::Named(n) => n.to_string(),
        }
    }
}

impl fmt::Display for PrimSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// Evaluation behavior of a registered symbol.
#[derive(Debug, Clone, Copy)]
pub enum EvalFn {
    Builtin(fn(&[f64]) -> f64),
    /// A nullary constant.
    Const(f64),
    /// c * x^a
    Mono1(f64, i32),
    /// c * x^a * y^b
    Mono2(f64, i32, i32),
}

impl EvalFn {
    pub fn call(&self, args: &[f64]) -> f64 {
        match self {
            EvalFn::Builtin(f) => f(args),
            EvalFn::Const(c) => *c,
            EvalFn::Mono1(c, a) => c * args[0].powi(*a),
            EvalFn::Mono2(c, a, b) => c * args[0].powi(*a) * args[1].powi(*b),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PrimEntry {
    pub name: String,
    pub arity: usize,
    pub eval: EvalFn,
    /// Names of the partial-derivative symbols, one per argument.
    pub partials: Vec<String>,
    pub analytic: bool,
}

/// A violation reported by [`PrimRegistry::check`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryViolation {
    pub symbol: String,
    pub message: String,
}

impl fmt::Display for RegistryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.symbol, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct PrimRegistry {
    entries: BTreeMap<String, PrimEntry>,
}

fn mono1_name(c: f64, a: i32) -> String {
    format!("mono1:{:?}:{}", c, a)
}

fn mono2_name(c: f64, a: i32, b: i32) -> String {
    format!("mono2:{:?}:{}:{}", c, a, b)
}

/// Resolves the synthetic monomial families.
fn synthesize(name: &str) -> Option<PrimEntry> {
    let mut parts = name.split(':');
    match parts.next()? {
        "mono1" => {
            let c: f64 = parts.next()?.parse().ok()?;
            let a: i32 = parts.next()?.parse().ok()?;
            if parts.next().is_some() || !c.is_finite() {
                return None;
            }
            Some(PrimEntry {
                name: name.to_string(),
                arity: 1,
                eval: EvalFn::Mono1(c, a),
                partials: vec![mono1_name(c * a as f64, a - 1)],
                analytic: true,
            })
        }
        "mono2" => {
            let c: f64 = parts.next()?.parse().ok()?;
            let a: i32 = parts.next()?.parse().ok()?;
            let b: i32 = parts.next()?.parse().ok()?;
            if parts.next().is_some() || !c.is_finite() {
                return None;
            }
            Some(PrimEntry {
                name: name.to_string(),
                arity: 2,
                eval: EvalFn::Mono2(c, a, b),
                partials: vec![
                    mono2_name(c * a as f64, a - 1, b),
                    mono2_name(c * b as f64, a, b - 1),
                ],
                analytic: true,
            })
        }
        _ => None,
    }
}

impl Default for PrimRegistry {
    fn default() -> Self {
        let mut reg = PrimRegistry {
            entries: BTreeMap::new(),
        };
        let one2 = mono2_name(1.0, 0, 0);
        let builtins: Vec<PrimEntry> = vec![
            PrimEntry {
                name: "add".into(),
                arity: 2,
                eval: EvalFn::Builtin(|a| a[0] + a[1]),
                partials: vec![one2.clone(), one2.clone()],
                analytic: true,
            },
            PrimEntry {
                name: "sub".into(),
                arity: 2,
                eval: EvalFn::Builtin(|a| a[0] - a[1]),
                partials: vec![one2.clone(), mono2_name(-1.0, 0, 0)],
                analytic: true,
            },
            PrimEntry {
                name: "mul".into(),
                arity: 2,
                eval: EvalFn::Builtin(|a| a[0] * a[1]),
                partials: vec![mono2_name(1.0, 0, 1), mono2_name(1.0, 1, 0)],
                analytic: true,
            },
            PrimEntry {
                name: "div".into(),
                arity: 2,
                eval: EvalFn::Builtin(|a| a[0] / a[1]),
                partials: vec![mono2_name(1.0, 0, -1), mono2_name(-1.0, 1, -2)],
                analytic: true,
            },
            PrimEntry {
                name: "neg".into(),
                arity: 1,
                eval: EvalFn::Builtin(|a| -a[0]),
                partials: vec![mono1_name(-1.0, 0)],
                analytic: true,
            },
            PrimEntry {
                name: "sin".into(),
                arity: 1,
                eval: EvalFn::Builtin(|a| a[0].sin()),
                partials: vec!["cos".into()],
                analytic: true,
            },
            PrimEntry {
                name: "cos".into(),
                arity: 1,
                eval: EvalFn::Builtin(|a| a[0].cos()),
                partials: vec!["neg_sin".into()],
                analytic: true,
            },
            PrimEntry {
                name: "neg_sin".into(),
                arity: 1,
                eval: EvalFn::Builtin(|a| -a[0].sin()),
                partials: vec!["neg_cos".into()],
                analytic: true,
            },
            PrimEntry {
                name: "neg_cos".into(),
                arity: 1,
                eval: EvalFn::Builtin(|a| -a[0].cos()),
                partials: vec!["sin".into()],
                analytic: true,
            },
            PrimEntry {
                name: "exp".into(),
                arity: 1,
                eval: EvalFn::Builtin(|a| a[0].exp()),
                partials: vec!["exp".into()],
                analytic: true,
            },
            PrimEntry {
                name: "log".into(),
                arity: 1,
                eval: EvalFn::Builtin(|a| a[0].ln()),
                partials: vec![mono1_name(1.0, -1)],
                analytic: true,
            },
        ];
        for e in builtins {
            reg.register(e);
        }
        reg
    }
}

impl PrimRegistry {
    pub fn register(&mut self, entry: PrimEntry) {
        self.entries.insert(entry.name.clone(), entry);
    }

    /// Looks a symbol up; numerals and monomial-family names resolve even
    /// though they are not explicitly registered.
    pub fn lookup(&self, sym: &PrimSymbol) -> Option<PrimEntry> {
        match sym {
            PrimSymbol::Lit(bits) => {
                let v = f64::from_bits(*bits);
                Some(PrimEntry {
                    name: sym.name(),
                    arity: 0,
                    eval: EvalFn::Const(v),
                    partials: vec![],
                    analytic: true,
                })
            }
            PrimSymbol::Named(n) => self.lookup_name(n),
        }
    }

    pub fn lookup_name(&self, name: &str) -> Option<PrimEntry> {
        self.entries.get(name).cloned().or_else(|| synthesize(name))
    }

    pub fn has_symbol(&self, name: &str) -> bool {
        self.entries.contains_key(name) || synthesize(name).is_some()
    }

    pub fn arity(&self, sym: &PrimSymbol) -> Option<usize> {
        self.lookup(sym).map(|e| e.arity)
    }

    /// Checks that every entry is closed under differentiation: the partials
    /// list has one name per argument and each name resolves to a symbol of
    /// the same arity.
    pub fn check(&self) -> Vec<RegistryViolation> {
        let mut violations = Vec::new();
        for entry in self.entries.values() {
            if entry.partials.len() != entry.arity {
                violations.push(RegistryViolation {
                    symbol: entry.name.clone(),
                    message: format!(
                        "partials length {} != {}",
                        entry.partials.len(),
                        entry.arity
                    ),
                });
                continue;
            }
            for (i, p) in entry.partials.iter().enumerate() {
                match self.lookup_name(p) {
                    None => violations.push(RegistryViolation {
                        symbol: entry.name.clone(),
                        message: format!("unregistered derivative d{} = {}", i + 1, p),
                    }),
                    Some(d) if d.arity != entry.arity => {
                        violations.push(RegistryViolation {
                            symbol: entry.name.clone(),
                            message: format!(
                                "derivative {} has arity {}, expected {}",
                                p, d.arity, entry.arity
                            ),
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        violations
    }
}
