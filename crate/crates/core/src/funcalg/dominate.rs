//! Eventual comparison of control functions.
//!
//! Decisions are made from exact leading forms when both operands expose
//! them, and otherwise from certified monomial envelopes (a lower and an
//! upper monomial valid past a computed point). A `Yes` or `No` verdict is
//! always backed by exact arithmetic; `Unknown` is returned whenever the
//! envelopes fail to separate the operands.

use super::{ControlFunction, Form, FuncError, Poly, Scale};
use crate::rational::{pow_rat, rat, root_ceil, root_floor_pos, Rat};
use num_bigint::BigUint;
use num_traits::{One, Signed, Zero};

/// Verdict of `f >= g` near the relevant end of the scale axis.
#[derive(Clone, Debug, PartialEq)]
pub enum DominationVerdict {
    /// Holds for every point past (large scale) or below (small scale)
    /// the threshold.
    Yes { threshold: Rat },
    /// Fails from this point onward (resp. below it), by exact
    /// leading-term comparison.
    No { witness: Rat },
    /// The operands could not be separated; `horizon` is the last point
    /// the comparison looked at.
    Unknown { horizon: Rat },
}

impl DominationVerdict {
    pub fn is_yes(&self) -> bool {
        matches!(self, DominationVerdict::Yes { .. })
    }
    pub fn is_no(&self) -> bool {
        matches!(self, DominationVerdict::No { .. })
    }
}

/// Monomial envelope of a function near infinity: `lower <= f <= upper`
/// for all `x >= from`; `exact` means both coincide with `f`'s tail piece.
#[derive(Clone, Debug)]
pub struct TailBound {
    pub from: Rat,
    pub lower: Poly,
    pub upper: Option<Poly>,
    pub exact: bool,
}

/// Envelope near zero: valid on `(0, upto]`.
#[derive(Clone, Debug)]
pub struct HeadBound {
    pub upto: Rat,
    pub lower: Poly,
    pub upper: Option<Poly>,
    pub exact: bool,
}

impl ControlFunction {
    /// Envelope near infinity, or `None` for bounded domains and
    /// compositions whose coefficients cannot be certified.
    pub fn tail_bound(&self) -> Option<TailBound> {
        let last = self.segs().last().expect("nonempty");
        if last.hi.is_some() {
            return None;
        }
        tail_of_form(&last.form, &last.lo)
    }

    /// Envelope near zero (domain must start at 0).
    pub fn head_bound(&self) -> Option<HeadBound> {
        let first = self.segs().first().expect("nonempty");
        if !first.lo.is_zero() {
            return None;
        }
        let upto = match &first.hi {
            Some(h) => h.clone(),
            None => Rat::one(),
        };
        head_of_form(&first.form, &upto)
    }
}

fn tail_of_form(form: &Form, lo: &Rat) -> Option<TailBound> {
    match form {
        Form::Poly(p) => Some(TailBound {
            from: lo.clone(),
            lower: p.clone(),
            upper: Some(p.clone()),
            exact: true,
        }),
        Form::Shift { base, dy } => {
            let t = base.tail_bound()?;
            Some(TailBound {
                from: t.from.max(lo.clone()),
                lower: Poly::new(t.lower.a, t.lower.p, &t.lower.b + dy),
                upper: t
                    .upper
                    .map(|u| Poly::new(u.a, u.p, &u.b + dy)),
                exact: t.exact,
            })
        }
        Form::Comp { outer, inner } => {
            let to = outer.tail_bound()?;
            let ti = inner.tail_bound()?;
            compose_tail(&to, &ti, lo)
        }
    }
}

/// Envelope of `outer ∘ inner` near infinity.
fn compose_tail(outer: &TailBound, inner: &TailBound, lo: &Rat) -> Option<TailBound> {
    if inner.lower.is_constant() {
        // Inner is eventually bounded; not a meaningful tail for our use.
        return None;
    }
    // Point past which inner(x) >= outer.from.
    let reach = match tail_cmp_ge(&inner.lower, &Poly::constant(outer.from.clone()), lo) {
        TailOrd::Ge { threshold } => threshold,
        TailOrd::Lt { .. } => return None,
    };
    let from0 = reach.max(inner.from.clone()).max(lo.clone());

    // Exact closed forms for A(a x^p + b)^P + B when they stay monomial.
    if outer.exact && inner.exact {
        let (f, g) = (&outer.lower, &inner.lower);
        if f.p.is_zero() {
            let c = f.constant_value();
            return Some(TailBound {
                from: from0,
                lower: Poly::constant(c.clone()),
                upper: Some(Poly::constant(c)),
                exact: true,
            });
        }
        if f.p.is_one() {
            let poly = Poly::new(&f.a * &g.a, g.p.clone(), &f.a * &g.b + &f.b);
            return Some(TailBound {
                from: from0,
                lower: poly.clone(),
                upper: Some(poly),
                exact: true,
            });
        }
        if g.b.is_zero() {
            if let Ok(coeff) = pow_rat(&g.a, &f.p) {
                let poly = Poly::new(&f.a * coeff, &f.p * &g.p, f.b.clone());
                return Some(TailBound {
                    from: from0,
                    lower: poly.clone(),
                    upper: Some(poly),
                    exact: true,
                });
            }
        }
    }
    let (lower, lfrom) = mono_compose_lower(&outer.lower, &inner.lower)?;
    let upper = match (&outer.upper, &inner.upper) {
        (Some(fo), Some(fi)) => mono_compose_upper(fo, fi),
        _ => None,
    };
    let mut from = from0.max(lfrom);
    let upper = match upper {
        Some((u, ufrom)) => {
            from = from.max(ufrom);
            Some(u)
        }
        None => None,
    };
    Some(TailBound {
        from,
        lower,
        upper,
        exact: false,
    })
}

/// Certified monomial `m` with `m(x) <= F(g(x))` past the returned point.
fn mono_compose_lower(f: &Poly, g: &Poly) -> Option<(Poly, Rat)> {
    if f.p.is_zero() {
        return Some((Poly::constant(f.constant_value()), Rat::one()));
    }
    if f.p.is_one() {
        return Some((
            Poly::new(&f.a * &g.a, g.p.clone(), &f.a * &g.b + &f.b),
            Rat::one(),
        ));
    }
    if g.is_constant() {
        return None;
    }
    let pp = &f.p * &g.p;
    if g.b.is_zero() || g.b.is_positive() {
        // F(g(x)) >= A (a x^p)^P + B.
        if let Ok(c) = pow_small(&g.a, &f.p) {
            return Some((Poly::new(&f.a * c, pp, f.b.clone()), Rat::one()));
        }
        if g.a >= Rat::one() {
            // a x^p + b >= x^p, so F(g(x)) >= A x^{pP} + B.
            return Some((Poly::new(f.a.clone(), pp, f.b.clone()), Rat::one()));
        }
        return None;
    }
    // g.b < 0: a x^p + b >= (a/2) x^p once (a/2) x^p >= -b.
    let half_a = &g.a / rat(2);
    let from = root_ceil(&(-&g.b / &half_a), &g.p);
    if let Ok(c) = pow_small(&half_a, &f.p) {
        return Some((Poly::new(&f.a * c, pp, f.b.clone()), from));
    }
    if half_a >= Rat::one() {
        return Some((Poly::new(f.a.clone(), pp, f.b.clone()), from));
    }
    None
}

/// Certified monomial `m` with `F(g(x)) <= m(x)` past the returned point.
fn mono_compose_upper(f: &Poly, g: &Poly) -> Option<(Poly, Rat)> {
    if f.p.is_zero() {
        return Some((Poly::constant(f.constant_value()), Rat::one()));
    }
    if f.p.is_one() {
        return Some((
            Poly::new(&f.a * &g.a, g.p.clone(), &f.a * &g.b + &f.b),
            Rat::one(),
        ));
    }
    if g.is_constant() {
        return None;
    }
    // g(x) <= (a + b⁺) x^p for x >= 1.
    let cap = if g.b.is_positive() { &g.a + &g.b } else { g.a.clone() };
    let pp = &f.p * &g.p;
    if let Ok(c) = pow_small(&cap, &f.p) {
        return Some((Poly::new(&f.a * c, pp, f.b.clone()), Rat::one()));
    }
    if cap <= Rat::one() {
        return Some((Poly::new(f.a.clone(), pp, f.b.clone()), Rat::one()));
    }
    None
}

/// Rational power with a hard exponent cutoff (bounds only need small
/// coefficient powers; `1^p` is free at any exponent).
fn pow_small(x: &Rat, p: &BigUint) -> Result<Rat, ()> {
    if x.is_one() {
        return Ok(Rat::one());
    }
    if p > &BigUint::from(256u32) {
        return Err(());
    }
    pow_rat(x, p).map_err(|_| ())
}

fn head_of_form(form: &Form, upto: &Rat) -> Option<HeadBound> {
    match form {
        Form::Poly(p) => Some(HeadBound {
            upto: upto.clone(),
            lower: p.clone(),
            upper: Some(p.clone()),
            exact: true,
        }),
        Form::Shift { base, dy } => {
            let h = base.head_bound()?;
            Some(HeadBound {
                upto: h.upto.min(upto.clone()),
                lower: Poly::new(h.lower.a, h.lower.p, &h.lower.b + dy),
                upper: h.upper.map(|u| Poly::new(u.a, u.p, &u.b + dy)),
                exact: h.exact,
            })
        }
        Form::Comp { outer, inner } => {
            let hi = inner.head_bound()?;
            if !hi.exact {
                return None;
            }
            let g = &hi.lower;
            if g.b.is_zero() && !g.is_constant() {
                let ho = outer.head_bound()?;
                // Shrink validity so inner values stay within outer's head.
                let upto2 = root_floor_pos(&(&ho.upto / &g.a), &g.p, &hi.upto)?;
                if ho.exact {
                    let f = &ho.lower;
                    if f.p.is_one() {
                        return Some(HeadBound {
                            upto: upto2,
                            lower: Poly::new(&f.a * &g.a, g.p.clone(), &f.a * &g.b + &f.b),
                            upper: Some(Poly::new(
                                &f.a * &g.a,
                                g.p.clone(),
                                &f.a * &g.b + &f.b,
                            )),
                            exact: true,
                        });
                    }
                    if let Ok(c) = pow_small(&g.a, &f.p) {
                        let poly = Poly::new(&f.a * c, &f.p * &g.p, f.b.clone());
                        return Some(HeadBound {
                            upto: upto2,
                            lower: poly.clone(),
                            upper: Some(poly),
                            exact: true,
                        });
                    }
                }
                return None;
            }
            // inner(0+) = b > 0: constant envelopes from exact evaluations.
            let lo_val = outer.evaluate(&g.b).ok()?;
            let hi_in = inner.evaluate(upto).ok()?;
            let hi_val = outer.evaluate(&hi_in).ok()?;
            Some(HeadBound {
                upto: upto.clone(),
                lower: Poly::constant(lo_val),
                upper: Some(Poly::constant(hi_val)),
                exact: false,
            })
        }
    }
}

/// Exact order of two monomial forms near infinity.
pub(crate) enum TailOrd {
    /// `f(x) >= g(x)` for every `x >= threshold`.
    Ge { threshold: Rat },
    /// `f(x) < g(x)` for every `x >= beyond`.
    Lt { beyond: Rat },
}

pub(crate) fn tail_cmp_ge(f: &Poly, g: &Poly, from: &Rat) -> TailOrd {
    let fc = f.is_constant();
    let gc = g.is_constant();
    if fc && gc {
        return if f.constant_value() >= g.constant_value() {
            TailOrd::Ge {
                threshold: from.clone(),
            }
        } else {
            TailOrd::Lt {
                beyond: from.clone(),
            }
        };
    }
    if fc {
        // g unbounded beats any constant.
        let c = f.constant_value();
        let num = &c - &g.b;
        let beyond = if num.is_positive() {
            root_ceil(&(num / &g.a), &g.p) + Rat::one()
        } else {
            Rat::one()
        };
        return TailOrd::Lt {
            beyond: beyond.max(from.clone()),
        };
    }
    if gc {
        let c = g.constant_value();
        let num = &c - &f.b;
        let threshold = if num.is_positive() {
            root_ceil(&(num / &f.a), &f.p)
        } else {
            Rat::zero()
        };
        return TailOrd::Ge {
            threshold: threshold.max(from.clone()),
        };
    }
    match f.p.cmp(&g.p) {
        std::cmp::Ordering::Greater => {
            let d = &f.p - &g.p;
            let c = &g.b - &f.b;
            let threshold = if c.is_positive() {
                root_ceil(&((&g.a + c) / &f.a), &d).max(Rat::one())
            } else {
                root_ceil(&(&g.a / &f.a), &d)
            };
            TailOrd::Ge {
                threshold: threshold.max(from.clone()),
            }
        }
        std::cmp::Ordering::Less => {
            // g grows strictly faster; find a certified strictness point.
            let d = &g.p - &f.p;
            let fb = if f.b.is_positive() { f.b.clone() } else { Rat::zero() };
            let gb = if g.b.is_negative() { -g.b.clone() } else { Rat::zero() };
            let beyond = root_ceil(&((&f.a + fb + gb) / &g.a), &d) + Rat::one();
            TailOrd::Lt {
                beyond: beyond.max(from.clone()).max(Rat::one()),
            }
        }
        std::cmp::Ordering::Equal => {
            use std::cmp::Ordering::*;
            match f.a.cmp(&g.a) {
                Greater => {
                    let c = &g.b - &f.b;
                    let threshold = if c.is_positive() {
                        root_ceil(&(c / (&f.a - &g.a)), &f.p)
                    } else {
                        Rat::zero()
                    };
                    TailOrd::Ge {
                        threshold: threshold.max(from.clone()),
                    }
                }
                Equal => {
                    if f.b >= g.b {
                        TailOrd::Ge {
                            threshold: from.clone(),
                        }
                    } else {
                        TailOrd::Lt {
                            beyond: from.clone().max(Rat::one()),
                        }
                    }
                }
                Less => {
                    let c = &f.b - &g.b;
                    let beyond = if c.is_positive() {
                        root_ceil(&(c / (&g.a - &f.a)), &f.p) + Rat::one()
                    } else {
                        Rat::one()
                    };
                    TailOrd::Lt {
                        beyond: beyond.max(from.clone()),
                    }
                }
            }
        }
    }
}

pub(crate) enum HeadOrd {
    /// `f >= g` on `(0, upto]`.
    Ge { upto: Rat },
    /// `f < g` on `(0, below]`.
    Lt { below: Rat },
    Inconclusive,
}

pub(crate) fn head_cmp_ge(f: &Poly, g: &Poly, upto: &Rat) -> HeadOrd {
    let half = |r: &Rat| r / rat(2);
    let fc = f.is_constant();
    let gc = g.is_constant();
    let (fb, gb) = (
        if fc { f.constant_value() } else { f.b.clone() },
        if gc { g.constant_value() } else { g.b.clone() },
    );
    match fb.cmp(&gb) {
        std::cmp::Ordering::Greater => {
            if gc {
                return HeadOrd::Ge { upto: upto.clone() };
            }
            // need a_g x^{p_g} <= fb - gb
            match root_floor_pos(&((&fb - &gb) / &g.a), &g.p, upto) {
                Some(u) => HeadOrd::Ge { upto: u },
                None => HeadOrd::Inconclusive,
            }
        }
        std::cmp::Ordering::Less => {
            if fc {
                return HeadOrd::Lt {
                    below: upto.clone(),
                };
            }
            match root_floor_pos(&(half(&(&gb - &fb)) / &f.a), &f.p, upto) {
                Some(u) => HeadOrd::Lt { below: u },
                None => HeadOrd::Inconclusive,
            }
        }
        std::cmp::Ordering::Equal => {
            if fc && gc {
                return HeadOrd::Ge { upto: upto.clone() };
            }
            if fc {
                // f constant = g(0+); g exceeds it immediately.
                return HeadOrd::Lt {
                    below: upto.clone(),
                };
            }
            if gc {
                return HeadOrd::Ge { upto: upto.clone() };
            }
            match f.p.cmp(&g.p) {
                std::cmp::Ordering::Less => {
                    let d = &g.p - &f.p;
                    match root_floor_pos(&(&f.a / &g.a), &d, upto) {
                        Some(u) => HeadOrd::Ge { upto: u },
                        None => HeadOrd::Inconclusive,
                    }
                }
                std::cmp::Ordering::Equal => {
                    if f.a >= g.a {
                        HeadOrd::Ge { upto: upto.clone() }
                    } else {
                        HeadOrd::Lt {
                            below: upto.clone(),
                        }
                    }
                }
                std::cmp::Ordering::Greater => {
                    let d = &f.p - &g.p;
                    match root_floor_pos(&half(&(&g.a / &f.a)), &d, upto) {
                        Some(u) => HeadOrd::Lt { below: u },
                        None => HeadOrd::Inconclusive,
                    }
                }
            }
        }
    }
}

/// Decides `f(x) >= g(x)` in a neighborhood of infinity (large scale),
/// of zero (small scale), or both (global scale). The returned threshold
/// refers to the infinity end for large and global scales.
pub fn eventually_dominates(
    f: &ControlFunction,
    g: &ControlFunction,
) -> Result<DominationVerdict, FuncError> {
    if f.scale() != g.scale() {
        return Err(FuncError::ScaleMismatch(f.scale(), g.scale()));
    }
    Ok(match f.scale() {
        Scale::Large => large_dominates(f, g),
        Scale::Small => small_dominates(f, g),
        Scale::Global => match (large_dominates(f, g), small_dominates(f, g)) {
            (DominationVerdict::Yes { threshold }, DominationVerdict::Yes { .. }) => {
                DominationVerdict::Yes { threshold }
            }
            (DominationVerdict::No { witness }, _) => DominationVerdict::No { witness },
            (_, DominationVerdict::No { witness }) => DominationVerdict::No { witness },
            (DominationVerdict::Unknown { horizon }, _) => {
                DominationVerdict::Unknown { horizon }
            }
            (_, DominationVerdict::Unknown { horizon }) => {
                DominationVerdict::Unknown { horizon }
            }
        },
    })
}

fn large_dominates(f: &ControlFunction, g: &ControlFunction) -> DominationVerdict {
    let (tf, tg) = match (f.tail_bound(), g.tail_bound()) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            let horizon = f
                .domain()
                .1
                .or(g.domain().1)
                .cloned()
                .unwrap_or_else(Rat::zero);
            return DominationVerdict::Unknown { horizon };
        }
    };
    let from = tf.from.clone().max(tg.from.clone());
    if tf.exact && tg.exact {
        return match tail_cmp_ge(&tf.lower, &tg.lower, &from) {
            TailOrd::Ge { threshold } => DominationVerdict::Yes { threshold },
            TailOrd::Lt { beyond } => DominationVerdict::No { witness: beyond },
        };
    }
    if let Some(gu) = &tg.upper {
        if let TailOrd::Ge { threshold } = tail_cmp_ge(&tf.lower, gu, &from) {
            return DominationVerdict::Yes { threshold };
        }
    }
    if let Some(fu) = &tf.upper {
        if let TailOrd::Lt { beyond } = tail_cmp_ge(fu, &tg.lower, &from) {
            return DominationVerdict::No { witness: beyond };
        }
    }
    DominationVerdict::Unknown { horizon: from }
}

fn small_dominates(f: &ControlFunction, g: &ControlFunction) -> DominationVerdict {
    let (hf, hg) = match (f.head_bound(), g.head_bound()) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return DominationVerdict::Unknown {
                horizon: Rat::zero(),
            }
        }
    };
    let upto = hf.upto.clone().min(hg.upto.clone());
    if hf.exact && hg.exact {
        return match head_cmp_ge(&hf.lower, &hg.lower, &upto) {
            HeadOrd::Ge { upto } => DominationVerdict::Yes { threshold: upto },
            HeadOrd::Lt { below } => DominationVerdict::No { witness: below },
            HeadOrd::Inconclusive => DominationVerdict::Unknown { horizon: upto },
        };
    }
    if let Some(gu) = &hg.upper {
        if let HeadOrd::Ge { upto } = head_cmp_ge(&hf.lower, gu, &upto) {
            return DominationVerdict::Yes { threshold: upto };
        }
    }
    if let Some(fu) = &hf.upper {
        if let HeadOrd::Lt { below } = head_cmp_ge(fu, &hg.lower, &upto) {
            return DominationVerdict::No { witness: below };
        }
    }
    DominationVerdict::Unknown { horizon: upto }
}

/// Outcome of the dim-control check, with the certifying thresholds.
#[derive(Clone, Debug)]
pub struct DimControlReport {
    pub ok: bool,
    pub scale: Scale,
    /// `f(x) >= x` holds past this point (large / global scales).
    pub large_threshold: Option<Rat>,
    /// `f(x) >= x` holds on `(0, this]` (small / global scales).
    pub small_threshold: Option<Rat>,
    pub grid_points_checked: usize,
    pub failures: Vec<String>,
}

/// Checks monotonicity (grid plus breakpoints), continuity (exact, already
/// enforced structurally) and the scale condition from Definition-level
/// requirements: `f >= id` near the relevant end, `f(∞) = ∞` for large
/// scale, `f(0) = 0` for small scale.
pub fn is_dim_control(f: &ControlFunction) -> DimControlReport {
    let mut failures = Vec::new();

    // Monotonicity on breakpoints plus interior samples.
    let mut pts = f.breakpoints();
    let extra: Vec<Rat> = {
        let mut v = Vec::new();
        let n = pts.len();
        for i in 0..n.saturating_sub(1) {
            let (u, w) = (&pts[i], &pts[i + 1]);
            if n <= 32 {
                for k in 1..4 {
                    v.push(u + (w - u) * crate::rational::ratio(k, 4));
                }
            } else {
                v.push((u + w) / rat(2));
            }
        }
        // Past the last breakpoint for unbounded domains.
        if f.domain().1.is_none() {
            let last = pts.last().cloned().unwrap_or_else(Rat::zero);
            v.push(&last + rat(1));
            v.push(&last + rat(2));
        }
        v
    };
    pts.extend(extra);
    pts.sort();
    pts.dedup();
    let mut prev: Option<(Rat, Rat)> = None;
    let mut checked = 0usize;
    for x in &pts {
        match f.evaluate(x) {
            Ok(v) => {
                if v.is_negative() {
                    failures.push(format!("negative value at {x}"));
                }
                if let Some((_px, pv)) = &prev {
                    if &v < pv {
                        failures.push(format!("not monotone at {x}"));
                    }
                }
                prev = Some((x.clone(), v));
                checked += 1;
            }
            Err(FuncError::Unsupported(_)) => {
                // Value too large to materialize; structural monotonicity
                // still applies, skip the sample.
            }
            Err(e) => failures.push(format!("evaluation failed at {x}: {e}")),
        }
    }

    let id = ControlFunction::identity(f.scale());
    let mut large_threshold = None;
    let mut small_threshold = None;
    if matches!(f.scale(), Scale::Large | Scale::Global) {
        match f.tail_bound() {
            None => failures.push("no tail: bounded domain or opaque growth".into()),
            Some(t) if t.lower.is_constant() => {
                failures.push("bounded growth: f(inf) != inf".into())
            }
            Some(_) => match large_dominates(f, &id.with_scale(f.scale())) {
                DominationVerdict::Yes { threshold } => large_threshold = Some(threshold),
                DominationVerdict::No { witness } => {
                    failures.push(format!("f < id past {witness}"))
                }
                DominationVerdict::Unknown { .. } => {
                    failures.push("cannot certify f >= id near infinity".into())
                }
            },
        }
    }
    if matches!(f.scale(), Scale::Small | Scale::Global) {
        if !f.domain().0.is_zero() {
            failures.push("small-scale function must be defined at 0".into());
        } else {
            match f.evaluate(&Rat::zero()) {
                Ok(v) if v.is_zero() => {}
                Ok(v) => failures.push(format!("f(0) = {v} != 0")),
                Err(e) => failures.push(format!("f(0) failed: {e}")),
            }
            match small_dominates(f, &id.with_scale(f.scale())) {
                DominationVerdict::Yes { threshold } => small_threshold = Some(threshold),
                DominationVerdict::No { witness } => {
                    failures.push(format!("f < id below {witness}"))
                }
                DominationVerdict::Unknown { .. } => {
                    failures.push("cannot certify f >= id near zero".into())
                }
            }
        }
    }

    DimControlReport {
        ok: failures.is_empty(),
        scale: f.scale(),
        large_threshold,
        small_threshold,
        grid_points_checked: checked,
        failures,
    }
}
