//! Symbolic algebra of dim-control functions.
//!
//! A [`ControlFunction`] is a nonnegative, non-decreasing, continuous
//! function given by contiguous segments. Segment bodies are either exact
//! closed forms `a·x^p + b` with rational coefficients and natural
//! exponents, or references to other functions (vertical shifts and
//! compositions). All evaluation is exact rational arithmetic; eventual
//! comparisons are decided from exact leading forms, or from certified
//! monomial envelopes when a function is opaque.

mod dominate;
mod parse;

pub use dominate::{
    eventually_dominates, is_dim_control, DimControlReport, DominationVerdict, TailBound,
};
pub use parse::parse_function;

use crate::rational::{pow_rat, rat, Rat};
use num_bigint::BigUint;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::sync::Arc;

/// End(s) of the scale axis a function or semigroup talks about.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Large,
    Small,
    Global,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scale::Large => write!(f, "large"),
            Scale::Small => write!(f, "small"),
            Scale::Global => write!(f, "global"),
        }
    }
}

/// How much exact structure a function exposes for comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FuncClass {
    PiecewiseAffine,
    PiecewiseMonomial,
    Opaque,
}

#[derive(Debug, thiserror::Error)]
pub enum FuncError {
    #[error("scale mismatch: {0} vs {1}")]
    ScaleMismatch(Scale, Scale),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("malformed function: {0}")]
    Malformed(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Closed form `a·x^p + b` (so `p = 0` means the constant `a + b`).
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    pub a: Rat,
    pub p: BigUint,
    pub b: Rat,
}

impl Poly {
    pub fn new(a: Rat, p: BigUint, b: Rat) -> Self {
        // a == 0 collapses to the constant b.
        if a.is_zero() {
            Poly {
                a: Rat::zero(),
                p: BigUint::zero(),
                b,
            }
        } else {
            Poly { a, p, b }
        }
    }

    pub fn constant(c: Rat) -> Self {
        Poly::new(c, BigUint::zero(), Rat::zero())
    }

    pub fn affine(a: Rat, b: Rat) -> Self {
        Poly::new(a, BigUint::one(), b)
    }

    pub fn is_constant(&self) -> bool {
        self.p.is_zero() || self.a.is_zero()
    }

    /// Constant value when `is_constant`.
    pub fn constant_value(&self) -> Rat {
        &self.a + &self.b
    }

    pub fn eval(&self, x: &Rat) -> Result<Rat, FuncError> {
        if self.is_constant() {
            return Ok(self.constant_value());
        }
        let xp = pow_rat(x, &self.p).map_err(FuncError::Unsupported)?;
        Ok(&self.a * xp + &self.b)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use crate::rational::format_rat;
        write!(
            f,
            "{}*x^{} + {}",
            format_rat(&self.a),
            self.p,
            format_rat(&self.b)
        )
    }
}

/// Segment body.
#[derive(Clone, Debug, PartialEq)]
pub enum Form {
    Poly(Poly),
    /// `base(x) + dy`, restricted to the segment interval.
    Shift { base: Arc<ControlFunction>, dy: Rat },
    /// `outer(inner(x))`, restricted to the segment interval.
    Comp {
        outer: Arc<ControlFunction>,
        inner: Arc<ControlFunction>,
    },
}

/// One segment of a control function: the body holds on `[lo, hi]`
/// (`hi = None` means unbounded).
#[derive(Clone, Debug, PartialEq)]
pub struct Seg {
    pub lo: Rat,
    pub hi: Option<Rat>,
    pub form: Form,
}

impl Seg {
    pub fn eval(&self, x: &Rat) -> Result<Rat, FuncError> {
        match &self.form {
            Form::Poly(p) => p.eval(x),
            Form::Shift { base, dy } => Ok(base.evaluate(x)? + dy),
            Form::Comp { outer, inner } => outer.evaluate(&inner.evaluate(x)?),
        }
    }
}

/// A symbolic increasing function on an interval of the nonnegative reals.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlFunction {
    scale: Scale,
    segs: Vec<Seg>,
}

impl ControlFunction {
    /// Builds a function from contiguous segments, validating structure,
    /// nonnegativity and exact continuity at every breakpoint.
    pub fn from_segs(scale: Scale, segs: Vec<Seg>) -> Result<Self, FuncError> {
        if segs.is_empty() {
            return Err(FuncError::Malformed("no segments".into()));
        }
        if segs[0].lo.is_negative() {
            return Err(FuncError::Malformed("domain starts below 0".into()));
        }
        for (i, s) in segs.iter().enumerate() {
            match (&s.hi, i + 1 == segs.len()) {
                (None, false) => {
                    return Err(FuncError::Malformed(
                        "unbounded segment before the last".into(),
                    ))
                }
                (Some(hi), _) if hi <= &s.lo => {
                    return Err(FuncError::Malformed("empty segment".into()))
                }
                _ => {}
            }
            if let Form::Poly(p) = &s.form {
                if p.a.is_negative() {
                    return Err(FuncError::Malformed("negative leading coefficient".into()));
                }
            }
            if i + 1 < segs.len() {
                let hi = s.hi.as_ref().expect("checked above");
                if hi != &segs[i + 1].lo {
                    return Err(FuncError::Malformed("segments not contiguous".into()));
                }
            }
        }
        let f = ControlFunction { scale, segs };
        // Exact continuity at breakpoints, and nonnegative left value.
        let v0 = f.evaluate(&f.segs[0].lo)?;
        if v0.is_negative() {
            return Err(FuncError::Malformed("negative value at domain start".into()));
        }
        for i in 0..f.segs.len() - 1 {
            let bp = f.segs[i].hi.clone().expect("internal breakpoint");
            let left = f.segs[i].eval(&bp)?;
            let right = f.segs[i + 1].eval(&bp)?;
            if left != right {
                return Err(FuncError::Malformed(format!(
                    "discontinuity at breakpoint {bp}: {left} vs {right}"
                )));
            }
        }
        // Segment-wise monotone sanity at endpoints (forms are increasing
        // by construction; this catches decreasing affine bridges).
        for s in &f.segs {
            if let Some(hi) = &s.hi {
                if f_eval_seg(s, &s.lo)? > f_eval_seg(s, hi)? {
                    return Err(FuncError::Malformed("decreasing segment".into()));
                }
            }
        }
        Ok(f)
    }

    /// Single closed-form piece on `[lo, hi]`.
    pub fn piece(scale: Scale, lo: Rat, hi: Option<Rat>, poly: Poly) -> Result<Self, FuncError> {
        Self::from_segs(
            scale,
            vec![Seg {
                lo,
                hi,
                form: Form::Poly(poly),
            }],
        )
    }

    /// The identity `x` on `[0, ∞)`.
    pub fn identity(scale: Scale) -> Self {
        Self::piece(
            scale,
            Rat::zero(),
            None,
            Poly::affine(Rat::one(), Rat::zero()),
        )
        .expect("identity is valid")
    }

    /// `c·x` on `[0, ∞)`, `c > 0`.
    pub fn linear(scale: Scale, c: Rat) -> Result<Self, FuncError> {
        if !c.is_positive() {
            return Err(FuncError::Malformed("linear slope must be positive".into()));
        }
        Self::piece(scale, Rat::zero(), None, Poly::affine(c, Rat::zero()))
    }

    /// `a·x^p` on `[lo, ∞)`.
    pub fn monomial(scale: Scale, a: Rat, p: u64, lo: Rat) -> Result<Self, FuncError> {
        Self::piece(scale, lo, None, Poly::new(a, BigUint::from(p), Rat::zero()))
    }

    /// Continuous piecewise-linear function through the given points,
    /// extended past the last point with the final slope.
    pub fn piecewise_linear(scale: Scale, points: &[(Rat, Rat)]) -> Result<Self, FuncError> {
        if points.len() < 2 {
            return Err(FuncError::Malformed("need at least two points".into()));
        }
        let mut segs = Vec::new();
        for w in points.windows(2) {
            let (x0, y0) = &w[0];
            let (x1, y1) = &w[1];
            if x1 <= x0 {
                return Err(FuncError::Malformed("x values must increase".into()));
            }
            let slope = (y1 - y0) / (x1 - x0);
            let b = y0 - &slope * x0;
            segs.push(Seg {
                lo: x0.clone(),
                hi: Some(x1.clone()),
                form: Form::Poly(Poly::affine(slope, b)),
            });
        }
        // Extend with the last slope.
        let (xl, yl) = points.last().expect("nonempty");
        let last_slope = match &segs.last().expect("nonempty").form {
            Form::Poly(p) => p.a.clone(),
            _ => unreachable!(),
        };
        let b = yl - &last_slope * xl;
        segs.push(Seg {
            lo: xl.clone(),
            hi: None,
            form: Form::Poly(Poly::affine(last_slope, b)),
        });
        Self::from_segs(scale, segs)
    }

    /// The paper's quadratic generator: `x` on `[0,1]`, `x²` on `[1, ∞)`.
    pub fn square_above_one(scale: Scale) -> Self {
        Self::from_segs(
            scale,
            vec![
                Seg {
                    lo: Rat::zero(),
                    hi: Some(Rat::one()),
                    form: Form::Poly(Poly::affine(Rat::one(), Rat::zero())),
                },
                Seg {
                    lo: Rat::one(),
                    hi: None,
                    form: Form::Poly(Poly::new(Rat::one(), BigUint::from(2u32), Rat::zero())),
                },
            ],
        )
        .expect("valid")
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn segs(&self) -> &[Seg] {
        &self.segs
    }

    /// Re-tags the scale (used by semigroup truncation).
    pub fn with_scale(&self, scale: Scale) -> Self {
        let mut f = self.clone();
        f.scale = scale;
        f
    }

    pub fn domain(&self) -> (&Rat, Option<&Rat>) {
        (
            &self.segs[0].lo,
            self.segs.last().expect("nonempty").hi.as_ref(),
        )
    }

    pub fn is_identity(&self) -> bool {
        self.segs.len() == 1
            && self.segs[0].lo.is_zero()
            && self.segs[0].hi.is_none()
            && matches!(&self.segs[0].form, Form::Poly(p)
                if p.a.is_one() && p.p.is_one() && p.b.is_zero())
    }

    /// True when the function is a single pure monomial piece `a·x^p`.
    pub fn pure_monomial(&self) -> Option<&Poly> {
        if self.segs.len() != 1 || self.segs[0].hi.is_some() {
            return None;
        }
        match &self.segs[0].form {
            Form::Poly(p) if p.b.is_zero() && !p.p.is_zero() => Some(p),
            _ => None,
        }
    }

    pub fn class(&self) -> FuncClass {
        let mut affine = true;
        for s in &self.segs {
            match &s.form {
                Form::Poly(p) => {
                    if p.p > BigUint::one() {
                        affine = false;
                    }
                }
                _ => return FuncClass::Opaque,
            }
        }
        if affine {
            FuncClass::PiecewiseAffine
        } else {
            FuncClass::PiecewiseMonomial
        }
    }

    /// Breakpoints of this function (segment boundaries, recursively for
    /// referenced functions, clipped to the hosting segment).
    pub fn breakpoints(&self) -> Vec<Rat> {
        let mut out = Vec::new();
        for s in &self.segs {
            out.push(s.lo.clone());
            let clip = |v: &Rat| match (&s.lo, &s.hi) {
                (lo, Some(hi)) => v >= lo && v <= hi,
                (lo, None) => v >= lo,
            };
            match &s.form {
                Form::Poly(_) => {}
                Form::Shift { base, .. } => {
                    out.extend(base.breakpoints().into_iter().filter(|v| clip(v)))
                }
                Form::Comp { inner, .. } => {
                    out.extend(inner.breakpoints().into_iter().filter(|v| clip(v)))
                }
            }
            if let Some(hi) = &s.hi {
                out.push(hi.clone());
            }
        }
        out.sort();
        out.dedup();
        out
    }

    fn seg_index(&self, x: &Rat) -> Result<usize, FuncError> {
        if x < &self.segs[0].lo {
            return Err(FuncError::Domain(format!(
                "{x} below domain start {}",
                self.segs[0].lo
            )));
        }
        // Last segment whose lo <= x.
        let mut idx = match self
            .segs
            .binary_search_by(|s| s.lo.cmp(x))
        {
            Ok(i) => i,
            Err(0) => unreachable!("checked above"),
            Err(i) => i - 1,
        };
        // Prefer the right segment at a shared breakpoint (values agree).
        if idx + 1 < self.segs.len() && &self.segs[idx + 1].lo == x {
            idx += 1;
        }
        if let Some(hi) = &self.segs[idx].hi {
            if x > hi {
                return Err(FuncError::Domain(format!("{x} above domain end {hi}")));
            }
        }
        Ok(idx)
    }

    /// Exact value at `x`.
    pub fn evaluate(&self, x: &Rat) -> Result<Rat, FuncError> {
        let idx = self.seg_index(x)?;
        self.segs[idx].eval(x)
    }

    /// Restriction to `[lo, hi]` (clips segments).
    pub fn restrict(&self, lo: &Rat, hi: Option<&Rat>) -> Result<Self, FuncError> {
        let (dlo, dhi) = self.domain();
        if lo < dlo {
            return Err(FuncError::Domain(format!("restrict below domain: {lo}")));
        }
        if let (Some(h), Some(dh)) = (hi, dhi) {
            if h > dh {
                return Err(FuncError::Domain(format!("restrict above domain: {h}")));
            }
        }
        if hi.is_none() && dhi.is_some() {
            return Err(FuncError::Domain("restrict beyond bounded domain".into()));
        }
        let mut segs = Vec::new();
        for s in &self.segs {
            let s_lo = s.lo.clone().max(lo.clone());
            let s_hi = match (&s.hi, hi) {
                (Some(a), Some(b)) => Some(a.clone().min(b.clone())),
                (Some(a), None) => Some(a.clone()),
                (None, Some(b)) => Some(b.clone()),
                (None, None) => None,
            };
            let keep = match &s_hi {
                Some(h) => &s_lo < h,
                None => true,
            };
            if keep {
                segs.push(Seg {
                    lo: s_lo,
                    hi: s_hi,
                    form: s.form.clone(),
                });
            }
        }
        ControlFunction::from_segs(self.scale, segs)
    }
}

fn f_eval_seg(s: &Seg, x: &Rat) -> Result<Rat, FuncError> {
    s.eval(x)
}

/// `f ∘ g`. Flattens exactly when both operands are piecewise-affine or
/// both are pure monomials; otherwise returns an opaque composition node.
pub fn compose(f: &ControlFunction, g: &ControlFunction) -> Result<ControlFunction, FuncError> {
    if f.scale != g.scale {
        return Err(FuncError::ScaleMismatch(f.scale, g.scale));
    }
    if f.is_identity() {
        return Ok(g.clone());
    }
    if g.is_identity() {
        return Ok(f.clone());
    }
    if f.class() == FuncClass::PiecewiseAffine && g.class() == FuncClass::PiecewiseAffine {
        return compose_affine(f, g);
    }
    if let (Some(pf), Some(pg)) = (f.pure_monomial(), g.pure_monomial()) {
        // (A x^P) ∘ (a x^p) = A·a^P · x^{P·p}
        if let Ok(coeff) = pow_rat(&pg.a, &pf.p) {
            let a = &pf.a * coeff;
            let p = &pf.p * &pg.p;
            let lo = compose_domain_start(f, g)?;
            return ControlFunction::piece(f.scale, lo, None, Poly::new(a, p, Rat::zero()));
        }
    }
    let lo = compose_domain_start(f, g)?;
    let hi = g.domain().1.cloned();
    ControlFunction::from_segs(
        f.scale,
        vec![Seg {
            lo,
            hi,
            form: Form::Comp {
                outer: Arc::new(f.clone()),
                inner: Arc::new(g.clone()),
            },
        }],
    )
}

/// Smallest domain point for `f ∘ g`: the start of `g`'s domain if `g`
/// already reaches `f`'s domain there, else a certified point found by
/// doubling then bisecting on exact evaluations (the true preimage may be
/// irrational, so the returned start can be slightly inside the exact
/// composite domain).
fn compose_domain_start(
    f: &ControlFunction,
    g: &ControlFunction,
) -> Result<Rat, FuncError> {
    let f_lo = f.domain().0.clone();
    let g_lo = g.domain().0.clone();
    if g.evaluate(&g_lo)? >= f_lo {
        return Ok(g_lo);
    }
    // Find hi with g(hi) >= f_lo by doubling.
    let mut hi = if g_lo.is_zero() { Rat::one() } else { &g_lo + rat(1) };
    let mut tries = 0;
    while g.evaluate(&hi)? < f_lo {
        hi = &hi * rat(2);
        tries += 1;
        if tries > 128 {
            return Err(FuncError::Domain(
                "inner function never reaches the outer domain".into(),
            ));
        }
        if let (_, Some(dh)) = g.domain() {
            if &hi > dh {
                hi = dh.clone();
                if g.evaluate(&hi)? < f_lo {
                    return Err(FuncError::Domain(
                        "composition has empty domain".into(),
                    ));
                }
                break;
            }
        }
    }
    // Bisect a few times to tighten, keeping the certified side.
    let mut lo = g_lo;
    for _ in 0..32 {
        let mid = (&lo + &hi) / rat(2);
        if g.evaluate(&mid)? >= f_lo {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn compose_affine(
    f: &ControlFunction,
    g: &ControlFunction,
) -> Result<ControlFunction, FuncError> {
    let lo = compose_domain_start(f, g)?;
    let g = g.restrict(&lo, g.domain().1.cloned().as_ref())?;
    // Breakpoints: g's own, plus exact preimages under g of f's breakpoints.
    let mut bps: Vec<Rat> = g.segs.iter().map(|s| s.lo.clone()).collect();
    let f_bps: Vec<Rat> = f.segs.iter().map(|s| s.lo.clone()).collect();
    for s in &g.segs {
        let Form::Poly(p) = &s.form else { unreachable!() };
        if p.is_constant() {
            continue;
        }
        for w in &f_bps {
            // a x + b = w  =>  x = (w - b) / a
            let x = (w - &p.b) / &p.a;
            let inside = x > s.lo && s.hi.as_ref().map_or(true, |h| &x < h);
            if inside {
                bps.push(x);
            }
        }
    }
    bps.sort();
    bps.dedup();
    let g_hi = g.domain().1.cloned();
    let mut segs = Vec::new();
    for (i, lo_i) in bps.iter().enumerate() {
        let hi_i = bps.get(i + 1).cloned().or_else(|| g_hi.clone());
        if let Some(h) = &hi_i {
            if h <= lo_i {
                continue;
            }
        }
        // Sample point inside the subinterval to pick pieces.
        let mid = match &hi_i {
            Some(h) => (lo_i + h) / rat(2),
            None => lo_i + rat(1),
        };
        let gi = g.seg_index(&mid)?;
        let Form::Poly(pg) = &g.segs[gi].form else { unreachable!() };
        let gv = pg.eval(&mid)?;
        let fi = f.seg_index(&gv)?;
        let Form::Poly(pf) = &f.segs[fi].form else { unreachable!() };
        let comp = if pg.is_constant() {
            Poly::constant(pf.eval(&pg.constant_value())?)
        } else if pf.is_constant() {
            Poly::constant(pf.constant_value())
        } else {
            // pf, pg affine with p = 1: A(a x + b) + B.
            Poly::affine(&pf.a * &pg.a, &pf.a * &pg.b + &pf.b)
        };
        segs.push(Seg {
            lo: lo_i.clone(),
            hi: hi_i,
            form: Form::Poly(comp),
        });
        if segs.last().expect("pushed").hi.is_none() {
            break;
        }
    }
    ControlFunction::from_segs(f.scale, segs)
}

/// n-fold composition `f^n`, `n >= 1`.
pub fn iterate(f: &ControlFunction, n: u32) -> Result<ControlFunction, FuncError> {
    if n == 0 {
        return Err(FuncError::Precondition("iterate needs n >= 1".into()));
    }
    let mut acc = f.clone();
    for _ in 1..n {
        acc = compose(f, &acc)?;
    }
    Ok(acc)
}

/// Constructive pasting: an increasing continuous `f̄ >= g` on `[lo, hi]`
/// with the prescribed endpoint values. Follows the shifted-copy-plus-final-
/// segment construction; the switch point is searched over exact segment
/// boundaries so every domination check stays rational.
pub fn paste_dominating(
    g: &ControlFunction,
    lo: &Rat,
    hi: &Rat,
    f_left: &Rat,
    f_right: &Rat,
) -> Result<ControlFunction, FuncError> {
    if lo >= hi {
        return Err(FuncError::Precondition("empty interval".into()));
    }
    let g = g.restrict(lo, Some(hi))?;
    if g.class() == FuncClass::Opaque {
        return Err(FuncError::Unsupported(
            "paste_dominating needs closed-form pieces".into(),
        ));
    }
    let g_lo = g.evaluate(lo)?;
    let g_hi = g.evaluate(hi)?;
    if f_left < &g_lo || f_right < &g_hi {
        return Err(FuncError::Precondition(format!(
            "endpoint values must dominate g: f_left={f_left} vs g({lo})={g_lo}, f_right={f_right} vs g({hi})={g_hi}"
        )));
    }
    if f_right < f_left {
        return Err(FuncError::Precondition(
            "f_right < f_left cannot be increasing".into(),
        ));
    }
    let shift = f_left - &g_lo;
    let aux = shift_poly_fn(&g, &shift)?;
    if &aux.evaluate(hi)? == f_right {
        return Ok(aux);
    }
    // Candidates for the switch point, largest first.
    let mut cands: Vec<Rat> = aux.segs.iter().map(|s| s.lo.clone()).collect();
    cands.sort();
    cands.dedup();
    cands.reverse();
    for z in cands {
        let vz = aux.evaluate(&z)?;
        if &vz > f_right {
            continue;
        }
        if &z == hi {
            continue;
        }
        // Final segment: the line from (z, vz) to (hi, f_right).
        let slope = (f_right - &vz) / (hi - &z);
        let line = Poly::affine(slope.clone(), &vz - &slope * &z);
        if line_dominates(&line, &g, &z, hi)? {
            let mut segs: Vec<Seg> = Vec::new();
            if &z > lo {
                segs.extend(aux.restrict(lo, Some(&z))?.segs);
            }
            segs.push(Seg {
                lo: z.clone(),
                hi: Some(hi.clone()),
                form: Form::Poly(line),
            });
            return ControlFunction::from_segs(g.scale(), segs);
        }
    }
    Err(FuncError::Precondition(
        "no exact switch point yields a dominating paste".into(),
    ))
}

/// `g + dy` with closed forms kept closed.
fn shift_poly_fn(g: &ControlFunction, dy: &Rat) -> Result<ControlFunction, FuncError> {
    let segs = g
        .segs
        .iter()
        .map(|s| {
            let form = match &s.form {
                Form::Poly(p) => Form::Poly(Poly::new(p.a.clone(), p.p.clone(), &p.b + dy)),
                Form::Shift { base, dy: d0 } => Form::Shift {
                    base: base.clone(),
                    dy: d0 + dy,
                },
                other => Form::Shift {
                    base: Arc::new(
                        ControlFunction::from_segs(
                            g.scale,
                            vec![Seg {
                                lo: s.lo.clone(),
                                hi: s.hi.clone(),
                                form: other.clone(),
                            }],
                        )
                        .expect("single valid segment"),
                    ),
                    dy: dy.clone(),
                },
            };
            Ok(Seg {
                lo: s.lo.clone(),
                hi: s.hi.clone(),
                form,
            })
        })
        .collect::<Result<Vec<_>, FuncError>>()?;
    ControlFunction::from_segs(g.scale, segs)
}

/// Exact check that an affine `line` dominates `g` on `[lo, hi]`.
/// Each closed-form piece of `g` is convex there, so the difference is
/// concave per piece and endpoint checks suffice.
fn line_dominates(
    line: &Poly,
    g: &ControlFunction,
    lo: &Rat,
    hi: &Rat,
) -> Result<bool, FuncError> {
    let mut pts: Vec<Rat> = g
        .segs
        .iter()
        .flat_map(|s| {
            let mut v = vec![s.lo.clone()];
            if let Some(h) = &s.hi {
                v.push(h.clone());
            }
            v
        })
        .filter(|v| v >= lo && v <= hi)
        .collect();
    pts.push(lo.clone());
    pts.push(hi.clone());
    pts.sort();
    pts.dedup();
    for x in &pts {
        if line.eval(x)? < g.evaluate(x)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Result of [`diagonal_dominator`]: the dominating function, and for every
/// level `n <= levels` a threshold past which `g > f^n` strictly.
#[derive(Clone, Debug)]
pub struct DiagonalDominator {
    pub g: ControlFunction,
    pub thresholds: Vec<Rat>,
    /// `g(x) > x` strictly for every `x > strict_from`.
    pub strict_from: Rat,
}

/// Paste the iterates `f^n` over consecutive intervals into one function
/// that strictly eventually dominates every `f^n`, `n <= levels`.
///
/// `f` must be strictly above the identity from some certified point
/// (pass it via `strict_from_hint` when known; otherwise it is derived
/// from the exact pieces).
pub fn diagonal_dominator(
    f: &ControlFunction,
    levels: u32,
    strict_from_hint: Option<&Rat>,
) -> Result<DiagonalDominator, FuncError> {
    if f.scale() != Scale::Large {
        return Err(FuncError::Precondition(
            "diagonal_dominator works on large-scale functions".into(),
        ));
    }
    if levels == 0 {
        return Err(FuncError::Precondition("levels must be >= 1".into()));
    }
    let strict_from = match strict_from_hint {
        Some(t) => t.clone(),
        None => strict_above_identity_from(f)?,
    };
    // Knots x_1 < ... < x_{levels+1}, step 1/4, starting just past the
    // strictness threshold (and inside f's domain).
    let dom_lo = f.domain().0.clone();
    let mut x1 = strict_from.clone().max(dom_lo);
    if &x1 < &Rat::one() {
        x1 = Rat::one();
    } else {
        x1 = x1.floor() + Rat::one();
    }
    let step = crate::rational::ratio(1, 4);
    let knots: Vec<Rat> = (0..=levels)
        .map(|k| &x1 + &step * rat(k as i64))
        .collect();

    let mut iterates: Vec<ControlFunction> = Vec::with_capacity(levels as usize + 1);
    iterates.push(f.clone());
    for n in 2..=(levels + 1) {
        let prev = iterates.last().expect("nonempty");
        iterates.push(compose(f, prev)?);
    }

    let mut segs: Vec<Seg> = Vec::new();
    // Initial ramp from (0,0) to (x1, f(x1)); slope > 1 since f(x1) > x1.
    let fx1 = f.evaluate(&x1)?;
    if fx1 <= x1 {
        return Err(FuncError::Precondition(format!(
            "f({x1}) = {fx1} is not strictly above the identity"
        )));
    }
    segs.push(Seg {
        lo: Rat::zero(),
        hi: Some(x1.clone()),
        form: Form::Poly(Poly::affine(&fx1 / &x1, Rat::zero())),
    });
    for n in 1..=levels as usize {
        let xl = &knots[n - 1];
        let xr = &knots[n];
        let it_n = &iterates[n - 1];
        let it_next = &iterates[n];
        let v_right = it_next.evaluate(xr)?;
        // Largest bridge start with a certified convexity window.
        let len = xr - xl;
        let mut chosen: Option<Rat> = None;
        for k in [8i64, 4, 2, 1] {
            let y = xr - &len / rat(k);
            if &y < xl {
                continue;
            }
            if same_piece_chain(f, n as u32, &y, xr)? {
                chosen = Some(y);
                break;
            }
        }
        let y = chosen.ok_or_else(|| {
            FuncError::Unsupported("no convexity window for the bridge".into())
        })?;
        if &y > xl {
            segs.push(Seg {
                lo: xl.clone(),
                hi: Some(y.clone()),
                form: Form::Shift {
                    base: Arc::new(it_n.clone()),
                    dy: Rat::zero(),
                },
            });
        }
        let vy = it_n.evaluate(&y)?;
        let slope = (&v_right - &vy) / (xr - &y);
        segs.push(Seg {
            lo: y.clone(),
            hi: Some(xr.clone()),
            form: Form::Poly(Poly::affine(slope.clone(), &vy - &slope * &y)),
        });
    }
    // Tail: the (levels+1)-th iterate, exactly.
    let tail = iterates.last().expect("nonempty");
    segs.push(Seg {
        lo: knots[levels as usize].clone(),
        hi: None,
        form: Form::Shift {
            base: Arc::new(tail.clone()),
            dy: Rat::zero(),
        },
    });
    let g = ControlFunction::from_segs(Scale::Large, segs)?;
    let thresholds = (1..=levels as usize).map(|n| knots[n].clone()).collect();
    Ok(DiagonalDominator {
        g,
        thresholds,
        strict_from: Rat::zero(),
    })
}

/// True when every application step of `f^n` keeps `[y, xr]` inside a single
/// closed-form piece of `f`, which makes the composite convex there.
fn same_piece_chain(
    f: &ControlFunction,
    n: u32,
    y: &Rat,
    xr: &Rat,
) -> Result<bool, FuncError> {
    let mut u = y.clone();
    let mut v = xr.clone();
    for _ in 0..n {
        if !same_piece(f, &u, &v)? {
            return Ok(false);
        }
        u = f.evaluate(&u)?;
        v = f.evaluate(&v)?;
    }
    Ok(true)
}

fn same_piece(f: &ControlFunction, u: &Rat, v: &Rat) -> Result<bool, FuncError> {
    for s in &f.segs {
        let fits_lo = &s.lo <= u;
        let fits_hi = s.hi.as_ref().map_or(true, |h| v <= h);
        if fits_lo && fits_hi && matches!(s.form, Form::Poly(_)) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Certified point from which `f(x) > x` strictly holds onward, derived
/// from exact pieces (conservative for convex pieces: the left endpoint
/// must already have slope mass `a·p·x^{p-1} >= 1` or lie above 1).
pub fn strict_above_identity_from(f: &ControlFunction) -> Result<Rat, FuncError> {
    if f.domain().1.is_some() {
        return Err(FuncError::Precondition(
            "bounded functions have no neighborhood of infinity".into(),
        ));
    }
    // Candidates: segment boundaries and small integers past them.
    let mut cands: Vec<Rat> = f.segs.iter().map(|s| s.lo.clone()).collect();
    let last_lo = f.segs.last().expect("nonempty").lo.clone();
    for k in 0..=4 {
        cands.push(&last_lo + rat(k));
    }
    cands.sort();
    cands.dedup();
    'cand: for t in &cands {
        if t < f.domain().0 {
            continue;
        }
        for s in &f.segs {
            let lo = s.lo.clone().max(t.clone());
            match &s.hi {
                Some(hi) if &lo >= hi => continue,
                _ => {}
            }
            let Form::Poly(p) = &s.form else {
                continue 'cand;
            };
            if !piece_strictly_above_id(p, &lo, s.hi.as_ref())? {
                continue 'cand;
            }
        }
        return Ok(t.clone());
    }
    Err(FuncError::Precondition(
        "function is not certified strictly above the identity".into(),
    ))
}

fn piece_strictly_above_id(
    p: &Poly,
    lo: &Rat,
    hi: Option<&Rat>,
) -> Result<bool, FuncError> {
    if p.is_constant() {
        // Constant piece must stay above the interval.
        return match hi {
            Some(h) => Ok(&p.constant_value() > h),
            None => Ok(false),
        };
    }
    let at_lo = p.eval(lo)? > *lo;
    if !at_lo {
        return Ok(false);
    }
    if p.p.is_one() {
        // Affine difference (a-1)x + b is monotone: endpoints decide.
        return match hi {
            Some(h) => Ok(p.eval(h)? > *h),
            None => Ok(p.a > Rat::one() || (p.a.is_one() && p.b.is_positive())),
        };
    }
    // p >= 2: difference a x^p + b - x is convex; require the derivative
    // at lo to already be >= 1 so the minimum sits at lo.
    let pm1 = &p.p - BigUint::one();
    let deriv_lo = &p.a * Rat::from_integer(p.p.clone().into()) * pow_rat(lo, &pm1).map_err(FuncError::Unsupported)?;
    if deriv_lo < Rat::one() {
        return Ok(false);
    }
    match hi {
        Some(h) => Ok(p.eval(h)? > *h),
        None => Ok(true),
    }
}

#[cfg(test)]
mod tests;
