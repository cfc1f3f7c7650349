use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance when deciding that two breakpoints coincide.
const BREAK_TOL: f64 = 1e-12;

/// A closed-form function of local time `s`, measured from the start of the
/// segment that carries it.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Form {
    Constant {
        value: f64,
    },
    Linear {
        start: f64,
        rate: f64,
    },
    /// `numerator / base(s)`
    Reciprocal {
        numerator: f64,
        base: Box<Form>,
    },
    Splitting(Box<Splitting>),
}

/// Which quantity a [`Splitting`] form evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    /// `ε₁ = 2g₁²/(χ⁺+χ⁻)`
    Eps1,
    /// `ε₂ = 2g₂²/(χ⁺−χ⁻)`, clamped in magnitude at the cutoff.
    Eps2,
    /// `g₁²/ε₁`
    Coupling1,
    /// `g₂²/ε₂` from the clamped `ε₂`.
    Coupling2,
    /// `g₁²/ε₁ + g₂²/ε₂`, the drive actually realized in the `|−−>` sector.
    ChiPlus,
    /// `g₁²/ε₁ − g₂²/ε₂`, the drive actually realized in the `|−+>` sector.
    ChiMinus,
}

/// Qubit splittings that realize a drive pair, evaluated from the local
/// forms of `χ⁺` and `χ⁻`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Splitting {
    pub kind: SplitKind,
    pub plus: Form,
    pub minus: Form,
    pub g1: f64,
    pub g2: f64,
    pub cutoff: f64,
    /// Sign of `χ⁺ − χ⁻` away from the clamp; `ε₂` carries this sign.
    pub orientation: f64,
}

impl Splitting {
    fn threshold(&self) -> f64 {
        2.0 * self.g2 * self.g2 / self.cutoff
    }

    fn clamped(&self, diff: f64) -> bool {
        diff * self.orientation <= self.threshold()
    }

    fn eval(&self, s: f64) -> f64 {
        let p = self.plus.eval(s);
        let m = self.minus.eval(s);
        let diff = p - m;
        let coupling1 = 0.5 * (p + m);
        let coupling2 =
            if self.clamped(diff) { self.orientation * self.g2 * self.g2 / self.cutoff } else { 0.5 * diff };
        match self.kind {
            SplitKind::Eps1 => self.g1 * self.g1 / coupling1,
            SplitKind::Eps2 => {
                if self.clamped(diff) {
                    self.orientation * self.cutoff
                } else {
                    2.0 * self.g2 * self.g2 / diff
                }
            }
            SplitKind::Coupling1 => coupling1,
            SplitKind::Coupling2 => coupling2,
            SplitKind::ChiPlus => coupling1 + coupling2,
            SplitKind::ChiMinus => coupling1 - coupling2,
        }
    }

    /// Local times in `(0, len)` where the clamp switches on or off.
    fn clamp_crossings(&self, len: f64) -> Vec<f64> {
        let (p0, pr) = self.plus.affine().expect("splitting drives are affine");
        let (m0, mr) = self.minus.affine().expect("splitting drives are affine");
        let o = self.orientation;
        let d0 = (p0 - m0) * o;
        let dr = (pr - mr) * o;
        if dr == 0.0 {
            return Vec::new();
        }
        let s = (self.threshold() - d0) / dr;
        if s > BREAK_TOL * len.max(1.0) && s < len * (1.0 - BREAK_TOL) {
            vec![s]
        } else {
            Vec::new()
        }
    }
}

impl Form {
    pub fn constant(value: f64) -> Form {
        Form::Constant { value }
    }

    pub fn linear(start: f64, rate: f64) -> Form {
        Form::Linear { start, rate }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Form::Constant { value } => *value,
            Form::Linear { start, rate } => start + rate * s,
            Form::Reciprocal { numerator, base } => numerator / base.eval(s),
            Form::Splitting(sp) => sp.eval(s),
        }
    }

    /// `(value at s = 0, slope)` for constant and linear forms.
    pub fn affine(&self) -> Option<(f64, f64)> {
        match self {
            Form::Constant { value } => Some((*value, 0.0)),
            Form::Linear { start, rate } => Some((*start, *rate)),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Form::Constant { .. } => true,
            Form::Linear { rate, .. } => *rate == 0.0,
            Form::Reciprocal { base, .. } => base.is_constant(),
            Form::Splitting(sp) => sp.plus.is_constant() && sp.minus.is_constant(),
        }
    }

    /// The same function with its origin moved to local time `offset`.
    pub fn rebase(&self, offset: f64) -> Form {
        if offset == 0.0 {
            return self.clone();
        }
        match self {
            Form::Constant { .. } => self.clone(),
            Form::Linear { start, rate } => Form::Linear { start: start + rate * offset, rate: *rate },
            Form::Reciprocal { numerator, base } => {
                Form::Reciprocal { numerator: *numerator, base: Box::new(base.rebase(offset)) }
            }
            Form::Splitting(sp) => Form::Splitting(Box::new(Splitting {
                plus: sp.plus.rebase(offset),
                minus: sp.minus.rebase(offset),
                ..(**sp).clone()
            })),
        }
    }

    /// Points in `(0, len)` where the form is not smooth.
    pub fn internal_breaks(&self, len: f64) -> Vec<f64> {
        match self {
            Form::Constant { .. } | Form::Linear { .. } => Vec::new(),
            Form::Reciprocal { base, .. } => base.internal_breaks(len),
            Form::Splitting(sp) => sp.clamp_crossings(len),
        }
    }

    /// Canonical integer fingerprint, quantized so that values differing only
    /// by rounding map to the same key.
    pub fn fingerprint(&self, out: &mut Vec<i64>) {
        match self {
            Form::Constant { value } => {
                out.push(0);
                out.push(quantize(*value));
            }
            Form::Linear { start, rate } => {
                if *rate == 0.0 {
                    out.push(0);
                    out.push(quantize(*start));
                } else {
                    out.push(1);
                    out.push(quantize(*start));
                    out.push(quantize(*rate));
                }
            }
            Form::Reciprocal { numerator, base } => {
                out.push(2);
                out.push(quantize(*numerator));
                base.fingerprint(out);
            }
            Form::Splitting(sp) => {
                out.push(3);
                out.push(sp.kind as i64);
                for x in [sp.g1, sp.g2, sp.cutoff, sp.orientation] {
                    out.push(quantize(x));
                }
                sp.plus.fingerprint(out);
                sp.minus.fingerprint(out);
            }
        }
    }
}

/// Fixed-point rendering with resolution 2⁻⁴⁰.
pub fn quantize(x: f64) -> i64 {
    (x * (1u64 << 40) as f64).round() as i64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub form: Form,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Piecewise closed-form function on `[0, T]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Schedule {
    segments: Vec<Segment>,
}

impl Schedule {
    /// Segments must tile `[0, T]`; zero-length segments are dropped.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let segments: Vec<Segment> = segments.into_iter().filter(|s| !s.is_empty()).collect();
        let first = segments.first().ok_or_else(|| Error::InvalidParameter("schedule has no segments".into()))?;
        if first.start != 0.0 {
            return Err(Error::InvalidParameter(format!("schedule starts at {} instead of 0", first.start)));
        }
        for w in segments.windows(2) {
            let tol = BREAK_TOL * w[0].end.abs().max(1.0);
            if (w[1].start - w[0].end).abs() > tol {
                return Err(Error::InvalidParameter(format!(
                    "segments leave a gap or overlap between {} and {}",
                    w[0].end, w[1].start
                )));
            }
        }
        if segments.iter().any(|s| !s.start.is_finite() || !s.end.is_finite()) {
            return Err(Error::InvalidParameter("segment bounds must be finite".into()));
        }
        Ok(Self { segments })
    }

    pub fn constant(value: f64, duration: f64) -> Result<Self> {
        Self::new(vec![Segment { start: 0.0, end: duration, form: Form::constant(value) }])
    }

    /// `value0 + rate·t` on `[0, duration]`.
    pub fn linear_ramp(value0: f64, rate: f64, duration: f64) -> Result<Self> {
        Self::new(vec![Segment { start: 0.0, end: duration, form: Form::linear(value0, rate) }])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn duration(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }

    fn segment_index(&self, t: f64) -> usize {
        let idx = self.segments.partition_point(|s| s.end <= t);
        idx.min(self.segments.len() - 1)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let end = self.duration();
        let tol = BREAK_TOL * end.max(1.0);
        if !(t >= -tol && t <= end + tol) {
            return Err(Error::OutOfDomain { t, end });
        }
        Ok(self.value(t.clamp(0.0, end)))
    }

    /// Evaluation without the domain check; `t` is clamped into range.
    pub fn value(&self, t: f64) -> f64 {
        let seg = &self.segments[self.segment_index(t)];
        seg.form.eval(t - seg.start)
    }

    pub fn value_at_start(&self) -> f64 {
        self.segments[0].form.eval(0.0)
    }

    pub fn value_at_end(&self) -> f64 {
        let seg = self.segments.last().expect("nonempty");
        seg.form.eval(seg.len())
    }

    /// Segment boundaries strictly inside `(t0, t1)`.
    pub fn boundaries(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.segments.iter().map(|s| s.start).filter(|&b| b > t0 && b < t1).collect()
    }

    /// Form on `[a, b]` rebased to start at `a`; `[a, b]` must lie inside one segment.
    pub fn local_form(&self, a: f64, b: f64) -> Form {
        let seg = &self.segments[self.segment_index(0.5 * (a + b))];
        seg.form.rebase(a - seg.start)
    }

    /// The same schedule delayed by `shift`, with `prefix` filling `[0, shift]`.
    pub fn delayed(&self, shift: f64, prefix: Form) -> Result<Schedule> {
        let mut segments = vec![Segment { start: 0.0, end: shift, form: prefix }];
        segments.extend(self.segments.iter().map(|s| Segment {
            start: s.start + shift,
            end: s.end + shift,
            form: s.form.clone(),
        }));
        Schedule::new(segments)
    }

    /// This schedule followed by `form` on `[T, T + extra]`.
    pub fn extended(&self, extra: f64, form: Form) -> Result<Schedule> {
        let end = self.duration();
        let mut segments = self.segments.clone();
        segments.push(Segment { start: end, end: end + extra, form });
        Schedule::new(segments)
    }

    /// Pointwise transform of every segment form.
    pub fn map_forms(&self, f: impl Fn(&Form) -> Form) -> Schedule {
        Schedule {
            segments: self.segments.iter().map(|s| Segment { start: s.start, end: s.end, form: f(&s.form) }).collect(),
        }
    }

    pub fn max_on(&self, samples_per_segment: usize) -> f64 {
        self.sample_extreme(samples_per_segment, f64::max, f64::NEG_INFINITY)
    }

    pub fn min_on(&self, samples_per_segment: usize) -> f64 {
        self.sample_extreme(samples_per_segment, f64::min, f64::INFINITY)
    }

    fn sample_extreme(&self, n: usize, pick: fn(f64, f64) -> f64, init: f64) -> f64 {
        let mut acc = init;
        for seg in &self.segments {
            for k in 0..=n {
                acc = pick(acc, seg.form.eval(seg.len() * k as f64 / n as f64));
            }
        }
        acc
    }

    /// `∫₀ᵀ f(t) dt` by double-exponential quadrature on each smooth piece.
    pub fn integral(&self, rel_tol: f64) -> Result<f64> {
        let mut total = 0.0;
        for seg in &self.segments {
            let len = seg.len();
            let mut cuts = vec![0.0];
            cuts.extend(seg.form.internal_breaks(len));
            cuts.push(len);
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                let piece = seg.form.rebase(a);
                if let Some((v0, r)) = piece.affine() {
                    total += v0 * (b - a) + 0.5 * r * (b - a) * (b - a);
                    continue;
                }
                let scale = piece.eval(0.0).abs().max(piece.eval(b - a).abs()).max(1e-300) * (b - a);
                let out = quadrature::double_exponential::integrate(|s| piece.eval(s), 0.0, b - a, rel_tol * scale);
                if !out.integral.is_finite() || out.error_estimate > 10.0 * rel_tol * scale {
                    return Err(Error::Quadrature(format!(
                        "piece [{}, {}] of a segment starting at {}: estimate {:.3e}",
                        a, b, seg.start, out.error_estimate
                    )));
                }
                total += out.integral;
            }
        }
        Ok(total)
    }
}

/// Merges sorted breakpoints that coincide within rounding.
pub(crate) fn merge_breaks(mut points: Vec<f64>) -> Vec<f64> {
    points.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(points.len());
    for p in points {
        match out.last() {
            Some(&q) if (p - q).abs() <= BREAK_TOL * q.abs().max(1.0) => {}
            _ => out.push(p),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiling_is_enforced() {
        let bad = Schedule::new(vec![
            Segment { start: 0.0, end: 1.0, form: Form::constant(1.0) },
            Segment { start: 1.5, end: 2.0, form: Form::constant(1.0) },
        ]);
        assert!(bad.is_err());
        let late = Schedule::new(vec![Segment { start: 0.5, end: 1.0, form: Form::constant(1.0) }]);
        assert!(late.is_err());
    }

    #[test]
    fn evaluation_and_domain() {
        let s = Schedule::linear_ramp(1.0, 2.0, 3.0).unwrap();
        assert_eq!(s.eval(1.5).unwrap(), 4.0);
        assert!(s.eval(3.5).is_err());
        assert!(s.eval(-0.1).is_err());
        assert_eq!(s.value_at_end(), 7.0);
    }

    #[test]
    fn delayed_copy_matches_source() {
        let s = Schedule::linear_ramp(0.5, 0.25, 2.0).unwrap();
        let d = s.delayed(1.25, Form::constant(0.5)).unwrap();
        for k in 0..=20 {
            let t = 2.0 * k as f64 / 20.0;
            assert_eq!(d.eval(t + 1.25).unwrap(), s.eval(t).unwrap());
        }
        assert_eq!(d.eval(0.7).unwrap(), 0.5);
    }

    #[test]
    fn rebase_shifts_origin() {
        let f = Form::linear(1.0, 0.5);
        assert_eq!(f.rebase(2.0).eval(1.0), f.eval(3.0));
    }

    #[test]
    fn integral_of_reciprocal() {
        let s = Schedule::new(vec![Segment {
            start: 0.0,
            end: 2.0,
            form: Form::Reciprocal { numerator: 1.0, base: Box::new(Form::linear(1.0, 1.0)) },
        }])
        .unwrap();
        let exact = 3.0f64.ln();
        assert!((s.integral(1e-12).unwrap() - exact).abs() < 1e-11);
    }
}
