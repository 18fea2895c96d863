//! Two-region piecewise linear quantization with breakpoint selection.
//!
//! The clipping range `[r_l, r_u]` is split by breakpoints `(p_l, p_u)` into
//! a central region `[p_l, p_u]` and two tail pieces `[r_l, p_l)` and
//! `(p_u, r_u]`. Each of the three pieces carries its own (b-1)-bit uniform
//! affine sub-quantizer whose offset is the piece's lower bound, so adjacent
//! grids share the boundary point and the overall map stays monotone.
//!
//! Breakpoints come from either the fast closed form
//! `p = sign(r) * sigma * ln(m * |r|/sigma + n)` (with m = 0.8614 and
//! n = 0.6079 by default), or from a numerical oracle that minimizes the
//! expected squared reconstruction error for Gaussian inputs by golden-section
//! search; the underlying objective is convex in the breakpoint, so a
//! derivative-free bracketing search suffices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distortion::piecewise_expected_mse;
use crate::golden::{GoldenSection, NonConvergence};
use crate::tensor::Tensor;
use crate::uniform::{QuantError, UniformParams, MAX_BITS, MIN_BITS};

/// Default breakpoint-formula slope.
pub const DEFAULT_BREAK_M: f64 = 0.8614;
/// Default breakpoint-formula intercept.
pub const DEFAULT_BREAK_N: f64 = 0.6079;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BreakpointMode {
    ClosedForm,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Piece {
    Central,
    LowerTail,
    UpperTail,
}

/// A quantized value: which piece it fell in plus the (b-1)-bit sub-code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PiecewiseCode {
    pub piece: Piece,
    pub code: i64,
}

/// Parameters of a b-bit piecewise linear quantizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiecewiseParams {
    b: u32,
    r_l: f64,
    r_u: f64,
    p_l: f64,
    p_u: f64,
    m: f64,
    n: f64,
    central: UniformParams,
    lower_tail: UniformParams,
    upper_tail: UniformParams,
}

#[derive(Debug, Error)]
pub enum PwError {
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("breakpoint formula log argument {arg} <= 0 for normalized bound {normalized}")]
    LogDomainError { arg: f64, normalized: f64 },
    #[error("breakpoints out of order after clamping: p_l={p_l} > p_u={p_u} (pathological range)")]
    BreakpointOrderViolation { p_l: f64, p_u: f64 },
    #[error("breakpoints must satisfy r_l <= p_l <= p_u <= r_u, got r_l={r_l}, p_l={p_l}, p_u={p_u}, r_u={r_u}")]
    BreakpointOutOfRange { r_l: f64, p_l: f64, p_u: f64, r_u: f64 },
    #[error("the breakpoint oracle requires r_l < 0 < r_u, got [{r_l}, {r_u}]")]
    RangeNotStraddlingZero { r_l: f64, r_u: f64 },
    #[error(transparent)]
    NonConvergence(#[from] NonConvergence),
    #[error(transparent)]
    Quant(#[from] QuantError),
}

/// Breakpoints from the closed-form approximation.
///
/// The formula is stated for a normalized Gaussian, so bounds are divided by
/// sigma before the log and the result is scaled and sign-mirrored back:
/// symmetric ranges therefore yield exactly symmetric breakpoints. A
/// non-negative `r_l` (or non-positive `r_u`) leaves no tail on that side.
/// Results are clamped into `[r_l, r_u]`; if they cross, the range is
/// pathological for this formula and an error is returned.
pub fn breakpoints_closed_form(
    r_l: f64,
    r_u: f64,
    sigma: f64,
    m: f64,
    n: f64,
) -> Result<(f64, f64), PwError> {
    if !(sigma > 0.0) {
        return Err(PwError::NonPositiveSigma(sigma));
    }
    let one_side = |bound: f64| -> Result<f64, PwError> {
        let normalized = bound.abs() / sigma;
        let arg = m * normalized + n;
        if arg <= 0.0 {
            return Err(PwError::LogDomainError { arg, normalized });
        }
        Ok(bound.signum() * sigma * arg.ln())
    };
    let p_u = if r_u > 0.0 { one_side(r_u)? } else { r_u };
    let p_l = if r_l < 0.0 { one_side(r_l)? } else { r_l };
    let p_l = p_l.clamp(r_l, r_u);
    let p_u = p_u.clamp(r_l, r_u);
    if p_l > p_u {
        return Err(PwError::BreakpointOrderViolation { p_l, p_u });
    }
    Ok((p_l, p_u))
}

/// Result of the numerical breakpoint oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakpointSolution {
    pub p_l: f64,
    pub p_u: f64,
    /// Expected squared error at the solution for `N(0, sigma^2)` inputs.
    pub expected_mse: f64,
}

/// Numerically optimal breakpoints for Gaussian inputs.
///
/// Minimizes the expected squared reconstruction error of the b-bit piecewise
/// scheme for `r ~ N(0, sigma^2)` over `[r_l, r_u]` (clipping error included;
/// it does not depend on the breakpoints). The expectation is a closed-form
/// Gaussian moment sum per quantization cell, so each evaluation is exact;
/// golden-section search to 1e-6 exploits convexity of the objective. An
/// exactly symmetric range is optimized over the single symmetric breakpoint
/// parameter; otherwise `p_l` and `p_u` are optimized independently by
/// coordinate descent.
pub fn breakpoints_oracle(
    b: u32,
    r_l: f64,
    r_u: f64,
    sigma: f64,
) -> Result<BreakpointSolution, PwError> {
    if !(sigma > 0.0) {
        return Err(PwError::NonPositiveSigma(sigma));
    }
    if !(r_l < 0.0 && r_u > 0.0) {
        return Err(PwError::RangeNotStraddlingZero { r_l, r_u });
    }
    // Validate b once up front; per-candidate construction cannot fail after.
    PiecewiseParams::with_breakpoints(b, r_l, r_u, r_l, r_u, DEFAULT_BREAK_M, DEFAULT_BREAK_N)?;

    let objective = |p_l: f64, p_u: f64| {
        let params =
            PiecewiseParams::with_breakpoints(b, r_l, r_u, p_l, p_u, DEFAULT_BREAK_M, DEFAULT_BREAK_N)
                .expect("candidate breakpoints lie inside the range");
        piecewise_expected_mse(&params, sigma)
    };

    let budget = 10_000usize;
    if r_l == -r_u {
        let gs = GoldenSection { tolerance: 1e-6, max_evals: budget };
        let res = gs.minimize(0.0, r_u, |p| objective(-p, p))?;
        return Ok(BreakpointSolution { p_l: -res.x, p_u: res.x, expected_mse: res.value });
    }

    // Asymmetric range: coordinate descent, one golden-section line search
    // per coordinate per sweep, sharing the evaluation budget.
    let mut p_l = r_l / 2.0;
    let mut p_u = r_u / 2.0;
    let mut spent = 0usize;
    let tol = 1e-6;
    loop {
        let gs = GoldenSection { tolerance: tol, max_evals: budget - spent };
        let res_u = gs.minimize(0.0, r_u, |p| objective(p_l, p))?;
        spent += res_u.evals;
        let gs = GoldenSection { tolerance: tol, max_evals: budget.saturating_sub(spent) };
        let res_l = gs.minimize(r_l, 0.0, |p| objective(p, res_u.x))?;
        spent += res_l.evals;
        let moved = (res_u.x - p_u).abs().max((res_l.x - p_l).abs());
        p_u = res_u.x;
        p_l = res_l.x;
        if moved <= tol {
            return Ok(BreakpointSolution { p_l, p_u, expected_mse: objective(p_l, p_u) });
        }
        if spent >= budget {
            return Err(NonConvergence { evals: spent, bracket: moved }.into());
        }
    }
}

/// Build piecewise parameters, deriving breakpoints per the requested mode.
pub fn make_piecewise_params(
    b: u32,
    r_l: f64,
    r_u: f64,
    sigma: f64,
    mode: BreakpointMode,
    m: f64,
    n: f64,
) -> Result<PiecewiseParams, PwError> {
    let (p_l, p_u) = match mode {
        BreakpointMode::ClosedForm => breakpoints_closed_form(r_l, r_u, sigma, m, n)?,
        BreakpointMode::Oracle => {
            let sol = breakpoints_oracle(b, r_l, r_u, sigma)?;
            (sol.p_l, sol.p_u)
        }
    };
    PiecewiseParams::with_breakpoints(b, r_l, r_u, p_l, p_u, m, n)
}

impl PiecewiseParams {
    /// Build parameters from explicit breakpoints. Each piece gets a
    /// (b-1)-bit unsigned sub-quantizer whose offset is the piece's lower
    /// bound; zero-width pieces are degenerate and never selected.
    pub fn with_breakpoints(
        b: u32,
        r_l: f64,
        r_u: f64,
        p_l: f64,
        p_u: f64,
        m: f64,
        n: f64,
    ) -> Result<Self, PwError> {
        if !(MIN_BITS..=MAX_BITS).contains(&b) {
            return Err(QuantError::InvalidBitWidth(b).into());
        }
        if !r_l.is_finite() || !r_u.is_finite() {
            return Err(QuantError::NonFiniteRange { r_l, r_u }.into());
        }
        if !(r_l <= p_l && p_l <= p_u && p_u <= r_u) {
            return Err(PwError::BreakpointOutOfRange { r_l, p_l, p_u, r_u });
        }
        let sub_bits = b - 1;
        Ok(Self {
            b,
            r_l,
            r_u,
            p_l,
            p_u,
            m,
            n,
            central: UniformParams::with_bits_unchecked(sub_bits, p_l, p_u, false)?,
            lower_tail: UniformParams::with_bits_unchecked(sub_bits, r_l, p_l, false)?,
            upper_tail: UniformParams::with_bits_unchecked(sub_bits, p_u, r_u, false)?,
        })
    }

    pub fn bits(&self) -> u32 {
        self.b
    }

    pub fn range(&self) -> (f64, f64) {
        (self.r_l, self.r_u)
    }

    pub fn breakpoints(&self) -> (f64, f64) {
        (self.p_l, self.p_u)
    }

    pub fn formula_constants(&self) -> (f64, f64) {
        (self.m, self.n)
    }

    pub fn central(&self) -> &UniformParams {
        &self.central
    }

    pub fn lower_tail(&self) -> &UniformParams {
        &self.lower_tail
    }

    pub fn upper_tail(&self) -> &UniformParams {
        &self.upper_tail
    }

    fn sub(&self, piece: Piece) -> &UniformParams {
        match piece {
            Piece::Central => &self.central,
            Piece::LowerTail => &self.lower_tail,
            Piece::UpperTail => &self.upper_tail,
        }
    }

    /// Clamp to the range, pick the piece (breakpoints belong to the central
    /// piece), and quantize within it.
    pub fn quantize(&self, r: f64) -> PiecewiseCode {
        let clamped = r.clamp(self.r_l, self.r_u);
        let piece = if clamped < self.p_l {
            Piece::LowerTail
        } else if clamped > self.p_u {
            Piece::UpperTail
        } else {
            Piece::Central
        };
        PiecewiseCode { piece, code: self.sub(piece).quantize(clamped) }
    }

    pub fn dequantize(&self, code: &PiecewiseCode) -> Result<f64, QuantError> {
        self.sub(code.piece).dequantize(code.code)
    }

    pub fn fake_quantize(&self, r: f64) -> f64 {
        let code = self.quantize(r);
        self.dequantize(&code).expect("own code is in domain")
    }
}

/// Elementwise piecewise quantize-then-dequantize; shape preserved.
pub fn pw_fake_quantize_tensor(t: &Tensor, params: &PiecewiseParams) -> Tensor {
    t.map(|v| params.fake_quantize(v))
        .expect("dequantized values are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distortion::uniform_expected_mse;
    use proptest::prelude::*;

    const M: f64 = DEFAULT_BREAK_M;
    const N: f64 = DEFAULT_BREAK_N;

    #[test]
    fn closed_form_matches_direct_formula_evaluation() {
        // ln(0.8614*2 + 0.6079) and ln(0.8614*3 + 0.6079), frozen from an
        // independent evaluation of the formula.
        let (p_l, p_u) = breakpoints_closed_form(-2.0, 2.0, 1.0, M, N).unwrap();
        assert!((p_u - 0.8461686516423478).abs() < 1e-12);
        assert_eq!(p_l, -p_u);

        let (_, p_u3) = breakpoints_closed_form(-3.0, 3.0, 1.0, M, N).unwrap();
        assert!((p_u3 - 1.1606790074176427).abs() < 1e-12);

        let (_, p_u4) = breakpoints_closed_form(-4.0, 4.0, 1.0, M, N).unwrap();
        assert!((p_u4 - 1.3995807054456249).abs() < 1e-12);
    }

    #[test]
    fn symmetric_range_gives_exactly_mirrored_breakpoints() {
        for t in [0.7, 1.3, 2.9, 5.5] {
            let (p_l, p_u) = breakpoints_closed_form(-t, t, 0.8, M, N).unwrap();
            assert_eq!(p_l, -p_u);
        }
    }

    #[test]
    fn sigma_scales_breakpoints() {
        let (_, p1) = breakpoints_closed_form(-2.0, 2.0, 1.0, M, N).unwrap();
        let (_, p2) = breakpoints_closed_form(-4.0, 4.0, 2.0, M, N).unwrap();
        assert!((p2 - 2.0 * p1).abs() < 1e-12);
    }

    #[test]
    fn one_sided_ranges_get_no_tail_on_that_side() {
        let (p_l, _) = breakpoints_closed_form(0.0, 4.0, 1.0, M, N).unwrap();
        assert_eq!(p_l, 0.0);
        let (p_l2, _) = breakpoints_closed_form(1.0, 4.0, 1.0, M, N).unwrap();
        assert_eq!(p_l2, 1.0);
        let (_, p_u) = breakpoints_closed_form(-4.0, -1.0, 1.0, M, N).unwrap();
        assert_eq!(p_u, -1.0);
    }

    #[test]
    fn closed_form_error_cases() {
        assert!(matches!(
            breakpoints_closed_form(-2.0, 2.0, 0.0, M, N).unwrap_err(),
            PwError::NonPositiveSigma(_)
        ));
        assert!(matches!(
            breakpoints_closed_form(-2.0, 2.0, 1.0, -1.0, 0.0).unwrap_err(),
            PwError::LogDomainError { .. }
        ));
        // Small symmetric range: both formula outputs cross zero.
        assert!(matches!(
            breakpoints_closed_form(-0.3, 0.3, 1.0, M, N).unwrap_err(),
            PwError::BreakpointOrderViolation { .. }
        ));
    }

    #[test]
    fn sub_quantizers_follow_the_piece_layout() {
        let params = PiecewiseParams::with_breakpoints(8, -4.0, 4.0, -1.5, 1.5, M, N).unwrap();
        assert_eq!(params.central().bits(), 7);
        assert_eq!(params.central().range(), (-1.5, 1.5));
        assert_eq!(params.central().offset(), -1.5);
        assert_eq!(params.lower_tail().range(), (-4.0, -1.5));
        assert_eq!(params.lower_tail().offset(), -4.0);
        assert_eq!(params.upper_tail().range(), (1.5, 4.0));
        assert_eq!(params.upper_tail().offset(), 1.5);
    }

    #[test]
    fn b2_pieces_have_two_levels_each() {
        let params = PiecewiseParams::with_breakpoints(2, -4.0, 4.0, -1.0, 1.0, M, N).unwrap();
        assert_eq!(params.central().levels(), 2);
        // 1-bit grid is just the piece endpoints.
        assert_eq!(params.central().dequantize(0).unwrap(), -1.0);
        assert_eq!(params.central().dequantize(1).unwrap(), 1.0);
    }

    #[test]
    fn boundary_values_quantize_exactly() {
        let params = PiecewiseParams::with_breakpoints(6, -4.0, 4.0, -1.25, 1.25, M, N).unwrap();
        let at_pu = params.quantize(1.25);
        assert_eq!(at_pu.piece, Piece::Central);
        assert_eq!(params.dequantize(&at_pu).unwrap(), 1.25);

        let at_ru = params.quantize(4.0);
        assert_eq!(at_ru.piece, Piece::UpperTail);
        assert_eq!(params.dequantize(&at_ru).unwrap(), 4.0);

        let at_rl = params.quantize(-4.0);
        assert_eq!(at_rl.piece, Piece::LowerTail);
        assert_eq!(at_rl.code, 0);
        assert_eq!(params.dequantize(&at_rl).unwrap(), -4.0);
    }

    #[test]
    fn collapsed_breakpoints_reduce_to_lower_bit_uniform() {
        let params = PiecewiseParams::with_breakpoints(8, -4.0, 4.0, -4.0, 4.0, M, N).unwrap();
        let uni = UniformParams::new(7, -4.0, 4.0, false).unwrap();
        for r in [-4.0, -2.7, -0.1, 0.0, 1.3, 3.99, 4.0] {
            assert_eq!(params.fake_quantize(r), uni.fake_quantize(r), "r={r}");
        }
        assert_eq!(
            piecewise_expected_mse(&params, 1.0),
            uniform_expected_mse(&uni, 1.0)
        );
    }

    #[test]
    fn level_budget_exact_count_small_b() {
        // b=3: three 4-level grids over [-4,-1], [-1,2], [2,5]; all scales are
        // exactly 1, adjacent grids share their boundary point: 12 - 2 = 10.
        let params = PiecewiseParams::with_breakpoints(3, -4.0, 5.0, -1.0, 2.0, M, N).unwrap();
        let mut outputs: Vec<u64> = (-900..=1000)
            .map(|i| params.fake_quantize(i as f64 * 0.005).to_bits())
            .collect();
        outputs.sort_unstable();
        outputs.dedup();
        assert_eq!(outputs.len(), 10);
        assert!(outputs.len() <= 3 * (1 << (3 - 1)));
    }

    #[test]
    fn oracle_beats_closed_form_and_collapse_on_standard_range() {
        let sol = breakpoints_oracle(8, -4.0, 4.0, 1.0).unwrap();
        let cf = make_piecewise_params(8, -4.0, 4.0, 1.0, BreakpointMode::ClosedForm, M, N).unwrap();
        let cf_mse = piecewise_expected_mse(&cf, 1.0);
        assert!(sol.expected_mse <= cf_mse, "{} vs {}", sol.expected_mse, cf_mse);
        // Frozen from the independent numerical oracle.
        assert!((sol.p_u - 0.949067).abs() < 1e-4, "p_u = {}", sol.p_u);
        assert!(sol.p_l == -sol.p_u);
    }

    #[test]
    fn oracle_scaling_covariance() {
        // The objective is scale-equivariant; the returned breakpoint agrees
        // up to the absolute search tolerance (the stopping rule does not
        // scale with the bracket).
        let base = breakpoints_oracle(6, -3.0, 3.0, 1.0).unwrap();
        let scaled = breakpoints_oracle(6, -6.0, 6.0, 2.0).unwrap();
        assert!((scaled.p_u - 2.0 * base.p_u).abs() < 4e-6);
        assert!((scaled.p_l - 2.0 * base.p_l).abs() < 4e-6);
        assert!((scaled.expected_mse - 4.0 * base.expected_mse).abs() < 1e-9);
    }

    #[test]
    fn oracle_rejects_one_sided_ranges() {
        assert!(matches!(
            breakpoints_oracle(8, 0.5, 4.0, 1.0).unwrap_err(),
            PwError::RangeNotStraddlingZero { .. }
        ));
    }

    #[test]
    fn oracle_handles_asymmetric_ranges() {
        let sol = breakpoints_oracle(8, -6.0, 2.0, 1.5).unwrap();
        assert!(sol.p_l >= -6.0 && sol.p_l <= 0.0);
        assert!(sol.p_u >= 0.0 && sol.p_u <= 2.0);
        // Coordinate-descent optimum is no worse than the collapsed quantizer.
        let collapsed = PiecewiseParams::with_breakpoints(8, -6.0, 2.0, -6.0, 2.0, M, N).unwrap();
        assert!(sol.expected_mse <= piecewise_expected_mse(&collapsed, 1.5));
    }

    #[test]
    fn constant_tensor_maps_to_nearest_central_grid_point() {
        let params = PiecewiseParams::with_breakpoints(8, -4.0, 4.0, -1.0, 1.0, M, N).unwrap();
        let t = Tensor::from_vec(vec![0.0; 8]).unwrap();
        let out = pw_fake_quantize_tensor(&t, &params);
        let expected = params.fake_quantize(0.0);
        assert!(out.data().iter().all(|&v| v == expected));
        assert!(expected.abs() <= params.central().scale() / 2.0);
    }

    proptest! {
        /// Every clamped input lands in exactly one piece and dequantizes
        /// inside the clipping range.
        #[test]
        fn output_in_range_and_total(
            b in 2u32..10,
            r in -20.0f64..20.0,
            lo in -10.0f64..-0.1,
            hi in 0.1f64..10.0,
            f_l in 0.0f64..=1.0,
            f_u in 0.0f64..=1.0,
        ) {
            let p_l = lo * f_l;
            let p_u = hi * f_u;
            let params = PiecewiseParams::with_breakpoints(b, lo, hi, p_l, p_u, M, N).unwrap();
            let v = params.fake_quantize(r);
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }

        /// Monotone across piece boundaries.
        #[test]
        fn monotone_across_pieces(
            b in 2u32..9,
            a in -8.0f64..8.0,
            d in 0.0f64..4.0,
        ) {
            let params = PiecewiseParams::with_breakpoints(b, -5.0, 5.0, -1.3, 1.7, M, N).unwrap();
            prop_assert!(params.fake_quantize(a) <= params.fake_quantize(a + d) + 1e-12);
        }

        /// Idempotence of the full piecewise map.
        #[test]
        fn idempotent(b in 2u32..10, r in -8.0f64..8.0) {
            let params = PiecewiseParams::with_breakpoints(b, -5.0, 5.0, -1.0, 2.0, M, N).unwrap();
            let once = params.fake_quantize(r);
            prop_assert_eq!(params.fake_quantize(once), once);
        }
    }
}
