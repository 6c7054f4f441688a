//! Exact outcome model of `t`-bit phase estimation.
//!
//! With `N = 2^t`, outcome "0" on an eigenvector of phase `theta` has amplitude
//! `a(theta) = (1/N) sum_{j<N} e^{ij theta}` and the zero-outcome branch of the state is
//! `(1/N) sum_j U^j psi`. On the real span of the `+-theta` pair `U = cos(theta) + sin(theta) J`,
//! so that branch is `Re a * x + Im a * J x` with `J x = ((U - U^T)/2) x / sin(theta)`.

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use super::operator::QWalkOperator;
use super::space::{flow_state, phi_minus, EdgeState};
use crate::electric::ElectricFlow;
use crate::error::{ElfsError, Result};

/// Largest register accepted by the public flow-state preparation.
pub const MAX_PUBLIC_BITS: u32 = 14;
/// Largest register the model evaluates internally.
pub const MAX_MODEL_BITS: u32 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseEstModel {
    bits: u32,
}

impl PhaseEstModel {
    pub fn new(bits: u32) -> Result<PhaseEstModel> {
        if bits > MAX_MODEL_BITS {
            return Err(ElfsError::PrecisionOverflow { bits, cap: MAX_MODEL_BITS });
        }
        Ok(PhaseEstModel { bits })
    }

    /// Smallest register whose precision `2 pi / 2^t` is at most `delta`.
    pub fn for_precision(delta: f64) -> Result<PhaseEstModel> {
        if !(delta > 0.0) {
            return Err(ElfsError::InvalidConfig(format!("precision {delta} must be positive")));
        }
        let t = (2.0 * std::f64::consts::PI / delta).log2().ceil().max(0.0);
        if t > MAX_MODEL_BITS as f64 {
            return Err(ElfsError::PrecisionOverflow { bits: t as u32, cap: MAX_MODEL_BITS });
        }
        PhaseEstModel::new(t as u32)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Controlled-`U` applications per round, `2^t`.
    pub fn rounds(&self) -> u64 {
        1u64 << self.bits
    }

    /// Realized precision `2 pi / 2^t`.
    pub fn precision(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.rounds() as f64
    }

    /// `(Re a(theta), Im a(theta))`.
    pub fn amplitude(&self, theta: f64) -> (f64, f64) {
        let n = self.rounds() as f64;
        let half = (0.5 * theta).sin();
        if half.abs() < 1e-12 {
            return (1.0, 0.0);
        }
        let mag = (0.5 * n * theta).sin() / (n * half);
        let arg = 0.5 * (n - 1.0) * theta;
        (mag * arg.cos(), mag * arg.sin())
    }

    /// Probability of outcome "0" on an eigenvector of phase `theta`.
    pub fn kernel(&self, theta: f64) -> f64 {
        let (re, im) = self.amplitude(theta);
        re * re + im * im
    }

    /// `Im a(theta) / sin(theta)`, the weight of `(U - U^T)/2` in the zero branch.
    fn rotation_weight(&self, theta: f64) -> f64 {
        let n = self.rounds() as f64;
        let half = (0.5 * theta).sin();
        let cos_half = (0.5 * theta).cos();
        if half.abs() < 1e-12 {
            return 0.5 * (n - 1.0);
        }
        if cos_half.abs() < 1e-12 {
            return 0.0;
        }
        (0.5 * (n - 1.0) * theta).sin() * (0.5 * n * theta).sin() / (2.0 * n * half * half * cos_half)
    }
}

/// Zero-outcome probability and the unnormalized post-measurement branch.
#[derive(Clone, Debug)]
pub struct ZeroOutcome {
    pub probability: f64,
    pub branch: DVector<f64>,
}

/// Applies one round of the model to `psi`.
pub fn zero_outcome(op: &QWalkOperator, model: &PhaseEstModel, psi: &DVector<f64>) -> Result<ZeroOutcome> {
    let coeffs = op.basis().tr_mul(psi);
    let dim = op.dim();
    let mut re = DVector::zeros(dim);
    let mut im = DVector::zeros(dim);
    let mut probability = 0.0;
    for k in 0..dim {
        let c = coeffs[k];
        if op.is_zero_phase(k) {
            re[k] = c;
            probability += c * c;
            continue;
        }
        let theta = op.phases()[k];
        re[k] = c * model.amplitude(theta).0;
        im[k] = c * model.rotation_weight(theta);
        probability += c * c * model.kernel(theta);
    }
    let branch = op.basis() * re + op.rotated() * im;
    let gap = (branch.norm_squared() - probability).abs();
    if gap > 1e-8 {
        return Err(ElfsError::OracleMismatch {
            what: "phase-estimation branch norm versus kernel sum".into(),
            discrepancy: gap,
            tolerance: 1e-8,
        });
    }
    Ok(ZeroOutcome { probability, branch })
}

/// One simulated round of flow-state preparation.
#[derive(Clone, Debug, Serialize)]
pub struct FlowPreparation {
    pub success: bool,
    #[serde(skip)]
    pub output: Option<EdgeState>,
    pub bits: u32,
    /// Realized precision `2 pi / 2^t`.
    pub delta: f64,
    pub probability: f64,
    pub lower: f64,
    pub upper: f64,
    pub et: f64,
    pub fidelity: f64,
    pub trace_distance: f64,
    pub trace_bound: f64,
    /// Walk steps used, `2^t`.
    pub cost: u64,
}

/// Exact analysis of one round on `op` from `|phi_s^->` without drawing the outcome.
pub fn analyze_flow_preparation(op: &QWalkOperator, flow: &ElectricFlow<'_>, model: &PhaseEstModel) -> Result<(FlowPreparation, EdgeState)> {
    let g = op.graph();
    let s = op.source();
    let psi = phi_minus(g, op.space(), s);
    let zero = zero_outcome(op, model, psi.amps())?;
    let out = EdgeState::normalized(zero.branch)?;
    let f = flow_state(flow, op.space());
    let r = flow.resistance();
    let rd = r * g.degree(s);
    let v = flow.voltages();
    let et = (0..g.n()).map(|x| v[x] * v[x] * g.degree(x)).sum::<f64>() / r;
    let delta = model.precision();
    let lower = 1.0 / rd;
    let upper = (1.0 + delta * delta * 2.0 * et) / rd;
    let p = zero.probability;
    let tol = 1e-9;
    if p < lower - tol || p > upper + tol {
        return Err(ElfsError::IdentityViolation { what: format!("zero-outcome sandwich [{lower}, {upper}]"), lhs: p, rhs: upper });
    }
    let fidelity = out.fidelity(&f);
    let trace_distance = out.trace_distance(&f);
    let trace_bound = delta * (2.0 * et).sqrt();
    if trace_distance > trace_bound + tol {
        return Err(ElfsError::IdentityViolation { what: "trace distance to the flow state".into(), lhs: trace_distance, rhs: trace_bound });
    }
    let prep = FlowPreparation {
        success: true,
        output: None,
        bits: model.bits(),
        delta,
        probability: p,
        lower,
        upper,
        et,
        fidelity,
        trace_distance,
        trace_bound,
        cost: model.rounds(),
    };
    Ok((prep, out))
}

/// Runs one round: draws the phase register and returns the zero branch on success.
pub fn prepare_flow_state<R: Rng + ?Sized>(op: &QWalkOperator, flow: &ElectricFlow<'_>, t_bits: u32, rng: &mut R) -> Result<FlowPreparation> {
    if t_bits > MAX_PUBLIC_BITS {
        return Err(ElfsError::PrecisionOverflow { bits: t_bits, cap: MAX_PUBLIC_BITS });
    }
    let model = PhaseEstModel::new(t_bits)?;
    let (mut prep, out) = analyze_flow_preparation(op, flow, &model)?;
    prep.success = rng.random::<f64>() < prep.probability;
    prep.output = prep.success.then_some(out);
    Ok(prep)
}
