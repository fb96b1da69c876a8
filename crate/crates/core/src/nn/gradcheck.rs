use candle_core::{DType, Tensor, Var};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Coordinates compared against central differences.
    pub checked: usize,
    /// Coordinates whose stencil straddles a kink.
    pub skipped: usize,
    pub max_rel_err: f64,
}

/// `|a - b| / max(|a|, |b|, floor)`; zero when everything is below 1e-12.
fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(floor);
    if scale < 1e-12 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Compares the autodiff gradient of scalar `loss` at `theta` (f64) with
/// central differences of step `eps`.
///
/// Relative errors are taken against at least 1e-3 of the largest analytic
/// component, so coordinates sitting at a stationary point are judged on
/// the scale of the whole gradient.
///
/// Coordinates whose stencil straddles a kink are skipped. A kink is assumed
/// when the four half-step slopes across the stencil are not evenly spaced to
/// within `tol` of their magnitude; a smooth function changes slope linearly
/// over so short an interval.
pub fn gradcheck(
    theta: &Tensor,
    loss: impl Fn(&Tensor) -> Result<Tensor>,
    eps: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    if theta.dtype() != DType::F64 {
        return Err(Error::BadConfig("gradcheck needs an f64 point".into()));
    }
    let var = Var::from_tensor(&theta.copy()?)?;
    let out = loss(var.as_tensor())?;
    let grads = out.backward()?;
    let analytic: Vec<f64> = match grads.get(var.as_tensor()) {
        Some(g) => g.flatten_all()?.to_vec1()?,
        None => vec![0.0; theta.elem_count()],
    };
    let floor = 1e-3 * analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let base: Vec<f64> = theta.flatten_all()?.to_vec1()?;
    let eval = |v: Vec<f64>| -> Result<f64> {
        let t = Tensor::from_vec(v, theta.shape(), theta.device())?;
        Ok(loss(&t)?.to_dtype(DType::F64)?.to_scalar::<f64>()?)
    };
    let f0 = eval(base.clone())?;
    let mut report = GradCheckReport { checked: 0, skipped: 0, max_rel_err: 0.0 };
    let h = eps / 2.0;
    for i in 0..base.len() {
        let at = |d: f64| {
            let mut p = base.clone();
            p[i] += d;
            eval(p)
        };
        let (fm2, fm1, fp1, fp2) = (at(-eps)?, at(-h)?, at(h)?, at(eps)?);
        let s = [(fm1 - fm2) / h, (f0 - fm1) / h, (fp1 - f0) / h, (fp2 - fp1) / h];
        let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bend = ((s[2] - 2.0 * s[1] + s[0]).abs()).max((s[3] - 2.0 * s[2] + s[1]).abs());
        if scale >= 1e-8 && bend > tol * scale {
            report.skipped += 1;
            continue;
        }
        report.checked += 1;
        report.max_rel_err = report.max_rel_err.max(rel_err(analytic[i], (fp2 - fm2) / (2.0 * eps), floor));
    }
    Ok(report)
}
