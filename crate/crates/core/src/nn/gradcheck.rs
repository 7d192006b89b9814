//! Finite-difference gradient checking.
//!
//! The numeric derivative uses the fourth-order five-point stencil
//! `(-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h`. Its truncation error
//! is small enough that `h` can stay moderate, which keeps float
//! cancellation noise low.
//!
//! A coordinate may also be probed with smaller steps (`refinements`,
//! each ten times smaller). The best agreement counts: when a ReLU-type
//! kink lies inside the stencil the function is not differentiable there
//! and only a narrower stencil resolves the one-sided derivative, while a
//! genuinely wrong gradient disagrees at every step size.

use super::{Graph, NnError, NodeId, ParamStore, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Step `h` of the stencil.
    pub eps: f64,
    /// Lower bound on the relative-error denominator so that coordinates
    /// with vanishing gradients are compared absolutely.
    pub denominator_floor: f64,
    /// Check at most this many evenly spaced coordinates per parameter.
    pub max_coords_per_param: Option<usize>,
    /// Extra, successively ten times smaller steps to try.
    pub refinements: u32,
}

impl GradCheckOptions {
    pub fn f64() -> Self {
        GradCheckOptions {
            eps: 1e-4,
            denominator_floor: 1e-6,
            max_coords_per_param: None,
            refinements: 1,
        }
    }

    /// For [`grad_check_with_reference`]: the step applies to the f64
    /// reference, the floor absorbs single-precision accumulation error on
    /// near-zero gradients.
    pub fn f32() -> Self {
        GradCheckOptions {
            eps: 1e-4,
            denominator_floor: 1e-4,
            max_coords_per_param: None,
            refinements: 1,
        }
    }

    pub fn with_max_coords(mut self, n: usize) -> Self {
        self.max_coords_per_param = Some(n);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coords_checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares the analytic gradient of every trainable parameter against
/// finite differences. `loss` must rebuild the same deterministic scalar
/// each time it is called.
pub fn grad_check<T, F>(
    store: &mut ParamStore<T>,
    mut loss: F,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, NnError>
where
    T: Scalar,
    F: FnMut(&mut ParamStore<T>) -> Result<(Graph<T>, NodeId), NnError>,
{
    let analytic = analytic_grads(store, &mut loss)?;
    let report = compare(&analytic, store, loss, opts);
    store.zero_grads();
    report
}

/// Checks gradients computed in low precision (typically `f32`) against
/// finite differences of `reference_loss` evaluated in `f64` on a copy of
/// the same parameter values. Low-precision losses are too noisy for a
/// small step and a large step straddles activation kinks, so the
/// derivative is taken where it can be resolved.
pub fn grad_check_with_reference<T, F, R>(
    store: &mut ParamStore<T>,
    mut loss: F,
    reference_loss: R,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, NnError>
where
    T: Scalar,
    F: FnMut(&mut ParamStore<T>) -> Result<(Graph<T>, NodeId), NnError>,
    R: FnMut(&mut ParamStore<f64>) -> Result<(Graph<f64>, NodeId), NnError>,
{
    let analytic = analytic_grads(store, &mut loss)?;
    store.zero_grads();
    let mut reference = store.cast::<f64>();
    compare(&analytic, &mut reference, reference_loss, opts)
}

fn analytic_grads<T, F>(store: &mut ParamStore<T>, loss: &mut F) -> Result<Vec<Vec<f64>>, NnError>
where
    T: Scalar,
    F: FnMut(&mut ParamStore<T>) -> Result<(Graph<T>, NodeId), NnError>,
{
    store.zero_grads();
    let (graph, out) = loss(store)?;
    graph.backward(out, store)?;
    let grads = store
        .iter()
        .map(|(_, p)| p.grad.data().iter().map(|g| g.as_f64()).collect())
        .collect();
    store.zero_grads();
    Ok(grads)
}

fn compare<U, F>(
    analytic: &[Vec<f64>],
    store: &mut ParamStore<U>,
    mut loss: F,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, NnError>
where
    U: Scalar,
    F: FnMut(&mut ParamStore<U>) -> Result<(Graph<U>, NodeId), NnError>,
{
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        coords_checked: 0,
    };
    let ids: Vec<_> = store
        .iter()
        .filter(|(_, p)| p.trainable)
        .map(|(id, _)| id)
        .collect();
    for id in ids {
        let len = store.value(id).len();
        let coords: Vec<usize> = match opts.max_coords_per_param {
            Some(n) if n < len => (0..n).map(|i| i * len / n).collect(),
            _ => (0..len).collect(),
        };
        for idx in coords {
            let original = store.value(id).data()[idx];
            let mut at = |offset: f64, store: &mut ParamStore<U>| -> Result<f64, NnError> {
                store.value_mut(id).data_mut()[idx] = original + U::of(offset);
                let (g, node) = loss(store)?;
                Ok(g.value(node).item().as_f64())
            };
            let a = analytic[id.index()][idx];
            let (mut err, mut numeric) = (f64::INFINITY, f64::NAN);
            let mut h = opts.eps;
            for _ in 0..=opts.refinements {
                let f2 = at(2.0 * h, store)?;
                let f1 = at(h, store)?;
                let m1 = at(-h, store)?;
                let m2 = at(-2.0 * h, store)?;
                let estimate = (8.0 * (f1 - m1) - (f2 - m2)) / (12.0 * h);
                let e = relative_error(a, estimate, opts.denominator_floor);
                if !(e >= err) {
                    err = e;
                    numeric = estimate;
                }
                h /= 10.0;
            }
            store.value_mut(id).data_mut()[idx] = original;
            report.coords_checked += 1;
            if !(err <= report.max_rel_error) {
                report.max_rel_error = err;
                report.worst_param = store.get(id).name.clone();
                report.worst_index = idx;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
