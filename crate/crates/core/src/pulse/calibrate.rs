//! Derivative-free local search used to tune drive parameters.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a maximum of `f` on `[a, b]`.
pub fn golden_max(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Clone, Debug)]
pub struct SearchTrace {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Best value after each round.
    pub history: Vec<f64>,
}

/// Coordinate ascent with golden-section line searches on `[x_k - w_k, x_k + w_k]`.
/// Bracket widths shrink by `shrink` after each round; a line search result is
/// only accepted when it improves on the current value.
pub fn coordinate_ascent(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    widths: &[f64],
    tols: &[f64],
    rounds: usize,
    shrink: f64,
) -> SearchTrace {
    let mut x = x0.to_vec();
    let mut evals = 1;
    let mut best = f(&x);
    let mut w = widths.to_vec();
    let mut history = vec![best];
    for _ in 0..rounds {
        for k in 0..x.len() {
            let mut probe = x.clone();
            let (xk, v) = golden_max(
                |t| {
                    probe[k] = t;
                    evals += 1;
                    f(&probe)
                },
                x[k] - w[k],
                x[k] + w[k],
                tols[k],
            );
            if v > best {
                best = v;
                x[k] = xk;
            }
        }
        history.push(best);
        w.iter_mut().for_each(|v| *v *= shrink);
    }
    SearchTrace { x, value: best, evaluations: evals, history }
}
