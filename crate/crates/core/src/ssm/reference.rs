//! Straight-line reference recurrence used as the oracle by the test suites.
//!
//! Deliberately naive and structurally different from the production scan:
//! one scalar recurrence per (channel, state) pair with the state axis
//! outermost, then a separate output-projection pass. Shares no code with
//! [`crate::ssm::scan`]. Panics on bad shapes — this is test support, not API.

use crate::numerics::tensor::Tensor;

/// Textbook evaluation of Ā = exp(Δ·A), B̄ = Δ·B, elementwise.
pub fn naive_discretize(delta: &Tensor, a: &Tensor, b: &Tensor) -> (Tensor, Tensor) {
    let (l, d) = (delta.shape()[0], delta.shape()[1]);
    let e = a.shape()[1];
    assert_eq!(a.shape(), &[d, e]);
    assert_eq!(b.shape(), &[l, e]);
    let mut a_bar = Tensor::zeros(&[l, d, e]);
    let mut b_bar = Tensor::zeros(&[l, d, e]);
    for ei in 0..e {
        for di in 0..d {
            for li in 0..l {
                let idx = a_bar.idx3(li, di, ei);
                a_bar.data_mut()[idx] = (delta.at2(li, di) * a.at2(di, ei)).exp();
                b_bar.data_mut()[idx] = delta.at2(li, di) * b.at2(li, ei);
            }
        }
    }
    (a_bar, b_bar)
}

/// Runs every (d, e) scalar recurrence to completion before the next one,
/// storing the full trajectory, then projects through C in a second pass.
/// Returns (Y, final_state).
pub fn naive_scan(
    a_bar: &Tensor,
    b_bar: &Tensor,
    c: &Tensor,
    x: &Tensor,
    h0: Option<&Tensor>,
) -> (Tensor, Tensor) {
    let (l, d, e) = (a_bar.shape()[0], a_bar.shape()[1], a_bar.shape()[2]);
    assert_eq!(b_bar.shape(), &[l, d, e]);
    assert_eq!(c.shape(), &[l, e]);
    assert_eq!(x.shape(), &[l, d]);
    let mut traj = Tensor::zeros(&[l, d, e]);
    for di in 0..d {
        for ei in 0..e {
            let mut h = h0.map_or(0.0, |h0| h0.at2(di, ei));
            for li in 0..l {
                h = a_bar.at3(li, di, ei) * h + b_bar.at3(li, di, ei) * x.at2(li, di);
                let idx = traj.idx3(li, di, ei);
                traj.data_mut()[idx] = h;
            }
        }
    }
    let mut y = Tensor::zeros(&[l, d]);
    for li in 0..l {
        for di in 0..d {
            let mut acc = 0.0;
            for ei in 0..e {
                acc += c.at2(li, ei) * traj.at3(li, di, ei);
            }
            let idx = y.idx2(li, di);
            y.data_mut()[idx] = acc;
        }
    }
    let mut final_state = Tensor::zeros(&[d, e]);
    for di in 0..d {
        for ei in 0..e {
            let idx = final_state.idx2(di, ei);
            final_state.data_mut()[idx] = traj.at3(l - 1, di, ei);
        }
    }
    (y, final_state)
}
