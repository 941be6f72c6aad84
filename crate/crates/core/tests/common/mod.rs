//! Helpers shared by the integration tests.

use fsipp_core::poly::{BivariatePoly, Polynomial};
use fsipp_core::relax::{FsippProblem, IndexSetDesc, RelaxOptions};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `R = 2`, `g* = 1` at the given order.
pub fn opts(order: u32) -> RelaxOptions {
    RelaxOptions {
        radius: 2.0,
        g_star: 1.0,
        order,
        ..RelaxOptions::default()
    }
}

/// Convex quadratic over `{v.x <= beta, |x| <= rho}` with a planted minimizer:
/// `f = r* g + (x - x*)' Q (x - x*) - lambda (v.x - beta)` and `v.x* = beta`,
/// so `f - r* g >= 0` on the feasible set with equality only at `x*`.
pub fn planted_instance(rng: &mut ChaCha8Rng) -> (FsippProblem, f64, [f64; 2]) {
    let rho = 1.5;
    let ang = rng.gen_range(0.0..std::f64::consts::TAU);
    let rad = rng.gen_range(0.0..0.8);
    let xs = [rad * ang.cos(), rad * ang.sin()];
    let th = rng.gen_range(0.0..std::f64::consts::TAU);
    let v = [th.cos(), th.sin()];
    let beta = v[0] * xs[0] + v[1] * xs[1];
    let lambda = rng.gen_range(0.1..1.0);
    let r_star = rng.gen_range(0.1..2.0);
    let e = [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)];
    let a = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    // Q = B'B + 0.2 I with B = [[a0, a1], [0, a2]]
    let q = [
        a[0] * a[0] + 0.2,
        a[0] * a[1],
        a[1] * a[1] + a[2] * a[2] + 0.2,
    ];
    let x = |i| Polynomial::var(2, i);
    let c = |v| Polynomial::constant(2, v);
    let g = &c(1.0) + &(&(&x(0) * e[0]) + &(&x(1) * e[1]));
    let d0 = &x(0) - &c(xs[0]);
    let d1 = &x(1) - &c(xs[1]);
    let quad = &(&(&(&d0 * &d0) * q[0]) + &(&(&d0 * &d1) * (2.0 * q[1]))) + &(&(&d1 * &d1) * q[2]);
    let lin = &(&(&x(0) * v[0]) + &(&x(1) * v[1])) - &c(beta);
    let f = &(&(&g * r_star) + &quad) - &(&lin * lambda);
    let ball = &(&(&x(0) * &x(0)) + &(&x(1) * &x(1))) - &c(rho * rho);
    // p(x, y) = v.x - beta - t (1 - y^2), largest at y = +-1
    let t = rng.gen_range(0.1..1.0);
    let joint = lin.embed(3, 0);
    let yy = Polynomial::var(3, 2);
    let pj = &(&joint - &Polynomial::constant(3, t)) + &(&(&yy * &yy) * t);
    let p = BivariatePoly::from_joint(&pj, 2);
    let prob = FsippProblem::new(f, g, vec![ball], p, IndexSetDesc::Interval).unwrap();
    (prob, r_star, xs)
}

