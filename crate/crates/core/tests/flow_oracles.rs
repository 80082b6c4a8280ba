use std::f64::consts::TAU;

use vpme_core::{FieldHistory, FieldSlice, Flow, PhaseLabel, PhasePoint, SpatialGrid, TimeGrid};

const A: f64 = 2.0;

fn uniform(t: f64, _x: f64) -> f64 {
    (-A * t).exp()
}

/// Exact solution of `X' = V, V' = e^(-a t)` from `(t, x, v)` to `s`.
fn uniform_exact(t: f64, x: f64, v: f64, s: f64) -> (f64, f64) {
    let (et, es) = ((-A * t).exp(), (-A * s).exp());
    (x + (v + et / A) * (s - t) + (es - et) / (A * A), v + (et - es) / A)
}

fn torus_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

#[test]
fn uniform_field_label_closed_form() {
    // with the asymptotic label (x, v): V(t) = v - e^(-at)/a and
    // X(t) = x + v t + e^(-at)/a^2
    let horizon = 25.0;
    let f = uniform;
    let flow = Flow::new(&f, 0.01, 0.0, horizon);
    for &(x, v, t) in &[(0.1, 0.3, 0.5), (0.7, -1.2, 1.0), (0.0, 2.5, 3.0)] {
        let p = flow.flow_from_label(PhaseLabel::new(x, v), t).unwrap();
        let e = (-A * t).exp();
        assert!(torus_dist(p.x, x + v * t + e / (A * A)) < 1e-9);
        assert!((p.v - (v - e / A)).abs() < 1e-9);
        let l = flow.label_from_point(p).unwrap();
        assert!(torus_dist(l.x, x) < 1e-9 && (l.v - v).abs() < 1e-9);
    }
}

#[test]
fn rk4_is_fourth_order() {
    let f = uniform;
    let (t, s, x, v) = (0.0, 3.0, 0.2, 0.4);
    let exact = uniform_exact(t, x, v, s);
    let err = |step: f64| {
        let (xn, vn) = Flow::new(&f, step, 0.0, s).integrate(t, s, x, v).unwrap();
        (xn - exact.0).abs().max((vn - exact.1).abs())
    };
    let (e1, e2) = (err(0.2), err(0.1));
    let ratio = e1 / e2;
    assert!((ratio - 16.0).abs() <= 3.0, "ratio {ratio} ({e1:e}, {e2:e})");
}

fn wave_history(nt: usize, nx: usize) -> FieldHistory {
    let time = TimeGrid::new(0.0, 4.0, nt).unwrap();
    let grid = SpatialGrid::new(nx).unwrap();
    let slices = time
        .times()
        .map(|t| {
            let mut s = FieldSlice::zero(grid);
            s.ebar = grid
                .nodes()
                .map(|x| 0.3 * (-t).exp() * ((TAU * x).sin() + 0.2 * (2.0 * TAU * x).cos()))
                .collect();
            s
        })
        .collect();
    FieldHistory::new(time, grid, slices).unwrap()
}

#[test]
fn label_point_roundtrip_on_probe_grid() {
    let h = wave_history(81, 64);
    let flow = h.flow(4);
    let mut worst: f64 = 0.0;
    for i in 0..32 {
        for k in 0..32 {
            let x = i as f64 / 32.0;
            let v = -2.0 + 4.0 * k as f64 / 31.0;
            let t = 0.1 * (i % 7) as f64;
            let l = flow.label_from_point(PhasePoint::new(t, x, v)).unwrap();
            let p = flow.flow_from_label(l, t).unwrap();
            worst = worst.max(torus_dist(p.x, x)).max((p.v - v).abs());
        }
    }
    assert!(worst <= 1e-6, "{worst:e}");
}

#[test]
fn flow_preserves_phase_volume() {
    let h = wave_history(81, 64);
    let flow = h.flow(4);
    let d = 1e-4;
    for &(x, v) in &[(0.1, 0.2), (0.55, -0.8), (0.9, 1.5)] {
        for &t in &[0.0, 0.5, 1.5, 3.0] {
            let at = |dx: f64, dv: f64| flow.flow_from_label(PhaseLabel::new(x + dx, v + dv), t).unwrap();
            let (p0, px, pv) = (at(0.0, 0.0), at(d, 0.0), at(0.0, d));
            let j = [
                [(px.x - p0.x) / d, (pv.x - p0.x) / d],
                [(px.v - p0.v) / d, (pv.v - p0.v) / d],
            ];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            assert!((det - 1.0).abs() < 1e-3, "det {det} at t = {t}");
        }
    }
}

#[test]
fn backward_then_forward_returns_start() {
    let h = wave_history(81, 64);
    let flow = h.flow(4);
    let (x, v) = (0.3, 0.7);
    let (xb, vb) = flow.integrate(4.0, 0.0, x, v).unwrap();
    let (xf, vf) = flow.integrate(0.0, 4.0, xb, vb).unwrap();
    let one_way = 1e-8;
    assert!((xf - x).abs() < 10.0 * one_way && (vf - v).abs() < 10.0 * one_way);
}

#[test]
fn zero_field_is_exact_for_any_step() {
    let h = FieldHistory::zero(TimeGrid::new(0.0, 5.0, 3).unwrap(), SpatialGrid::new(8).unwrap());
    for sub in [1, 3, 17] {
        let flow = h.flow(sub);
        let p = flow.flow_from_label(PhaseLabel::new(0.25, -0.6), 1.7).unwrap();
        assert!(torus_dist(p.x, 0.25 - 0.6 * 1.7) < 1e-15 && p.v == -0.6);
        let (x, v) = flow.integrate(0.0, 5.0, 0.25, -0.6).unwrap();
        assert!((x - (0.25 - 3.0)).abs() < 1e-14 && v == -0.6);
    }
}
