//! Finite element models against independent oracles.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sohpce::doe::{kl_eigenpairs, RandomFieldSpec};
use sohpce::models::{beam_deflection, BeamModel, BeamSpec, Model, ResponseSelector, TrussModel, TrussSpec};

/// Unit-load (virtual work) mid-span deflection, `int M m / (E I) dx`, with
/// Simpson's rule per element; exact for piecewise constant moduli because
/// the integrand is cubic on each element.
fn unit_load_deflection(spec: &BeamSpec, moduli: &[f64]) -> f64 {
    let l = spec.length;
    let le = l / moduli.len() as f64;
    let big_m = |x: f64| spec.q_load * x * (l - x) / 2.0;
    let small_m = |x: f64| if x <= l / 2.0 { x / 2.0 } else { (l - x) / 2.0 };
    let mut total = 0.0;
    for (e, &modulus) in moduli.iter().enumerate() {
        let a = e as f64 * le;
        let b = a + le;
        let mut seg = |lo: f64, hi: f64| {
            let mid = 0.5 * (lo + hi);
            let g = |x: f64| big_m(x) * small_m(x);
            (hi - lo) / 6.0 * (g(lo) + 4.0 * g(mid) + g(hi)) / (modulus * spec.inertia)
        };
        // split the element holding the kink of the unit-load moment
        if a < l / 2.0 && l / 2.0 < b {
            total += seg(a, l / 2.0) + seg(l / 2.0, b);
        } else {
            total += seg(a, b);
        }
    }
    total
}

#[test]
fn beam_matches_unit_load_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for n_elements in [100, 8, 30] {
        let spec = BeamSpec {
            n_elements,
            ..BeamSpec::default()
        };
        for _ in 0..5 {
            let moduli: Vec<f64> = (0..n_elements).map(|_| rng.random_range(1.0e11..3.0e11)).collect();
            let fe = beam_deflection(&spec, &moduli).unwrap();
            let oracle = unit_load_deflection(&spec, &moduli);
            assert!((fe / oracle - 1.0).abs() < 1e-8, "n_el {n_elements}: {fe} vs {oracle}");
        }
    }
}

#[test]
fn beam_model_maps_kl_coordinates() {
    let model = BeamModel::new(BeamSpec::default()).unwrap();
    assert_eq!(model.dim(), 40);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xi: Vec<f64> = (0..40).map(|_| rng.random_range(-2.0..2.0)).collect();
    let moduli = model.moduli(&xi).unwrap();
    let u = model.evaluate(&xi).unwrap();
    assert!((u / unit_load_deflection(&model.spec, &moduli) - 1.0).abs() < 1e-8);
}

/// Simpson integral of `g` on `[0, L]` with `n` (even) panels.
fn simpson(l: f64, n: usize, g: impl Fn(f64) -> f64) -> f64 {
    let h = l / n as f64;
    let mut s = g(0.0) + g(l);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn kl_modes_solve_the_integral_equation() {
    let spec = RandomFieldSpec {
        domain_length: 3.0,
        correlation_length: 0.5,
        mean: 1.0,
        cov: 0.2,
        n_terms: 12,
    };
    let modes = kl_eigenpairs(&spec).unwrap();
    let l = spec.domain_length;
    for (i, mode) in modes.iter().enumerate() {
        for &x in &[0.0, 0.37, 1.5, 2.9] {
            // split at x so the kernel kink sits on a panel boundary
            let kernel = |y: f64| (-(x - y).abs() / spec.correlation_length).exp() * mode.eval(y);
            let left = if x > 0.0 { simpson(x, 4000, &kernel) } else { 0.0 };
            let right = simpson(l - x, 4000, |y| kernel(x + y));
            let lhs = left + right;
            assert!((lhs - mode.eigenvalue * mode.eval(x)).abs() < 1e-8, "mode {i} at {x}");
        }
        for (j, other) in modes.iter().enumerate() {
            let inner = simpson(l, 4000, |y| mode.eval(y) * other.eval(y));
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((inner - expected).abs() < 1e-9, "<f{i}, f{j}> = {inner}");
        }
    }
    for pair in modes.windows(2) {
        assert!(pair[0].eigenvalue >= pair[1].eigenvalue);
    }
}

/// Independent direct stiffness solve: full assembly, supports removed by
/// row/column deletion, dense LU.
fn oracle_displacements(spec: &TrussSpec, moduli: &[f64], loads: &[f64]) -> Vec<Vec<f64>> {
    let d = spec.dimension;
    let index: std::collections::HashMap<usize, usize> =
        spec.nodes.iter().enumerate().map(|(k, n)| (n.id, k)).collect();
    let ndof = d * spec.nodes.len();
    let mut k = DMatrix::<f64>::zeros(ndof, ndof);
    for (el, &e) in spec.elements.iter().zip(moduli) {
        let (a, b) = (index[&el.nodes[0]], index[&el.nodes[1]]);
        let diff: Vec<f64> = (0..d).map(|c| spec.nodes[b].coords[c] - spec.nodes[a].coords[c]).collect();
        let len = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        let area = std::f64::consts::PI * el.diameter * el.diameter / 4.0;
        let ea_l = e * area / len;
        for r in 0..d {
            for c in 0..d {
                let v = ea_l * diff[r] * diff[c] / (len * len);
                k[(d * a + r, d * a + c)] += v;
                k[(d * b + r, d * b + c)] += v;
                k[(d * a + r, d * b + c)] -= v;
                k[(d * b + r, d * a + c)] -= v;
            }
        }
    }
    let mut f = DVector::<f64>::zeros(ndof);
    for (load, &p) in spec.loads.iter().zip(loads) {
        let norm = load.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        for c in 0..d {
            f[d * index[&load.node] + c] += p * load.direction[c] / norm;
        }
    }
    let mut fixed = vec![false; ndof];
    for s in &spec.supports {
        for axis in &s.fixed {
            let c = ["x", "y", "z"].iter().position(|a| a == axis).unwrap();
            fixed[d * index[&s.node] + c] = true;
        }
    }
    let free: Vec<usize> = (0..ndof).filter(|&i| !fixed[i]).collect();
    let kff = DMatrix::from_fn(free.len(), free.len(), |i, j| k[(free[i], free[j])]);
    let ff = DVector::from_fn(free.len(), |i, _| f[free[i]]);
    let uf = kff.lu().solve(&ff).expect("nonsingular");
    let mut u = vec![0.0; ndof];
    for (i, &g) in free.iter().enumerate() {
        u[g] = uf[i];
    }
    u.chunks(d).map(<[f64]>::to_vec).collect()
}

fn oracle_response(spec: &TrussSpec, moduli: &[f64], loads: &[f64]) -> f64 {
    let u = oracle_displacements(spec, moduli, loads);
    let pos = |id: usize| spec.nodes.iter().position(|n| n.id == id).unwrap();
    match &spec.response {
        ResponseSelector::Displacement { node, direction } => {
            let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
            u[pos(*node)].iter().zip(direction).map(|(a, b)| a * b / norm).sum()
        }
        ResponseSelector::MaxHorizontal { nodes } => nodes
            .iter()
            .map(|&n| u[pos(n)][0].hypot(u[pos(n)][1]))
            .fold(0.0, f64::max),
    }
}

#[test]
fn shipped_trusses_match_direct_stiffness_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for spec in [TrussSpec::plane32(), TrussSpec::spatial36()] {
        let model = TrussModel::new(spec.clone()).unwrap();
        let (e0, p0) = spec.mean_inputs();
        let mean = model.response(&e0, &p0).unwrap();
        assert!((mean / oracle_response(&spec, &e0, &p0) - 1.0).abs() < 1e-9, "{}", spec.name);
        for _ in 0..5 {
            let xi: Vec<f64> = (0..model.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (e, p) = model.physical(&xi).unwrap();
            let u = model.evaluate(&xi).unwrap();
            let oracle = oracle_response(&spec, &e, &p);
            assert!((u / oracle - 1.0).abs() < 1e-9, "{}: {u} vs {oracle}", spec.name);
        }
    }
}

#[test]
fn two_bar_truss_closed_form() {
    // symmetric V of two bars at angle theta to the horizontal, vertical tip load
    let toml = r#"
name = "vee"
dimension = 2
failure_threshold = 1.0
modulus = { kind = "lognormal", mean = 2.0e11, std = 1.0e10 }
response = { kind = "displacement", node = 3, direction = [0.0, -1.0] }

[[nodes]]
id = 1
coords = [-3.0, 4.0]

[[nodes]]
id = 2
coords = [3.0, 4.0]

[[nodes]]
id = 3
coords = [0.0, 0.0]

[[elements]]
id = 1
nodes = [1, 3]
diameter = 0.02

[[elements]]
id = 2
nodes = [2, 3]
diameter = 0.02

[[supports]]
node = 1
fixed = ["x", "y"]

[[supports]]
node = 2
fixed = ["x", "y"]

[[loads]]
node = 3
direction = [0.0, -1.0]
marginal = { kind = "gumbel_max", mean = 1.0e4, std = 1.0e3 }
"#;
    let spec = TrussSpec::from_toml(toml).unwrap();
    let (e, p) = (2.0e11, 1.0e4);
    let area = std::f64::consts::PI * 0.02 * 0.02 / 4.0;
    let (len, sin) = (5.0, 0.8);
    let exact = p * len / (2.0 * e * area * sin * sin);
    let model = TrussModel::new(spec).unwrap();
    let u = model.response(&[e, e], &[p]).unwrap();
    assert!((u / exact - 1.0).abs() < 1e-12, "{u} vs {exact}");
}

#[test]
fn constrained_stiffness_is_symmetric_positive_definite() {
    for spec in [TrussSpec::plane32(), TrussSpec::spatial36()] {
        let model = TrussModel::new(spec.clone()).unwrap();
        let (e0, _) = spec.mean_inputs();
        let k = model.stiffness(&e0).unwrap();
        assert_eq!(k.nrows(), model.n_free());
        let asym = (&k - k.transpose()).abs().max();
        assert!(asym <= 1e-12 * k.abs().max());
        assert!(k.clone().cholesky().is_some(), "{} stiffness not SPD", spec.name);
    }
}
