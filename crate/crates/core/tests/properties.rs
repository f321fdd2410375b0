use frackg::conformable::{conf_deriv2_coefficients, conf_deriv_key, conf_deriv_limit, FracOrder};
use frackg::hulthen_kg::{self, HulthenParams};
use frackg::mu_algebra::{make_term, Exponent, MuTermSum, Shape};
use frackg::nu_core::{self, NuProblem};
use num_rational::Rational64;
use proptest::prelude::*;

fn order() -> impl Strategy<Value = FracOrder> {
    (1i64..=8).prop_flat_map(|d| (1i64..=d).prop_map(move |n| FracOrder::from_ratio(n, d).unwrap()))
}

fn rational() -> impl Strategy<Value = Rational64> {
    (-12i64..=12, 1i64..=6).prop_map(|(n, d)| Rational64::new(n, d))
}

fn shape() -> impl Strategy<Value = Shape> {
    (order(), 0.1f64..1.0, prop_oneof![-1.5f64..-0.1, 0.1f64..1.5]).prop_map(|(mu, s0, q)| Shape::new(mu, s0, q))
}

fn term_sum(shape: Shape) -> impl Strategy<Value = MuTermSum> {
    prop::collection::vec((-3.0f64..3.0, rational(), rational()), 1..5).prop_map(move |terms| {
        terms.into_iter().fold(MuTermSum::zero(shape), |acc, (c, p, e)| {
            acc.add(&make_term(c, p, e, shape).unwrap()).unwrap()
        })
    })
}

fn shaped_pair() -> impl Strategy<Value = (Shape, MuTermSum, MuTermSum)> {
    shape().prop_flat_map(|s| (Just(s), term_sum(s), term_sum(s)))
}

/// A point well inside `(0, z_max)` where the base stays positive.
fn interior(shape: &Shape, frac: f64) -> f64 {
    let mu = shape.mu.value();
    let top = if shape.q > 0.0 {
        shape.s0.min((shape.s0 / shape.q).powf(1.0 / mu))
    } else {
        shape.s0
    };
    top * frac
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn differentiation_is_linear((shape, f, g) in shaped_pair(), a in -2.0f64..2.0, b in -2.0f64..2.0, frac in 0.05f64..0.95) {
        let z = interior(&shape, frac);
        let lhs = f.scale(a).unwrap().add(&g.scale(b).unwrap()).unwrap().differentiate().evaluate(z).unwrap();
        let rhs = a * f.differentiate().evaluate(z).unwrap() + b * g.differentiate().evaluate(z).unwrap();
        let scale = (a.abs() + b.abs() + 1.0) * f.differentiate().terms().chain(g.differentiate().terms()).count().max(1) as f64;
        let mag = lhs.abs().max(rhs.abs()).max(1.0) * scale;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * mag, "{lhs} vs {rhs}");
    }

    #[test]
    fn derivative_matches_finite_difference((shape, f, _g) in shaped_pair(), frac in 0.2f64..0.8) {
        let z = interior(&shape, frac);
        let h = z * 1e-5;
        let fd = (f.evaluate(z + h).unwrap() - f.evaluate(z - h).unwrap()) / (2.0 * h);
        let exact = f.differentiate().evaluate(z).unwrap();
        let mag = f.terms().map(|t| t.coeff.abs()).sum::<f64>();
        let mag = mag * (1.0 + f.evaluate(z).unwrap().abs() / z + exact.abs());
        prop_assert!((fd - exact).abs() <= 1e-5 * mag.max(1e-12), "{fd} vs {exact}");
    }

    #[test]
    fn canonical_form_is_order_independent((_shape, f, g) in shaped_pair()) {
        let ab = f.add(&g).unwrap();
        let ba = g.add(&f).unwrap();
        prop_assert_eq!(ab.to_json(), ba.to_json());
        let mut last = None;
        for t in ab.terms() {
            let key = (t.z_power, t.base_power);
            prop_assert!(last.is_none_or(|k| k < key));
            prop_assert!(t.coeff.abs() > 0.0);
            last = Some(key);
        }
    }

    #[test]
    fn key_property_matches_limit(mu in order(), p in 1.0f64..3.0, t in 0.2f64..3.0) {
        let est = conf_deriv_limit(|s: f64| s.powf(p), t, mu).unwrap();
        let key = conf_deriv_key(|s: f64| p * s.powf(p - 1.0), t, mu);
        prop_assert!((est.value - key).abs() <= 1e-6 * key.abs());
    }

    #[test]
    fn second_application_coefficients(mu in order(), t in 0.2f64..3.0) {
        // f = sin: D^mu D^mu f = t^(2-2mu) f'' + (1-mu) t^(1-2mu) f'
        let (a, b) = conf_deriv2_coefficients(mu);
        let expected = a.eval(t) * -t.sin() + b.eval(t) * t.cos();
        let inner = |s: f64| conf_deriv_key(f64::cos, s, mu);
        let twice = conf_deriv_limit(inner, t, mu).unwrap().value;
        prop_assert!((twice - expected).abs() <= 1e-5 * expected.abs().max(1e-3));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn nu_branch_is_physical(mu in order(), q in 0.1f64..2.0, alpha in 0.2f64..3.0, s0 in 0.05f64..1.0, m in 0.2f64..3.0, eps_sq in 0.0f64..2.0) {
        let gamma_sq = s0 * s0 / (alpha * alpha);
        let beta_sq = 2.0 * m * s0 / (alpha * alpha);
        let p = NuProblem::new(s0, q, mu, gamma_sq, beta_sq, eps_sq).unwrap();
        let sol = nu_core::build_solution(&p).unwrap();
        prop_assert!(sol.tau_f.1 < 0.0);
        let quad = nu_core::radicand_quadratic(&p, sol.k_mu);
        prop_assert!(nu_core::discriminant(quad).abs() <= 1e-10 * nu_core::discriminant_scale(quad));
        let closed = nu_core::closed_form_pi(&p).unwrap();
        prop_assert!((sol.pi_f.0 - closed.0).abs() <= 1e-12 * closed.0.abs().max(1.0));
        prop_assert!((sol.pi_f.1 - closed.1).abs() <= 1e-12 * closed.1.abs().max(1.0));
    }

    #[test]
    fn spectrum_matches_nu_engine(mu in order(), q in 0.1f64..2.0, alpha in 0.2f64..3.0, s0 in 0.05f64..1.0, n in 0u32..4) {
        let p = HulthenParams::compton(s0, alpha, q, mu).unwrap();
        let direct = hulthen_kg::spectrum_ratio(n, &p).unwrap();
        let engine = nu_core::quantization_root(&p.nu_problem(0.0).unwrap(), n).unwrap();
        prop_assert!((direct - engine).abs() <= 1e-10 * direct.abs().max(1.0));
    }
}

#[test]
fn exponent_shift_is_exact() {
    let e = Exponent::new(
        Rational64::new(1, 3),
        Rational64::new(1, 2),
        Rational64::from_integer(-1),
    );
    let s = e.shift(Rational64::new(-4, 3));
    assert_eq!(
        s,
        Exponent::new(
            Rational64::from_integer(-1),
            Rational64::new(1, 2),
            Rational64::from_integer(-1)
        )
    );
}
