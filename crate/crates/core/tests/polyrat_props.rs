use num_complex::Complex64;
use proptest::prelude::*;
use twoway::polyrat::{rf_arith, rf_equal, rf_normalize, ArithOp};
use twoway::{Polynomial, RationalFunction};

fn coeffs(max_degree: usize) -> impl Strategy<Value = Vec<f64>> {
    (1..=max_degree).prop_flat_map(|d| {
        (prop::collection::vec(-10.0..10.0f64, d), 1.0..10.0f64, any::<bool>()).prop_map(|(mut c, lead, neg)| {
            c.push(if neg { -lead } else { lead });
            c
        })
    })
}

/// Monic polynomial from real roots and conjugate pairs in a box, so that
/// root multisets are known exactly.
fn rooted(max_degree: usize) -> impl Strategy<Value = (Polynomial, Vec<Complex64>)> {
    prop::collection::vec((-3.0..3.0f64, 0.0..2.0f64, any::<bool>()), 0..=max_degree / 2 + 1).prop_map(move |spec| {
        let mut roots = Vec::new();
        for (re, im, pair) in spec {
            if roots.len() + 2 > max_degree {
                break;
            }
            if pair && im > 0.2 {
                roots.push(Complex64::new(re, im));
                roots.push(Complex64::new(re, -im));
            } else {
                roots.push(Complex64::new(re, 0.0));
            }
        }
        (Polynomial::from_roots(&roots), roots)
    })
}

fn rational() -> impl Strategy<Value = RationalFunction> {
    (rooted(3), rooted(3), -3.0..3.0f64)
        .prop_filter("nonzero gain", |(_, _, g)| g.abs() > 0.2)
        .prop_map(|((n, _), (d, _), g)| RationalFunction::new(n.scale(g), d).unwrap())
}

/// Coefficient agreement relative to the largest coefficient of `x`.
fn same(x: &RationalFunction, y: &RationalFunction, tol: f64) -> bool {
    let scale = x.num().max_abs().max(x.den().max_abs()).max(1.0);
    rf_equal(x, y, tol * scale)
}

fn multiset_match(mut a: Vec<Complex64>, b: &[Complex64], tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    for r in b {
        let Some((i, _)) = a
            .iter()
            .enumerate()
            .map(|(i, x)| (i, (x - r).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
        else {
            return false;
        };
        if (a[i] - r).norm() > tol * (1.0 + r.norm()) {
            return false;
        }
        a.swap_remove(i);
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn roots_of_product_are_union((p, rp) in rooted(6), (q, rq) in rooted(6)) {
        // a repeated root across p and q is a double root of p·q: its roots
        // only resolve to about sqrt(eps)
        prop_assume!(!rp.is_empty() && !rq.is_empty());
        let min_gap = rp.iter().flat_map(|a| rq.iter().map(move |b| (a - b).norm())).fold(f64::INFINITY, f64::min);
        prop_assume!(min_gap > 1e-3);
        let union: Vec<Complex64> = rp.iter().chain(&rq).copied().collect();
        let got = (&p * &q).roots().unwrap();
        prop_assert!(multiset_match(got, &union, 1e-6));
    }

    #[test]
    fn random_coefficient_product_roots(p in coeffs(6), q in coeffs(6)) {
        let p = Polynomial::new(p);
        let q = Polynomial::new(q);
        let rp = p.roots().unwrap();
        let rq = q.roots().unwrap();
        let separated = rp.iter().all(|a| rq.iter().all(|b| (a - b).norm() > 1e-2))
            && [&rp, &rq].iter().all(|r| r.iter().enumerate().all(|(i, a)| r[i + 1..].iter().all(|b| (a - b).norm() > 1e-2)));
        prop_assume!(separated);
        let union: Vec<Complex64> = rp.iter().chain(&rq).copied().collect();
        let got = (&p * &q).roots().unwrap();
        prop_assert!(multiset_match(got, &union, 1e-6));
    }

    #[test]
    fn normalize_is_idempotent(x in rational()) {
        let once = rf_normalize(&x);
        let twice = rf_normalize(&once);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn add_then_subtract(x in rational(), y in rational()) {
        let back = rf_arith(&rf_arith(&x, &y, ArithOp::Add).unwrap(), &y, ArithOp::Sub).unwrap();
        prop_assert!(same(&back, &x, 1e-8), "{} vs {}", back, x);
    }

    #[test]
    fn multiply_then_divide(x in rational(), y in rational()) {
        let back = rf_arith(&rf_arith(&x, &y, ArithOp::Mul).unwrap(), &y, ArithOp::Div).unwrap();
        prop_assert!(same(&back, &x, 1e-8), "{} vs {}", back, x);
    }

    #[test]
    fn equality_is_symmetric(x in rational(), y in rational()) {
        prop_assert_eq!(rf_equal(&x, &y, 1e-9), rf_equal(&y, &x, 1e-9));
    }

    #[test]
    fn json_round_trip(x in rational()) {
        let text = serde_json::to_string(&x).unwrap();
        let back: RationalFunction = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn hurwitz_agrees_with_roots(c in coeffs(6)) {
        let p = Polynomial::new(c);
        let max_re = p.roots().unwrap().iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max);
        // stay clear of the margin itself
        prop_assume!((max_re + 1e-9).abs() > 1e-7);
        prop_assert_eq!(p.is_hurwitz(1e-9).unwrap(), max_re < -1e-9);
    }
}
