#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use twoway::closedloop::{CodingScheme, LoopModel, TwoWayCoding};
use twoway::{Polynomial, RationalFunction};

pub fn rf(num: &[f64], den: &[f64]) -> RationalFunction {
    RationalFunction::from_coeffs(num, den).unwrap()
}

fn signed<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let m = rng.gen_range(lo..hi);
    if rng.gen_bool(0.5) {
        m
    } else {
        -m
    }
}

/// Monic polynomial of the given degree with roots in the box
/// `[-3, 3] x [-2, 2]`; complex roots come in conjugate pairs.
pub fn random_poly<R: Rng>(rng: &mut R, degree: usize) -> Polynomial {
    let mut roots = Vec::with_capacity(degree);
    while roots.len() < degree {
        if degree - roots.len() >= 2 && rng.gen_bool(0.3) {
            let re = rng.gen_range(-3.0..3.0);
            let im = rng.gen_range(0.2..2.0);
            roots.push(Complex64::new(re, im));
            roots.push(Complex64::new(re, -im));
        } else {
            roots.push(Complex64::new(rng.gen_range(-3.0..3.0), 0.0));
        }
    }
    Polynomial::from_roots(&roots)
}

/// Proper plant with denominator degree `1..=4`.
pub fn random_plant<R: Rng>(rng: &mut R) -> RationalFunction {
    let n = rng.gen_range(1..=4);
    let m = rng.gen_range(0..=n);
    let gain = signed(rng, 0.5, 2.0);
    RationalFunction::new(random_poly(rng, m).scale(gain), random_poly(rng, n)).unwrap()
}

/// Static gain or a proper controller of degree at most 2.
pub fn random_controller<R: Rng>(rng: &mut R) -> RationalFunction {
    if rng.gen_bool(0.5) {
        RationalFunction::constant(signed(rng, 0.2, 3.0))
    } else {
        let n = rng.gen_range(1..=2);
        let m = rng.gen_range(0..=n);
        let gain = signed(rng, 0.2, 3.0);
        RationalFunction::new(random_poly(rng, m).scale(gain), random_poly(rng, n)).unwrap()
    }
}

pub fn random_two_way<R: Rng>(rng: &mut R) -> TwoWayCoding {
    loop {
        let m = TwoWayCoding {
            a: signed(rng, 0.3, 2.0),
            b: rng.gen_range(-2.0..2.0),
            c: rng.gen_range(-2.0..2.0),
            d: signed(rng, 0.3, 2.0),
        };
        if m.det().abs() > 0.1 {
            return m;
        }
    }
}

pub fn random_one_way<R: Rng>(rng: &mut R) -> CodingScheme {
    CodingScheme::OneWay { alpha: signed(rng, 0.3, 2.0), beta: signed(rng, 0.3, 2.0) }
}

/// Coding variant chosen by `i % 3`: none, one-way, two-way.
pub fn random_coding<R: Rng>(rng: &mut R, i: usize) -> CodingScheme {
    match i % 3 {
        0 => CodingScheme::None,
        1 => random_one_way(rng),
        _ => CodingScheme::TwoWay(random_two_way(rng)),
    }
}

/// Random loop model whose loop `1 + KP` is not degenerate.
pub fn random_model<R: Rng>(rng: &mut R, coding: CodingScheme) -> LoopModel {
    loop {
        let p = random_plant(rng);
        let k = random_controller(rng);
        if let Ok(m) = LoopModel::new(p, k, coding) {
            if !m.characteristic_polynomial().is_zero() {
                return m;
            }
        }
    }
}

/// Plant admitting a stabilizing static gain.
pub fn random_stabilizable_plant<R: Rng>(rng: &mut R) -> (RationalFunction, f64) {
    loop {
        let p = random_plant(rng);
        if let Some(k) = twoway::decoupling::find_static_stabilizing_gain(&p) {
            return (p, k);
        }
    }
}

/// Whether `den(P) + K num(P)` is Hurwitz with a comfortable margin.
pub fn gain_stabilizes(p: &RationalFunction, k: f64, margin: f64) -> bool {
    let chi = p.den() + &p.num().scale(k);
    !chi.is_zero() && chi.is_hurwitz(margin).unwrap()
}
