//! The discrete Stroock–Varopoulos check against a pointwise oracle.
//!
//! With `q = (α+3)/α` the two sides reduce to
//! `LHS = ∫ |b|^q |∇b|^2 + q |b|^q |∇|b||^2` and
//! `RHS = (1+q) ∫ |b|^q |∇|b||^2`, so `LHS - RHS = ∫ |b|^q (|∇b|^2 - |∇|b||^2)`,
//! which is nonnegative by Kato's inequality and zero for fields of fixed
//! direction. The oracle evaluates these integrands from exact derivatives
//! of the band-limited field.

use std::f64::consts::PI;

use mhdbfed_core::diagnostics::stroock_varopoulos_check;
use mhdbfed_core::spectral::{gradient, transform_backward, transform_forward};
use mhdbfed_core::verification::random_solenoidal;
use mhdbfed_core::{Grid, Padding, PhysicalField, SpectralField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Oracle {
    lhs: f64,
    rhs: f64,
}

fn oracle(b: &SpectralField, alpha: f64) -> Oracle {
    let q = (alpha + 3.0) / alpha;
    let fine = Grid::new(2 * b.grid().n(), b.grid().l()).unwrap();
    let bf = b.resample(&fine).unwrap();
    let v = transform_backward(&bf, Padding::None);
    let grads = gradient(&bf).map(|g| transform_backward(&g, Padding::None));
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for i in 0..v.len() {
        let bi = [v.comp(0)[i], v.comp(1)[i], v.comp(2)[i]];
        let mag = (bi[0] * bi[0] + bi[1] * bi[1] + bi[2] * bi[2]).sqrt();
        if mag == 0.0 {
            continue;
        }
        let mut full = 0.0;
        let mut radial = 0.0;
        for gj in &grads {
            let d = [gj.comp(0)[i], gj.comp(1)[i], gj.comp(2)[i]];
            full += d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            let dm = (bi[0] * d[0] + bi[1] * d[1] + bi[2] * d[2]) / mag;
            radial += dm * dm;
        }
        let w = mag.powf(q);
        lhs += w * (full + q * radial);
        rhs += (1.0 + q) * w * radial;
    }
    let dv = v.cell_volume();
    Oracle {
        lhs: lhs * dv,
        rhs: rhs * dv,
    }
}

#[test]
fn library_agrees_with_pointwise_oracle() {
    let g = Grid::new(16, 2.0 * PI).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..20 {
        let b = random_solenoidal(&g, 1 + i % 5, &mut rng).unwrap();
        for alpha in [1.0, 1.5, 2.0, 3.0] {
            let o = oracle(&b, alpha);
            assert!(o.lhs >= o.rhs, "Kato fails in the oracle: {} < {}", o.lhs, o.rhs);
            let r = stroock_varopoulos_check(&b, alpha, Padding::Times(2)).unwrap();
            let ratio = r.ratio.unwrap();
            let oracle_ratio = o.lhs / o.rhs;
            assert!(
                (ratio - oracle_ratio).abs() <= 1e-2 * oracle_ratio,
                "alpha {alpha}: library {ratio}, oracle {oracle_ratio}"
            );
        }
    }
}

#[test]
fn fixed_direction_field_is_the_equality_case() {
    let g = Grid::new(16, 2.0 * PI).unwrap();
    let profile = |x: [f64; 3]| 1.0 + 0.5 * x[1].cos() + 0.3 * (x[2] + 0.4).sin();
    let b = transform_forward(&PhysicalField::from_fn(&g, Padding::None, |x| {
        let s = profile(x);
        [0.6 * s, 0.0, 0.8 * s]
    }));
    for alpha in [1.0, 1.5, 2.0, 3.0] {
        let o = oracle(&b, alpha);
        assert!((o.lhs / o.rhs - 1.0).abs() < 1e-12);
        let r = stroock_varopoulos_check(&b, alpha, Padding::Times(2)).unwrap();
        let ratio = r.ratio.unwrap();
        assert!(r.passes(1e-3) && (ratio - 1.0).abs() < 1e-3, "alpha {alpha}: {ratio}");
    }
}
