//! Globally adaptive Gauss-Kronrod (7/15) integration.

use alloc::vec::Vec;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

fn gk15(f: &mut impl FnMut(f64) -> f64, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over the union of consecutive `breakpoints` intervals,
/// bisecting the worst panel until the summed error estimate drops below
/// `abs_tol` or `max_panels` is reached.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    breakpoints: &[f64],
    abs_tol: f64,
    max_panels: usize,
) -> Integral {
    let mut panels: Vec<Panel> = breakpoints
        .windows(2)
        .map(|w| gk15(&mut f, w[0], w[1]))
        .collect();
    loop {
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if error <= abs_tol || panels.len() >= max_panels {
            let value = panels.iter().map(|p| p.value).sum();
            return Integral {
                value,
                error,
                converged: error <= abs_tol,
            };
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.lo + p.hi);
        if mid <= p.lo || mid >= p.hi {
            // Panel cannot be split further in floating point.
            let value = panels.iter().map(|q| q.value).sum::<f64>() + p.value;
            return Integral {
                value,
                error: error,
                converged: false,
            };
        }
        panels.push(gk15(&mut f, p.lo, mid));
        panels.push(gk15(&mut f, mid, p.hi));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x, &[0.0, 2.0], 1e-14, 10);
        assert!((r.value - 0.0).abs() < 1e-14);
        assert!(r.converged);
    }

    #[test]
    fn gaussian_bell() {
        let r = integrate(|x| (-x * x).exp(), &[0.0, 1.0, 2.0, 4.0, 8.0], 1e-13, 200);
        let expect = core::f64::consts::PI.sqrt() / 2.0;
        assert!((r.value - expect).abs() < 1e-13, "{}", r.value - expect);
    }
}
