//! Special functions and quadrature used by the distribution fits.

/// Power series / asymptotic switch point for the scaled Bessel functions.
const BESSEL_SWITCH: f64 = 15.0;

/// `e^{−|z|}·I_ν(z)` for ν ∈ {0, 1}, z ≥ 0.
fn bessel_i_scaled(order: u32, z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if z <= BESSEL_SWITCH {
        // Σ (z/2)^{2k+ν} / (k!·(k+ν)!)
        let h = 0.5 * z;
        let h2 = h * h;
        let mut term = if order == 0 { 1.0 } else { h };
        let mut sum = term;
        for k in 1..200 {
            let k = k as f64;
            term *= h2 / (k * (k + order as f64));
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        sum * (-z).exp()
    } else {
        // e^z/√(2πz)·Σ (−1)^k a_k(ν)/z^k, truncated at the smallest term
        let mu = 4.0 * (order * order) as f64;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            let odd = (2 * k - 1) as f64;
            let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * z);
            if next.abs() >= term.abs() {
                break;
            }
            term = next;
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum / (std::f64::consts::TAU * z).sqrt()
    }
}

pub fn bessel_i0e(z: f64) -> f64 {
    bessel_i_scaled(0, z.abs())
}

pub fn bessel_i1e(z: f64) -> f64 {
    let v = bessel_i_scaled(1, z.abs());
    if z < 0.0 {
        -v
    } else {
        v
    }
}

/// `ln I₀(z)`, stable for large arguments.
pub fn ln_bessel_i0(z: f64) -> f64 {
    bessel_i0e(z).ln() + z.abs()
}

/// `I₁(z)/I₀(z)`.
pub fn bessel_ratio(z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    bessel_i1e(z) / bessel_i0e(z)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: (estimate, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * GK_WEIGHTS[7];
    let mut gauss = fc * GAUSS_WEIGHTS[3];
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        kronrod += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod quadrature of `f` over `[a, b]` to an
/// absolute tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut panels = vec![{
        let (v, e) = gk15(&f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..2000 {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= abs_tol {
            break;
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, p)| if p.3 > best.1 { (i, p.3) } else { best });
        let (lo, hi, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    panels.iter().map(|p| p.2).sum()
}

/// Quantile by linear interpolation between order statistics (the
/// `(n−1)·p` rule) on sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}
