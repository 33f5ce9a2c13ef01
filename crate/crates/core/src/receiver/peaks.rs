//! Multipath extraction from a correlation profile by iterative maximum
//! search with model subtraction.
//!
//! Each pass forms the least-squares gain map of the residual, picks the
//! strongest lag outside the masked neighbourhoods of earlier picks, refines
//! its delay off-grid, re-fits the nearby components jointly and subtracts the
//! model. Extraction stops at the dynamic-range or noise threshold, whichever
//! is higher.

use num_complex::Complex;

use super::correlate::PowerDelayProfile;
use super::{MpcComponent, MpcProfile};
use crate::dsp::FftPair;
use crate::error::{Error, Result};
use crate::Real;

type C64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakConfig<T> {
    pub dynamic_range_db: T,
    pub resolution_ns: T,
    /// Margin of the detection threshold above the noise floor.
    pub noise_margin_db: T,
    pub max_components: usize,
}

impl<T: Real> Default for PeakConfig<T> {
    fn default() -> Self {
        Self {
            dynamic_range_db: T::lit(60.0),
            resolution_ns: T::lit(0.1),
            noise_margin_db: T::lit(3.0),
            max_components: 64,
        }
    }
}

impl<T: Real> PeakConfig<T> {
    pub fn new(dynamic_range_db: T, resolution_ns: T) -> Self {
        Self {
            dynamic_range_db,
            resolution_ns,
            ..Self::default()
        }
    }
}

/// Components closer than this many samples are re-fitted together.
const CLUSTER_SAMPLES: f64 = 24.0;
const MERGE_FRACTION: f64 = 0.25;
const LM_ITERATIONS: usize = 40;

/// Signal model restricted to the bins where the template carries energy.
struct Model {
    n: usize,
    bins: Vec<usize>,
    theta: Vec<f64>,
    p: Vec<f64>,
    c: Vec<C64>,
    pp: f64,
}

#[derive(Debug, Clone, Copy)]
struct Comp {
    tau: f64,
    g: C64,
}

impl Model {
    fn new<T: Real>(pdp: &PowerDelayProfile<T>) -> Result<Self> {
        let n = pdp.len();
        let pmax = pdp.template.iter().fold(T::zero(), |m, &v| m.max(v)).as_f64();
        if n == 0 || !(pmax > 0.0) {
            return Err(Error::Empty("correlation template"));
        }
        let mut m = Model {
            n,
            bins: Vec::new(),
            theta: Vec::new(),
            p: Vec::new(),
            c: Vec::new(),
            pp: 0.0,
        };
        for k in 0..n {
            let p = pdp.template[k].as_f64();
            if p > 1e-9 * pmax {
                let kk = if 2 * k < n { k as f64 } else { k as f64 - n as f64 };
                m.bins.push(k);
                m.theta.push(std::f64::consts::TAU * kk / n as f64);
                m.p.push(p);
                let s = pdp.spectrum[k];
                m.c.push(C64::new(s.re.as_f64(), s.im.as_f64()));
                m.pp += p * p;
            }
        }
        Ok(m)
    }

    /// `P(k)·exp(−jθ_k τ)` over the active bins.
    fn basis(&self, tau: f64) -> Vec<C64> {
        self.theta
            .iter()
            .zip(&self.p)
            .map(|(th, p)| C64::from_polar(*p, -th * tau))
            .collect()
    }

    fn residual(&self, comps: &[Comp], skip: &[usize]) -> Vec<C64> {
        let mut r = self.c.clone();
        for (i, c) in comps.iter().enumerate() {
            if skip.contains(&i) {
                continue;
            }
            for (rk, b) in r.iter_mut().zip(self.basis(c.tau)) {
                *rk -= c.g * b;
            }
        }
        r
    }

    /// Least-squares single-component gain at every integer lag.
    fn gain_map(&self, residual: &[C64], plan: &FftPair<f64>) -> Vec<C64> {
        let mut buf = vec![C64::new(0.0, 0.0); self.n];
        for ((&k, r), p) in self.bins.iter().zip(residual).zip(&self.p) {
            buf[k] = *r * *p;
        }
        plan.inverse(&mut buf);
        let scale = self.n as f64 / self.pp;
        buf.iter().map(|v| *v * scale).collect()
    }

    /// Newton search for the delay maximizing `|Σ r_k P_k e^{jθ_k τ}|²`.
    fn refine_single(&self, residual: &[C64], tau0: f64) -> f64 {
        let mut tau = tau0;
        for _ in 0..30 {
            let (mut a, mut a1, mut a2) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            for ((r, p), th) in residual.iter().zip(&self.p).zip(&self.theta) {
                let w = *r * *p * C64::from_polar(1.0, th * tau);
                a += w;
                a1 += w * C64::new(0.0, *th);
                a2 -= w * (th * th);
            }
            let d1 = 2.0 * (a.conj() * a1).re;
            let d2 = 2.0 * (a1.norm_sqr() + (a.conj() * a2).re);
            let step = if d2 < 0.0 { -d1 / d2 } else { d1.signum() * 0.25 };
            let step = step.clamp(-0.5, 0.5);
            tau += step;
            if step.abs() < 1e-7 {
                break;
            }
        }
        tau
    }

    /// Joint least-squares gains for fixed delays.
    fn solve_gains(&self, comps: &mut [Comp]) {
        let k = comps.len();
        if k == 0 {
            return;
        }
        let bases: Vec<Vec<C64>> = comps.iter().map(|c| self.basis(c.tau)).collect();
        let mut gram = vec![vec![C64::new(0.0, 0.0); k]; k];
        let mut rhs = vec![C64::new(0.0, 0.0); k];
        for i in 0..k {
            rhs[i] = bases[i].iter().zip(&self.c).map(|(b, c)| b.conj() * c).sum();
            for j in i..k {
                let v: C64 = bases[i].iter().zip(&bases[j]).map(|(a, b)| a.conj() * b).sum();
                gram[i][j] = v;
                gram[j][i] = v.conj();
            }
            gram[i][i] += self.pp * 1e-12;
        }
        if let Some(g) = solve_complex(gram, rhs) {
            for (c, gi) in comps.iter_mut().zip(g) {
                c.g = gi;
            }
        }
    }

    /// Levenberg–Marquardt on delays and gains of `idx`, others held fixed.
    fn refine_joint(&self, comps: &mut [Comp], idx: &[usize]) {
        let fixed = self.residual(comps, idx);
        let cost_of = |cs: &[Comp]| -> f64 {
            let mut r = fixed.clone();
            for c in cs {
                for (rk, b) in r.iter_mut().zip(self.basis(c.tau)) {
                    *rk -= c.g * b;
                }
            }
            r.iter().map(|v| v.norm_sqr()).sum()
        };
        let mut cur: Vec<Comp> = idx.iter().map(|&i| comps[i]).collect();
        let mut cost = cost_of(&cur);
        let mut lambda = 1e-3;
        let np = 3 * cur.len();
        for _ in 0..LM_ITERATIONS {
            let bases: Vec<Vec<C64>> = cur.iter().map(|c| self.basis(c.tau)).collect();
            let mut r = fixed.clone();
            for (c, b) in cur.iter().zip(&bases) {
                for (rk, bk) in r.iter_mut().zip(b) {
                    *rk -= c.g * bk;
                }
            }
            // Jacobian columns of the model: ∂/∂τ, ∂/∂Re g, ∂/∂Im g
            let mut cols: Vec<Vec<C64>> = Vec::with_capacity(np);
            for (c, b) in cur.iter().zip(&bases) {
                cols.push(b.iter().zip(&self.theta).map(|(bk, th)| c.g * bk * C64::new(0.0, -th)).collect());
                cols.push(b.clone());
                cols.push(b.iter().map(|bk| bk * C64::new(0.0, 1.0)).collect());
            }
            let mut jtj = vec![vec![0.0; np]; np];
            let mut jtr = vec![0.0; np];
            for a in 0..np {
                jtr[a] = cols[a].iter().zip(&r).map(|(x, y)| (x.conj() * y).re).sum();
                for b in a..np {
                    let v: f64 = cols[a].iter().zip(&cols[b]).map(|(x, y)| (x.conj() * y).re).sum();
                    jtj[a][b] = v;
                    jtj[b][a] = v;
                }
            }
            let mut improved = false;
            for _ in 0..8 {
                let mut m = jtj.clone();
                for (a, row) in m.iter_mut().enumerate() {
                    row[a] += lambda * jtj[a][a].max(1e-30);
                }
                let Some(delta) = solve_real(m, jtr.clone()) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial: Vec<Comp> = cur
                    .iter()
                    .enumerate()
                    .map(|(i, c)| Comp {
                        tau: c.tau + delta[3 * i].clamp(-1.0, 1.0),
                        g: c.g + C64::new(delta[3 * i + 1], delta[3 * i + 2]),
                    })
                    .collect();
                let tc = cost_of(&trial);
                if tc < cost {
                    let shift = delta.iter().step_by(3).fold(0.0f64, |m, d| m.max(d.abs()));
                    let rel = (cost - tc) / cost.max(f64::MIN_POSITIVE);
                    cur = trial;
                    cost = tc;
                    lambda = (lambda * 0.3).max(1e-9);
                    improved = rel > 1e-12 && shift > 1e-9;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
        }
        for (&i, c) in idx.iter().zip(cur) {
            comps[i] = c;
        }
    }

    fn circular_distance(&self, a: f64, b: f64) -> f64 {
        let n = self.n as f64;
        let d = (a - b).rem_euclid(n);
        d.min(n - d)
    }

    fn neighbours(&self, comps: &[Comp], tau: f64) -> Vec<usize> {
        (0..comps.len())
            .filter(|&i| self.circular_distance(comps[i].tau, tau) <= CLUSTER_SAMPLES)
            .collect()
    }

    /// Groups of components linked by gaps of at most `CLUSTER_SAMPLES`.
    fn clusters(&self, comps: &[Comp]) -> Vec<Vec<usize>> {
        let n = self.n as f64;
        let mut order: Vec<usize> = (0..comps.len()).collect();
        order.sort_by(|&a, &b| {
            comps[a].tau.rem_euclid(n).partial_cmp(&comps[b].tau.rem_euclid(n)).unwrap()
        });
        let mut out: Vec<Vec<usize>> = Vec::new();
        for &i in &order {
            match out.last_mut() {
                Some(last) if comps[i].tau.rem_euclid(n) - comps[*last.last().unwrap()].tau.rem_euclid(n) <= CLUSTER_SAMPLES => {
                    last.push(i)
                }
                _ => out.push(vec![i]),
            }
        }
        // join the wrap-around cluster
        if out.len() > 1 {
            let first = comps[out[0][0]].tau.rem_euclid(n);
            let last = comps[*out.last().unwrap().last().unwrap()].tau.rem_euclid(n);
            if first + n - last <= CLUSTER_SAMPLES {
                let head = out.remove(0);
                out.last_mut().unwrap().extend(head);
            }
        }
        out
    }
}

/// Extracts multipath components from a correlation profile. Powers and the
/// noise floor are in dB relative to a unit-gain tap; callers add the
/// absolute power reference.
pub fn detect_peaks<T: Real>(pdp: &PowerDelayProfile<T>, cfg: &PeakConfig<T>) -> Result<MpcProfile<T>> {
    Ok(extract(pdp, cfg)?.to_profile(cfg.dynamic_range_db))
}

/// Raw extraction result: delays in samples on the profile's lag axis.
#[derive(Debug, Clone)]
pub(crate) struct Extraction {
    pub taus: Vec<f64>,
    pub gains: Vec<C64>,
    pub noise_floor: f64,
    pub len: usize,
    pub sample_rate: f64,
}

impl Extraction {
    /// Lag (samples, in `[−N/2, N/2)`) of the earliest component whose power
    /// is within `span_db` of the strongest.
    pub fn earliest_strong(&self, span_db: f64) -> Option<f64> {
        let pmax = self.gains.iter().map(|g| g.norm_sqr()).fold(0.0, f64::max);
        let strong: Vec<Comp> = self
            .taus
            .iter()
            .zip(&self.gains)
            .filter(|(_, g)| g.norm_sqr() >= pmax * 10f64.powf(-span_db / 10.0))
            .map(|(&tau, &g)| Comp { tau, g })
            .collect();
        if strong.is_empty() {
            return None;
        }
        let n = self.len as f64;
        let e = earliest(&strong, n);
        Some(if e >= n / 2.0 { e - n } else { e })
    }

    pub fn to_profile<T: Real>(&self, dynamic_range_db: T) -> MpcProfile<T> {
        let to_t = |x: f64| T::lit(x);
        let n = self.len as f64;
        let comps: Vec<Comp> = self
            .taus
            .iter()
            .zip(&self.gains)
            .map(|(&tau, &g)| Comp { tau, g })
            .collect();
        let origin = earliest(&comps, n);
        let mut components: Vec<MpcComponent<T>> = comps
            .iter()
            .map(|c| {
                let excess = (c.tau - origin).rem_euclid(n);
                MpcComponent {
                    delay_ns: to_t(excess / self.sample_rate * 1e9),
                    power_dbm: to_t(10.0 * c.g.norm_sqr().log10()),
                    amplitude: Complex::new(to_t(c.g.re), to_t(c.g.im)),
                }
            })
            .collect();
        components.sort_by(|a, b| a.delay_ns.partial_cmp(&b.delay_ns).unwrap());
        MpcProfile {
            frame_id: 0,
            components,
            noise_floor_dbm: to_t(10.0 * self.noise_floor.max(f64::MIN_POSITIVE).log10()),
            dynamic_range_db,
            power_reference_dbm: T::zero(),
        }
    }
}

pub(crate) fn extract<T: Real>(pdp: &PowerDelayProfile<T>, cfg: &PeakConfig<T>) -> Result<Extraction> {
    if pdp.is_empty() {
        return Err(Error::Empty("power-delay profile"));
    }
    if !(cfg.dynamic_range_db > T::zero()) || !(cfg.resolution_ns > T::zero()) {
        return Err(Error::InvalidParameter(
            "dynamic range and resolution must be positive".into(),
        ));
    }
    let model = Model::new(pdp)?;
    let fs = pdp.sample_rate.as_f64();
    let n = model.n;
    let plan = FftPair::<f64>::new(n);
    let resolution = cfg.resolution_ns.as_f64() * 1e-9 * fs;
    let mask_half = resolution / 2.0;
    let dr = 10f64.powf(-cfg.dynamic_range_db.as_f64() / 10.0);

    // noise statistics come from the residual map, so they tighten as the
    // deterministic sidelobes of extracted components are removed
    let noise_floor_of = |map: &[C64]| -> f64 {
        let mut mags: Vec<f64> = map.iter().map(|v| v.norm_sqr()).collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        mags[mags.len() / 2] / std::f64::consts::LN_2 * (n as f64).ln()
    };
    let margin = 10f64.powf(cfg.noise_margin_db.as_f64() / 10.0);
    let threshold = |comps: &[Comp], noise_floor: f64| -> f64 {
        let gmax = comps.iter().map(|c| c.g.norm_sqr()).fold(0.0, f64::max);
        (gmax * dr).max(noise_floor * margin)
    };

    let mut comps: Vec<Comp> = Vec::new();
    let mut residual = model.c.clone();
    let mut noise_floor;
    loop {
        let map = model.gain_map(&residual, &plan);
        noise_floor = noise_floor_of(&map);
        if comps.len() >= cfg.max_components {
            break;
        }
        let pick = map
            .iter()
            .enumerate()
            .filter(|(m, _)| {
                comps
                    .iter()
                    .all(|c| model.circular_distance(*m as f64, c.tau) >= mask_half)
            })
            .map(|(m, v)| (m, v.norm_sqr()))
            .fold(None, |best: Option<(usize, f64)>, (m, p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((m, p)),
            });
        let Some((lag, power)) = pick else { break };
        let gmax = comps.iter().map(|c| c.g.norm_sqr()).fold(power, f64::max);
        if power < (gmax * dr).max(noise_floor * margin) {
            break;
        }
        let tau = model.refine_single(&residual, lag as f64);
        let g: C64 = model
            .basis(tau)
            .iter()
            .zip(&residual)
            .map(|(b, r)| b.conj() * r)
            .sum::<C64>()
            / model.pp;
        comps.push(Comp { tau, g });
        let group = model.neighbours(&comps, tau);
        model.refine_joint(&mut comps, &group);
        model.solve_gains(&mut comps);
        let newest = comps.len() - 1;
        if comps[newest].g.norm_sqr() < threshold(&comps, noise_floor) {
            comps.pop();
            model.solve_gains(&mut comps);
            break;
        }
        residual = model.residual(&comps, &[]);
    }

    // final polish, then prune and merge until stable
    for group in model.clusters(&comps) {
        model.refine_joint(&mut comps, &group);
    }
    model.solve_gains(&mut comps);
    loop {
        let thr = threshold(&comps, noise_floor);
        let weakest = comps
            .iter()
            .enumerate()
            .filter(|(_, c)| c.g.norm_sqr() < thr)
            .min_by(|a, b| a.1.g.norm_sqr().partial_cmp(&b.1.g.norm_sqr()).unwrap())
            .map(|(i, _)| i);
        let close = (0..comps.len())
            .flat_map(|i| (i + 1..comps.len()).map(move |j| (i, j)))
            .find(|&(i, j)| model.circular_distance(comps[i].tau, comps[j].tau) < MERGE_FRACTION * resolution);
        if let Some((i, j)) = close {
            let drop = if comps[i].g.norm_sqr() < comps[j].g.norm_sqr() { i } else { j };
            comps.remove(drop);
        } else if let Some(i) = weakest {
            comps.remove(i);
        } else {
            break;
        }
        model.solve_gains(&mut comps);
    }

    Ok(Extraction {
        taus: comps.iter().map(|c| c.tau).collect(),
        gains: comps.iter().map(|c| c.g).collect(),
        noise_floor,
        len: n,
        sample_rate: fs,
    })
}

/// Delay of the component that follows the widest empty stretch of the
/// circular lag axis.
fn earliest(comps: &[Comp], n: f64) -> f64 {
    if comps.is_empty() {
        return 0.0;
    }
    let mut taus: Vec<f64> = comps.iter().map(|c| c.tau.rem_euclid(n)).collect();
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best = (taus[0] + n - taus[taus.len() - 1], taus[0]);
    for w in taus.windows(2) {
        if w[1] - w[0] > best.0 {
            best = (w[1] - w[0], w[1]);
        }
    }
    best.1
}

fn solve_real(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if !(a[piv][col].abs() > 0.0) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Solves a complex system through its real 2n×2n embedding.
fn solve_complex(a: Vec<Vec<C64>>, b: Vec<C64>) -> Option<Vec<C64>> {
    let n = b.len();
    let mut m = vec![vec![0.0; 2 * n]; 2 * n];
    let mut rhs = vec![0.0; 2 * n];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = a[i][j].re;
            m[i][j + n] = -a[i][j].im;
            m[i + n][j] = a[i][j].im;
            m[i + n][j + n] = a[i][j].re;
        }
        rhs[i] = b[i].re;
        rhs[i + n] = b[i].im;
    }
    let x = solve_real(m, rhs)?;
    Some((0..n).map(|i| C64::new(x[i], x[i + n])).collect())
}
