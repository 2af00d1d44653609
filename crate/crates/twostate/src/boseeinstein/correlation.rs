//! C(Q_inv) estimation with a mixed-event reference, plateau normalization,
//! Gaussian-source fitting, and the absorber comparison.

use serde::Serialize;

use crate::boseeinstein::{
    pair_weight, q_inv, sample_event, FourMomentum, Origin, SourceGeometry, SourceModel,
    HBAR_C_GEV_FM,
};
use crate::error::{Error, Result};
use crate::par;

/// Histogram binning over Q_inv in GeV.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Binning {
    pub n_bins: usize,
    pub q_max_gev: f64,
}

impl Default for Binning {
    fn default() -> Self {
        Binning {
            n_bins: 80,
            q_max_gev: 0.4,
        }
    }
}

impl Binning {
    fn index(&self, q: f64) -> Option<usize> {
        if !(0.0..self.q_max_gev).contains(&q) {
            return None;
        }
        Some(((q / self.q_max_gev) * self.n_bins as f64) as usize)
    }

    fn center(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) * self.q_max_gev / self.n_bins as f64
    }

    fn lo(&self, bin: usize) -> f64 {
        bin as f64 * self.q_max_gev / self.n_bins as f64
    }
}

/// Same-event and mixed-event yields with the normalized ratio.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationHistogram {
    pub binning: Binning,
    /// Sum of Bose-Einstein weights of same-event pairs per bin.
    pub same: Vec<f64>,
    /// Sum of squared weights (for the statistical error).
    pub same_sq: Vec<f64>,
    pub same_count: Vec<u64>,
    /// Mixed-event reference counts per bin.
    pub mixed: Vec<u64>,
    /// Plateau normalization divided out of the raw ratio.
    pub normalization: f64,
    /// Normalized C per bin; None where the reference is empty.
    pub c: Vec<Option<f64>>,
    pub c_err: Vec<Option<f64>>,
    /// Total same-event weight and mixed-event count over all Q (the
    /// relative scale of the two samples).
    pub same_total: f64,
    pub mixed_total: u64,
}

impl CorrelationHistogram {
    /// Pooled, normalized C over Q_inv < `q_window`, with its error.
    pub fn pooled_c(&self, q_window: f64) -> Option<(f64, f64)> {
        let mut same = 0.0;
        let mut same_sq = 0.0;
        let mut mixed = 0u64;
        for b in 0..self.binning.n_bins {
            if self.binning.lo(b) + self.binning.q_max_gev / self.binning.n_bins as f64
                <= q_window + 1e-12
            {
                same += self.same[b];
                same_sq += self.same_sq[b];
                mixed += self.mixed[b];
            }
        }
        if mixed == 0 || same <= 0.0 {
            return None;
        }
        let scale = self.mixed_total as f64 / self.same_total;
        let c = (same / mixed as f64) * scale / self.normalization;
        let rel = (same_sq / (same * same) + 1.0 / mixed as f64).sqrt();
        Some((c, c * rel))
    }

    /// CSV export: `q_lo,q_hi,same,mixed,C,C_err`, invalid bins left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("q_lo,q_hi,same,mixed,C,C_err\n");
        let width = self.binning.q_max_gev / self.binning.n_bins as f64;
        for b in 0..self.binning.n_bins {
            let lo = self.binning.lo(b);
            match (self.c[b], self.c_err[b]) {
                (Some(c), Some(e)) => out.push_str(&format!(
                    "{:.6},{:.6},{:.9e},{},{:.9e},{:.9e}\n",
                    lo,
                    lo + width,
                    self.same[b],
                    self.mixed[b],
                    c,
                    e
                )),
                _ => out.push_str(&format!(
                    "{:.6},{:.6},{:.9e},{},,\n",
                    lo,
                    lo + width,
                    self.same[b],
                    self.mixed[b]
                )),
            }
        }
        out
    }
}

/// Gaussian-source fit C(Q) = N * (1 + lambda * exp(-Q² R² / (hbar c)²)).
///
/// The free baseline N absorbs the statistical error of the plateau
/// normalization, which would otherwise bleed into lambda and R.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GaussianFit {
    pub lambda: f64,
    pub radius_fm: f64,
    pub baseline: f64,
    /// Fitted normalized intercept C(Q -> 0)/C(infinity) = 1 + lambda.
    pub intercept: f64,
    pub converged: bool,
}

/// Full correlation analysis of one source.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationReport {
    pub histogram: CorrelationHistogram,
    pub fit: Option<GaussianFit>,
    /// Pooled normalized C over the small-Q window, with error.
    pub c0_pooled: Option<(f64, f64)>,
    pub c0_window_gev: f64,
    /// Pooled normalized C over Q > 0.75 q_max (the plateau itself, after
    /// normalization: consistency diagnostic, should be 1).
    pub tail_c: Option<(f64, f64)>,
    pub n_events: usize,
    pub seed: u64,
}

const MIX_PARTNERS: usize = 10;
const CHUNK: usize = 1024;

struct HistAccum {
    same: Vec<f64>,
    same_sq: Vec<f64>,
    same_count: Vec<u64>,
    mixed: Vec<u64>,
    same_total: f64,
    mixed_total: u64,
}

impl HistAccum {
    fn new(n_bins: usize) -> Self {
        HistAccum {
            same: vec![0.0; n_bins],
            same_sq: vec![0.0; n_bins],
            same_count: vec![0u64; n_bins],
            mixed: vec![0u64; n_bins],
            same_total: 0.0,
            mixed_total: 0,
        }
    }

    fn merge(mut self, other: HistAccum) -> HistAccum {
        for b in 0..self.same.len() {
            self.same[b] += other.same[b];
            self.same_sq[b] += other.same_sq[b];
            self.same_count[b] += other.same_count[b];
            self.mixed[b] += other.mixed[b];
        }
        self.same_total += other.same_total;
        self.mixed_total += other.mixed_total;
        self
    }
}

fn fill_histogram(
    events: &[crate::boseeinstein::PairEvent],
    binning: &Binning,
) -> Result<CorrelationHistogram> {
    let n = events.len();
    let acc = par::fold_chunked(
        n,
        CHUNK,
        || HistAccum::new(binning.n_bins),
        |acc, i| {
            let ev = &events[i];
            let q = q_inv(&ev.p1, &ev.p2).expect("sampled momenta are on shell");
            let w = pair_weight(ev);
            acc.same_total += w;
            if let Some(b) = binning.index(q) {
                acc.same[b] += w;
                acc.same_sq[b] += w * w;
                acc.same_count[b] += 1;
            }
            for k in 1..=MIX_PARTNERS.min(n - 1) {
                let other = &events[(i + k) % n];
                let qm = q_inv(&ev.p1, &other.p2).expect("on shell");
                acc.mixed_total += 1;
                if let Some(b) = binning.index(qm) {
                    acc.mixed[b] += 1;
                }
            }
        },
        HistAccum::merge,
    );

    // pooled plateau over [0.5, 0.75] of the range, disjoint from the
    // large-Q diagnostic window so that the latter stays a measurement
    let plateau_lo = 0.5 * binning.q_max_gev;
    let plateau_hi = 0.75 * binning.q_max_gev;
    let mut psame = 0.0;
    let mut pmixed = 0u64;
    for b in 0..binning.n_bins {
        let lo = binning.lo(b);
        if lo >= plateau_lo - 1e-12 && lo < plateau_hi - 1e-12 {
            psame += acc.same[b];
            pmixed += acc.mixed[b];
        }
    }
    if pmixed == 0 || psame <= 0.0 {
        return Err(Error::Config(
            "no statistics in the plateau region; widen the binning or momentum scale".into(),
        ));
    }
    let scale = acc.mixed_total as f64 / acc.same_total;
    let normalization = (psame / pmixed as f64) * scale;

    let mut c = vec![None; binning.n_bins];
    let mut c_err = vec![None; binning.n_bins];
    for b in 0..binning.n_bins {
        if acc.mixed[b] == 0 || acc.same_count[b] == 0 {
            continue;
        }
        let raw = (acc.same[b] / acc.mixed[b] as f64) * scale;
        let value = raw / normalization;
        let rel =
            (acc.same_sq[b] / (acc.same[b] * acc.same[b]) + 1.0 / acc.mixed[b] as f64).sqrt();
        c[b] = Some(value);
        c_err[b] = Some(value * rel);
    }

    Ok(CorrelationHistogram {
        binning: *binning,
        same: acc.same,
        same_sq: acc.same_sq,
        same_count: acc.same_count,
        mixed: acc.mixed,
        normalization,
        c,
        c_err,
        same_total: acc.same_total,
        mixed_total: acc.mixed_total,
    })
}

/// Weighted Gauss-Newton fit of the Gaussian-source form.
pub(crate) fn fit_gaussian(hist: &CorrelationHistogram) -> Option<GaussianFit> {
    let binning = &hist.binning;
    let mut qs = Vec::new();
    let mut cs = Vec::new();
    let mut ws = Vec::new();
    for b in 0..binning.n_bins {
        if let (Some(c), Some(e)) = (hist.c[b], hist.c_err[b]) {
            if e > 0.0 {
                qs.push(binning.center(b));
                cs.push(c);
                ws.push(1.0 / (e * e));
            }
        }
    }
    if qs.len() < 4 {
        return None;
    }
    let cmax = cs.iter().cloned().fold(f64::MIN, f64::max);
    let mut lambda = (cmax - 1.0).clamp(0.05, 1.5);
    let mut baseline = 1.0f64;
    let half = 1.0 + lambda / 2.0;
    let q_half = qs
        .iter()
        .zip(&cs)
        .find(|(_, c)| **c < half)
        .map(|(q, _)| *q)
        .unwrap_or(binning.q_max_gev / 4.0);
    let mut radius = HBAR_C_GEV_FM * (2f64.ln()).sqrt() / q_half.max(1e-6);

    let chi2 = |n: f64, l: f64, r: f64| -> f64 {
        qs.iter()
            .zip(&cs)
            .zip(&ws)
            .map(|((q, c), w)| {
                let m = n * (1.0 + l * (-q * q * r * r / (HBAR_C_GEV_FM * HBAR_C_GEV_FM)).exp());
                w * (c - m) * (c - m)
            })
            .sum()
    };

    let mut best = chi2(baseline, lambda, radius);
    let mut converged = false;
    for _ in 0..200 {
        // normal equations for (baseline, lambda, radius)
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for ((q, c), w) in qs.iter().zip(&cs).zip(&ws) {
            let a = -q * q / (HBAR_C_GEV_FM * HBAR_C_GEV_FM);
            let e = (a * radius * radius).exp();
            let model = baseline * (1.0 + lambda * e);
            let resid = c - model;
            let grad = [
                1.0 + lambda * e,
                baseline * e,
                baseline * lambda * e * a * 2.0 * radius,
            ];
            for r_ in 0..3 {
                for c_ in r_..3 {
                    jtj[r_][c_] += w * grad[r_] * grad[c_];
                }
                jtr[r_] += w * grad[r_] * resid;
            }
        }
        for r_ in 0..3 {
            for c_ in 0..r_ {
                jtj[r_][c_] = jtj[c_][r_];
            }
        }
        let delta = match solve3(&jtj, &jtr) {
            Some(d) => d,
            None => break,
        };
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..25 {
            let nn = baseline + step * delta[0];
            let nl = lambda + step * delta[1];
            let nr = radius + step * delta[2];
            if nn > 0.0 && nl > 0.0 && nr > 0.0 {
                let next = chi2(nn, nl, nr);
                if next < best {
                    baseline = nn;
                    lambda = nl;
                    radius = nr;
                    if (best - next) <= 1e-12 * best.max(1.0) {
                        converged = true;
                    }
                    best = next;
                    improved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !improved {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Some(GaussianFit {
        lambda,
        radius_fm: radius,
        baseline,
        intercept: 1.0 + lambda,
        converged,
    })
}

fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    if det.abs() < 1e-30 {
        return None;
    }
    let inv_det = 1.0 / det;
    let mut x = [0.0f64; 3];
    for k in 0..3 {
        let mut m = *a;
        for r in 0..3 {
            m[r][k] = b[r];
        }
        let dk = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        x[k] = dk * inv_det;
    }
    Some(x)
}

/// Default pooled-C window for the intercept diagnostic (GeV).
pub(crate) const C0_WINDOW_GEV: f64 = 0.01;

/// Same-event/mixed-event correlation analysis of a source.
pub fn correlation(
    src: &SourceModel,
    n_events: usize,
    seed: u64,
    binning: &Binning,
) -> Result<CorrelationReport> {
    if n_events < 100 {
        return Err(Error::Config("correlation needs n_events >= 100".into()));
    }
    src.validate()?;
    let events = par::map_indexed(n_events, |i| sample_event(src, seed, i as u64));
    let histogram = fill_histogram(&events, binning)?;
    let fit = match src.geometry {
        SourceGeometry::Gaussian { .. } => fit_gaussian(&histogram),
        SourceGeometry::TwoHalves { .. } => None,
    };
    let c0_pooled = histogram.pooled_c(C0_WINDOW_GEV);
    let tail_c = pooled_above(&histogram, 0.75 * binning.q_max_gev);
    Ok(CorrelationReport {
        histogram,
        fit,
        c0_pooled,
        c0_window_gev: C0_WINDOW_GEV,
        tail_c,
        n_events,
        seed,
    })
}

/// Pooled normalized C over bins with q_lo >= threshold.
pub(crate) fn pooled_above(hist: &CorrelationHistogram, threshold: f64) -> Option<(f64, f64)> {
    let mut same = 0.0;
    let mut same_sq = 0.0;
    let mut mixed = 0u64;
    for b in 0..hist.binning.n_bins {
        if hist.binning.lo(b) >= threshold - 1e-12 {
            same += hist.same[b];
            same_sq += hist.same_sq[b];
            mixed += hist.mixed[b];
        }
    }
    if mixed == 0 || same <= 0.0 {
        return None;
    }
    let scale = hist.mixed_total as f64 / hist.same_total;
    let c = (same / mixed as f64) * scale / hist.normalization;
    let rel = (same_sq / (same * same) + 1.0 / mixed as f64).sqrt();
    Some((c, c * rel))
}

/// How the surviving sample of the absorber comparison is produced. Both
/// modes keep exactly the pairs with no lower-half particle; they differ
/// only in which pipeline stage drops the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AbsorberMode {
    /// Particles from the lower half are absorbed in flight: any pair
    /// containing one is removed from the recorded sample.
    AbsorberOn,
    /// Only pairs born entirely in the upper half are selected upstream.
    SelectUpperAtBirth,
}

/// Correlation intercepts with the absorber off and on.
#[derive(Debug, Clone, Serialize)]
pub struct AbsorberReport {
    pub mode: AbsorberMode,
    /// Mixed-origin (one upper, one lower) sample: the enhancement carries
    /// the spot-separation scale and sits inside the histogram window.
    pub c0_off: Option<(f64, f64)>,
    /// Surviving upper-upper sample: its coherence scale lies beyond the
    /// window, so the in-window correlation is flat.
    pub c0_on: Option<(f64, f64)>,
    pub hist_off: CorrelationHistogram,
    pub hist_on: CorrelationHistogram,
    pub n_events: usize,
    pub seed: u64,
}

/// Compare the mixed-origin ensemble (absorber off) against the surviving
/// upper-upper ensemble (absorber on).
pub fn absorber_gedanken(
    src: &SourceModel,
    mode: AbsorberMode,
    n_events: usize,
    seed: u64,
    binning: &Binning,
) -> Result<AbsorberReport> {
    if !matches!(src.geometry, SourceGeometry::TwoHalves { .. }) {
        return Err(Error::Config(
            "absorber comparison needs a two-halves source".into(),
        ));
    }
    if n_events < 100 {
        return Err(Error::Config("absorber_gedanken needs n_events >= 100".into()));
    }
    src.validate()?;
    let events = par::map_indexed(n_events, |i| sample_event(src, seed, i as u64));

    let off: Vec<_> = events
        .iter()
        .filter(|e| e.origins[0] != e.origins[1])
        .cloned()
        .collect();
    let on: Vec<_> = match mode {
        AbsorberMode::AbsorberOn => events
            .iter()
            .filter(|e| !e.origins.contains(&Origin::Lower))
            .cloned()
            .collect(),
        AbsorberMode::SelectUpperAtBirth => events
            .iter()
            .filter(|e| e.origins.iter().all(|o| *o == Origin::Upper))
            .cloned()
            .collect(),
    };
    if off.len() < 50 || on.len() < 50 {
        return Err(Error::Config(
            "too few surviving events for the absorber comparison".into(),
        ));
    }
    let hist_off = fill_histogram(&off, binning)?;
    let hist_on = fill_histogram(&on, binning)?;
    Ok(AbsorberReport {
        mode,
        c0_off: hist_off.pooled_c(C0_WINDOW_GEV),
        c0_on: hist_on.pooled_c(C0_WINDOW_GEV),
        hist_off,
        hist_on,
        n_events,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_src() -> SourceModel {
        SourceModel {
            geometry: SourceGeometry::Gaussian { radius_fm: 5.0 },
            momentum_scale_gev: 0.05,
        }
    }

    #[test]
    fn correlation_is_deterministic() {
        let binning = Binning::default();
        let a = correlation(&gaussian_src(), 2000, 5, &binning).unwrap();
        let b = correlation(&gaussian_src(), 2000, 5, &binning).unwrap();
        assert_eq!(a.histogram.same, b.histogram.same);
        assert_eq!(a.histogram.mixed, b.histogram.mixed);
        assert_eq!(a.histogram.to_csv(), b.histogram.to_csv());
    }

    #[test]
    fn rejects_tiny_samples_and_wrong_geometry() {
        assert!(correlation(&gaussian_src(), 10, 1, &Binning::default()).is_err());
        assert!(absorber_gedanken(
            &gaussian_src(),
            AbsorberMode::AbsorberOn,
            1000,
            1,
            &Binning::default()
        )
        .is_err());
    }

    #[test]
    fn csv_shape() {
        let report = correlation(&gaussian_src(), 500, 2, &Binning { n_bins: 10, q_max_gev: 0.4 })
            .unwrap();
        let csv = report.histogram.to_csv();
        let lines: Vec<&str> = csv.trim().lines().collect();
        assert_eq!(lines.len(), 11);
        assert_eq!(lines[0], "q_lo,q_hi,same,mixed,C,C_err");
    }

    #[test]
    fn mixed_fourmomentum_helpers() {
        let p = FourMomentum::on_shell([0.1, 0.0, 0.0], crate::boseeinstein::PION_MASS_GEV);
        assert!((p.mass_sq() - crate::boseeinstein::PION_MASS_GEV.powi(2)).abs() < 1e-12);
    }
}
