use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::bank::FilterBank;
use super::lut::PermutationLut;
use crate::error::{Error, Result};

const KEY_MAGIC: &[u8; 4] = b"HHK1";

/// Private probe pairs plus the public time scales of the bank that reads
/// them. `pairs[c]` is the `(f Hz, A)` probe whose code is `B[c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CipherKey {
    pub taus: Vec<f64>,
    pub pairs: Vec<(f64, f64)>,
}

impl CipherKey {
    /// The default bank with this key's time scales.
    pub fn bank(&self) -> Result<FilterBank> {
        FilterBank::with_taus(self.taus.clone())
    }

    /// Codes of every private pair under `bank`, in key order.
    pub fn codes(&self, bank: &FilterBank) -> Result<Vec<u8>> {
        self.pairs
            .iter()
            .map(|&(f, a)| bank.response(f, a))
            .collect()
    }

    /// Copy with independent `N(0, sigma)` noise added to every `f` and `A`.
    pub fn perturbed<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Result<CipherKey> {
        let noise = Normal::new(0.0, sigma)
            .map_err(|e| Error::Usage(format!("perturbation sigma {sigma}: {e}")))?;
        Ok(CipherKey {
            taus: self.taus.clone(),
            pairs: self
                .pairs
                .iter()
                .map(|&(f, a)| (f + noise.sample(rng), a + noise.sample(rng)))
                .collect(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + 8 * self.taus.len() + 16 * self.pairs.len());
        out.extend_from_slice(KEY_MAGIC);
        out.push(self.taus.len() as u8);
        for t in &self.taus {
            out.extend_from_slice(&t.to_le_bytes());
        }
        for (f, a) in &self.pairs {
            out.extend_from_slice(&f.to_le_bytes());
            out.extend_from_slice(&a.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 5 || &bytes[..4] != KEY_MAGIC {
            return Err(Error::Format("not an HHK1 key file".into()));
        }
        let n = bytes[4] as usize;
        if !(1..=8).contains(&n) {
            return Err(Error::Format(format!("key declares {n} neurons")));
        }
        let expected = 5 + 8 * n + 16 * (1 << n);
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "key file has {} bytes, expected {expected} for {n} neurons",
                bytes.len()
            )));
        }
        let mut words = bytes[5..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let taus: Vec<f64> = words.by_ref().take(n).collect();
        let mut pairs = Vec::with_capacity(1 << n);
        while let (Some(f), Some(a)) = (words.next(), words.next()) {
            pairs.push((f, a));
        }
        Ok(CipherKey { taus, pairs })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Search region and budget for [`keygen`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KeygenConfig {
    /// Frequencies are drawn log-uniformly from this range.
    pub freq_hz: (f64, f64),
    /// Amplitudes are drawn uniformly from this range.
    pub amplitude: (f64, f64),
    /// Maximum number of random probes.
    pub budget: usize,
    /// Move each key point onto code boundaries after coverage.
    pub refine: bool,
}

impl Default for KeygenConfig {
    fn default() -> Self {
        KeygenConfig {
            freq_hz: (5.0, 300.0),
            amplitude: (3.0, 30.0),
            budget: 40_000,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KeygenStats {
    pub probes: usize,
    /// Key points placed where two boundaries meet.
    pub corners: usize,
    /// Key points placed on a single boundary.
    pub edges: usize,
}

#[derive(Debug, Clone)]
pub struct GeneratedKey {
    pub key: CipherKey,
    pub lut: PermutationLut,
    pub stats: KeygenStats,
}

/// Random search of the f-A plane until every code of the bank has a
/// representative, then a random ordering of the representatives.
pub fn keygen<R: Rng + ?Sized>(
    bank: &FilterBank,
    config: &KeygenConfig,
    rng: &mut R,
) -> Result<GeneratedKey> {
    bank.validate()?;
    let (f_lo, f_hi) = config.freq_hz;
    let (a_lo, a_hi) = config.amplitude;
    if !(f_lo > 0.0 && f_hi > f_lo && a_hi > a_lo && a_lo >= 0.0) {
        return Err(Error::Config(format!(
            "keygen ranges must be ordered and positive: f {f_lo}..{f_hi}, A {a_lo}..{a_hi}"
        )));
    }
    let n_codes = 1usize << bank.len();
    let mut found: Vec<Option<(f64, f64)>> = vec![None; n_codes];
    let mut covered = 0;
    let mut stats = KeygenStats::default();
    while covered < n_codes {
        if stats.probes == config.budget {
            return Err(Error::Keygen(format!(
                "covered {covered} of {n_codes} codes after {} probes; \
                 re-parameterize the bank (spread the time scales) or widen the search range",
                stats.probes
            )));
        }
        let f = (f_lo.ln() + rng.random::<f64>() * (f_hi / f_lo).ln()).exp();
        let a = a_lo + rng.random::<f64>() * (a_hi - a_lo);
        stats.probes += 1;
        let slot = &mut found[bank.response(f, a)? as usize];
        if slot.is_none() {
            *slot = Some((f, a));
            covered += 1;
        }
    }
    let mut points: Vec<(u8, (f64, f64))> = found
        .into_iter()
        .enumerate()
        .map(|(c, p)| (c as u8, p.expect("all codes covered")))
        .collect();
    if config.refine {
        for (code, p) in points.iter_mut() {
            let (q, kind) = refine(bank, *code, *p, config)?;
            match kind {
                Placement::Corner => stats.corners += 1,
                Placement::Edge => stats.edges += 1,
                Placement::Interior => {}
            }
            *p = q;
        }
    }
    points.shuffle(rng);
    let codes: Vec<u8> = points.iter().map(|(c, _)| *c).collect();
    let key = CipherKey {
        taus: bank.taus.clone(),
        pairs: points.into_iter().map(|(_, p)| p).collect(),
    };
    let lut = if bank.len() == 8 {
        PermutationLut::from_codes(&codes)?
    } else {
        PermutationLut::identity()
    };
    log::info!(
        "keygen: {} probes, {} corner and {} edge placements",
        stats.probes,
        stats.corners,
        stats.edges
    );
    Ok(GeneratedKey { key, lut, stats })
}

enum Placement {
    Corner,
    Edge,
    Interior,
}

type Point = (f64, f64);

fn bit(code: u8, j: usize) -> bool {
    (code >> j) & 1 == 1
}

/// Last point on the segment from `inside` towards `outside` for which
/// `pred` still holds, to floating-point resolution, and its neighbour.
fn bisect_segment(
    inside: Point,
    outside: Point,
    mut pred: impl FnMut(Point) -> Result<bool>,
) -> Result<(Point, Point)> {
    let (mut i, mut o) = (inside, outside);
    for _ in 0..200 {
        let m = (0.5 * (i.0 + o.0), 0.5 * (i.1 + o.1));
        if m == i || m == o {
            break;
        }
        if pred(m)? {
            i = m;
        } else {
            o = m;
        }
    }
    Ok((i, o))
}

/// First amplitude along `direction` from `a0`, in doubling steps, whose
/// code differs from `code`.
fn find_exit(
    bank: &FilterBank,
    code: u8,
    (f0, a0): Point,
    direction: f64,
    limit: (f64, f64),
) -> Result<Option<f64>> {
    let mut step = 0.01 * a0.max(1.0);
    loop {
        let a = a0 + direction * step;
        if a < limit.0 || a > limit.1 {
            return Ok(None);
        }
        if bank.response(f0, a)? != code {
            return Ok(Some(a));
        }
        step *= 2.0;
    }
}

/// Amplitude next to the nearest boundary between `p0` and `(f0, a_out)`,
/// still carrying `code`, and the neuron whose bit flips across it.
fn edge(bank: &FilterBank, code: u8, p0: Point, a_out: f64) -> Result<Option<(f64, usize)>> {
    let f0 = p0.0;
    let mut out = a_out;
    for _ in 0..32 {
        let j = (bank.response(f0, out)? ^ code).trailing_zeros() as usize;
        let cj = bit(code, j);
        let ((_, a_in), _) =
            bisect_segment(p0, (f0, out), |p| Ok(bank.neuron_bit(j, p.0, p.1)? == cj))?;
        if bank.response(f0, a_in)? == code {
            return Ok(Some((a_in, j)));
        }
        // another neuron switches first; it is now the nearer boundary
        out = a_in;
    }
    Ok(None)
}

/// Adjacent amplitudes `(a_want, a_other)` around the point where bit `j`
/// switches near `a_guess` at frequency `f`; `a_want` carries bit `want`.
fn track_boundary(
    bank: &FilterBank,
    j: usize,
    want: bool,
    f: f64,
    a_guess: f64,
) -> Result<Option<(f64, f64)>> {
    let mut w = 1e-9 * a_guess.abs().max(1.0);
    while w < 0.1 * a_guess.abs().max(1.0) {
        let (lo, hi) = (a_guess - w, a_guess + w);
        let b_lo = bank.neuron_bit(j, f, lo)?;
        if b_lo != bank.neuron_bit(j, f, hi)? {
            let (inside, outside) = if b_lo == want { (lo, hi) } else { (hi, lo) };
            let ((_, a), (_, b)) = bisect_segment((f, inside), (f, outside), |p| {
                Ok(bank.neuron_bit(j, p.0, p.1)? == want)
            })?;
            return Ok(Some((a, b)));
        }
        w *= 4.0;
    }
    Ok(None)
}

/// Moves a point of code `code` next to the code boundaries around it,
/// preferring a corner where the boundaries of two neurons meet.
fn refine(
    bank: &FilterBank,
    code: u8,
    p0: Point,
    config: &KeygenConfig,
) -> Result<(Point, Placement)> {
    let limit = (0.5 * config.amplitude.0, 2.0 * config.amplitude.1);
    let mut edges = Vec::new();
    for direction in [-1.0, 1.0] {
        if let Some(out) = find_exit(bank, code, p0, direction, limit)? {
            if let Some(e) = edge(bank, code, p0, out)? {
                edges.push(e);
            }
        }
    }
    edges.sort_by(|x, y| (x.0 - p0.1).abs().total_cmp(&(y.0 - p0.1).abs()));
    let Some(&(a_edge, _)) = edges.first() else {
        return Ok((p0, Placement::Interior));
    };
    for &(a_b, j) in &edges {
        for direction in [1.0, -1.0] {
            if let Some(p) = corner_along(bank, code, j, (p0.0, a_b), direction, config)? {
                return Ok((p, Placement::Corner));
            }
        }
    }
    Ok(((p0.0, a_edge), Placement::Edge))
}

/// Walks along the boundary of neuron `j` from `start` until another
/// neuron's boundary cuts it, then solves for the crossing.
fn corner_along(
    bank: &FilterBank,
    code: u8,
    j: usize,
    start: Point,
    direction: f64,
    config: &KeygenConfig,
) -> Result<Option<Point>> {
    let cj = bit(code, j);
    let (f0, _) = start;
    let mut path = vec![start];
    let mut crossing = None;
    for i in 0..8 {
        let f = f0 * (1.0 + direction * 0.002 * 2f64.powi(i));
        if f < config.freq_hz.0 || f > config.freq_hz.1 {
            return Ok(None);
        }
        let guess = match path.as_slice() {
            [.., (fp, ap), (fc, ac)] => ac + (ac - ap) / (fc - fp) * (f - fc),
            [.., (_, ac)] => *ac,
            [] => unreachable!(),
        };
        let Some((a_in, _)) = track_boundary(bank, j, cj, f, guess)? else {
            return Ok(None);
        };
        let seen = bank.response(f, a_in)?;
        if seen != code {
            crossing = Some(((f, a_in), (seen ^ code).trailing_zeros() as usize));
            break;
        }
        path.push((f, a_in));
    }
    let Some(((f_out, a_out), m)) = crossing else {
        return Ok(None);
    };
    let (f_in, a_in) = *path.last().expect("path starts at the edge point");
    let cm = bit(code, m);

    // signed gap between the two boundaries, oriented so the inside is positive
    let gap = |f: f64, aj: f64, am: f64| -> Result<Option<(f64, f64, f64)>> {
        let Some((xj, _)) = track_boundary(bank, j, cj, f, aj)? else {
            return Ok(None);
        };
        let Some((xm, _)) = track_boundary(bank, m, cm, f, am)? else {
            return Ok(None);
        };
        let inside = bank.neuron_bit(m, f, xj)? == cm;
        let d = (xm - xj).abs();
        Ok(Some((if inside { d } else { -d }, xj, xm)))
    };
    let Some((mut d_in, mut xj_in, mut xm_in)) = gap(f_in, a_in, a_in)? else {
        return Ok(None);
    };
    let Some((mut d_out, mut xj_out, mut xm_out)) = gap(f_out, a_out, a_out)? else {
        return Ok(None);
    };
    let (mut lo, mut hi) = (f_in, f_out);
    if !(d_in > 0.0 && d_out <= 0.0) {
        return Ok(None);
    }
    // Illinois variant of regula falsi
    let mut side = 0;
    for _ in 0..60 {
        let tol = 1e-13 * xj_in.abs().max(1.0);
        if d_in < tol {
            break;
        }
        let f = lo + (hi - lo) * d_in / (d_in - d_out);
        if !(f.min(lo.min(hi)) == lo.min(hi) && f.max(lo.max(hi)) == lo.max(hi)) || f == lo || f == hi
        {
            break;
        }
        let w = (f - lo) / (hi - lo);
        let Some((d, xj, xm)) = gap(f, xj_in + w * (xj_out - xj_in), xm_in + w * (xm_out - xm_in))?
        else {
            return Ok(None);
        };
        if d > 0.0 {
            (lo, d_in, xj_in, xm_in) = (f, d, xj, xm);
            if side == 1 {
                d_out *= 0.5;
            }
            side = 1;
        } else {
            (hi, d_out, xj_out, xm_out) = (f, d, xj, xm);
            if side == -1 {
                d_in *= 0.5;
            }
            side = -1;
        }
    }
    let tol = 1e-13 * xj_in.abs().max(1.0);
    let p = (lo, xj_in);
    if d_in.abs() < tol && bank.response(p.0, p.1)? == code {
        Ok(Some(p))
    } else {
        Ok(None)
    }
}
