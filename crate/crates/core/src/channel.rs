//! Fading-channel generation.
//!
//! Gains are unit-variance circularly-symmetric complex Gaussian scalars,
//! re-drawn until their magnitude lies inside the configured bounds, so the
//! nonzero-minimum / finite-maximum assumption holds for every sample.
//! Slots are 1-based throughout, matching the usual time indexing.

use crate::error::{Error, Result};
use crate::Cx;
use nalgebra::{DMatrix, DVector, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use std::io::Write;

/// Default magnitude bounds: wide enough not to distort CN(0,1) statistics.
pub const DEFAULT_MAGNITUDE_BOUNDS: (f64, f64) = (1e-3, 1e3);

/// Per-scalar rejection retry cap; exceeding it signals pathological bounds.
pub const REJECTION_RETRY_CAP: usize = 1000;

/// Fading dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingModel {
    /// Independent gains every slot.
    IidFast,
    /// Gains constant within each coherence block, independent across blocks.
    Block { coherence_slots: usize },
}

/// Static description of the broadcast channel to draw from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingSpec {
    pub num_users: usize,
    pub num_tx_antennas: usize,
    pub model: FadingModel,
    /// (h_min, h_max) bounds for every |h|.
    pub magnitude_bounds: (f64, f64),
    pub seed: u64,
}

impl FadingSpec {
    /// Fast-fading channel for `num_users` users, K-1 transmit antennas.
    pub fn iid(num_users: usize, seed: u64) -> Self {
        FadingSpec {
            num_users,
            num_tx_antennas: num_users.saturating_sub(1),
            model: FadingModel::IidFast,
            magnitude_bounds: DEFAULT_MAGNITUDE_BOUNDS,
            seed,
        }
    }

    /// Block-fading channel with the given coherence time in slots.
    pub fn block(num_users: usize, coherence_slots: usize, seed: u64) -> Self {
        FadingSpec {
            model: FadingModel::Block { coherence_slots },
            ..Self::iid(num_users, seed)
        }
    }

    /// Same spec with a different antenna count (for least-squares setups).
    pub fn with_antennas(mut self, num_tx_antennas: usize) -> Self {
        self.num_tx_antennas = num_tx_antennas;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_users < 3 {
            return Err(Error::InvalidSpec(format!(
                "need at least 3 users, got {}",
                self.num_users
            )));
        }
        if self.num_tx_antennas < 1 {
            return Err(Error::InvalidSpec("need at least one transmit antenna".into()));
        }
        let (lo, hi) = self.magnitude_bounds;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "magnitude bounds must satisfy 0 < h_min < h_max < inf, got ({lo}, {hi})"
            )));
        }
        if let FadingModel::Block { coherence_slots } = self.model {
            if coherence_slots < 1 {
                return Err(Error::InvalidSpec("coherence time must be >= 1 slot".into()));
            }
        }
        Ok(())
    }
}

/// 1-based coherence-block index of a slot: ceil(slot / T_c) under block
/// fading, the slot itself under fast fading.
pub fn coherence_block(spec: &FadingSpec, slot: usize) -> usize {
    assert!(slot >= 1, "slots are 1-based");
    match spec.model {
        FadingModel::IidFast => slot,
        FadingModel::Block { coherence_slots } => (slot - 1) / coherence_slots + 1,
    }
}

/// Channel gains indexed by (slot, user, antenna), all 1-based.
#[derive(Debug, Clone)]
pub struct ChannelTensor {
    pub spec: FadingSpec,
    pub num_slots: usize,
    gains: Vec<Cx>,
}

impl ChannelTensor {
    fn index(&self, slot: usize, user: usize, antenna: usize) -> usize {
        debug_assert!(
            (1..=self.num_slots).contains(&slot)
                && (1..=self.spec.num_users).contains(&user)
                && (1..=self.spec.num_tx_antennas).contains(&antenna)
        );
        ((slot - 1) * self.spec.num_users + (user - 1)) * self.spec.num_tx_antennas
            + (antenna - 1)
    }

    pub fn gain(&self, slot: usize, user: usize, antenna: usize) -> Cx {
        self.gains[self.index(slot, user, antenna)]
    }

    /// Channel vector h^(k)[n] of one user at one slot, as a column.
    pub fn vector(&self, slot: usize, user: usize) -> DVector<Cx> {
        DVector::from_fn(self.spec.num_tx_antennas, |m, _| self.gain(slot, user, m + 1))
    }

    /// Channel row h^(k)T[n].
    pub fn row(&self, slot: usize, user: usize) -> RowDVector<Cx> {
        RowDVector::from_fn(self.spec.num_tx_antennas, |_, m| self.gain(slot, user, m + 1))
    }

    /// Stack of all users' rows except `excluded_user` at `slot`
    /// ((K-1) x N_t), in increasing user order.
    pub fn stack_excluding(&self, slot: usize, excluded_user: usize) -> DMatrix<Cx> {
        let k = self.spec.num_users;
        let users: Vec<usize> = (1..=k).filter(|&u| u != excluded_user).collect();
        DMatrix::from_fn(users.len(), self.spec.num_tx_antennas, |i, m| {
            self.gain(slot, users[i], m + 1)
        })
    }

    /// New tensor holding only the given slots, renumbered 1..len.
    ///
    /// The result is tagged fast-fading; callers pick slots from distinct
    /// coherence blocks when independence matters.
    pub fn subtensor(&self, slots: &[usize]) -> ChannelTensor {
        let spec = FadingSpec {
            model: FadingModel::IidFast,
            ..self.spec
        };
        let mut gains =
            Vec::with_capacity(slots.len() * spec.num_users * spec.num_tx_antennas);
        for &slot in slots {
            for user in 1..=spec.num_users {
                for ant in 1..=spec.num_tx_antennas {
                    gains.push(self.gain(slot, user, ant));
                }
            }
        }
        ChannelTensor {
            spec,
            num_slots: slots.len(),
            gains,
        }
    }

    /// Dump as CSV records `slot,user,antenna,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "slot,user,antenna,re,im")?;
        for slot in 1..=self.num_slots {
            for user in 1..=self.spec.num_users {
                for ant in 1..=self.spec.num_tx_antennas {
                    let g = self.gain(slot, user, ant);
                    writeln!(out, "{},{},{},{},{}", slot, user, ant, g.re, g.im)?;
                }
            }
        }
        Ok(())
    }
}

fn draw_bounded(rng: &mut ChaCha12Rng, bounds: (f64, f64)) -> Result<Cx> {
    let sigma = std::f64::consts::FRAC_1_SQRT_2; // per-component std of CN(0,1)
    for _ in 0..REJECTION_RETRY_CAP {
        let re: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
        let im: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
        let g = Cx::new(re, im);
        let mag = g.norm();
        if mag >= bounds.0 && mag <= bounds.1 {
            return Ok(g);
        }
    }
    Err(Error::RejectionCapExceeded {
        cap: REJECTION_RETRY_CAP,
    })
}

/// Draw a channel realization. Deterministic for fixed (spec.seed, stream):
/// distinct streams give independent tensors, so concurrent trial workers
/// each use their own stream id.
pub fn sample_channel(spec: &FadingSpec, num_slots: usize, stream: u64) -> Result<ChannelTensor> {
    spec.validate()?;
    if num_slots < 1 {
        return Err(Error::InvalidSpec("need at least one slot".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);

    let k = spec.num_users;
    let nt = spec.num_tx_antennas;
    let mut gains = vec![Cx::new(0.0, 0.0); num_slots * k * nt];
    let idx = |slot: usize, user: usize, ant: usize| {
        ((slot - 1) * k + (user - 1)) * nt + (ant - 1)
    };
    match spec.model {
        FadingModel::IidFast => {
            for slot in 1..=num_slots {
                for user in 1..=k {
                    for ant in 1..=nt {
                        gains[idx(slot, user, ant)] = draw_bounded(&mut rng, spec.magnitude_bounds)?;
                    }
                }
            }
        }
        FadingModel::Block { coherence_slots } => {
            let num_blocks = (num_slots - 1) / coherence_slots + 1;
            for block in 1..=num_blocks {
                let first = (block - 1) * coherence_slots + 1;
                let last = (block * coherence_slots).min(num_slots);
                for user in 1..=k {
                    for ant in 1..=nt {
                        let g = draw_bounded(&mut rng, spec.magnitude_bounds)?;
                        for slot in first..=last {
                            gains[idx(slot, user, ant)] = g;
                        }
                    }
                }
            }
        }
    }
    Ok(ChannelTensor {
        spec: *spec,
        num_slots,
        gains,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions_and_bounds() {
        let spec = FadingSpec::iid(3, 11);
        let h = sample_channel(&spec, 3, 0).unwrap();
        assert_eq!(h.num_slots, 3);
        assert_eq!(h.spec.num_tx_antennas, 2);
        for slot in 1..=3 {
            for user in 1..=3 {
                for ant in 1..=2 {
                    let m = h.gain(slot, user, ant).norm();
                    assert!(m >= 1e-3 && m <= 1e3);
                }
            }
        }
    }

    #[test]
    fn block_model_constancy() {
        let spec = FadingSpec::block(3, 3, 5);
        let h = sample_channel(&spec, 6, 0).unwrap();
        for user in 1..=3 {
            for ant in 1..=2 {
                assert_eq!(h.gain(1, user, ant), h.gain(2, user, ant));
                assert_eq!(h.gain(2, user, ant), h.gain(3, user, ant));
                assert_eq!(h.gain(4, user, ant), h.gain(5, user, ant));
                assert_eq!(h.gain(5, user, ant), h.gain(6, user, ant));
                assert_ne!(h.gain(3, user, ant), h.gain(4, user, ant));
            }
        }
    }

    #[test]
    fn deterministic_per_seed_and_stream() {
        let spec = FadingSpec::iid(4, 99);
        let a = sample_channel(&spec, 5, 7).unwrap();
        let b = sample_channel(&spec, 5, 7).unwrap();
        for slot in 1..=5 {
            for user in 1..=4 {
                for ant in 1..=3 {
                    assert_eq!(a.gain(slot, user, ant), b.gain(slot, user, ant));
                }
            }
        }
        let c = sample_channel(&spec, 5, 8).unwrap();
        assert_ne!(a.gain(1, 1, 1), c.gain(1, 1, 1));
    }

    #[test]
    fn coherence_block_indexing() {
        let block = FadingSpec::block(3, 3, 0);
        assert_eq!(coherence_block(&block, 3), 1);
        assert_eq!(coherence_block(&block, 4), 2);
        let fast = FadingSpec::iid(3, 0);
        assert_eq!(coherence_block(&fast, 7), 7);
    }

    #[test]
    fn tight_bounds_exhaust_retries() {
        let mut spec = FadingSpec::iid(3, 1);
        spec.magnitude_bounds = (0.999_999, 1.0);
        let err = sample_channel(&spec, 1, 0).unwrap_err();
        assert!(matches!(err, Error::RejectionCapExceeded { .. }));
    }

    #[test]
    fn truncated_statistics_match_oracle() {
        // Truncation oracle: for CN(0,1), |h|^2 is Exp(1), so conditioning on
        // a <= |h| <= b gives E|h|^2 = ((a^2+1)e^{-a^2} - (b^2+1)e^{-b^2}) / (e^{-a^2} - e^{-b^2}).
        let (a, b) = DEFAULT_MAGNITUDE_BOUNDS;
        let (a2, b2) = (a * a, b * b);
        let mass = (-a2).exp() - (-b2).exp();
        let oracle = ((a2 + 1.0) * (-a2).exp() - (b2 + 1.0) * (-b2).exp()) / mass;

        let spec = FadingSpec::iid(3, 2024);
        let h = sample_channel(&spec, 20_000, 3).unwrap();
        let mut sum = Cx::new(0.0, 0.0);
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for slot in 1..=h.num_slots {
            for user in 1..=3 {
                for ant in 1..=2 {
                    let g = h.gain(slot, user, ant);
                    sum += g;
                    sum_sq += g.norm_sqr();
                    count += 1;
                }
            }
        }
        assert!(count >= 100_000);
        let n = count as f64;
        let mean = sum / Cx::new(n, 0.0);
        // Each real component has variance ~1/2; 3 sigma of the sample mean.
        let three_sigma = 3.0 * (0.5 / n).sqrt();
        assert!(mean.re.abs() <= three_sigma, "mean.re = {}", mean.re);
        assert!(mean.im.abs() <= three_sigma, "mean.im = {}", mean.im);
        let var = sum_sq / n - mean.norm_sqr();
        assert!(
            (var - oracle).abs() / oracle < 0.05,
            "var = {var}, oracle = {oracle}"
        );
    }

    #[test]
    fn csv_dump_format() {
        let spec = FadingSpec::iid(3, 4);
        let h = sample_channel(&spec, 1, 0).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "slot,user,antenna,re,im");
        let first = lines.next().unwrap();
        assert!(first.starts_with("1,1,1,"));
        assert_eq!(text.lines().count(), 1 + 3 * 2);
    }
}
