//! Space-time interference alignment: precoder construction, frame
//! transmission, and interference-cancelling decoding.
//!
//! Both schemes share the same shape: an unprecoded phase one imprints an
//! interference pattern on every receiver, then phase two re-creates that
//! exact pattern with beamformers built from joint current+outdated CSI, so
//! each receiver cancels interference by subtracting scaled phase-one
//! observations. The schemes differ in how long each phase lasts and which
//! slot serves as a user's reference:
//!
//! * `PointC`: one phase-one slot, K-1 phase-two slots, reference slot 1.
//! * `PointB`: K phase-one slots (one user each), K-2 phase-two slots,
//!   user k referenced to slot k.

use crate::channel::ChannelTensor;
use crate::error::{Error, Result};
use crate::linalg::{
    condition_number, fro_norm, singular_extremes, solve_square, COND_THRESHOLD,
};
use crate::Cx;
use nalgebra::{DMatrix, DVector, RowDVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::json;
use std::collections::HashMap;

/// STIA frame layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    PointB,
    PointC,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::PointB => "pointB",
            Scheme::PointC => "pointC",
        }
    }

    /// Frame length in slots.
    pub fn frame_len(&self, num_users: usize) -> usize {
        match self {
            Scheme::PointB => 2 * num_users - 2,
            Scheme::PointC => num_users,
        }
    }

    pub fn phase1_slots(&self, num_users: usize) -> Vec<usize> {
        match self {
            Scheme::PointB => (1..=num_users).collect(),
            Scheme::PointC => vec![1],
        }
    }

    pub fn phase2_slots(&self, num_users: usize) -> Vec<usize> {
        match self {
            Scheme::PointB => (num_users + 1..=2 * num_users - 2).collect(),
            Scheme::PointC => (2..=num_users).collect(),
        }
    }

    /// Phase-one slot whose interference pattern user `k` re-sees in phase two.
    pub fn ref_slot(&self, user: usize) -> usize {
        match self {
            Scheme::PointB => user,
            Scheme::PointC => 1,
        }
    }
}

/// How phase-two beamformers are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecoderRule {
    /// Exact inversion; needs N_t = K-1.
    Aligned,
    /// Least-squares fit; tolerates N_t < K-1 at the cost of residual
    /// interference.
    LeastSquares,
}

/// Beamformer satisfying the alignment condition
/// H_k^c[r] = H_k^c[n] V, where H_k^c stacks every user's row except k.
///
/// Errors with `IllConditioned` when the current stack is numerically
/// singular; callers resample the trial.
pub fn aligned_precoder(
    h: &ChannelTensor,
    user: usize,
    slot: usize,
    ref_slot: usize,
) -> Result<DMatrix<Cx>> {
    let k = h.spec.num_users;
    assert_eq!(
        h.spec.num_tx_antennas,
        k - 1,
        "exact alignment needs N_t = K-1"
    );
    let current = h.stack_excluding(slot, user);
    let reference = h.stack_excluding(ref_slot, user);
    solve_square(&current, &reference)
}

/// Least-squares beamformer minimizing ||H_k^c[r] - H_k^c[n] V||_F via the
/// normal equations; coincides with `aligned_precoder` when N_t = K-1.
pub fn ls_precoder(
    h: &ChannelTensor,
    user: usize,
    slot: usize,
    ref_slot: usize,
) -> Result<DMatrix<Cx>> {
    let nt = h.spec.num_tx_antennas;
    assert!(
        nt <= h.spec.num_users - 1,
        "least-squares alignment applies for N_t <= K-1"
    );
    let current = h.stack_excluding(slot, user);
    let reference = h.stack_excluding(ref_slot, user);
    let (smin, smax) = singular_extremes(&current);
    if smin <= smax / COND_THRESHOLD {
        return Err(Error::RankDeficient(format!(
            "channel stack for user {user} at slot {slot} lacks full column rank"
        )));
    }
    let gram = current.adjoint() * &current;
    let rhs = current.adjoint() * reference;
    solve_square(&gram, &rhs)
}

/// One STIA frame: per-slot, per-user beamformers plus the power scaling.
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    pub scheme: Scheme,
    pub rule: PrecoderRule,
    pub num_users: usize,
    pub num_tx_antennas: usize,
    pub frame_len: usize,
    pub phase1_slots: Vec<usize>,
    pub phase2_slots: Vec<usize>,
    /// Phase-two amplitude scale keeping every slot's instantaneous power
    /// within the budget.
    pub beta: f64,
    /// Per-symbol power p_s = P / (K (K-1)).
    pub symbol_power: f64,
    precoders: HashMap<(usize, usize), DMatrix<Cx>>,
}

impl PrecoderSet {
    pub fn ref_slot(&self, user: usize) -> usize {
        self.scheme.ref_slot(user)
    }

    /// Phase-two beamformer V^(k)[n].
    pub fn precoder(&self, user: usize, slot: usize) -> &DMatrix<Cx> {
        &self.precoders[&(user, slot)]
    }

    pub fn num_precoders(&self) -> usize {
        self.precoders.len()
    }

    /// Data symbols the frame delivers: N_t per user.
    pub fn symbols_delivered(&self) -> usize {
        self.num_users * self.num_tx_antennas
    }

    /// Expected transmit power in a phase-two slot,
    /// p_s beta^2 sum_k ||V^(k)[n]||_F^2.
    pub fn phase2_slot_power(&self, slot: usize) -> f64 {
        let total: f64 = (1..=self.num_users)
            .map(|k| fro_norm(self.precoder(k, slot)).powi(2))
            .sum();
        self.symbol_power * self.beta * self.beta * total
    }

    /// Structured debug dump: scheme, frame length, scaling, and every
    /// beamformer as row-major (re, im) pairs.
    pub fn to_json(&self) -> serde_json::Value {
        let mut entries = Vec::new();
        for &slot in &self.phase2_slots {
            for user in 1..=self.num_users {
                let v = self.precoder(user, slot);
                let rows: Vec<Vec<[f64; 2]>> = (0..v.nrows())
                    .map(|i| (0..v.ncols()).map(|j| [v[(i, j)].re, v[(i, j)].im]).collect())
                    .collect();
                entries.push(json!({ "slot": slot, "user": user, "matrix": rows }));
            }
        }
        json!({
            "scheme": self.scheme.name(),
            "T": self.frame_len,
            "beta": self.beta,
            "p_s": self.symbol_power,
            "entries": entries,
        })
    }
}

fn build_frame_with_rule(
    scheme: Scheme,
    rule: PrecoderRule,
    h: &ChannelTensor,
    total_power: f64,
) -> Result<PrecoderSet> {
    let k = h.spec.num_users;
    let nt = h.spec.num_tx_antennas;
    let frame_len = scheme.frame_len(k);
    if h.num_slots < frame_len {
        return Err(Error::InvalidSpec(format!(
            "frame needs {frame_len} slots, channel has {}",
            h.num_slots
        )));
    }
    if !(total_power > 0.0) {
        return Err(Error::InvalidSpec("transmit power must be positive".into()));
    }
    let phase2 = scheme.phase2_slots(k);
    let mut precoders = HashMap::new();
    for &slot in &phase2 {
        for user in 1..=k {
            let v = match rule {
                PrecoderRule::Aligned => aligned_precoder(h, user, slot, scheme.ref_slot(user))?,
                PrecoderRule::LeastSquares => ls_precoder(h, user, slot, scheme.ref_slot(user))?,
            };
            precoders.insert((user, slot), v);
        }
    }
    let symbol_power = total_power / (k * (k - 1)) as f64;
    let worst_phase2: f64 = phase2
        .iter()
        .map(|&slot| {
            (1..=k)
                .map(|user| fro_norm(&precoders[&(user, slot)]).powi(2))
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    let beta = (total_power / (symbol_power * worst_phase2)).sqrt();
    Ok(PrecoderSet {
        scheme,
        rule,
        num_users: k,
        num_tx_antennas: nt,
        frame_len,
        phase1_slots: scheme.phase1_slots(k),
        phase2_slots: phase2,
        beta,
        symbol_power,
        precoders,
    })
}

/// Build a frame with exactly aligned beamformers (N_t = K-1).
pub fn build_frame(scheme: Scheme, h: &ChannelTensor, total_power: f64) -> Result<PrecoderSet> {
    build_frame_with_rule(scheme, PrecoderRule::Aligned, h, total_power)
}

/// Build a point-C-shaped frame with least-squares beamformers; the only
/// frame kind available when N_t < K-1.
pub fn build_ls_frame(h: &ChannelTensor, total_power: f64) -> Result<PrecoderSet> {
    build_frame_with_rule(Scheme::PointC, PrecoderRule::LeastSquares, h, total_power)
}

/// Receiver-side linear combining over the stacked frame observations, with
/// the noise covariance the combining induces.
#[derive(Debug, Clone)]
pub struct CombiningPlan {
    pub user: usize,
    /// N_t x T combining matrix applied to the stacked observations.
    pub matrix: DMatrix<Cx>,
    /// Combined-noise covariance C C^H.
    pub noise_covariance: DMatrix<Cx>,
}

/// Combining plans for every user.
///
/// Point C: row for phase-two slot n is e_n - beta e_1 (beta compensates the
/// phase-two transmit scale so the phase-one interference cancels exactly).
/// Point B: row e_k picks user k's own phase-one slot, and each phase-two
/// row subtracts beta times the K-1 overheard phase-one slots.
pub fn combining_plan(scheme: Scheme, num_users: usize, beta: f64) -> Vec<CombiningPlan> {
    let k = num_users;
    let t = scheme.frame_len(k);
    let nt = k - 1;
    let b = Cx::new(beta, 0.0);
    (1..=k)
        .map(|user| {
            let mut c = DMatrix::<Cx>::zeros(nt, t);
            match scheme {
                Scheme::PointC => {
                    for (row, slot) in (2..=k).enumerate() {
                        c[(row, slot - 1)] = Cx::new(1.0, 0.0);
                        c[(row, 0)] = -b;
                    }
                }
                Scheme::PointB => {
                    c[(0, user - 1)] = Cx::new(1.0, 0.0);
                    for (row, slot) in (k + 1..=2 * k - 2).enumerate() {
                        c[(row + 1, slot - 1)] = Cx::new(1.0, 0.0);
                        for other in (1..=k).filter(|&u| u != user) {
                            c[(row + 1, other - 1)] = -b;
                        }
                    }
                }
            }
            let noise_covariance = &c * c.adjoint();
            CombiningPlan {
                user,
                matrix: c,
                noise_covariance,
            }
        })
        .collect()
}

/// Stacked received samples y^(k)[n], one length-T vector per user.
#[derive(Debug, Clone)]
pub struct Observations {
    per_user: Vec<DVector<Cx>>,
}

impl Observations {
    pub fn user(&self, user: usize) -> &DVector<Cx> {
        &self.per_user[user - 1]
    }
}

fn transmit_vector(frame: &PrecoderSet, slot: usize, symbols: &[DVector<Cx>]) -> DVector<Cx> {
    let k = frame.num_users;
    let nt = frame.num_tx_antennas;
    let root_ps = Cx::new(frame.symbol_power.sqrt(), 0.0);
    if frame.phase2_slots.contains(&slot) {
        let scale = root_ps * Cx::new(frame.beta, 0.0);
        let mut x = DVector::<Cx>::zeros(nt);
        for user in 1..=k {
            x += frame.precoder(user, slot) * &symbols[user - 1];
        }
        x * scale
    } else {
        match frame.scheme {
            Scheme::PointC => {
                let mut x = DVector::<Cx>::zeros(nt);
                for s in symbols {
                    x += s;
                }
                x * root_ps
            }
            Scheme::PointB => symbols[slot - 1].clone() * root_ps,
        }
    }
}

/// Run the frame over the channel: y^(k)[n] = h^(k)T[n] x[n] (+ z).
///
/// Symbol vectors are unit-average-power; the frame's sqrt(p_s) and beta
/// scaling is applied here. `noise` adds unit-variance CSCG samples.
pub fn transmit<R: Rng>(
    h: &ChannelTensor,
    frame: &PrecoderSet,
    symbols: &[DVector<Cx>],
    mut noise: Option<&mut R>,
) -> Observations {
    assert_eq!(symbols.len(), frame.num_users);
    for s in symbols {
        assert_eq!(s.len(), frame.num_tx_antennas);
    }
    let k = frame.num_users;
    let t = frame.frame_len;
    let mut per_user = vec![DVector::<Cx>::zeros(t); k];
    for slot in 1..=t {
        let x = transmit_vector(frame, slot, symbols);
        for user in 1..=k {
            let mut y = (h.row(slot, user) * &x)[(0, 0)];
            if let Some(rng) = noise.as_deref_mut() {
                y += draw_noise(rng);
            }
            per_user[user - 1][slot - 1] = y;
        }
    }
    Observations { per_user }
}

pub(crate) fn draw_noise<R: Rng>(rng: &mut R) -> Cx {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Cx::new(
        rng.sample::<f64, _>(StandardNormal) * s,
        rng.sample::<f64, _>(StandardNormal) * s,
    )
}

/// Unit-variance circularly-symmetric Gaussian symbol vectors, one per user.
pub fn random_symbols<R: Rng>(num_users: usize, len: usize, rng: &mut R) -> Vec<DVector<Cx>> {
    (0..num_users)
        .map(|_| DVector::from_fn(len, |_, _| draw_noise(rng)))
        .collect()
}

/// Per-slot response of user `observer`'s receive samples to the symbol
/// vector of user `symbol_user`, excluding the common sqrt(p_s) factor:
/// a T x N_t matrix G with y^(observer) = sqrt(p_s) sum_j G_j s^(j) (+ z).
pub fn symbol_response(
    h: &ChannelTensor,
    frame: &PrecoderSet,
    observer: usize,
    symbol_user: usize,
) -> DMatrix<Cx> {
    let t = frame.frame_len;
    let nt = frame.num_tx_antennas;
    let mut g = DMatrix::<Cx>::zeros(t, nt);
    for slot in 1..=t {
        let row: RowDVector<Cx> = if frame.phase2_slots.contains(&slot) {
            h.row(slot, observer) * frame.precoder(symbol_user, slot) * Cx::new(frame.beta, 0.0)
        } else {
            match frame.scheme {
                Scheme::PointC => h.row(slot, observer),
                Scheme::PointB if slot == symbol_user => h.row(slot, observer),
                Scheme::PointB => RowDVector::zeros(nt),
            }
        };
        g.row_mut(slot - 1).copy_from(&row);
    }
    g
}

/// Interference-free channel seen by one user after combining.
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    pub user: usize,
    /// N_t x N_t matrix mapping the user's symbols to combined observations
    /// (excluding the sqrt(p_s) factor).
    pub matrix: DMatrix<Cx>,
}

impl EffectiveChannel {
    pub fn smallest_singular_ratio(&self) -> f64 {
        let (smin, smax) = singular_extremes(&self.matrix);
        if smax == 0.0 {
            0.0
        } else {
            smin / smax
        }
    }
}

/// Effective channel of `user`: the combining plan applied to the user's
/// own-symbol response. For point C this is beta (h^(k)T[n] V^(k)[n] -
/// h^(k)T[1]) per phase-two slot; for point B, h^(k)T[k] followed by the
/// beta-scaled phase-two rows.
pub fn effective_channel(h: &ChannelTensor, frame: &PrecoderSet, user: usize) -> EffectiveChannel {
    let plan = &combining_plan(frame.scheme, frame.num_users, frame.beta)[user - 1];
    let g = symbol_response(h, frame, user, user);
    EffectiveChannel {
        user,
        matrix: &plan.matrix * g,
    }
}

/// Residual interference matrices C G_j for every j != user; identically
/// zero under exact alignment, nonzero for least-squares frames.
pub fn residual_interference(
    h: &ChannelTensor,
    frame: &PrecoderSet,
    user: usize,
) -> Vec<DMatrix<Cx>> {
    let plan = &combining_plan(frame.scheme, frame.num_users, frame.beta)[user - 1];
    (1..=frame.num_users)
        .filter(|&j| j != user)
        .map(|j| &plan.matrix * symbol_response(h, frame, user, j))
        .collect()
}

/// Interference-cancelling decode: H_eff^{-1} (C y) / sqrt(p_s).
/// Exact in the noiseless case.
pub fn decode(
    observations: &DVector<Cx>,
    plan: &CombiningPlan,
    eff: &EffectiveChannel,
    symbol_power: f64,
) -> Result<DVector<Cx>> {
    let combined = &plan.matrix * observations;
    let rhs = DMatrix::from_column_slice(combined.len(), 1, combined.as_slice());
    let solved = solve_square(&eff.matrix, &rhs).map_err(|_| Error::SingularEffectiveChannel {
        user: eff.user,
    })?;
    Ok(DVector::from_column_slice(solved.column(0).as_slice()) / Cx::new(symbol_power.sqrt(), 0.0))
}

/// Estimate one user's phase-two effective channel row from precoded pilots
/// sent over `pilots.len()` flat subcarriers, without feed-forward.
///
/// `observations[j]` is the received pilot sample on subcarrier j (common
/// power scale removed); by alignment it equals
/// h~^T t_j + (K-1) h^(k)T[ref] t_j, so subtracting the known prior-slot
/// term leaves a linear system in the effective row h~.
pub fn estimate_effective_channel_pilot(
    pilots: &[DVector<Cx>],
    prior_csi_row: &RowDVector<Cx>,
    observations: &[Cx],
    num_users: usize,
) -> Result<RowDVector<Cx>> {
    let nt = prior_csi_row.len();
    let bt = pilots.len();
    assert_eq!(observations.len(), bt);
    if bt < nt {
        return Err(Error::RankDeficient(format!(
            "{bt} pilot subcarriers cannot identify a length-{nt} effective channel"
        )));
    }
    let pilot_matrix = DMatrix::<Cx>::from_fn(bt, nt, |j, m| pilots[j][m]);
    let (smin, smax) = singular_extremes(&pilot_matrix);
    if smin <= smax / COND_THRESHOLD {
        return Err(Error::RankDeficient("pilot matrix is rank-deficient".into()));
    }
    let known = Cx::new((num_users - 1) as f64, 0.0);
    let rhs = DMatrix::from_fn(bt, 1, |j, _| {
        observations[j] - known * (prior_csi_row * &pilots[j])[(0, 0)]
    });
    let gram = pilot_matrix.adjoint() * &pilot_matrix;
    let solved = solve_square(&gram, &(pilot_matrix.adjoint() * rhs))?;
    Ok(RowDVector::from_fn(nt, |_, m| solved[(m, 0)]))
}

/// Relative alignment residual ||H_k^c[r] - H_k^c[n] V||_F / ||H_k^c[r]||_F.
pub fn alignment_residual(
    h: &ChannelTensor,
    user: usize,
    slot: usize,
    ref_slot: usize,
    v: &DMatrix<Cx>,
) -> f64 {
    let reference = h.stack_excluding(ref_slot, user);
    let current = h.stack_excluding(slot, user);
    fro_norm(&(&reference - current * v)) / fro_norm(&reference)
}

/// Largest condition number among the per-user channel stacks of a frame;
/// handy when deciding whether a trial should be resampled up front.
pub fn worst_stack_condition(h: &ChannelTensor, scheme: Scheme) -> f64 {
    let k = h.spec.num_users;
    scheme
        .phase2_slots(k)
        .iter()
        .flat_map(|&slot| (1..=k).map(move |user| (user, slot)))
        .map(|(user, slot)| condition_number(&h.stack_excluding(slot, user)))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channel, FadingSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn aligned_precoder_satisfies_condition() {
        let spec = FadingSpec::iid(3, 17);
        let h = sample_channel(&spec, 3, 0).unwrap();
        for user in 1..=3 {
            for slot in 2..=3 {
                let v = aligned_precoder(&h, user, slot, 1).unwrap();
                assert!(alignment_residual(&h, user, slot, 1, &v) <= 1e-9);
            }
        }
    }

    #[test]
    fn aligned_precoder_identity_within_block() {
        let spec = FadingSpec::block(3, 3, 21);
        let h = sample_channel(&spec, 3, 0).unwrap();
        let v = aligned_precoder(&h, 1, 2, 1).unwrap();
        let eye = DMatrix::<Cx>::identity(2, 2);
        assert!(fro_norm(&(v - eye)) < 1e-12);
    }

    #[test]
    fn aligned_precoder_rowwise_oracle_k4() {
        // Independent oracle: multiply back and compare row by row.
        let spec = FadingSpec::iid(4, 33);
        let h = sample_channel(&spec, 4, 0).unwrap();
        for user in 1..=4 {
            let v = aligned_precoder(&h, user, 3, 1).unwrap();
            let recovered = h.stack_excluding(3, user) * &v;
            let reference = h.stack_excluding(1, user);
            for i in 0..3 {
                let diff = recovered.row(i) - reference.row(i);
                let rel = diff.iter().map(|x| x.norm()).fold(0.0, f64::max)
                    / reference.row(i).iter().map(|x| x.norm()).fold(0.0, f64::max);
                assert!(rel <= 1e-9, "user {user} row {i}: {rel}");
            }
        }
    }

    #[test]
    fn ls_precoder_equals_aligned_when_square() {
        let spec = FadingSpec::iid(4, 5);
        let h = sample_channel(&spec, 4, 0).unwrap();
        let a = aligned_precoder(&h, 2, 3, 1).unwrap();
        let l = ls_precoder(&h, 2, 3, 1).unwrap();
        assert!(fro_norm(&(a - &l)) / fro_norm(&l) <= 1e-9);
    }

    #[test]
    fn ls_precoder_orthogonality_and_local_minimality() {
        // N_t = 2 with K = 4: overdetermined alignment.
        let spec = FadingSpec::iid(4, 7).with_antennas(2);
        let h = sample_channel(&spec, 4, 0).unwrap();
        let user = 1;
        let v = ls_precoder(&h, user, 2, 1).unwrap();
        let current = h.stack_excluding(2, user);
        let reference = h.stack_excluding(1, user);
        let err = &reference - &current * &v;
        // Least-squares orthogonality: A^H E = 0.
        let orth = current.adjoint() * &err;
        assert!(fro_norm(&orth) / fro_norm(&reference) <= 1e-8);
        // Local minimality against random perturbations.
        let base = fro_norm(&err);
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for _ in 0..100 {
            let delta =
                DMatrix::<Cx>::from_fn(2, 2, |_, _| draw_noise(&mut rng)) * Cx::new(1e-3, 0.0);
            let perturbed = fro_norm(&(&reference - &current * (&v + delta)));
            assert!(perturbed >= base);
        }
    }

    #[test]
    fn frame_metadata_point_c_k3() {
        let spec = FadingSpec::iid(3, 2);
        let h = sample_channel(&spec, 3, 0).unwrap();
        let f = build_frame(Scheme::PointC, &h, 10.0).unwrap();
        assert_eq!(f.frame_len, 3);
        assert_eq!(f.phase2_slots, vec![2, 3]);
        assert_eq!(f.num_precoders(), 6);
        assert_eq!(f.symbols_delivered(), 6);
        assert!((f.symbol_power - 10.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn frame_metadata_point_b_k3() {
        let spec = FadingSpec::iid(3, 2);
        let h = sample_channel(&spec, 4, 0).unwrap();
        let f = build_frame(Scheme::PointB, &h, 10.0).unwrap();
        assert_eq!(f.frame_len, 4);
        assert_eq!(f.phase2_slots, vec![4]);
        assert_eq!(f.ref_slot(2), 2);
        assert_eq!(f.symbols_delivered(), 6);
    }

    #[test]
    fn phase2_power_stays_within_budget() {
        let power = 25.0;
        for (scheme, slots) in [(Scheme::PointC, 4usize), (Scheme::PointB, 6)] {
            let spec = FadingSpec::iid(4, 13);
            let h = sample_channel(&spec, slots, 0).unwrap();
            let f = build_frame(scheme, &h, power).unwrap();
            let mut saturated = false;
            for &slot in &f.phase2_slots {
                let p = f.phase2_slot_power(slot);
                assert!(p <= power * (1.0 + 1e-12));
                if (p - power).abs() < 1e-9 {
                    saturated = true;
                }
            }
            assert!(saturated, "beta should make the worst slot hit the budget");
        }
    }

    #[test]
    fn combining_covariances_match_hand_results() {
        let plans = combining_plan(Scheme::PointC, 3, 1.0);
        // C = [[-1,1,0],[-1,0,1]] gives C C^H = [[2,1],[1,2]].
        let r = &plans[0].noise_covariance;
        assert!((r[(0, 0)].re - 2.0).abs() < 1e-12);
        assert!((r[(0, 1)].re - 1.0).abs() < 1e-12);
        assert!((r[(1, 0)].re - 1.0).abs() < 1e-12);
        assert!((r[(1, 1)].re - 2.0).abs() < 1e-12);

        let plans_b = combining_plan(Scheme::PointB, 3, 1.0);
        let rb = &plans_b[1].noise_covariance;
        assert!((rb[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!((rb[(1, 1)].re - 3.0).abs() < 1e-12);
        assert!(rb[(0, 1)].norm() < 1e-12);

        // beta -> 0 leaves plain per-slot noise on the phase-two rows.
        let tiny = combining_plan(Scheme::PointC, 3, 0.0);
        let rt = &tiny[0].noise_covariance;
        assert!((rt[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!(rt[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn receiver_sees_no_cross_user_symbols_after_combining() {
        let spec = FadingSpec::iid(3, 71);
        let h = sample_channel(&spec, 3, 0).unwrap();
        let f = build_frame(Scheme::PointC, &h, 6.0).unwrap();
        // Interference-only transmission: zero the desired user's symbols.
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for user in 1..=3 {
            let mut symbols = random_symbols(3, 2, &mut rng);
            symbols[user - 1] = DVector::zeros(2);
            let obs = transmit::<ChaCha12Rng>(&h, &f, &symbols, None);
            let plan = &combining_plan(f.scheme, 3, f.beta)[user - 1];
            let combined = &plan.matrix * obs.user(user);
            let input_norm = obs.user(user).norm();
            assert!(combined.norm() <= 1e-9 * input_norm.max(1.0));
        }
    }

    #[test]
    fn zero_symbols_give_zero_observations() {
        let spec = FadingSpec::iid(3, 8);
        let h = sample_channel(&spec, 3, 0).unwrap();
        let f = build_frame(Scheme::PointC, &h, 6.0).unwrap();
        let symbols = vec![DVector::<Cx>::zeros(2); 3];
        let obs = transmit::<ChaCha12Rng>(&h, &f, &symbols, None);
        for user in 1..=3 {
            assert!(obs.user(user).norm() == 0.0);
        }
    }

    #[test]
    fn noiseless_round_trip_both_schemes() {
        let mut rng = ChaCha12Rng::seed_from_u64(55);
        for scheme in [Scheme::PointC, Scheme::PointB] {
            for k in [3usize, 4] {
                let spec = FadingSpec::iid(k, 1000 + k as u64);
                let h = sample_channel(&spec, scheme.frame_len(k), 1).unwrap();
                let f = build_frame(scheme, &h, 12.0).unwrap();
                let symbols = random_symbols(k, k - 1, &mut rng);
                let obs = transmit::<ChaCha12Rng>(&h, &f, &symbols, None);
                let plans = combining_plan(scheme, k, f.beta);
                for user in 1..=k {
                    let eff = effective_channel(&h, &f, user);
                    let est =
                        decode(obs.user(user), &plans[user - 1], &eff, f.symbol_power).unwrap();
                    let err = (&est - &symbols[user - 1]).norm() / symbols[user - 1].norm();
                    assert!(err <= 1e-8, "{} K={k} user {user}: {err}", scheme.name());
                }
            }
        }
    }

    #[test]
    fn effective_channel_full_rank_across_trials() {
        let spec = FadingSpec::iid(3, 424242);
        for trial in 0..1000 {
            let h = sample_channel(&spec, 3, trial).unwrap();
            let f = build_frame(Scheme::PointC, &h, 6.0).unwrap();
            for user in 1..=3 {
                let eff = effective_channel(&h, &f, user);
                assert!(eff.smallest_singular_ratio() > 1e-6, "trial {trial}");
            }
        }
    }

    #[test]
    fn block_constant_channel_degenerates_point_c() {
        // With identical CSI across the frame the phase-two rows collapse:
        // V = I makes beta (h~ - h[1]) = 0, so point C needs fast fading.
        let spec = FadingSpec::block(3, 3, 3);
        let h = sample_channel(&spec, 3, 0).unwrap();
        let f = build_frame(Scheme::PointC, &h, 6.0).unwrap();
        let eff = effective_channel(&h, &f, 1);
        assert!(fro_norm(&eff.matrix) < 1e-10);
    }

    #[test]
    fn ls_frame_leaves_residual_interference() {
        let spec = FadingSpec::iid(4, 88).with_antennas(2);
        let h = sample_channel(&spec, 4, 0).unwrap();
        let f = build_ls_frame(&h, 12.0).unwrap();
        let leaks = residual_interference(&h, &f, 1);
        assert!(leaks.iter().any(|l| fro_norm(l) > 1e-6));
        // Exact frames do not.
        let spec_full = FadingSpec::iid(4, 88);
        let h_full = sample_channel(&spec_full, 4, 0).unwrap();
        let f_full = build_frame(Scheme::PointC, &h_full, 12.0).unwrap();
        for user in 1..=4 {
            for l in residual_interference(&h_full, &f_full, user) {
                assert!(fro_norm(&l) <= 1e-8);
            }
        }
    }

    #[test]
    fn pilot_estimation_recovers_effective_row() {
        let spec = FadingSpec::iid(3, 66);
        let h = sample_channel(&spec, 3, 0).unwrap();
        let f = build_frame(Scheme::PointC, &h, 6.0).unwrap();
        let user = 1;
        let slot = 2;
        let expected = h.row(slot, user) * f.precoder(user, slot);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let pilots = random_symbols(2, 2, &mut rng);
        // Received pilot samples: the full precoded sum over users.
        let mut sum_v = DMatrix::<Cx>::zeros(2, 2);
        for u in 1..=3 {
            sum_v += f.precoder(u, slot);
        }
        let observations: Vec<Cx> = pilots
            .iter()
            .map(|t| (h.row(slot, user) * &sum_v * t)[(0, 0)])
            .collect();
        let recovered =
            estimate_effective_channel_pilot(&pilots, &h.row(1, user), &observations, 3).unwrap();
        let err = (&recovered - &expected).norm() / expected.norm();
        assert!(err <= 1e-8, "pilot recovery error {err}");

        // A single subcarrier cannot identify a length-2 row.
        let short = estimate_effective_channel_pilot(
            &pilots[..1],
            &h.row(1, user),
            &observations[..1],
            3,
        );
        assert!(matches!(short, Err(Error::RankDeficient(_))));
    }
}
