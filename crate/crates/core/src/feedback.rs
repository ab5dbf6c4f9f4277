//! Periodic CSI feedback models.
//!
//! Two models decide, per transmit slot, which channel vectors the
//! transmitter has: a feedback-frequency-limited model over a fast-fading
//! channel, and a feedback-delay-limited model over a block-fading channel.
//! Feedback is noiseless; Model 1 is delay-free, Model 2 delivers CSI
//! `T_fb` slots after each coherence block starts.

use crate::channel::{coherence_block, FadingModel, FadingSpec};
use crate::error::{Error, Result};
use crate::Rational;
use std::collections::BTreeSet;

/// Feedback-frequency-limited model: cycles of `T_n` silent slots followed
/// by `T_f` feedback slots. The first feedback slot of a cycle also delivers
/// the backlog of the cycle's silent slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeedbackModel1 {
    pub non_feedback_slots: usize,
    pub feedback_slots: usize,
}

impl FeedbackModel1 {
    pub fn new(non_feedback_slots: usize, feedback_slots: usize) -> Result<Self> {
        if non_feedback_slots + feedback_slots < 1 {
            return Err(Error::InvalidSpec("feedback cycle must span at least one slot".into()));
        }
        Ok(FeedbackModel1 {
            non_feedback_slots,
            feedback_slots,
        })
    }

    /// Cycle length T = T_n + T_f.
    pub fn cycle_len(&self) -> usize {
        self.non_feedback_slots + self.feedback_slots
    }

    /// Normalized feedback frequency omega = T_f / (T_n + T_f).
    pub fn omega(&self) -> Rational {
        Rational::new(self.feedback_slots as i64, self.cycle_len() as i64)
    }

    /// CSI known at `tx_slot`. `cycle_origin` is the first slot of some
    /// cycle; shifting it phase-shifts the whole schedule.
    pub fn csit_view(
        &self,
        spec: &FadingSpec,
        tx_slot: usize,
        cycle_origin: usize,
    ) -> Result<CsitView> {
        if spec.model != FadingModel::IidFast {
            return Err(Error::ModelMismatch(
                "feedback model 1 assumes a fast-fading channel".into(),
            ));
        }
        assert!(tx_slot >= 1, "slots are 1-based");
        let t = self.cycle_len() as i64;
        let origin = cycle_origin as i64;
        let slot = tx_slot as i64;
        let cycle_start = origin + t * (slot - origin).div_euclid(t);
        let rel = slot - cycle_start + 1; // 1..=T
        let mut known_slots: Vec<usize> = Vec::new();
        if self.feedback_slots > 0 {
            // Completed earlier cycles delivered everything they covered.
            for s in 1..cycle_start {
                if s >= 1 {
                    known_slots.push(s as usize);
                }
            }
            // Current cycle: nothing until the first feedback slot, then the
            // silent backlog plus current CSI up to now.
            if rel >= self.non_feedback_slots as i64 + 1 {
                for s in cycle_start..=slot {
                    if s >= 1 {
                        known_slots.push(s as usize);
                    }
                }
            }
        }
        Ok(CsitView::from_uniform_slots(
            tx_slot,
            spec.num_users,
            &known_slots,
        ))
    }
}

/// Feedback-delay-limited model: CSI of each coherence block is sent back at
/// the block's first slot and reaches the transmitter `T_fb` slots later.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeedbackModel2 {
    pub delay_slots: usize,
    pub coherence_slots: usize,
}

impl FeedbackModel2 {
    pub fn new(delay_slots: usize, coherence_slots: usize) -> Result<Self> {
        if coherence_slots < 1 {
            return Err(Error::InvalidSpec("coherence time must be >= 1 slot".into()));
        }
        Ok(FeedbackModel2 {
            delay_slots,
            coherence_slots,
        })
    }

    /// Normalized feedback delay gamma = T_fb / T_c.
    pub fn gamma(&self) -> Rational {
        Rational::new(self.delay_slots as i64, self.coherence_slots as i64)
    }

    pub fn csit_view(&self, spec: &FadingSpec, tx_slot: usize) -> Result<CsitView> {
        match spec.model {
            FadingModel::Block { coherence_slots } if coherence_slots == self.coherence_slots => {}
            _ => {
                return Err(Error::ModelMismatch(format!(
                    "feedback model 2 needs block fading with T_c = {}",
                    self.coherence_slots
                )))
            }
        }
        assert!(tx_slot >= 1, "slots are 1-based");
        // A slot's CSI is known once its block's feedback has landed.
        let known_slots: Vec<usize> = (1..=tx_slot)
            .filter(|&s| {
                let block = coherence_block(spec, s);
                let first = (block - 1) * self.coherence_slots + 1;
                first + self.delay_slots <= tx_slot
            })
            .collect();
        Ok(CsitView::from_uniform_slots(
            tx_slot,
            spec.num_users,
            &known_slots,
        ))
    }
}

/// Either feedback model, for call sites configured at runtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackModel {
    FrequencyLimited(FeedbackModel1),
    DelayLimited(FeedbackModel2),
}

impl FeedbackModel {
    /// The model's normalized parameter (omega or gamma) as an exact rational.
    pub fn normalized_parameter(&self) -> Rational {
        match self {
            FeedbackModel::FrequencyLimited(m) => m.omega(),
            FeedbackModel::DelayLimited(m) => m.gamma(),
        }
    }

    pub fn csit_view(
        &self,
        spec: &FadingSpec,
        tx_slot: usize,
        cycle_origin: usize,
    ) -> Result<CsitView> {
        match self {
            FeedbackModel::FrequencyLimited(m) => m.csit_view(spec, tx_slot, cycle_origin),
            FeedbackModel::DelayLimited(m) => m.csit_view(spec, tx_slot),
        }
    }
}

/// Exact transmitter-side CSI at one transmit slot: the set of (user, slot)
/// channel vectors the transmitter possesses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsitView {
    pub tx_slot: usize,
    pub num_users: usize,
    known: BTreeSet<(usize, usize)>,
}

impl CsitView {
    /// Both feedback models are user-symmetric, so views are built from a
    /// single slot list shared by every user.
    fn from_uniform_slots(tx_slot: usize, num_users: usize, slots: &[usize]) -> Self {
        let mut known = BTreeSet::new();
        for &s in slots {
            debug_assert!(s <= tx_slot, "causality: no future CSI");
            for u in 1..=num_users {
                known.insert((u, s));
            }
        }
        CsitView {
            tx_slot,
            num_users,
            known,
        }
    }

    pub fn contains(&self, user: usize, slot: usize) -> bool {
        self.known.contains(&(user, slot))
    }

    /// Whether the transmitter has this user's current CSI.
    pub fn has_current(&self, user: usize) -> bool {
        self.contains(user, self.tx_slot)
    }

    pub fn is_empty(&self) -> bool {
        self.known.is_empty()
    }

    pub fn known_pairs(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.known.iter()
    }

    pub fn is_subset_of(&self, other: &CsitView) -> bool {
        self.known.is_subset(&other.known)
    }
}
