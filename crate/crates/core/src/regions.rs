//! Closed-form DoF curves and bounds, evaluated in exact rational arithmetic.
//!
//! Every curve is a piecewise-linear function with rational breakpoints and
//! coefficients, so identities between curves (continuity, corner values,
//! dominance) are exact equalities rather than floating-point tolerances.

use crate::error::{Error, Result};
use crate::Rational;
use num_traits::{One, Zero};

/// Speed of light in m/s, used by the coherence-time rule of thumb.
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

/// Which closed-form curve to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    /// Achievable sum-DoF vs feedback frequency for K users, K-1 antennas.
    Thm1 { num_users: usize },
    /// Feedback delay vs sum-DoF trade-off for K users.
    Thm2 { num_users: usize },
    /// Optimal delay-DoF trade-off for the 3-user 2-antenna channel.
    Cor1,
    /// ZF/TDMA time-sharing baseline in the feedback-frequency variable.
    ZfTdmaOmega { num_users: usize },
    /// ZF/TDMA time-sharing baseline in the feedback-delay variable (3 users).
    ZfTdmaGamma,
    /// ZF/MAT time-sharing baseline in the feedback-delay variable (3 users).
    ZfMatGamma,
    /// Outer bound for the 3-user 2-antenna channel.
    Lemma1Outer,
    /// Cut-set bound min{N_t, K} = K-1, constant over the domain.
    Cutset { num_users: usize },
    /// Finite-block-count DoF of the composite schedule, interpolated
    /// linearly between integer block counts (exact at the integers).
    FiniteN { num_users: usize, max_blocks: usize },
}

/// Variable a curve is parameterized by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainVar {
    /// Normalized feedback frequency, in [0, 1].
    Omega,
    /// Normalized feedback delay, in [0, inf).
    Gamma,
    /// Number of STIA block groups in the composite schedule.
    BlockCount,
}

impl DomainVar {
    pub fn label(&self) -> &'static str {
        match self {
            DomainVar::Omega => "omega",
            DomainVar::Gamma => "gamma",
            DomainVar::BlockCount => "n",
        }
    }
}

/// One linear piece: d(x) = slope * x + intercept on [x_lo, x_hi].
///
/// `x_hi = None` marks a segment unbounded to the right.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub x_lo: Rational,
    pub x_hi: Option<Rational>,
    pub slope: Rational,
    pub intercept: Rational,
}

impl Segment {
    fn eval(&self, x: Rational) -> Rational {
        self.slope * x + self.intercept
    }

    fn contains(&self, x: Rational) -> bool {
        x >= self.x_lo && self.x_hi.map_or(true, |hi| x <= hi)
    }
}

/// A piecewise-linear DoF curve with exact rational coefficients.
#[derive(Debug, Clone)]
pub struct RegionCurve {
    pub kind: CurveKind,
    pub domain: DomainVar,
    pub segments: Vec<Segment>,
}

impl RegionCurve {
    /// Lower end of the domain.
    pub fn x_min(&self) -> Rational {
        self.segments[0].x_lo
    }

    /// Upper end of the domain, `None` when unbounded.
    pub fn x_max(&self) -> Option<Rational> {
        self.segments.last().unwrap().x_hi
    }

    /// Interior breakpoints (segment boundaries, excluding the domain ends).
    pub fn breakpoints(&self) -> Vec<Rational> {
        self.segments
            .windows(2)
            .map(|w| w[1].x_lo)
            .collect()
    }

    /// Exact piecewise evaluation. At a breakpoint both adjoining segments
    /// agree (checked at construction), so either may serve.
    pub fn eval(&self, x: Rational) -> Result<Rational> {
        self.segments
            .iter()
            .find(|s| s.contains(x))
            .map(|s| s.eval(x))
            .ok_or_else(|| Error::OutOfDomain {
                x: x.to_string(),
                lo: self.x_min().to_string(),
                hi: self
                    .x_max()
                    .map_or("inf".to_string(), |hi| hi.to_string()),
            })
    }

    /// Segments must tile the domain and meet continuously.
    fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidSpec("curve with no segments".into()));
        }
        for w in self.segments.windows(2) {
            let hi = w[0].x_hi.ok_or_else(|| {
                Error::InvalidSpec("unbounded segment must come last".into())
            })?;
            if hi != w[1].x_lo {
                return Err(Error::InvalidSpec(format!(
                    "segments not contiguous at x = {hi}"
                )));
            }
            if w[0].eval(hi) != w[1].eval(hi) {
                return Err(Error::InvalidSpec(format!(
                    "curve discontinuous at x = {hi}"
                )));
            }
        }
        Ok(())
    }
}

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn int(n: i64) -> Rational {
    Rational::from_integer(n)
}

/// Slope of the middle piece of the frequency-domain region,
/// a(K) = K(K-1)(K-2) / ((K-1)(K-2) + K).
pub fn slope_a(num_users: usize) -> Rational {
    let k = num_users as i64;
    rat(k * (k - 1) * (k - 2), (k - 1) * (k - 2) + k)
}

/// Intercept of the middle piece, b(K) = K(K-1) / ((K-1)(K-2) + K).
pub fn intercept_b(num_users: usize) -> Rational {
    let k = num_users as i64;
    rat(k * (k - 1), (k - 1) * (k - 2) + k)
}

/// Fully delayed-CSI DoF constant c(K) = (K-1) / (1 + 1/2 + ... + 1/(K-1)).
pub fn delayed_csi_dof(num_users: usize) -> Rational {
    let k = num_users as i64;
    let harmonic: Rational = (1..k).map(|i| rat(1, i)).sum();
    int(k - 1) / harmonic
}

fn check_k(num_users: usize) -> Result<i64> {
    if num_users < 3 {
        return Err(Error::InvalidSpec(format!(
            "curves require at least 3 users, got {num_users}"
        )));
    }
    Ok(num_users as i64)
}

/// Build the requested curve with exact rational segments.
pub fn region_curve(kind: CurveKind) -> Result<RegionCurve> {
    let (domain, segments) = match kind {
        CurveKind::Thm1 { num_users } => {
            let k = check_k(num_users)?;
            let bp1 = rat(k - 2, 2 * (k - 1));
            let bp2 = rat(k - 1, k);
            (
                DomainVar::Omega,
                vec![
                    Segment {
                        x_lo: int(0),
                        x_hi: Some(bp1),
                        slope: int(k - 1),
                        intercept: int(1),
                    },
                    Segment {
                        x_lo: bp1,
                        x_hi: Some(bp2),
                        slope: slope_a(num_users),
                        intercept: intercept_b(num_users),
                    },
                    Segment {
                        x_lo: bp2,
                        x_hi: Some(int(1)),
                        slope: int(0),
                        intercept: int(k - 1),
                    },
                ],
            )
        }
        CurveKind::Thm2 { num_users } => {
            let k = check_k(num_users)?;
            let c = delayed_csi_dof(num_users);
            // Middle piece: (-K + K c/(K-1)) gamma + K - c/(K-1).
            let slope = int(-k) + int(k) * c / int(k - 1);
            let intercept = int(k) - c / int(k - 1);
            (
                DomainVar::Gamma,
                vec![
                    Segment {
                        x_lo: int(0),
                        x_hi: Some(rat(1, k)),
                        slope: int(0),
                        intercept: int(k - 1),
                    },
                    Segment {
                        x_lo: rat(1, k),
                        x_hi: Some(int(1)),
                        slope,
                        intercept,
                    },
                    Segment {
                        x_lo: int(1),
                        x_hi: None,
                        slope: int(0),
                        intercept: c,
                    },
                ],
            )
        }
        CurveKind::Cor1 => (
            DomainVar::Gamma,
            vec![
                Segment {
                    x_lo: int(0),
                    x_hi: Some(rat(1, 3)),
                    slope: int(0),
                    intercept: int(2),
                },
                Segment {
                    x_lo: rat(1, 3),
                    x_hi: Some(int(1)),
                    slope: rat(-3, 4),
                    intercept: rat(9, 4),
                },
                Segment {
                    x_lo: int(1),
                    x_hi: None,
                    slope: int(0),
                    intercept: rat(3, 2),
                },
            ],
        ),
        CurveKind::ZfTdmaOmega { num_users } => {
            let k = check_k(num_users)?;
            (
                DomainVar::Omega,
                vec![Segment {
                    x_lo: int(0),
                    x_hi: Some(int(1)),
                    slope: int(k - 2),
                    intercept: int(1),
                }],
            )
        }
        CurveKind::ZfTdmaGamma => (
            DomainVar::Gamma,
            vec![Segment {
                x_lo: int(0),
                x_hi: Some(int(1)),
                slope: int(-1),
                intercept: int(2),
            }],
        ),
        CurveKind::ZfMatGamma => (
            DomainVar::Gamma,
            vec![Segment {
                x_lo: int(0),
                x_hi: Some(int(1)),
                slope: rat(-1, 2),
                intercept: int(2),
            }],
        ),
        CurveKind::Lemma1Outer => (
            // The bound 9/4 - (3/4) gamma uses the perfect-CSIT time
            // fraction 1 - gamma, which floors at zero once gamma >= 1,
            // so the bound saturates at 3/2 there.
            DomainVar::Gamma,
            vec![
                Segment {
                    x_lo: int(0),
                    x_hi: Some(int(1)),
                    slope: rat(-3, 4),
                    intercept: rat(9, 4),
                },
                Segment {
                    x_lo: int(1),
                    x_hi: None,
                    slope: int(0),
                    intercept: rat(3, 2),
                },
            ],
        ),
        CurveKind::Cutset { num_users } => {
            let k = check_k(num_users)?;
            (
                DomainVar::Omega,
                vec![Segment {
                    x_lo: int(0),
                    x_hi: Some(int(1)),
                    slope: int(0),
                    intercept: int(k - 1),
                }],
            )
        }
        CurveKind::FiniteN {
            num_users,
            max_blocks,
        } => {
            check_k(num_users)?;
            if max_blocks < 2 {
                return Err(Error::InvalidSpec(
                    "finite-n curve needs at least two block counts".into(),
                ));
            }
            let mut segments = Vec::with_capacity(max_blocks - 1);
            for n in 1..max_blocks {
                let x0 = int(n as i64);
                let x1 = int(n as i64 + 1);
                let y0 = finite_n_dof(num_users, n)?;
                let y1 = finite_n_dof(num_users, n + 1)?;
                let slope = (y1 - y0) / (x1 - x0);
                segments.push(Segment {
                    x_lo: x0,
                    x_hi: Some(x1),
                    slope,
                    intercept: y0 - slope * x0,
                });
            }
            (DomainVar::BlockCount, segments)
        }
    };
    let curve = RegionCurve {
        kind,
        domain,
        segments,
    };
    curve.validate()?;
    Ok(curve)
}

/// Convenience wrapper matching the operation-style interface.
pub fn eval_curve(curve: &RegionCurve, x: Rational) -> Result<Rational> {
    curve.eval(x)
}

/// Sum-DoF of the composite STIA/ZF/TDMA schedule with `blocks` STIA groups:
/// ((K-1)Kn + (K-1)^3 + (K-1)) / (Kn + K(K-1)).
pub fn finite_n_dof(num_users: usize, blocks: usize) -> Result<Rational> {
    let k = check_k(num_users)?;
    if blocks < 1 {
        return Err(Error::InvalidSpec("need at least one STIA block group".into()));
    }
    let n = blocks as i64;
    let num = (k - 1) * k * n + (k - 1).pow(3) + (k - 1);
    let den = k * n + k * (k - 1);
    Ok(rat(num, den))
}

/// Rule-of-thumb channel coherence time c / (8 f v) in seconds.
pub fn coherence_time(carrier_hz: f64, speed_m_per_s: f64) -> f64 {
    assert!(carrier_hz > 0.0 && speed_m_per_s > 0.0);
    SPEED_OF_LIGHT_M_PER_S / (8.0 * carrier_hz * speed_m_per_s)
}

/// Sampled point of a curve (exact x, exact d), for export.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveSample {
    pub x: Rational,
    pub d: Rational,
}

/// Sample a curve on a uniform grid of the given step, merged with the exact
/// breakpoints, over [x_min, min(x_max, cap)]. Unbounded curves use `cap`.
pub fn sample_curve(
    curve: &RegionCurve,
    step: Rational,
    cap: Option<Rational>,
) -> Result<Vec<CurveSample>> {
    if step <= Rational::zero() {
        return Err(Error::InvalidSpec("grid step must be positive".into()));
    }
    let lo = curve.x_min();
    let hi = match (curve.x_max(), cap) {
        (Some(h), Some(c)) => h.min(c),
        (Some(h), None) => h,
        (None, Some(c)) => c,
        (None, None) => curve.segments.last().unwrap().x_lo + Rational::one(),
    };
    let mut xs: Vec<Rational> = Vec::new();
    let mut x = lo;
    while x <= hi {
        xs.push(x);
        x += step;
    }
    xs.push(hi);
    for bp in curve.breakpoints() {
        if bp >= lo && bp <= hi {
            xs.push(bp);
        }
    }
    xs.sort();
    xs.dedup();
    xs.into_iter()
        .map(|x| Ok(CurveSample { x, d: curve.eval(x)? }))
        .collect()
}
