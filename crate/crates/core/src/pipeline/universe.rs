//! The candidate-model universe and its stable identifiers.
//!
//! Identifiers double as forecast-panel column names and as config tokens,
//! so their spelling and ordering are part of the determinism contract.

use crate::models::TailKind;

/// Realized measures usable by Realized GARCH and CAViaR-X.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RealizedMeasure {
    Rvol5,
    RbSs,
    Rk,
}

impl RealizedMeasure {
    /// Column name in the input series schema.
    pub fn column(self) -> &'static str {
        match self {
            RealizedMeasure::Rvol5 => "rvol5",
            RealizedMeasure::RbSs => "rbss",
            RealizedMeasure::Rk => "rk",
        }
    }

    /// Display label used inside model identifiers.
    pub fn label(self) -> &'static str {
        match self {
            RealizedMeasure::Rvol5 => "RVOL5",
            RealizedMeasure::RbSs => "RB-SS",
            RealizedMeasure::Rk => "RK",
        }
    }

    pub const ALL: [RealizedMeasure; 3] =
        [RealizedMeasure::Rvol5, RealizedMeasure::RbSs, RealizedMeasure::Rk];
}

/// One candidate model in the universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CandidateModel {
    RiskMetrics(TailKind),
    Garch(TailKind),
    Gjr(TailKind),
    Rgarch(RealizedMeasure, TailKind),
    /// Historical simulation with the given lookback window.
    Hs(usize),
    CaviarSav,
    CaviarAs,
    CaviarIg,
    CaviarX(RealizedMeasure),
}

impl CandidateModel {
    /// Stable identifier (also the forecast-panel column name).
    pub fn id(&self) -> String {
        match self {
            CandidateModel::RiskMetrics(t) => format!("RM-{}", t.id_suffix()),
            CandidateModel::Garch(t) => format!("GARCH-{}", t.id_suffix()),
            CandidateModel::Gjr(t) => format!("GJR-{}", t.id_suffix()),
            CandidateModel::Rgarch(m, t) => {
                format!("RGARCH-{}-{}", m.label(), t.id_suffix())
            }
            CandidateModel::Hs(w) => format!("HS-{w}"),
            CandidateModel::CaviarSav => "CAViaR-SAV".to_string(),
            CandidateModel::CaviarAs => "CAViaR-AS".to_string(),
            CandidateModel::CaviarIg => "CAViaR-IG".to_string(),
            CandidateModel::CaviarX(m) => format!("CAViaR-X-{}", m.label()),
        }
    }

    /// Parse an identifier produced by [`CandidateModel::id`].
    pub fn from_id(id: &str) -> Option<CandidateModel> {
        full_universe().into_iter().find(|m| m.id() == id)
    }

    /// Realized-measure column required by this model, if any.
    pub fn required_exog(&self) -> Option<&'static str> {
        match self {
            CandidateModel::Rgarch(m, _) | CandidateModel::CaviarX(m) => Some(m.column()),
            _ => None,
        }
    }
}

const TAILS: [TailKind; 3] = [TailKind::Normal, TailKind::NormalCf, TailKind::StudentT];

/// The full 29-model universe in reporting order.
pub fn full_universe() -> Vec<CandidateModel> {
    let mut out = Vec::with_capacity(29);
    for t in TAILS {
        out.push(CandidateModel::RiskMetrics(t));
    }
    for t in TAILS {
        out.push(CandidateModel::Garch(t));
    }
    for t in TAILS {
        out.push(CandidateModel::Gjr(t));
    }
    for m in RealizedMeasure::ALL {
        for t in TAILS {
            out.push(CandidateModel::Rgarch(m, t));
        }
    }
    for w in [25usize, 50, 100, 250, 500] {
        out.push(CandidateModel::Hs(w));
    }
    out.push(CandidateModel::CaviarSav);
    out.push(CandidateModel::CaviarAs);
    out.push(CandidateModel::CaviarIg);
    for m in RealizedMeasure::ALL {
        out.push(CandidateModel::CaviarX(m));
    }
    out
}

/// Combined-predictor column names, in reporting order.
///
/// The first four are whole-universe benchmarks; the last six are built from
/// the training Model Confidence Set (unweighted-loss and weighted-loss
/// variants of equally weighted, relative-score, and minimum-score
/// combinations).
pub const PREDICTOR_IDS: [&str; 10] = [
    "EW-Comb",
    "Median-Comb",
    "RS-Comb",
    "MS-Comb",
    "MCS-Comb",
    "WL-MCS-Comb",
    "MCS-RS-Comb",
    "WL-MCS-RS-Comb",
    "MCS-MS-Comb",
    "WL-MCS-MS-Comb",
];

/// Identifiers of the six MCS-based predictors.
pub const MCS_PREDICTOR_IDS: [&str; 6] = [
    "MCS-Comb",
    "WL-MCS-Comb",
    "MCS-RS-Comb",
    "WL-MCS-RS-Comb",
    "MCS-MS-Comb",
    "WL-MCS-MS-Comb",
];
