//! Design matrices for the threshold (engage vs read) and allocation
//! (like / repost / quote) models.
//!
//! Column layout with full interactions (24 columns):
//!
//! | cols  | terms                                              |
//! |-------|----------------------------------------------------|
//! | 0     | intercept                                          |
//! | 1     | popularity composite                               |
//! | 2-4   | load low, medium, high (ref: lowest)               |
//! | 5-6   | norm like, repost (ref: none)                      |
//! | 7-9   | popularity x load                                  |
//! | 10-11 | popularity x norm                                  |
//! | 12-14 | load x like-norm                                   |
//! | 15-17 | load x repost-norm                                 |
//! | 18-20 | popularity x load x like-norm                      |
//! | 21-23 | popularity x load x repost-norm                    |
//!
//! Without interactions only columns 0-6 are present.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionKind, Condition, ExposureRecord, LoadCondition, NormRegime};

pub const FULL_COLUMNS: usize = 24;
pub const MAIN_EFFECT_COLUMNS: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Threshold,
    Allocation,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Threshold => "threshold",
            Stage::Allocation => "allocation",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub stage: Stage,
    pub interactions: bool,
}

impl DesignSpec {
    pub fn threshold() -> Self {
        DesignSpec { stage: Stage::Threshold, interactions: true }
    }

    pub fn allocation() -> Self {
        DesignSpec { stage: Stage::Allocation, interactions: true }
    }

    pub fn columns(&self) -> usize {
        column_count(self.interactions)
    }
}

pub fn column_count(interactions: bool) -> usize {
    if interactions {
        FULL_COLUMNS
    } else {
        MAIN_EFFECT_COLUMNS
    }
}

const LOAD_DUMMIES: [(LoadCondition, &str); 3] = [
    (LoadCondition::Low, "Load[low]"),
    (LoadCondition::Medium, "Load[medium]"),
    (LoadCondition::High, "Load[high]"),
];
const NORM_DUMMIES: [(NormRegime, &str); 2] = [
    (NormRegime::LikeDominant, "Norm[like]"),
    (NormRegime::RepostDominant, "Norm[repost]"),
];
const POP: &str = "Popularity";

pub fn term_names(interactions: bool) -> Vec<String> {
    let mut names = vec!["Intercept".to_string(), POP.to_string()];
    names.extend(LOAD_DUMMIES.iter().map(|(_, n)| n.to_string()));
    names.extend(NORM_DUMMIES.iter().map(|(_, n)| n.to_string()));
    if interactions {
        names.extend(LOAD_DUMMIES.iter().map(|(_, l)| format!("{POP}:{l}")));
        names.extend(NORM_DUMMIES.iter().map(|(_, n)| format!("{POP}:{n}")));
        for (_, n) in NORM_DUMMIES {
            names.extend(LOAD_DUMMIES.iter().map(|(_, l)| format!("{l}:{n}")));
        }
        for (_, n) in NORM_DUMMIES {
            names.extend(LOAD_DUMMIES.iter().map(|(_, l)| format!("{POP}:{l}:{n}")));
        }
    }
    names
}

/// Writes one design row into `out` (length 24 or 7).
pub fn fill_row(composite: f64, condition: Condition, interactions: bool, out: &mut [f64]) {
    debug_assert_eq!(out.len(), column_count(interactions));
    let load: [f64; 3] = LOAD_DUMMIES.map(|(l, _)| f64::from(u8::from(condition.load == l)));
    let norm: [f64; 2] = NORM_DUMMIES.map(|(n, _)| f64::from(u8::from(condition.norm == n)));
    out[0] = 1.0;
    out[1] = composite;
    out[2..5].copy_from_slice(&load);
    out[5..7].copy_from_slice(&norm);
    if !interactions {
        return;
    }
    for i in 0..3 {
        out[7 + i] = composite * load[i];
    }
    for j in 0..2 {
        out[10 + j] = composite * norm[j];
    }
    for j in 0..2 {
        for i in 0..3 {
            out[12 + 3 * j + i] = load[i] * norm[j];
            out[18 + 3 * j + i] = composite * load[i] * norm[j];
        }
    }
}

pub fn design_row(composite: f64, condition: Condition, interactions: bool) -> Vec<f64> {
    let mut row = vec![0.0; column_count(interactions)];
    fill_row(composite, condition, interactions, &mut row);
    row
}

/// Dense row-major design matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    data: Vec<f64>,
    nrows: usize,
    ncols: usize,
    names: Vec<String>,
}

impl DesignMatrix {
    pub fn from_rows(rows: &[Vec<f64>], names: Vec<String>) -> Result<Self> {
        let ncols = names.len();
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != ncols {
                return Err(Error::Validation(format!(
                    "row {i} has {} columns, expected {ncols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(DesignMatrix { data, nrows: rows.len(), ncols, names })
    }

    pub fn from_row_major(data: Vec<f64>, ncols: usize, names: Vec<String>) -> Result<Self> {
        if ncols == 0 || !data.len().is_multiple_of(ncols) || names.len() != ncols {
            return Err(Error::Validation("inconsistent design matrix shape".into()));
        }
        Ok(DesignMatrix { nrows: data.len() / ncols, data, ncols, names })
    }

    /// A single column of ones.
    pub fn intercept_only(nrows: usize) -> Self {
        DesignMatrix {
            data: vec![1.0; nrows],
            nrows,
            ncols: 1,
            names: vec!["Intercept".into()],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Number of rows whose entry in `col` is non-zero.
    pub fn column_support(&self, col: usize) -> usize {
        (0..self.nrows).filter(|&i| self.row(i)[col] != 0.0).count()
    }
}

/// Outcome codes: threshold uses 0 = read, 1 = engaged; allocation uses
/// 0 = like (reference), 1 = repost, 2 = quote.
pub fn outcome_code(stage: Stage, action: ActionKind) -> Option<u8> {
    match (stage, action) {
        (Stage::Threshold, ActionKind::Read) => Some(0),
        (Stage::Threshold, _) => Some(1),
        (Stage::Allocation, ActionKind::Read) => None,
        (Stage::Allocation, ActionKind::Like) => Some(0),
        (Stage::Allocation, ActionKind::Repost) => Some(1),
        (Stage::Allocation, ActionKind::Quote) => Some(2),
    }
}

/// Builds the design matrix and outcome vector. The allocation stage keeps
/// only engaged rows. Popularity is taken from each row's own snapshot.
pub fn build_design_matrix<'a, I>(records: I, spec: DesignSpec) -> Result<(DesignMatrix, Vec<u8>)>
where
    I: IntoIterator<Item = &'a ExposureRecord>,
{
    let ncols = spec.columns();
    let mut data = Vec::new();
    let mut y = Vec::new();
    let mut row = vec![0.0; ncols];
    for rec in records {
        let Some(code) = outcome_code(spec.stage, rec.action) else {
            continue;
        };
        fill_row(rec.composite(), rec.condition, spec.interactions, &mut row);
        data.extend_from_slice(&row);
        y.push(code);
    }
    if y.is_empty() {
        return Err(Error::Validation(format!(
            "no usable records for the {} stage",
            spec.stage.as_str()
        )));
    }
    let m = DesignMatrix::from_row_major(data, ncols, term_names(spec.interactions))?;
    Ok((m, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AgentId, FeedSlot, PostId, RunId};

    fn record(load: LoadCondition, norm: NormRegime, likes: u64, reshares: u64, action: ActionKind) -> ExposureRecord {
        ExposureRecord {
            run: RunId(0),
            condition: Condition::new(load, norm),
            timestep: 0,
            agent: AgentId(0),
            post: PostId(0),
            likes_at_exposure: likes,
            reshares_at_exposure: reshares,
            action,
            slot: FeedSlot::Algorithmic,
        }
    }

    #[test]
    fn threshold_has_23_predictors() {
        let names = term_names(true);
        assert_eq!(names.len(), 24);
        assert_eq!(names.len() - 1, 23);
        assert_eq!(term_names(false).len(), 7);
        assert_eq!(FULL_COLUMNS - MAIN_EFFECT_COLUMNS, 17);
        let unique: std::collections::HashSet<_> = names.iter().collect();
        assert_eq!(unique.len(), 24);
    }

    #[test]
    fn reference_cell_row() {
        let row = design_row(0.0, Condition::new(LoadCondition::Lowest, NormRegime::NoNorm), true);
        assert_eq!(row[0], 1.0);
        assert!(row[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn three_way_column() {
        let c = 1.7;
        let row = design_row(c, Condition::new(LoadCondition::High, NormRegime::RepostDominant), true);
        let names = term_names(true);
        let col = names.iter().position(|n| n == "Popularity:Load[high]:Norm[repost]").unwrap();
        assert_eq!(col, 23);
        assert_eq!(row[col], c);
        // Brute-force: every column equals the product of its named factors.
        for (j, name) in names.iter().enumerate().skip(1) {
            let expected: f64 = name
                .split(':')
                .map(|f| match f {
                    "Popularity" => c,
                    "Load[high]" | "Norm[repost]" => 1.0,
                    _ => 0.0,
                })
                .product();
            assert_eq!(row[j], expected, "{name}");
        }
    }

    #[test]
    fn allocation_drops_reads() {
        let recs = vec![
            record(LoadCondition::Low, NormRegime::LikeDominant, 1, 1, ActionKind::Read),
            record(LoadCondition::Low, NormRegime::LikeDominant, 1, 1, ActionKind::Quote),
            record(LoadCondition::Low, NormRegime::LikeDominant, 0, 0, ActionKind::Like),
        ];
        let (m, y) = build_design_matrix(&recs, DesignSpec::allocation()).unwrap();
        assert_eq!(m.nrows(), 2);
        assert_eq!(y, vec![2, 0]);
        assert!((m.row(0)[1] - 3f64.ln()).abs() < 1e-15);
        let (m, y) = build_design_matrix(&recs, DesignSpec::threshold()).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (3, 24));
        assert_eq!(y, vec![0, 1, 1]);

        let reads = vec![recs[0].clone()];
        assert!(build_design_matrix(&reads, DesignSpec::allocation()).is_err());
    }

    #[test]
    fn column_count_ignores_record_order() {
        let mut recs: Vec<_> = Condition::all()
            .map(|c| record(c.load, c.norm, 2, 1, ActionKind::Like))
            .collect();
        let (a, _) = build_design_matrix(&recs, DesignSpec::threshold()).unwrap();
        recs.reverse();
        let (b, _) = build_design_matrix(&recs, DesignSpec::threshold()).unwrap();
        assert_eq!(a.ncols(), b.ncols());
        assert_eq!(a.names(), b.names());
    }
}
