//! Deterministic bag-of-words scorer used as an oracle stand-in for a
//! language model: `logit[y] = base[y] + sum over prompt words w of assoc[w][y]`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_prompt, Backend, BackendError, LabelScores, ScoreResult};
use crate::dataset::LabelSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssociationTable {
    pub base: Vec<f64>,
    #[serde(default)]
    pub assoc: BTreeMap<String, Vec<f64>>,
}

impl AssociationTable {
    pub fn new(base: Vec<f64>, assoc: BTreeMap<String, Vec<f64>>) -> Result<Self, BackendError> {
        let table = Self { base, assoc };
        table.validate()?;
        Ok(table)
    }

    /// Zero bias, no associations.
    pub fn uniform(n_labels: usize) -> Self {
        Self {
            base: vec![0.0; n_labels],
            assoc: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.base.is_empty() {
            return Err(BackendError::Config("mock table has no labels".into()));
        }
        if self.base.iter().any(|x| !x.is_finite()) {
            return Err(BackendError::Config("non-finite base weight".into()));
        }
        for (word, w) in &self.assoc {
            if w.len() != self.base.len() {
                return Err(BackendError::DimensionMismatch {
                    expected: self.base.len(),
                    got: w.len(),
                });
            }
            if w.iter().any(|x| !x.is_finite()) {
                return Err(BackendError::Config(format!(
                    "non-finite weight for {word:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn n_labels(&self) -> usize {
        self.base.len()
    }

    /// Additive logits for `prompt`. Unknown words contribute nothing.
    pub fn logits(&self, prompt: &str) -> Vec<f64> {
        let mut logits = self.base.clone();
        for word in prompt.split_whitespace() {
            if let Some(w) = self.assoc.get(word) {
                for (l, x) in logits.iter_mut().zip(w) {
                    *l += x;
                }
            }
        }
        logits
    }
}

pub fn mock_score(
    table: &AssociationTable,
    prompt: &str,
    label_set: &LabelSet,
) -> Result<LabelScores, BackendError> {
    if table.n_labels() != label_set.len() {
        return Err(BackendError::DimensionMismatch {
            expected: label_set.len(),
            got: table.n_labels(),
        });
    }
    LabelScores::from_log_scores(&table.logits(prompt))
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    model_id: String,
    table: AssociationTable,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    #[serde(default)]
    model: Option<String>,
    base: Vec<f64>,
    #[serde(default)]
    assoc: BTreeMap<String, Vec<f64>>,
}

impl MockBackend {
    pub fn new(model_id: impl Into<String>, table: AssociationTable) -> Result<Self, BackendError> {
        table.validate()?;
        Ok(Self {
            model_id: model_id.into(),
            table,
        })
    }

    /// Load a JSON table `{"model": .., "base": [..], "assoc": {word: [..]}}`.
    /// The model id defaults to the file stem.
    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(
            &raw,
            path.file_stem().and_then(|s| s.to_str()).unwrap_or("mock"),
        )
        .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_json(raw: &str, default_model: &str) -> Result<Self, BackendError> {
        let file: TableFile =
            serde_json::from_str(raw).map_err(|e| BackendError::Config(e.to_string()))?;
        Self::new(
            file.model.unwrap_or_else(|| default_model.to_string()),
            AssociationTable::new(file.base, file.assoc)?,
        )
    }

    pub fn with_model_id(mut self, model_id: String) -> Self {
        self.model_id = model_id;
        self
    }

    pub fn table(&self) -> &AssociationTable {
        &self.table
    }
}

impl Backend for MockBackend {
    fn kind(&self) -> &str {
        "mock"
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn log_scores(&self, prompt: &str, labels: &LabelSet) -> ScoreResult {
        check_prompt(prompt)?;
        if self.table.n_labels() != labels.len() {
            return Err(BackendError::DimensionMismatch {
                expected: labels.len(),
                got: self.table.n_labels(),
            });
        }
        Ok(self.table.logits(prompt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::score_labels;
    use proptest::prelude::*;

    fn labels() -> LabelSet {
        LabelSet::new(["a", "b"]).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn examples() {
        let ls = labels();
        let uniform = MockBackend::new("m", AssociationTable::uniform(2)).unwrap();
        assert_eq!(
            score_labels(&uniform, "anything at all", &ls)
                .unwrap()
                .probs(),
            &[0.5, 0.5]
        );

        let biased = AssociationTable::new(vec![3f64.ln(), 0.0], BTreeMap::new()).unwrap();
        let p = mock_score(&biased, "x", &ls).unwrap();
        assert!(close(p.probs(), &[0.75, 0.25], 1e-15));

        let mut assoc = BTreeMap::new();
        assoc.insert("w".to_string(), vec![0.0, 9f64.ln()]);
        let t = AssociationTable::new(vec![0.0, 0.0], assoc).unwrap();
        assert!(close(
            mock_score(&t, "the w here", &ls).unwrap().probs(),
            &[0.1, 0.9],
            1e-15
        ));

        let mut assoc = BTreeMap::new();
        assoc.insert("w".to_string(), vec![1.0, 0.0]);
        let t = AssociationTable::new(vec![0.0, 0.0], assoc).unwrap();
        // softmax(2, 0)
        let e2 = 2f64.exp();
        let expected = [e2 / (e2 + 1.0), 1.0 / (e2 + 1.0)];
        let got = mock_score(&t, "w w", &ls).unwrap();
        assert!(close(got.probs(), &expected, 1e-15));
        assert!(close(got.probs(), &[0.8808, 0.1192], 1e-4));
    }

    #[test]
    fn dimension_mismatch() {
        let t = AssociationTable::uniform(3);
        assert!(matches!(
            mock_score(&t, "x", &labels()),
            Err(BackendError::DimensionMismatch {
                expected: 2,
                got: 3
            })
        ));
        let mut assoc = BTreeMap::new();
        assoc.insert("w".to_string(), vec![1.0]);
        assert!(AssociationTable::new(vec![0.0, 0.0], assoc).is_err());
    }

    #[test]
    fn parses_table_json() {
        let b = MockBackend::from_json(r#"{"base":[0,1],"assoc":{"x":[1,0]}}"#, "stem").unwrap();
        assert_eq!(b.model_id(), "stem");
        assert_eq!(b.table().logits("x x"), vec![2.0, 1.0]);
        assert!(MockBackend::from_json(r#"{"base":[0],"extra":1}"#, "m").is_err());
    }

    fn table_strategy() -> impl Strategy<Value = AssociationTable> {
        (
            proptest::collection::vec(-3.0f64..3.0, 2),
            proptest::collection::btree_map(
                "[a-e]",
                proptest::collection::vec(-3.0f64..3.0, 2),
                0..5,
            ),
        )
            .prop_map(|(base, assoc)| AssociationTable { base, assoc })
    }

    proptest! {
        #[test]
        fn word_order_irrelevant(t in table_strategy(), words in proptest::collection::vec("[a-g]", 1..10)) {
            let ls = labels();
            let mut rev = words.clone();
            rev.reverse();
            let a = mock_score(&t, &words.join(" "), &ls).unwrap();
            let b = mock_score(&t, &rev.join(" "), &ls).unwrap();
            prop_assert!(close(a.probs(), b.probs(), 1e-12));
        }

        #[test]
        fn logits_are_additive(
            t in table_strategy(),
            p1 in proptest::collection::vec("[a-g]", 1..6),
            p2 in proptest::collection::vec("[a-g]", 1..6),
        ) {
            let (p1, p2) = (p1.join(" "), p2.join(" "));
            let joined = t.logits(&format!("{p1} {p2}"));
            let (l1, l2) = (t.logits(&p1), t.logits(&p2));
            for y in 0..2 {
                prop_assert!((joined[y] - (l1[y] + l2[y] - t.base[y])).abs() < 1e-9);
            }
        }
    }
}
