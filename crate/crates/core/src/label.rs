use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether each input carries exactly one class or a set of classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Multiclass,
    Multilabel,
}

/// A class index (multi-class) or a multi-hot vector (multi-label).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Class(usize),
    MultiHot(Vec<u8>),
}

impl Label {
    pub fn validate(&self, task: TaskKind, classes: usize) -> Result<()> {
        match (task, self) {
            (TaskKind::Multiclass, Label::Class(c)) if *c < classes => Ok(()),
            (TaskKind::Multiclass, Label::Class(c)) => Err(Error::IndexOutOfRange {
                index: *c,
                len: classes,
            }),
            (TaskKind::Multilabel, Label::MultiHot(v)) => {
                if v.len() != classes {
                    return Err(Error::DimensionMismatch {
                        what: "multi-hot label",
                        expected: classes,
                        got: v.len(),
                    });
                }
                if v.iter().any(|&b| b > 1) {
                    return Err(Error::invalid_input("multi-hot entries must be 0 or 1"));
                }
                Ok(())
            }
            (TaskKind::Multiclass, Label::MultiHot(_)) => {
                Err(Error::invalid_input("multi-hot label given for a multi-class task"))
            }
            (TaskKind::Multilabel, Label::Class(_)) => {
                Err(Error::invalid_input("class index given for a multi-label task"))
            }
        }
    }

    /// Membership of class `c` as 0/1.
    pub fn indicator(&self, c: usize) -> u8 {
        match self {
            Label::Class(k) => u8::from(*k == c),
            Label::MultiHot(v) => v[c],
        }
    }

    pub fn class(&self) -> Option<usize> {
        match self {
            Label::Class(c) => Some(*c),
            Label::MultiHot(_) => None,
        }
    }
}

/// Index of the largest entry; the first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    (0..values.len()).fold(0, |best, c| if values[c] > values[best] { c } else { best })
}
