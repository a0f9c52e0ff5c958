//! Object-location estimator: Laplace-smoothed co-occurrence counts over
//! (object type, container type, room type) triples, trained on complete
//! worlds and queried for the probability that a single container instance
//! holds an object of a given type.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::world::WorldModel;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("invalid smoothing constant {0}, must be positive and finite")]
    BadAlpha(f64),
    #[error("estimator file, line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimator {
    /// (object type, container type, room type) -> (positives, total).
    counts: BTreeMap<(String, String, String), (u64, u64)>,
    alpha: f64,
    objects: BTreeSet<String>,
    containers: BTreeSet<String>,
    rooms: BTreeSet<String>,
}

impl Estimator {
    /// Count, per (object type, container type, room type): how many container
    /// instances of that kind existed across the corpus, and how many of them
    /// held at least one object of that type.
    pub fn train(worlds: &[WorldModel], alpha: f64) -> Result<Estimator, EstimatorError> {
        if worlds.is_empty() {
            return Err(EstimatorError::EmptyCorpus);
        }
        if alpha <= 0.0 || !alpha.is_finite() {
            return Err(EstimatorError::BadAlpha(alpha));
        }
        let mut est = Estimator {
            counts: BTreeMap::new(),
            alpha,
            objects: BTreeSet::new(),
            containers: BTreeSet::new(),
            rooms: BTreeSet::new(),
        };
        for w in worlds {
            for o in &w.objects {
                est.objects.insert(o.type_name.clone());
            }
            for c in &w.containers {
                est.containers.insert(c.type_name.clone());
                est.rooms.insert(c.room_type.clone());
            }
        }
        for w in worlds {
            for c in &w.containers {
                let occupants: BTreeSet<&str> =
                    w.objects_in(&c.id).map(|o| o.type_name.as_str()).collect();
                for obj_type in &est.objects {
                    let key = (obj_type.clone(), c.type_name.clone(), c.room_type.clone());
                    let e = est.counts.entry(key).or_insert((0, 0));
                    e.1 += 1;
                    if occupants.contains(obj_type.as_str()) {
                        e.0 += 1;
                    }
                }
            }
        }
        Ok(est)
    }

    /// Uninformative estimator: no counts, so every query smooths to 1/2.
    pub fn uniform() -> Estimator {
        Estimator {
            counts: BTreeMap::new(),
            alpha: 1.0,
            objects: BTreeSet::new(),
            containers: BTreeSet::new(),
            rooms: BTreeSet::new(),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// P(a container of this type, in this room type, holds an object of this
    /// object type). Laplace-smoothed; unseen triples fall back to 1/2.
    pub fn p_found(&self, obj_type: &str, container_type: &str, room_type: &str) -> f64 {
        let (pos, total) = self
            .counts
            .get(&(
                obj_type.to_string(),
                container_type.to_string(),
                room_type.to_string(),
            ))
            .copied()
            .unwrap_or((0, 0));
        (pos as f64 + self.alpha) / (total as f64 + 2.0 * self.alpha)
    }

    pub fn counts(&self, obj_type: &str, container_type: &str, room_type: &str) -> (u64, u64) {
        self.counts
            .get(&(
                obj_type.to_string(),
                container_type.to_string(),
                room_type.to_string(),
            ))
            .copied()
            .unwrap_or((0, 0))
    }

    #[cfg(test)]
    pub(crate) fn set_counts(
        &mut self,
        obj_type: &str,
        container_type: &str,
        room_type: &str,
        positives: u64,
        total: u64,
    ) {
        self.counts.insert(
            (
                obj_type.to_string(),
                container_type.to_string(),
                room_type.to_string(),
            ),
            (positives, total),
        );
    }

    pub fn to_text(&self) -> String {
        let join = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(" ");
        let mut out = String::new();
        writeln!(out, "findplan-estimator 1").unwrap();
        writeln!(out, "alpha {}", self.alpha).unwrap();
        writeln!(out, "objects {}", join(&self.objects)).unwrap();
        writeln!(out, "containers {}", join(&self.containers)).unwrap();
        writeln!(out, "rooms {}", join(&self.rooms)).unwrap();
        writeln!(out, "counts {}", self.counts.len()).unwrap();
        for ((o, c, r), (pos, total)) in &self.counts {
            writeln!(out, "{o} {c} {r} {pos} {total}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Estimator, EstimatorError> {
        let mut lines = text.lines().enumerate();
        let eof_line = text.lines().count() + 1;
        let mut next = |want: &str| -> Result<(usize, String), EstimatorError> {
            lines
                .next()
                .map(|(i, l)| (i + 1, l.to_string()))
                .ok_or(EstimatorError::Parse {
                    line: eof_line,
                    msg: format!("unexpected end of file, expected {want}"),
                })
        };
        let err = |line: usize, msg: String| EstimatorError::Parse { line, msg };

        let (ln, header) = next("header")?;
        if header.trim() != "findplan-estimator 1" {
            return Err(err(ln, format!("bad header '{}'", header.trim())));
        }
        let (ln, alpha_line) = next("alpha")?;
        let alpha: f64 = alpha_line
            .strip_prefix("alpha ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| err(ln, "expected 'alpha <f64>'".into()))?;
        if alpha <= 0.0 || !alpha.is_finite() {
            return Err(err(
                ln,
                format!("alpha {alpha} must be positive and finite"),
            ));
        }
        let mut vocab = |name: &str| -> Result<BTreeSet<String>, EstimatorError> {
            let (ln, line) = next(name)?;
            line.strip_prefix(&format!("{name} "))
                .or(if line.trim() == name { Some("") } else { None })
                .map(|rest| rest.split_whitespace().map(str::to_string).collect())
                .ok_or_else(|| err(ln, format!("expected '{name} <names...>'")))
        };
        let objects = vocab("objects")?;
        let containers = vocab("containers")?;
        let rooms = vocab("rooms")?;
        let (ln, counts_hdr) = next("counts header")?;
        let n: usize = counts_hdr
            .strip_prefix("counts ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| err(ln, "expected 'counts <n>'".into()))?;
        let mut counts = BTreeMap::new();
        for _ in 0..n {
            let (ln, row) = next("count row")?;
            let f: Vec<&str> = row.split_whitespace().collect();
            let [o, c, r, pos, total] = f[..] else {
                return Err(err(
                    ln,
                    "expected 'object container room positives total'".into(),
                ));
            };
            let (pos, total): (u64, u64) = match (pos.parse(), total.parse()) {
                (Ok(p), Ok(t)) => (p, t),
                _ => return Err(err(ln, "counts must be nonnegative integers".into())),
            };
            if pos > total {
                return Err(err(ln, format!("positives {pos} exceed total {total}")));
            }
            if counts
                .insert((o.to_string(), c.to_string(), r.to_string()), (pos, total))
                .is_some()
            {
                return Err(err(ln, format!("duplicate count row for '{o} {c} {r}'")));
            }
        }
        Ok(Estimator {
            counts,
            alpha,
            objects,
            containers,
            rooms,
        })
    }
}
