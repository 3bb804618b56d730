use std::io::Write;

use serde::Serialize;

use super::cliques::{label_and_sort, maximal_cliques};
use super::profile::PersonProfile;
use super::TotemError;

/// Cosine similarity; `degenerate` marks an all-zero input, whose
/// similarity is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cosine {
    pub value: f64,
    pub degenerate: bool,
}

/// Cosine of two count vectors. Dot product and squared norms are exact
/// integers, so `cosine(u, u)` is exactly 1 for any nonzero `u` of
/// moderate magnitude.
pub fn cosine(u: &[u64], v: &[u64]) -> Result<Cosine, TotemError> {
    if u.len() != v.len() {
        return Err(TotemError::LengthMismatch(u.len(), v.len()));
    }
    let dot: u128 = u.iter().zip(v).map(|(&a, &b)| a as u128 * b as u128).sum();
    let uu: u128 = u.iter().map(|&a| a as u128 * a as u128).sum();
    let vv: u128 = v.iter().map(|&b| b as u128 * b as u128).sum();
    if uu == 0 || vv == 0 {
        return Ok(Cosine {
            value: 0.0,
            degenerate: true,
        });
    }
    let denom = match uu.checked_mul(vv) {
        Some(p) => (p as f64).sqrt(),
        None => (uu as f64).sqrt() * (vv as f64).sqrt(),
    };
    Ok(Cosine {
        value: (dot as f64 / denom).min(1.0),
        degenerate: false,
    })
}

/// Square, symmetric person-by-person cosine similarities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityMatrix {
    person_ids: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    /// Wraps precomputed values after checking shape, symmetry and range.
    pub fn from_values(person_ids: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self, TotemError> {
        let n = person_ids.len();
        if values.len() != n || values.iter().any(|row| row.len() != n) {
            return Err(TotemError::InvalidMatrix);
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[i][j];
                if v != values[j][i] || !(0.0..=1.0).contains(&v) {
                    return Err(TotemError::InvalidMatrix);
                }
            }
        }
        Ok(SimilarityMatrix { person_ids, values })
    }

    pub fn person_ids(&self) -> &[String] {
        &self.person_ids
    }

    pub fn len(&self) -> usize {
        self.person_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.person_ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Header row and first column carry person ids; values use six
    /// decimal places.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec![String::new()];
        header.extend(self.person_ids.iter().cloned());
        wtr.write_record(&header)?;
        for (id, row) in self.person_ids.iter().zip(&self.values) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| format!("{v:.6}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Pairwise cosine over count vectors, in input order. Each off-diagonal
/// value is computed once and mirrored.
pub fn similarity_matrix(profiles: &[PersonProfile]) -> Result<SimilarityMatrix, TotemError> {
    let n = profiles.len();
    if n < 2 {
        return Err(TotemError::TooFewProfiles(n));
    }
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        let own = cosine(&profiles[i].count_vector, &profiles[i].count_vector)?;
        values[i][i] = if own.degenerate { 0.0 } else { 1.0 };
        for j in i + 1..n {
            let c = cosine(&profiles[i].count_vector, &profiles[j].count_vector)?;
            values[i][j] = c.value;
            values[j][i] = c.value;
        }
    }
    Ok(SimilarityMatrix {
        person_ids: profiles.iter().map(|p| p.person_id.clone()).collect(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateGroup {
    pub members: Vec<String>,
    pub min_similarity: f64,
}

/// Maximal cliques of at least `group_size` people in the graph that links
/// two people when their similarity reaches `threshold`.
pub fn find_groups(
    matrix: &SimilarityMatrix,
    threshold: f64,
    group_size: usize,
) -> Result<Vec<CandidateGroup>, TotemError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(TotemError::InvalidSimilarityThreshold(threshold));
    }
    if group_size < 2 {
        return Err(TotemError::InvalidMinSize(group_size));
    }
    let n = matrix.len();
    let edges = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| matrix.get(i, j) >= threshold);
    let cliques = label_and_sort(matrix.person_ids(), maximal_cliques(n, edges), group_size);
    let index = |id: &String| matrix.person_ids().iter().position(|p| p == id).expect("member of matrix");
    Ok(cliques
        .into_iter()
        .map(|members| {
            let idx: Vec<usize> = members.iter().map(index).collect();
            let min_similarity = idx
                .iter()
                .enumerate()
                .flat_map(|(k, &i)| idx[k + 1..].iter().map(move |&j| (i, j)))
                .map(|(i, j)| matrix.get(i, j))
                .fold(f64::INFINITY, f64::min);
            CandidateGroup {
                members,
                min_similarity,
            }
        })
        .collect())
}
