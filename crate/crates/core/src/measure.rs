//! Discrete probability measures on R^d.
//!
//! A [`DiscreteMeasure`] is a finite list of weighted atoms. Construction
//! canonicalizes the data: zero-weight atoms are dropped, near-duplicate
//! points are merged, weights are renormalized to sum to one, and atoms are
//! sorted lexicographically by position. All operations are pure; values are
//! immutable after construction and safe to share across threads.

use crate::error::{Error, Result};
use crate::fmt::sig12;

/// Inputs whose weights deviate from total mass 1 by more than this are
/// rejected; smaller deviations are renormalized.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

/// Atoms closer than `MERGE_RADIUS_FACTOR * (1 + diameter)` are merged.
pub const MERGE_RADIUS_FACTOR: f64 = 1e-9;

/// A discrete probability measure: weighted atoms in R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    weights: Vec<f64>,
    /// Row-major `n x dim` coordinates, lexicographically sorted.
    points: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure from `(weight, point)` atoms, canonicalizing as
    /// described in the module docs.
    pub fn new(dim: usize, atoms: &[(f64, Vec<f64>)]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidMeasure("dimension must be positive".into()));
        }
        let mut weights = Vec::with_capacity(atoms.len());
        let mut points = Vec::with_capacity(atoms.len() * dim);
        for (w, x) in atoms {
            if x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: x.len(),
                });
            }
            if !w.is_finite() || x.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidMeasure(
                    "non-finite weight or coordinate".into(),
                ));
            }
            if *w < 0.0 {
                return Err(Error::InvalidMeasure(format!("negative weight {w}")));
            }
            if *w == 0.0 {
                continue;
            }
            weights.push(*w);
            points.extend_from_slice(x);
        }
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("no atoms with positive weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, outside 1 +/- {WEIGHT_SUM_TOLERANCE}"
            )));
        }
        for w in &mut weights {
            *w /= total;
        }
        let mut m = Self {
            dim,
            weights,
            points,
        };
        m.sort_atoms();
        m.merge_close_atoms();
        Ok(m)
    }

    /// Internal constructor for data already in canonical form (sorted,
    /// merged, normalized). Skips renormalization so that weight bits are
    /// preserved, e.g. under translation.
    pub(crate) fn from_canonical(dim: usize, weights: Vec<f64>, points: Vec<f64>) -> Self {
        debug_assert_eq!(points.len(), weights.len() * dim);
        Self {
            dim,
            weights,
            points,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Iterates over `(weight, point)` atoms.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.weights
            .iter()
            .copied()
            .zip(self.points.chunks_exact(self.dim))
    }

    /// The barycentre `[m] = sum_i w_i x_i`.
    pub fn barycentre(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.dim];
        for (w, x) in self.atoms() {
            for (bk, xk) in b.iter_mut().zip(x) {
                *bk += w * xk;
            }
        }
        b
    }

    /// The absolute moment `m_p = sum_i w_i |x_i|^p` for `p >= 1`.
    pub fn moment(&self, p: f64) -> f64 {
        assert!(p >= 1.0, "moment order must be >= 1");
        self.atoms()
            .map(|(w, x)| w * norm(x).powf(p))
            .sum()
    }

    /// The second moment, summed directly as squares.
    pub fn second_moment(&self) -> f64 {
        self.atoms().map(|(w, x)| w * sq_norm(x)).sum()
    }

    /// Translates the measure so its barycentre is `b`.
    ///
    /// The translation is corrected iteratively until the recomputed
    /// barycentre stops moving in floating point, which makes the operation
    /// exactly idempotent: recentring an already-recentred measure returns
    /// it atom-for-atom.
    pub fn recentre(&self, b: &[f64]) -> Result<Self> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: b.len(),
            });
        }
        let mut points = self.points.clone();
        for _ in 0..16 {
            let current = barycentre_of(self.dim, &self.weights, &points);
            let shift: Vec<f64> = b.iter().zip(&current).map(|(bk, ck)| bk - ck).collect();
            let mut moved = false;
            for row in points.chunks_exact_mut(self.dim) {
                for (xk, sk) in row.iter_mut().zip(&shift) {
                    let next = *xk + sk;
                    if next.to_bits() != xk.to_bits() {
                        *xk = next;
                        moved = true;
                    }
                }
            }
            if !moved {
                break;
            }
        }
        Ok(Self::from_canonical(
            self.dim,
            self.weights.clone(),
            points,
        ))
    }

    /// Lower and upper corners of the bounding box of the support.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for (_, x) in self.atoms() {
            for k in 0..self.dim {
                lo[k] = lo[k].min(x[k]);
                hi[k] = hi[k].max(x[k]);
            }
        }
        (lo, hi)
    }

    /// Re-clusters atoms with an explicit merge radius (greedy union of
    /// balls: an atom joins a cluster when it is within the radius of any
    /// member). Merged atoms sit at the mass-weighted mean.
    pub fn merge_within(&self, radius: f64) -> Self {
        let mut m = self.clone();
        m.merge_close_atoms_with(radius.max(0.0));
        m
    }

    /// Diagonal of the bounding box; the diameter scale used for merge radii.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.iter()
            .zip(&hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }

    fn sort_atoms(&mut self) {
        let dim = self.dim;
        let mut order: Vec<usize> = (0..self.weights.len()).collect();
        order.sort_by(|&a, &b| {
            let pa = &self.points[a * dim..(a + 1) * dim];
            let pb = &self.points[b * dim..(b + 1) * dim];
            pa.partial_cmp(pb).unwrap().then(a.cmp(&b))
        });
        let weights = order.iter().map(|&i| self.weights[i]).collect();
        let mut points = Vec::with_capacity(self.points.len());
        for &i in &order {
            points.extend_from_slice(&self.points[i * dim..(i + 1) * dim]);
        }
        self.weights = weights;
        self.points = points;
    }

    /// Merges clusters of atoms closer than the merge radius, placing the
    /// merged atom at the mass-weighted mean. Repeats until no pair of
    /// remaining atoms is within the radius.
    fn merge_close_atoms(&mut self) {
        let radius = MERGE_RADIUS_FACTOR * (1.0 + self.diameter());
        self.merge_close_atoms_with(radius);
    }

    fn merge_close_atoms_with(&mut self, radius: f64) {
        loop {
            let n = self.weights.len();
            let dim = self.dim;
            let mut cluster: Vec<usize> = (0..n).collect();
            let mut any = false;
            // Atoms are lexicographically sorted, so candidates share a
            // first coordinate within the radius.
            for i in 0..n {
                let mut j = i + 1;
                while j < n && self.points[j * dim] - self.points[i * dim] <= radius {
                    let d = dist(
                        &self.points[i * dim..(i + 1) * dim],
                        &self.points[j * dim..(j + 1) * dim],
                    );
                    if d <= radius {
                        let (a, b) = (root(&cluster, i), root(&cluster, j));
                        if a != b {
                            cluster[a.max(b)] = a.min(b);
                            any = true;
                        }
                    }
                    j += 1;
                }
            }
            if !any {
                return;
            }
            let mut merged: Vec<(f64, Vec<f64>)> = Vec::new();
            let mut index: Vec<Option<usize>> = vec![None; n];
            for i in 0..n {
                let r = root(&cluster, i);
                let slot = *index[r].get_or_insert_with(|| {
                    merged.push((0.0, vec![0.0; dim]));
                    merged.len() - 1
                });
                let (w, x) = &mut merged[slot];
                *w += self.weights[i];
                for k in 0..dim {
                    x[k] += self.weights[i] * self.points[i * dim + k];
                }
            }
            self.weights.clear();
            self.points.clear();
            for (w, x) in merged {
                self.weights.push(w);
                self.points.extend(x.iter().map(|v| v / w));
            }
            self.sort_atoms();
        }
    }
}

fn root(parent: &[usize], mut i: usize) -> usize {
    while parent[i] != i {
        i = parent[i];
    }
    i
}

fn barycentre_of(dim: usize, weights: &[f64], points: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; dim];
    for (i, w) in weights.iter().enumerate() {
        for k in 0..dim {
            b[k] += w * points[i * dim + k];
        }
    }
    b
}

pub(crate) fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    sq_norm(x).sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

// ---------------------------------------------------------------------------
// CSV and JSON readers/writers.
//
// CSV rows are `weight,x1,...,xd` with an optional header; the dimension is
// inferred from the column count. JSON is
// `{"dim": d, "atoms": [{"w": w, "x": [..]}]}`. Both readers reject
// non-finite numbers.
// ---------------------------------------------------------------------------

impl DiscreteMeasure {
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut atoms: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut dim = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: Option<Vec<f64>> = fields
                .iter()
                .map(|f| f.parse::<f64>().ok())
                .collect();
            let Some(values) = parsed else {
                if atoms.is_empty() && dim.is_none() {
                    continue; // header line
                }
                return Err(Error::Parse(format!(
                    "line {}: non-numeric field in '{line}'",
                    lineno + 1
                )));
            };
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse(format!(
                    "line {}: non-finite value",
                    lineno + 1
                )));
            }
            if values.len() < 2 {
                return Err(Error::Parse(format!(
                    "line {}: expected weight plus at least one coordinate",
                    lineno + 1
                )));
            }
            let d = values.len() - 1;
            match dim {
                None => dim = Some(d),
                Some(existing) if existing != d => {
                    return Err(Error::Parse(format!(
                        "line {}: {} coordinates, expected {}",
                        lineno + 1,
                        d,
                        existing
                    )));
                }
                _ => {}
            }
            atoms.push((values[0], values[1..].to_vec()));
        }
        let dim = dim.ok_or_else(|| Error::Parse("no data rows".into()))?;
        Self::new(dim, &atoms)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("weight");
        for k in 1..=self.dim {
            out.push_str(&format!(",x{k}"));
        }
        out.push('\n');
        for (w, x) in self.atoms() {
            out.push_str(&sig12(w));
            for c in x {
                out.push(',');
                out.push_str(&sig12(*c));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("json: {e}")))?;
        let dim = value
            .get("dim")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Parse("json: missing integer field 'dim'".into()))?
            as usize;
        let atoms_json = value
            .get("atoms")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::Parse("json: missing array field 'atoms'".into()))?;
        let mut atoms = Vec::with_capacity(atoms_json.len());
        for (i, a) in atoms_json.iter().enumerate() {
            let w = a
                .get("w")
                .and_then(|v| v.as_f64())
                .ok_or_else(|| Error::Parse(format!("json: atom {i}: missing 'w'")))?;
            let x: Vec<f64> = a
                .get("x")
                .and_then(|v| v.as_array())
                .ok_or_else(|| Error::Parse(format!("json: atom {i}: missing 'x'")))?
                .iter()
                .map(|v| v.as_f64().filter(|f| f.is_finite()))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::Parse(format!("json: atom {i}: bad coordinate")))?;
            if !w.is_finite() {
                return Err(Error::Parse(format!("json: atom {i}: non-finite weight")));
            }
            atoms.push((w, x));
        }
        Self::new(dim, &atoms)
    }

    pub fn to_json_string(&self) -> String {
        let mut out = format!("{{\"dim\": {}, \"atoms\": [", self.dim);
        for (i, (w, x)) in self.atoms().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&format!("{{\"w\": {}, \"x\": [", sig12(w)));
            for (k, c) in x.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                out.push_str(&sig12(*c));
            }
            out.push_str("]}");
        }
        out.push_str("]}");
        out
    }

    /// Reads a measure from a file, choosing the format by extension
    /// (`.json` for JSON, anything else parses as CSV).
    pub fn read_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_csv_str(&text)
        }
    }
}

/// A Dirac measure at `point`.
pub fn dirac(point: &[f64]) -> DiscreteMeasure {
    DiscreteMeasure::new(point.len(), &[(1.0, point.to_vec())]).expect("valid dirac")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m1d(atoms: &[(f64, f64)]) -> DiscreteMeasure {
        let atoms: Vec<(f64, Vec<f64>)> = atoms.iter().map(|&(w, x)| (w, vec![x])).collect();
        DiscreteMeasure::new(1, &atoms).unwrap()
    }

    #[test]
    fn barycentre_of_dirac() {
        let m = dirac(&[1.0, 2.0]);
        assert_eq!(m.barycentre(), vec![1.0, 2.0]);
    }

    #[test]
    fn barycentre_symmetric_pair() {
        let m = DiscreteMeasure::new(
            2,
            &[(0.5, vec![-1.0, 0.0]), (0.5, vec![1.0, 0.0])],
        )
        .unwrap();
        assert_eq!(m.barycentre(), vec![0.0, 0.0]);
    }

    #[test]
    fn barycentre_five_point_cross() {
        // nu of the planar dominance example: five atoms, weight 1/5 each.
        let m = DiscreteMeasure::new(
            2,
            &[
                (0.2, vec![0.4, 0.0]),
                (0.2, vec![-0.4, 0.0]),
                (0.2, vec![0.0, 0.4]),
                (0.2, vec![0.0, -0.4]),
                (0.2, vec![0.0, 0.0]),
            ],
        )
        .unwrap();
        assert_eq!(m.barycentre(), vec![0.0, 0.0]);
    }

    #[test]
    fn moment_examples() {
        assert_eq!(dirac(&[0.0]).moment(2.0), 0.0);
        // Four atoms at (+-1, 0), (+-2, 0), weight 1/4 each.
        let mu = DiscreteMeasure::new(
            2,
            &[
                (0.25, vec![-1.0, 0.0]),
                (0.25, vec![1.0, 0.0]),
                (0.25, vec![-2.0, 0.0]),
                (0.25, vec![2.0, 0.0]),
            ],
        )
        .unwrap();
        assert!((mu.moment(2.0) - 2.5).abs() < 1e-15);
        let pair = m1d(&[(0.5, -1.0), (0.5, 1.0)]);
        assert_eq!(pair.moment(2.0), 1.0);
    }

    #[test]
    fn recentre_examples() {
        let m = m1d(&[(0.5, 0.0), (0.5, 2.0)]);
        let r = m.recentre(&[0.0]).unwrap();
        assert_eq!(r.point(0), &[-1.0]);
        assert_eq!(r.point(1), &[1.0]);

        let d = dirac(&[1.0, 0.0]).recentre(&[0.0, 0.0]).unwrap();
        assert_eq!(d.point(0), &[0.0, 0.0]);

        let centred = m1d(&[(0.5, -1.0), (0.5, 1.0)]);
        let same = centred.recentre(&[0.0]).unwrap();
        assert_eq!(same, centred);
    }

    #[test]
    fn recentre_is_idempotent_atom_for_atom() {
        let m = m1d(&[(0.3, 0.1), (0.3, 0.7), (0.4, 2.3)]);
        let b = [0.25];
        let once = m.recentre(&b).unwrap();
        let twice = once.recentre(&b).unwrap();
        assert_eq!(once, twice);
        for i in 0..once.len() {
            assert_eq!(once.point(i)[0].to_bits(), twice.point(i)[0].to_bits());
        }
    }

    #[test]
    fn second_moment_decomposition() {
        let m = m1d(&[(0.2, -0.5), (0.5, 1.0), (0.3, 3.0)]);
        let b = m.barycentre();
        let var: f64 = m
            .atoms()
            .map(|(w, x)| w * (x[0] - b[0]) * (x[0] - b[0]))
            .sum();
        assert!((m.moment(2.0) - (b[0] * b[0] + var)).abs() < 1e-14);
    }

    #[test]
    fn merges_near_duplicates_and_drops_zero_weight() {
        let m = DiscreteMeasure::new(
            1,
            &[
                (0.5, vec![1.0]),
                (0.25, vec![1.0 + 1e-13]),
                (0.0, vec![5.0]),
                (0.25, vec![2.0]),
            ],
        )
        .unwrap();
        assert_eq!(m.len(), 2);
        assert!((m.weight(0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn weight_validation() {
        assert!(DiscreteMeasure::new(1, &[(0.9, vec![0.0])]).is_err());
        assert!(DiscreteMeasure::new(1, &[(-0.1, vec![0.0]), (1.1, vec![1.0])]).is_err());
        assert!(DiscreteMeasure::new(1, &[(f64::NAN, vec![0.0])]).is_err());
        // Within 1e-6 of total mass one: renormalized.
        let m = DiscreteMeasure::new(1, &[(0.5000001, vec![0.0]), (0.5, vec![1.0])]).unwrap();
        let total: f64 = m.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn csv_parsing() {
        let m = DiscreteMeasure::from_csv_str("weight,x1,x2\n0.5,-1,0\n0.5,1,0\n").unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.len(), 2);
        // Headerless works too.
        let m2 = DiscreteMeasure::from_csv_str("0.5,-1,0\n0.5,1,0\n").unwrap();
        assert_eq!(m, m2);
        assert!(DiscreteMeasure::from_csv_str("0.5,nan\n0.5,1\n").is_err());
        assert!(DiscreteMeasure::from_csv_str("0.5,inf\n0.5,1\n").is_err());
        assert!(DiscreteMeasure::from_csv_str("0.5,1\n0.5,1,2\n").is_err());
    }

    #[test]
    fn json_parsing() {
        let text = r#"{"dim": 2, "atoms": [{"w": 0.5, "x": [-1, 0]}, {"w": 0.5, "x": [1, 0]}]}"#;
        let m = DiscreteMeasure::from_json_str(text).unwrap();
        assert_eq!(m.dim(), 2);
        let back = DiscreteMeasure::from_json_str(&m.to_json_string()).unwrap();
        assert_eq!(m, back);
    }

    proptest! {
        // Round trip through both serializers is bit-identical for short
        // decimal inputs (dyadic weights, eighth-integer coordinates).
        #[test]
        fn serialization_round_trips(
            pattern in 0usize..5,
            pts in proptest::collection::vec((-40i32..=40, -40i32..=40), 4)
        ) {
            const PATTERNS: [&[f64]; 5] = [
                &[1.0],
                &[0.5, 0.5],
                &[0.5, 0.25, 0.25],
                &[0.25, 0.25, 0.25, 0.25],
                &[0.5, 0.25, 0.125, 0.125],
            ];
            let atoms: Vec<(f64, Vec<f64>)> = PATTERNS[pattern]
                .iter()
                .zip(&pts)
                .map(|(&w, &(a, b))| (w, vec![a as f64 / 8.0, b as f64 / 8.0]))
                .collect();
            let m = DiscreteMeasure::new(2, &atoms).unwrap();

            let from_csv = DiscreteMeasure::from_csv_str(&m.to_csv_string()).unwrap();
            prop_assert_eq!(&from_csv, &m);
            for i in 0..m.len() {
                prop_assert_eq!(from_csv.weight(i).to_bits(), m.weight(i).to_bits());
                for k in 0..2 {
                    prop_assert_eq!(from_csv.point(i)[k].to_bits(), m.point(i)[k].to_bits());
                }
            }
            let from_json = DiscreteMeasure::from_json_str(&m.to_json_string()).unwrap();
            prop_assert_eq!(&from_json, &m);
        }
    }
}
