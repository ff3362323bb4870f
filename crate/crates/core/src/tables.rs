//! Dense discrete factor tables.
//!
//! A [`FactorTable`] is a non-negative real function over an ordered list of
//! named discrete axes. Values are stored row-major with the last axis varying
//! fastest; that is the only layout used anywhere in the crate (files, memory,
//! tests).

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::model::FactorGraph;

/// Hard cap on the number of cells a single table may hold.
pub const MAX_CELLS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("table has {found} values, expected {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("value {value} at index {index} is negative or not finite")]
    NegativeOrNonFinite { index: usize, value: f64 },
    #[error("axis `{0}` has cardinality zero")]
    ZeroCardinality(String),
    #[error("axis `{0}` appears more than once")]
    DuplicateAxis(String),
    #[error("axis `{name}` has cardinality {left} in one table and {right} in another")]
    CardinalityMismatch {
        name: String,
        left: usize,
        right: usize,
    },
    #[error("unknown axis `{0}`")]
    UnknownAxis(String),
    #[error("state {state} out of range for axis `{name}` (cardinality {cardinality})")]
    StateOutOfRange {
        name: String,
        state: usize,
        cardinality: usize,
    },
    #[error("table would have {cells} cells, more than the limit of {MAX_CELLS}")]
    TooLarge { cells: u128 },
    #[error("total mass is zero")]
    ZeroMass,
}

/// A named discrete axis.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Axis {
    pub name: String,
    pub cardinality: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, cardinality: usize) -> Self {
        Axis {
            name: name.into(),
            cardinality,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorTable {
    axes: Vec<Axis>,
    values: Vec<f64>,
}

fn cell_count(axes: &[Axis]) -> Result<usize, TableError> {
    let mut cells: u128 = 1;
    for axis in axes {
        cells = cells.saturating_mul(axis.cardinality as u128);
    }
    if cells > MAX_CELLS as u128 {
        return Err(TableError::TooLarge { cells });
    }
    Ok(cells as usize)
}

fn check_axes(axes: &[Axis]) -> Result<(), TableError> {
    for (i, axis) in axes.iter().enumerate() {
        if axis.cardinality == 0 {
            return Err(TableError::ZeroCardinality(axis.name.clone()));
        }
        if axes[..i].iter().any(|a| a.name == axis.name) {
            return Err(TableError::DuplicateAxis(axis.name.clone()));
        }
    }
    Ok(())
}

fn strides(axes: &[Axis]) -> Vec<usize> {
    let mut out = vec![0; axes.len()];
    let mut stride = 1;
    for (i, axis) in axes.iter().enumerate().rev() {
        out[i] = stride;
        stride *= axis.cardinality;
    }
    out
}

/// Pairwise (tree) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Row-major odometer over a list of cardinalities.
pub(crate) fn advance(state: &mut [usize], cards: &[usize]) -> bool {
    for i in (0..state.len()).rev() {
        state[i] += 1;
        if state[i] < cards[i] {
            return true;
        }
        state[i] = 0;
    }
    false
}

impl FactorTable {
    pub fn new(axes: Vec<Axis>, values: Vec<f64>) -> Result<Self, TableError> {
        check_axes(&axes)?;
        let expected = cell_count(&axes)?;
        if values.len() != expected {
            return Err(TableError::ShapeMismatch {
                expected,
                found: values.len(),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(TableError::NegativeOrNonFinite { index, value });
        }
        Ok(FactorTable { axes, values })
    }

    pub fn scalar(value: f64) -> Result<Self, TableError> {
        FactorTable::new(Vec::new(), vec![value])
    }

    /// The all-ones table over `axes`.
    pub fn ones(axes: Vec<Axis>) -> Result<Self, TableError> {
        check_axes(&axes)?;
        let n = cell_count(&axes)?;
        Ok(FactorTable {
            axes,
            values: vec![1.0; n],
        })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn axis_names(&self) -> impl Iterator<Item = &str> {
        self.axes.iter().map(|a| a.name.as_str())
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.axes.iter().position(|a| a.name == name)
    }

    pub fn cardinality(&self, name: &str) -> Option<usize> {
        self.axes
            .iter()
            .find(|a| a.name == name)
            .map(|a| a.cardinality)
    }

    /// Flat index of a full assignment given in axis order.
    pub fn index_of(&self, states: &[usize]) -> usize {
        debug_assert_eq!(states.len(), self.axes.len());
        states
            .iter()
            .zip(strides(&self.axes))
            .map(|(s, st)| s * st)
            .sum()
    }

    /// Value at a full assignment given in axis order.
    pub fn get(&self, states: &[usize]) -> f64 {
        self.values[self.index_of(states)]
    }

    /// Sum of all entries.
    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.values)
    }

    /// Multiplies every entry by a non-negative finite constant.
    pub fn scaled(&self, factor: f64) -> Result<Self, TableError> {
        FactorTable::new(
            self.axes.clone(),
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    /// Rescales so that the entries sum to one.
    pub fn normalized(&self) -> Result<Self, TableError> {
        let mass = self.total_mass();
        if mass <= 0.0 {
            return Err(TableError::ZeroMass);
        }
        Ok(FactorTable {
            axes: self.axes.clone(),
            values: self.values.iter().map(|v| v / mass).collect(),
        })
    }

    /// Zeroes every entry whose state on `name` differs from `state`. The
    /// axis itself is kept.
    pub fn clamp(&self, name: &str, state: usize) -> Result<Self, TableError> {
        let pos = self
            .position(name)
            .ok_or_else(|| TableError::UnknownAxis(name.to_string()))?;
        let card = self.axes[pos].cardinality;
        if state >= card {
            return Err(TableError::StateOutOfRange {
                name: name.to_string(),
                state,
                cardinality: card,
            });
        }
        let stride = strides(&self.axes)[pos];
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| if (i / stride) % card == state { v } else { 0.0 })
            .collect();
        Ok(FactorTable {
            axes: self.axes.clone(),
            values,
        })
    }

    /// Reorders the axes. `order` must be a permutation of the axis names.
    pub fn permute<S: AsRef<str>>(&self, order: &[S]) -> Result<Self, TableError> {
        if order.len() != self.axes.len() {
            let missing = self
                .axes
                .iter()
                .find(|a| !order.iter().any(|o| o.as_ref() == a.name))
                .map(|a| a.name.clone())
                .unwrap_or_default();
            return Err(TableError::UnknownAxis(missing));
        }
        let mut axes = Vec::with_capacity(order.len());
        let mut source = Vec::with_capacity(order.len());
        for name in order {
            let pos = self
                .position(name.as_ref())
                .ok_or_else(|| TableError::UnknownAxis(name.as_ref().to_string()))?;
            if source.contains(&pos) {
                return Err(TableError::DuplicateAxis(name.as_ref().to_string()));
            }
            source.push(pos);
            axes.push(self.axes[pos].clone());
        }
        if source.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let old_strides = strides(&self.axes);
        let src_strides: Vec<usize> = source.iter().map(|&p| old_strides[p]).collect();
        let cards: Vec<usize> = axes.iter().map(|a| a.cardinality).collect();
        let mut values = Vec::with_capacity(self.values.len());
        let mut state = vec![0; axes.len()];
        let mut offset = 0usize;
        loop {
            values.push(self.values[offset]);
            let mut i = state.len();
            loop {
                if i == 0 {
                    return Ok(FactorTable { axes, values });
                }
                i -= 1;
                state[i] += 1;
                offset += src_strides[i];
                if state[i] < cards[i] {
                    break;
                }
                offset -= src_strides[i] * cards[i];
                state[i] = 0;
            }
        }
    }

    /// Sums out `out_vars`. Remaining axes keep their relative order.
    pub fn marginalize<S: AsRef<str>>(&self, out_vars: &[S]) -> Result<Self, TableError> {
        for v in out_vars {
            if self.position(v.as_ref()).is_none() {
                return Err(TableError::UnknownAxis(v.as_ref().to_string()));
            }
        }
        if out_vars.is_empty() {
            return Ok(self.clone());
        }
        let summed = |a: &Axis| out_vars.iter().any(|v| v.as_ref() == a.name);
        let kept: Vec<Axis> = self.axes.iter().filter(|a| !summed(a)).cloned().collect();
        let order: Vec<&str> = kept
            .iter()
            .map(|a| a.name.as_str())
            .chain(self.axes.iter().filter(|a| summed(a)).map(|a| a.name.as_str()))
            .collect();
        let arranged = self.permute(&order)?;
        let block = arranged.values.len() / cell_count(&kept)?;
        let values = arranged
            .values
            .chunks(block)
            .map(pairwise_sum)
            .collect();
        Ok(FactorTable { axes: kept, values })
    }

    /// Sums out everything except `keep`; the result's axes follow `keep`.
    pub fn marginal_onto<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self, TableError> {
        for v in keep {
            if self.position(v.as_ref()).is_none() {
                return Err(TableError::UnknownAxis(v.as_ref().to_string()));
            }
        }
        let out: Vec<&str> = self
            .axes
            .iter()
            .map(|a| a.name.as_str())
            .filter(|n| !keep.iter().any(|k| k.as_ref() == *n))
            .collect();
        self.marginalize(&out)?.permute(keep)
    }

    /// Checks that summing over `vars` gives one for every configuration of
    /// the remaining axes. Returns the verdict and the worst absolute
    /// deviation from one.
    pub fn is_normalized_over<S: AsRef<str>>(
        &self,
        vars: &[S],
        tol: f64,
    ) -> Result<(bool, f64), TableError> {
        let sums = self.marginalize(vars)?;
        let worst = sums
            .values
            .iter()
            .map(|s| (s - 1.0).abs())
            .fold(0.0_f64, f64::max);
        Ok((worst <= tol, worst))
    }

    /// Pointwise product over the union of axes, ordered by first appearance.
    pub fn product(tables: &[&FactorTable]) -> Result<FactorTable, TableError> {
        let mut axes: Vec<Axis> = Vec::new();
        for table in tables {
            for axis in &table.axes {
                match axes.iter().find(|a| a.name == axis.name) {
                    Some(a) if a.cardinality != axis.cardinality => {
                        return Err(TableError::CardinalityMismatch {
                            name: axis.name.clone(),
                            left: a.cardinality,
                            right: axis.cardinality,
                        })
                    }
                    Some(_) => {}
                    None => axes.push(axis.clone()),
                }
            }
        }
        let n = cell_count(&axes)?;
        let cards: Vec<usize> = axes.iter().map(|a| a.cardinality).collect();
        // per input, the stride contributed by each output axis (0 if absent)
        let input_strides: Vec<Vec<usize>> = tables
            .iter()
            .map(|t| {
                let own = strides(&t.axes);
                axes.iter()
                    .map(|a| t.position(&a.name).map_or(0, |p| own[p]))
                    .collect()
            })
            .collect();
        let mut offsets = vec![0usize; tables.len()];
        let mut state = vec![0usize; axes.len()];
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            let mut v = 1.0;
            for (t, &off) in tables.iter().zip(&offsets) {
                v *= t.values[off];
            }
            values.push(v);
            let mut i = state.len();
            while i > 0 {
                i -= 1;
                state[i] += 1;
                for (off, st) in offsets.iter_mut().zip(&input_strides) {
                    *off += st[i];
                }
                if state[i] < cards[i] {
                    break;
                }
                for (off, st) in offsets.iter_mut().zip(&input_strides) {
                    *off -= st[i] * cards[i];
                }
                state[i] = 0;
            }
        }
        Ok(FactorTable { axes, values })
    }

    /// Product with the all-ones table over `axes`, i.e. broadcasting onto a
    /// superset of axes. New axes are appended in the given order.
    pub fn extended(&self, axes: &[Axis]) -> Result<FactorTable, TableError> {
        let extra: Vec<Axis> = axes
            .iter()
            .filter(|a| self.position(&a.name).is_none())
            .cloned()
            .collect();
        if extra.is_empty() {
            return Ok(self.clone());
        }
        let ones = FactorTable::ones(extra)?;
        FactorTable::product(&[self, &ones])
    }

    /// Iterates over `(states, value)` pairs in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let cards: Vec<usize> = self.axes.iter().map(|a| a.cardinality).collect();
        let mut state = vec![0usize; cards.len()];
        let mut first = true;
        self.values.iter().map(move |&v| {
            if !first {
                advance(&mut state, &cards);
            }
            first = false;
            (state.clone(), v)
        })
    }

    /// Name-to-cardinality map of the axes.
    pub fn shape(&self) -> HashMap<&str, usize> {
        self.axes
            .iter()
            .map(|a| (a.name.as_str(), a.cardinality))
            .collect()
    }
}

impl fmt::Display for FactorTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.axis_names().collect();
        write!(f, "[{}]", names.join(", "))?;
        for v in &self.values {
            write!(f, " {v:?}")?;
        }
        Ok(())
    }
}

/// The global constant that turns the product of a graph's functions into a
/// distribution: one over the total mass of that product.
pub fn normalization_constant(graph: &FactorGraph) -> Result<f64, TableError> {
    let mass = crate::inference::unnormalized_joint(graph)?.total_mass();
    if mass <= 0.0 {
        return Err(TableError::ZeroMass);
    }
    Ok(1.0 / mass)
}
