//! Energy groups on a truncated energy interval. Group 0 is the highest
//! energy group; boundaries decrease with the group index.

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, map_rule, GaussRule, NodalBasis};

#[derive(Clone, Debug)]
pub struct EnergyGrid {
    /// `E_max = b[0] > b[1] > ... > b[N] = E_min` (keV).
    boundaries: Vec<f64>,
    degrees: Vec<usize>,
    rules: Vec<GaussRule>,
    bases: Vec<NodalBasis>,
    offsets: Vec<usize>,
    monoenergetic: bool,
}

/// One energy quadrature node of the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyNode {
    pub group: usize,
    pub local: usize,
    pub energy: f64,
    pub weight: f64,
}

impl EnergyGrid {
    /// `n` groups of equal width on `(e_min, e_max)`, all of degree `r`.
    pub fn uniform(e_min: f64, e_max: f64, n: usize, r: usize) -> Result<Self> {
        if !(e_min > 0.0) || !(e_max > e_min) || !e_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "energy range must satisfy 0 < e_min < e_max, got ({e_min}, {e_max})"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidArgument(
                "at least one energy group required".into(),
            ));
        }
        let b = (0..=n)
            .map(|g| e_max - (e_max - e_min) * g as f64 / n as f64)
            .collect();
        Self::from_boundaries(b, vec![r; n])
    }

    /// Explicit decreasing boundaries with one degree per group.
    pub fn from_boundaries(boundaries: Vec<f64>, degrees: Vec<usize>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::InvalidArgument(
                "energy grid needs at least two boundaries".into(),
            ));
        }
        if let Some(w) = boundaries.windows(2).find(|w| !(w[0] > w[1])) {
            return Err(Error::InvalidArgument(format!(
                "energy boundaries must be strictly decreasing, found {} then {}",
                w[0], w[1]
            )));
        }
        if !(boundaries[boundaries.len() - 1] > 0.0) {
            return Err(Error::InvalidArgument("energies must be positive".into()));
        }
        if degrees.len() != boundaries.len() - 1 {
            return Err(Error::InvalidArgument(format!(
                "{} degrees given for {} groups",
                degrees.len(),
                boundaries.len() - 1
            )));
        }
        Self::build(boundaries, degrees, false)
    }

    /// A single group of unit width centred at `energy`, degree 0. Used for
    /// monoenergetic problems together with an elastic kernel.
    pub fn monoenergetic(energy: f64) -> Result<Self> {
        if !energy.is_finite() {
            return Err(Error::InvalidArgument("energy must be finite".into()));
        }
        Self::build(vec![energy + 0.5, energy - 0.5], vec![0], true)
    }

    fn build(boundaries: Vec<f64>, degrees: Vec<usize>, monoenergetic: bool) -> Result<Self> {
        let mut rules = Vec::with_capacity(degrees.len());
        let mut bases = Vec::with_capacity(degrees.len());
        let mut offsets = vec![0];
        for (g, &r) in degrees.iter().enumerate() {
            let rule = map_rule(&gauss_legendre(r + 1)?, boundaries[g + 1], boundaries[g])?;
            bases.push(NodalBasis::from_rule(&rule)?);
            offsets.push(offsets[g] + rule.len());
            rules.push(rule);
        }
        Ok(Self {
            boundaries,
            degrees,
            rules,
            bases,
            offsets,
            monoenergetic,
        })
    }

    pub fn is_monoenergetic(&self) -> bool {
        self.monoenergetic
    }

    pub fn num_groups(&self) -> usize {
        self.degrees.len()
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn e_min(&self) -> f64 {
        self.boundaries[self.boundaries.len() - 1]
    }

    pub fn e_max(&self) -> f64 {
        self.boundaries[0]
    }

    /// `(low, high)` energies of group `g`.
    pub fn group_interval(&self, g: usize) -> (f64, f64) {
        (self.boundaries[g + 1], self.boundaries[g])
    }

    pub fn degree(&self, g: usize) -> usize {
        self.degrees[g]
    }

    pub fn rule(&self, g: usize) -> &GaussRule {
        &self.rules[g]
    }

    pub fn group_basis(&self, g: usize) -> &NodalBasis {
        &self.bases[g]
    }

    /// Global index of the first node of group `g`.
    pub fn node_offset(&self, g: usize) -> usize {
        self.offsets[g]
    }

    pub fn node_range(&self, g: usize) -> std::ops::Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets[self.degrees.len()]
    }

    pub fn node(&self, l: usize) -> EnergyNode {
        let g = self.offsets.partition_point(|&o| o <= l) - 1;
        let local = l - self.offsets[g];
        EnergyNode {
            group: g,
            local,
            energy: self.rules[g].nodes[local],
            weight: self.rules[g].weights[local],
        }
    }

    pub fn nodes(&self) -> Vec<EnergyNode> {
        (0..self.num_nodes()).map(|l| self.node(l)).collect()
    }

    /// Group containing `e` (boundaries belong to the higher group).
    pub fn group_of(&self, e: f64) -> Option<usize> {
        if e > self.e_max() || e < self.e_min() {
            return None;
        }
        Some((self.boundaries[1..].partition_point(|&b| b > e)).min(self.num_groups() - 1))
    }

    /// Nominal energy mesh size (largest group width).
    pub fn h(&self) -> f64 {
        self.boundaries
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}
