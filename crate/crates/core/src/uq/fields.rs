use crate::phase_space::{MacroState, Primitive, SpatialGrid};
use crate::{Error, Result};

/// Macroscopic quantity of interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    Rho,
    Ux,
    Uy,
    Temp,
}

impl Quantity {
    pub const ALL: [Quantity; 4] = [Quantity::Rho, Quantity::Ux, Quantity::Uy, Quantity::Temp];

    pub fn index(self) -> usize {
        match self {
            Quantity::Rho => 0,
            Quantity::Ux => 1,
            Quantity::Uy => 2,
            Quantity::Temp => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Rho => "rho",
            Quantity::Ux => "ux",
            Quantity::Uy => "uy",
            Quantity::Temp => "T",
        }
    }
}

/// Cell-averaged macroscopic fields on a uniform grid, stored as the
/// concatenation `[rho | ux | uy | T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSet {
    n_cells: usize,
    length: f64,
    values: Vec<f64>,
}

impl FieldSet {
    pub fn new(n_cells: usize, length: f64, values: Vec<f64>) -> Result<Self> {
        if n_cells == 0 || values.len() != 4 * n_cells {
            return Err(Error::Shape(format!(
                "field set needs 4 x {n_cells} values, got {}",
                values.len()
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Config(format!("domain length {length} must be positive")));
        }
        Ok(Self { n_cells, length, values })
    }

    pub fn from_macro(m: &MacroState, sg: &SpatialGrid) -> Result<Self> {
        if m.len() != sg.n_cells() {
            return Err(Error::Shape("macro state and grid disagree".into()));
        }
        let mut values = Vec::with_capacity(4 * m.len());
        for q in [&m.rho, &m.ux, &m.uy, &m.temp] {
            values.extend_from_slice(q);
        }
        Self::new(m.len(), sg.x_max() - sg.x_min(), values)
    }

    pub fn to_macro(&self) -> MacroState {
        MacroState::from_fn(self.n_cells, |i| {
            Primitive::new(
                self.quantity(Quantity::Rho)[i],
                self.quantity(Quantity::Ux)[i],
                self.quantity(Quantity::Uy)[i],
                self.quantity(Quantity::Temp)[i],
            )
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n_cells as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn quantity(&self, q: Quantity) -> &[f64] {
        let n = self.n_cells;
        &self.values[q.index() * n..(q.index() + 1) * n]
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.n_cells, self.length, values)
    }

    /// Conservative averaging onto a grid with `n_cells` cells, which must
    /// divide the current cell count.
    pub fn restrict_to(&self, n_cells: usize) -> Result<Self> {
        if n_cells == 0 || self.n_cells % n_cells != 0 {
            return Err(Error::Config(format!(
                "cannot restrict {} cells onto {n_cells}: grids are not nested",
                self.n_cells
            )));
        }
        let r = self.n_cells / n_cells;
        let values = self
            .values
            .chunks(r)
            .map(|c| c.iter().sum::<f64>() / r as f64)
            .collect();
        Self::new(n_cells, self.length, values)
    }

    /// Two-to-one conservative restriction.
    pub fn restrict(&self) -> Result<Self> {
        if self.n_cells % 2 != 0 {
            return Err(Error::Config(format!("{} cells cannot be halved", self.n_cells)));
        }
        self.restrict_to(self.n_cells / 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restriction_preserves_integrals() {
        let v: Vec<f64> = (0..32).map(|i| (i as f64 * 0.7).sin() + 2.0).collect();
        let f = FieldSet::new(8, 1.0, v).unwrap();
        let g = f.restrict().unwrap();
        assert_eq!(g.n_cells(), 4);
        for q in Quantity::ALL {
            let a: f64 = f.quantity(q).iter().sum::<f64>() * f.dx();
            let b: f64 = g.quantity(q).iter().sum::<f64>() * g.dx();
            assert!((a - b).abs() < 1e-14);
        }
        let (a, b) = (f.restrict_to(2).unwrap(), g.restrict().unwrap());
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| (x - y).abs() < 1e-14));
    }

    #[test]
    fn non_nested_restriction_is_rejected() {
        let f = FieldSet::new(6, 1.0, vec![1.0; 24]).unwrap();
        assert!(matches!(f.restrict_to(4), Err(Error::Config(_))));
        let g = FieldSet::new(5, 1.0, vec![1.0; 20]).unwrap();
        assert!(g.restrict().is_err());
    }

    #[test]
    fn macro_round_trip() {
        let sg = SpatialGrid::new(4, 0.0, 2.0, crate::phase_space::Boundary::Periodic).unwrap();
        let m = MacroState::from_fn(4, |i| Primitive::new(1.0 + i as f64, 0.1, -0.2, 0.5));
        let f = FieldSet::from_macro(&m, &sg).unwrap();
        assert_eq!(f.dx(), 0.5);
        assert_eq!(f.quantity(Quantity::Rho), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(f.to_macro(), m);
    }
}
