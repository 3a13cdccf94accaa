//! Newtonian potential of a spherically symmetric density,
//! `V(r) = (4 pi / r) \int_0^r s^2 n(s) ds + 4 pi \int_r^\infty s n(s) ds`,
//! and the Hartree potential energy `E_pot = 1/2 \int n V dx`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{cumulative_integral, integrate_volume, RadialField, RadialGrid};

/// `V = n * |x|^{-1}`, nonnegative; enters the Hamiltonian as `-V`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    field: RadialField,
}

impl Potential {
    /// Wraps an externally prescribed potential (e.g. a fixed Coulomb source).
    pub fn from_field(field: RadialField) -> Self {
        Self { field }
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            field: RadialField::from_fn(grid, f),
        }
    }

    pub fn field(&self) -> &RadialField {
        &self.field
    }

    pub fn grid(&self) -> &RadialGrid {
        self.field.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }
}

/// Shell-theorem potential of `n` using a single cumulative pass for the
/// inner and outer integrals. The density is taken to vanish beyond `r_max`.
pub fn potential_from_density(n: &RadialField) -> Result<Potential> {
    if let Some((index, &value)) = n.values().iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeDensity { index, value });
    }
    let grid = *n.grid();
    let h = grid.spacing();
    let m = grid.n_points();

    let mut inner = Vec::with_capacity(m + 2);
    let mut outer = Vec::with_capacity(m + 2);
    inner.push(0.0);
    outer.push(0.0);
    for (i, &v) in n.values().iter().enumerate() {
        let r = grid.node(i);
        inner.push(r * r * v);
        outer.push(r * v);
    }
    inner.push(0.0);
    outer.push(0.0);

    let inner = cumulative_integral(h, &inner);
    let outer = cumulative_integral(h, &outer);
    let outer_total = outer[m + 1];

    let values = (0..m)
        .map(|i| {
            let r = grid.node(i);
            4.0 * PI * (inner[i + 1] / r + (outer_total - outer[i + 1]))
        })
        .collect();
    Ok(Potential {
        field: RadialField::new(grid, values)?,
    })
}

/// `1/2 \int n V dx`.
pub fn potential_energy(n: &RadialField, v: &Potential) -> Result<f64> {
    n.check_grid(v.field())?;
    let product: Vec<f64> = n.values().iter().zip(v.values()).map(|(a, b)| a * b).collect();
    Ok(0.5 * integrate_volume(&RadialField::new(*n.grid(), product)?))
}
