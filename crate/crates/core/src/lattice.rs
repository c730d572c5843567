//! Unit-conductance grids approximating a rectangle (or an annulus when
//! the rows wrap around), with the two short sides as `Â` and `Ǎ`.

use crate::error::{Error, Result};
use crate::network::{set_resistance, BoundarySpec, Edge, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
    /// Identify the top and bottom rows (annulus topology).
    pub periodic: bool,
}

/// Grid network with `Â` = first column and `Ǎ` = last column, `h ≡ 0`.
/// Edges inside a boundary column are omitted since both ends are fixed.
pub fn grid(shape: GridShape) -> Result<(Network, BoundarySpec)> {
    let GridShape { rows, cols, periodic } = shape;
    if rows < 8 || cols < 8 {
        return Err(Error::InvalidArgument(format!("grid {rows}x{cols} is smaller than 8x8")));
    }
    let id = |r: usize, c: usize| r * cols + c;
    let names = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| format!("{r},{c}")))
        .collect();
    let mut edges = Vec::new();
    let unit = |u, v| Edge { u, v, conductance: 1.0 };
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push(unit(id(r, c), id(r, c + 1)));
            }
            let interior_col = c > 0 && c + 1 < cols;
            if interior_col && (r + 1 < rows || periodic) {
                edges.push(unit(id(r, c), id((r + 1) % rows, c)));
            }
        }
    }
    let net = Network::new(names, edges)?;
    let hat: Vec<usize> = (0..rows).map(|r| id(r, 0)).collect();
    let check: Vec<usize> = (0..rows).map(|r| id(r, cols - 1)).collect();
    let pairs = hat.iter().chain(&check).map(|&v| (v, 0.0)).collect();
    let bc = BoundarySpec::new(&net, pairs)?.with_partition(hat, check)?;
    Ok((net, bc))
}

/// `R^eff(Â, Ǎ)` of the grid.
pub fn grid_resistance(net: &Network, bc: &BoundarySpec) -> Result<f64> {
    let p = bc.partition().ok_or_else(|| Error::InvalidArgument("partition required".into()))?;
    set_resistance(net, &p.hat, &p.check)
}

/// Extremal distance between the short sides of a `length × width`
/// rectangle.
pub fn rectangle_extremal_distance(length: f64, width: f64) -> f64 {
    length / width
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_resistance_is_series_parallel() {
        let (net, bc) = grid(GridShape { rows: 8, cols: 12, periodic: false }).unwrap();
        let r = grid_resistance(&net, &bc).unwrap();
        assert!((r - 11.0 / 8.0).abs() < 1e-10);
    }

    #[test]
    fn annulus_is_accepted() {
        let (net, bc) = grid(GridShape { rows: 8, cols: 8, periodic: true }).unwrap();
        assert_eq!(net.vertex_count(), 64);
        assert!((grid_resistance(&net, &bc).unwrap() - 7.0 / 8.0).abs() < 1e-10);
    }

    #[test]
    fn small_grid_rejected() {
        assert!(grid(GridShape { rows: 4, cols: 8, periodic: false }).is_err());
    }
}
