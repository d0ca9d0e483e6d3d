//! 2D/3D spaces divided into unit patches.
//!
//! Continuous coordinates live in `[0, dim)`; grid coordinates are 1-based
//! integers in `1..=dim`. Patch `(i, j[, k])` covers the unit cell whose
//! continuous extent is `[i-1, i) x [j-1, j) ...`.

use serde::{Deserialize, Serialize};

use crate::agent::{AgentId, AgentKind};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::value::{PropTable, Vect};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Periodicity {
    Periodic,
    #[serde(rename = "NPeriodic")]
    NPeriodic,
}

#[derive(Clone, Debug)]
pub struct SpatialSpace {
    size: Vec<usize>,
    periodicity: Periodicity,
    patches: Vec<PropTable>,
    occupancy: Vec<Vec<AgentId>>,
}

impl SpatialSpace {
    pub fn new(size: &[usize], periodicity: Periodicity) -> Result<Self> {
        if !(2..=3).contains(&size.len()) || size.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "space size must be 2 or 3 positive dimensions, got {size:?}"
            )));
        }
        let cells: usize = size.iter().product();
        Ok(SpatialSpace {
            size: size.to_vec(),
            periodicity,
            patches: vec![PropTable::new(); cells],
            occupancy: vec![Vec::new(); cells],
        })
    }

    pub fn dim(&self) -> usize {
        self.size.len()
    }

    pub fn size(&self) -> &[usize] {
        &self.size
    }

    pub fn periodicity(&self) -> Periodicity {
        self.periodicity
    }

    pub fn num_cells(&self) -> usize {
        self.patches.len()
    }

    /// Maps `pos` into the space.
    ///
    /// Periodic: continuous components into `[0, dim)`, grid into `1..=dim`.
    /// NPeriodic: continuous components clamped to `[0, dim]`, grid unchanged.
    pub fn wrap_position(&self, pos: Vect, grid: bool) -> Vect {
        let mut c = [0.0; 3];
        for (i, (&p, &d)) in pos.as_slice().iter().zip(&self.size).enumerate() {
            let d = d as f64;
            c[i] = match (self.periodicity, grid) {
                (Periodicity::Periodic, false) => {
                    let w = p.rem_euclid(d);
                    // rem_euclid of a tiny negative value can round up to d
                    if w >= d {
                        0.0
                    } else {
                        w
                    }
                }
                (Periodicity::Periodic, true) => (p - 1.0).rem_euclid(d) + 1.0,
                (Periodicity::NPeriodic, false) => p.clamp(0.0, d),
                (Periodicity::NPeriodic, true) => p,
            };
        }
        Vect::from_slice(&c[..pos.dim()]).expect("dimension preserved")
    }

    /// Validates and wraps a position about to be written to an agent.
    pub(crate) fn place(&self, pos: Vect, grid: bool) -> Result<Vect> {
        if pos.dim() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "{}D position in a {}D space",
                pos.dim(),
                self.dim()
            )));
        }
        if pos.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite position {pos:?}")));
        }
        if grid {
            if !pos.is_integral() {
                return Err(Error::NonIntegralGridPos(pos.as_slice().to_vec()));
            }
            if self.periodicity == Periodicity::NPeriodic && self.cell_index(pos).is_err() {
                return Err(Error::OutOfBounds {
                    pos: pos.as_slice().to_vec(),
                    size: self.size.clone(),
                });
            }
        }
        Ok(self.wrap_position(pos, grid))
    }

    /// Linear cell index of an already placed position.
    pub(crate) fn cell_of(&self, pos: Vect, grid: bool) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (&p, &d) in pos.as_slice().iter().zip(&self.size) {
            let c = if grid { p as i64 - 1 } else { p.floor() as i64 };
            let c = c.clamp(0, d as i64 - 1) as usize;
            idx += c * stride;
            stride *= d;
        }
        idx
    }

    /// Linear index of a 1-based integer cell.
    pub fn cell_index(&self, cell: Vect) -> Result<usize> {
        let oob = || Error::OutOfBounds {
            pos: cell.as_slice().to_vec(),
            size: self.size.clone(),
        };
        if cell.dim() != self.dim() || !cell.is_integral() {
            return Err(oob());
        }
        let mut idx = 0;
        let mut stride = 1;
        for (&p, &d) in cell.as_slice().iter().zip(&self.size) {
            if p < 1.0 || p > d as f64 {
                return Err(oob());
            }
            idx += (p as usize - 1) * stride;
            stride *= d;
        }
        Ok(idx)
    }

    /// 1-based integer coordinates of a linear cell index.
    pub fn cell_coords(&self, mut idx: usize) -> Vect {
        let mut c = [0.0; 3];
        for (i, &d) in self.size.iter().enumerate() {
            c[i] = (idx % d + 1) as f64;
            idx /= d;
        }
        Vect::from_slice(&c[..self.dim()]).expect("2 or 3 dims")
    }

    pub fn patch(&self, cell: Vect) -> Result<&PropTable> {
        Ok(&self.patches[self.cell_index(cell)?])
    }

    pub fn patch_mut(&mut self, cell: Vect) -> Result<&mut PropTable> {
        let i = self.cell_index(cell)?;
        Ok(&mut self.patches[i])
    }

    pub(crate) fn patches(&self) -> &[PropTable] {
        &self.patches
    }

    pub fn occupants(&self, cell: Vect) -> Result<&[AgentId]> {
        Ok(&self.occupancy[self.cell_index(cell)?])
    }

    pub(crate) fn occupants_at(&self, idx: usize) -> &[AgentId] {
        &self.occupancy[idx]
    }

    pub(crate) fn insert(&mut self, id: AgentId, cell: usize) {
        let bucket = &mut self.occupancy[cell];
        if let Err(at) = bucket.binary_search(&id) {
            bucket.insert(at, id);
        }
    }

    pub(crate) fn remove(&mut self, id: AgentId, cell: usize) {
        let bucket = &mut self.occupancy[cell];
        if let Ok(at) = bucket.binary_search(&id) {
            bucket.remove(at);
        }
    }

    pub(crate) fn occupancy(&self) -> &[Vec<AgentId>] {
        &self.occupancy
    }

    /// Euclidean distance, minimum-image under periodic boundaries.
    pub fn distance(&self, a: Vect, b: Vect) -> f64 {
        let mut s = 0.0;
        for ((&p, &q), &d) in a.as_slice().iter().zip(b.as_slice()).zip(&self.size) {
            let mut dx = (p - q).abs();
            if self.periodicity == Periodicity::Periodic {
                dx = dx.min(d as f64 - dx);
            }
            s += dx * dx;
        }
        s.sqrt()
    }

    /// Vector from `from` to `to`, taking the shortest image per axis under
    /// periodic boundaries.
    pub fn displacement(&self, from: Vect, to: Vect) -> Vect {
        let mut d = to - from;
        if self.periodicity == Periodicity::Periodic {
            for (axis, &len) in self.size.iter().enumerate() {
                let len = len as f64;
                let c = &mut d.as_mut_slice()[axis];
                if *c > len / 2.0 {
                    *c -= len;
                } else if *c < -len / 2.0 {
                    *c += len;
                }
            }
        }
        d
    }

    /// Cells whose per-axis offset from `center` is at most `reach`,
    /// each listed once even when the reach wraps around a short axis.
    pub(crate) fn cells_within(&self, center: usize, reach: usize) -> Vec<usize> {
        let origin = self.cell_coords(center);
        let mut axes: Vec<Vec<usize>> = Vec::with_capacity(self.dim());
        for (axis, &d) in self.size.iter().enumerate() {
            let c = origin[axis] as i64 - 1;
            let mut cells: Vec<usize> = Vec::new();
            let r = reach as i64;
            if self.periodicity == Periodicity::Periodic && 2 * r + 1 >= d as i64 {
                cells.extend(0..d);
            } else {
                for off in -r..=r {
                    let v = c + off;
                    match self.periodicity {
                        Periodicity::Periodic => cells.push(v.rem_euclid(d as i64) as usize),
                        Periodicity::NPeriodic => {
                            if (0..d as i64).contains(&v) {
                                cells.push(v as usize);
                            }
                        }
                    }
                }
            }
            axes.push(cells);
        }
        let mut out = Vec::new();
        let (xd, yd) = (self.size[0], self.size[1]);
        let zs: &[usize] = if self.dim() == 3 { &axes[2] } else { &[0] };
        for &z in zs {
            for &y in &axes[1] {
                for &x in &axes[0] {
                    out.push(x + y * xd + z * xd * yd);
                }
            }
        }
        out
    }
}

impl Model {
    fn spatial_agent(&self, id: AgentId, op: &'static str) -> Result<(&SpatialSpace, Vect)> {
        let space = self.spatial().ok_or(Error::NotSpatial(op))?;
        let agent = self.agent(id)?;
        Ok((space, agent.pos()?))
    }

    /// Live agents other than `id` within `radius` (inclusive), ascending id.
    pub fn euclidean_neighbors(&self, id: AgentId, radius: f64) -> Result<Vec<AgentId>> {
        if radius.is_nan() || radius <= 0.0 {
            return Err(Error::InvalidArgument(format!("radius must be > 0, got {radius}")));
        }
        let (space, pos) = self.spatial_agent(id, "euclidean_neighbors")?;
        // grid coordinates sit on cell edges, so mixed populations need one more ring
        let reach = radius.ceil() as usize + usize::from(self.mixed_kinds());
        let center = self.agent(id)?.cell.expect("placed agent");
        let mut out = Vec::new();
        let cells = space.cells_within(center, reach);
        if cells.len() == space.num_cells() {
            for other in self.agents() {
                if other.id != id && space.distance(pos, other.pos()?) <= radius {
                    out.push(other.id);
                }
            }
            return Ok(out);
        }
        for cell in cells {
            for &other in space.occupants_at(cell) {
                if other == id {
                    continue;
                }
                let q = self.agent(other)?.pos()?;
                if space.distance(pos, q) <= radius {
                    out.push(other);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Live agents in the Chebyshev-`r` cell neighbourhood of a grid agent,
    /// excluding the agent itself, ascending id.
    pub fn grid_neighbors(&self, id: AgentId, r: usize) -> Result<Vec<AgentId>> {
        let (space, _) = self.spatial_agent(id, "grid_neighbors")?;
        let agent = self.agent(id)?;
        if !agent.kind().is_grid() {
            return Err(Error::NotGridAgent("grid_neighbors"));
        }
        let center = agent.cell.expect("placed agent");
        let mut out: Vec<AgentId> = space
            .cells_within(center, r)
            .into_iter()
            .flat_map(|c| space.occupants_at(c).iter().copied())
            .filter(|&o| o != id)
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// Alias of [`Model::grid_neighbors`] for grid agents.
    pub fn neighbors(&self, id: AgentId, r: usize) -> Result<Vec<AgentId>> {
        self.grid_neighbors(id, r)
    }

    /// A uniformly random unoccupied patch, as 1-based integer coordinates.
    pub fn random_empty_patch(&mut self) -> Result<Vect> {
        let space = self.spatial().ok_or(Error::NotSpatial("random_empty_patch"))?;
        let empty: Vec<usize> = (0..space.num_cells())
            .filter(|&c| space.occupants_at(c).is_empty())
            .collect();
        if empty.is_empty() {
            return Err(Error::NoEmptyPatch);
        }
        let pick = self.rand_index(empty.len());
        let space = self.spatial().expect("checked above");
        Ok(space.cell_coords(empty[pick]))
    }

    pub fn patch(&self, cell: Vect) -> Result<&PropTable> {
        self.spatial().ok_or(Error::NotSpatial("patch"))?.patch(cell)
    }

    pub fn patch_mut(&mut self, cell: Vect) -> Result<&mut PropTable> {
        self.spatial_mut().ok_or(Error::NotSpatial("patch"))?.patch_mut(cell)
    }

    /// Rebuilds the occupancy index from agent positions and compares it with
    /// the incrementally maintained one.
    pub fn audit_occupancy(&self) -> Result<bool> {
        let space = self.spatial().ok_or(Error::NotSpatial("audit_occupancy"))?;
        let mut fresh = vec![Vec::new(); space.num_cells()];
        for a in self.agents() {
            let grid = a.kind().is_grid();
            let cell = space.cell_of(a.pos()?, grid);
            if a.cell != Some(cell) {
                return Ok(false);
            }
            fresh[cell].push(a.id());
        }
        Ok(fresh.as_slice() == space.occupancy())
    }
}

pub(crate) fn check_kind(kind: AgentKind, dim: usize) -> Result<()> {
    if kind.dim() == Some(dim) {
        Ok(())
    } else {
        Err(Error::KindMismatch {
            kind,
            space: if dim == 2 { "2D" } else { "3D" },
        })
    }
}
