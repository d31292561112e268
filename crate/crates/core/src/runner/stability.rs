//! Regularized sequences and their convergence experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QhdError, Result};
use crate::evolve::{evolve, SolverConfig};
use crate::fields::{ComplexField, ScalarField, VectorField};
use crate::lifting::{lift_positive, regularizer, LiftOptions};
use crate::polar::{madelung, HydroFields, VacuumThreshold};

/// `sqrt_rho + delta_n` with `Lambda` rescaled by `sqrt_rho / (sqrt_rho + delta_n)`.
pub fn build_sequence(h: &HydroFields, n: u32) -> Result<HydroFields> {
    if n == 0 {
        return Err(QhdError::Range {
            what: "regularization index",
            detail: "n must be at least 1".into(),
        });
    }
    let grid = *h.grid();
    let delta = delta_field(h, n);
    let sqrt_rho = h.sqrt_rho.zip_map(&delta, |a, d| a + d)?;
    let ratio = h.sqrt_rho.zip_map(&sqrt_rho, |a, b| a / b)?;
    let lambda = h.lambda.scaled_by(&ratio)?;
    HydroFields::new(ScalarField::new(grid, sqrt_rho.values)?, VectorField::new(grid, lambda.components)?)
}

fn delta_field(h: &HydroFields, n: u32) -> ScalarField {
    ScalarField::from_fn(*h.grid(), |x| {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        regularizer(r, n)
    })
}

/// `|| delta_n ||_2` on the grid.
pub fn delta_norm(h: &HydroFields, n: u32) -> f64 {
    delta_field(h, n).norm()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub t: f64,
    pub sqrt_rho: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderMember {
    pub n: u32,
    /// `|| delta_n ||_2` over the whole box.
    pub delta_norm: f64,
    /// `|| delta_n ||` restricted to the sub-box.
    pub delta_norm_loc: f64,
    pub rows: Vec<DistanceRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub ladder: Vec<u32>,
    /// `"datum"` for vacuum-free data, otherwise `"n=<largest>"`.
    pub reference: String,
    pub times: Vec<f64>,
    /// Half side of the centred cube on which local norms are taken.
    pub sub_box_half_side: f64,
    pub members: Vec<LadderMember>,
    /// Observed orders `log(d_i / d_{i+1}) / log(n_{i+1} / n_i)` of the
    /// `sqrt_rho` distance at each time, for consecutive ladder members.
    pub orders: Vec<Vec<f64>>,
}

impl StabilityReport {
    /// True if both distances decrease strictly along the ladder at every time
    /// (members equal to the reference are skipped).
    pub fn monotone(&self) -> bool {
        let members: Vec<&LadderMember> = self
            .members
            .iter()
            .filter(|m| self.reference != format!("n={}", m.n))
            .collect();
        (0..self.times.len()).all(|k| {
            members.windows(2).all(|w| {
                let (a, b) = (&w[0].rows[k], &w[1].rows[k]);
                b.sqrt_rho < a.sqrt_rho && b.lambda < a.lambda
            })
        })
    }
}

fn local_mask(grid: &crate::fields::Grid, half_side: f64) -> Vec<bool> {
    (0..grid.len())
        .map(|i| {
            let x = grid.position(i);
            (0..grid.dim).all(|a| x[a].abs() <= half_side)
        })
        .collect()
}

fn local_distance(a: &HydroFields, b: &HydroFields, mask: &[bool]) -> DistanceRow {
    let dv = a.grid().cell_volume();
    let (mut ds, mut dl) = (0.0, 0.0);
    for i in (0..mask.len()).filter(|&i| mask[i]) {
        ds += (a.sqrt_rho.values[i] - b.sqrt_rho.values[i]).powi(2);
        for (ca, cb) in a.lambda.components.iter().zip(&b.lambda.components) {
            dl += (ca[i] - cb[i]).powi(2);
        }
    }
    DistanceRow {
        t: 0.0,
        sqrt_rho: (ds * dv).sqrt(),
        lambda: (dl * dv).sqrt(),
    }
}

fn trajectory_hydro(psi0: &ComplexField, solver: &SolverConfig) -> Result<(Vec<f64>, Vec<HydroFields>)> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut obs = |t: f64, psi: &ComplexField| -> Result<()> {
        times.push(t);
        states.push(madelung(psi, VacuumThreshold::default())?);
        Ok(())
    };
    let mut cfg = *solver;
    cfg.keep_snapshots = false;
    evolve(psi0, &cfg, &mut [&mut obs])?;
    Ok((times, states))
}

/// Evolves every member of the regularized ladder and tabulates its local
/// distance to the reference run at each observation time.
///
/// The local norms are taken on the centred cube whose side is
/// `sub_box_fraction` times the box side.
pub fn stability_experiment(
    h: &HydroFields,
    ladder: &[u32],
    solver: &SolverConfig,
    sub_box_fraction: f64,
) -> Result<StabilityReport> {
    let grid = *h.grid();
    grid.require_periodic()?;
    if ladder.is_empty() || ladder.windows(2).any(|w| w[0] >= w[1]) || ladder[0] == 0 {
        return Err(QhdError::Range {
            what: "ladder",
            detail: format!("must be nonempty, positive and strictly increasing, got {ladder:?}"),
        });
    }
    if !(sub_box_fraction > 0.0 && sub_box_fraction <= 1.0) {
        return Err(QhdError::Range {
            what: "sub-box fraction",
            detail: format!("must lie in (0, 1], got {sub_box_fraction}"),
        });
    }
    let opts = LiftOptions::default();
    let vacuum_free = h.sqrt_rho.min() > 0.0;

    let runs: Vec<(Vec<f64>, Vec<HydroFields>)> = ladder
        .par_iter()
        .map(|&n| {
            let wrap = |e: QhdError| QhdError::Ladder {
                context: format!("ladder member n = {n}"),
                source: Box::new(e),
            };
            let hn = build_sequence(h, n).map_err(wrap)?;
            let psi = lift_positive(&hn, 0.0, &opts).map_err(wrap)?;
            trajectory_hydro(&psi, solver).map_err(wrap)
        })
        .collect::<Result<_>>()?;

    let (reference_name, reference) = if vacuum_free {
        let psi = lift_positive(h, 0.0, &opts).map_err(|e| QhdError::Ladder {
            context: "reference datum".into(),
            source: Box::new(e),
        })?;
        ("datum".to_string(), trajectory_hydro(&psi, solver)?)
    } else {
        let last = ladder.len() - 1;
        (format!("n={}", ladder[last]), runs[last].clone())
    };

    let times = reference.0.clone();
    let half_side = 0.5 * sub_box_fraction * grid.length;
    let mask = local_mask(&grid, half_side);
    let members: Vec<LadderMember> = ladder
        .iter()
        .zip(&runs)
        .map(|(&n, (_, states))| {
            let rows = times
                .iter()
                .zip(states.iter().zip(&reference.1))
                .map(|(&t, (s, r))| DistanceRow { t, ..local_distance(s, r, &mask) })
                .collect();
            let delta = delta_field(h, n);
            let dv = grid.cell_volume();
            let loc: f64 = mask
                .iter()
                .zip(&delta.values)
                .filter(|(m, _)| **m)
                .map(|(_, d)| d * d)
                .sum::<f64>();
            LadderMember {
                n,
                delta_norm: delta.norm(),
                delta_norm_loc: (loc * dv).sqrt(),
                rows,
            }
        })
        .collect();

    let orders = members
        .windows(2)
        .map(|w| {
            let ratio = (w[1].n as f64 / w[0].n as f64).ln();
            w[0].rows
                .iter()
                .zip(&w[1].rows)
                .map(|(a, b)| (a.sqrt_rho / b.sqrt_rho).ln() / ratio)
                .collect()
        })
        .collect();

    Ok(StabilityReport {
        ladder: ladder.to_vec(),
        reference: reference_name,
        times,
        sub_box_half_side: half_side,
        members,
        orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use crate::runner::recipes::gaussian_hydro;

    fn data(background: f64) -> HydroFields {
        let g = Grid::periodic(2, 64, 24.0).unwrap();
        gaussian_hydro(&g, 1.0, 1.5, [0.0; 3], background, 0.3, [0; 3]).unwrap()
    }

    #[test]
    fn sequence_properties() {
        let h = data(0.0);
        let hn = build_sequence(&h, 10).unwrap();
        assert!(hn.sqrt_rho.min() > 0.0);
        for (a, b) in hn.lambda.components.iter().zip(&h.lambda.components) {
            for (x, y) in a.iter().zip(b) {
                assert!(x.abs() <= y.abs());
            }
        }
        let (ds, _) = hn.distance(&h).unwrap();
        assert!((ds - delta_norm(&h, 10)).abs() < 1e-14);
        // Gaussian delta: ||e^{-r^2/2}||^2 = pi in two dimensions.
        assert!((delta_norm(&h, 100) - std::f64::consts::PI.sqrt() / 100.0).abs() < 1e-8);
        let still = HydroFields::new(h.sqrt_rho.clone(), VectorField::zeros(*h.grid())).unwrap();
        assert_eq!(build_sequence(&still, 5).unwrap().lambda.norm(), 0.0);
        assert!(build_sequence(&h, 0).is_err());
    }

    #[test]
    fn ladder_distances_shrink() {
        let h = data(0.3);
        let solver = SolverConfig::new(2.0, 0.01, 0.1).with_stride(5);
        let rep = stability_experiment(&h, &[10, 100, 1000], &solver, 0.5).unwrap();
        assert_eq!(rep.reference, "datum");
        assert_eq!(rep.times.len(), 3);
        assert!(rep.monotone());
        for m in &rep.members {
            let d0 = m.rows[0].sqrt_rho;
            assert!((d0 - m.delta_norm_loc).abs() < 1e-10 * m.delta_norm_loc);
        }
        assert!(rep.orders.iter().flatten().all(|o| (o - 1.0).abs() < 0.1));
    }

    #[test]
    fn vacuum_data_use_the_top_member() {
        let mut h = data(0.0);
        h.sqrt_rho.values[0] = 0.0;
        let solver = SolverConfig::new(2.0, 0.01, 0.02);
        let rep = stability_experiment(&h, &[10, 100], &solver, 0.5).unwrap();
        assert_eq!(rep.reference, "n=100");
        assert!(rep.members[1].rows.iter().all(|r| r.sqrt_rho == 0.0 && r.lambda == 0.0));
        let single = stability_experiment(&h, &[10], &solver, 0.5).unwrap();
        assert!(single.members[0].rows.iter().all(|r| r.sqrt_rho.is_finite()));
        assert!(stability_experiment(&h, &[100, 10], &solver, 0.5).is_err());
    }
}
