//! Damped Newton minimizer over the free node coordinates.
//!
//! The Hessian is assembled by central differences of the analytic gradient.
//! Energy terms couple nodes at most two apart along the loop, so nodes five
//! or more apart are perturbed together (distance-5 colouring) and each
//! gradient response is attributed to the unique perturbed node nearby.

use nalgebra::{DMatrix, DVector};

use super::energy::{EnergyModel, Loading};

#[derive(Clone, Copy, Debug)]
pub(crate) struct NewtonOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Largest nodal move per iteration, mm.
    pub max_step: f64,
}

#[derive(Debug)]
pub(crate) struct NewtonReport {
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub energy: f64,
}

const COUPLING: usize = 2;
const FD_STEP: f64 = 1e-6;

fn colouring(n: usize) -> Vec<usize> {
    let reach = 2 * COUPLING;
    let mut colour = vec![usize::MAX; n];
    for i in 0..n {
        let mut used = Vec::new();
        for d in 1..=reach {
            let a = (i + n - d % n) % n;
            let b = (i + d) % n;
            for k in [a, b] {
                if colour[k] != usize::MAX {
                    used.push(colour[k]);
                }
            }
        }
        colour[i] = (0..).find(|c| !used.contains(c)).unwrap();
    }
    colour
}

pub(crate) struct Newton<'a> {
    model: &'a EnergyModel,
    free: Vec<usize>,
    dof_of: Vec<Option<usize>>,
    colour: Vec<usize>,
}

impl<'a> Newton<'a> {
    pub fn new(model: &'a EnergyModel) -> Self {
        let n = model.n();
        let free: Vec<usize> = (0..n).filter(|&i| !model.mesh.pinned[i]).collect();
        let mut dof_of = vec![None; n];
        for (k, &i) in free.iter().enumerate() {
            dof_of[i] = Some(k);
        }
        Newton {
            model,
            free,
            dof_of,
            colour: colouring(n),
        }
    }

    fn gradient(
        &self,
        x: &[[f64; 2]],
        load: &Loading,
        scratch: &mut [[f64; 2]],
    ) -> (f64, DVector<f64>) {
        let e = self.model.eval(x, load, Some(scratch));
        let mut g = DVector::zeros(2 * self.free.len());
        for (k, &i) in self.free.iter().enumerate() {
            g[2 * k] = scratch[i][0];
            g[2 * k + 1] = scratch[i][1];
        }
        (e, g)
    }

    fn hessian(&self, x: &[[f64; 2]], load: &Loading) -> DMatrix<f64> {
        let n = self.model.n();
        let m = 2 * self.free.len();
        let mut h = DMatrix::zeros(m, m);
        let mut xp = x.to_vec();
        let mut gp = vec![[0.0; 2]; n];
        let mut gm = vec![[0.0; 2]; n];
        let colours = self.colour.iter().copied().max().map_or(0, |c| c + 1);
        for c in 0..colours {
            let group: Vec<usize> = self
                .free
                .iter()
                .copied()
                .filter(|&i| self.colour[i] == c)
                .collect();
            if group.is_empty() {
                continue;
            }
            for comp in 0..2 {
                for &i in &group {
                    xp[i][comp] = x[i][comp] + FD_STEP;
                }
                self.model.eval(&xp, load, Some(&mut gp));
                for &i in &group {
                    xp[i][comp] = x[i][comp] - FD_STEP;
                }
                self.model.eval(&xp, load, Some(&mut gm));
                for &i in &group {
                    xp[i][comp] = x[i][comp];
                }
                for &j in &group {
                    let col = 2 * self.dof_of[j].unwrap() + comp;
                    for d in 0..=2 * COUPLING {
                        let k = (j + n + d - COUPLING) % n;
                        if let Some(kd) = self.dof_of[k] {
                            for rc in 0..2 {
                                h[(2 * kd + rc, col)] = (gp[k][rc] - gm[k][rc]) / (2.0 * FD_STEP);
                            }
                        }
                    }
                }
            }
        }
        let ht = h.transpose();
        (h + ht) * 0.5
    }

    fn apply(&self, x: &[[f64; 2]], step: &DVector<f64>, t: f64) -> Vec<[f64; 2]> {
        let mut y = x.to_vec();
        for (k, &i) in self.free.iter().enumerate() {
            y[i][0] += t * step[2 * k];
            y[i][1] += t * step[2 * k + 1];
        }
        y
    }

    /// Minimizes the energy starting from `x`, which is updated in place.
    pub fn minimize(
        &self,
        x: &mut Vec<[f64; 2]>,
        load: &Loading,
        opts: &NewtonOptions,
    ) -> NewtonReport {
        let n = self.model.n();
        let mut scratch = vec![[0.0; 2]; n];
        let (mut energy, mut g) = self.gradient(x, load, &mut scratch);
        let mut iterations = 0;
        loop {
            let gnorm = g.amax();
            if gnorm < opts.tolerance {
                return NewtonReport {
                    converged: true,
                    iterations,
                    gradient_norm: gnorm,
                    energy,
                };
            }
            if iterations >= opts.max_iterations || !energy.is_finite() {
                return NewtonReport {
                    converged: false,
                    iterations,
                    gradient_norm: gnorm,
                    energy,
                };
            }
            iterations += 1;

            let h = self.hessian(x, load);
            let diag_max = h.diagonal().amax().max(1e-12);
            let mut shift = 0.0;
            let mut step = None;
            for _ in 0..30 {
                let mut hs = h.clone();
                for d in 0..hs.nrows() {
                    hs[(d, d)] += shift;
                }
                if let Some(ch) = hs.cholesky() {
                    step = Some(ch.solve(&(-&g)));
                    break;
                }
                shift = if shift == 0.0 {
                    1e-8 * diag_max
                } else {
                    shift * 10.0
                };
            }
            let mut step = match step {
                Some(s) if s.dot(&g) < 0.0 => s,
                _ => -&g / diag_max,
            };
            let largest = step.amax();
            if largest > opts.max_step {
                step *= opts.max_step / largest;
            }

            let slope = step.dot(&g);
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let y = self.apply(x, &step, t);
                let e = self.model.eval(&y, load, None);
                if e.is_finite() && e <= energy + 1e-4 * t * slope {
                    accepted = Some(y);
                    break;
                }
                t *= 0.5;
            }
            let y = match accepted {
                Some(y) => y,
                None => {
                    // Energy differences are below round-off; accept the Newton step if it
                    // reduces the gradient.
                    let y = self.apply(x, &step, 1.0);
                    let (_, gy) = self.gradient(&y, load, &mut scratch);
                    if gy.amax() < gnorm {
                        y
                    } else {
                        return NewtonReport {
                            converged: false,
                            iterations,
                            gradient_norm: gnorm,
                            energy,
                        };
                    }
                }
            };
            *x = y;
            let (e, gn) = self.gradient(x, load, &mut scratch);
            energy = e;
            g = gn;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colouring_separates_coupled_nodes() {
        for n in [16, 17, 31, 64, 97] {
            let c = colouring(n);
            for i in 0..n {
                for d in 1..=4 {
                    assert_ne!(c[i], c[(i + d) % n], "n={n} i={i} d={d}");
                }
            }
            assert!(*c.iter().max().unwrap() < 10);
        }
    }
}
