//! Nelder–Mead simplex search on the unit cube `[0, 1]^k`.
//!
//! Trial points are clamped onto the cube, which keeps every evaluated point
//! feasible. Vertex ordering is stable so ties resolve deterministically.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Converged once every vertex is this close (∞-norm) to the best one...
    pub x_tol: f64,
    /// ...or once the objective spread is below `f_tol·|f_best| + f_abs`.
    pub f_tol: f64,
    pub f_abs: f64,
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_evals: 600,
            x_tol: 1e-6,
            f_tol: 1e-10,
            f_abs: 0.0,
            initial_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub converged: bool,
}

fn clamp_unit(x: &mut [f64]) {
    for v in x.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

fn affine(c: &[f64], d: &[f64], t: f64) -> Vec<f64> {
    let mut x: Vec<f64> = c.iter().zip(d).map(|(a, b)| a + t * (a - b)).collect();
    clamp_unit(&mut x);
    x
}

/// Minimizes `f` from `x0`. The first evaluation is always `f(x0)`.
pub fn minimize<E, F>(mut f: F, x0: &[f64], opts: &SimplexOptions) -> Result<SimplexOutcome, E>
where
    F: FnMut(&[f64]) -> Result<f64, E>,
{
    let k = x0.len();
    let mut start = x0.to_vec();
    clamp_unit(&mut start);
    let f0 = f(&start)?;
    let mut evaluations = 1;
    if k == 0 {
        return Ok(SimplexOutcome {
            x: start,
            f: f0,
            evaluations,
            converged: true,
        });
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    simplex.push((start.clone(), f0));
    for i in 0..k {
        let mut v = start.clone();
        v[i] = if v[i] + opts.initial_step <= 1.0 {
            v[i] + opts.initial_step
        } else {
            v[i] - opts.initial_step
        };
        let fv = f(&v)?;
        evaluations += 1;
        simplex.push((v, fv));
    }

    let f_abs = opts.f_abs;
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[k].1;
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if x_spread <= opts.x_tol || worst - best <= opts.f_tol * best.abs() + f_abs {
            converged = true;
            break;
        }
        if evaluations >= opts.max_evals {
            break;
        }

        let mut centroid = vec![0.0; k];
        for (v, _) in &simplex[..k] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / k as f64;
            }
        }
        let worst_x = simplex[k].0.clone();

        let xr = affine(&centroid, &worst_x, 1.0);
        let fr = f(&xr)?;
        evaluations += 1;
        if fr < simplex[0].1 {
            let xe = affine(&centroid, &worst_x, 2.0);
            let fe = f(&xe)?;
            evaluations += 1;
            simplex[k] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[k - 1].1 {
            simplex[k] = (xr, fr);
            continue;
        }
        // contraction, outside if the reflection improved on the worst vertex
        let (xc, fc) = if fr < worst {
            let xc = affine(&centroid, &worst_x, 0.5);
            let fc = f(&xc)?;
            (xc, fc)
        } else {
            let xc = affine(&centroid, &worst_x, -0.5);
            let fc = f(&xc)?;
            (xc, fc)
        };
        evaluations += 1;
        if fc < worst.min(fr) {
            simplex[k] = (xc, fc);
            continue;
        }
        let best_x = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best_x
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + 0.5 * (v - b))
                .collect();
            let fx = f(&x)?;
            evaluations += 1;
            *vertex = (x, fx);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    Ok(SimplexOutcome {
        x,
        f,
        evaluations,
        converged,
    })
}
