use crate::error::{Error, Result};

/// Search interval and stopping controls for [`minimize_scalar`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMinimizerConfig {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    pub max_evals: usize,
}

impl ScalarMinimizerConfig {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            tol: 1e-10,
            max_evals: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub argmin: f64,
    pub min: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Bounded Brent minimization (golden section with parabolic interpolation),
/// following the classic `fminbound` scheme.
pub fn minimize_scalar<F: FnMut(f64) -> f64>(mut f: F, cfg: ScalarMinimizerConfig) -> Result<Minimum> {
    if !(cfg.lo < cfg.hi) || !(cfg.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bad minimizer interval [{}, {}] or tolerance {}",
            cfg.lo, cfg.hi, cfg.tol
        )));
    }
    let mut eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { x })
        }
    };
    let sqrt_eps = f64::EPSILON.sqrt();
    let golden = 0.5 * (3.0 - 5f64.sqrt());
    let (mut a, mut b) = (cfg.lo, cfg.hi);
    let mut fulc = a + golden * (b - a);
    let mut nfc = fulc;
    let mut xf = fulc;
    let mut rat: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut fx = eval(xf)?;
    let mut evals = 1;
    let mut ffulc = fx;
    let mut fnfc = fx;
    let mut xm = 0.5 * (a + b);
    // relative term kept well below sqrt(eps) so tight tolerances are honoured
    let rel = sqrt_eps * 1e-3;
    let mut tol1 = rel * xf.abs() + cfg.tol / 3.0;
    let mut tol2 = 2.0 * tol1;
    let mut converged = true;

    while (xf - xm).abs() > tol2 - 0.5 * (b - a) {
        let mut use_golden = true;
        if e.abs() > tol1 {
            use_golden = false;
            let mut r = (xf - nfc) * (fx - ffulc);
            let mut q = (xf - fulc) * (fx - fnfc);
            let mut p = (xf - fulc) * q - (xf - nfc) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            r = e;
            e = rat;
            if p.abs() < (0.5 * q * r).abs() && p > q * (a - xf) && p < q * (b - xf) {
                rat = p / q;
                let x = xf + rat;
                if (x - a) < tol2 || (b - x) < tol2 {
                    rat = if xm >= xf { tol1 } else { -tol1 };
                }
            } else {
                use_golden = true;
            }
        }
        if use_golden {
            e = if xf >= xm { a - xf } else { b - xf };
            rat = golden * e;
        }
        let step = if rat >= 0.0 { 1.0 } else { -1.0 } * rat.abs().max(tol1);
        let x = xf + step;
        let fu = eval(x)?;
        evals += 1;
        if fu <= fx {
            if x >= xf {
                a = xf;
            } else {
                b = xf;
            }
            fulc = nfc;
            ffulc = fnfc;
            nfc = xf;
            fnfc = fx;
            xf = x;
            fx = fu;
        } else {
            if x < xf {
                a = x;
            } else {
                b = x;
            }
            if fu <= fnfc || nfc == xf {
                fulc = nfc;
                ffulc = fnfc;
                nfc = x;
                fnfc = fu;
            } else if fu <= ffulc || fulc == xf || fulc == nfc {
                fulc = x;
                ffulc = fu;
            }
        }
        xm = 0.5 * (a + b);
        tol1 = rel * xf.abs() + cfg.tol / 3.0;
        tol2 = 2.0 * tol1;
        if evals >= cfg.max_evals {
            converged = false;
            break;
        }
    }
    Ok(Minimum {
        argmin: xf,
        min: fx,
        evals,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn quadratic() {
        let m = minimize_scalar(|x| (x - 2.0).powi(2), ScalarMinimizerConfig::new(0.0, 5.0)).unwrap();
        assert!((m.argmin - 2.0).abs() < 1e-8, "{m:?}");
        assert!(m.converged);
    }

    #[test]
    fn cosine() {
        let m = minimize_scalar(f64::cos, ScalarMinimizerConfig::new(0.0, 2.0 * PI)).unwrap();
        assert!((m.argmin - PI).abs() < 1e-8, "{m:?}");
    }

    #[test]
    fn boundary_minimum() {
        let m = minimize_scalar(|x| x, ScalarMinimizerConfig::new(1.0, 3.0)).unwrap();
        assert!((m.argmin - 1.0).abs() < 1e-8);
    }

    #[test]
    fn non_finite_value_is_an_error() {
        let r = minimize_scalar(|x| if x > 1.0 { f64::NAN } else { -x }, ScalarMinimizerConfig::new(0.0, 4.0));
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn bad_interval() {
        assert!(minimize_scalar(|x| x, ScalarMinimizerConfig::new(1.0, 1.0)).is_err());
    }
}
