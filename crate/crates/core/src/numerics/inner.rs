use super::{dotc, CsrMatrix, C64};
use crate::error::{check_len, Result};

/// `C^N` with the inner product `(v, w) = <W v, w>` for an SPD weight `W`.
#[derive(Debug, Clone, Copy)]
pub struct InnerProductSpace<'a> {
    weight: &'a CsrMatrix<f64>,
}

impl<'a> InnerProductSpace<'a> {
    pub fn new(weight: &'a CsrMatrix<f64>) -> Self {
        Self { weight }
    }

    pub fn weight(&self) -> &'a CsrMatrix<f64> {
        self.weight
    }

    pub fn dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn inner(&self, v: &[C64], w: &[C64]) -> Result<C64> {
        check_len(self.dim(), v.len())?;
        check_len(self.dim(), w.len())?;
        Ok(dotc(&self.weight.mul_complex(v), w))
    }

    pub fn norm(&self, v: &[C64]) -> Result<f64> {
        Ok(self.inner(v, v)?.re.max(0.0).sqrt())
    }
}

/// `(v, w)_W`; see [`InnerProductSpace`].
pub fn weighted_inner(v: &[C64], w: &[C64], space: &InnerProductSpace) -> Result<C64> {
    space.inner(v, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weight_on_unit_vectors() {
        let id = CsrMatrix::identity(3);
        let sp = InnerProductSpace::new(&id);
        let e1 = [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        let e2 = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        assert_eq!(sp.inner(&e1, &e1).unwrap(), C64::new(1.0, 0.0));
        assert_eq!(sp.inner(&e1, &e2).unwrap(), C64::new(0.0, 0.0));
        assert!(sp.inner(&e1, &e2[..2]).is_err());
    }
}
