//! Operators on labelled tensor-product spaces and their link product.
//!
//! The link product `A ⋆ B = tr_s[(A^{T_s} ⊗ I)(I ⊗ B)]` contracts every space
//! label shared by the two operands. With Choi matrices this is sequential
//! composition of channels and combs.

use crate::error::{CombError, Result};
use crate::linalg::{partial_trace, permute_subsystems, ComplexMatrix, ZERO};

pub type Label = u32;

/// Canonical labels of comb spaces: step k (0-based) input and output.
pub fn input_label(k: usize) -> Label {
    2 * k as Label
}

pub fn output_label(k: usize) -> Label {
    2 * k as Label + 1
}

#[derive(Clone, Debug)]
pub struct LabeledOp {
    spaces: Vec<(Label, usize)>,
    op: ComplexMatrix,
}

impl LabeledOp {
    pub fn new(spaces: Vec<(Label, usize)>, op: ComplexMatrix) -> Result<Self> {
        let total: usize = spaces.iter().map(|s| s.1).product();
        if !op.is_square() || op.rows() != total {
            return Err(CombError::DimensionMismatch(format!(
                "labelled spaces {spaces:?} do not match a {}x{} operator",
                op.rows(),
                op.cols()
            )));
        }
        for (i, (l, _)) in spaces.iter().enumerate() {
            if spaces[..i].iter().any(|(m, _)| m == l) {
                return Err(CombError::DimensionMismatch(format!("duplicate label {l}")));
            }
        }
        Ok(Self { spaces, op })
    }

    pub fn spaces(&self) -> &[(Label, usize)] {
        &self.spaces
    }

    pub fn op(&self) -> &ComplexMatrix {
        &self.op
    }

    pub fn into_op(self) -> ComplexMatrix {
        self.op
    }

    fn dims(&self) -> Vec<usize> {
        self.spaces.iter().map(|s| s.1).collect()
    }

    fn position(&self, label: Label) -> Option<usize> {
        self.spaces.iter().position(|s| s.0 == label)
    }

    /// Operator with its factors arranged in `order` (must list every label once).
    pub fn reorder(&self, order: &[Label]) -> Result<Self> {
        if order.len() != self.spaces.len() {
            return Err(CombError::DimensionMismatch(format!(
                "reorder to {order:?} from {:?}",
                self.labels()
            )));
        }
        let perm = order
            .iter()
            .map(|&l| {
                self.position(l)
                    .ok_or_else(|| CombError::DimensionMismatch(format!("unknown label {l}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let op = permute_subsystems(&self.op, &self.dims(), &perm)?;
        Ok(Self {
            spaces: perm.iter().map(|&p| self.spaces[p]).collect(),
            op,
        })
    }

    pub fn labels(&self) -> Vec<Label> {
        self.spaces.iter().map(|s| s.0).collect()
    }

    pub fn trace_out(&self, labels: &[Label]) -> Result<Self> {
        for l in labels {
            if self.position(*l).is_none() {
                return Err(CombError::DimensionMismatch(format!(
                    "cannot trace unknown label {l}"
                )));
            }
        }
        let keep: Vec<usize> = (0..self.spaces.len())
            .filter(|&k| !labels.contains(&self.spaces[k].0))
            .collect();
        let op = partial_trace(&self.op, &self.dims(), &keep)?;
        Ok(Self {
            spaces: keep.iter().map(|&k| self.spaces[k]).collect(),
            op,
        })
    }

    pub fn relabel(mut self, from: Label, to: Label) -> Self {
        for s in &mut self.spaces {
            if s.0 == from {
                s.0 = to;
            }
        }
        self
    }

    /// Link product over all shared labels. Result spaces: self-only labels
    /// (in self's order) followed by other-only labels (in other's order).
    pub fn link(&self, other: &LabeledOp) -> Result<LabeledOp> {
        let mut shared = Vec::new();
        for &(l, d) in &self.spaces {
            if let Some(p) = other.position(l) {
                if other.spaces[p].1 != d {
                    return Err(CombError::DimensionMismatch(format!(
                        "label {l} has dimension {d} vs {}",
                        other.spaces[p].1
                    )));
                }
                shared.push(l);
            }
        }
        let x_labels: Vec<Label> = self
            .labels()
            .into_iter()
            .filter(|l| !shared.contains(l))
            .collect();
        let y_labels: Vec<Label> = other
            .labels()
            .into_iter()
            .filter(|l| !shared.contains(l))
            .collect();
        let a_order: Vec<Label> = x_labels.iter().chain(&shared).copied().collect();
        let b_order: Vec<Label> = shared.iter().chain(&y_labels).copied().collect();
        let a = self.reorder(&a_order)?;
        let b = other.reorder(&b_order)?;
        let dim_of = |op: &LabeledOp, ls: &[Label]| -> usize {
            ls.iter()
                .map(|l| op.spaces[op.position(*l).unwrap()].1)
                .product()
        };
        let xd = dim_of(&a, &x_labels);
        let sd = dim_of(&a, &shared);
        let yd = dim_of(&b, &y_labels);

        // Ã[(x,x'),(s',s)] = A[(x,s'),(x',s)],  B̃[(s',s),(y,y')] = B[(s',y),(s,y')]
        let ad = a.op.data();
        let an = xd * sd;
        let a_t = ComplexMatrix::from_fn(xd * xd, sd * sd, |r, c| {
            let (x, xp) = (r / xd, r % xd);
            let (sp, s) = (c / sd, c % sd);
            ad[(x * sd + sp) * an + xp * sd + s]
        });
        let bd = b.op.data();
        let bn = sd * yd;
        let b_t = ComplexMatrix::from_fn(sd * sd, yd * yd, |r, c| {
            let (sp, s) = (r / sd, r % sd);
            let (y, yp) = (c / yd, c % yd);
            bd[(sp * yd + y) * bn + s * yd + yp]
        });
        let r_t = a_t.matmul(&b_t);
        let rn = xd * yd;
        let mut out = ComplexMatrix::zeros(rn, rn);
        let rd = r_t.data();
        for x in 0..xd {
            for xp in 0..xd {
                for y in 0..yd {
                    let src = (x * xd + xp) * (yd * yd) + y * yd;
                    let dst = (x * yd + y) * rn + xp * yd;
                    for yp in 0..yd {
                        let v = rd[src + yp];
                        if v != ZERO {
                            out.data_mut()[dst + yp] = v;
                        }
                    }
                }
            }
        }
        let spaces = x_labels
            .iter()
            .map(|l| a.spaces[a.position(*l).unwrap()])
            .chain(y_labels.iter().map(|l| b.spaces[b.position(*l).unwrap()]))
            .collect();
        Ok(LabeledOp { spaces, op: out })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::QuantumChannel;
    use crate::random::{random_channel, random_density, rng_for};

    #[test]
    fn link_with_state_applies_channel() {
        let mut rng = rng_for(21, 0);
        let ch = random_channel(2, 3, 2, &mut rng);
        let rho = random_density(2, &mut rng);
        let c = LabeledOp::new(vec![(0, 2), (1, 3)], ch.choi().clone()).unwrap();
        let r = LabeledOp::new(vec![(0, 2)], rho.matrix().clone()).unwrap();
        let out = r.link(&c).unwrap();
        assert_eq!(out.labels(), vec![1]);
        let expected = ch.apply(&rho).unwrap();
        assert!(out.op().max_abs_diff(expected.matrix()) < 1e-13);
    }

    #[test]
    fn link_composes_channels() {
        let mut rng = rng_for(22, 0);
        let a = random_channel(2, 2, 2, &mut rng);
        let b = random_channel(2, 2, 3, &mut rng);
        let ca = LabeledOp::new(vec![(0, 2), (1, 2)], a.choi().clone()).unwrap();
        let cb = LabeledOp::new(vec![(1, 2), (2, 2)], b.choi().clone()).unwrap();
        let composed = ca.link(&cb).unwrap();
        let expected: QuantumChannel = a.then(&b).unwrap();
        assert!(composed.op().max_abs_diff(expected.choi()) < 1e-13);
    }

    #[test]
    fn disjoint_link_is_tensor_product() {
        let a = LabeledOp::new(vec![(5, 2)], ComplexMatrix::from_real_diag(&[1., 2.])).unwrap();
        let b = LabeledOp::new(vec![(6, 3)], ComplexMatrix::from_real_diag(&[3., 4., 5.])).unwrap();
        let ab = a.link(&b).unwrap();
        assert_eq!(ab.labels(), vec![5, 6]);
        assert_eq!(ab.op(), &a.op().kron(b.op()));
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let a = LabeledOp::new(vec![(0, 2)], ComplexMatrix::identity(2)).unwrap();
        let b = LabeledOp::new(vec![(0, 3)], ComplexMatrix::identity(3)).unwrap();
        assert!(a.link(&b).is_err());
    }
}
