use super::types::{BsConfig, BsState};
use crate::error::{Error, Result};

/// Joint state of all base stations together with its dense index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SystemState {
    pub per_bs: Vec<BsState>,
    pub index: usize,
}

/// Mixed-radix layout of the joint state space.
///
/// Inside a BS the local index is `s_u * n_b + s_b`; BS 0 is the least
/// significant digit of the joint index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateSpace {
    dims: Vec<(usize, usize)>,
    strides: Vec<usize>,
    size: usize,
}

impl StateSpace {
    pub fn new(bss: &[BsConfig]) -> Self {
        Self::from_dims(bss.iter().map(|c| (c.n_u, c.n_b)).collect())
    }

    pub fn from_dims(dims: Vec<(usize, usize)>) -> Self {
        let mut strides = Vec::with_capacity(dims.len());
        let mut size = 1usize;
        for &(n_u, n_b) in &dims {
            strides.push(size);
            size = size.saturating_mul(n_u * n_b);
        }
        Self {
            dims,
            strides,
            size,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn n_bs(&self) -> usize {
        self.dims.len()
    }

    pub fn local_size(&self, bs: usize) -> usize {
        self.dims[bs].0 * self.dims[bs].1
    }

    pub fn local_index(&self, bs: usize, s: BsState) -> usize {
        s.s_u * self.dims[bs].1 + s.s_b
    }

    pub fn local_state(&self, bs: usize, local: usize) -> BsState {
        let n_b = self.dims[bs].1;
        BsState::new(local / n_b, local % n_b)
    }

    /// Local index of `bs` inside the joint index, without decoding the rest.
    pub fn local_of(&self, index: usize, bs: usize) -> usize {
        (index / self.strides[bs]) % self.local_size(bs)
    }

    pub fn encode(&self, per_bs: &[BsState]) -> Result<usize> {
        if per_bs.len() != self.dims.len() {
            return Err(Error::Domain(format!(
                "state has {} base stations, space has {}",
                per_bs.len(),
                self.dims.len()
            )));
        }
        let mut index = 0;
        for (bs, (&s, &(n_u, n_b))) in per_bs.iter().zip(&self.dims).enumerate() {
            if s.s_u >= n_u || s.s_b >= n_b {
                return Err(Error::Domain(format!(
                    "BS {bs} state (s_u={}, s_b={}) outside {n_u}x{n_b}",
                    s.s_u, s.s_b
                )));
            }
            index += self.local_index(bs, s) * self.strides[bs];
        }
        Ok(index)
    }

    pub fn decode(&self, index: usize) -> Result<SystemState> {
        if index >= self.size {
            return Err(Error::Domain(format!(
                "state index {index} outside 0..{}",
                self.size
            )));
        }
        let per_bs = (0..self.dims.len())
            .map(|bs| self.local_state(bs, self.local_of(index, bs)))
            .collect();
        Ok(SystemState { per_bs, index })
    }

    pub fn state(&self, per_bs: Vec<BsState>) -> Result<SystemState> {
        let index = self.encode(&per_bs)?;
        Ok(SystemState { per_bs, index })
    }

    pub fn label(&self, index: usize) -> String {
        (0..self.dims.len())
            .map(|bs| {
                let s = self.local_state(bs, self.local_of(index, bs));
                format!("u{}b{}", s.s_u, s.s_b)
            })
            .collect::<Vec<_>>()
            .join("_")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn radix_corners() {
        let space = StateSpace::from_dims(vec![(2, 3), (2, 3)]);
        assert_eq!(space.size(), 36);
        let zero = space.decode(0).unwrap();
        assert!(zero.per_bs.iter().all(|s| *s == BsState::new(0, 0)));
        let top = space.decode(35).unwrap();
        assert!(top.per_bs.iter().all(|s| *s == BsState::new(1, 2)));
        assert!(matches!(space.decode(36), Err(Error::Domain(_))));
        assert!(space.encode(&[BsState::new(2, 0), BsState::new(0, 0)]).is_err());
    }

    #[test]
    fn bijection_over_every_index() {
        let space = StateSpace::from_dims(vec![(4, 8), (2, 3), (3, 2)]);
        for i in 0..space.size() {
            let s = space.decode(i).unwrap();
            assert_eq!(space.encode(&s.per_bs).unwrap(), i);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn round_trip(dims in prop::collection::vec((1usize..5, 2usize..9), 1..4), seed in any::<u64>()) {
            let space = StateSpace::from_dims(dims);
            let index = (seed % space.size() as u64) as usize;
            let s = space.decode(index).unwrap();
            prop_assert_eq!(space.encode(&s.per_bs).unwrap(), index);
        }
    }
}
