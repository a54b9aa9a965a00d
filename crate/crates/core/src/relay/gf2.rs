//! Bit vectors and incremental row reduction over GF(2).

/// Fixed-length bit vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVec {
    words: Vec<u64>,
    len: usize,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn unit(len: usize, index: usize) -> Self {
        let mut v = Self::zeros(len);
        v.set(index, true);
        v
    }

    pub fn from_words(words: Vec<u64>, len: usize) -> Self {
        let mut v = BitVec { words, len };
        v.words.resize(len.div_ceil(64), 0);
        v.mask_tail();
        v
    }

    fn mask_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let m = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    pub fn flip(&mut self, i: usize) {
        let v = self.get(i);
        self.set(i, !v);
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        assert_eq!(self.len, other.len, "length mismatch");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn first_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |i| self.get(*i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Row-reduced span of a growing set of vectors, remembering which input
/// rows produce each basis vector.
#[derive(Debug, Clone)]
pub struct Span {
    width: usize,
    inputs: usize,
    /// (pivot column, reduced row, combination of inputs)
    basis: Vec<(usize, BitVec, Vec<usize>)>,
}

impl Span {
    pub fn new(width: usize) -> Self {
        Span {
            width,
            inputs: 0,
            basis: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    fn reduce(&self, v: &mut BitVec, combo: &mut Vec<usize>) {
        for (pivot, row, rc) in &self.basis {
            if v.get(*pivot) {
                v.xor_assign(row);
                xor_sets(combo, rc);
            }
        }
    }

    /// Add a row; returns its input index.
    pub fn push(&mut self, row: BitVec) -> usize {
        assert_eq!(row.len(), self.width, "row width mismatch");
        let id = self.inputs;
        self.inputs += 1;
        let mut v = row;
        let mut combo = vec![id];
        self.reduce(&mut v, &mut combo);
        if let Some(p) = v.first_one() {
            // keep the basis fully reduced in the new pivot column
            for (_, r, rc) in self.basis.iter_mut() {
                if r.get(p) {
                    r.xor_assign(&v);
                    xor_sets(rc, &combo);
                }
            }
            self.basis.push((p, v, combo));
        }
        id
    }

    /// Input rows summing to `target`, if it lies in the span.
    pub fn express(&self, target: &BitVec) -> Option<Vec<usize>> {
        let mut v = target.clone();
        let mut combo = Vec::new();
        self.reduce(&mut v, &mut combo);
        if v.is_zero() {
            combo.sort_unstable();
            Some(combo)
        } else {
            None
        }
    }
}

/// Symmetric difference of two sorted index lists, stored in `a`.
fn xor_sets(a: &mut Vec<usize>, b: &[usize]) {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    a.sort_unstable();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    *a = out;
}
