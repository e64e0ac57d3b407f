use rand::Rng;

/// Dense row-major f64 tensor. The `grad` buffer exists only while
/// `requires_grad` is set and always matches `data` in length.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub requires_grad: bool,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {:?} expects {} elements, got {}",
            shape,
            shape.iter().product::<usize>(),
            data.len()
        );
        Self { shape, data, requires_grad: false, grad: None }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self::from_vec(shape, vec![0.0; n])
    }

    pub fn ones(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self::from_vec(shape, vec![1.0; n])
    }

    pub fn full(shape: Vec<usize>, v: f64) -> Self {
        let n = shape.iter().product();
        Self::from_vec(shape, vec![v; n])
    }

    /// U[lo, hi) entries from the supplied stream.
    pub fn uniform(shape: Vec<usize>, lo: f64, hi: f64, rng: &mut impl Rng) -> Self {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(lo..hi)).collect();
        Self::from_vec(shape, data)
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Enable gradient tracking, allocating a zero grad buffer.
    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self.grad = Some(vec![0.0; self.data.len()]);
        self
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn accumulate_grad(&mut self, contrib: &[f64]) {
        let g = self.grad.as_mut().expect("accumulate_grad on non-tracked tensor");
        assert_eq!(g.len(), contrib.len());
        for (gv, &c) in g.iter_mut().zip(contrib) {
            *gv += c;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
