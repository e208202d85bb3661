use std::fmt;

/// Dense row-major `f32` array with an optional gradient buffer.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
    grad: Option<Vec<f32>>,
    requires_grad: bool,
}

impl Tensor {
    /// Panics if the shape has a zero extent or does not cover `data` exactly.
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<f32>) -> Self {
        let shape = shape.into();
        assert!(
            shape.iter().all(|&s| s > 0),
            "tensor shape {shape:?} has a zero extent"
        );
        let numel: usize = shape.iter().product();
        assert_eq!(
            numel,
            data.len(),
            "shape {shape:?} needs {numel} values, got {}",
            data.len()
        );
        Tensor {
            shape,
            data,
            grad: None,
            requires_grad: false,
        }
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        let numel = shape.iter().product();
        Tensor::new(shape, vec![0.0; numel])
    }

    pub fn scalar(value: f32) -> Self {
        Tensor::new(vec![1], vec![value])
    }

    pub fn from_slice(shape: &[usize], data: &[f32]) -> Self {
        Tensor::new(shape.to_vec(), data.to_vec())
    }

    pub fn with_requires_grad(mut self, requires_grad: bool) -> Self {
        self.requires_grad = requires_grad;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn grad(&self) -> Option<&[f32]> {
        self.grad.as_deref()
    }

    /// Adds `delta` into the gradient buffer, allocating it on first use.
    pub fn accumulate_grad(&mut self, delta: &[f32]) {
        assert_eq!(delta.len(), self.data.len(), "gradient length mismatch");
        let grad = self.grad.get_or_insert_with(|| vec![0.0; delta.len()]);
        for (g, d) in grad.iter_mut().zip(delta) {
            *g += d;
        }
    }

    pub fn zero_grad(&mut self) {
        if let Some(grad) = self.grad.as_mut() {
            grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }

    pub fn item(&self) -> f32 {
        assert_eq!(self.numel(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("numel", &self.data.len())
            .field("has_grad", &self.grad.is_some())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulate_allocates_then_adds() {
        let mut t = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]);
        assert!(t.grad().is_none());
        t.accumulate_grad(&[1.0, 1.0, 1.0]);
        t.accumulate_grad(&[0.5, 0.0, -1.0]);
        assert_eq!(t.grad().unwrap(), &[1.5, 1.0, 0.0]);
        t.zero_grad();
        assert_eq!(t.grad().unwrap(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    #[should_panic(expected = "needs 6 values")]
    fn shape_must_cover_data() {
        Tensor::new(vec![2, 3], vec![0.0; 5]);
    }
}
