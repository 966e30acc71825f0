use super::scalar::{gemm, Mat};
use super::Scalar;
use crate::error::{Error, Result};
use crate::rng::{unit, WizRng};

/// Single-layer LSTM cell.
///
/// Parameters are one flat buffer `[W (4h × in) | U (4h × h) | b (4h)]` with
/// the gate blocks in the order input, forget, candidate, output.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCell<F> {
    input: usize,
    hidden: usize,
    params: Vec<F>,
}

/// Recurrent state `(h, c)` for a batch of sequences, each `batch × hidden`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState<F> {
    pub h: Vec<F>,
    pub c: Vec<F>,
}

impl<F: Scalar> LstmState<F> {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        LstmState { h: vec![F::zero(); batch * hidden], c: vec![F::zero(); batch * hidden] }
    }
}

/// Everything an unrolled batched forward pass keeps for backpropagation.
#[derive(Clone, Debug)]
pub struct LstmTrace<F> {
    steps: usize,
    batch: usize,
    inputs: Vec<F>,
    /// Per step: activated gates, `batch × 4h`.
    gates: Vec<Vec<F>>,
    /// `states[t]` is the state before step `t`; `states[steps]` the last one.
    states: Vec<LstmState<F>>,
}

impl<F: Scalar> LstmTrace<F> {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Hidden output after step `t` (`batch × hidden`).
    pub fn hidden(&self, t: usize) -> &[F] {
        &self.states[t + 1].h
    }

    /// Cell state after step `t`.
    pub fn cell(&self, t: usize) -> &[F] {
        &self.states[t + 1].c
    }

    /// All hidden outputs stacked step-major: `(steps · batch) × hidden`.
    pub fn hidden_stack(&self) -> Vec<F> {
        self.states[1..].iter().flat_map(|s| s.h.iter().copied()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct LstmGradients<F> {
    pub params: Vec<F>,
    /// Input gradients, step-major like the forward input.
    pub inputs: Vec<F>,
}

fn sigmoid<F: Scalar>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

impl<F: Scalar> LstmCell<F> {
    pub fn zeros(input: usize, hidden: usize) -> Result<Self> {
        if input == 0 || hidden == 0 {
            return Err(Error::shape(format!("lstm with input {input} and hidden {hidden}")));
        }
        let n = 4 * hidden * (input + hidden + 1);
        Ok(LstmCell { input, hidden, params: vec![F::zero(); n] })
    }

    /// Uniform weights in ±1/sqrt(input + hidden), zero biases except +1 on
    /// the forget gate.
    pub fn init(input: usize, hidden: usize, rng: &mut WizRng) -> Result<Self> {
        let mut cell = Self::zeros(input, hidden)?;
        let limit = 1.0 / ((input + hidden) as f64).sqrt();
        let weights = 4 * hidden * (input + hidden);
        for x in &mut cell.params[..weights] {
            *x = F::from_f64((2.0 * unit(rng) - 1.0) * limit);
        }
        for x in &mut cell.bias_mut()[hidden..2 * hidden] {
            *x = F::one();
        }
        Ok(cell)
    }

    pub fn from_params(input: usize, hidden: usize, params: Vec<F>) -> Result<Self> {
        let cell = Self::zeros(input, hidden)?;
        if params.len() != cell.params.len() {
            return Err(Error::shape(format!(
                "lstm {input}→{hidden} needs {} parameters, got {}",
                cell.params.len(),
                params.len()
            )));
        }
        Ok(LstmCell { params, ..cell })
    }

    pub fn input_size(&self) -> usize {
        self.input
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    fn split(&self) -> (&[F], &[F], &[F]) {
        let g = 4 * self.hidden;
        let (w, rest) = self.params.split_at(g * self.input);
        let (u, b) = rest.split_at(g * self.hidden);
        (w, u, b)
    }

    pub fn bias_mut(&mut self) -> &mut [F] {
        let start = 4 * self.hidden * (self.input + self.hidden);
        &mut self.params[start..]
    }

    pub fn cast<G: Scalar>(&self) -> LstmCell<G> {
        LstmCell {
            input: self.input,
            hidden: self.hidden,
            params: self.params.iter().map(|x| G::from_f64(x.as_f64())).collect(),
        }
    }

    fn check_state(&self, state: &LstmState<F>, batch: usize) -> Result<()> {
        let n = batch * self.hidden;
        if state.h.len() != n || state.c.len() != n {
            return Err(Error::shape(format!(
                "lstm state of {}/{} values, expected {batch} × {}",
                state.h.len(),
                state.c.len(),
                self.hidden
            )));
        }
        Ok(())
    }

    /// Gate activations and the next state for one step of a batch.
    fn step_into(&self, x: &[F], prev: &LstmState<F>, batch: usize, gates: &mut Vec<F>) -> LstmState<F> {
        let hs = self.hidden;
        let g4 = 4 * hs;
        let (w, u, b) = self.split();
        gates.clear();
        for _ in 0..batch {
            gates.extend_from_slice(b);
        }
        gemm(Mat::new(x, batch, self.input), Mat::new(w, g4, self.input).t(), F::one(), gates);
        gemm(Mat::new(&prev.h, batch, hs), Mat::new(u, g4, hs).t(), F::one(), gates);
        let mut next = LstmState::zeros(batch, hs);
        for s in 0..batch {
            let z = &mut gates[s * g4..(s + 1) * g4];
            for j in 0..hs {
                let i = sigmoid(z[j]);
                let f = sigmoid(z[hs + j]);
                let g = z[2 * hs + j].tanh();
                let o = sigmoid(z[3 * hs + j]);
                z[j] = i;
                z[hs + j] = f;
                z[2 * hs + j] = g;
                z[3 * hs + j] = o;
                let c = f * prev.c[s * hs + j] + i * g;
                next.c[s * hs + j] = c;
                next.h[s * hs + j] = o * c.tanh();
            }
        }
        next
    }

    /// One step for a single sequence.
    pub fn step(&self, x: &[F], state: &LstmState<F>) -> Result<LstmState<F>> {
        if x.len() != self.input {
            return Err(Error::shape(format!("lstm input of {} values, expected {}", x.len(), self.input)));
        }
        self.check_state(state, 1)?;
        let mut gates = Vec::with_capacity(4 * self.hidden);
        Ok(self.step_into(x, state, 1, &mut gates))
    }

    /// Unrolls the cell over `steps` inputs of a batch, starting from zero
    /// state. `inputs` is step-major: `(steps · batch) × input`.
    pub fn forward_sequence(&self, inputs: &[F], steps: usize, batch: usize) -> Result<LstmTrace<F>> {
        if steps == 0 || batch == 0 || inputs.len() != steps * batch * self.input {
            return Err(Error::shape(format!(
                "lstm sequence of {} values is not {steps} steps × {batch} × {}",
                inputs.len(),
                self.input
            )));
        }
        let stride = batch * self.input;
        let mut states = Vec::with_capacity(steps + 1);
        states.push(LstmState::zeros(batch, self.hidden));
        let mut gates = Vec::with_capacity(steps);
        for t in 0..steps {
            let mut g = Vec::with_capacity(batch * 4 * self.hidden);
            let next = self.step_into(&inputs[t * stride..(t + 1) * stride], &states[t], batch, &mut g);
            gates.push(g);
            states.push(next);
        }
        Ok(LstmTrace { steps, batch, inputs: inputs.to_vec(), gates, states })
    }

    /// Backpropagation through time. `grad_hidden` holds the loss gradient
    /// with respect to every hidden output, laid out like
    /// [`LstmTrace::hidden_stack`].
    pub fn backward_sequence(&self, trace: &LstmTrace<F>, grad_hidden: &[F]) -> Result<LstmGradients<F>> {
        let (steps, batch, hs) = (trace.steps, trace.batch, self.hidden);
        let g4 = 4 * hs;
        if trace.inputs.len() != steps * batch * self.input {
            return Err(Error::shape("trace belongs to a different lstm"));
        }
        if grad_hidden.len() != steps * batch * hs {
            return Err(Error::shape(format!(
                "hidden gradient of {} values, expected {steps} × {batch} × {hs}",
                grad_hidden.len()
            )));
        }
        let (w, u, _) = self.split();
        let mut grads = vec![F::zero(); self.params.len()];
        let mut grad_inputs = vec![F::zero(); trace.inputs.len()];
        let mut dh_next = vec![F::zero(); batch * hs];
        let mut dc_next = vec![F::zero(); batch * hs];
        let mut dz = vec![F::zero(); batch * g4];
        let stride = batch * self.input;
        let one = F::one();
        for t in (0..steps).rev() {
            let gates = &trace.gates[t];
            let prev = &trace.states[t];
            let cur = &trace.states[t + 1];
            for s in 0..batch {
                for j in 0..hs {
                    let k = s * hs + j;
                    let z = &gates[s * g4..(s + 1) * g4];
                    let (i, f, g, o) = (z[j], z[hs + j], z[2 * hs + j], z[3 * hs + j]);
                    let dh = grad_hidden[t * batch * hs + k] + dh_next[k];
                    let tc = cur.c[k].tanh();
                    let dc = dc_next[k] + dh * o * (one - tc * tc);
                    let out = &mut dz[s * g4..(s + 1) * g4];
                    out[j] = dc * g * i * (one - i);
                    out[hs + j] = dc * prev.c[k] * f * (one - f);
                    out[2 * hs + j] = dc * i * (one - g * g);
                    out[3 * hs + j] = dh * tc * o * (one - o);
                    dc_next[k] = dc * f;
                }
            }
            let x = &trace.inputs[t * stride..(t + 1) * stride];
            let (gw, rest) = grads.split_at_mut(g4 * self.input);
            let (gu, gb) = rest.split_at_mut(g4 * hs);
            gemm(Mat::new(&dz, batch, g4).t(), Mat::new(x, batch, self.input), F::one(), gw);
            gemm(Mat::new(&dz, batch, g4).t(), Mat::new(&prev.h, batch, hs), F::one(), gu);
            for row in dz.chunks_exact(g4) {
                for (acc, d) in gb.iter_mut().zip(row) {
                    *acc = *acc + *d;
                }
            }
            gemm(
                Mat::new(&dz, batch, g4),
                Mat::new(w, g4, self.input),
                F::zero(),
                &mut grad_inputs[t * stride..(t + 1) * stride],
            );
            gemm(Mat::new(&dz, batch, g4), Mat::new(u, g4, hs), F::zero(), &mut dh_next);
        }
        Ok(LstmGradients { params: grads, inputs: grad_inputs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn zero_cell_keeps_zero_state() {
        let cell = LstmCell::<f64>::zeros(3, 2).unwrap();
        let s = cell.step(&[0.0; 3], &LstmState::zeros(1, 2)).unwrap();
        assert_eq!(s.h, vec![0.0; 2]);
        assert_eq!(s.c, vec![0.0; 2]);
        // Nonzero input still gives zero output: every gate sits at 0.5 and
        // the candidate at tanh(0).
        let s = cell.step(&[1.0, -2.0, 3.0], &s).unwrap();
        assert_eq!(s.h, vec![0.0; 2]);
    }

    #[test]
    fn saturated_forget_gate_accumulates() {
        let (input, hidden) = (2, 1);
        let mut cell = LstmCell::<f64>::zeros(input, hidden).unwrap();
        // Candidate weight 1 on the first input, input gate bias large,
        // forget gate bias large.
        let g4 = 4 * hidden;
        cell.params_mut()[2 * input] = 1.0; // W row of the candidate gate
        let b = cell.bias_mut();
        b[0] = 30.0;
        b[1] = 30.0;
        assert_eq!(b.len(), g4);
        let prev = LstmState { h: vec![0.0], c: vec![0.7] };
        let next = cell.step(&[0.4, 0.0], &prev).unwrap();
        let want = 0.7 + 0.4f64.tanh();
        assert!((next.c[0] - want).abs() < 1e-9, "{} vs {want}", next.c[0]);
    }

    #[test]
    fn init_sets_forget_bias() {
        let cell = LstmCell::<f32>::init(5, 3, &mut seeded(1)).unwrap();
        let (_, _, b) = cell.split();
        assert_eq!(b, &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn batched_sequence_matches_single_steps() {
        let cell = LstmCell::<f64>::init(3, 4, &mut seeded(9)).unwrap();
        let (steps, batch) = (5, 2);
        let xs: Vec<f64> = (0..steps * batch * 3).map(|i| (i as f64 * 0.7).sin()).collect();
        let trace = cell.forward_sequence(&xs, steps, batch).unwrap();
        for s in 0..batch {
            let mut st = LstmState::zeros(1, 4);
            for t in 0..steps {
                let x = &xs[(t * batch + s) * 3..(t * batch + s + 1) * 3];
                st = cell.step(x, &st).unwrap();
                for j in 0..4 {
                    assert!((st.h[j] - trace.hidden(t)[s * 4 + j]).abs() < 1e-12);
                    assert!((st.c[j] - trace.cell(t)[s * 4 + j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shape_errors() {
        let cell = LstmCell::<f32>::zeros(3, 2).unwrap();
        assert!(cell.step(&[0.0; 2], &LstmState::zeros(1, 2)).is_err());
        assert!(cell.step(&[0.0; 3], &LstmState::zeros(1, 3)).is_err());
        assert!(cell.forward_sequence(&[0.0; 5], 2, 1).is_err());
    }
}
