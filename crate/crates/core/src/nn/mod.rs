//! Dense networks with analytic gradients and an Adam optimizer.

mod adam;
pub mod gradcheck;
mod matrix;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use matrix::Matrix;
pub use mlp::{
    log_sigmoid, sigmoid, softplus, ForwardCache, Gradients, Head, Mlp, MlpSpec, LOG_STD_MAX,
    LOG_STD_MIN,
};

/// A network bundled with its optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct Trainable {
    pub net: Mlp,
    pub opt: AdamState,
}

impl Trainable {
    pub fn new(spec: MlpSpec, seed: u64, adam: AdamConfig) -> crate::Result<Self> {
        let net = Mlp::new(spec, seed)?;
        let opt = AdamState::new(adam, net.num_params());
        Ok(Self { net, opt })
    }

    pub fn apply(&mut self, grads: &[f64]) -> crate::Result<()> {
        self.opt.step(self.net.params_mut(), grads)
    }
}
