//! Shared numerical learners: Adam and multinomial logistic regression.

mod adam;
mod logistic;

pub use adam::{Adam, AdamConfig};
pub use logistic::{
    cross_entropy_loss_and_grad, lr_predict, lr_train, softmax_rows, LogisticConfig,
    LogisticModel,
};
