use crate::error::{Error, Result};

fn check(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// Mean squared error.
pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sse / y.len() as f64)
}

/// Mean absolute error and root mean squared error.
pub fn mae_rmse(y: &[f64], yhat: &[f64]) -> Result<(f64, f64)> {
    let m = mse(y, yhat)?;
    let abs: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum();
    Ok((abs / y.len() as f64, libm::sqrt(m)))
}
