use alloc::collections::BTreeMap;

use crate::data::{Dataset, Region};
use crate::error::{Error, Result};
use crate::regressors::Predictor;

/// Mean of `y - predict(x)` per region tag over all given datasets.
pub fn residual_region_means<P: Predictor + ?Sized>(model: &P, datasets: &[Dataset]) -> Result<BTreeMap<Region, f64>> {
    let mut acc: BTreeMap<Region, (f64, usize)> = BTreeMap::new();
    for d in datasets {
        for s in d.samples() {
            let region = s.region.as_ref().ok_or(Error::Untagged)?;
            let r = s.target - model.predict(&s.features)?;
            let e = acc.entry(region.clone()).or_insert((0.0, 0));
            e.0 += r;
            e.1 += 1;
        }
    }
    if acc.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(acc.into_iter().map(|(k, (sum, n))| (k, sum / n as f64)).collect())
}
