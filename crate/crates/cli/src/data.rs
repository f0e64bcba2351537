//! Dataset resolution and the seeded train/validation/test subsets.

use dwsnn_core::encoding::ImageSet;

use crate::config::DatasetConfig;
use crate::config::SubsetConfig;
use crate::error::{CliError, Result};
use crate::idx::{find_pair, load_idx_files};

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: ImageSet,
    pub val: ImageSet,
    pub test: ImageSet,
}

fn resolve(d: &DatasetConfig, stem: &str) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    let (img, lab) = match stem {
        "train" => (&d.train_images, &d.train_labels),
        _ => (&d.test_images, &d.test_labels),
    };
    match (img, lab, &d.dir) {
        (Some(i), Some(l), _) => Ok((i.clone(), l.clone())),
        (_, _, Some(dir)) => find_pair(dir, stem),
        _ => Err(CliError::Config(format!("no {stem} files configured"))),
    }
}

/// Check that every dataset file exists, before any compute starts.
pub fn check_files(d: &DatasetConfig) -> Result<()> {
    for stem in ["train", "t10k"] {
        let (i, l) = resolve(d, stem)?;
        for p in [i, l] {
            if !p.is_file() {
                return Err(CliError::Data(format!(
                    "dataset file {} not found",
                    p.display()
                )));
            }
        }
    }
    Ok(())
}

/// Load both files and carve out the configured subsets. Validation images
/// come from the training file and never overlap the training subset.
pub fn load_splits(d: &DatasetConfig, s: &SubsetConfig) -> Result<Splits> {
    let (ti, tl) = resolve(d, "train")?;
    let full = load_idx_files(&ti, &tl)?;
    let n_train = s.train.unwrap_or(full.len().saturating_sub(s.val));
    if n_train == 0 || n_train + s.val > full.len() {
        return Err(CliError::Config(format!(
            "subset of {n_train} train + {} validation images does not fit in {} training images",
            s.val,
            full.len()
        )));
    }
    let pool = full.sample(n_train + s.val, s.seed);
    let val: Vec<usize> = (0..s.val).collect();
    let train: Vec<usize> = (s.val..s.val + n_train).collect();

    let (ei, el) = resolve(d, "t10k")?;
    let test_full = load_idx_files(&ei, &el)?;
    let test = match s.test {
        Some(n) if n > test_full.len() => {
            return Err(CliError::Config(format!(
                "subset.test = {n} exceeds the {} test images",
                test_full.len()
            )))
        }
        Some(n) => test_full.sample(n, s.seed),
        None => test_full,
    };
    Ok(Splits {
        train: pool.subset(&train),
        val: pool.subset(&val),
        test,
    })
}
