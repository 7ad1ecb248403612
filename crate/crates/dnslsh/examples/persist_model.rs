//! Save a trained model, load it back, and trust it blindly — safely.
//!
//! Model files embed the exact feature geometry they were trained on
//! (window size, segment count, digest settings, feature count). Loading
//! validates structure and version; prediction refuses vectors of the
//! wrong width; and `ensure_compatible` refuses feature files produced
//! under a different configuration, so a stale model cannot silently
//! misread fresh features.
//!
//! Run with: `cargo run --release --example persist_model`

use dnslsh::features::FeatureMetadata;
use dnslsh::model::{assemble_dataset, load_model, save_model, train_forest, Hyperparams, Task};
use dnslsh::pipeline::PipelineConfig;
use dnslsh::Error;

mod common {
    include!("common/synth_rows.rs");
}

fn main() -> dnslsh::Result<()> {
    let dir = std::env::temp_dir().join("dnslsh-persist-example");
    std::fs::create_dir_all(&dir).expect("create output directory");
    let model_path = dir.join("detector.json");

    let config = PipelineConfig::default();
    let rows = common::synthetic_feature_rows(&config, 400)?;
    let (dataset, _) = assemble_dataset(&rows, Task::Binary)?;

    let mut params = Hyperparams::default();
    params.tree_count = 40;
    let meta = config.feature_metadata();
    let model = train_forest(&dataset, &params, config.seed, &meta)?;
    save_model(&model, &model_path)?;
    let bytes = std::fs::metadata(&model_path).expect("stat model file").len();
    println!("saved {} trees ({bytes} bytes) to {}", model.trees.len(), model_path.display());

    // Reload and check it is the same classifier, prediction for
    // prediction.
    let reloaded = load_model(&model_path)?;
    for row in rows.iter().step_by(7) {
        let a = model.predict(&row.values)?;
        let b = reloaded.predict(&row.values)?;
        assert_eq!(a, b, "reloaded model must predict identically");
    }
    println!("reloaded model predicts identically on {} spot checks", rows.len().div_ceil(7));

    // Saving the reloaded model reproduces the file byte for byte.
    let again_path = dir.join("detector-again.json");
    save_model(&reloaded, &again_path)?;
    let original = std::fs::read(&model_path).expect("read original");
    let again = std::fs::read(&again_path).expect("read re-saved");
    assert_eq!(original, again, "save → load → save is byte-stable");
    println!("save → load → save round-trips byte for byte");

    // The embedded metadata guards against configuration drift.
    let mut other = PipelineConfig::default();
    other.window_size = 50;
    let incompatible: FeatureMetadata = other.feature_metadata();
    match reloaded.feature_metadata.ensure_compatible(&incompatible) {
        Err(Error::ConfigMismatch(message)) => {
            println!("window-50 features correctly refused: {message}");
        }
        other => panic!("expected a config mismatch, got {other:?}"),
    }

    // Wrong-width vectors are refused at predict time.
    match reloaded.predict(&[0.0; 3]) {
        Err(Error::InvalidArgument(message)) => {
            println!("3-value vector correctly refused: {message}");
        }
        other => panic!("expected an invalid-argument error, got {other:?}"),
    }
    Ok(())
}
