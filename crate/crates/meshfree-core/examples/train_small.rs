//! Train a small first-derivative model and report its held-out moment
//! residuals.
//!
//! ```text
//! cargo run --release --example train_small -- [epochs] [lr] [count] [f_h]
//! ```

use meshfree_core::nemdo::{
    forward_batch_weights, generate_dataset, train, Layout, ModelConfig, TrainConfig,
};
use meshfree_core::taylor::{moment_residual, OperatorKind};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let count: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(25_000);
    let f_h: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(32);
    let kind: OperatorKind = args
        .get(5)
        .map(|s| s.parse().unwrap())
        .unwrap_or(OperatorKind::Dx);

    let t0 = Instant::now();
    let dataset = generate_dataset(48, 48, 1.0 / 48.0, 1.0, 10, 2, count, 7).unwrap();
    println!("dataset: {} stencils in {:.2?}", dataset.len(), t0.elapsed());

    let config = ModelConfig {
        stencil_n: 10,
        order_p: 2,
        kind,
        f_h,
        graph_layers: 2,
        mlp_hidden: 1,
    };
    println!("parameters: {}", Layout::new(&config).total());

    let tc = TrainConfig {
        learning_rate: lr,
        epochs,
        batch_size: 256,
        plateau_patience: 20,
        seed: 1,
        ..TrainConfig::default()
    };

    let t1 = Instant::now();
    let result = train(&dataset, &config, &tc).unwrap();
    let dt = t1.elapsed();
    println!(
        "trained {} epochs in {:.2?} ({:.2?}/epoch), best val {:.3e} at epoch {}",
        result.log.len(),
        dt,
        dt / result.log.len().max(1) as u32,
        result.best_val_loss,
        result.best_epoch
    );
    for e in result.log.iter().step_by(10.max(epochs / 12)) {
        println!(
            "  epoch {:4}  lr {:.2e}  train {:.4e}  val {:.4e}",
            e.epoch, e.lr, e.train_loss, e.val_loss
        );
    }

    // held-out moment MAE per slot
    let splits = dataset.split(tc.train_frac, tc.val_frac).unwrap();
    let layout = Layout::new(&config);
    let what = forward_batch_weights(&config, &layout, &result.params, &splits.test).unwrap();
    let mut mae = vec![0.0f64; 5];
    for (b, st) in splits.test.iter().enumerate() {
        let w: Vec<f64> = what.row(b).to_vec();
        let r = moment_residual(&st.offsets_hat, &w, kind, 2, 1.0).unwrap();
        for (m, v) in mae.iter_mut().zip(&r) {
            *m += v.abs();
        }
    }
    for m in &mut mae {
        *m /= splits.test.len() as f64;
    }
    let mean = mae.iter().sum::<f64>() / mae.len() as f64;
    println!("test moment MAE per slot: {mae:?}", mae = mae.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>());
    println!("test moment MAE mean:     {mean:.3e}");
}
