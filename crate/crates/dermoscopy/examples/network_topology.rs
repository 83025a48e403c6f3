//! The segmentation network as a topology calculation: layer shapes and
//! parameter counts, the linear learning-rate/momentum schedule, early
//! stopping, and confidence-mask ensemble fusion.

use dermoscopy::imaging::MaskImage;
use dermoscopy::nettopo::{
    early_stop_check, fuse_masks, infer_shapes, param_count, schedule, UNetConfig,
    EARLY_STOP_PATIENCE,
};

fn main() -> dermoscopy::Result<()> {
    let config = UNetConfig::default();
    let layers = infer_shapes(&config)?;
    println!("{:<12} {:>9} {:>11} {:>14}", "layer", "channels", "size", "params");
    for layer in &layers {
        println!(
            "{:<12} {:>9} {:>5}x{:<5} {:>14}",
            layer.name, layer.out_channels, layer.height, layer.width, layer.params
        );
    }
    println!("total parameters: {}", param_count(&config)?);

    // smaller fully-connected bottlenecks from the ensemble roster
    for fc_dim in [4096, 1024, 256] {
        let c = UNetConfig { fc_dim, ..config };
        println!("fc_dim {fc_dim:>5}: {:>12} parameters", param_count(&c)?);
    }

    println!("\nschedule (epoch, learn rate, momentum):");
    for epoch in [1, 500, 1000, 1500, config.max_epochs] {
        let (lr, mo) = schedule(epoch, &config)?;
        println!("  {epoch:>5}  {lr:.5}  {mo:.4}");
    }

    // early stopping on a loss history that plateaus
    let mut history: Vec<f64> = (0..40).map(|e| 1.0 / (1.0 + e as f64)).collect();
    history.extend(vec![history[39]; 130]);
    let (stop, best) = early_stop_check(&history, EARLY_STOP_PATIENCE)?;
    println!("\nplateaued history: stop = {stop}, best epoch = {best}");

    // ensemble mask fusion: average then binarize at 128 inclusive
    let confident = MaskImage::new(2, 2, vec![250, 140, 90, 10])?;
    let hesitant = MaskImage::new(2, 2, vec![180, 120, 200, 15])?;
    let fused = fuse_masks(&[confident, hesitant])?;
    println!("fused mask values: {:?} (binary: {})", fused.values, fused.is_binary());
    Ok(())
}
