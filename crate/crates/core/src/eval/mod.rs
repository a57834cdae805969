//! Synthesis sweep, image-quality metrics and Dice evaluation.

pub mod metrics;
pub mod segmentation;
pub mod sweep;
pub mod synthesis;

pub use metrics::{dynamic_range, mse, psnr, psnr_from_mse, ssim, ssim_with, SsimParams, PSNR_CAP_DB};
pub use segmentation::{
    avg_row, dice, evaluate_segmentation, read_dice_csv, region_dice, region_mask, segmentation_scenarios,
    write_dice_csv, DiceAccumulator, DiceRecord, Region, AVG_ROW,
};
pub use sweep::{
    evaluate_backend, evaluate_sweep, export_for_backend, import_backend_labels, label_file_name,
    read_exported, synth_sweep, synthesize_case, volume_file_name, BackendImport, SweepPatient, SynthIndex,
    SYNTH_INDEX_FILE,
};
pub use synthesis::{
    case_metrics, evaluate_synthesis, mean_row, read_metrics_csv, synthesis_scenarios, write_json,
    write_metrics_csv, Aggregation, CaseMetrics, MetricsRecord, SynthesisAccumulator, MEAN_ROW,
};
