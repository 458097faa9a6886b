//! Otsu threshold segmentation and mask AP scoring.

mod ap;
mod io;
mod mask;
mod otsu;

pub use ap::{ap_report, average_precision, coco_thresholds, interpolated_ap, ApReport};
pub use io::{
    eval_csv, evaluate_otsu, load_mask_png, load_truth, read_eval_items, read_truth_index,
    save_mask_png, write_eval_items, write_truth_masks, EvalItem, EvalRow, TruthIndex,
    EVAL_CSV_HEADER,
};
pub use mask::{mask_iou, InstanceMaskSet, Mask};
pub use otsu::{
    connected_components, histogram, otsu_from_histogram, otsu_threshold, quantize, segment_otsu,
    segment_otsu_with, DEFAULT_MIN_AREA,
};
