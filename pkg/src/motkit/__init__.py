"""motkit: multi-object tracking toolkit.

Tracks precomputed open-vocabulary detections with a fused appearance/motion
association engine, evaluates track results with localization/classification/
association accuracies over base/novel category splits, unifies heterogeneous
video annotations into one protocol, and ships a synthetic scenario harness
that makes every piece verifiable without real datasets.
"""

__version__ = "0.1.0"

from .data_model import (
    AnnotationError,
    AnnotationSet,
    BBox,
    Category,
    Detection,
    DetectionFormatError,
    DetectionSequence,
    GtAnnotation,
    SPLIT_BASE,
    SPLIT_NOVEL,
    VideoMeta,
    iou,
    iou_matrix,
    load_base_names,
    parse_annotations,
    parse_detection_file,
    parse_detections,
    serialize_annotations,
    serialize_detections,
    split_categories,
    validate_annotation_set,
)
from .motion import KalmanState, MotionNoiseConfig, kf_init, kf_predict, kf_update
from .association import (
    ActiveTrack,
    TrackRecord,
    TrackResult,
    TrackerConfig,
    TrackerState,
    appearance_score_matrix,
    fused_score_matrix,
    hungarian_assign,
    occlusion_prefilter,
    run_tracker,
    step_tracker,
    update_embedding,
)
from .teta import (
    LocMatch,
    TetaCounts,
    TetaReport,
    compute_assa,
    compute_clsa,
    compute_loca,
    compute_teta,
    ground_truth_result,
    match_localization,
)
from .stats import (
    AttributeFlags,
    SummaryStats,
    classify_object,
    classify_track_length,
    compute_track_attributes,
    dataset_summary,
    stats_report,
)
from .convert import (
    ConversionError,
    SynonymMap,
    convert_cocovid,
    convert_imagenet_vid,
    convert_motchallenge,
    merge_categories,
    normalize_occlusions,
)
from .synth import ErrorSpec, SynthConfig, generate_scenario, inject_errors
