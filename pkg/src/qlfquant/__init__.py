"""Semi-automated dental biofilm segmentation and quantification for QLF images."""

from .color_pipeline import (
    HsiImage,
    RgbImage,
    ScalarField,
    green_channel,
    intensity_channel,
    load_image,
    rgb_to_hsi,
)
from .divergence import (
    ClassLabel,
    SuperpixelScores,
    Thresholds,
    TrainingExample,
    aggregate_divergence,
    calibrate_thresholds,
    classify,
    gaussian_kl,
    score_superpixels,
    whole_image_divergence,
)
from .errors import (
    CalibrationError,
    InputError,
    IntegrityError,
    InternalError,
    ParameterError,
    QlfError,
)
from .gmrf import (
    EIGHT_NEIGHBORHOOD,
    FOUR_NEIGHBORHOOD,
    ChannelFeatureSet,
    GmrfConfig,
    GmrfFeature,
    estimate_all,
    estimate_gmrf,
    extract_samples,
)
from .phantom import Phantom, generate_phantom, truth_to_label_image
from .pipeline import segment_image
from .quantify import (
    LongitudinalReport,
    QuantReport,
    SuperpixelStats,
    compute_bqi,
    longitudinal_summary,
    superpixel_areas,
)
from .service import (
    MAX_LABELMAP_IDS,
    SessionRecord,
    SessionStore,
    create_app,
    serve,
)
from .session import (
    PALETTE,
    SegmentationResult,
    Session,
    create_session,
    export_result,
    locate_superpixel,
    render_label_image,
    set_label,
    toggle_label,
    undo_last_edit,
)
from .superpixel import (
    ClusterCenter,
    SlicParams,
    SuperpixelMap,
    compute_grid_interval,
    enforce_connectivity,
    seed_clusters,
    slic_segment,
)

__version__ = "0.1.0"
