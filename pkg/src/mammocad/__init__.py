"""Mammogram tumor-detection pipeline.

Enhancement (Gaussian smoothing, percentile contrast stretch, disk
top-hat, Haar wavelet denoise), threshold segmentation, geometric region
features, and an SMO-trained kernel SVM, plus a synthetic-phantom harness
for dataset-free verification.
"""

from .enhance import (
    EnhanceConfig,
    StructuringElement,
    WaveletPyramid,
    contrast_stretch,
    denoise_reconstruct,
    dilate,
    disk_se,
    dwt2_forward,
    dwt2_inverse,
    enhance,
    erode,
    gaussian_kernel_1d,
    gaussian_smooth,
    opening,
    tophat,
)
from .features import (
    TEN_PROPERTIES,
    MomentSet,
    central_moments,
    convex_hull_area,
    ellipse_params,
    equiv_diameter,
    extract_features,
    extrema,
    feature_names,
    fill_holes,
    filled_area,
    solidity,
)
from .image import load_pgm, load_pgm_file, quantize, save_pgm, save_pgm_file
from .mias import (
    MiasRecord,
    format_mias_info,
    group_by_ref,
    gt_to_image_coords,
    load_mias_info,
    parse_mias_info,
)
from .phantom import (
    Blob,
    BlobPopulation,
    CorpusSpec,
    PhantomSpec,
    acceptance_corpus_spec,
    generate_corpus,
    generate_phantom,
)
from .pipeline import (
    Detection,
    EvalReport,
    PipelineConfig,
    build_training_set,
    default_config,
    detect_regions,
    evaluate,
    match_region,
    process_image,
    render_overlay,
    report_to_json,
    split_refs,
    train_on_images,
)
from .segment import (
    LabelMap,
    Region,
    SegmentConfig,
    binarize,
    connected_components,
    extract_regions,
    mask_smooth,
    otsu_threshold,
    segment,
)
from .svm import (
    KernelSpec,
    Sample,
    ScalerStats,
    SvmModel,
    TrainConfig,
    brute_force_qp,
    decision_value,
    dual_objective,
    fit_scaler,
    apply_scaler,
    gram_matrix,
    kernel_eval,
    load_model,
    predict,
    save_model,
    smo_train,
    train,
)

__version__ = "0.1.0"
