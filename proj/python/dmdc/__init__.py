"""Dual-camera coded-aperture spectral imaging toolkit.

Thin re-export of the compiled module. Cubes, RGB images, and noise maps are
numpy arrays shaped (nlam, nx, ny) / (3, nx, ny); masks, measurements,
responses, and model weights keep their geometry metadata as small classes.
"""

from ._dmdc import (  # noqa: F401
    CodedMask,
    Measurement,
    ModelParams,
    NetConfig,
    ReconConfig,
    SpectralResponse,
    TrainConfig,
    backproject_cassi,
    backproject_rgb,
    cassi_adjoint,
    cassi_forward,
    classical_stage,
    default_spectral_response,
    default_step_size,
    dense_operator,
    dmdc_forward,
    dual_measure,
    estimate_noise,
    evaluate,
    init_dmdc_params,
    load_cube,
    load_mask,
    load_measurement,
    load_params,
    load_rgb,
    mask_stats,
    mrae,
    normal_mask,
    partition_response,
    psnr,
    random_mask,
    reconstruct_classical,
    rgb_noise_sigma,
    rgb_project,
    rmse,
    save_cube,
    save_mask,
    save_measurement,
    save_params,
    save_rgb,
    spectral_curve,
    ssim,
    synth_scene,
    template_mask,
    train_dmdc,
    tv_denoise,
)

__all__ = [
    "CodedMask",
    "Measurement",
    "ModelParams",
    "NetConfig",
    "ReconConfig",
    "SpectralResponse",
    "TrainConfig",
    "backproject_cassi",
    "backproject_rgb",
    "cassi_adjoint",
    "cassi_forward",
    "classical_stage",
    "default_spectral_response",
    "default_step_size",
    "dense_operator",
    "dmdc_forward",
    "dual_measure",
    "estimate_noise",
    "evaluate",
    "init_dmdc_params",
    "load_cube",
    "load_mask",
    "load_measurement",
    "load_params",
    "load_rgb",
    "mask_stats",
    "mrae",
    "normal_mask",
    "partition_response",
    "psnr",
    "random_mask",
    "reconstruct_classical",
    "rgb_noise_sigma",
    "rgb_project",
    "rmse",
    "save_cube",
    "save_mask",
    "save_measurement",
    "save_params",
    "save_rgb",
    "spectral_curve",
    "ssim",
    "synth_scene",
    "template_mask",
    "train_dmdc",
    "tv_denoise",
]
