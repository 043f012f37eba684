"""Default configuration values for the pipeline."""

# Default application configuration
DEFAULT_APP_CONFIG = {
    "log_level": "INFO",
    "log_file": None,  # None means stderr only
}

# Default depth calibration configuration
DEFAULT_CALIBRATION_CONFIG = {
    "enabled": True,  # False feeds the raw depth to SLAM as the prior
    "lambda_size": 1.0,
    "max_iters": 30,
    "grad_tol": 1e-8,
    "rel_tol": 1e-10,
    "splat_radius": 2,  # pixels
    "fd_step": 1e-6,
    "init_scale": 1.0,
    "init_offset": 0.0,
}

# Default bundle adjustment configuration
DEFAULT_SLAM_CONFIG = {
    "max_iters": 50,
    "damping_init": 1e-4,
    "damping_max": 1e8,
    "tol": 1e-10,
    "cost_floor": 1e-20,
    "depth_weight": 1.0,
    "use_depth_prior": True,
    "mask_dynamic": True,
    "epipolar_tau_px": 2.0,
}

# Default denoiser configuration
DEFAULT_DENOISER_CONFIG = {
    "enabled": False,
    "weights_path": None,
    "latent_dim": 64,
    "decoder_layers": 6,
    "attention_heads": 4,
    "feedforward_dim": 128,
    "scene_tokens": 16,
    "scene_grid": [4, 1, 4],
    "joints": 22,
    "train_window": [64, 128],
    "infer_window": 100,
    "max_window": 128,
    "scene_conditioning": "points",  # or "zero"
    "supervise_global": True,
    "learning_rate": 1e-5,
    "weight_decay": 0.01,
    "batch_size": 16,
    "train_steps": 200,
    "discriminator_lr": 1e-4,
    "train_noise": [0.1, 0.2, 0.05],  # rotation rad, shape, translation m
    "seed": 0,
    "loss_weights": {
        "phi": 1.0,
        "theta": 1.0,
        "beta": 1.0,
        "gamma": 1.0,
        "adversarial": 1.0,
        "velocity": 1.0,
        "acceleration": 1.0,
    },
}

# Default metrics configuration
DEFAULT_METRICS_CONFIG = {
    "mpjpe_with_scale": True,
    "ate_align": "rigid",  # "rigid", "sim3" or "none"
}

# Default synthetic scene configuration
DEFAULT_SYNTH_CONFIG = {
    "num_frames": 8,
    "width": 128,
    "height": 96,
    "anchors_per_frame": 64,
    "pair_window": 2,
    "num_humans": 1,
    "noise_px": 0.0,
    "corruption": 0.0,
    "depth_scale": 2.0,
    "depth_offset": 0.5,
    "depth_noise": 0.0,
    "pose_perturbation": [0.05, 0.05],  # rotation rad, translation m
    "missing_fraction": 0.0,
    "body_noise": 0.0,
}

# Combined default configuration
DEFAULT_CONFIG = {
    "seed": 42,
    "app": DEFAULT_APP_CONFIG,
    "calibration": DEFAULT_CALIBRATION_CONFIG,
    "slam": DEFAULT_SLAM_CONFIG,
    "denoiser": DEFAULT_DENOISER_CONFIG,
    "metrics": DEFAULT_METRICS_CONFIG,
    "synth": DEFAULT_SYNTH_CONFIG,
}

# Keys whose default is None and that accept a string
OPTIONAL_STRING_KEYS = {"app.log_file", "denoiser.weights_path"}
