from flowdet._flowdet import (
    Flow,
    Frame,
    MimoScenario,
    NoiseSpec,
    __version__,
    candidate_count,
    detect_emle,
    detect_ggamp,
    detect_ggamp_manfe,
    detect_manfe,
    detect_oracle_mle,
    gen_frame,
    load_checkpoint,
    log_pdf_analytic,
    neighborhood_size,
    qpsk_demap,
    qpsk_modulate,
    sample_noise,
    sas_pdf_numeric,
    save_checkpoint,
    sigma_for_snr,
    train_flow,
)

__all__ = [
    "Flow",
    "Frame",
    "MimoScenario",
    "NoiseSpec",
    "__version__",
    "candidate_count",
    "detect_emle",
    "detect_ggamp",
    "detect_ggamp_manfe",
    "detect_manfe",
    "detect_oracle_mle",
    "gen_frame",
    "load_checkpoint",
    "log_pdf_analytic",
    "neighborhood_size",
    "qpsk_demap",
    "qpsk_modulate",
    "sample_noise",
    "sas_pdf_numeric",
    "save_checkpoint",
    "sigma_for_snr",
    "train_flow",
]
