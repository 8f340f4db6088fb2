"""Embedding-domain speech enhancement: LMS encoding, EMB1 files, metrics and
the encoder -> denoiser -> vocoder chain."""

from ._core import (
    ConfigError,
    Enhancer,
    Error,
    FormatError,
    IoError,
    NumericError,
    count_params,
    decode_embeddings,
    encode_embeddings,
    gain_for_snr,
    istft,
    lms_encode,
    lsd,
    mix,
    read_embeddings,
    read_wav,
    resample,
    si_snr,
    stft,
    stoi,
    write_embeddings,
    write_wav,
)

__all__ = [
    "ConfigError",
    "Enhancer",
    "Error",
    "FormatError",
    "IoError",
    "NumericError",
    "count_params",
    "decode_embeddings",
    "encode_embeddings",
    "gain_for_snr",
    "istft",
    "lms_encode",
    "lsd",
    "mix",
    "read_embeddings",
    "read_wav",
    "resample",
    "si_snr",
    "stft",
    "stoi",
    "write_embeddings",
    "write_wav",
]
