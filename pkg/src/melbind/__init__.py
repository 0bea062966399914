"""melbind: a desk-scale text-to-music personalization laboratory."""

__version__ = "0.1.0"

from .audio import AudioClip, MelCodec, read_wav, synth_fixture, write_wav
from .model import ModelState, load_model, save_model
from .training import (
    Concept,
    PersonalizationConfig,
    PretrainConfig,
    db_config,
    pretrain,
    register_concept,
    ti_config,
    train_db,
    train_ti,
)

__all__ = [
    "__version__",
    "AudioClip",
    "MelCodec",
    "read_wav",
    "synth_fixture",
    "write_wav",
    "ModelState",
    "load_model",
    "save_model",
    "Concept",
    "PersonalizationConfig",
    "PretrainConfig",
    "db_config",
    "pretrain",
    "register_concept",
    "ti_config",
    "train_db",
    "train_ti",
]
