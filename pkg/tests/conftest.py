import pytest

from melbind.harness.experiment import EmbedderBundle, pretrain_from_manifest
from melbind.harness.manifest import load_manifest, packaged_manifest_path
from melbind.seeds import derive_seed
from melbind.training import PretrainConfig

ROOT_SEED = 42


@pytest.fixture(scope="session")
def corpus16():
    return load_manifest(packaged_manifest_path("corpus16"))


@pytest.fixture(scope="session")
def heldout4():
    return load_manifest(packaged_manifest_path("heldout4"))


@pytest.fixture(scope="session")
def pretrain_result(corpus16):
    """Full-default pretraining run shared by training, harness, and
    acceptance tests. Roughly a minute."""
    return pretrain_from_manifest(corpus16, PretrainConfig(seed=0))


@pytest.fixture(scope="session")
def base_model(pretrain_result):
    return pretrain_result.model


@pytest.fixture(scope="session")
def embedders(corpus16, heldout4, base_model):
    return EmbedderBundle.build(
        corpus16.labeled_clips(),
        base_model.vocab,
        model=base_model,
        prompts=heldout4.editability_prompts,
        seed=derive_seed(ROOT_SEED, "embedder"),
    )
