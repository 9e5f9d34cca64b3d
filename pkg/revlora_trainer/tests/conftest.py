import pytest

from revlora_trainer.config import TrainerConfig


@pytest.fixture
def tiny_config():
    return TrainerConfig(base_model="tiny:64,2", lora_rank=8, lora_alpha=8,
                         batch_size=16, seed=3)
