# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
import numpy as np
import pytest

from bitfit_lab.autodiff import RngStream
from bitfit_lab.encoder.config import ModelConfig
from bitfit_lab.encoder.model import HeadKind, init_parameters
from bitfit_lab.tasks.datasets import TaskKind, gen_task
from bitfit_lab.tasks.grammar import GrammarParams
from bitfit_lab.training.config import TrainConfig


@pytest.fixture
def tiny_model() -> ModelConfig:
    return ModelConfig(num_layers=2, num_heads=2, hidden=8, mlp_width=16, vocab_size=50, max_seq_len=16, dropout_p=0.0)


@pytest.fixture
def grammar() -> GrammarParams:
    return GrammarParams()


@pytest.fixture
def tiny_store(tiny_model):
    return init_parameters(tiny_model, RngStream(0, 'init'), head=HeadKind.CLASSIFIER)


@pytest.fixture
def tokens() -> np.ndarray:
    return RngStream(7, 'tokens').integers(4, 50, (3, 10))


@pytest.fixture
def single_task(grammar):
    return gen_task(grammar, TaskKind.SINGLE, n_train=24, n_dev=12, seed=0)


@pytest.fixture
def tagging_task(grammar):
    return gen_task(grammar, TaskKind.TAGGING, n_train=16, n_dev=8, seed=1)


@pytest.fixture
def tiny_train_config() -> TrainConfig:
    return TrainConfig(learning_rates=[1e-3], batch_size=8, max_epochs=2, seeds=[0, 1], patience=2)
