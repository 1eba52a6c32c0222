# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
import math

import numpy as np
import pytest

from bitfit_lab.autodiff import RngStream
from bitfit_lab.encoder.config import CLS_ID, NUM_RESERVED_TOKENS
from bitfit_lab.encoder.model import init_parameters
from bitfit_lab.params.naming import layer_param
from bitfit_lab.tasks.grammar import gen_corpus
from bitfit_lab.training.config import PretrainConfig
from bitfit_lab.training.exceptions import EmptyDatasetError
from bitfit_lab.training.pretrain import evaluate_mlm, mask_tokens, pretrain_mlm


@pytest.fixture
def corpus(grammar):
    return gen_corpus(grammar, 40, seed=0)


@pytest.fixture
def short_config() -> PretrainConfig:
    return PretrainConfig(steps=5, batch_size=8, learning_rate=1e-3, corpus_size=40, log_every=2)


class TestMaskTokens:
    def test_reserved_tokens_never_masked(self):
        tokens = np.array([[CLS_ID, 10, 11, 12, 0, 0]] * 50)
        mask = mask_tokens(tokens, RngStream(0, 'mask'), rate=0.9)
        assert not mask[:, 0].any()
        assert not mask[:, 4:].any()

    def test_at_least_one_per_row(self):
        tokens = RngStream(1, 'tokens').integers(NUM_RESERVED_TOKENS, 40, (100, 6))
        mask = mask_tokens(tokens, RngStream(0, 'mask'), rate=0.01)
        assert mask.any(axis=1).all()

    def test_rows_without_maskable_positions(self):
        mask = mask_tokens(np.array([[CLS_ID, 0, 0]]), RngStream(0, 'mask'), rate=0.5)
        assert not mask.any()

    def test_rate(self):
        tokens = RngStream(2, 'tokens').integers(NUM_RESERVED_TOKENS, 40, (200, 50))
        mask = mask_tokens(tokens, RngStream(0, 'mask'), rate=0.15)
        assert mask.mean() == pytest.approx(0.15, abs=0.02)


class TestPretrainMlm:
    def test_zero_steps_returns_initialization(self, tiny_model, corpus, short_config):
        result = pretrain_mlm(tiny_model, corpus, short_config.model_copy(update={'steps': 0}))
        expected = init_parameters(tiny_model, RngStream(short_config.seed, 'init'), mlm=True).snapshot()
        assert result.snapshot.equals(expected)
        assert result.losses == [] and result.final_loss is None

    def test_short_run(self, tiny_model, corpus, short_config):
        result = pretrain_mlm(tiny_model, corpus, short_config)
        assert len(result.losses) == 5
        assert all(math.isfinite(loss) for loss in result.losses)
        assert [entry['step'] for entry in result.log] == [2, 4, 5]
        assert result.to_json()['steps'] == 5
        assert 'cls.predictions.bias' in result.snapshot.names()

    def test_deterministic(self, tiny_model, corpus, short_config):
        first = pretrain_mlm(tiny_model, corpus, short_config)
        second = pretrain_mlm(tiny_model, corpus, short_config)
        assert first.losses == second.losses
        assert first.snapshot.digest() == second.snapshot.digest()

    def test_key_bias_stays_at_zero(self, tiny_model, corpus, short_config):
        result = pretrain_mlm(tiny_model, corpus, short_config)
        initial = pretrain_mlm(tiny_model, corpus, short_config.model_copy(update={'steps': 0})).snapshot
        for layer in range(tiny_model.num_layers):
            assert not result.snapshot[layer_param(layer, 'b_k')].any()
            query_bias = layer_param(layer, 'b_q')
            assert not np.array_equal(result.snapshot[query_bias], initial[query_bias])

    def test_heldout_evaluation(self, tiny_model, corpus, short_config, grammar):
        heldout = gen_corpus(grammar, 10, seed=1)
        result = pretrain_mlm(tiny_model, corpus, short_config, heldout=heldout)
        for evaluation in (result.initial_heldout, result.final_heldout):
            assert evaluation.num_masked >= len(heldout)
            assert 0.0 <= evaluation.accuracy <= 1.0
        # untrained logits are close to uniform over the vocabulary
        assert result.initial_heldout.loss == pytest.approx(math.log(tiny_model.vocab_size), rel=0.1)
        assert result.to_json()['heldout']['final']['num_masked'] == result.final_heldout.num_masked

    def test_empty_heldout(self, tiny_model, tiny_store):
        with pytest.raises(EmptyDatasetError):
            evaluate_mlm(tiny_store, tiny_model, np.array([[CLS_ID, 0]]), np.zeros((1, 2), dtype=bool))

    @pytest.mark.slow
    def test_heldout_loss_decreases(self, tiny_model, grammar):
        cfg = PretrainConfig(steps=300, batch_size=16, learning_rate=3e-3, corpus_size=400)
        corpus = gen_corpus(grammar, cfg.corpus_size, seed=0)
        heldout = gen_corpus(grammar, 50, seed=1)
        result = pretrain_mlm(tiny_model, corpus, cfg, heldout=heldout)
        assert result.final_heldout.loss < result.initial_heldout.loss - 0.5
