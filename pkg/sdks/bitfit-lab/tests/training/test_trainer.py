# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
from dataclasses import replace

import numpy as np
import pytest

from bitfit_lab.params.naming import is_bias, layer_param
from bitfit_lab.params.selectors import Selector
from bitfit_lab.training.exceptions import EmptyDatasetError
from bitfit_lab.training.metrics import Metric
from bitfit_lab.training.trainer import evaluate, prepare_store, random_base, run_single, task_loss, train_task


@pytest.fixture
def base(tiny_model):
    return random_base(tiny_model, seed=0)


def with_selector(cfg, text: str, **update):
    return cfg.model_copy(update={'selector': Selector.parse(text), **update})


class TestPrepareStore:
    def test_head_follows_dataset(self, tiny_model, base, single_task, tagging_task):
        assert 'classifier.weight' in prepare_store(base, tiny_model, single_task, seed=0)
        tagger = prepare_store(base, tiny_model, tagging_task, seed=0)
        assert tagger['tagger.weight'].shape == (tagging_task.num_labels, tiny_model.hidden)

    def test_drops_pretraining_entries(self, tiny_model, single_task):
        from bitfit_lab.autodiff import RngStream
        from bitfit_lab.encoder.model import init_parameters

        base = init_parameters(tiny_model, RngStream(0, 'init'), mlm=True).snapshot()
        store = prepare_store(base, tiny_model, single_task, seed=0)
        assert not any(name.startswith('cls.predictions.') for name in store.names())

    def test_tagging_loss_ignores_untagged(self, tiny_model, base, tagging_task):
        store = prepare_store(base, tiny_model, tagging_task, seed=0)
        loss = task_loss(store, tiny_model, tagging_task, tagging_task.train)
        assert np.isfinite(loss.item())

    def test_evaluate(self, tiny_model, base, single_task):
        store = prepare_store(base, tiny_model, single_task, seed=0)
        result = evaluate(store, tiny_model, single_task, single_task.dev, Metric.MCC)
        assert -1.0 <= result.metric <= 1.0
        assert 0.0 <= result.accuracy <= 1.0


class TestRunSingle:
    def test_record(self, tiny_model, base, single_task, tiny_train_config):
        record, best = run_single(tiny_model, base, single_task, tiny_train_config, lr=1e-3, seed=0)
        assert record.steps == 6
        assert len(record.loss_curve) == 6
        assert record.dev_curve[0][0] == 0.0
        assert 0 <= record.best_step <= record.steps
        assert best.names()[-2:] == ['classifier.weight', 'classifier.bias']

    def test_zero_epochs_keeps_initial_state(self, tiny_model, base, single_task, tiny_train_config):
        cfg = tiny_train_config.model_copy(update={'max_epochs': 0})
        record, best = run_single(tiny_model, base, single_task, cfg, lr=1e-3, seed=0)
        assert record.steps == 0 and record.best_step == 0
        assert best.equals(prepare_store(base, tiny_model, single_task, seed=0).snapshot())

    def test_patience_stops_early(self, tiny_model, base, single_task, tiny_train_config):
        cfg = tiny_train_config.model_copy(update={'max_epochs': 50, 'eval_every': 1, 'patience': 1})
        record, _ = run_single(tiny_model, base, single_task, cfg, lr=1e-5, seed=0)
        assert record.stopped_early
        assert record.steps < 50 * 3


class TestTrainTask:
    def test_deterministic(self, tiny_model, base, single_task, tiny_train_config):
        first = train_task(tiny_model, base, single_task, tiny_train_config)
        second = train_task(tiny_model, base, single_task, tiny_train_config)
        assert first.to_json() == second.to_json()
        for seed in tiny_train_config.seeds:
            assert first.final_states[seed].equals(second.final_states[seed])

    def test_workers_do_not_change_results(self, tiny_model, base, single_task, tiny_train_config):
        serial = train_task(tiny_model, base, single_task, tiny_train_config)
        threaded = train_task(tiny_model, base, single_task, tiny_train_config.model_copy(update={'workers': 2}))
        assert serial.to_json() == threaded.to_json()

    def test_bitfit_touches_biases_only(self, tiny_model, base, single_task, tiny_train_config):
        run = train_task(tiny_model, base, single_task, tiny_train_config)
        for state in run.final_states.values():
            for name in base.names():
                if not is_bias(name):
                    assert np.array_equal(state[name], base[name]), name

    def test_key_bias_stays_at_zero(self, tiny_model, base, single_task, tiny_train_config):
        run = train_task(tiny_model, base, single_task, tiny_train_config)
        for state in run.final_states.values():
            for layer in range(tiny_model.num_layers):
                assert not state[layer_param(layer, 'b_k')].any()

    def test_frozen_trains_the_head_only(self, tiny_model, base, single_task, tiny_train_config):
        run = train_task(tiny_model, base, single_task, with_selector(tiny_train_config, 'frozen'))
        for state in run.final_states.values():
            for name in base.names():
                assert np.array_equal(state[name], base[name]), name
        assert run.param_count.trainable == 2 * tiny_model.hidden + 2

    def test_learning_rate_grid(self, tiny_model, base, single_task, tiny_train_config):
        cfg = tiny_train_config.model_copy(update={'learning_rates': [1e-3, 1e-2]})
        run = train_task(tiny_model, base, single_task, cfg, task_name='topic')
        assert sorted(run.lr_means) == [1e-3, 1e-2]
        assert run.best_lr in (1e-3, 1e-2)
        assert len(run.records) == 4
        assert run.task == 'topic'
        assert run.base_digest == base.digest()

    def test_tagging(self, tiny_model, base, tagging_task, tiny_train_config):
        run = train_task(tiny_model, base, tagging_task, tiny_train_config)
        summary = run.aggregate()
        assert 0.0 <= summary.mean <= 1.0
        assert summary.n == 2

    def test_empty_train_split(self, tiny_model, base, single_task, tiny_train_config):
        empty = replace(single_task, train=single_task.train.take(np.arange(0)))
        with pytest.raises(EmptyDatasetError):
            train_task(tiny_model, base, empty, tiny_train_config)

    @pytest.mark.slow
    def test_learns_separable_task(self, grammar, tiny_model):
        """The agreement task is solvable from word identity, full fine-tuning must beat chance clearly"""
        from bitfit_lab.tasks.datasets import TaskKind, gen_task
        from bitfit_lab.training.config import TrainConfig

        model = tiny_model.model_copy(update={'hidden': 16, 'mlp_width': 32})
        dataset = gen_task(grammar, TaskKind.TAGGING, n_train=200, n_dev=100, seed=3)
        cfg = TrainConfig(
            learning_rates=[3e-3], batch_size=16, max_epochs=15, seeds=[0], selector=Selector.parse('full')
        )
        run = train_task(model, random_base(model, seed=0), dataset, cfg)
        assert run.aggregate().mean > 0.75
