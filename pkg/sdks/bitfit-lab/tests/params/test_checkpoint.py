# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
import json

import numpy as np
import pytest

from bitfit_lab.autodiff import RngStream
from bitfit_lab.encoder.model import HeadKind, init_parameters
from bitfit_lab.params.checkpoint import (
    apply_task_delta,
    export_task_delta,
    load_checkpoint,
    load_task_delta,
    save_checkpoint,
    save_task_delta,
)
from bitfit_lab.params.exceptions import CheckpointMismatchError, CorruptCheckpointError
from bitfit_lab.params.naming import layer_param
from bitfit_lab.params.selectors import Selector, resolve


@pytest.fixture
def snapshot(tiny_store):
    return tiny_store.snapshot()


class TestCheckpoint:
    def test_round_trip(self, tmp_path, snapshot):
        path = save_checkpoint(snapshot, tmp_path / 'ckpt.json', metadata={'kind': 'test'})
        assert path.with_suffix('.bin').exists()

        loaded = load_checkpoint(path)
        assert loaded.equals(snapshot)
        assert loaded.digest() == snapshot.digest()
        assert loaded.metadata == {'kind': 'test'}

    def test_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_checkpoint(tmp_path / 'absent.json')

    def test_tampered_blob(self, tmp_path, snapshot):
        path = save_checkpoint(snapshot, tmp_path / 'ckpt.json')
        blob = path.with_suffix('.bin')
        raw = bytearray(blob.read_bytes())
        raw[0] ^= 0xFF
        blob.write_bytes(bytes(raw))
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path)

    def test_not_a_manifest(self, tmp_path):
        path = tmp_path / 'ckpt.json'
        path.write_text('{"format": "something else"}')
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path)

        path.write_text('not json')
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path)

    def test_manifest_is_readable(self, tmp_path, snapshot):
        path = save_checkpoint(snapshot, tmp_path / 'ckpt.json')
        manifest = json.loads(path.read_text())
        assert [e['name'] for e in manifest['entries']] == snapshot.names()
        assert manifest['dtype'] == '<f8'


class TestTaskDelta:
    @pytest.fixture
    def tuned(self, tiny_store):
        """A store whose biases moved, as after BitFit"""
        store = tiny_store.copy()
        store[layer_param(0, 'b_q')].data[...] = 0.5
        store['classifier.weight'].data[...] = 1.0
        return store

    def test_keeps_trainable_entries_only(self, tuned):
        delta = export_task_delta(tuned, resolve(Selector.parse('bq'), tuned))
        assert set(delta.values.names()) == {
            layer_param(0, 'b_q'),
            layer_param(1, 'b_q'),
            'classifier.weight',
            'classifier.bias',
        }
        assert delta.selector == 'bq'

    def test_apply_rebuilds_tuned_state(self, snapshot, tuned):
        delta = export_task_delta(tuned, resolve(Selector.parse('bitfit'), tuned), base_digest=snapshot.digest())
        rebuilt = apply_task_delta(snapshot, delta)
        assert rebuilt.equals(tuned.snapshot())

    def test_apply_appends_new_head(self, tiny_model, tuned):
        base = init_parameters(tiny_model, RngStream(0, 'init')).snapshot()
        delta = export_task_delta(tuned, resolve(Selector.parse('bitfit'), tuned), base_digest=base.digest())
        rebuilt = apply_task_delta(base, delta)
        assert rebuilt.names()[-2:] == ['classifier.weight', 'classifier.bias']
        assert np.all(rebuilt['classifier.weight'] == 1.0)

    def test_wrong_base(self, tiny_model, snapshot, tuned):
        delta = export_task_delta(tuned, resolve(Selector.parse('bitfit'), tuned), base_digest=snapshot.digest())
        other = init_parameters(tiny_model, RngStream(1, 'init'), head=HeadKind.CLASSIFIER).snapshot()
        with pytest.raises(CheckpointMismatchError):
            apply_task_delta(other, delta)

    def test_save_and_load(self, tmp_path, snapshot, tuned):
        delta = export_task_delta(tuned, resolve(Selector.parse('bitfit'), tuned), base_digest=snapshot.digest())
        loaded = load_task_delta(save_task_delta(delta, tmp_path / 'delta.json'))
        assert loaded.values.equals(delta.values)
        assert loaded.base_digest == snapshot.digest()
        assert loaded.selector == 'bitfit'
        assert loaded.num_elements == delta.num_elements

    def test_plain_checkpoint_is_not_a_delta(self, tmp_path, snapshot):
        path = save_checkpoint(snapshot, tmp_path / 'ckpt.json')
        with pytest.raises(CorruptCheckpointError):
            load_task_delta(path)
