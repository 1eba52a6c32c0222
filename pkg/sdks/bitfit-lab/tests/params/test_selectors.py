# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
import numpy as np
import pytest
from scipy import stats

from bitfit_lab.encoder.config import bert_base_config, bert_large_config
from bitfit_lab.encoder.model import HeadKind, build_layout
from bitfit_lab.params.counting import count_params
from bitfit_lab.params.exceptions import SamplingError, SelectorParseError
from bitfit_lab.params.naming import is_bias, layer_param
from bitfit_lab.params.sampling import sample_rand_rowcol, sample_rand_uniform
from bitfit_lab.params.selectors import (
    DEFAULT_REGIMES,
    Selector,
    SelectorKind,
    bitfit_budget,
    match_any,
    parse_selectors,
    resolve,
)
from bitfit_lab.params.store import ParamLayout

HEAD_SIZE = 2 * 8 + 2


@pytest.fixture
def layout(tiny_model) -> ParamLayout:
    return build_layout(tiny_model, head=HeadKind.CLASSIFIER)


class TestParse:
    @pytest.mark.parametrize(
        'text, kind',
        [
            ('full', SelectorKind.FULL),
            ('bitfit', SelectorKind.BITFIT),
            ('frozen', SelectorKind.NONE),
            ('none', SelectorKind.NONE),
            ('bq_bm2', SelectorKind.PATTERN),
            ('rand_uniform', SelectorKind.RAND_UNIFORM),
            ('rand_rowcol:0.01', SelectorKind.RAND_ROWCOL),
            ('pattern:*.key.bias|classifier.*', SelectorKind.PATTERN),
        ],
    )
    def test_kinds(self, text, kind):
        assert Selector.parse(text).kind == kind

    @pytest.mark.parametrize('text', ['full', 'bitfit', 'frozen', 'bq_bm2', 'bm2', 'bq', 'rand_uniform:0.25'])
    def test_text_form(self, text):
        assert Selector.parse(text).to_text() == text

    @pytest.mark.parametrize(
        'text',
        ['bogus', 'full:1', 'pattern:', 'pattern:a b', 'pattern:a||b', 'rand_uniform:1.5', 'rand_rowcol:x'],
    )
    def test_invalid(self, text):
        with pytest.raises(SelectorParseError):
            Selector.parse(text)

    def test_display_names(self):
        assert Selector.parse('bq_bm2').display_name == 'b_q+b_m2'
        assert Selector.parse('full').display_name == 'Full-FT'

    def test_parse_list(self):
        selectors = parse_selectors('full, bitfit,rand_uniform', seed=4)
        assert [s.to_text() for s in selectors] == ['full', 'bitfit', 'rand_uniform']
        assert selectors[2].seed == 4

    def test_default_regimes_parse(self):
        assert len(parse_selectors(DEFAULT_REGIMES)) == 8

    def test_match_any(self):
        assert match_any('encoder.layer.0.attention.self.key.bias', ['*.key.bias'])
        assert not match_any('encoder.layer.0.attention.self.key.weight', ['*.key.bias'])


class TestResolve:
    def test_full(self, layout):
        assert resolve(Selector.parse('full'), layout).trainable_count == layout.total

    def test_bitfit(self, layout):
        resolution = resolve(Selector.parse('bitfit'), layout)
        expected = {n for n in layout.names() if is_bias(n)} | {'classifier.weight'}
        assert resolution.trainable == expected
        assert not resolution.masks

    def test_frozen_keeps_heads(self, layout):
        resolution = resolve(Selector.parse('frozen'), layout)
        assert resolution.trainable_names() == ['classifier.weight', 'classifier.bias']
        assert resolution.trainable_count == HEAD_SIZE

    def test_heads_can_be_frozen(self, layout):
        selector = Selector(kind=SelectorKind.NONE, always_trainable=[])
        assert resolve(selector, layout).trainable_count == 0

    def test_preset(self, layout, tiny_model):
        resolution = resolve(Selector.parse('bq'), layout)
        expected = {layer_param(i, 'b_q') for i in range(tiny_model.num_layers)}
        assert resolution.trainable == expected | {'classifier.weight', 'classifier.bias'}

    @pytest.mark.parametrize('num_layers', [1, 2, 3])
    def test_presets_strictly_nested(self, tiny_model, num_layers):
        layout = build_layout(tiny_model.model_copy(update={'num_layers': num_layers}), head=HeadKind.CLASSIFIER)
        bitfit, bq_bm2, bq = (resolve(Selector.parse(text), layout).trainable for text in ('bitfit', 'bq_bm2', 'bq'))
        assert bitfit > bq_bm2 > bq

    def test_unmatched_pattern(self, layout):
        resolution = resolve(Selector.parse('pattern:*.nothing.bias|*.key.bias'), layout)
        assert len(resolution.diagnostics) == 1
        assert layer_param(0, 'b_k') in resolution.trainable

    def test_rand_uniform_matches_bitfit_budget(self, layout):
        budget = bitfit_budget(layout, list(Selector.parse('bitfit').always_trainable))
        assert budget == 152
        resolution = resolve(Selector.parse('rand_uniform', seed=1), layout)
        assert resolution.trainable_count == budget + HEAD_SIZE
        assert 'classifier.weight' not in resolution.masks

    def test_rand_rowcol_overshoot_bounded(self, layout):
        resolution = resolve(Selector.parse('rand_rowcol', seed=1), layout)
        realized = resolution.trainable_count - HEAD_SIZE
        longest = max(max(spec.shape) for spec in layout if len(spec.shape) == 2)
        assert 152 <= realized < 152 + longest
        assert all(len(layout.shape_of(name)) == 2 for name in resolution.masks)

    def test_random_selectors_follow_seed(self, layout):
        def masks(seed):
            resolution = resolve(Selector.parse('rand_uniform', seed=seed), layout)
            return {name: m.indices.tolist() for name, m in resolution.masks.items()}

        assert masks(0) == masks(0)
        assert masks(0) != masks(1)

    def test_fraction(self, layout):
        resolution = resolve(Selector.parse('rand_uniform:0.5'), layout)
        assert resolution.trainable_count == int(np.ceil(0.5 * (layout.total - HEAD_SIZE))) + HEAD_SIZE


class TestSampling:
    def test_uniform_indices(self, layout):
        masks = sample_rand_uniform(layout, fraction=0.1, seed=0)
        assert sum(m.count for m in masks.values()) == int(np.ceil(0.1 * layout.total))
        for mask in masks.values():
            assert np.all(np.diff(mask.indices) > 0)
            assert mask.to_array().sum() == mask.count

    @pytest.mark.parametrize('kwargs', [{'fraction': 0.0}, {'fraction': 1.0}, {'count': 0}, {}])
    def test_uniform_invalid(self, layout, kwargs):
        with pytest.raises(SamplingError):
            sample_rand_uniform(layout, **kwargs)

    def test_uniform_across_entries(self, layout):
        """Hits per entry over many seeds follow the entry sizes"""
        hits = dict.fromkeys(layout.names(), 0)
        for seed in range(50):
            for name, mask in sample_rand_uniform(layout, count=500, seed=seed).items():
                hits[name] += mask.count

        observed = np.array([hits[spec.name] for spec in layout], dtype=float)
        expected = np.array([spec.size for spec in layout], dtype=float) * observed.sum() / layout.total
        _, p_value = stats.chisquare(observed, expected)
        assert p_value > 1e-3

    @pytest.mark.parametrize('seed', range(20))
    def test_rowcol_within_one_row_of_budget(self, layout, seed):
        masks = sample_rand_rowcol(layout, budget=152, seed=seed)
        realized = sum(m.count for m in masks.values())
        longest = max(max(spec.shape) for spec in layout if len(spec.shape) == 2)
        assert 152 <= realized < 152 + longest

    def test_rowcol_union(self):
        layout = ParamLayout.from_shapes([('w', (3, 4))])
        masks = sample_rand_rowcol(layout, budget=12, seed=0)
        assert masks['w'].count == 12

    def test_rowcol_budget_range(self):
        layout = ParamLayout.from_shapes([('w', (3, 4)), ('b', (3,))])
        with pytest.raises(SamplingError):
            sample_rand_rowcol(layout, budget=2)
        with pytest.raises(SamplingError):
            sample_rand_rowcol(layout, budget=13)


class TestCounting:
    @pytest.mark.parametrize(
        'text, trainable, percent',
        [
            ('bitfit', 102_144, '0.09%'),
            ('bq_bm2', 46_080, '0.04%'),
            ('bm2', 36_864, '0.03%'),
            ('bq', 9_216, '0.01%'),
            ('frozen', 0, '0.00%'),
            ('full', 108_891_648, '100.00%'),
        ],
    )
    def test_bert_base(self, text, trainable, percent):
        count = count_params(build_layout(bert_base_config()), Selector.parse(text))
        assert count.total == 108_891_648
        assert count.trainable == trainable
        assert count.format_percent(2) == percent

    def test_bert_large(self):
        count = count_params(build_layout(bert_large_config()), Selector.parse('bitfit'))
        assert (count.trainable, count.total) == (271_360, 334_092_288)
        assert count.format_percent(2) == '0.08%'

    def test_random_selectors_match_bitfit(self, layout):
        bitfit = count_params(layout, Selector.parse('bitfit')).trainable
        assert count_params(layout, Selector.parse('rand_uniform')).trainable == bitfit
