# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
import numpy as np
import pytest
from scipy.special import erf

from bitfit_lab.autodiff import RngStream, Tensor, backward, cross_entropy, grad_check
from bitfit_lab.encoder.config import MASK_ID, ModelConfig, bert_base_config
from bitfit_lab.encoder.exceptions import EmptyMaskError, SequenceLengthError, VocabularyError
from bitfit_lab.encoder.model import (
    ActivationTrace,
    HeadKind,
    attach_head,
    build_layout,
    classifier_logits,
    classify_cls,
    encode,
    init_parameters,
    mlm_logits,
    mlm_loss,
    tag_tokens,
    tagger_logits,
)
from bitfit_lab.params import naming
from bitfit_lab.params.naming import layer_param


def randomize(store, seed: int = 0, std: float = 0.3):
    """Give every entry non-trivial values, biases and LayerNorm parameters included"""
    rng = np.random.default_rng(seed)
    for name, tensor in store.items():
        base = 1.0 if name.endswith('LayerNorm.weight') else 0.0
        tensor.data[...] = base + rng.normal(0.0, std, tensor.shape)
    return store


def reference_layer_norm(x, g, b, eps):
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    return g * (x - mu) / np.sqrt(var + eps) + b


def reference_encode(ids, store, cfg: ModelConfig) -> np.ndarray:
    """Single sequence, plain numpy, one head at a time"""

    def p(name):
        return store[name].data

    eps, dh = cfg.layer_norm_eps, cfg.hidden // cfg.num_heads
    x = p(naming.WORD_EMBEDDINGS)[ids] + p(naming.POSITION_EMBEDDINGS)[: len(ids)] + p(naming.TOKEN_TYPE_EMBEDDINGS)[0]
    x = reference_layer_norm(x, p(naming.EMBEDDING_LN_WEIGHT), p(naming.EMBEDDING_LN_BIAS), eps)
    for layer in range(cfg.num_layers):

        def w(symbol):
            return p(layer_param(layer, symbol))

        q = x @ w('W_q').T + w('b_q')
        k = x @ w('W_k').T + w('b_k')
        v = x @ w('W_v').T + w('b_v')
        heads = []
        for m in range(cfg.num_heads):
            cols = slice(m * dh, (m + 1) * dh)
            scores = q[:, cols] @ k[:, cols].T / np.sqrt(dh)
            weights = np.exp(scores - scores.max(axis=1, keepdims=True))
            weights /= weights.sum(axis=1, keepdims=True)
            heads.append(weights @ v[:, cols])
        h1 = np.concatenate(heads, axis=1)
        h2 = h1 @ w('W_m1').T + w('b_m1')
        h3 = reference_layer_norm(h2 + x, w('g_LN1'), w('b_LN1'), eps)
        pre = h3 @ w('W_m2').T + w('b_m2')
        h4 = pre * 0.5 * (1.0 + erf(pre / np.sqrt(2.0)))
        h5 = h4 @ w('W_m3').T + w('b_m3')
        x = reference_layer_norm(h5 + h3, w('g_LN2'), w('b_LN2'), eps)
    return x


class TestLayout:
    def test_store_matches_layout(self, tiny_model, tiny_store):
        layout = build_layout(tiny_model, head=HeadKind.CLASSIFIER)
        assert tiny_store.layout == layout
        assert len(layout) == 5 + 16 * tiny_model.num_layers + 2

    def test_mlm_bias_appended(self, tiny_model):
        layout = build_layout(tiny_model, mlm=True)
        assert layout.names()[-1] == 'cls.predictions.bias'
        assert layout.shape_of('cls.predictions.bias') == (tiny_model.vocab_size,)

    def test_bert_base_total(self):
        assert build_layout(bert_base_config()).total == 108_891_648

    def test_initial_values(self, tiny_model, tiny_store):
        assert not tiny_store[layer_param(0, 'b_k')].data.any()
        assert np.all(tiny_store[layer_param(1, 'g_LN2')].data == 1.0)
        assert tiny_store[layer_param(0, 'W_q')].data.std() > 0

    def test_attach_head(self, tiny_model):
        store = init_parameters(tiny_model, RngStream(0, 'init'))
        attach_head(store, tiny_model.model_copy(update={'num_tags': 3}), HeadKind.TAGGER, RngStream(1, 'init'))
        assert store['tagger.weight'].shape == (3, tiny_model.hidden)


class TestHeads:
    @pytest.fixture
    def head(self):
        return Tensor([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]), Tensor([0.0, 0.0, 1.0])

    def test_classify_reads_first_position(self, head):
        reps = Tensor([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        np.testing.assert_array_equal(classify_cls(reps, *head).data, [1.0, 2.0, 4.0])

    def test_classify_batch(self, head):
        reps = Tensor(np.arange(12, dtype=float).reshape(2, 3, 2))
        np.testing.assert_array_equal(classify_cls(reps, *head).data, [[0.0, 1.0, 2.0], [6.0, 7.0, 14.0]])

    def test_classify_rejects_flat_input(self, head):
        with pytest.raises(ValueError):
            classify_cls(Tensor([1.0, 2.0]), *head)

    def test_tag_every_position(self, head):
        reps = Tensor([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        logits = tag_tokens(reps, *head)
        np.testing.assert_array_equal(logits.data, [[1.0, 2.0, 4.0], [3.0, 4.0, 8.0], [5.0, 6.0, 12.0]])


class TestEncode:
    def test_shapes(self, tiny_model, tiny_store, tokens):
        assert encode(tokens, tiny_store, tiny_model).shape == (3, 10, tiny_model.hidden)
        assert encode(tokens[0], tiny_store, tiny_model).shape == (10, tiny_model.hidden)
        assert classifier_logits(tokens, tiny_store, tiny_model).shape == (3, tiny_model.num_classes)

    def test_single_matches_batch_row(self, tiny_model, tiny_store, tokens):
        batch = encode(tokens, tiny_store, tiny_model).data
        single = encode(tokens[1], tiny_store, tiny_model).data
        assert np.allclose(batch[1], single, atol=1e-12)

    def test_tagger_logits(self, tiny_model, tokens):
        store = init_parameters(tiny_model, RngStream(0, 'init'), head=HeadKind.TAGGER)
        assert tagger_logits(tokens, store, tiny_model).shape == (3, 10, tiny_model.num_tags)

    def test_segments_change_output(self, tiny_model, tiny_store, tokens):
        randomize(tiny_store)
        segments = np.zeros_like(tokens)
        segments[:, 5:] = 1
        plain = encode(tokens, tiny_store, tiny_model).data
        paired = encode(tokens, tiny_store, tiny_model, segments=segments).data
        assert not np.allclose(plain, paired)

    def test_unknown_token(self, tiny_model, tiny_store):
        with pytest.raises(VocabularyError):
            encode([1, 2, tiny_model.vocab_size], tiny_store, tiny_model)

    def test_too_long(self, tiny_model, tiny_store):
        with pytest.raises(SequenceLengthError):
            encode(np.full(tiny_model.max_seq_len + 1, 5), tiny_store, tiny_model)

    def test_trace(self, tiny_model, tiny_store, tokens):
        trace = ActivationTrace()
        out = encode(tokens, tiny_store, tiny_model, trace=trace).data
        assert len(trace) == tiny_model.num_layers
        assert trace.embeddings.shape == (3, 10, tiny_model.hidden)
        last = trace.layers[-1]
        assert np.array_equal(last.out, out)
        assert np.all(last.ln1_sigma > 0) and np.all(last.ln2_sigma > 0)
        # unit gains and zero biases leave normalized rows
        assert np.allclose(last.out.mean(axis=-1), 0.0, atol=1e-9)

    def test_trace_off_by_default(self, tiny_model, tiny_store, tokens):
        trace = ActivationTrace()
        encode(tokens, tiny_store, tiny_model)
        assert len(trace) == 0


class TestForwardPass:
    def test_matches_reference(self, tiny_model, tiny_store, tokens):
        randomize(tiny_store, seed=3)
        for row in tokens:
            expected = reference_encode(row, tiny_store, tiny_model)
            np.testing.assert_allclose(encode(row, tiny_store, tiny_model).data, expected, rtol=0.0, atol=1e-10)

    def test_zero_weights_give_layer_norm_bias(self, tiny_model, tokens):
        cfg = tiny_model.model_copy(update={'num_layers': 1, 'num_heads': 1})
        store = init_parameters(cfg, RngStream(0, 'init'))
        for name, tensor in store.items():
            if not name.endswith('LayerNorm.weight'):
                tensor.data[...] = 0.0
        offset = np.linspace(-1.0, 1.0, cfg.hidden)
        store[layer_param(0, 'b_LN2')].data[...] = offset

        out = encode(tokens, store, cfg).data
        assert np.array_equal(out, np.broadcast_to(offset, out.shape))

    def test_zero_weights_keep_embedding_only(self, tiny_model, tokens):
        """With every layer weight and bias zero the output is the embedding row renormalized twice"""
        cfg = tiny_model.model_copy(update={'num_layers': 1, 'num_heads': 1})
        store = init_parameters(cfg, RngStream(0, 'init'))
        for name, tensor in store.items():
            if name.startswith('encoder.') and not name.endswith('LayerNorm.weight'):
                tensor.data[...] = 0.0

        def normalize(x):
            return reference_layer_norm(x, np.ones(cfg.hidden), np.zeros(cfg.hidden), cfg.layer_norm_eps)

        positions = store[naming.POSITION_EMBEDDINGS].data
        segment = store[naming.TOKEN_TYPE_EMBEDDINGS].data[0]
        for row in tokens:
            summed = store[naming.WORD_EMBEDDINGS].data[row] + positions[: len(row)] + segment
            expected = normalize(normalize(normalize(summed)))
            np.testing.assert_allclose(encode(row, store, cfg).data, expected, rtol=0.0, atol=1e-10)

    def test_residual_structure(self, tiny_model, tiny_store, tokens):
        randomize(tiny_store, seed=4)
        for layer in range(tiny_model.num_layers):
            for symbol in ('W_m2', 'W_m3', 'b_m2', 'b_m3'):
                tiny_store[layer_param(layer, symbol)].data[...] = 0.0

        trace = ActivationTrace()
        encode(tokens, tiny_store, tiny_model, trace=trace)
        for layer, step in enumerate(trace.layers):
            assert not step.h5.any()
            g, b = tiny_store[layer_param(layer, 'g_LN2')].data, tiny_store[layer_param(layer, 'b_LN2')].data
            expected = reference_layer_norm(step.h3, g, b, tiny_model.layer_norm_eps)
            np.testing.assert_allclose(step.out, expected, rtol=0.0, atol=1e-12)


class TestDropout:
    @pytest.fixture
    def model(self, tiny_model) -> ModelConfig:
        return tiny_model.model_copy(update={'dropout_p': 0.3})

    def test_eval_is_deterministic(self, model, tiny_store, tokens):
        first = encode(tokens, tiny_store, model, rng=RngStream(0, 'dropout')).data
        second = encode(tokens, tiny_store, model, rng=RngStream(1, 'dropout')).data
        assert np.array_equal(first, second)

    def test_training_draws_from_stream(self, model, tiny_store, tokens):
        randomize(tiny_store)
        first = encode(tokens, tiny_store, model, training=True, rng=RngStream(0, 'dropout')).data
        again = encode(tokens, tiny_store, model, training=True, rng=RngStream(0, 'dropout')).data
        other = encode(tokens, tiny_store, model, training=True, rng=RngStream(1, 'dropout')).data
        assert np.array_equal(first, again)
        assert not np.allclose(first, other)


class TestKeyBias:
    """The key bias adds the same amount to every score of a query row, which softmax cancels"""

    def test_gradient_vanishes(self, tiny_model, tiny_store, tokens):
        randomize(tiny_store)
        backward(cross_entropy(classifier_logits(tokens, tiny_store, tiny_model), [0, 1, 1]))

        for layer in range(tiny_model.num_layers):
            assert np.abs(tiny_store[layer_param(layer, 'b_k')].grad).max() <= 1e-12
            assert np.abs(tiny_store[layer_param(layer, 'b_q')].grad).max() > 1e-8

    def test_output_ignores_key_bias(self, tiny_model, tiny_store, tokens):
        randomize(tiny_store)
        before = encode(tokens, tiny_store, tiny_model).data
        rng = np.random.default_rng(9)
        for layer in range(tiny_model.num_layers):
            tiny_store[layer_param(layer, 'b_k')].data[...] += rng.normal(0.0, 5.0, tiny_model.hidden)
        after = encode(tokens, tiny_store, tiny_model).data
        assert np.allclose(before, after, rtol=0.0, atol=1e-9)


class TestMaskedLM:
    @pytest.fixture
    def mlm_store(self, tiny_model):
        return init_parameters(tiny_model, RngStream(0, 'init'), mlm=True)

    def test_logits_at_masked_positions(self, tiny_model, mlm_store, tokens):
        mask = np.zeros(tokens.shape, dtype=bool)
        mask[0, 2] = mask[2, 7] = True
        logits, targets = mlm_logits(tokens, mask, mlm_store, tiny_model)
        assert logits.shape == (2, tiny_model.vocab_size)
        assert targets.tolist() == [tokens[0, 2], tokens[2, 7]]

    def test_position_list_for_single_sequence(self, tiny_model, mlm_store, tokens):
        loss = mlm_loss(tokens[0], [1, 4], mlm_store, tiny_model)
        # near-uniform predictions at initialisation
        assert loss.item() == pytest.approx(np.log(tiny_model.vocab_size), rel=0.05)

    def test_masked_input_hides_token(self, tiny_model, mlm_store, tokens):
        """Prediction at a masked position cannot depend on the original token"""
        changed = tokens.copy()
        changed[0, 3] = (tokens[0, 3] + 1) % tiny_model.vocab_size or MASK_ID + 1
        mask = np.zeros(tokens.shape, dtype=bool)
        mask[0, 3] = True
        first, _ = mlm_logits(tokens, mask, mlm_store, tiny_model)
        second, _ = mlm_logits(changed, mask, mlm_store, tiny_model)
        assert np.array_equal(first.data, second.data)

    def test_certain_prediction(self, tiny_model, mlm_store, tokens):
        mlm_store[naming.MLM_BIAS].data[tokens[0, 4]] = 50.0
        assert mlm_loss(tokens[0], [4], mlm_store, tiny_model).item() < 1e-3

    def test_empty_mask(self, tiny_model, mlm_store, tokens):
        with pytest.raises(EmptyMaskError):
            mlm_loss(tokens, np.zeros(tokens.shape, dtype=bool), mlm_store, tiny_model)


class TestGradients:
    def test_classifier_loss(self, tiny_model, tiny_store, tokens):
        randomize(tiny_store, std=0.2)

        def f():
            return cross_entropy(classifier_logits(tokens, tiny_store, tiny_model), [1, 0, 1])

        report = grad_check(f, tiny_store, num_samples=400, seed=0)
        assert report.num_coordinates == 400
        assert report.passed, str(report)

    def test_mlm_loss(self, tiny_model, tokens):
        store = randomize(init_parameters(tiny_model, RngStream(0, 'init'), mlm=True), std=0.2)
        mask = np.zeros(tokens.shape, dtype=bool)
        mask[:, 3] = True

        report = grad_check(lambda: mlm_loss(tokens, mask, store, tiny_model), store, num_samples=300, seed=1)
        assert report.passed, str(report)
