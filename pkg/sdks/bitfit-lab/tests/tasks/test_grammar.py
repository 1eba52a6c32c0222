# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
import numpy as np
import pytest
from pydantic import ValidationError
from scipy import stats

from bitfit_lab.encoder.config import CLS_ID, NUM_RESERVED_TOKENS
from bitfit_lab.tasks.exceptions import TaskGenerationError
from bitfit_lab.tasks.grammar import GrammarParams, Slot, Vocabulary, gen_corpus, slot_of


class TestVocabulary:
    def test_default_size(self, grammar):
        vocab = Vocabulary.build(grammar)
        assert vocab.size == 41
        assert vocab.tokens[:NUM_RESERVED_TOKENS] == ['[PAD]', '[CLS]', '[SEP]', '[MASK]']

    def test_ids_are_disjoint(self, grammar):
        vocab = Vocabulary.build(grammar)
        groups = vocab.topic_a + vocab.topic_b + vocab.nouns + vocab.verbs
        groups += [vocab.neutral_verbs, vocab.function_words]
        ids = [i for group in groups for i in group]
        assert len(ids) == len(set(ids)) == vocab.size - NUM_RESERVED_TOKENS

    def test_invalid_probability(self):
        with pytest.raises(ValidationError):
            GrammarParams(topic_noise=1.0)


class TestCorpus:
    def test_deterministic(self, grammar):
        assert gen_corpus(grammar, 20, seed=3).sentences == gen_corpus(grammar, 20, seed=3).sentences
        assert gen_corpus(grammar, 20, seed=3).sentences != gen_corpus(grammar, 20, seed=4).sentences

    def test_sequences(self, grammar):
        sequences = gen_corpus(grammar, 5, seed=0).sequences()
        assert sequences.shape == (5, grammar.sentence_length + 1)
        assert np.all(sequences[:, 0] == CLS_ID)
        assert np.all(sequences[:, 1:] >= NUM_RESERVED_TOKENS)

    def test_empty(self, grammar):
        with pytest.raises(TaskGenerationError):
            gen_corpus(grammar, 0, seed=0)

    def test_nouns_and_verbs_agree(self, grammar):
        corpus = gen_corpus(grammar, 200, seed=1)
        vocab = corpus.vocab
        for words, latents in zip(corpus.sentences, corpus.latents):
            for pos, word in enumerate(words):
                if slot_of(pos) == Slot.NOUN:
                    number = latents.noun_numbers[pos // len(Slot)]
                    assert word in vocab.nouns[number]
                elif slot_of(pos) == Slot.VERB:
                    number = latents.noun_numbers[pos // len(Slot)]
                    assert word in vocab.verbs[number] or word in vocab.neutral_verbs

    def test_topic_noise_rate(self, grammar):
        """Topic words come from the wrong cluster with probability topic_noise"""
        corpus = gen_corpus(grammar, 2000, seed=2)
        vocab = corpus.vocab
        matched = flipped = 0
        for words, latents in zip(corpus.sentences, corpus.latents):
            for pos, word in enumerate(words):
                if slot_of(pos) == Slot.TOPIC_A:
                    if word in vocab.topic_a[latents.topic_a]:
                        matched += 1
                    else:
                        assert word in vocab.topic_a[1 - latents.topic_a]
                        flipped += 1

        total = matched + flipped
        expected = [total * (1 - grammar.topic_noise), total * grammar.topic_noise]
        _, p_value = stats.chisquare([matched, flipped], expected)
        assert p_value > 1e-3

    def test_topics_balanced(self, grammar):
        corpus = gen_corpus(grammar, 2000, seed=2)
        topics = np.array([[lat.topic_a, lat.topic_b] for lat in corpus.latents])
        assert stats.binomtest(int(topics[:, 0].sum()), len(topics)).pvalue > 1e-3
