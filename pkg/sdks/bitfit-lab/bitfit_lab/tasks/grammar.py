# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""A small probabilistic grammar with latent structure

Every sentence carries two binary latent topics, `a` and `b`, and a grammatical number per noun. Tokens are laid
out in a repeating five-slot frame:

    noun  verb  topic-a word  topic-b word  function word

* a topic word comes from the cluster of its sentence's topic, or from the other cluster with probability
  `topic_noise`
* a noun is singular or plural with equal probability
* a verb agrees in number with the noun right before it, unless it is one of the number-neutral verbs, which
  are drawn with probability `neutral_verb_prob`
* function words are uniform noise

Downstream tasks are functions of the latents, so an encoder pretrained on this text has the features
those tasks need.
"""
import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, PositiveInt, field_validator

from bitfit_lab.autodiff import RngStream
from bitfit_lab.encoder.config import CLS_ID, MASK_ID, NUM_RESERVED_TOKENS, PAD_ID, SEP_ID

from .exceptions import TaskGenerationError

logger = logging.getLogger(__name__)

RESERVED_TOKENS = {PAD_ID: "[PAD]", CLS_ID: "[CLS]", SEP_ID: "[SEP]", MASK_ID: "[MASK]"}


class Slot(IntEnum):
    NOUN = 0
    VERB = 1
    TOPIC_A = 2
    TOPIC_B = 3
    FUNCTION = 4


SLOT_PERIOD = len(Slot)


def slot_of(position: int) -> Slot:
    """Slot of a position inside a sentence, 0 being the first word"""
    return Slot(position % SLOT_PERIOD)


class GrammarParams(BaseModel):
    """Knobs of the grammar

    :param words_per_cluster: words in each of the two clusters of each topic
    :param nouns_per_number: singular nouns, and as many plural ones
    :param verbs_per_number: singular verbs, and as many plural ones
    :param neutral_verbs: verbs carrying no number
    :param function_words: noise words of the last slot
    :param sentence_length: words per sentence
    :param topic_noise: probability of a topic word from the wrong cluster
    :param neutral_verb_prob: probability of a number-neutral verb
    """

    words_per_cluster: PositiveInt = 4
    nouns_per_number: PositiveInt = 3
    verbs_per_number: PositiveInt = 3
    neutral_verbs: PositiveInt = 3
    function_words: PositiveInt = 6
    sentence_length: PositiveInt = 15
    topic_noise: float = 0.1
    neutral_verb_prob: float = 0.3

    @field_validator("topic_noise", "neutral_verb_prob")
    @classmethod
    def _check_probability(cls, value: float) -> float:
        if not 0.0 <= value < 1.0:
            raise ValueError(f"probability must lie in [0, 1), got {value}")
        return value


@dataclass
class Vocabulary:
    """Token inventory, reserved tokens first

    Id lists are indexed by cluster (topics) or by number, 0 singular and 1 plural (nouns, verbs).
    """

    tokens: List[str]
    topic_a: List[List[int]]
    topic_b: List[List[int]]
    nouns: List[List[int]]
    verbs: List[List[int]]
    neutral_verbs: List[int]
    function_words: List[int]

    @property
    def size(self) -> int:
        return len(self.tokens)

    def decode(self, ids: Sequence[int]) -> str:
        return " ".join(self.tokens[i] for i in ids)

    @classmethod
    def build(cls, params: GrammarParams) -> "Vocabulary":
        tokens = [RESERVED_TOKENS[i] for i in range(NUM_RESERVED_TOKENS)]

        def allocate(prefix: str, count: int) -> List[int]:
            start = len(tokens)
            tokens.extend(f"{prefix}{i}" for i in range(count))
            return list(range(start, start + count))

        k = params.words_per_cluster
        return cls(
            tokens=tokens,
            topic_a=[allocate("alpha", k), allocate("aleph", k)],
            topic_b=[allocate("beta", k), allocate("beth", k)],
            nouns=[allocate("noun_sg", params.nouns_per_number), allocate("noun_pl", params.nouns_per_number)],
            verbs=[allocate("verb_sg", params.verbs_per_number), allocate("verb_pl", params.verbs_per_number)],
            neutral_verbs=allocate("verb_any", params.neutral_verbs),
            function_words=allocate("fn", params.function_words),
        )


@dataclass(frozen=True)
class SentenceLatents:
    """Latent variables a sentence was generated from

    :param noun_numbers: number of every noun, in order of appearance
    """

    topic_a: int
    topic_b: int
    noun_numbers: Tuple[int, ...]


@dataclass
class SyntheticCorpus:
    params: GrammarParams
    vocab: Vocabulary
    sentences: List[List[int]]
    latents: List[SentenceLatents]
    seed: int

    def __len__(self) -> int:
        return len(self.sentences)

    @property
    def sequence_length(self) -> int:
        return self.params.sentence_length + 1

    def sequences(self) -> np.ndarray:
        """Sentences with CLS prepended, as a [size, sentence_length + 1] array for pretraining"""
        body = np.asarray(self.sentences, dtype=np.int64).reshape(len(self.sentences), -1)
        cls_column = np.full((body.shape[0], 1), CLS_ID, dtype=np.int64)
        return np.concatenate([cls_column, body], axis=1)


def _pick(ids: Sequence[int], u: float) -> int:
    return ids[min(int(u * len(ids)), len(ids) - 1)]


def sample_sentence(
    vocab: Vocabulary, params: GrammarParams, rng: RngStream, topic_a: int, topic_b: int, length: int
) -> Tuple[List[int], SentenceLatents]:
    """Generate one sentence of `length` words for the given topics"""
    draws = rng.random((length, 3))
    words: List[int] = []
    numbers: List[int] = []
    for pos in range(length):
        u_event, u_word, u_number = draws[pos]
        slot = slot_of(pos)
        if slot == Slot.NOUN:
            number = int(u_number < 0.5)
            numbers.append(number)
            words.append(_pick(vocab.nouns[number], u_word))
        elif slot == Slot.VERB:
            if u_event < params.neutral_verb_prob:
                words.append(_pick(vocab.neutral_verbs, u_word))
            else:
                words.append(_pick(vocab.verbs[numbers[-1]], u_word))
        elif slot in (Slot.TOPIC_A, Slot.TOPIC_B):
            topic, clusters = (topic_a, vocab.topic_a) if slot == Slot.TOPIC_A else (topic_b, vocab.topic_b)
            cluster = 1 - topic if u_event < params.topic_noise else topic
            words.append(_pick(clusters[cluster], u_word))
        else:
            words.append(_pick(vocab.function_words, u_word))
    return words, SentenceLatents(topic_a, topic_b, tuple(numbers))


def gen_corpus(params: GrammarParams, size: int, seed: int) -> SyntheticCorpus:
    """Unlabelled pretraining text, a pure function of (params, size, seed)

    :raises: TaskGenerationError when size < 1
    """
    if size < 1:
        raise TaskGenerationError(f"corpus size must be at least 1, got {size}")
    vocab = Vocabulary.build(params)
    rng = RngStream(seed, "corpus")
    topics = rng.integers(0, 2, (size, 2))
    sentences, latents = [], []
    for a, b in topics:
        words, latent = sample_sentence(vocab, params, rng, int(a), int(b), params.sentence_length)
        sentences.append(words)
        latents.append(latent)
    logger.debug("generated a corpus of %d sentences over %d tokens", size, vocab.size)
    return SyntheticCorpus(params, vocab, sentences, latents, seed)
