# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""Downstream tasks defined by the latent variables of the grammar

single   CLS s, label = topic_a XOR topic_b, needs both topics at once
pair     CLS s1 SEP s2 with segment ids 0 / 1, label = 1 when both sentences share topic_a
tagging  CLS s, nouns tagged with their number, verbs with the number of their noun, other positions ignored

Class labels are assigned before sentences are sampled, so both classes are equally frequent. Dev examples
never repeat a train input.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Set, Tuple, Union

import numpy as np

from bitfit_lab.autodiff import RngStream
from bitfit_lab.encoder.config import CLS_ID, SEP_ID

from .exceptions import SubsetSizeError, TaskGenerationError
from .grammar import GrammarParams, SentenceLatents, Slot, Vocabulary, sample_sentence, slot_of

logger = logging.getLogger(__name__)

IGNORE_INDEX = -100
# Resampling attempts per dev example before the request is deemed unsatisfiable
MAX_DEDUP_ATTEMPTS = 100


class TaskKind(str, Enum):
    SINGLE = "single"
    PAIR = "pair"
    TAGGING = "tagging"


@dataclass
class Split:
    """Examples of one split

    :param tokens: [N, n] token ids
    :param segments: [N, n] segment ids
    :param labels: [N] class labels, or [N, n] tags with IGNORE_INDEX at untagged positions
    :param latents: generating latents per example, one entry per sentence, absent for deserialized data
    """

    tokens: np.ndarray
    segments: np.ndarray
    labels: np.ndarray
    latents: Optional[List[Tuple[SentenceLatents, ...]]] = None

    def __len__(self) -> int:
        return int(self.tokens.shape[0])

    def take(self, indices: np.ndarray) -> "Split":
        latents = None if self.latents is None else [self.latents[i] for i in indices]
        return Split(self.tokens[indices], self.segments[indices], self.labels[indices], latents)


@dataclass
class TaskDataset:
    kind: TaskKind
    train: Split
    dev: Split
    seed: int
    num_labels: int = 2
    grammar: GrammarParams = field(default_factory=GrammarParams)

    @property
    def sequence_length(self) -> int:
        return int(self.train.tokens.shape[1])

    @property
    def is_tagging(self) -> bool:
        return self.kind == TaskKind.TAGGING


def pair_sentence_length(grammar: GrammarParams) -> int:
    """Words per sentence of a pair, CLS s1 SEP s2 spans as many positions as CLS s"""
    return (grammar.sentence_length - 1) // 2


def single_label(latents: SentenceLatents) -> int:
    return latents.topic_a ^ latents.topic_b


def pair_label(first: SentenceLatents, second: SentenceLatents) -> int:
    return int(first.topic_a == second.topic_a)


def tag_sequence(latents: SentenceLatents, length: int) -> List[int]:
    """Tags of CLS s: index 0 is the CLS position"""
    tags = [IGNORE_INDEX]
    for pos in range(length):
        slot = slot_of(pos)
        if slot in (Slot.NOUN, Slot.VERB):
            tags.append(latents.noun_numbers[pos // len(Slot)])
        else:
            tags.append(IGNORE_INDEX)
    return tags


def recompute_labels(kind: TaskKind, split: Split, grammar: GrammarParams) -> np.ndarray:
    """Labels of `split` derived again from its latents by the generating rule"""
    if split.latents is None:
        raise TaskGenerationError("split carries no latents")
    kind = TaskKind(kind)
    if kind == TaskKind.SINGLE:
        return np.array([single_label(lat[0]) for lat in split.latents], dtype=np.int64)
    if kind == TaskKind.PAIR:
        return np.array([pair_label(lat[0], lat[1]) for lat in split.latents], dtype=np.int64)
    return np.array([tag_sequence(lat[0], grammar.sentence_length) for lat in split.latents], dtype=np.int64)


class _ExampleSampler:
    def __init__(self, kind: TaskKind, grammar: GrammarParams, vocab: Vocabulary, rng: RngStream):
        self.kind = kind
        self.grammar = grammar
        self.vocab = vocab
        self.rng = rng

    def _sentence(self, topic_a: int, topic_b: int, length: int) -> Tuple[List[int], SentenceLatents]:
        return sample_sentence(self.vocab, self.grammar, self.rng, topic_a, topic_b, length)

    def sample(self, label: int) -> Tuple[List[int], List[int], Union[int, List[int]], Tuple[SentenceLatents, ...]]:
        """One example as (tokens, segments, label, latents), `label` is ignored for tagging"""
        bits = self.rng.integers(0, 2, (3,))
        if self.kind == TaskKind.SINGLE:
            a = int(bits[0])
            words, lat = self._sentence(a, a ^ label, self.grammar.sentence_length)
            tokens = [CLS_ID] + words
            return tokens, [0] * len(tokens), label, (lat,)

        if self.kind == TaskKind.PAIR:
            length = pair_sentence_length(self.grammar)
            a1 = int(bits[0])
            a2 = a1 if label == 1 else 1 - a1
            first, lat1 = self._sentence(a1, int(bits[1]), length)
            second, lat2 = self._sentence(a2, int(bits[2]), length)
            tokens = [CLS_ID] + first + [SEP_ID] + second
            segments = [0] * (length + 2) + [1] * length
            return tokens, segments, label, (lat1, lat2)

        words, lat = self._sentence(int(bits[0]), int(bits[1]), self.grammar.sentence_length)
        tokens = [CLS_ID] + words
        return tokens, [0] * len(tokens), tag_sequence(lat, len(words)), (lat,)


def _balanced_labels(rng: RngStream, count: int) -> np.ndarray:
    labels = np.arange(count) % 2
    return labels[rng.permutation(count)]


def _generate_split(
    sampler: _ExampleSampler, count: int, labels: np.ndarray, exclude: Optional[Set[Tuple[int, ...]]] = None
) -> Split:
    rows, segments, targets, latents = [], [], [], []
    for label in labels:
        for _ in range(MAX_DEDUP_ATTEMPTS):
            tokens, segs, target, lat = sampler.sample(int(label))
            if exclude is None or tuple(tokens) not in exclude:
                break
        else:
            raise TaskGenerationError(
                f"could not draw a dev example distinct from the train split in {MAX_DEDUP_ATTEMPTS} attempts"
            )
        rows.append(tokens)
        segments.append(segs)
        targets.append(target)
        latents.append(lat)
    return Split(
        tokens=np.asarray(rows, dtype=np.int64).reshape(count, -1),
        segments=np.asarray(segments, dtype=np.int64).reshape(count, -1),
        labels=np.asarray(targets, dtype=np.int64),
        latents=latents,
    )


def gen_task(grammar: GrammarParams, kind: TaskKind, n_train: int, n_dev: int, seed: int) -> TaskDataset:
    """Labelled train and dev splits, a pure function of (grammar, kind, sizes, seed)

    :raises: TaskGenerationError for empty splits, or when the dev split cannot avoid the train inputs
    """
    kind = TaskKind(kind)
    if n_train < 1:
        raise TaskGenerationError(f"n_train must be at least 1, got {n_train}")
    if n_dev < 1:
        raise TaskGenerationError(f"n_dev must be at least 1, got {n_dev}")

    rng = RngStream(seed, f"task/{kind.value}")
    sampler = _ExampleSampler(kind, grammar, Vocabulary.build(grammar), rng)
    train = _generate_split(sampler, n_train, _balanced_labels(rng, n_train))
    seen = {tuple(row) for row in train.tokens.tolist()}
    dev = _generate_split(sampler, n_dev, _balanced_labels(rng, n_dev), exclude=seen)
    logger.debug("generated %s task: %d train, %d dev examples", kind.value, n_train, n_dev)
    return TaskDataset(kind=kind, train=train, dev=dev, seed=seed, grammar=grammar)


def subset_indices(n_train: int, size: int, seed: int) -> np.ndarray:
    """Sorted positions of a subset; for one seed, smaller subsets are prefixes of one permutation and so nest"""
    if not 1 <= size <= n_train:
        raise SubsetSizeError(f"subset size must lie in [1, {n_train}], got {size}")
    return np.sort(RngStream(seed, "subset").permutation(n_train)[:size])


def subset(dataset: TaskDataset, size: int, seed: int) -> TaskDataset:
    """The dataset with its train split reduced to `size` examples, in their original order"""
    indices = subset_indices(len(dataset.train), size, seed)
    return replace(dataset, train=dataset.train.take(indices))
