# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
from .datasets import (
    IGNORE_INDEX,
    Split,
    TaskDataset,
    TaskKind,
    gen_task,
    pair_label,
    recompute_labels,
    single_label,
    subset,
    subset_indices,
    tag_sequence,
)
from .grammar import GrammarParams, SentenceLatents, SyntheticCorpus, Vocabulary, gen_corpus
from .serialization import dump_split, load_dataset, load_split, save_dataset

__all__ = [
    "GrammarParams",
    "IGNORE_INDEX",
    "SentenceLatents",
    "Split",
    "SyntheticCorpus",
    "TaskDataset",
    "TaskKind",
    "Vocabulary",
    "dump_split",
    "gen_corpus",
    "gen_task",
    "load_dataset",
    "load_split",
    "pair_label",
    "recompute_labels",
    "save_dataset",
    "single_label",
    "subset",
    "subset_indices",
    "tag_sequence",
]
