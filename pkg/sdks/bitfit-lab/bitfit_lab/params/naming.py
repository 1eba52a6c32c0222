# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""Parameter naming, following the HuggingFace BertLayer names

Each encoder layer holds, per the symbols of the layer equations:

    W_q / b_q       attention.self.query.{weight,bias}
    W_k / b_k       attention.self.key.{weight,bias}
    W_v / b_v       attention.self.value.{weight,bias}
    W_m1 / b_m1     attention.output.dense.{weight,bias}
    g_LN1 / b_LN1   attention.output.LayerNorm.{weight,bias}
    W_m2 / b_m2     intermediate.dense.{weight,bias}
    W_m3 / b_m3     output.dense.{weight,bias}
    g_LN2 / b_LN2   output.LayerNorm.{weight,bias}
"""
import re
from enum import Enum
from typing import Dict, Optional, Tuple

LAYER_PREFIX = "encoder.layer"

WORD_EMBEDDINGS = "embeddings.word_embeddings.weight"
POSITION_EMBEDDINGS = "embeddings.position_embeddings.weight"
TOKEN_TYPE_EMBEDDINGS = "embeddings.token_type_embeddings.weight"
EMBEDDING_LN_WEIGHT = "embeddings.LayerNorm.weight"
EMBEDDING_LN_BIAS = "embeddings.LayerNorm.bias"

CLASSIFIER_WEIGHT = "classifier.weight"
CLASSIFIER_BIAS = "classifier.bias"
TAGGER_WEIGHT = "tagger.weight"
TAGGER_BIAS = "tagger.bias"
MLM_BIAS = "cls.predictions.bias"

# Task heads stay trainable under every selector unless told otherwise
HEAD_PATTERNS = ("classifier.*", "tagger.*")
# Entries only used by pretraining, never carried into a fine-tuning store
PRETRAINING_ONLY_PREFIX = "cls.predictions."

_LAYER_NAME_RE = re.compile(r"^encoder\.layer\.(\d+)\.(.+)$")


class BiasType(str, Enum):
    """The eight bias vectors of an encoder layer, valued by their symbol"""

    QUERY = "b_q"
    KEY = "b_k"
    VALUE = "b_v"
    ATTENTION_OUT = "b_m1"
    LN1 = "b_LN1"
    INTERMEDIATE = "b_m2"
    OUTPUT = "b_m3"
    LN2 = "b_LN2"

    @property
    def suffix(self) -> str:
        return SYMBOL_SUFFIXES[self.value]


SYMBOL_SUFFIXES: Dict[str, str] = {
    "W_q": "attention.self.query.weight",
    "b_q": "attention.self.query.bias",
    "W_k": "attention.self.key.weight",
    "b_k": "attention.self.key.bias",
    "W_v": "attention.self.value.weight",
    "b_v": "attention.self.value.bias",
    "W_m1": "attention.output.dense.weight",
    "b_m1": "attention.output.dense.bias",
    "g_LN1": "attention.output.LayerNorm.weight",
    "b_LN1": "attention.output.LayerNorm.bias",
    "W_m2": "intermediate.dense.weight",
    "b_m2": "intermediate.dense.bias",
    "W_m3": "output.dense.weight",
    "b_m3": "output.dense.bias",
    "g_LN2": "output.LayerNorm.weight",
    "b_LN2": "output.LayerNorm.bias",
}


def layer_param(layer: int, symbol: str) -> str:
    """Full entry name of a layer symbol, e.g. layer_param(0, "b_q") -> "encoder.layer.0.attention.self.query.bias" """
    return f"{LAYER_PREFIX}.{layer}.{SYMBOL_SUFFIXES[symbol]}"


def parse_layer_param(name: str) -> Optional[Tuple[int, str]]:
    """Split a layer entry name into (layer index, suffix), None for non-layer entries"""
    match = _LAYER_NAME_RE.match(name)
    if not match:
        return None
    return int(match.group(1)), match.group(2)


def is_bias(name: str) -> bool:
    return name.endswith(".bias")
