# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
from .config import (
    CLS_ID,
    MASK_ID,
    NUM_RESERVED_TOKENS,
    PAD_ID,
    SEP_ID,
    ModelConfig,
    bert_base_config,
    bert_large_config,
)
from .model import (
    ActivationTrace,
    HeadKind,
    LayerTrace,
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

__all__ = [
    "ActivationTrace",
    "CLS_ID",
    "HeadKind",
    "LayerTrace",
    "MASK_ID",
    "ModelConfig",
    "NUM_RESERVED_TOKENS",
    "PAD_ID",
    "SEP_ID",
    "attach_head",
    "bert_base_config",
    "bert_large_config",
    "build_layout",
    "classifier_logits",
    "classify_cls",
    "encode",
    "init_parameters",
    "mlm_logits",
    "mlm_loss",
    "tag_tokens",
    "tagger_logits",
]
