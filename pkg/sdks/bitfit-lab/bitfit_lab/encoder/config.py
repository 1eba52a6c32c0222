# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
from pydantic import BaseModel, PositiveInt, field_validator, model_validator

# Reserved token ids, shared by every vocabulary the lab builds
PAD_ID = 0
CLS_ID = 1
SEP_ID = 2
MASK_ID = 3
NUM_RESERVED_TOKENS = 4


class ModelConfig(BaseModel):
    """Architecture of a BERT-style encoder

    :param num_layers: L
    :param num_heads: M, must divide `hidden`
    :param hidden: H
    :param mlp_width: inner width of the feed-forward block
    :param type_vocab_size: number of segment ids, 2 covers sentence pairs
    :param dropout_p: dropout applied to the attention output projection and the feed-forward output
    :param num_classes: classes of the sentence-level head
    :param num_tags: tags of the token-level head
    """

    num_layers: PositiveInt = 2
    num_heads: PositiveInt = 2
    hidden: PositiveInt = 32
    mlp_width: PositiveInt = 64
    vocab_size: PositiveInt = 64
    max_seq_len: PositiveInt = 16
    type_vocab_size: PositiveInt = 2
    dropout_p: float = 0.1
    num_classes: PositiveInt = 2
    num_tags: PositiveInt = 2
    init_std: float = 0.02
    layer_norm_eps: float = 1e-12

    @field_validator("dropout_p")
    @classmethod
    def _check_dropout(cls, value: float) -> float:
        if not 0.0 <= value < 1.0:
            raise ValueError(f"dropout_p must lie in [0, 1), got {value}")
        return value

    @model_validator(mode="after")
    def _check_heads(self) -> "ModelConfig":
        if self.hidden % self.num_heads:
            raise ValueError(f"hidden ({self.hidden}) must be divisible by num_heads ({self.num_heads})")
        return self

    @property
    def head_dim(self) -> int:
        return self.hidden // self.num_heads


def bert_base_config() -> ModelConfig:
    """Shape of BERT-base, only ever used for counting"""
    return ModelConfig(
        num_layers=12, num_heads=12, hidden=768, mlp_width=3072, vocab_size=30522, max_seq_len=512, dropout_p=0.1
    )


def bert_large_config() -> ModelConfig:
    """Shape of BERT-large, only ever used for counting"""
    return ModelConfig(
        num_layers=24, num_heads=16, hidden=1024, mlp_width=4096, vocab_size=30522, max_seq_len=512, dropout_p=0.1
    )
