# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
from .functional import cross_entropy, dropout, embedding, gelu, layer_norm, layer_norm_stats, matmul_bias, softmax
from .gradcheck import GradCheckReport, grad_check
from .rng import RngStream
from .tensor import Tensor, backward, concat, is_grad_enabled, matmul, no_grad

__all__ = [
    "Tensor",
    "RngStream",
    "GradCheckReport",
    "backward",
    "concat",
    "cross_entropy",
    "dropout",
    "embedding",
    "gelu",
    "grad_check",
    "is_grad_enabled",
    "layer_norm",
    "layer_norm_stats",
    "matmul",
    "matmul_bias",
    "no_grad",
    "softmax",
]
