# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""Parameter counting

Convention: `total` counts every entry of the layout being counted, embeddings and task heads included,
and `fraction = trainable / total` with no adjustment. Pretrained-encoder layouts carry no task head and
no pooler, the fine-tuning layouts carry exactly one head.
"""
from dataclasses import dataclass
from typing import Union

from .selectors import Resolution, Selector, resolve
from .store import ParameterStore, ParamLayout


@dataclass(frozen=True)
class ParamCount:
    trainable: int
    total: int

    @property
    def fraction(self) -> float:
        return self.trainable / self.total if self.total else 0.0

    @property
    def percent(self) -> float:
        return 100.0 * self.fraction

    def format_percent(self, decimals: int = 2) -> str:
        return f"{self.percent:.{decimals}f}%"


def count_resolution(resolution: Resolution) -> ParamCount:
    return ParamCount(trainable=resolution.trainable_count, total=resolution.layout.total)


def count_params(store: Union[ParameterStore, ParamLayout], selector: Selector) -> ParamCount:
    """Exact trainable and total coordinate counts of `store` under `selector`, no weights needed"""
    return count_resolution(resolve(selector, store))
