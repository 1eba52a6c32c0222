# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
from .checkpoint import (
    TaskDelta,
    apply_task_delta,
    export_task_delta,
    load_checkpoint,
    load_task_delta,
    save_checkpoint,
    save_task_delta,
)
from .counting import ParamCount, count_params, count_resolution
from .naming import BiasType, layer_param
from .sampling import CoordinateMask, sample_rand_rowcol, sample_rand_uniform
from .selectors import DEFAULT_REGIMES, Resolution, Selector, SelectorKind, parse_selectors, resolve
from .store import ParameterStore, ParamLayout, ParamSnapshot, ParamSpec, restore, snapshot

__all__ = [
    "BiasType",
    "CoordinateMask",
    "DEFAULT_REGIMES",
    "ParamCount",
    "ParamLayout",
    "ParamSnapshot",
    "ParamSpec",
    "ParameterStore",
    "Resolution",
    "Selector",
    "SelectorKind",
    "TaskDelta",
    "apply_task_delta",
    "count_params",
    "count_resolution",
    "export_task_delta",
    "layer_param",
    "load_checkpoint",
    "load_task_delta",
    "parse_selectors",
    "resolve",
    "restore",
    "sample_rand_rowcol",
    "sample_rand_uniform",
    "save_checkpoint",
    "save_task_delta",
    "snapshot",
]
