# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
from typing import Sequence

from bitfit_lab.exceptions import BitFitLabError


class ParamRegistryError(BitFitLabError):
    pass


class DuplicateParameterError(ParamRegistryError, ValueError):
    """A parameter with this name already exists"""


class CheckpointMismatchError(ParamRegistryError, ValueError):
    """Names or shapes of a snapshot and its target store differ"""

    def __init__(self, message: str, missing: Sequence[str] = (), unexpected: Sequence[str] = ()):
        super().__init__(message)
        self.missing = list(missing)
        self.unexpected = list(unexpected)


class SelectorParseError(ParamRegistryError, ValueError):
    """Selector text or glob pattern is malformed"""


class SamplingError(ParamRegistryError, ValueError):
    """Random trainable-subset sampling was asked for an impossible budget"""


class CorruptCheckpointError(ParamRegistryError, ValueError):
    """Checkpoint manifest or blob cannot be decoded"""
