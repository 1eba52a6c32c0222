# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
from typing import Sequence

from bitfit_lab.exceptions import BitFitLabError


class AutodiffError(BitFitLabError):
    pass


class ShapeMismatchError(AutodiffError, ValueError):
    """Operands of an op have incompatible shapes"""

    def __init__(self, op: str, left: Sequence[int], right: Sequence[int], detail: str = ""):
        self.op = op
        self.left = tuple(left)
        self.right = tuple(right)
        message = f"{op}: incompatible shapes {self.left} and {self.right}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class DoubleBackwardError(AutodiffError, RuntimeError):
    """Gradients would be accumulated twice into the same tensors"""


class NonDeterministicFunctionError(AutodiffError, RuntimeError):
    """Repeated evaluation of a function under check returned different values"""


class DegenerateNormalizationError(AutodiffError, ValueError):
    """Layer normalization over a single feature"""


class InvalidProbabilityError(AutodiffError, ValueError):
    pass


class LabelIndexError(AutodiffError, IndexError):
    """Class label outside of [0, K)"""
