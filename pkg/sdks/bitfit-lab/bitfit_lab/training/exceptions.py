# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
from typing import Optional

from bitfit_lab.exceptions import BitFitLabError


class TrainingError(BitFitLabError):
    pass


class NonFiniteGradientError(TrainingError, FloatingPointError):
    """A gradient holds NaN or infinity"""

    def __init__(self, param_name: str, step: Optional[int] = None):
        self.param_name = param_name
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"non-finite gradient for parameter {param_name}{where}")


class DivergenceError(TrainingError, RuntimeError):
    """Loss became NaN or infinite"""

    def __init__(self, lr: float, step: int, detail: str = ""):
        self.lr = lr
        self.step = step
        message = f"training diverged at step {step} with learning rate {lr:g}"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class EmptyDatasetError(TrainingError, ValueError):
    pass


class NonFiniteMetricError(TrainingError, ValueError):
    """Evaluation produced a NaN metric"""
