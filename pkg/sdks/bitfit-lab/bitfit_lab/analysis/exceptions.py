# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
from bitfit_lab.exceptions import BitFitLabError


class AnalysisError(BitFitLabError):
    pass


class MissingMetricError(AnalysisError, KeyError):
    """A run record lacks a metric the analysis needs"""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class ReportMismatchError(AnalysisError, ValueError):
    """Snapshots or reports being compared do not share names and shapes"""
