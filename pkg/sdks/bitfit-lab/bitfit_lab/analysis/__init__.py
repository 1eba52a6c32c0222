# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
from .bias_change import BIAS_TYPES, BiasChangeReport, bias_change, mean_abs_change, mean_bias_change
from .exceptions import AnalysisError, MissingMetricError, ReportMismatchError
from .fractions import FractionRow, param_fraction_report, reference_configs, write_fraction_csv
from .generalization import GeneralizationGap, generalization_gap
from .heatmap import heatmap_export, read_bias_change_csv, render_bias_change_svg, write_bias_change_csv
from .sweep import SweepPoint, SweepResult, render_sweep_svg, size_sweep, write_sweep_csv

__all__ = [
    "AnalysisError",
    "BIAS_TYPES",
    "BiasChangeReport",
    "FractionRow",
    "GeneralizationGap",
    "MissingMetricError",
    "ReportMismatchError",
    "SweepPoint",
    "SweepResult",
    "bias_change",
    "generalization_gap",
    "heatmap_export",
    "mean_abs_change",
    "mean_bias_change",
    "param_fraction_report",
    "read_bias_change_csv",
    "reference_configs",
    "render_bias_change_svg",
    "render_sweep_svg",
    "size_sweep",
    "write_bias_change_csv",
    "write_fraction_csv",
    "write_sweep_csv",
]
