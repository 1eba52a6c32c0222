# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""Evaluation metrics over predicted and gold labels

Tagging predictions are flattened and positions labelled `ignore_index` are dropped before scoring.
"""
from enum import Enum
from typing import Optional

import numpy as np


class Metric(str, Enum):
    ACCURACY = "accuracy"
    F1 = "f1"
    MCC = "mcc"


def _flatten(preds, labels, ignore_index: Optional[int]):
    preds = np.asarray(preds).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if preds.shape != labels.shape:
        raise ValueError(f"predictions {preds.shape} and labels {labels.shape} differ in size")
    if ignore_index is not None:
        keep = labels != ignore_index
        preds, labels = preds[keep], labels[keep]
    if labels.size == 0:
        raise ValueError("no labelled position to score")
    return preds, labels


def accuracy(preds, labels, ignore_index: Optional[int] = None) -> float:
    preds, labels = _flatten(preds, labels, ignore_index)
    return float(np.mean(preds == labels))


def _confusion(preds: np.ndarray, labels: np.ndarray):
    tp = int(np.sum((preds == 1) & (labels == 1)))
    tn = int(np.sum((preds != 1) & (labels != 1)))
    fp = int(np.sum((preds == 1) & (labels != 1)))
    fn = int(np.sum((preds != 1) & (labels == 1)))
    return tp, tn, fp, fn


def binary_f1(preds, labels, ignore_index: Optional[int] = None) -> float:
    """F1 of the positive class 1, 0 when it is never predicted nor present"""
    tp, _, fp, fn = _confusion(*_flatten(preds, labels, ignore_index))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def matthews_corrcoef(preds, labels, ignore_index: Optional[int] = None) -> float:
    """Matthews correlation of the binary decision "label == 1", 0 when any marginal is empty"""
    tp, tn, fp, fn = _confusion(*_flatten(preds, labels, ignore_index))
    denom = np.sqrt(float(tp + fp) * float(tp + fn) * float(tn + fp) * float(tn + fn))
    return float((tp * tn - fp * fn) / denom) if denom else 0.0


_METRICS = {Metric.ACCURACY: accuracy, Metric.F1: binary_f1, Metric.MCC: matthews_corrcoef}


def compute_metric(metric: Metric, preds, labels, ignore_index: Optional[int] = None) -> float:
    return _METRICS[Metric(metric)](preds, labels, ignore_index)
