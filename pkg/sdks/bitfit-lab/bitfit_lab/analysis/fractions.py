# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""Share of trainable parameters per (model shape, selector), counted on layouts without allocating weights"""
import csv
from dataclasses import dataclass
from os import PathLike
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from bitfit_lab.encoder.config import ModelConfig, bert_base_config, bert_large_config
from bitfit_lab.encoder.model import HeadKind, build_layout
from bitfit_lab.params.counting import ParamCount, count_params
from bitfit_lab.params.selectors import Selector

FRACTION_CSV_SCHEMA = "param_fraction/v1"
FRACTION_SELECTORS = ["full", "bitfit", "bq_bm2", "bm2", "bq", "frozen"]


def reference_configs() -> Dict[str, ModelConfig]:
    return {"bert_base": bert_base_config(), "bert_large": bert_large_config()}


@dataclass(frozen=True)
class FractionRow:
    config: str
    selector: str
    count: ParamCount

    @property
    def percent(self) -> str:
        return self.count.format_percent(2)


def param_fraction_report(
    configs: Dict[str, ModelConfig],
    selectors: Sequence[Union[str, Selector]] = FRACTION_SELECTORS,
    head: Optional[HeadKind] = None,
) -> List[FractionRow]:
    """One row per (config, selector), configs outer

    :param head: task head included in every layout, None counts the bare pretrained encoder
    """
    parsed = [s if isinstance(s, Selector) else Selector.parse(s) for s in selectors]
    rows = []
    for name, cfg in configs.items():
        layout = build_layout(cfg, head=head)
        for selector in parsed:
            rows.append(FractionRow(name, selector.display_name, count_params(layout, selector)))
    return rows


def write_fraction_csv(rows: Sequence[FractionRow], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fp:
        fp.write(f"# schema={FRACTION_CSV_SCHEMA}\n")
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["config", "selector", "trainable", "total", "percent"])
        for row in rows:
            writer.writerow([row.config, row.selector, row.count.trainable, row.count.total, row.percent])
    return path
