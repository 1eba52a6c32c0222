# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""CSV and SVG renderings of bias-change reports

CSV layout, one row per bias type and one column per layer:

    # schema=bias_change/v1 base=<digest> final=<digest>
    bias,layer_1,layer_2
    b_q,0.0123,0.0087
    ...

Values are written with 17 significant digits so they read back bit-exact.
"""
import csv
import logging
from os import PathLike
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from bitfit_lab.params.naming import BiasType  # noqa: E402

from .bias_change import BIAS_TYPES, BiasChangeReport  # noqa: E402
from .exceptions import ReportMismatchError  # noqa: E402

logger = logging.getLogger(__name__)

CSV_SCHEMA = "bias_change/v1"
FLOAT_FORMAT = "%.17g"
# Fixed salt and no date keep rendered SVGs byte-identical across runs
SVG_HASH_SALT = "bitfit-lab"


def format_float(value: float) -> str:
    return FLOAT_FORMAT % value


def write_bias_change_csv(report: BiasChangeReport, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fp:
        fp.write(f"# schema={CSV_SCHEMA} base={report.base_id or '-'} final={report.final_id or '-'}\n")
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["bias"] + [f"layer_{i + 1}" for i in range(report.num_layers)])
        for label, row in zip(report.labels, report.matrix):
            writer.writerow([label] + [format_float(v) for v in row])
    return path


def _parse_schema_line(line: str) -> dict:
    if not line.startswith("#"):
        return {}
    fields = dict(token.split("=", 1) for token in line[1:].split() if "=" in token)
    return {k: ("" if v == "-" else v) for k, v in fields.items()}


def read_bias_change_csv(path: PathLike) -> BiasChangeReport:
    """Parse a CSV written by `write_bias_change_csv`

    :raises: ReportMismatchError for another schema or malformed rows
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fp:
        meta = _parse_schema_line(fp.readline())
        if meta.get("schema") != CSV_SCHEMA:
            raise ReportMismatchError(f"{path}: expected schema {CSV_SCHEMA}, got {meta.get('schema')!r}")
        rows = list(csv.reader(fp))

    header, body = rows[0], rows[1:]
    labels = [row[0] for row in body]
    if labels != [b.value for b in BIAS_TYPES]:
        raise ReportMismatchError(f"{path}: unexpected bias rows {labels}")
    try:
        matrix = np.array([[float(v) for v in row[1:]] for row in body], dtype=np.float64)
    except ValueError as e:
        raise ReportMismatchError(f"{path}: malformed value, detail: {e}")
    if matrix.shape[1] != len(header) - 1:
        raise ReportMismatchError(f"{path}: {len(header) - 1} layer columns declared, {matrix.shape[1]} found")
    return BiasChangeReport(matrix, base_id=meta.get("base", ""), final_id=meta.get("final", ""))


def render_bias_change_svg(report: BiasChangeReport, path: PathLike, title: Optional[str] = None) -> Path:
    """Heatmap of the report, colors scaled linearly from 0 to the largest change"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    vmax = float(report.matrix.max()) if report.matrix.size else 0.0
    if vmax <= 0.0:
        vmax = 1.0

    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(1.2 + 0.6 * report.num_layers, 4.0))
        mesh = ax.pcolormesh(report.matrix, cmap="Blues", vmin=0.0, vmax=vmax, edgecolors="white", linewidth=0.5)
        ax.set_xticks(np.arange(report.num_layers) + 0.5)
        ax.set_xticklabels([str(i + 1) for i in range(report.num_layers)])
        ax.set_yticks(np.arange(len(BIAS_TYPES)) + 0.5)
        ax.set_yticklabels(report.labels)
        ax.invert_yaxis()
        ax.set_xlabel("layer")
        if title:
            ax.set_title(title)
        fig.colorbar(mesh, ax=ax)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path


def heatmap_export(report: BiasChangeReport, csv_path: PathLike, svg_path: PathLike, title: Optional[str] = None):
    """Write both renderings of a report and return their paths"""
    written = write_bias_change_csv(report, csv_path), render_bias_change_svg(report, svg_path, title=title)
    zero_key = not report.row(BiasType.KEY).any()
    logger.info("bias-change heatmap written to %s (key-bias row all zero: %s)", written[1], zero_key)
    return written
