# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""Selectors decide which entries, or which coordinates inside entries, receive optimizer updates

A selector is written in configs and on the command line as a short text:

    full                      every parameter
    bitfit                    every entry named "*.bias"
    bq_bm2 / bm2 / bq         query and intermediate biases, intermediate biases only, query biases only
    frozen (alias none)       nothing besides the task head
    rand_uniform[:fraction]   uniformly sampled coordinates, the BitFit budget when no fraction is given
    rand_rowcol[:fraction]    whole rows/columns of weight matrices, same budget rule
    pattern:<glob|glob>       entries matching any of the globs, "*" being the only wildcard
"""
import fnmatch
import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Mapping, Optional, Tuple, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from .exceptions import SelectorParseError
from .naming import HEAD_PATTERNS, is_bias
from .sampling import CoordinateMask, sample_rand_rowcol, sample_rand_uniform
from .store import ParameterStore, ParamLayout

logger = logging.getLogger(__name__)

_GLOB_RE = re.compile(r"^[A-Za-z0-9_.*]+$")


class SelectorKind(str, Enum):
    FULL = "full"
    BITFIT = "bitfit"
    PATTERN = "pattern"
    RAND_UNIFORM = "rand_uniform"
    RAND_ROWCOL = "rand_rowcol"
    NONE = "none"


# text name -> (pattern list, display name)
PATTERN_PRESETS: Dict[str, Tuple[List[str], str]] = {
    "bq_bm2": (["*.attention.self.query.bias", "*.intermediate.dense.bias"], "b_q+b_m2"),
    "bm2": (["*.intermediate.dense.bias"], "b_m2"),
    "bq": (["*.attention.self.query.bias"], "b_q"),
}

DISPLAY_NAMES = {
    SelectorKind.FULL: "Full-FT",
    SelectorKind.BITFIT: "BitFit",
    SelectorKind.NONE: "Frozen",
    SelectorKind.RAND_UNIFORM: "rand uniform",
    SelectorKind.RAND_ROWCOL: "rand row/col",
}

# Full-FT reference first, then the bias subsets, the frozen encoder and the random baselines
DEFAULT_REGIMES = ["full", "bitfit", "bq_bm2", "bm2", "bq", "frozen", "rand_uniform", "rand_rowcol"]


def parse_globs(text: str) -> List[str]:
    """Split a "glob|glob" expression and validate every alternative

    :raises: SelectorParseError for empty alternatives or characters other than letters, digits, "_", "." and "*"
    """
    globs = text.split("|")
    for glob in globs:
        if not _GLOB_RE.match(glob):
            raise SelectorParseError(f"invalid glob {glob!r} in {text!r}, only [A-Za-z0-9_.*] are allowed")
    return globs


def match_any(name: str, globs: List[str]) -> bool:
    return any(fnmatch.fnmatchcase(name, glob) for glob in globs)


class Selector(BaseModel):
    """Declarative trainability rule

    :param kind: selection strategy
    :param patterns: globs of the pattern kind
    :param fraction: target share of non-head coordinates for the random kinds, None means the BitFit budget
    :param seed: seed of the random kinds
    :param always_trainable: globs of entries trainable under every kind, the task heads by default
    :param name: display name used in reports
    """

    kind: SelectorKind
    patterns: List[str] = Field(default_factory=list)
    fraction: Optional[float] = None
    seed: int = 0
    always_trainable: List[str] = Field(default_factory=lambda: list(HEAD_PATTERNS))
    name: Optional[str] = None

    @field_validator("patterns", "always_trainable")
    @classmethod
    def _validate_globs(cls, value: List[str]) -> List[str]:
        for glob in value:
            parse_globs(glob)
        return value

    @model_validator(mode="after")
    def _validate_kind_fields(self) -> "Selector":
        if self.kind == SelectorKind.PATTERN and not self.patterns:
            raise ValueError("pattern selector needs at least one pattern")
        if self.kind != SelectorKind.PATTERN and self.patterns:
            raise ValueError(f"patterns are only allowed for the pattern kind, got kind {self.kind.value}")
        if self.fraction is not None:
            if self.kind not in (SelectorKind.RAND_UNIFORM, SelectorKind.RAND_ROWCOL):
                raise ValueError("fraction is only allowed for the random kinds")
            if not 0.0 < self.fraction < 1.0:
                raise ValueError(f"fraction must lie in (0, 1), got {self.fraction}")
        return self

    @property
    def is_random(self) -> bool:
        return self.kind in (SelectorKind.RAND_UNIFORM, SelectorKind.RAND_ROWCOL)

    @property
    def display_name(self) -> str:
        if self.name:
            return self.name
        if self.kind == SelectorKind.PATTERN:
            return "+".join(self.patterns)
        return DISPLAY_NAMES[self.kind]

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "Selector":
        """Build a selector from its text form

        :raises: SelectorParseError
        """
        text = text.strip()
        head, _, arg = text.partition(":")
        if head in ("full", "bitfit"):
            kind = SelectorKind(head)
        elif head in ("frozen", "none"):
            kind = SelectorKind.NONE
        elif head in PATTERN_PRESETS:
            patterns, name = PATTERN_PRESETS[head]
            return cls(kind=SelectorKind.PATTERN, patterns=list(patterns), name=name)
        elif head == "pattern":
            if not arg:
                raise SelectorParseError("pattern selector needs globs, e.g. pattern:*.key.bias")
            return cls(kind=SelectorKind.PATTERN, patterns=parse_globs(arg))
        elif head in ("rand_uniform", "rand_rowcol"):
            fraction = None
            if arg:
                try:
                    fraction = float(arg)
                except ValueError:
                    raise SelectorParseError(f"invalid fraction {arg!r} in selector {text!r}")
                if not 0.0 < fraction < 1.0:
                    raise SelectorParseError(f"fraction must lie in (0, 1), got {arg}")
            return cls(kind=SelectorKind(head), fraction=fraction, seed=seed)
        else:
            raise SelectorParseError(f"unknown selector {text!r}")

        if arg:
            raise SelectorParseError(f"selector {head!r} takes no argument, got {text!r}")
        return cls(kind=kind)

    def to_text(self) -> str:
        """Inverse of `parse`, preset names are preferred for pattern selectors"""
        if self.kind == SelectorKind.PATTERN:
            for preset, (patterns, _) in PATTERN_PRESETS.items():
                if patterns == self.patterns:
                    return preset
            return "pattern:" + "|".join(self.patterns)
        if self.kind == SelectorKind.NONE:
            return "frozen"
        if self.is_random and self.fraction is not None:
            return f"{self.kind.value}:{self.fraction!r}"
        return self.kind.value


def parse_selectors(texts: Union[str, List[str]], seed: int = 0) -> List[Selector]:
    """Parse a comma separated list, such as the value of `--regimes`"""
    if isinstance(texts, str):
        texts = [t for t in texts.split(",") if t.strip()]
    return [Selector.parse(t, seed=seed) for t in texts]


@dataclass(frozen=True)
class Resolution:
    """Outcome of resolving a selector against a store layout

    :param trainable: names of the entries receiving any update
    :param masks: coordinate masks of partially trainable entries, absent entries train every coordinate
    :param diagnostics: warnings collected while resolving, such as patterns matching nothing
    """

    selector: Selector
    layout: ParamLayout
    trainable: FrozenSet[str]
    masks: Mapping[str, CoordinateMask] = field(default_factory=dict)
    diagnostics: Tuple[str, ...] = ()

    def is_trainable(self, name: str) -> bool:
        return name in self.trainable

    def coordinate_count(self, name: str) -> int:
        if name not in self.trainable:
            return 0
        if name in self.masks:
            return self.masks[name].count
        return math.prod(self.layout.shape_of(name))

    @property
    def trainable_count(self) -> int:
        return sum(self.coordinate_count(spec.name) for spec in self.layout)

    def trainable_names(self) -> List[str]:
        """Trainable entries in layout order"""
        return [name for name in self.layout.names() if name in self.trainable]


def bitfit_budget(layout: ParamLayout, always_trainable: List[str]) -> int:
    """Number of bias coordinates outside the always-trainable entries"""
    return sum(spec.size for spec in layout if is_bias(spec.name) and not match_any(spec.name, always_trainable))


def resolve(selector: Selector, store: Union[ParameterStore, ParamLayout]) -> Resolution:
    """Resolve `selector` into the set of trainable entries, deterministically for a given layout and selector"""
    layout = store.layout if isinstance(store, ParameterStore) else store
    names = layout.names()
    heads = {n for n in names if match_any(n, selector.always_trainable)}
    diagnostics: List[str] = []
    masks: Dict[str, CoordinateMask] = {}

    if selector.kind == SelectorKind.FULL:
        selected = set(names)
    elif selector.kind == SelectorKind.BITFIT:
        selected = {n for n in names if is_bias(n)}
    elif selector.kind == SelectorKind.NONE:
        selected = set()
    elif selector.kind == SelectorKind.PATTERN:
        selected = set()
        for glob in selector.patterns:
            matched = {n for n in names if fnmatch.fnmatchcase(n, glob)}
            if not matched:
                diagnostics.append(f"pattern {glob!r} matches no parameter")
            selected |= matched
    else:
        body = ParamLayout(tuple(spec for spec in layout if spec.name not in heads))
        if selector.fraction is not None:
            budget = math.ceil(selector.fraction * body.total)
        else:
            budget = bitfit_budget(layout, selector.always_trainable)
        if selector.kind == SelectorKind.RAND_UNIFORM:
            masks = sample_rand_uniform(body, seed=selector.seed, count=budget)
        else:
            masks = sample_rand_rowcol(body, budget, seed=selector.seed)
        selected = set(masks)

    for message in diagnostics:
        logger.warning("selector %s: %s", selector.display_name, message)
    # Heads always train every coordinate
    masks = {n: m for n, m in masks.items() if n not in heads}
    return Resolution(
        selector=selector,
        layout=layout,
        trainable=frozenset(selected | heads),
        masks=masks,
        diagnostics=tuple(diagnostics),
    )
