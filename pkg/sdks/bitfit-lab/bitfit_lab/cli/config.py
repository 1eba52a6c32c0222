# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
"""Experiment configuration, one TOML file per experiment"""
import logging
import sys
from os import PathLike
from pathlib import Path
from textwrap import dedent
from typing import List, Optional

import toml
from pydantic import BaseModel, Field, NonNegativeInt, PositiveInt, ValidationError, field_validator, model_validator
from toml.decoder import TomlDecodeError

from bitfit_lab.encoder.config import ModelConfig
from bitfit_lab.params.exceptions import SelectorParseError
from bitfit_lab.params.selectors import DEFAULT_REGIMES, Selector, parse_selectors
from bitfit_lab.tasks.datasets import TaskKind
from bitfit_lab.tasks.grammar import GrammarParams, Vocabulary
from bitfit_lab.training.config import PretrainConfig, TrainConfig
from bitfit_lab.training.metrics import Metric

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

# The default file name of config file
DEFAULT_CONFIG_FILE_NAME = "bitfit-lab.toml"
EXIT_CONFIG_ERROR = 2


class TaskSpec(BaseModel):
    """A downstream task generated from the grammar

    :param name: used in run and table file names
    :param seed: generation seed, independent of the training seeds
    """

    name: str
    kind: TaskKind = TaskKind.SINGLE
    n_train: PositiveInt = 200
    n_dev: PositiveInt = 200
    seed: NonNegativeInt = 0
    metric: Metric = Metric.ACCURACY

    @field_validator("name")
    @classmethod
    def _check_name(cls, value: str) -> str:
        if not value or not value.replace("_", "").replace("-", "").isalnum():
            raise ValueError(f"task name may hold letters, digits, '-' and '_' only, got {value!r}")
        return value


class SweepConfig(BaseModel):
    """Train-set-size sweep

    :param task: name of the swept task, the first task when omitted
    :param include_full: append the full train-set size to `sizes`
    """

    task: Optional[str] = None
    sizes: List[PositiveInt] = Field(default_factory=lambda: [25, 50, 100, 400])
    include_full: bool = True
    methods: List[str] = Field(default_factory=lambda: ["bitfit", "full_ft"])
    subset_seed: NonNegativeInt = 0


class ExperimentConfig(BaseModel):
    """The monolith config object of one experiment

    :param regimes: selector texts fine-tuned by `finetune`, see `Selector.parse`
    :param selector_seed: seed of the random selectors, shared by every training seed
    :param output_dir: where artifacts go, `--out` and BITFIT_LAB_OUTPUT_DIR take precedence
    """

    model: ModelConfig = Field(default_factory=ModelConfig)
    grammar: GrammarParams = Field(default_factory=GrammarParams)
    pretrain: PretrainConfig = Field(default_factory=PretrainConfig)
    tasks: List[TaskSpec] = Field(default_factory=lambda: [TaskSpec(name="topic")])
    regimes: List[str] = Field(default_factory=lambda: list(DEFAULT_REGIMES))
    selector_seed: NonNegativeInt = 0
    train: TrainConfig = Field(default_factory=TrainConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    output_dir: Optional[Path] = None

    @field_validator("regimes")
    @classmethod
    def _check_regimes(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("at least one regime is required")
        parse_selectors(value)
        return value

    @model_validator(mode="after")
    def _check_consistency(self) -> "ExperimentConfig":
        vocab_size = Vocabulary.build(self.grammar).size
        if self.model.vocab_size < vocab_size:
            raise ValueError(f"model.vocab_size {self.model.vocab_size} is below the grammar's {vocab_size} tokens")
        if self.model.max_seq_len < self.grammar.sentence_length + 1:
            raise ValueError(
                f"model.max_seq_len {self.model.max_seq_len} cannot hold CLS plus "
                f"{self.grammar.sentence_length} words"
            )
        names = [t.name for t in self.tasks]
        if len(set(names)) != len(names):
            raise ValueError(f"task names must be unique, got {names}")
        if self.sweep.task is not None and self.sweep.task not in names:
            raise ValueError(f"sweep.task {self.sweep.task!r} is not one of the tasks {names}")
        return self

    def selectors(self, regimes: Optional[List[str]] = None) -> List[Selector]:
        return parse_selectors(regimes if regimes is not None else self.regimes, seed=self.selector_seed)

    def get_task(self, name: Optional[str] = None) -> TaskSpec:
        if name is None:
            return self.tasks[0]
        for spec in self.tasks:
            if spec.name == name:
                return spec
        raise KeyError(f"Task with name: {name} not found")

    def sweep_sizes(self) -> List[int]:
        n_train = self.get_task(self.sweep.task).n_train
        sizes = sorted(set(s for s in self.sweep.sizes if s < n_train))
        if self.sweep.include_full or n_train in self.sweep.sizes:
            sizes.append(n_train)
        return sizes


def load_configuration(settings_path: PathLike, **overwrites) -> ExperimentConfig:
    """Load configuration from a settings file

    :raises: FileNotFoundError, TomlDecodeError, ValidationError(pydantic), SelectorParseError
    """
    settings_data = toml.load(settings_path)
    settings_data.update(overwrites)
    return ExperimentConfig(**settings_data)


def format_validation_error(error: ValidationError) -> str:
    return "; ".join(f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}" for e in error.errors())


def get_configuration_or_quit(settings_path: PathLike, **overwrites) -> ExperimentConfig:
    """Get configuration object or abort execution with the config-error exit code"""
    try:
        return load_configuration(settings_path, **overwrites)
    except FileNotFoundError:
        logger.critical('Settings file: "%s" not found, exit now.', settings_path)
    except TomlDecodeError as e:
        logger.critical('Settings file: "%s" is not valid TOML, line %s, detail: %s', settings_path, e.lineno, e)
    except ValidationError as e:
        logger.critical('Settings file: "%s" is invalid, %s', settings_path, format_validation_error(e))
    except (SelectorParseError, ConfigurationError) as e:
        logger.critical('Settings file: "%s" is invalid, detail: %s', settings_path, e)
    sys.exit(EXIT_CONFIG_ERROR)


def default_settings_path() -> Path:
    return Path.cwd() / DEFAULT_CONFIG_FILE_NAME


EXAMPLE_CONFIG = dedent(
    """\
    # Annotated bitfit-lab experiment, every key is optional.
    # Artifacts go to `output_dir`, overridden by --out or BITFIT_LAB_OUTPUT_DIR.
    output_dir = "lab-output"

    # Fine-tuning regimes, in table order: full, bitfit, bq_bm2, bm2, bq, frozen (alias none),
    # rand_uniform[:fraction], rand_rowcol[:fraction], pattern:<glob|glob>.
    # Random regimes without a fraction match the BitFit budget.
    regimes = ["full", "bitfit", "bq_bm2", "bm2", "bq", "frozen", "rand_uniform", "rand_rowcol"]
    # Seed of the random regimes, the same mask serves every training seed
    selector_seed = 0

    [model]
    num_layers = 2
    num_heads = 2
    hidden = 32
    mlp_width = 64
    vocab_size = 64
    max_seq_len = 16
    dropout_p = 0.1

    [grammar]
    sentence_length = 15
    topic_noise = 0.1

    [pretrain]
    steps = 2000
    batch_size = 32
    learning_rate = 1e-3
    corpus_size = 4000
    heldout_size = 200
    mask_rate = 0.15
    seed = 0

    [train]
    # Omit learning_rates to sweep the default grid of each regime
    batch_size = 16
    max_epochs = 10
    seeds = [0, 1, 2, 3, 4]
    patience = 3
    # Threads running (lr, seed) jobs, results do not depend on it
    workers = 1

    # Downstream tasks: kind is "single", "pair" or "tagging"
    [[tasks]]
    name = "topic"
    kind = "single"
    n_train = 200
    n_dev = 200
    seed = 0

    [[tasks]]
    name = "agreement"
    kind = "tagging"
    n_train = 200
    n_dev = 200
    seed = 1

    [sweep]
    task = "topic"
    sizes = [25, 50, 100]
    include_full = true
    methods = ["bitfit", "full_ft"]
    subset_seed = 0
    """
)
