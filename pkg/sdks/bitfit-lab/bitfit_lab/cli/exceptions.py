# -*- coding: utf-8 -*-
# bitfit-lab: desk-scale experiments on bias-only fine-tuning of transformer encoders.
# Licensed under the MIT License (the "License"); you may not use this file except in compliance with the License.
# You may obtain a copy of the License at http://opensource.org/licenses/MIT
# Unless required by applicable law or agreed to in writing, software distributed under the License is distributed on
# an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the License for the
# specific language governing permissions and limitations under the License.
from bitfit_lab.exceptions import BitFitLabError


class CommandError(BitFitLabError):
    pass


class ConfigurationError(CommandError, ValueError):
    """Error caused by an invalid experiment configuration"""


class MissingArtifactError(CommandError, FileNotFoundError):
    """A command needs an artifact an earlier command did not produce"""
