# Copyright 2026 The FinRAG Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python bindings for the finrag C++ core."""

from finrag._core import (
    CorpusStore,
    FinragError,
    Vocab,
    clean_text,
    clm_nll,
    compute_metrics,
    evaluate_mock,
    format_dataset,
    lexical_tokens,
    map_output_to_label,
    mock_complete,
    overlap,
    run_cli,
    template_index,
    train_bpe,
    train_toy_model,
)

__all__ = [
    "CorpusStore",
    "FinragError",
    "Vocab",
    "clean_text",
    "clm_nll",
    "compute_metrics",
    "evaluate_mock",
    "format_dataset",
    "lexical_tokens",
    "map_output_to_label",
    "mock_complete",
    "overlap",
    "run_cli",
    "template_index",
    "train_bpe",
    "train_toy_model",
]

__version__ = "0.1.0"
