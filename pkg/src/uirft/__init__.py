"""GRPO fine-tuning with rule-based rewards for GUI action prediction.

Subpackages: ``toygym`` holds the synthetic screens and the tabular
surrogate policy; ``kernels`` picks the compiled or pure-Python backend.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"
