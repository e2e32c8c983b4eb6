"""Interference-aware wireless graph Transformer lab.

Channel simulation, interference-graph construction, a from-scratch
reverse-mode tensor engine, the bias-injected graph Transformer with
hybrid self-supervised pre-training and utility fine-tuning, classical
WMMSE/grid baselines, and the experiment CLI.
"""

__version__ = "0.1.0"
