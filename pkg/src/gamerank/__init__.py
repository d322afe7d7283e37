"""Benchmark suite for detecting strategically gaming agents.

Simulates multi-agent gaming of a payout model, ranks agents by gaming
propensity with causal effect estimators and non-causal baselines, and
scores every ranking against the known ground truth.
"""

__version__ = "0.1.0"
