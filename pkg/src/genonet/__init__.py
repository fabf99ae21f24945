"""Generative network-simulation workbench.

Turns natural-language prompts into validated 5G/6G scenario descriptions,
emits ns-3 simulation scripts, executes them in a sandbox with an
error-driven debug loop, and interprets simulator outputs into per-flow
metrics and summaries.  All model calls go through a record/replay gateway
so the whole pipeline runs deterministically offline.
"""

__version__ = "0.1.0"
