"""Prompt-free instance unlearning for small diffusion models.

Submodules are imported on demand (``from unprompt import unlearn``) so
that the CLI can set thread limits before numpy loads.
"""
__version__ = "0.1.0"
