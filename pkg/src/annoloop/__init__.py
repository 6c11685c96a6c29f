"""annoloop: a model-assisted annotation platform for extractive QA.

The package collects question-answer pairs over fixed passages, optionally
with a question generator and an adversary QA model in the loop, validates
submissions by majority vote, and reports collection efficiency metrics.
"""

__version__ = "0.1.0"
