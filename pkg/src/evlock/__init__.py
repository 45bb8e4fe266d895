"""evlock: a desk-scale evidence locker.

Anonymous-channel submission, content-addressed replicated storage, public
chain anchoring with proof of existence, consortium vetting, and a spoliation
scenario harness.
"""

__version__ = "0.1.0"
