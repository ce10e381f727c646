"""showhide: a disclosure-game platform with a deterministic scoring rubric.

Senders author declarative chart specs over puzzle datasets; the rubric
scores each chart's revelation of target data signals as satisfied, risked,
or broken. Includes planted-signal puzzle generation, an event-sourced game
state machine, and a networked game service.
"""

__version__ = "0.1.0"
