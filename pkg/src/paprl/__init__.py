"""Plug-and-play object reinforcement learning on a 2D basket-ball platform.

Active objects (tiltable walls and spinning arcs) each learn a reward model
and pick one action per episode when the neutral ball first touches them.
Per-class transition models predict the ball's state after a contact, so a
new object of a known class can act sensibly before it has any experience.
"""

__version__ = "0.1.0"
