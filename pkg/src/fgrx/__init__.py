"""Factor-graph iterative receivers combining BP, mean-field and EP messages.

Modules:

* ``numerics``   -- Gaussian and discrete message types, Hermitian solves
* ``sigmodel``   -- MIMO-OFDM configuration, channels, pilots, observations
* ``coding``     -- constellations, conv code, BCJR, interleaving, demapping
* ``mf``         -- mean-field observation-factor messages and channel sweep
* ``equalizers`` -- exact discrete and Gaussian BP equalization
* ``ep``         -- Gaussian symbol messages from code messages
* ``receiver``   -- per-packet iterative reception for the five variants
* ``harness``    -- Monte Carlo campaigns and result files; ``plots`` for SVG
* ``scalar``     -- single-observation interference model demo
"""
from .receiver import ReceiverVariant, run_receiver
from .sigmodel import SystemConfig

__all__ = ["ReceiverVariant", "SystemConfig", "run_receiver"]
__version__ = "0.1.0"
