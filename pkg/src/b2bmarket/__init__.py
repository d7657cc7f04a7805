"""Rated B2B procurement market: simulator, protocols, and regime analysis.

The package splits along the moving parts of the platform:

* ``framework``   event ledger, field-level access, faithful-simulation audit
* ``market``      buyer/seller model, rating formulas, the round loop
* ``pricing``     homogeneous, two-tier, and rating-indexed price rules
* ``punishment``  per-buyer blacklists and market-wide isolation
* ``equilibrium`` closed-form regime bounds plus one-deviation verification
* ``regulation``  encrypted rating aggregation, monitoring, fees, leak flags
* ``harness``     scenario configs, orchestration, exports, theorem sweeps
* ``cli``         the command-line surface
"""

__version__ = "0.1.0"

from . import (  # noqa: F401
    equilibrium,
    framework,
    harness,
    market,
    pricing,
    punishment,
    regulation,
)
