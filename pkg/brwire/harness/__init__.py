"""Statistical verifiers comparing simulated runs with the limit theorems.

Every verifier module exposes a ``verify_*`` function taking explicit
parameters and a ``run`` function that reads them from a loaded config.
"""

from typing import Callable

from brwire.harness import clt, decomposition, free_energy, ldp, lp_rate, martingale, mdp
from brwire.harness.base import Check, VerificationReport
from brwire.settings import LoadedConfig

Verifier = Callable[[LoadedConfig], VerificationReport]

VERIFIERS: dict[str, Verifier] = {
    "clt": clt.run,
    "mdp": mdp.run,
    "free-energy": free_energy.run,
    "ldp": ldp.run,
    "lp-rate": lp_rate.run,
    "martingale": martingale.run,
    "decomposition": decomposition.run,
}
