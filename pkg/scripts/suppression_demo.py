"""Compare Suppressed, Unsuppressed and slightly mistuned control on an unstable uniform state."""
import math

import numpy as np

from gpestab.control import Variant, control_experiment, select_mode, variant_amplitudes
from gpestab.evolution import PerturbationField, evolve_linearized
from gpestab.model import Grid, Zero
from gpestab.stationary import StationaryState

# attractive uniform background; the box holds one unstable pair with growth rate sqrt(1/2)
L = 2 * math.pi / math.sqrt(2 + math.sqrt(2))
grid = Grid(16, L)
state = StationaryState(R=np.ones(16), mu=-1.0, g1=-1.0, potential=Zero(), grid=grid, backend="spectral")

mode = select_mode(state, 0)
lam = math.sqrt(-mode.nu)
print(f"growth rate {lam:.10f}")
for variant in (Variant.SUPPRESSED, Variant.UNSUPPRESSED):
    run = control_experiment(state, 0, variant, dt=1e-3).controlled
    print(f"{variant.value:>13}: max norm ratio {run.max_norm_ratio:.4g}")

# 1% amplitude error: the growing component returns
T1, T2 = variant_amplitudes(mode, Variant.SUPPRESSED)
traj = evolve_linearized(state, PerturbationField(T1 * mode.phi1, 1.01 * T2 * mode.phi2), dt=1e-3,
                         steps=int(20 / 1e-3), record_every=1000)
for t, n in zip(traj.times, traj.norms / traj.norms[0]):
    print(f"  mistuned t={t:5.1f} ratio={n:.4g}")
