"""Solve and classify the V0=-1, k=0.2 sn-squared lattice state."""
from gpestab.spectral import classify
from gpestab.stationary import exact_sn_state, residual

state = exact_sn_state(-1.0, 0.2, 1.0, n_points=256, backend="spectral")
verdict = classify(state)
print(f"mu = {state.mu:.12g}  residual = {residual(state):.2e}")
for key, value in verdict.as_record().items():
    print(f"{key:>34} = {value}")
