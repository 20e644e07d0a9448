"""Fixed-N solutions of the sn-squared lattice versus the Thomas-Fermi estimate."""
from gpestab.model import EllipticSnSquared, Grid
from gpestab.stationary import mu_TF, solve_fixed_N

pot = EllipticSnSquared(-1.0, 0.5)
grid = Grid.for_potential(pot, 128)
print(f"{'N':>8} {'mu':>14} {'mu_TF':>14} {'rel gap':>10}")
for N in (0.1, 1, 10, 100, 1000, 10000):
    s = solve_fixed_N(pot, N, 1, 1.0, grid)
    tf = mu_TF(N, 1, 1.0, pot)
    print(f"{N:>8g} {s.mu:>14.8g} {tf:>14.8g} {abs(s.mu - tf) / abs(tf):>10.2e}")
