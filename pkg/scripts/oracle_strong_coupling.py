"""Dense lab-frame oracle for the single-mode strong-coupling sweep.

Independent of the package: builds the tridiagonal fiber directly with numpy,
checks convergence in n_max and prints the values and the thresholds frozen
in tests/frozen.py (1.05 times the converged value at the largest coupling).
"""

import numpy as np
import scipy.linalg
from scipy.special import gammaln

ETA, OMEGA, V = -1.0, 1.0, 1.0
COUPLINGS = (0, 1, 2, 4, 8, 12, 16)
MARGIN = 1.05


def ground(g, n_max):
    n = np.arange(n_max + 1)
    diag = ETA * (-1.0) ** n + OMEGA * n
    off = g * V * np.sqrt(n[1:])
    vals, vecs = scipy.linalg.eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    psi = vecs[:, 0]
    alpha = -g * V / OMEGA
    # normalised coherent state with amplitude alpha, in the log domain
    with np.errstate(divide="ignore"):
        logc = n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1) - 0.5 * alpha**2 if alpha else np.where(n == 0, 0.0, -np.inf)
    coh = np.exp(logc) * np.sign(alpha) ** n if alpha else np.exp(logc)
    delta = vals[0] + g * g * V * V / OMEGA
    overlap = abs(coh @ psi)
    number = float(psi**2 @ n)
    defect = (number - g * g * (V / OMEGA) ** 2) / g if g else float("nan")
    return delta, 1.0 - overlap, defect


def converged(g):
    mu = (g * V / OMEGA) ** 2
    n = int(mu + 10 * np.sqrt(mu) + 40)
    a = np.array(ground(g, n))
    b = np.array(ground(g, n + 60))
    return b, float(np.nanmax(np.abs(a - b)))


if __name__ == "__main__":
    rows = {}
    for g in COUPLINGS:
        vals, err = converged(g)
        rows[g] = vals
        print(f"g={g:>2}  delta={vals[0]: .13e}  1-o={vals[1]:.6e}  nu1={vals[2]: .6e}  n_max change={err:.1e}")
    top = rows[COUPLINGS[-1]]
    print("thresholds at g=%d (x%.2f):" % (COUPLINGS[-1], MARGIN))
    print(f"  DELTA_MAX = {MARGIN * abs(top[0]):.4e}")
    print(f"  ONE_MINUS_OVERLAP_MAX = {MARGIN * top[1]:.4e}")
    print(f"  NUMBER_DEFECT_MAX = {MARGIN * abs(top[2]):.4e}")
