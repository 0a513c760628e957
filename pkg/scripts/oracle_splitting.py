"""Extended-precision oracle for the single-mode splitting E_{+1} - E_{-1}.

Uses mpmath's dense symmetric eigensolver (independent of the package's
tridiagonal Newton iteration) on the lab-frame fiber at modest couplings.
"""

import mpmath

ETA, OMEGA, V = 1.0, 1.0, 1.0


def lowest(eta, g, n_max):
    A = mpmath.zeros(n_max + 1, n_max + 1)
    for n in range(n_max + 1):
        A[n, n] = eta * (-1) ** n + OMEGA * n
        if n:
            A[n, n - 1] = A[n - 1, n] = g * V * mpmath.sqrt(n)
    return min(mpmath.eigsy(A, eigvals_only=True))


if __name__ == "__main__":
    for g, n_max, dps in ((1, 50, 30), (2, 70, 40), (4, 110, 50)):
        with mpmath.workdps(dps):
            split = lowest(ETA, g, n_max) - lowest(-ETA, g, n_max)
            check = lowest(ETA, g, n_max + 20) - lowest(-ETA, g, n_max + 20)
            print(f"g={g}  splitting={mpmath.nstr(split, 15)}  change with n_max+20={mpmath.nstr(abs(split - check), 3)}")
