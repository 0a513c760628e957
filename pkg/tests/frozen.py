"""Values frozen from the oracle scripts in scripts/ before the acceptance suite was written."""

# scripts/oracle_strong_coupling.py: eta=-1, omega=1, v=1, lab frame, dense, converged in n_max
STRONG_DELTA = {
    0: -1.0,
    1: -4.3654539216864e-01,
    2: -6.7460592476168e-02,
    4: -1.5877219904361e-02,
    8: -3.9216296578957e-03,
    12: -1.7391357225733e-03,
    16: -9.7751804338486e-04,
}
STRONG_ONE_MINUS_OVERLAP = {1: 7.708785e-02, 2: 2.683860e-03, 4: 1.302419e-04, 8: 7.750593e-06,
                            12: 1.517583e-06, 16: 4.787075e-07}
STRONG_NUMBER_DEFECT = {1: -6.058844e-01, 2: -4.217690e-02, 4: -4.099663e-03, 8: -4.940792e-04,
                        12: -1.454338e-04, 16: -6.121455e-05}

# thresholds at g=16: 1.05 times the oracle values above
DELTA_MAX = 1.0264e-03
ONE_MINUS_OVERLAP_MAX = 5.0264e-07
NUMBER_DEFECT_MAX = 6.4275e-05

# scripts/oracle_splitting.py: mpmath dense eigensolver, E_{+1} - E_{-1}
SPLITTING = {1: 0.279462265908861, 2: 0.000820241387523856, 4: 2.72726460429197e-14}
