"""Shared test utilities: random states and the tabulated reference matrices."""

import numpy as np


def random_density_matrix(rng, dim, rank=None):
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def sigma_x_measurement_table(sign):
    """4x4 sandwich superoperator of (1 +- sigma_x)/2 on (rho00, rho11, rho01, rho10)."""
    s = sign
    return 0.25 * np.array(
        [
            [1, 1, s, s],
            [1, 1, s, s],
            [s, s, 1, 1],
            [s, s, 1, 1],
        ],
        dtype=complex,
    )


def general_measurement_table(sign, theta, phi):
    """Closed-form 4x4 superoperators of (1 +- n.sigma)/2, entry by entry."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    st2 = np.sin(theta) ** 2
    ep, em = np.exp(1j * phi), np.exp(-1j * phi)
    if sign > 0:
        a, b = c**4, s**4
        u, v = s * c**3, s**3 * c
    else:
        a, b = s**4, c**4
        u, v = -(s**3) * c, -s * c**3
    return 0.25 * np.array(
        [
            [4 * a, st2, 4 * ep * u, 4 * em * u],
            [st2, 4 * b, 4 * ep * v, 4 * em * v],
            [4 * em * u, 4 * em * v, st2, em**2 * st2],
            [4 * ep * u, 4 * ep * v, ep**2 * st2, st2],
        ]
    )


# rows/columns index the vector (00,00) (01,01) (10,10) (11,11) (00,01) (00,10)
# (00,11) (01,00) (01,10) (01,11) (10,00) (10,01) (10,11) (11,00) (11,01) (11,10)
TWO_QUBIT_ORDER = [
    (0, 0), (1, 1), (2, 2), (3, 3),
    (0, 1), (0, 2), (0, 3), (1, 0), (1, 2), (1, 3),
    (2, 0), (2, 1), (2, 3), (3, 0), (3, 1), (3, 2),
]

_MB_ROWS = "1001001000000100"
BELL_B_TABLE = np.zeros((16, 16))
for _r in (0, 3, 6, 13):
    BELL_B_TABLE[_r] = [int(ch) for ch in _MB_ROWS]
BELL_B_TABLE /= 4

BELL_R_TABLE = 0.25 * np.array(
    [
        [1, 0, 0, 1, 0, 0, -1, 0, 0, 0, 0, 0, 0, -1, 0, 0],
        [0, 4, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
        [0, 0, 4, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
        [1, 0, 0, 1, 0, 0, -1, 0, 0, 0, 0, 0, 0, -1, 0, 0],
        [0, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0, -2, 0],
        [0, 0, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0, -2],
        [-1, 0, 0, -1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, 2, 0, -2, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, 0, 4, 0, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, -2, 0, 2, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 2, 0, -2, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 4, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, -2, 0, 2, 0, 0, 0],
        [-1, 0, 0, -1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0],
        [0, 0, 0, 0, -2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 2, 0],
        [0, 0, 0, 0, 0, -2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 2],
    ]
)


def two_qubit_generator_table(omega1, omega2, lam, gamma):
    """Flat-bath two-qubit generator written out equation by equation."""
    k = lam**2 * gamma
    idx = {pair: n for n, pair in enumerate(TWO_QUBIT_ORDER)}
    g = np.zeros((16, 16), dtype=complex)
    # populations
    g[0, 0], g[0, 1], g[0, 2] = -2 * k, k, k
    g[1, 0], g[1, 1], g[1, 3] = k, -2 * k, k
    g[2, 0], g[2, 2], g[2, 3] = k, -2 * k, k
    g[3, 1], g[3, 2], g[3, 3] = k, k, -2 * k
    w1, w2 = 1j * omega1, 1j * omega2
    eqs = [
        ((0, 1), -w2, (2, 3)),
        ((0, 2), -w1, (1, 3)),
        ((0, 3), -w1 - w2, None),
        ((1, 0), +w2, (3, 2)),
        ((1, 2), -w1 + w2, None),
        ((1, 3), -w1, (0, 2)),
        ((2, 0), +w1, (3, 1)),
        ((2, 1), +w1 - w2, None),
        ((2, 3), -w2, (0, 1)),
        ((3, 0), +w1 + w2, None),
        ((3, 1), +w1, (2, 0)),
        ((3, 2), +w2, (1, 0)),
    ]
    for target, phase, source in eqs:
        g[idx[target], idx[target]] = phase - 2 * k
        if source is not None:
            g[idx[target], idx[source]] = k
    return g
