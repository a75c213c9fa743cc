"""Independent brute-force references used by the tests."""
import itertools

import numpy as np
from scipy.optimize import linprog


def compositions(N, M):
    """All occupation vectors of N sites with total M."""
    return [c for c in itertools.product(range(M + 1), repeat=N) if sum(c) == M]


def zrp_generator(N, M, g, kernel):
    """Dense generator of the (unscaled) ZRP on the enumerated state space."""
    states = compositions(N, M)
    index = {s: i for i, s in enumerate(states)}
    Q = np.zeros((len(states), len(states)))
    for s in states:
        i = index[s]
        for x in range(N):
            if s[x] == 0:
                continue
            for d, p in zip(kernel.displacements, kernel.probabilities):
                t = list(s)
                t[x] -= 1
                t[(x + d) % N] += 1
                Q[i, index[tuple(t)]] += p * g(s[x])
        Q[i, i] = -Q[i].sum()
    return states, Q


def stationary(Q):
    n = Q.shape[0]
    A = np.vstack([Q.T, np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    return np.linalg.lstsq(A, b, rcond=None)[0]


def w1_circle_lp(a, b):
    """Transport LP on the M-point circle with arc-length cost."""
    M = a.size
    u = np.arange(M) / M
    d = np.abs(u[:, None] - u[None, :])
    cost = np.minimum(d, 1 - d).ravel()
    A_eq = np.vstack([np.kron(np.eye(M), np.ones(M)), np.kron(np.ones(M), np.eye(M))])
    res = linprog(cost, A_eq=A_eq, b_eq=np.concatenate([a / a.sum(), b / b.sum()]),
                  bounds=(0, None), method="highs")
    return res.fun


def w1_configurations_lp(states, mu, nu):
    """Wasserstein-1 between laws on configurations for the normalized l1 cost."""
    S = np.asarray(states, dtype=float)
    N = S.shape[1]
    n = len(states)
    cost = (np.abs(S[:, None, :] - S[None, :, :]).sum(-1) / N).ravel()
    A_eq = np.vstack([np.kron(np.eye(n), np.ones(n)), np.kron(np.ones(n), np.eye(n))])
    res = linprog(cost, A_eq=A_eq, b_eq=np.concatenate([mu, nu]), bounds=(0, None),
                  method="highs")
    return res.fun


def heat_mode(u, t, a, amplitude=0.5, mean=1.0):
    return mean + amplitude * np.exp(-4 * np.pi ** 2 * a * t) * np.cos(2 * np.pi * u)
