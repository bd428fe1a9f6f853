"""Independent brute-force oracles used across the test suite.

Everything here works in exact rational arithmetic (fractions.Fraction over
the binary values of the law's float probabilities), with dict-of-positions
state and no windows, truncation or FFTs.  ``path_enumeration`` additionally
walks every single path for very small horizons and is used to validate the
rational recursion itself.
"""

from collections import defaultdict
from fractions import Fraction
from itertools import product


def law_fractions(law, span=8):
    """The law's pmf as {step: Fraction}, exact in the floats actually used."""
    out = {}
    for k in range(-span, span + 1):
        p = law.pmf_at(k)
        if p > 0:
            out[k] = Fraction(p)
    assert abs(float(sum(out.values())) - 1.0) < 1e-12
    return out


def path_enumeration(probs, x, N):
    """True exhaustive enumeration over all |support|^N paths.

    Returns (fp, killed) where fp[n-1] = P(T_x = n) and killed[n] maps
    j -> P(S_n = j, T_x > n).  Only feasible for tiny N.
    """
    steps = sorted(probs)
    fp = [Fraction(0)] * N
    killed = [defaultdict(Fraction) for _ in range(N + 1)]
    killed[0][0] = Fraction(1)
    for path in product(steps, repeat=N):
        w = Fraction(1)
        for s in path:
            w *= probs[s]
        pos = 0
        alive = True
        for n, s in enumerate(path, start=1):
            pos += s
            if alive and pos > x:
                fp[n - 1] += w
                alive = False
                break
            if alive:
                killed[n][pos] += w
    return fp, killed


def rational_killed(probs, x, N):
    """Exact measure pushforward of the killed walk.

    Returns (fp, snapshots) with fp[n-1] = P(T_x = n) and snapshots[n] a dict
    j -> P(S_n = j, T_x > n).
    """
    state = {0: Fraction(1)}
    fp = []
    snapshots = [dict(state)]
    for _ in range(N):
        new = defaultdict(Fraction)
        hit = Fraction(0)
        for pos, mass in state.items():
            for step, p in probs.items():
                j = pos + step
                if j > x:
                    hit += mass * p
                else:
                    new[j] += mass * p
        fp.append(hit)
        state = dict(new)
        snapshots.append(state)
    return fp, snapshots


def rational_unkilled(probs, N):
    """Exact pushforward of the free walk; returns list of dicts per n."""
    state = {0: Fraction(1)}
    out = [dict(state)]
    for _ in range(N):
        new = defaultdict(Fraction)
        for pos, mass in state.items():
            for step, p in probs.items():
                new[pos + step] += mass * p
        state = dict(new)
        out.append(state)
    return out


def rational_stay_positive(probs, M):
    """g(m, u) = P(S_m = u, S_1..S_m all > 0), exact.

    Returns list of dicts; entry m maps u -> g(m, u).  m = 0 is {0: 1}.
    """
    state = {0: Fraction(1)}
    out = [dict(state)]
    for m in range(1, M + 1):
        new = defaultdict(Fraction)
        for pos, mass in state.items():
            for step, p in probs.items():
                j = pos + step
                if j > 0:
                    new[j] += mass * p
        state = dict(new)
        out.append(state)
    return out


def rational_stay_nonpositive(probs, M):
    """gminus(m, u) = P(S_m = -u, S_1..S_m all <= 0), exact; u >= 0."""
    state = {0: Fraction(1)}
    out = [{0: Fraction(1)}]
    for m in range(1, M + 1):
        new = defaultdict(Fraction)
        for pos, mass in state.items():
            for step, p in probs.items():
                j = pos + step
                if j <= 0:
                    new[j] += mass * p
        state = dict(new)
        out.append({-j: v for j, v in state.items()})
    return out
