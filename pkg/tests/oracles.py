"""Independent reference checks used by the property and acceptance tests."""
import itertools
import random

SYMMETRIC_ORDER = {
    "PD": lambda T, R, P, S: T > R > P > S,
    "HD": lambda T, R, P, S: T > R > S > P,
    "SH": lambda T, R, P, S: R > T > P > S,
}


def _bos(w, x, y, z):
    return w[0] > z[0] > max(x[0], y[0]) and z[1] > w[1] > max(x[1], y[1])


def _mp(w, x, y, z):
    return min(w[0], z[0]) > max(x[0], y[0]) and min(x[1], y[1]) > max(w[1], z[1])


ASYMMETRIC_ORDER = {"BoS": _bos, "MP": _mp}


def brute_force_satisfies(matrix, game_type):
    """Try every assignment of action names to the game's roles."""
    rows = sorted({a for a, _ in matrix})
    cols = sorted({b for _, b in matrix})
    if game_type in SYMMETRIC_ORDER:
        order = SYMMETRIC_ORDER[game_type]
        for c, d in itertools.permutations(set(rows) | set(cols), 2):
            try:
                rr, rc = matrix[(c, c)]
                s, t = matrix[(c, d)]
                t2, s2 = matrix[(d, c)]
                pr, pc = matrix[(d, d)]
            except KeyError:
                continue
            if rr == rc and pr == pc and (t2, s2) == (t, s) and order(t, rr, pr, s):
                return True
        return False
    order = ASYMMETRIC_ORDER[game_type]
    for up, down in itertools.permutations(rows, 2):
        for left, right in itertools.permutations(cols, 2):
            cells = [matrix.get(k) for k in ((up, left), (up, right), (down, left), (down, right))]
            if None not in cells and order(*cells):
                return True
    return False


NAMES = ["C", "D", "coop", "defect", "x", "y", "hawk", "dove", "it's"]


def symmetric_matrix(T, R, P, S, rng):
    """A symmetric 2x2 matrix with random action names and entry order."""
    c, d = rng.sample(NAMES, 2)
    cells = [((c, c), (R, R)), ((c, d), (S, T)), ((d, c), (T, S)), ((d, d), (P, P))]
    rng.shuffle(cells)
    return dict(cells)


def asymmetric_matrix(rng, values=range(0, 4)):
    up, down = rng.sample(NAMES, 2)
    left, right = rng.sample(NAMES, 2)
    cells = [((a, b), (rng.choice(values), rng.choice(values))) for a in (up, down) for b in (left, right)]
    rng.shuffle(cells)
    return dict(cells)


def all_symmetric(seed=0):
    rng = random.Random(seed)
    for T, R, P, S in itertools.product(range(6), repeat=4):
        yield (T, R, P, S), symmetric_matrix(T, R, P, S, rng)


def game_source(matrix, template):
    """Swap a canonical program's payoff facts for ``matrix``."""
    from gameform.logic.terms import format_atom

    kept = [ln for ln in template.splitlines() if not ln.startswith("payoff(")]
    facts = [f"payoff({format_atom(a)}, {format_atom(b)}, {u}, {v})." for (a, b), (u, v) in matrix.items()]
    return "\n".join(kept + facts) + "\n"
