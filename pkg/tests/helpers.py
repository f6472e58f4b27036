"""Independent brute-force oracles shared by the test modules."""

from palmlab.algebra import ZERO, scalar_sum


def palm_by_definition(P, xi, B):
    """Weight table of the Palm measure straight from the window formula."""
    space = P.space
    out = [ZERO] * space.size
    for w in range(space.size):
        for s in B:
            v = space.flow[s][w]
            out[v] = out[v] + P.weights[w] * xi[w][s]
    return [x / len(B) for x in out]


def mecke_sides(Q, xi, target, s_prime):
    """Both sides of the Mecke identity for ``g = 1{(target, s_prime)}``,
    summed directly over ``(w, s)`` with no precomputed tables."""
    space, G = Q.space, Q.space.group
    lhs = scalar_sum(
        Q.weights[w] * xi[w][s]
        for w in range(space.size)
        for s in G
        if space.flow[s][w] == target and G.neg(s) == s_prime
    )
    rhs = Q.weights[target] * xi[target][s_prime]
    return lhs, rhs


def orbit_of(space, w):
    return sorted({space.flow[s][w] for s in space.group})
