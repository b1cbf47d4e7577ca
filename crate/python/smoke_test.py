"""Quick end-to-end check of the Python bindings."""

import math
import sys

import gttf_py as g


def close(a, b, tol):
    return all(abs(x - y) <= tol for ra, rb in zip(a, b) for x, y in zip(ra, rb))


def main():
    toy = g.Graph.toy()
    assert (toy.n, toy.m) == (5, 10), toy
    assert toy.neighbors(1) == [0, 2, 3, 4]

    exact = g.exact_tk(toy, 2)
    assert all(math.isclose(sum(r), 1.0) for r in exact)
    est = g.estimate_tk(toy, 2, fanout=3, seed=7)
    assert all(math.isclose(sum(r), 1.0) for r in est)
    assert est == g.estimate_tk(toy, 2, fanout=3, seed=7, workers=3)

    audit = g.audit_tk(toy, k=2, fanout=3, runs=10_000)
    assert audit["unbiased"], audit
    print(f"audit max |mean - T^2| = {audit['max_abs_error']:.5f} (tol {audit['tolerance']:.5f})")

    edges = [(a, b) for base in (0, 5) for a in range(base, base + 5) for b in range(a + 1, base + 5)]
    cliques = g.Graph(10, edges)
    z, losses = g.train(cliques, dim=8, epochs=100, seed=3)
    assert len(z) == 10 and len(z[0]) == 8 and len(losses) == 100
    dot = lambda a, b: sum(x * y for x, y in zip(z[a], z[b]))
    intra = sum(dot(a, b) for a, b in edges) / len(edges)
    inter = sum(dot(a, b) for a in range(5) for b in range(5, 10)) / 25
    assert intra > inter, (intra, inter)
    print(f"two cliques: intra {intra:.3f} > inter {inter:.3f}")

    assert g.roc_auc([3.0, 2.0], [1.0, 2.0]) == 0.875
    try:
        g.train(cliques, method="line")
    except ValueError as e:
        print(f"rejected: {e}")
    else:
        raise AssertionError("unknown method accepted")

    barbell = g.Graph(20, [(a, b) for base in (0, 10) for a in range(base, base + 10) for b in range(a + 1, base + 10)] + [(9, 10)])
    metrics = g.link_prediction(barbell, dim=16, epochs=50)
    assert 0.0 <= metrics["roc_auc"] <= 1.0
    print(f"link prediction: {metrics}")
    print("ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
