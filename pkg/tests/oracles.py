"""Straight-line reference implementations used as test oracles.

Kept deliberately naive (Python loops, explicit formulas) and free of the
package's vectorised helpers, so agreement is meaningful.
"""

import math

from pif.forest import ExternalNode, InternalNode

TIE = 1e-12
GAMMA = 0.5772156649015329


def tanimoto(p, q):
    ip = math.fsum(a * b for a, b in zip(p, q))
    pp = math.fsum(a * a for a in p)
    qq = math.fsum(b * b for b in q)
    denom = pp + qq - ip
    if denom <= 0:
        return 0.0
    return 1.0 - ip / denom


def euclidean(p, q):
    return math.sqrt(math.fsum((a - b) ** 2 for a, b in zip(p, q)))


def distance(metric):
    return euclidean if metric == "euclidean" else tanimoto


def nearest(p, seeds, metric):
    d = [distance(metric)(p, s) for s in seeds]
    best = min(d)
    tol = TIE if metric != "euclidean" else 1e-9
    for i, v in enumerate(d):
        if v <= best + tol:
            return i


def c(n):
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    return 2.0 * (math.log(n - 1) + GAMMA) - 2.0 * (n - 1) / n


def walk(p, node, bank, metric):
    """Path length by explicit root-to-leaf nearest-seed search."""
    e = 0
    while isinstance(node, InternalNode):
        seeds = [list(bank[s]) for s in node.seeds]
        node = node.children[nearest(list(p), seeds, metric)]
        e += 1
    assert isinstance(node, ExternalNode)
    return e + c(node.size)


def auc_pairs(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    total = 0.0
    for a in pos:
        for b in neg:
            total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(pos) * len(neg))


def lof(points, k, metric):
    """LOF from the textbook definitions, neighbourhood ties included."""
    dist = distance(metric)
    n = len(points)
    d = [[dist(points[i], points[j]) for j in range(n)] for i in range(n)]
    kdist, hood = [], []
    for i in range(n):
        others = sorted(d[i][j] for j in range(n) if j != i)
        kd = others[k - 1]
        kdist.append(kd)
        hood.append([j for j in range(n) if j != i and d[i][j] <= kd])
    lrd = []
    for i in range(n):
        reach = [max(kdist[j], d[i][j]) for j in hood[i]]
        lrd.append(1.0 / (sum(reach) / len(reach) + 1e-10))
    return [sum(lrd[j] for j in hood[i]) / len(hood[i]) / lrd[i] for i in range(n)]
