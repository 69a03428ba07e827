# Independent oracle for the 4x5 user-kNN fixture in test_recommenders.cpp.
import math
R = {
    "u1": {"i1": 5, "i2": 3, "i4": 1},
    "u2": {"i1": 4, "i3": 2, "i4": 1},
    "u3": {"i2": 1, "i3": 5, "i5": 4},
    "u4": {"i1": 2, "i5": 5},
}
def cos(a, b):
    dot = sum(a[i] * b[i] for i in a if i in b)
    return dot / (math.sqrt(sum(v * v for v in a.values())) * math.sqrt(sum(v * v for v in b.values())))
for u in R:
    for v in R:
        if u < v:
            print(u, v, repr(cos(R[u], R[v])))
# u1 with two nearest neighbours
sims = sorted(((cos(R["u1"], R[v]), v) for v in R if v != "u1"), key=lambda t: (-t[0], t[1]))[:2]
print("neighbours", sims)
scores = {}
for s, v in sims:
    for i, r in R[v].items():
        if i not in R["u1"]:
            scores[i] = scores.get(i, 0) + s * r
print(sorted(scores.items(), key=lambda t: (-t[1], t[0])))
