"""Independent reference implementations used as test oracles.

Each one uses a different algorithm from the code under test.
"""
import itertools

import numpy as np

D = "零一二三四五六七八九"


def _under_100(n, leading):
    """Reading of 0 < n < 100; ``leading`` means nothing precedes it."""
    tens, ones = divmod(n, 10)
    if tens == 0:
        return D[ones]
    head = "十" if (tens == 1 and leading) else D[tens] + "十"
    return head + (D[ones] if ones else "")


def _under_1000(n, leading):
    hundreds, rest = divmod(n, 100)
    if hundreds == 0:
        return _under_100(rest, leading)
    out = D[hundreds] + "百"
    if rest == 0:
        return out
    if rest < 10:
        return out + "零" + D[rest]
    return out + _under_100(rest, False)


def number_oracle(n):
    """Chinese cardinal reading of 0..9999, built by magnitude cases."""
    if n == 0:
        return "零"
    thousands, rest = divmod(n, 1000)
    if thousands == 0:
        return _under_1000(rest, True)
    out = D[thousands] + "千"
    if rest == 0:
        return out
    if rest < 100:
        return out + "零" + _under_100(rest, False)
    return out + _under_1000(rest, False)


def tn_cases():
    """50 (input, expected) pairs whose expectations come from number_oracle."""
    rng = np.random.default_rng(2024)
    cases = []
    for n in [0, 7, 10, 11, 19, 20, 100, 101, 110, 1000, 1001, 1010, 1100, 2000, 9999]:
        cases.append((f"共{n}人", f"共{number_oracle(n)}人"))
    for n in rng.integers(0, 10000, 15):
        cases.append((f"第{n}页", f"第{number_oracle(int(n))}页"))
    for n in [5, 12, 50, 100, 37]:
        cases.append((f"{n}%", f"百分之{number_oracle(n)}"))
    for n, frac in [(3, "14"), (0, "5"), (12, "05"), (100, "1"), (7, "25")]:
        cases.append((f"{n}.{frac}米", f"{number_oracle(n)}点{''.join(D[int(c)] for c in frac)}米"))
    for n in [2, 3, 15]:
        word = "两" if n == 2 else number_oracle(n)
        cases.append((f"买{n}个", f"买{word}个"))
    cases.append(("零下-5℃", "零下负五摄氏度"))
    cases.append(("电话13800138000", "电话" + "".join(D[int(c)] for c in "13800138000")))
    cases.append(("3-5天", f"{number_oracle(3)}到{number_oracle(5)}天"))
    cases.append(("二十", "二十"))
    cases.append(("有0人", "有零人"))
    cases.append(("1+1=2", "一加一等于二"))
    cases.append(("编号007号", "编号零零七号"))
    assert len(cases) == 50
    return cases


def monotone_paths(n, t):
    """Every surjective monotone assignment of t frames to n phonemes.

    A path is given by its n-1 transition frames, chosen from 1..t-1.
    """
    for cuts in itertools.combinations(range(1, t), n - 1):
        bounds = (0, *cuts, t)
        yield tuple(bounds[1:-1]), [(bounds[i], bounds[i + 1]) for i in range(n)]


def path_score(v, cuts):
    """Score of the path with the given transition frames, in a fixed summation order."""
    bounds = (0, *cuts, v.shape[1])
    return sum(v[i, bounds[i]:bounds[i + 1]].sum() for i in range(v.shape[0]))


def brute_force_mas(v):
    """Best score and its transition tuple (earliest on ties) by enumeration."""
    n, t = v.shape
    best_score, best_cuts = -np.inf, None
    for cuts, spans in monotone_paths(n, t):
        score = path_score(v, cuts)
        if score > best_score or (score == best_score and cuts < best_cuts):
            best_score, best_cuts = score, cuts
    return best_score, best_cuts


def brute_force_eer(genuine, spoof):
    """EER by scanning every candidate threshold with plain Python loops.

    Accept (call genuine) when score >= t.  Candidates are all observed
    scores plus one above the maximum.  The EER is found by linear
    interpolation between the last point with FRR < FAR and the first
    with FRR >= FAR.
    """
    genuine = [float(x) for x in genuine]
    spoof = [float(x) for x in spoof]
    cands = sorted(set(genuine) | set(spoof))
    cands.append(float(np.nextafter(cands[-1], np.inf)))
    points = []
    for t in cands:
        frr = sum(1 for g in genuine if g < t) / len(genuine)
        far = sum(1 for s in spoof if s >= t) / len(spoof)
        points.append((t, frr, far))
    prev = None
    for t, frr, far in points:
        if frr >= far:
            if frr == far or prev is None:
                return far
            t0, frr0, far0 = prev
            gap0, gap1 = far0 - frr0, frr - far
            w = gap0 / (gap0 + gap1)
            return far0 + w * (far - far0)
        prev = (t, frr, far)
    raise AssertionError("FRR never reaches FAR")
