"""Brute-force stability oracle for small bundle-choice instances.

Independent reference implementation used to freeze expected verdicts in the
test suite.  Everything here is deliberately naive: matchings are enumerated
exhaustively and the stability conditions are transcribed clause by clause.
No imports from the product package.

Run as a script to print the frozen report for the two worked fixtures.
"""

import itertools
from fractions import Fraction


# ---------------------------------------------------------------------------
# instance representation (plain dicts/tuples)
#
# schools:  {school_id: (quota, priority_tuple)}
# bundles:  {frozenset_of_school_ids: set_of_target_students}  (trivials included)
# rols:     {student: tuple of frozensets}  (each entry a bundle key)
# matching: {student: frozenset or None}
# ---------------------------------------------------------------------------


def bundle_quota(schools, key):
    return sum(schools[s][0] for s in key)


def occupancy(schools, bundles, matching, key):
    """Q_b: students matched to b or any bundle whose schools nest inside b."""
    return sum(
        1 for assigned in matching.values() if assigned is not None and assigned <= key
    )


def feasible(schools, bundles, matching):
    for i, assigned in matching.items():
        if assigned is None:
            continue
        if assigned not in bundles or i not in bundles[assigned]:
            return False
    return all(
        occupancy(schools, bundles, matching, key) <= bundle_quota(schools, key)
        for key in bundles
    )


def rank(rol, key):
    """Position of bundle key in a ROL; len(rol) stands for unmatched."""
    for pos, entry in enumerate(rol):
        if entry == key:
            return pos
    return len(rol)


def prefers(rol, a, b):
    """True if the ROL ranks bundle a strictly above bundle b (None = unmatched)."""
    ra = rank(rol, a) if a is not None else len(rol)
    rb = rank(rol, b) if b is not None else len(rol)
    return ra < rb


def higher_priority_on(schools, keys, i, j):
    """i beats j at every school in `keys` (raw orders; any disagreement fails)."""
    for s in keys:
        order = schools[s][1]
        if order.index(i) >= order.index(j):
            return False
    return True


def stability_violations(schools, bundles, rols, matching):
    """All violations of the bundle-level stability conditions.

    Returns a list of tuples:
      ("ir", i)                 matched outside own list
      ("waste", i, b)           i wants b, no weakly-larger bundle is full
      ("envy", i, j, b, case)   justified envy of i toward j via bundle b
    """
    out = []
    for i, rol in rols.items():
        assigned = matching[i]
        if assigned is not None and rank(rol, assigned) == len(rol):
            out.append(("ir", i))

    for i, rol in rols.items():
        for b in rol:
            if not prefers(rol, b, matching[i]):
                continue
            # non-wastefulness: some bundle covering b must sit at capacity
            exempt = any(
                key >= b
                and occupancy(schools, bundles, matching, key)
                == bundle_quota(schools, key)
                for key in bundles
            )
            if not exempt:
                out.append(("waste", i, b))
            for j, assigned_j in matching.items():
                if j == i or assigned_j is None:
                    continue
                if assigned_j == b:
                    if higher_priority_on(schools, b, i, j):
                        out.append(("envy", i, j, b, 1))
                elif assigned_j < b:
                    if higher_priority_on(schools, assigned_j, i, j):
                        out.append(("envy", i, j, b, 2))
                elif assigned_j > b:
                    gaps = all(
                        occupancy(schools, bundles, matching, key)
                        < bundle_quota(schools, key)
                        for key in bundles
                        if b <= key < assigned_j
                    )
                    if gaps and higher_priority_on(schools, b, i, j):
                        out.append(("envy", i, j, b, 3))
    return out


def enumerate_feasible(schools, bundles, rols):
    students = sorted(rols)
    choices = [tuple(rols[i]) + (None,) for i in students]
    for combo in itertools.product(*choices):
        matching = dict(zip(students, combo))
        if feasible(schools, bundles, matching):
            yield matching


def stable_matchings(schools, bundles, rols):
    return [
        m
        for m in enumerate_feasible(schools, bundles, rols)
        if not stability_violations(schools, bundles, rols, m)
    ]


def weak_improvements(schools, bundles, rols, base):
    """Feasible matchings weakly better for everyone, strictly for someone."""
    out = []
    for m in enumerate_feasible(schools, bundles, rols):
        if any(prefers(rols[i], base[i], m[i]) for i in rols):
            continue
        if any(prefers(rols[i], m[i], base[i]) for i in rols):
            out.append(m)
    return out


# ---------------------------------------------------------------------------
# seat-level (standard matching) checks, for the nested-implementation anchor
# ---------------------------------------------------------------------------


def implementations(schools, bundles, matching):
    """All seat assignments consistent with a bundle matching."""
    students = sorted(matching)
    taken = {s: [] for s in schools}
    roaming = []  # (student, allowed schools) for non-trivial admits
    for i in students:
        assigned = matching[i]
        if assigned is None:
            continue
        if len(assigned) == 1:
            (s,) = assigned
            taken[s].append(i)
        else:
            roaming.append((i, sorted(assigned)))
    base_free = {
        s: schools[s][0] - len(taken[s]) for s in schools
    }
    assert all(v >= 0 for v in base_free.values())
    results = []

    def place(idx, free, seats):
        if idx == len(roaming):
            mu = {i: None for i in students}
            for i in students:
                if matching[i] is not None and len(matching[i]) == 1:
                    (s,) = matching[i]
                    mu[i] = s
            mu.update(seats)
            results.append(mu)
            return
        i, allowed = roaming[idx]
        for s in allowed:
            if free[s] > 0:
                free[s] -= 1
                seats[i] = s
                place(idx + 1, free, seats)
                del seats[i]
                free[s] += 1

    place(0, dict(base_free), {})
    uniq = []
    for mu in results:
        if mu not in uniq:
            uniq.append(mu)
    return uniq


def induced_school_rank(rol, school):
    """First ROL position whose bundle contains the school (len = unlisted)."""
    for pos, entry in enumerate(rol):
        if school in entry:
            return pos
    return len(rol)


def standard_violations(schools, rols, mu):
    """Classic stability of a seat assignment under the induced preferences."""
    out = []
    for i, rol in rols.items():
        si = mu[i]
        ri = induced_school_rank(rol, si) if si is not None else len(rol)
        if si is not None and ri == len(rol):
            out.append(("ir", i))
        for s in schools:
            if induced_school_rank(rol, s) >= ri:
                continue
            seated = [j for j in mu if mu[j] == s]
            if len(seated) < schools[s][0]:
                out.append(("waste", i, s))
            for j in seated:
                order = schools[s][1]
                if order.index(i) < order.index(j):
                    out.append(("envy", i, j, s))
    return out


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------


def example_4():
    order_12 = ("i5", "i2", "i1", "i4", "i3")
    order_34 = ("i3", "i2", "i1", "i4", "i5")
    schools = {
        "s1": (2, order_12),
        "s2": (1, order_12),
        "s3": (1, order_34),
        "s4": (1, order_34),
    }
    students = {"i1", "i2", "i3", "i4", "i5"}
    B = frozenset({"s1", "s2"})
    bundles = {frozenset({s}): set(students) for s in schools}
    bundles[B] = set(students)
    rols = {
        "i1": (frozenset({"s1"}), frozenset({"s4"})),
        "i2": (B, frozenset({"s4"})),
        "i3": (B, frozenset({"s3"})),
        "i4": (frozenset({"s2"}), frozenset({"s4"})),
        "i5": (frozenset({"s3"}), frozenset({"s1"})),
    }
    nu = {
        "i1": frozenset({"s1"}),
        "i2": B,
        "i3": frozenset({"s3"}),
        "i4": frozenset({"s4"}),
        "i5": frozenset({"s1"}),
    }
    nu_prime = dict(nu, i3=B, i5=frozenset({"s3"}))
    return schools, bundles, rols, nu, nu_prime


def size_vs_stability():
    """Two students, two one-seat schools, trivial bundles only.

    i lists (s, s'), i' lists only s, both schools rank i first.  The unique
    stable matching strands i'; the both-matched alternative is unstable.
    """
    order = ("i", "ip")
    schools = {"s": (1, order), "sp": (1, order)}
    students = {"i", "ip"}
    bundles = {frozenset({x}): set(students) for x in schools}
    rols = {
        "i": (frozenset({"s"}), frozenset({"sp"})),
        "ip": (frozenset({"s"}),),
    }
    return schools, bundles, rols


def show(matching):
    return {i: (sorted(v) if v else None) for i, v in sorted(matching.items())}


def main():
    schools, bundles, rols, nu, nu_prime = example_4()
    print("== example 4 ==")
    print("nu violations:", stability_violations(schools, bundles, rols, nu))
    print("nu' violations:", stability_violations(schools, bundles, rols, nu_prime))
    stables = stable_matchings(schools, bundles, rols)
    print("stable matchings:", len(stables))
    for m in stables:
        print("   ", show(m))
    improvements = weak_improvements(schools, bundles, rols, nu)
    print("weak improvements over nu:", [show(m) for m in improvements])
    for m in improvements:
        print(
            "   stable?",
            not stability_violations(schools, bundles, rols, m),
        )
    for label, m in (("nu", nu), ("nu'", nu_prime)):
        for mu in implementations(schools, bundles, m):
            print(
                f"   implementation of {label}:",
                {i: mu[i] for i in sorted(mu)},
                "standard-stable" if not standard_violations(schools, rols, mu) else
                f"standard violations {standard_violations(schools, rols, mu)}",
            )

    schools, bundles, rols = size_vs_stability()
    print("== size vs stability ==")
    one_unmatched = {"i": frozenset({"s"}), "ip": None}
    both = {"i": frozenset({"sp"}), "ip": frozenset({"s"})}
    print("stable-but-small violations:", stability_violations(schools, bundles, rols, one_unmatched))
    print("both-matched violations:", stability_violations(schools, bundles, rols, both))
    stables = stable_matchings(schools, bundles, rols)
    print("stable matchings:", [show(m) for m in stables])


if __name__ == "__main__":
    main()
