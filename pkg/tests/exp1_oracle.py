"""Independent oracle for the three-student experiment.

Implements the lab mechanism exactly as described in the participant
instructions, with no imports from the package under test: a single pass in
priority order where each student takes her highest-ranked available option
(a school needs a free seat and spare combined capacity in every bundle
containing it; a bundle needs spare combined capacity), followed by a
deferred, uniformly random assignment of bundle admits to the seats still
free in their bundle.

Used to compute the frozen constants in test_acceptance.py.  Run as a
script to print the freeze report.
"""

import itertools
from fractions import Fraction

SCHOOLS = ("A", "B", "C")
QUOTA = {"A": 1, "B": 1, "C": 1}

UTIL = {
    "A": {"A": 110, "B": 100, "C": 20, None: 0},
    "B": {"B": 110, "A": 100, "C": 20, None: 0},
}

TREATMENTS = {
    "nobundle-one": {"bundle": None, "length": 1},
    "indiff-bundle": {"bundle": ("A", "B"), "length": 1},
    "strict-bundle": {"bundle": ("A", "C"), "length": 1},
    "nobundle-two": {"bundle": None, "length": 2},
}

EQUILIBRIUM = {
    "nobundle-one": {"A": ("A",), "B": ("B",)},
    "indiff-bundle": {"A": ("AB",), "B": ("AB",)},
    "strict-bundle": {"A": ("A",), "B": ("B",)},
    "nobundle-two": {"A": ("A", "B"), "B": ("B", "A")},
}


def menu(treatment):
    opts = list(SCHOOLS)
    b = TREATMENTS[treatment]["bundle"]
    if b is not None:
        opts.append("".join(b))
    return opts


def feasible_rols(treatment):
    length = TREATMENTS[treatment]["length"]
    opts = menu(treatment)
    rols = []
    for n in range(1, length + 1):
        rols.extend(itertools.permutations(opts, n))
    return rols


def run_mechanism(treatment, rols, perm):
    """Serial pass in priority order; returns [(prob, assignment), ...].

    assignment maps student index -> school or None.  Bundle admits are
    resolved at the end, uniformly over the bundle's remaining free seats.
    """
    bundle = TREATMENTS[treatment]["bundle"]
    taken = {s: 0 for s in SCHOOLS}
    bundle_admits = []

    def bundle_remaining():
        cap = sum(QUOTA[s] for s in bundle)
        used = sum(taken[s] for s in bundle) + len(bundle_admits)
        return cap - used

    placed = {}
    for i in perm:
        for entry in rols[i]:
            if len(entry) == 1:
                s = entry
                if taken[s] >= QUOTA[s]:
                    continue
                if bundle is not None and s in bundle and bundle_remaining() < 1:
                    continue
                taken[s] += 1
                placed[i] = s
                break
            else:
                assert bundle is not None and entry == "".join(bundle)
                if bundle_remaining() < 1:
                    continue
                bundle_admits.append(i)
                break

    if not bundle_admits:
        return [(Fraction(1), tuple(placed.get(i) for i in range(len(rols))))]

    free = [s for s in bundle for _ in range(QUOTA[s] - taken[s])]
    assert len(free) >= len(bundle_admits)
    outcomes = []
    arrangements = set(itertools.permutations(free, len(bundle_admits)))
    for seats in arrangements:
        full = dict(placed)
        for i, s in zip(bundle_admits, seats):
            full[i] = s
        outcomes.append(
            (Fraction(1, len(arrangements)), tuple(full.get(i) for i in range(len(rols))))
        )
    return outcomes


def profile_draws(profile, types):
    """Yield (prob, rols) across the report supports of the given types."""
    supports = [profile[t] for t in types]
    for combo in itertools.product(*supports):
        p = Fraction(1)
        rols = []
        for prob, rol in combo:
            p *= prob
            rols.append(rol)
        yield p, tuple(rols)


def pure(profile_map):
    return {t: [(Fraction(1), rol)] for t, rol in profile_map.items()}


def exact_metrics(treatment, profile):
    """Expected (avg payoff, match rate, mismatch rate) under the profile."""
    payoff = Fraction(0)
    match = Fraction(0)
    mismatch = Fraction(0)
    n = 3
    perms = list(itertools.permutations(range(n)))
    for types in itertools.product("AB", repeat=n):
        p_t = Fraction(1, 2**n)
        for p_r, rols in profile_draws(profile, types):
            for perm in perms:
                p = p_t * p_r * Fraction(1, len(perms))
                for p_b, assign in run_mechanism(treatment, rols, perm):
                    w = p * p_b
                    payoff += w * Fraction(
                        sum(UTIL[t][a] for t, a in zip(types, assign)), n
                    )
                    match += w * Fraction(sum(a is not None for a in assign), n)
                    top2 = perm[:2]
                    mismatch += w * Fraction(
                        sum(assign[i] not in ("A", "B") for i in top2), 2
                    )
    return payoff, match, mismatch


def deviation_value(treatment, profile, dev_type, dev_rol):
    """Expected payoff of student 0 (dev_type) reporting dev_rol."""
    value = Fraction(0)
    perms = list(itertools.permutations(range(3)))
    for others in itertools.product("AB", repeat=2):
        p_t = Fraction(1, 4)
        for p_r, other_rols in profile_draws(profile, others):
            rols = (dev_rol,) + other_rols
            for perm in perms:
                p = p_t * p_r * Fraction(1, len(perms))
                for p_b, assign in run_mechanism(treatment, rols, perm):
                    value += p * p_b * UTIL[dev_type][assign[0]]
    return value


def best_responses(treatment, profile, dev_type):
    vals = {
        rol: deviation_value(treatment, profile, dev_type, rol)
        for rol in feasible_rols(treatment)
    }
    best = max(vals.values())
    return vals, best


def main():
    print("== Table 1 (equilibrium profiles) ==")
    for trt in TREATMENTS:
        prof = pure(EQUILIBRIUM[trt])
        pay, mat, mis = exact_metrics(trt, prof)
        print(
            f"{trt:14s} payoff={pay} ({float(pay):.4f})  match={mat} "
            f"({float(mat):.4f})  mismatch={mis} ({float(mis):.4f})"
        )

    print("\n== Best responses against equilibrium ==")
    for trt in TREATMENTS:
        prof = pure(EQUILIBRIUM[trt])
        for t in "AB":
            vals, best = best_responses(trt, prof, t)
            eq = EQUILIBRIUM[trt][t]
            flag = "OK " if vals[eq] == best else "DEV"
            print(f"{trt:14s} type {t}: eq={eq} v={float(vals[eq]):.4f} "
                  f"best={float(best):.4f} {flag}")
            if vals[eq] != best:
                for rol, v in sorted(vals.items(), key=lambda kv: -kv[1]):
                    if v > vals[eq]:
                        print(f"    better: {rol} -> {v} ({float(v):.4f})")

    print("\n== NoBundle-Two type-A deviation list ==")
    prof = pure(EQUILIBRIUM["nobundle-two"])
    for rol in feasible_rols("nobundle-two"):
        v = deviation_value("nobundle-two", prof, "A", rol)
        print(f"  {rol}: {v} ({float(v):.4f})")

    print("\n== Strict-bundle AC deviation ==")
    prof = pure(EQUILIBRIUM["strict-bundle"])
    v = deviation_value("strict-bundle", prof, "A", ("AC",))
    print(f"  type A reports (AC): {v} ({float(v):.4f})")
    v = deviation_value("strict-bundle", prof, "B", ("AC",))
    print(f"  type B reports (AC): {v} ({float(v):.4f})")

    print("\n== Indiff-bundle single-school deviation ==")
    prof = pure(EQUILIBRIUM["indiff-bundle"])
    for t in "AB":
        for rol in [("A",), ("B",), ("AB",)]:
            v = deviation_value("indiff-bundle", prof, t, rol)
            print(f"  type {t} reports {rol}: {v} ({float(v):.4f})")

    print("\n== Counterfactual: strict-bundle mixed vs pure ==")
    p_ac = Fraction(245, 1000)
    mixed = {
        "A": [(p_ac, ("AC",)), (1 - p_ac, ("A",))],
        "B": [(p_ac, ("AC",)), (1 - p_ac, ("B",))],
    }
    pay_m, mat_m, mis_m = exact_metrics("strict-bundle", mixed)
    pay_p, mat_p, mis_p = exact_metrics("strict-bundle", pure(EQUILIBRIUM["strict-bundle"]))
    print(f"  mixed: payoff={float(pay_m):.4f} match={mat_m} ({float(mat_m):.4f}) "
          f"mismatch={float(mis_m):.4f}")
    print(f"  pure : payoff={float(pay_p):.4f} match={mat_p} ({float(mat_p):.4f}) "
          f"mismatch={float(mis_p):.4f}")


if __name__ == "__main__":
    main()
