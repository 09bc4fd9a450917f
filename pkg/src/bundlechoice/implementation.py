"""Turning bundle assignments into seat assignments.

A bundle-matching tells each student *which group of schools* admitted her; a
second stage must still pick the seat.  Seats are handed out by ascending
bundle size: students admitted by single schools are forced, then two-school
bundles fill from their remaining seats, then three-school bundles, and so
on.  Nested quotas guarantee this never runs out of seats, which we assert
rather than patch.

Three seat-picking policies are provided: a deterministic lexicographic one
(reproducible goldens), a seeded-random one (uniform over free seat slots,
drawn with numpy's default generator), and one that runs a within-bundle
deferred acceptance on student-submitted school rankings.
"""

from dataclasses import dataclass

import numpy as np

from .model import StandardMatching


@dataclass(frozen=True)
class ImplementationPolicy:
    mode: str  # "det", "random", or "prefs"
    seed: int = None
    preferences: dict = None  # student -> ordered schools, for "prefs"

    def __post_init__(self):
        if self.mode not in ("det", "random", "prefs"):
            raise ValueError(f"unknown implementation mode {self.mode!r}")
        if self.mode == "random" and self.seed is None:
            raise ValueError("random implementation needs a seed")
        if self.mode == "prefs" and self.preferences is None:
            raise ValueError("prefs implementation needs per-student rankings")


def _stage_plan(nu):
    """Forced seats, remaining free seats, and bundle groups by size."""
    instance = nu.instance
    seats = {i: None for i in instance.students}
    free = {s: school.quota for s, school in instance.schools.items()}
    groups = {}  # bundle id -> students, nontrivial only
    for i in instance.students:
        bid = nu[i]
        if bid is None:
            continue
        bundle = instance.bundles[bid]
        if bundle.trivial:
            (school,) = bundle.schools
            seats[i] = school
            free[school] -= 1
            assert free[school] >= 0, f"school {school} oversubscribed"
        else:
            groups.setdefault(bid, []).append(i)
    ordered = sorted(
        groups.items(),
        key=lambda kv: (
            len(instance.bundles[kv[0]].schools),
            instance.bundle_order.index(kv[0]),
        ),
    )
    return seats, free, ordered


def _bundle_pool(instance, free, bundle_id):
    """Free schools of a bundle, canonically ordered."""
    schools = instance.bundles[bundle_id].schools
    return [s for s in instance.school_order if s in schools and free[s] > 0]


def implement(nu, policy):
    """Assign every bundle-admitted student a seat inside her bundle."""
    instance = nu.instance
    if policy.mode == "prefs":
        return implement_with_preferences(nu, policy.preferences)
    rng = np.random.default_rng(policy.seed) if policy.mode == "random" else None

    seats, free, ordered = _stage_plan(nu)
    for bid, students in ordered:
        students = sorted(students, key=instance.student_key)
        if policy.mode == "det":
            for i in students:
                pool = _bundle_pool(instance, free, bid)
                assert pool, f"no free seat left in bundle {bid}"
                seats[i] = pool[0]
                free[pool[0]] -= 1
        else:
            slots = [
                s for s in _bundle_pool(instance, free, bid) for _ in range(free[s])
            ]
            assert len(slots) >= len(students), f"no free seat left in bundle {bid}"
            picks = rng.permutation(len(slots))[: len(students)]
            for i, k in zip(students, picks):
                seats[i] = slots[k]
                free[slots[k]] -= 1
    return StandardMatching(instance, seats)


def implement_with_preferences(nu, preferences):
    """Seat bundle admits by deferred acceptance over their own rankings.

    Students admitted by the same bundle compete for its remaining seats
    using the school rankings they submit for this stage; schools apply
    their common priority order restricted to the bundle's admittees, so
    the outcome inherits stability within each bundle.
    """
    instance = nu.instance
    seats, free, ordered = _stage_plan(nu)
    for bid, students in ordered:
        schools = instance.bundles[bid].schools
        for i in students:
            ranking = preferences.get(i)
            if ranking is None:
                raise ValueError(f"no second-stage ranking for student {i}")
            if set(ranking) != schools:
                raise ValueError(
                    f"student {i}: ranking must cover exactly the schools of "
                    f"bundle {bid}"
                )
        anchor = min(schools)  # all of the bundle's schools agree on admittees
        capacity = {s: free[s] for s in schools}
        pointer = {i: 0 for i in students}
        held = {s: [] for s in schools}
        placed = {}
        while True:
            waiting = [
                i for i in students if i not in placed and pointer[i] < len(schools)
            ]
            if not waiting:
                break
            for i in waiting:
                school = preferences[i][pointer[i]]
                held[school].append(i)
            for s, pool in held.items():
                pool.sort(key=lambda i: instance.rank(anchor, i))
                for loser in pool[capacity[s] :]:
                    pointer[loser] += 1
                del pool[capacity[s] :]
            placed = {i: s for s, pool in held.items() for i in pool}
            held = {s: list(pool) for s, pool in held.items()}
            for s in held:
                held[s] = [i for i in held[s] if placed.get(i) == s]
        assert len(placed) == len(students), f"no free seat left in bundle {bid}"
        for i, s in placed.items():
            seats[i] = s
            free[s] -= 1
    return StandardMatching(instance, seats)


def enumerate_implementations(nu, cap=10000):
    """All seat assignments realizing a bundle-matching.

    Returns (matchings, truncated); `truncated` is True when more than `cap`
    assignments exist, in which case exactly `cap` of them are returned.
    """
    instance = nu.instance
    seats, free, ordered = _stage_plan(nu)
    roaming = [
        (i, bid)
        for bid, students in ordered
        for i in sorted(students, key=instance.student_key)
    ]
    results = []
    truncated = False

    def place(idx):
        nonlocal truncated
        if len(results) >= cap:
            truncated = True
            return
        if idx == len(roaming):
            results.append(StandardMatching(instance, dict(seats)))
            return
        i, bid = roaming[idx]
        pool = _bundle_pool(instance, free, bid)
        assert pool, f"no free seat left in bundle {bid}"
        for s in pool:
            seats[i] = s
            free[s] -= 1
            place(idx + 1)
            free[s] += 1
            seats[i] = None
        if truncated:
            return

    place(0)
    return results, truncated
