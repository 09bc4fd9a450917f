"""Matching engines: standard deferred acceptance and two bundle variants.

All three engines consume a validated instance plus a ROL mapping
{student: sequence of bundle ids} and return a (BundleMatching, EngineTrace)
pair.  Rejection always consumes one ROL slot, so every engine halts within
|students| * rol_length rounds.

The *simple* engine requires every bundle's schools to share one full
priority order; it then processes each sub-hierarchy sequentially by that
order, recomputing all tentative admissions from scratch every round.

The *general* engine handles arbitrary nested bundles.  Each round it frees
the seats of every tentatively held student whose bundle touches a school in
play, then repeatedly admits the set of students who top the priority order
at every live school of the bundle they ask for.  When the nested quota of a
larger bundle cannot cover all sub-bundles about to admit, the shortfall is
resolved by an exogenous tie-break order over students.
"""

from dataclasses import dataclass, field

from .model import BundleMatching, detect_simplicity


@dataclass
class Round:
    number: int
    applications: dict  # student -> bundle asked for (or held) this round
    admitted: dict  # holdings at the end of the round
    rejected: list
    events: list = field(default_factory=list)


@dataclass
class EngineTrace:
    engine: str
    rounds: list = field(default_factory=list)

    @property
    def final(self):
        return self.rounds[-1].admitted if self.rounds else {}

    def events(self):
        """Flat (round, kind, *detail) event stream for logging/CSV export."""
        for rnd in self.rounds:
            for ev in rnd.events:
                yield (rnd.number,) + ev


def _round_limit(instance):
    return len(instance.students) * instance.rol_length + 1


def _zero_cascade(instance, remaining):
    """Zero every bundle nested inside an exhausted bundle."""
    for bid, left in list(remaining.items()):
        if left == 0:
            for sub in instance.sub_bundles(bid):
                remaining[sub] = 0


def _admit(instance, remaining, bundle_id):
    """Seat one student: charge the bundle and everything containing it."""
    for sup in instance.sup_bundles(bundle_id):
        remaining[sup] -= 1
        assert remaining[sup] >= 0, f"quota underflow at bundle {sup}"
    _zero_cascade(instance, remaining)


def _fresh_quotas(instance):
    return {bid: instance.bundle_quota(bid) for bid in instance.bundle_order}


def run_standard_da(instance, rols):
    """Student-proposing deferred acceptance over one-school bundles only."""
    for i, entries in rols.items():
        for bid in entries:
            if not instance.bundles[bid].trivial:
                raise ValueError(
                    f"student {i} lists bundle {bid}; standard DA accepts "
                    "one-school entries only"
                )
    rol = {i: tuple(rols.get(i, ())) for i in instance.students}
    pointer = {i: 0 for i in instance.students}
    held = {}  # school id -> list of students, kept sorted by priority
    trace = EngineTrace("standard-da")

    for number in range(1, _round_limit(instance) + 1):
        proposers = [
            i
            for i in instance.students
            if not any(i in pool for pool in held.values())
            and pointer[i] < len(rol[i])
        ]
        if not proposers:
            break
        rnd = Round(number, {}, {}, [])
        pools = {s: list(pool) for s, pool in held.items()}
        for i in proposers:
            school = next(iter(instance.bundles[rol[i][pointer[i]]].schools))
            rnd.applications[i] = school
            pools.setdefault(school, []).append(i)
        for s, pool in pools.items():
            pool.sort(key=lambda i: instance.rank(s, i))
            for loser in pool[instance.schools[s].quota :]:
                rnd.rejected.append(loser)
                rnd.events.append(("reject", loser, s))
                pointer[loser] += 1
            del pool[instance.schools[s].quota :]
            for i in pool:
                rnd.events.append(("hold", i, s))
        held = {s: pool for s, pool in pools.items() if pool}
        rnd.admitted = {i: s for s, pool in held.items() for i in pool}
        trace.rounds.append(rnd)
        if not rnd.rejected:
            break
    else:
        raise AssertionError("round limit exceeded; engine failed to settle")

    assignment = {i: s for s, pool in held.items() for i in pool}
    return BundleMatching(instance, assignment), trace


def run_bundle_da_simple(instance, rols):
    """Bundle deferred acceptance for systems with a shared priority order.

    Every round resets all quotas and reprocesses, per sub-hierarchy, the
    carried-over tentative admits together with the round's new applicants,
    one by one in the hierarchy's common order: a student is admitted exactly
    when her requested bundle still has a seat, and each admission charges
    the bundle and all of its sup-bundles, zeroing nested bundles the moment
    anything hits zero.
    """
    info = detect_simplicity(instance)
    if not info.simple:
        raise ValueError(
            "bundle system is not simple ({}); use the general engine".format(
                info.reason
            )
        )
    hierarchy_of = {}
    for k, sub in enumerate(info.hierarchies):
        for bid in sub.bundle_ids:
            hierarchy_of[bid] = k

    rol = {i: tuple(rols.get(i, ())) for i in instance.students}
    pointer = {i: 0 for i in instance.students}
    held = {}
    trace = EngineTrace("bundle-da-simple")

    for number in range(1, _round_limit(instance) + 1):
        targets = {
            i: rol[i][pointer[i]]
            for i in instance.students
            if pointer[i] < len(rol[i])
        }
        if not targets:
            break
        rnd = Round(number, dict(targets), {}, [])
        remaining = _fresh_quotas(instance)
        admitted = {}
        for k, sub in enumerate(info.hierarchies):
            queue = [i for i in targets if hierarchy_of[targets[i]] == k]
            queue.sort(key=lambda i: sub.order.index(i))
            for i in queue:
                bid = targets[i]
                if remaining[bid] > 0:
                    _admit(instance, remaining, bid)
                    admitted[i] = bid
                    rnd.events.append(("admit", i, bid, dict(remaining)))
                else:
                    rnd.rejected.append(i)
                    rnd.events.append(("reject", i, bid))
        for i in rnd.rejected:
            pointer[i] += 1
        held = admitted
        rnd.admitted = dict(admitted)
        trace.rounds.append(rnd)
        if all(
            i in admitted or pointer[i] >= len(rol[i]) for i in instance.students
        ):
            break
    else:
        raise AssertionError("round limit exceeded; engine failed to settle")

    return BundleMatching(instance, held), trace


def _alive_schools(instance, candidates, remaining):
    """Schools whose every containing bundle still has seats."""
    return {
        s
        for s in candidates
        if all(
            remaining[bid] > 0
            for bid in instance.bundle_order
            if s in instance.bundles[bid].schools
        )
    }


def run_bundle_da_general(instance, rols, tiebreak=None):
    """Bundle deferred acceptance for arbitrary nested bundle systems.

    `tiebreak` is a strict order over students (best first) consulted only
    when a bundle lacks the seats to cover every sub-bundle about to admit;
    it defaults to the instance's canonical student order.
    """
    if tiebreak is None:
        tiebreak = instance.students
    if sorted(tiebreak) != sorted(instance.students):
        raise ValueError("tie-break order must be a permutation of the students")
    tb_rank = {i: k for k, i in enumerate(tiebreak)}

    rol = {i: tuple(rols.get(i, ())) for i in instance.students}
    pointer = {i: 0 for i in instance.students}
    held = {}
    trace = EngineTrace("bundle-da-general")

    for number in range(1, _round_limit(instance) + 1):
        new = {
            i: rol[i][pointer[i]]
            for i in instance.students
            if i not in held and pointer[i] < len(rol[i])
        }
        if not new:
            break
        rnd = Round(number, {}, {}, [])
        remaining = _fresh_quotas(instance)

        fresh_schools = set()
        for bid in new.values():
            fresh_schools |= instance.bundles[bid].schools
        active_bundles = {
            bid
            for bid in instance.bundle_order
            if remaining[bid] > 0 and instance.bundles[bid].schools & fresh_schools
        }
        active_schools = set()
        for bid in active_bundles:
            active_schools |= instance.bundles[bid].schools

        # Holders untouched by this round's applications keep their seats;
        # everyone else is released back into the competition.
        admitted = {}
        targets = dict(new)
        for i, bid in held.items():
            if instance.bundles[bid].schools & active_schools:
                targets[i] = bid
                rnd.events.append(("release", i, bid))
            else:
                _admit(instance, remaining, bid)
                admitted[i] = bid
                rnd.events.append(("stay", i, bid))
        rnd.applications = dict(targets)
        unresolved = set(targets)

        while True:
            alive = _alive_schools(instance, active_schools, remaining)
            tops = {}
            for s in alive:
                pool = [
                    i
                    for i in unresolved
                    if s in instance.bundles[targets[i]].schools
                ]
                if pool:
                    tops[s] = min(pool, key=lambda i: instance.rank(s, i))
            if not tops:
                break
            batch = [
                i
                for i in unresolved
                if any(s in tops for s in instance.bundles[targets[i]].schools)
                and all(
                    tops.get(s) == i
                    for s in instance.bundles[targets[i]].schools
                    if s in alive
                )
            ]
            assert batch, "no admissible applicant despite waiting applicants"
            for a in batch:
                for b in batch:
                    if a < b:
                        assert not (
                            instance.bundles[targets[a]].schools
                            & instance.bundles[targets[b]].schools
                        ), "simultaneous admits with overlapping bundles"

            batch_bundles = {targets[i] for i in batch}
            overdemanded = {}
            for bid in active_bundles:
                inside = {
                    tb
                    for tb in batch_bundles
                    if instance.bundles[tb].schools < instance.bundles[bid].schools
                }
                if inside and remaining[bid] < len(inside):
                    overdemanded[bid] = inside
            if overdemanded:
                deficits = {
                    bid: len(inside) - remaining[bid]
                    for bid, inside in overdemanded.items()
                }
                maximal = [
                    bid
                    for bid in overdemanded
                    if not any(
                        instance.bundles[bid].schools
                        < instance.bundles[other].schools
                        and deficits[bid] <= deficits[other]
                        for other in overdemanded
                    )
                ]
                bid = min(maximal, key=instance.bundle_order.index)
                contenders = sorted(
                    (i for i in batch if targets[i] in overdemanded[bid]),
                    key=lambda i: tb_rank[i],
                )
                taken = []
                for i in contenders:
                    if remaining[bid] == 0:
                        break
                    if remaining[targets[i]] == 0:
                        continue
                    _admit(instance, remaining, targets[i])
                    admitted[i] = targets[i]
                    unresolved.discard(i)
                    taken.append(i)
                    rnd.events.append(("admit", i, targets[i], dict(remaining)))
                remaining[bid] = 0
                _zero_cascade(instance, remaining)
                rnd.events.append(
                    ("overdemand", bid, sorted(overdemanded[bid]), taken)
                )
                continue

            for i in sorted(batch, key=instance.student_key):
                _admit(instance, remaining, targets[i])
                admitted[i] = targets[i]
                unresolved.discard(i)
                rnd.events.append(("admit", i, targets[i], dict(remaining)))

        for i in sorted(unresolved, key=instance.student_key):
            rnd.rejected.append(i)
            rnd.events.append(("reject", i, targets[i]))
            pointer[i] += 1
        held = admitted
        rnd.admitted = dict(admitted)
        trace.rounds.append(rnd)
        if all(
            i in admitted or pointer[i] >= len(rol[i]) for i in instance.students
        ):
            break
    else:
        raise AssertionError("round limit exceeded; engine failed to settle")

    return BundleMatching(instance, held), trace


def run_bundle_da(instance, rols, tiebreak=None, engine="auto"):
    """Dispatch to the simple or general engine; `auto` prefers simple."""
    if engine == "simple":
        return run_bundle_da_simple(instance, rols)
    if engine == "general":
        return run_bundle_da_general(instance, rols, tiebreak)
    if engine != "auto":
        raise ValueError(f"unknown engine {engine!r}")
    if detect_simplicity(instance).simple:
        return run_bundle_da_simple(instance, rols)
    return run_bundle_da_general(instance, rols, tiebreak)


def engines_agree_on_simple(instance, rols, tiebreak=None):
    """Cross-check: do both bundle engines return the same matching?

    Both engines are deterministic, so this is a plain equality check.  The
    two can legitimately differ on a simple system when an overfull bundle
    forces the general engine to consult the tie-break order; see the test
    suite for a minimal three-student instance exhibiting this.
    """
    simple, _ = run_bundle_da_simple(instance, rols)
    general, _ = run_bundle_da_general(instance, rols, tiebreak)
    return simple == general
