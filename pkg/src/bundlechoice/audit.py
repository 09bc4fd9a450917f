"""Stability checkers, size-maximality oracles, and property harnesses.

Bundle-matching stability is checked clause by clause: individual
rationality, non-wastefulness (a desired bundle is exempt when some bundle
containing its schools is full), and justified envy in its three shapes —
same bundle, strictly smaller bundle, strictly larger bundle with every
intermediate bundle under quota.  Priority comparisons use the raw per-school
orders and require agreement across the relevant schools.

Seat-level (standard) stability is checked against the preferences a ROL
induces over individual schools: schools sharing a first-listed bundle form
one indifference class, and unlisted schools are unacceptable.

The oracles answer size-maximality questions by exhaustive backtracking over
individually rational assignments, with an explicit refusal above a
candidate-count bound — never a silent approximation.
"""

from itertools import permutations

from .engines import run_bundle_da
from .model import UNMATCHED, induced_preference


class OracleBoundExceeded(Exception):
    """Raised when an exhaustive search would exceed its candidate bound."""


DEFAULT_ORACLE_BOUND = 10**7


class StabilityVerdict:
    """Outcome of a stability check: `stable` iff `violations` is empty.

    Violations are tuples: ("ir", i), ("waste", i, bundle),
    ("envy", i, j, bundle, case) with case in {1, 2, 3} for bundle
    matchings, and ("envy", i, j, school) for standard matchings.
    """

    def __init__(self, violations):
        self.violations = tuple(violations)
        self.stable = not self.violations

    def __bool__(self):
        return self.stable

    def __repr__(self):
        word = "stable" if self.stable else "unstable"
        return f"StabilityVerdict({word}, {len(self.violations)} violations)"


class EnvyPairReport:
    """Deduplicated ordered envy pairs with the first witnessing case."""

    def __init__(self, verdict):
        pairs = {}
        for violation in verdict.violations:
            if violation[0] != "envy":
                continue
            i, j = violation[1], violation[2]
            pairs.setdefault((i, j), violation[-1])
        self.pairs = tuple((i, j, case) for (i, j), case in pairs.items())

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)


def _rol_rank(rol, bundle_id):
    """Position of a bundle in a ROL; unmatched sits below everything."""
    if bundle_id is not UNMATCHED and bundle_id in rol:
        return rol.index(bundle_id)
    return len(rol)


def _prefers_on_all(instance, schools, i, j):
    """True iff i outranks j at every one of the given schools."""
    return all(instance.prefers(s, i, j) for s in schools)


def check_bundle_stability(nu, rols, instance=None):
    """Check IR, non-wastefulness, and three-case justified envy."""
    instance = instance or nu.instance
    rol = {i: tuple(rols.get(i, ())) for i in instance.students}
    violations = []

    for i in instance.students:
        if nu[i] is not UNMATCHED and nu[i] not in rol[i]:
            violations.append(("ir", i))

    full = {
        bid
        for bid in instance.bundle_order
        if nu.occupancy(bid) == instance.bundle_quota(bid)
    }
    for i in instance.students:
        current = _rol_rank(rol[i], nu[i])
        for slot in range(current):
            desired = rol[i][slot]
            if not any(sup in full for sup in instance.sup_bundles(desired)):
                violations.append(("waste", i, desired))

    for i in instance.students:
        current = _rol_rank(rol[i], nu[i])
        for slot in range(current):
            desired = rol[i][slot]
            want = instance.bundles[desired].schools
            for j in instance.students:
                if j == i or nu[j] is UNMATCHED:
                    continue
                have = instance.bundles[nu[j]].schools
                if have == want:
                    if nu[j] == desired and _prefers_on_all(instance, want, i, j):
                        violations.append(("envy", i, j, desired, 1))
                elif have < want:
                    if _prefers_on_all(instance, have, i, j):
                        violations.append(("envy", i, j, desired, 2))
                elif have > want:
                    between = [
                        bid
                        for bid in instance.bundle_order
                        if want <= instance.bundles[bid].schools < have
                    ]
                    if all(
                        nu.occupancy(bid) < instance.bundle_quota(bid)
                        for bid in between
                    ) and _prefers_on_all(instance, want, i, j):
                        violations.append(("envy", i, j, desired, 3))
    return StabilityVerdict(violations)


def check_standard_stability(mu, rols, instance=None):
    """Classic stability under the school preferences a ROL induces."""
    instance = instance or mu.instance
    induced = {
        i: induced_preference(rols.get(i, ()), instance)
        for i in instance.students
    }
    violations = []

    for i in instance.students:
        if mu[i] is not UNMATCHED and not induced[i].acceptable(mu[i]):
            violations.append(("ir", i))

    for i in instance.students:
        for s in instance.school_order:
            if not induced[i].strictly_prefers(s, mu[i]):
                continue
            if mu.seated(s) < instance.schools[s].quota:
                violations.append(("waste", i, s))
                continue
            for j in mu.students_at(s):
                if instance.prefers(s, i, j):
                    violations.append(("envy", i, j, s))
    return StabilityVerdict(violations)


def _search_assignments(instance, options, accept):
    """Backtrack over per-student bundle options with quota pruning.

    `options` maps each student to the bundle ids (or UNMATCHED) to try, in
    scan order; the first assignment satisfying `accept` is returned, so the
    witness is deterministic.  Refuses outright when the option product
    exceeds the bound baked into `options` by the caller.
    """
    students = list(instance.students)
    remaining = {
        bid: instance.bundle_quota(bid) for bid in instance.bundle_order
    }
    assignment = {}

    def place(idx):
        if idx == len(students):
            return dict(assignment) if accept(assignment) else None
        i = students[idx]
        for choice in options[i]:
            if choice is UNMATCHED:
                assignment[i] = UNMATCHED
                found = place(idx + 1)
                del assignment[i]
                if found:
                    return found
                continue
            sups = instance.sup_bundles(choice)
            if any(remaining[sup] == 0 for sup in sups):
                continue
            for sup in sups:
                remaining[sup] -= 1
            assignment[i] = choice
            found = place(idx + 1)
            del assignment[i]
            for sup in sups:
                remaining[sup] += 1
            if found:
                return found
        return None

    return place(0)


def _check_bound(options, bound):
    total = 1
    for choices in options.values():
        total *= max(len(choices), 1)
        if total > bound:
            raise OracleBoundExceeded(
                f"{total}+ candidate assignments exceed the bound of {bound}"
            )


def oracle_size_maximal(nu, rols, instance=None, bound=DEFAULT_ORACLE_BOUND):
    """Is no IR assignment matching a strict superset of students?

    Returns (True, None) when nu is size-maximal, else (False, witness)
    where the witness is the first strictly-larger IR assignment found in
    canonical scan order.
    """
    instance = instance or nu.instance
    rol = {i: tuple(rols.get(i, ())) for i in instance.students}
    matched = {i for i in instance.students if nu[i] in rol[i]}
    options = {
        i: list(rol[i]) if i in matched else [UNMATCHED] + list(rol[i])
        for i in instance.students
    }
    _check_bound(options, bound)

    def accept(assignment):
        gained = [
            i
            for i in instance.students
            if i not in matched and assignment[i] is not UNMATCHED
        ]
        return bool(gained)

    witness = _search_assignments(instance, options, accept)
    return (witness is None), witness


def oracle_pareto_undominated_size_maximal(
    nu, rols, instance=None, bound=DEFAULT_ORACLE_BOUND
):
    """Is no IR assignment both strictly larger and weakly better for all?

    A dominating assignment must match every currently matched student to
    her old bundle or one she ranks higher, and match at least one
    additional student.  Returns (True, None) or (False, witness).
    """
    instance = instance or nu.instance
    rol = {i: tuple(rols.get(i, ())) for i in instance.students}
    matched = {i for i in instance.students if nu[i] in rol[i]}
    options = {}
    for i in instance.students:
        if i in matched:
            options[i] = list(rol[i][: rol[i].index(nu[i]) + 1])
        else:
            options[i] = [UNMATCHED] + list(rol[i])
    _check_bound(options, bound)

    def accept(assignment):
        gained = [
            i
            for i in instance.students
            if i not in matched and assignment[i] is not UNMATCHED
        ]
        return bool(gained)

    witness = _search_assignments(instance, options, accept)
    return (witness is None), witness


def find_stable_pareto_improvement(
    nu, rols, instance=None, bound=DEFAULT_ORACLE_BOUND
):
    """Search for a stable assignment that Pareto-improves on nu.

    Every student must end weakly better by her own ROL (unmatched counts
    as worst) and at least one strictly better; the result must itself pass
    check_bundle_stability.  Returns the first such assignment in scan
    order, or None.  Exhaustive search; refuses above the candidate bound.
    """
    instance = instance or nu.instance
    rol = {i: tuple(rols.get(i, ())) for i in instance.students}
    options = {}
    for i in instance.students:
        current = _rol_rank(rol[i], nu[i])
        weakly_better = list(rol[i][:current])
        if nu[i] is not UNMATCHED and nu[i] in rol[i]:
            weakly_better.append(nu[i])
        else:
            weakly_better.append(UNMATCHED)
        options[i] = weakly_better
    _check_bound(options, bound)

    def accept(assignment):
        if all(assignment[i] == nu[i] for i in instance.students):
            return False
        candidate = type(nu)(instance, assignment)
        return check_bundle_stability(candidate, rols, instance).stable

    found = _search_assignments(instance, options, accept)
    if found is None:
        return None
    return type(nu)(instance, found)


def property_truthtelling(instance, rols, student):
    """Can reordering a fixed bundle set ever beat the submitted order?

    Runs the engine once per reordering of the student's ROL and compares
    each outcome by the *original* order.  Returns None on pass, or a
    violation tuple ("truthtelling", student, reordering, new assignment).
    """
    rol = tuple(rols[student])
    baseline, _ = run_bundle_da(instance, rols)
    base_rank = _rol_rank(rol, baseline[student])
    for reordered in permutations(rol):
        if reordered == rol:
            continue
        trial = dict(rols)
        trial[student] = list(reordered)
        outcome, _ = run_bundle_da(instance, trial)
        if _rol_rank(rol, outcome[student]) < base_rank:
            return ("truthtelling", student, reordered, outcome[student])
    return None


def property_supbundle_monotone(instance, rols, student, b, b_sup):
    """Does replacing a listed bundle with an unlisted sup-bundle behave?

    Expected movement: an assignment above b is untouched; an assignment
    at b moves to b_sup; an assignment below b (or none) moves to b_sup or
    stays.  Returns None on pass, or ("supbundle", student, clause,
    old assignment, new assignment).
    """
    rol = tuple(rols[student])
    if b not in rol:
        raise ValueError(f"bundle {b} is not in the student's ROL")
    if b_sup in rol:
        raise ValueError(f"sup-bundle {b_sup} is already listed")
    if not instance.bundles[b].schools < instance.bundles[b_sup].schools:
        raise ValueError(f"{b_sup} does not strictly contain {b}")

    baseline, _ = run_bundle_da(instance, rols)
    trial = dict(rols)
    trial[student] = [b_sup if bid == b else bid for bid in rol]
    outcome, _ = run_bundle_da(instance, trial)

    old, new = baseline[student], outcome[student]
    slot = rol.index(b)
    if _rol_rank(rol, old) < slot:
        if new != old:
            return ("supbundle", student, 1, old, new)
    elif old == b:
        if new != b_sup:
            return ("supbundle", student, 2, old, new)
    else:
        if new not in (b_sup, old):
            return ("supbundle", student, 3, old, new)
    if old is not UNMATCHED and new is UNMATCHED:
        return ("supbundle", student, "matched-stays-matched", old, new)
    return None


def audit_rol_dominance(rol, instance, indifference_classes=None):
    """Flag dominated ROL patterns.

    Warns when a bundle appears below a bundle containing all its schools
    (the lower entry can never be reached with a seat to give), and, given
    the student's declared indifference classes, when a listed bundle sits
    strictly inside a class whose exact bundle exists.  Slots are reported
    1-indexed.
    """
    rol = list(rol)
    warnings = []
    for later in range(len(rol)):
        lower = instance.bundles[rol[later]].schools
        for earlier in range(later):
            upper = instance.bundles[rol[earlier]].schools
            if lower < upper:
                warnings.append(
                    ("dominated", later + 1, rol[later], rol[earlier])
                )
                break
    for classes in indifference_classes or ():
        classes = frozenset(classes)
        whole = instance.bundle_for_schools(classes)
        if whole is None:
            continue
        for slot, bid in enumerate(rol):
            if instance.bundles[bid].schools < classes:
                warnings.append(("indifferent-sub-report", slot + 1, bid, whole.id))
    return warnings
